use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{sha256_hex, TrainConfig};
use crate::container::{ByteReader, ByteWriter, Container, Kind};
use crate::diffnet::Mlp;
use crate::error::{Error, Result};
use crate::latentspace::{AnchorSet, AttributeSchema, DirectionBasis};
use crate::scalar::Scalar;
use crate::toyface::{Image, Resolution};

/// Where a model came from. Contains no timestamps so identical runs give
/// identical files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub pretrained_hash: String,
    pub individual_seed: u64,
    pub rng_seed: u64,
    pub anchor_count: usize,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceRecord {
    provenance: Provenance,
    config: TrainConfig,
    width: usize,
    height: usize,
}

/// Tuned generator, organized anchors and their final direction basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonalizedModel<T> {
    pub generator: Mlp<T>,
    pub anchors: AnchorSet<T>,
    pub basis: DirectionBasis<T>,
    pub config: TrainConfig,
    pub provenance: Provenance,
    resolution: Resolution,
}

impl<T: Scalar> PersonalizedModel<T> {
    pub fn new(
        generator: Mlp<T>,
        anchors: AnchorSet<T>,
        basis: DirectionBasis<T>,
        config: TrainConfig,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = generator.output_dim();
        let side = (n as f64).sqrt().round() as usize;
        Self::with_resolution(
            generator,
            anchors,
            basis,
            config,
            provenance,
            Resolution {
                width: side,
                height: n / side.max(1),
            },
        )
    }

    pub fn with_resolution(
        generator: Mlp<T>,
        anchors: AnchorSet<T>,
        basis: DirectionBasis<T>,
        config: TrainConfig,
        provenance: Provenance,
        resolution: Resolution,
    ) -> Result<Self> {
        if generator.input_dim() != anchors.dim() {
            return Err(Error::Dimension {
                context: "generator input vs anchor size",
                expected: anchors.dim(),
                got: generator.input_dim(),
            });
        }
        if generator.output_dim() != resolution.pixels() {
            return Err(Error::Dimension {
                context: "generator output vs resolution",
                expected: resolution.pixels(),
                got: generator.output_dim(),
            });
        }
        if basis.dim() != anchors.dim() || basis.attribute_count() != anchors.attribute_count() {
            return Err(Error::Format("basis does not match the anchors".into()));
        }
        if basis.bounds.len() != basis.attribute_count() {
            return Err(Error::Format("basis is missing hypercube bounds".into()));
        }
        Ok(Self {
            generator,
            anchors,
            basis,
            config,
            provenance,
            resolution,
        })
    }

    pub fn schema(&self) -> &AttributeSchema {
        self.anchors.schema()
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn latent_dim(&self) -> usize {
        self.anchors.dim()
    }

    pub fn generate(&self, latent: &[T]) -> Result<Image> {
        generate_with(&self.generator, self.resolution, latent)
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(Kind::Model);
        let mut w = ByteWriter::default();
        self.schema().encode(&mut w);
        c.push(b"SCHM", w.into_inner());
        let mut w = ByteWriter::default();
        self.generator.encode(&mut w);
        c.push(b"GENR", w.into_inner());
        let mut w = ByteWriter::default();
        self.anchors.encode_latents(&mut w);
        c.push(b"ANCH", w.into_inner());
        let mut w = ByteWriter::default();
        self.anchors.encode_labels(&mut w);
        c.push(b"LABL", w.into_inner());
        let mut w = ByteWriter::default();
        self.basis.encode(&mut w);
        c.push(b"BASS", w.into_inner());
        let record = ProvenanceRecord {
            provenance: self.provenance.clone(),
            config: self.config.clone(),
            width: self.resolution.width,
            height: self.resolution.height,
        };
        let mut w = ByteWriter::default();
        w.str(&serde_json::to_string(&record).expect("provenance serializes"));
        c.push(b"PROV", w.into_inner());
        c
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_container().to_bytes()
    }

    /// Hex SHA-256 of the serialized model.
    pub fn digest(&self) -> String {
        sha256_hex(&self.to_bytes())
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let mut r = ByteReader::new(c.section(b"SCHM")?);
        let schema = AttributeSchema::decode(&mut r)?;
        r.finish()?;
        let mut r = ByteReader::new(c.section(b"GENR")?);
        let generator = Mlp::decode(&mut r)?;
        r.finish()?;
        let mut lat = ByteReader::new(c.section(b"ANCH")?);
        let mut lab = ByteReader::new(c.section(b"LABL")?);
        let anchors = AnchorSet::decode(&mut lat, &mut lab, schema)?;
        lat.finish()?;
        lab.finish()?;
        let mut r = ByteReader::new(c.section(b"BASS")?);
        let basis = DirectionBasis::decode(&mut r)?;
        r.finish()?;
        let mut r = ByteReader::new(c.section(b"PROV")?);
        let record: ProvenanceRecord = serde_json::from_str(&r.str()?)?;
        r.finish()?;
        Self::with_resolution(
            generator,
            anchors,
            basis,
            record.config,
            record.provenance,
            Resolution {
                width: record.width,
                height: record.height,
            },
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_container(&Container::from_bytes(bytes)?.expect_kind(Kind::Model)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write_file(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read_file(path)?.expect_kind(Kind::Model)?)
    }
}

pub fn generate_with<T: Scalar>(generator: &Mlp<T>, res: Resolution, latent: &[T]) -> Result<Image> {
    Image::from_values(res, &generator.forward(latent)?)
}
