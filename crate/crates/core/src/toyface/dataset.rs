use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::design::stratified_design;
use super::{
    render, Calibration, Estimator, Image, Resolution, ToyFaceParams, EXPRESSION_RANGE, IDENTITY_DIM, PITCH_RANGE,
    YAW_RANGE,
};
use crate::container::{ByteReader, ByteWriter, Container, Kind};
use crate::error::{Error, Result};
use crate::latentspace::AttributeSchema;

/// Rendering options shared by every dataset of one world.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorldConfig {
    pub resolution: Resolution,
    /// Adds eye softness as a fourth attribute.
    pub softness: bool,
}

impl WorldConfig {
    pub fn schema(&self) -> AttributeSchema {
        AttributeSchema::toy(self.softness)
    }
}

/// Rendered toy faces with their ground-truth parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub individual_seed: u64,
    pub items: Vec<(Image, ToyFaceParams)>,
    pub schema: AttributeSchema,
}

const IDENTITY_SALT: u64 = 0x1_de47_1735;

fn identity_for(individual_seed: u64) -> [f64; IDENTITY_DIM] {
    let mut rng = ChaCha8Rng::seed_from_u64(individual_seed ^ IDENTITY_SALT);
    let mut id = [0.0; IDENTITY_DIM];
    id.iter_mut().for_each(|v| *v = rng.random());
    id
}

/// `n` poses of one identity from a decorrelated stratified design over
/// yaw, pitch, expression, optional softness and the nuisance factors.
fn designed_poses(rng: &mut ChaCha8Rng, identity: [f64; IDENTITY_DIM], softness: bool, n: usize) -> Vec<ToyFaceParams> {
    let columns = if softness { 6 } else { 5 };
    let d = stratified_design(n, columns, rng);
    let lerp = |(lo, hi): (f64, f64), t: f64| lo + (hi - lo) * t;
    (0..n)
        .map(|i| {
            let tail = if softness { 4 } else { 3 };
            ToyFaceParams {
                identity,
                yaw: lerp(YAW_RANGE, d[0][i]),
                pitch: lerp(PITCH_RANGE, d[1][i]),
                expression: lerp(EXPRESSION_RANGE, d[2][i]),
                softness: softness.then(|| d[3][i]),
                nuisance: [d[tail][i], d[tail + 1][i]],
            }
        })
        .collect()
}

/// One individual seen `n` times under designed pose, expression and nuisance.
pub fn make_dataset(individual_seed: u64, n: usize, rng_seed: u64) -> Result<Dataset> {
    make_dataset_with(&WorldConfig::default(), individual_seed, n, rng_seed)
}

pub fn make_dataset_with(world: &WorldConfig, individual_seed: u64, n: usize, rng_seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let identity = identity_for(individual_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let items = designed_poses(&mut rng, identity, world.softness, n)
        .into_iter()
        .map(|p| Ok((render(&p, world.resolution)?, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        individual_seed,
        items,
        schema: world.schema(),
    })
}

/// Many individuals (`identities` × `per_identity` faces) for generator pretraining.
pub fn make_population(world: &WorldConfig, identities: usize, per_identity: usize, seed: u64) -> Result<Dataset> {
    if identities == 0 || per_identity == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(identities * per_identity);
    for i in 0..identities {
        let identity = identity_for(seed.wrapping_mul(1_000_003).wrapping_add(i as u64 + 1));
        for p in designed_poses(&mut rng, identity, world.softness, per_identity) {
            items.push((render(&p, world.resolution)?, p));
        }
    }
    Ok(Dataset {
        individual_seed: seed,
        items,
        schema: world.schema(),
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn resolution(&self) -> Resolution {
        self.items[0].0.resolution()
    }

    pub fn images(&self) -> impl Iterator<Item = &Image> {
        self.items.iter().map(|(img, _)| img)
    }

    pub fn world(&self) -> WorldConfig {
        WorldConfig {
            resolution: self.resolution(),
            softness: self.items[0].1.softness.is_some(),
        }
    }

    pub fn to_container(&self) -> Result<Container> {
        let res = self.resolution();
        let mut c = Container::new(Kind::Dataset);
        let mut meta = ByteWriter::default();
        meta.u64(self.individual_seed);
        meta.u32(res.width as u32);
        meta.u32(res.height as u32);
        meta.u32(self.items.len() as u32);
        c.push(b"META", meta.into_inner());

        let mut schema = ByteWriter::default();
        self.schema.encode(&mut schema);
        Estimator::shared(res)?.calibration.encode(&mut schema);
        c.push(b"SCHM", schema.into_inner());

        for (img, p) in &self.items {
            let mut w = ByteWriter::default();
            for &v in &img.pixels {
                w.f32(v as f32);
            }
            w.f64s(p.to_record());
            c.push(b"ITEM", w.into_inner());
        }
        Ok(c)
    }

    /// Reads a dataset; images are re-rendered from their stored parameters
    /// after checking the stored 32-bit pixels agree.
    pub fn from_container(c: &Container) -> Result<Self> {
        let mut meta = ByteReader::new(c.section(b"META")?);
        let individual_seed = meta.u64()?;
        let res = Resolution {
            width: meta.u32()? as usize,
            height: meta.u32()? as usize,
        };
        let count = meta.u32()? as usize;
        meta.finish()?;
        let mut sr = ByteReader::new(c.section(b"SCHM")?);
        let schema = AttributeSchema::decode(&mut sr)?;
        let _calibration = Calibration::decode(&mut sr)?;
        sr.finish()?;

        let mut items = Vec::with_capacity(count);
        for payload in c.sections(b"ITEM") {
            let mut r = ByteReader::new(payload);
            let stored = (0..res.pixels()).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
            let params = ToyFaceParams::from_record(&r.f64s(14)?);
            r.finish()?;
            let img = render(&params, res)?;
            let drift = img
                .pixels
                .iter()
                .zip(&stored)
                .map(|(a, &b)| (a - b as f64).abs())
                .fold(0.0, f64::max);
            if drift > 1e-6 {
                return Err(Error::Format(format!(
                    "stored pixels disagree with parameters by {drift}"
                )));
            }
            items.push((img, params));
        }
        if items.len() != count {
            return Err(Error::Format(format!("expected {count} items, found {}", items.len())));
        }
        if items.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            individual_seed,
            items,
            schema,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container()?.write_file(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read_file(path)?.expect_kind(Kind::Dataset)?)
    }

    /// First `n` items as a new dataset.
    pub fn subset(&self, n: usize) -> Self {
        Self {
            individual_seed: self.individual_seed,
            items: self.items[..n.min(self.items.len())].to_vec(),
            schema: self.schema.clone(),
        }
    }
}
