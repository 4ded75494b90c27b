use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{AttributeSchema, QuantizedLabel};

/// Latent codes of the personal images ("anchors") with their quantized
/// attribute labels. Stored row-major, one anchor per row.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet<T> {
    dim: usize,
    data: Vec<T>,
    labels: Vec<QuantizedLabel>,
    schema: AttributeSchema,
}

impl<T: Scalar> AnchorSet<T> {
    pub fn new(anchors: Vec<Vec<T>>, labels: Vec<QuantizedLabel>, schema: AttributeSchema) -> Result<Self> {
        let dim = anchors.first().map(Vec::len).unwrap_or(0);
        let data = anchors.into_iter().flatten().collect();
        Self::from_flat(dim, data, labels, schema)
    }

    pub fn from_flat(dim: usize, data: Vec<T>, labels: Vec<QuantizedLabel>, schema: AttributeSchema) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                context: "anchor buffer",
                expected: dim.max(1),
                got: data.len(),
            });
        }
        let n = data.len() / dim;
        if n < schema.len() + 1 {
            return Err(Error::TooFewAnchors {
                needed: schema.len() + 1,
                got: n,
            });
        }
        if labels.len() != n {
            return Err(Error::Dimension {
                context: "anchor labels",
                expected: n,
                got: labels.len(),
            });
        }
        for label in &labels {
            if label.0.len() != schema.len()
                || label
                    .0
                    .iter()
                    .zip(&schema.attributes)
                    .any(|(&l, a)| l >= a.level_count())
            {
                return Err(Error::Schema(format!("label {:?} does not fit the schema", label.0)));
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite anchor".into()));
        }
        Ok(Self {
            dim,
            data,
            labels,
            schema,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn attribute_count(&self) -> usize {
        self.schema.len()
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn anchor(&self, n: usize) -> &[T] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn anchor_mut(&mut self, n: usize) -> &mut [T] {
        &mut self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> &[QuantizedLabel] {
        &self.labels
    }

    pub fn level(&self, n: usize, m: usize) -> usize {
        self.labels[n].0[m]
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// `W·α`: barycentric combination of the anchors.
    pub fn combine(&self, alpha: &[T]) -> Result<Vec<T>> {
        if alpha.len() != self.len() {
            return Err(Error::Dimension {
                context: "barycentric weights",
                expected: self.len(),
                got: alpha.len(),
            });
        }
        let mut w = vec![T::zero(); self.dim];
        for (a, row) in alpha.iter().zip(self.iter()) {
            crate::scalar::axpy(*a, row, &mut w);
        }
        Ok(w)
    }

    /// Same anchors with rows permuted by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let data = order.iter().flat_map(|&i| self.anchor(i).iter().copied()).collect();
        let labels = order.iter().map(|&i| self.labels[i].clone()).collect();
        Self {
            dim: self.dim,
            data,
            labels,
            schema: self.schema.clone(),
        }
    }

    pub fn snap_to_f32(&mut self) {
        self.data.iter_mut().for_each(|v| *v = crate::scalar::snap_f32(*v));
    }

    /// Latent codes only; labels are written separately by [`Self::encode_labels`].
    pub fn encode_latents(&self, w: &mut ByteWriter) {
        w.u32(self.len() as u32);
        w.u32(self.dim as u32);
        w.f64s(self.data.iter().map(|v| v.as_f64()));
    }

    pub fn encode_labels(&self, w: &mut ByteWriter) {
        w.u32(self.len() as u32);
        w.u32(self.attribute_count() as u32);
        for l in &self.labels {
            for &level in &l.0 {
                w.u32(level as u32);
            }
        }
    }

    pub fn decode(latents: &mut ByteReader<'_>, labels: &mut ByteReader<'_>, schema: AttributeSchema) -> Result<Self> {
        let n = latents.u32()? as usize;
        let dim = latents.u32()? as usize;
        let data = latents.f64s(n * dim)?.into_iter().map(T::lit).collect();
        let ln = labels.u32()? as usize;
        let m = labels.u32()? as usize;
        if ln != n || m != schema.len() {
            return Err(Error::Format(format!(
                "labels describe {ln} anchors with {m} attributes, expected {n} with {}",
                schema.len()
            )));
        }
        let labels = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| labels.u32().map(|v| v as usize))
                    .collect::<Result<Vec<_>>>()
                    .map(QuantizedLabel)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_flat(dim, data, labels, schema)
    }
}
