use serde::{Deserialize, Serialize};

use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Continuous { min: f64, max: f64, step: f64 },
    Discrete { levels: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn continuous(name: &str, min: f64, max: f64, step: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: AttributeKind::Continuous { min, max, step },
        }
    }

    pub fn discrete(name: &str, levels: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            kind: AttributeKind::Discrete { levels },
        }
    }

    /// First and last grid multiples of `step` inside `[min, max]`.
    fn grid(min: f64, max: f64, step: f64) -> (i64, i64) {
        let lo = (min / step - 1e-9).ceil() as i64;
        let hi = (max / step + 1e-9).floor() as i64;
        (lo, hi)
    }

    pub fn level_count(&self) -> usize {
        match &self.kind {
            AttributeKind::Continuous { min, max, step } => {
                let (lo, hi) = Self::grid(*min, *max, *step);
                (hi - lo + 1) as usize
            }
            AttributeKind::Discrete { levels } => levels.len(),
        }
    }

    pub fn level_value(&self, index: usize) -> f64 {
        match &self.kind {
            AttributeKind::Continuous { min, max, step } => {
                let (lo, _) = Self::grid(*min, *max, *step);
                (lo + index as i64) as f64 * step
            }
            AttributeKind::Discrete { levels } => levels[index],
        }
    }

    /// Snaps a raw value to its level index. Half-step ties round away from zero.
    pub fn quantize(&self, value: f64) -> Result<usize> {
        let err = || Error::Quantize {
            attribute: self.name.clone(),
            value,
        };
        if !value.is_finite() {
            return Err(err());
        }
        match &self.kind {
            AttributeKind::Continuous { min, max, step } => {
                if value < min - step || value > max + step {
                    return Err(err());
                }
                let (lo, hi) = Self::grid(*min, *max, *step);
                let k = ((value / step).round() as i64).clamp(lo, hi);
                Ok((k - lo) as usize)
            }
            AttributeKind::Discrete { levels } => levels.iter().position(|&l| l == value).ok_or_else(err),
        }
    }

    /// Declared value range (`min`/`max` of the level list for discrete attributes).
    pub fn range(&self) -> (f64, f64) {
        match &self.kind {
            AttributeKind::Continuous { min, max, .. } => (*min, *max),
            AttributeKind::Discrete { levels } => levels
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attributes: Vec<Attribute>,
}

/// Per-attribute level indices, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizedLabel(pub Vec<usize>);

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Schema("no attributes".into()));
        }
        for (i, a) in attributes.iter().enumerate() {
            if attributes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Schema(format!("duplicate attribute `{}`", a.name)));
            }
            match &a.kind {
                AttributeKind::Continuous { min, max, step } => {
                    if !(*step > 0.0) || !(min <= max) || !min.is_finite() || !max.is_finite() {
                        return Err(Error::Schema(format!("bad continuous range for `{}`", a.name)));
                    }
                    if a.level_count() == 0 {
                        return Err(Error::Schema(format!("`{}` has no grid point in range", a.name)));
                    }
                }
                AttributeKind::Discrete { levels } => {
                    if levels.is_empty() {
                        return Err(Error::Schema(format!("`{}` has an empty level list", a.name)));
                    }
                }
            }
        }
        Ok(Self { attributes })
    }

    /// Yaw and pitch on a 5 degree grid, expression in quarters; optional eye
    /// softness as a fourth attribute.
    pub fn toy(with_softness: bool) -> Self {
        let mut attrs = vec![
            Attribute::continuous("yaw", -30.0, 30.0, 5.0),
            Attribute::continuous("pitch", -15.0, 15.0, 5.0),
            Attribute::continuous("expression", 0.0, 1.0, 0.25),
        ];
        if with_softness {
            attrs.push(Attribute::continuous("softness", 0.0, 1.0, 0.25));
        }
        Self::new(attrs).expect("toy schema is valid")
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.attributes.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn quantize(&self, raw: &[f64]) -> Result<QuantizedLabel> {
        if raw.len() != self.len() {
            return Err(Error::Dimension {
                context: "quantize",
                expected: self.len(),
                got: raw.len(),
            });
        }
        self.attributes
            .iter()
            .zip(raw)
            .map(|(a, &v)| a.quantize(v))
            .collect::<Result<Vec<_>>>()
            .map(QuantizedLabel)
    }

    pub fn encode(&self, w: &mut ByteWriter) {
        w.u32(self.attributes.len() as u32);
        for a in &self.attributes {
            w.str(&a.name);
            match &a.kind {
                AttributeKind::Continuous { min, max, step } => {
                    w.u8(0);
                    w.f64s([*min, *max, *step]);
                }
                AttributeKind::Discrete { levels } => {
                    w.u8(1);
                    w.u32(levels.len() as u32);
                    w.f64s(levels.iter().copied());
                }
            }
        }
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let n = r.u32()? as usize;
        let mut attrs = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.str()?;
            let kind = match r.u8()? {
                0 => AttributeKind::Continuous {
                    min: r.f64()?,
                    max: r.f64()?,
                    step: r.f64()?,
                },
                1 => {
                    let k = r.u32()? as usize;
                    AttributeKind::Discrete { levels: r.f64s(k)? }
                }
                t => return Err(Error::Format(format!("unknown attribute kind {t}"))),
            };
            attrs.push(Attribute { name, kind });
        }
        Self::new(attrs)
    }
}
