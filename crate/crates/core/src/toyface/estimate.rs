use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::render::{render, EYE_ROW, MOUTH_ROW, REFERENCE_SIZE};
use super::{Image, Resolution, ToyFaceParams};
use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

/// Intensity above the background below which a pixel carries no mass.
const MASS_THRESHOLD: f64 = 0.03;
/// Columns closer than this to the face axis are excluded from the eye band.
const AXIS_EXCLUSION: f64 = 2.5;
const EYE_BAND_HALF: f64 = 4.0;
const EYE_SEARCH_LAST_ROW: f64 = 17.0;
const MOUTH_BAND_ABOVE: f64 = 7.0;
const MOUTH_BAND_BELOW: f64 = 3.0;

/// Raw pixel moments of a face image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// Horizontal mass centroid, pixels.
    pub cx: f64,
    /// Vertical centroid of the eye band, pixels.
    pub eye_cy: f64,
    /// Slope of mouth-band row position against squared distance from the face axis.
    pub mouth_bend: f64,
    /// Vertical standard deviation inside the eye band, pixels.
    pub eye_spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub scale: f64,
    pub offset: f64,
}

impl Affine {
    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }

    /// Ordinary least squares fit of `y ≈ scale·x + offset`.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let scale = sxy / sxx;
        Self {
            scale,
            offset: my - scale * mx,
        }
    }
}

/// Affine maps from moments to attribute units, fitted on a deterministic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub resolution: Resolution,
    pub yaw: Affine,
    pub pitch: Affine,
    pub expression: Affine,
    pub softness: Affine,
    /// Largest absolute residual on the calibration grid: yaw, pitch, expression, softness.
    pub max_residual: [f64; 4],
}

impl Calibration {
    /// Fits the maps on an 11×11×11 yaw/pitch/expression grid (mid-range
    /// identity and nuisance), plus an 11-point softness sweep.
    pub fn fit(res: Resolution) -> Result<Self> {
        const STEPS: usize = 11;
        let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (STEPS - 1) as f64;
        let mut rows = Vec::with_capacity(STEPS * STEPS * STEPS);
        for i in 0..STEPS {
            for j in 0..STEPS {
                for k in 0..STEPS {
                    let p =
                        ToyFaceParams::neutral().with_pose(lin(-30.0, 30.0, i), lin(-15.0, 15.0, j), lin(0.0, 1.0, k));
                    rows.push((p.clone(), moments(&render(&p, res)?)?));
                }
            }
        }
        let col = |f: &dyn Fn(&(ToyFaceParams, Moments)) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        let (cx, yaw) = (col(&|r| r.1.cx), col(&|r| r.0.yaw));
        let (cy, pitch) = (col(&|r| r.1.eye_cy), col(&|r| r.0.pitch));
        let (bend, expr) = (col(&|r| r.1.mouth_bend), col(&|r| r.0.expression));

        let mut soft_x = Vec::new();
        let mut soft_y = Vec::new();
        for i in 0..STEPS {
            let s = lin(0.0, 1.0, i);
            let mut p = ToyFaceParams::neutral();
            p.softness = Some(s);
            soft_x.push(moments(&render(&p, res)?)?.eye_spread);
            soft_y.push(s);
        }

        let maps = [
            Affine::fit(&cx, &yaw),
            Affine::fit(&cy, &pitch),
            Affine::fit(&bend, &expr),
            Affine::fit(&soft_x, &soft_y),
        ];
        let resid = |a: &Affine, xs: &[f64], ys: &[f64]| {
            xs.iter()
                .zip(ys)
                .map(|(x, y)| (a.apply(*x) - y).abs())
                .fold(0.0, f64::max)
        };
        Ok(Self {
            resolution: res,
            yaw: maps[0],
            pitch: maps[1],
            expression: maps[2],
            softness: maps[3],
            max_residual: [
                resid(&maps[0], &cx, &yaw),
                resid(&maps[1], &cy, &pitch),
                resid(&maps[2], &bend, &expr),
                resid(&maps[3], &soft_x, &soft_y),
            ],
        })
    }

    pub fn encode(&self, w: &mut ByteWriter) {
        w.u32(self.resolution.width as u32);
        w.u32(self.resolution.height as u32);
        for a in [self.yaw, self.pitch, self.expression, self.softness] {
            w.f64(a.scale);
            w.f64(a.offset);
        }
        w.f64s(self.max_residual);
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let resolution = Resolution {
            width: r.u32()? as usize,
            height: r.u32()? as usize,
        };
        let mut maps = [Affine {
            scale: 0.0,
            offset: 0.0,
        }; 4];
        for m in maps.iter_mut() {
            m.scale = r.f64()?;
            m.offset = r.f64()?;
        }
        let v = r.f64s(4)?;
        Ok(Self {
            resolution,
            yaw: maps[0],
            pitch: maps[1],
            expression: maps[2],
            softness: maps[3],
            max_residual: [v[0], v[1], v[2], v[3]],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeEstimate {
    pub yaw: f64,
    pub pitch: f64,
    pub expression: f64,
    pub softness: f64,
}

impl AttributeEstimate {
    /// Values in schema order for the first `count` attributes.
    pub fn values(&self, count: usize) -> Vec<f64> {
        [self.yaw, self.pitch, self.expression, self.softness][..count.min(4)].to_vec()
    }
}

#[derive(Debug, Clone)]
pub struct Estimator {
    pub calibration: Calibration,
}

impl Estimator {
    pub fn new(res: Resolution) -> Result<Self> {
        Ok(Self {
            calibration: Calibration::fit(res)?,
        })
    }

    /// Process-wide cached estimator for a resolution.
    pub fn shared(res: Resolution) -> Result<Arc<Estimator>> {
        static CACHE: OnceLock<Mutex<HashMap<Resolution, Arc<Estimator>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(e) = cache.lock().expect("estimator cache").get(&res) {
            return Ok(e.clone());
        }
        let est = Arc::new(Estimator::new(res)?);
        Ok(cache.lock().expect("estimator cache").entry(res).or_insert(est).clone())
    }

    pub fn estimate(&self, image: &Image) -> Result<AttributeEstimate> {
        if image.resolution() != self.calibration.resolution {
            return Err(Error::Estimation(format!(
                "calibrated for {:?}, got {}x{}",
                self.calibration.resolution, image.width, image.height
            )));
        }
        let m = moments(image)?;
        let c = &self.calibration;
        Ok(AttributeEstimate {
            yaw: c.yaw.apply(m.cx),
            pitch: c.pitch.apply(m.eye_cy),
            expression: c.expression.apply(m.mouth_bend),
            softness: c.softness.apply(m.eye_spread),
        })
    }
}

/// Estimates yaw, pitch and expression (and softness) of a toy-face image.
pub fn estimate_attributes(image: &Image) -> Result<AttributeEstimate> {
    Estimator::shared(image.resolution())?.estimate(image)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Extracts the pixel moments the calibrated maps consume.
pub fn moments(image: &Image) -> Result<Moments> {
    let (w, h) = (image.width, image.height);
    if w < 4 || h < 4 {
        return Err(Error::Estimation("image too small".into()));
    }
    let sx = w as f64 / REFERENCE_SIZE;
    let sy = h as f64 / REFERENCE_SIZE;

    let mut border = Vec::with_capacity(2 * (w + h));
    for x in 0..w {
        border.push(image.get(x, 0));
        border.push(image.get(x, h - 1));
    }
    for y in 1..h - 1 {
        border.push(image.get(0, y));
        border.push(image.get(w - 1, y));
    }
    let bg = median(border);
    let mass = |x: usize, y: usize| (image.get(x, y) - bg - MASS_THRESHOLD).max(0.0);

    let (mut total, mut mx) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let m = mass(x, y);
            total += m;
            mx += m * x as f64;
        }
    }
    if total <= 0.0 {
        return Err(Error::Estimation("image carries no feature mass".into()));
    }
    let cx = mx / total;
    let off_axis = |x: usize| (x as f64 - cx).abs() >= AXIS_EXCLUSION * sx;

    // Eye row: strongest off-axis row in the upper part, then a band centroid
    // refined once around its own estimate.
    let last_row = ((EYE_SEARCH_LAST_ROW * sy) as usize).min(h - 1);
    let row_mass = |y: usize| (0..w).filter(|&x| off_axis(x)).map(|x| mass(x, y)).sum::<f64>();
    let peak = (0..=last_row)
        .max_by(|&a, &b| row_mass(a).total_cmp(&row_mass(b)))
        .expect("non-empty row range");
    let band_stats = |center: f64| -> Option<(f64, f64)> {
        let half = EYE_BAND_HALF * sy;
        let lo = (center - half).round().max(0.0) as usize;
        let hi = ((center + half).round() as usize).min(h - 1);
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for y in lo..=hi {
            let rm = row_mass(y);
            m0 += rm;
            m1 += rm * y as f64;
            m2 += rm * (y as f64) * (y as f64);
        }
        (m0 > 0.0).then(|| {
            let mean = m1 / m0;
            (mean, (m2 / m0 - mean * mean).max(0.0).sqrt())
        })
    };
    let (first, _) = band_stats(peak as f64).ok_or_else(|| Error::Estimation("no eye mass".into()))?;
    let (eye_cy, eye_spread) = band_stats(first).ok_or_else(|| Error::Estimation("no eye mass".into()))?;

    // Mouth: regress row position on squared distance from the axis.
    let mouth_y = eye_cy + (MOUTH_ROW - EYE_ROW) * sy;
    let lo = (mouth_y - MOUTH_BAND_ABOVE * sy).round().max(0.0) as usize;
    let hi = ((mouth_y + MOUTH_BAND_BELOW * sy).round().max(0.0) as usize).min(h - 1);
    let (mut m0, mut sq, mut sy_, mut sqq, mut sqy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for y in lo..=hi {
        for x in 0..w {
            let m = mass(x, y);
            if m == 0.0 {
                continue;
            }
            let dx = (x as f64 - cx) / sx;
            let q = dx * dx;
            let yy = y as f64 / sy;
            m0 += m;
            sq += m * q;
            sy_ += m * yy;
            sqq += m * q * q;
            sqy += m * q * yy;
        }
    }
    if m0 <= 0.0 {
        return Err(Error::Estimation("no mouth mass".into()));
    }
    let var_q = sqq / m0 - (sq / m0).powi(2);
    let cov = sqy / m0 - (sq / m0) * (sy_ / m0);
    let mouth_bend = if var_q > 0.0 { cov / var_q } else { 0.0 };

    Ok(Moments {
        cx,
        eye_cy,
        mouth_bend,
        eye_spread: eye_spread / sy,
    })
}
