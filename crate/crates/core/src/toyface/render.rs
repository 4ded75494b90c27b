use super::{Image, Resolution, ToyFaceParams};
use crate::error::Result;

/// Feature layout at the reference 32 px scale.
pub(crate) const REFERENCE_SIZE: f64 = 32.0;
pub(crate) const EYE_ROW: f64 = 9.0;
pub(crate) const NOSE_ROW: f64 = 14.5;
pub(crate) const MOUTH_ROW: f64 = 24.0;
/// Feature displacement per degree of yaw/pitch at the reference scale.
pub(crate) const PX_PER_DEGREE: f64 = 0.25;
/// Mouth curvature (1/px) at full expression.
pub(crate) const MAX_CURVATURE: f64 = 0.15;
/// Relative mouth brightening at full expression.
pub(crate) const MOUTH_BRIGHTENING: f64 = 1.0;

fn lerp(lo: f64, hi: f64, t: f64) -> f64 {
    lo + (hi - lo) * t
}

/// Resolved geometry of one face in pixel coordinates (pixel `i` is centred on `i`).
#[derive(Debug, Clone)]
pub(crate) struct Geometry {
    pub cx: f64,
    pub eye_y: f64,
    pub eye_dx: f64,
    pub eye_sigma: f64,
    pub eye_amp: f64,
    pub nose_y: f64,
    pub nose_sigma: f64,
    pub nose_amp: f64,
    pub mouth_y: f64,
    pub mouth_half_width: f64,
    pub mouth_sigma: f64,
    pub mouth_amp: f64,
    pub curvature: f64,
    pub background: f64,
    pub gain: f64,
}

impl Geometry {
    pub fn new(p: &ToyFaceParams, res: Resolution) -> Self {
        let sx = res.width as f64 / REFERENCE_SIZE;
        let sy = res.height as f64 / REFERENCE_SIZE;
        let s = sx.min(sy);
        let id = &p.identity;
        let cx = (res.width as f64 - 1.0) / 2.0 + PX_PER_DEGREE * p.yaw * sx;
        let shift_y = PX_PER_DEGREE * p.pitch * sy;
        let eye_sigma = match p.softness {
            Some(soft) => lerp(0.9, 1.4, soft),
            None => lerp(0.9, 1.3, id[1]),
        };
        Self {
            cx,
            eye_y: EYE_ROW * sy + shift_y,
            eye_dx: lerp(4.0, 5.5, id[0]) * sx,
            eye_sigma: eye_sigma * s,
            eye_amp: lerp(0.35, 0.55, id[2]),
            nose_y: NOSE_ROW * sy + shift_y,
            nose_sigma: lerp(0.7, 1.0, id[3]) * s,
            nose_amp: lerp(0.2, 0.35, id[4]),
            mouth_y: MOUTH_ROW * sy + shift_y,
            mouth_half_width: lerp(4.5, 6.0, id[5]) * sx,
            mouth_sigma: lerp(0.8, 1.1, id[6]) * sy,
            mouth_amp: lerp(0.22, 0.3, id[7]) * (1.0 + MOUTH_BRIGHTENING * p.expression),
            curvature: MAX_CURVATURE * p.expression * sy / (sx * sx),
            background: lerp(0.1, 0.3, p.nuisance[0]),
            gain: lerp(0.85, 1.15, p.nuisance[1]),
        }
    }

    #[inline]
    fn intensity(&self, x: f64, y: f64) -> f64 {
        let blob = |dx: f64, dy: f64, sigma: f64| (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        let dx = x - self.cx;
        let eyes = self.eye_amp
            * (blob(dx + self.eye_dx, y - self.eye_y, self.eye_sigma)
                + blob(dx - self.eye_dx, y - self.eye_y, self.eye_sigma));
        let nose = self.nose_amp * blob(dx, y - self.nose_y, self.nose_sigma);
        let arc = self.mouth_y - self.curvature * dx * dx;
        let u = dx / self.mouth_half_width;
        let window = (-(u * u) * (u * u)).exp();
        let dy = y - arc;
        let mouth = self.mouth_amp * window * (-(dy * dy) / (2.0 * self.mouth_sigma * self.mouth_sigma)).exp();
        self.background + self.gain * (eyes + nose + mouth)
    }
}

/// Renders a toy face at `res`. Pure: equal inputs give bit-identical images.
pub fn render(params: &ToyFaceParams, res: Resolution) -> Result<Image> {
    params.validate()?;
    let g = Geometry::new(params, res);
    let mut pixels = Vec::with_capacity(res.pixels());
    for y in 0..res.height {
        for x in 0..res.width {
            pixels.push(g.intensity(x as f64, y as f64).clamp(0.0, 1.0));
        }
    }
    Image::new(res.width, res.height, pixels)
}
