//! Wire encodings: grayscale PNG in base64 and run-length masks.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use latorg::toyface::{Image, Resolution};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

/// Encodes an image as an 8-bit grayscale PNG, then base64.
pub fn image_to_png_base64(image: &Image) -> String {
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, image.width as u32, image.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        let data: Vec<u8> = image
            .pixels
            .iter()
            .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_image_data(&data).expect("in-memory PNG data");
    }
    STANDARD.encode(bytes)
}

/// Decodes a base64 PNG into a grayscale image. Color inputs are reduced
/// to luma; alpha is ignored.
pub fn png_base64_to_image(text: &str) -> Result<Image, ApiError> {
    let bytes = STANDARD
        .decode(text.trim())
        .map_err(|e| ApiError::bad_request(format!("image is not valid base64: {e}")))?;
    let bad = |e: png::DecodingError| ApiError::bad_request(format!("image is not a valid PNG: {e}"));
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(bad)?;
    let mut buf = vec![
        0;
        reader
            .output_buffer_size()
            .ok_or_else(|| ApiError::bad_request("PNG too large"))?
    ];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    let data = &buf[..info.buffer_size()];
    let channels = info.color_type.samples();
    let pixels = data
        .chunks_exact(channels)
        .map(|px| {
            let v = match channels {
                1 | 2 => f64::from(px[0]),
                _ => 0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2]),
            };
            v / 255.0
        })
        .collect();
    Image::new(info.width as usize, info.height as usize, pixels).map_err(ApiError::from)
}

/// Boolean grid as alternating run lengths, the first run having value `start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: usize,
    pub height: usize,
    pub start: bool,
    pub runs: Vec<usize>,
}

impl RleMask {
    pub fn encode(width: usize, height: usize, cells: &[bool]) -> Self {
        let start = cells.first().copied().unwrap_or(false);
        let mut runs = Vec::new();
        let mut current = start;
        let mut len = 0;
        for &c in cells {
            if c == current {
                len += 1;
            } else {
                runs.push(len);
                current = c;
                len = 1;
            }
        }
        if len > 0 {
            runs.push(len);
        }
        Self {
            width,
            height,
            start,
            runs,
        }
    }

    pub fn decode(&self) -> Result<Vec<bool>, ApiError> {
        let total: usize = self.runs.iter().sum();
        if total != self.width * self.height {
            return Err(ApiError::bad_request(format!(
                "mask runs cover {total} cells, grid has {}",
                self.width * self.height
            )));
        }
        let mut out = Vec::with_capacity(total);
        let mut value = self.start;
        for &r in &self.runs {
            out.extend(std::iter::repeat_n(value, r));
            value = !value;
        }
        Ok(out)
    }
}

pub fn check_resolution(image: &Image, res: Resolution) -> Result<(), ApiError> {
    if image.resolution() != res {
        return Err(ApiError::bad_request(format!(
            "image is {}x{}, model resolution is {}x{}",
            image.width, image.height, res.width, res.height
        )));
    }
    Ok(())
}
