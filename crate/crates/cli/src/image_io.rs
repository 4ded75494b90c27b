//! 8-bit PGM/PNG image files and the raw float sidecar.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use latorg::toyface::Image;

fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn to_bytes(image: &Image) -> Vec<u8> {
    image
        .pixels
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Writes `.png` as grayscale PNG and anything else as binary PGM.
pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    let data = to_bytes(image);
    if is_png(path) {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), image.width as u32, image.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header()?.write_image_data(&data)?;
    } else {
        let mut bytes = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
        bytes.extend(data);
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Path of the exact float sidecar next to an exported image.
pub fn raw_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".raw.json");
    PathBuf::from(s)
}

pub fn write_raw(path: &Path, image: &Image) -> Result<()> {
    fs::write(raw_path(path), serde_json::to_string(&image.pixels)?)?;
    Ok(())
}

fn read_pgm(bytes: &[u8]) -> Result<Image> {
    // header: magic, width, height, maxval, separated by whitespace; `#` comments
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            bail!("truncated PGM header");
        }
        fields.push(std::str::from_utf8(&bytes[start..i])?.to_string());
    }
    if fields[0] != "P5" {
        bail!("only binary PGM (P5) is supported, got {}", fields[0]);
    }
    let (w, h, max): (usize, usize, u32) = (fields[1].parse()?, fields[2].parse()?, fields[3].parse()?);
    if max == 0 || max > 255 {
        bail!("unsupported PGM maxval {max}");
    }
    let data = bytes.get(i + 1..i + 1 + w * h).context("truncated PGM data")?;
    let pixels = data.iter().map(|&b| f64::from(b) / f64::from(max)).collect();
    Ok(Image::new(w, h, pixels)?)
}

fn read_png(bytes: &[u8]) -> Result<Image> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size().context("PNG too large")?];
    let info = reader.next_frame(&mut buf)?;
    let channels = info.color_type.samples();
    let pixels = buf[..info.buffer_size()]
        .chunks_exact(channels)
        .map(|px| match channels {
            1 | 2 => f64::from(px[0]) / 255.0,
            _ => (0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2])) / 255.0,
        })
        .collect();
    Ok(Image::new(info.width as usize, info.height as usize, pixels)?)
}

/// Reads a PNG or PGM; a `.raw.json` sidecar, when present, wins for exactness.
pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let image = if is_png(path) {
        read_png(&bytes)?
    } else {
        read_pgm(&bytes)?
    };
    let sidecar = raw_path(path);
    if sidecar.exists() {
        let pixels: Vec<f64> = serde_json::from_slice(&fs::read(&sidecar)?)?;
        return Ok(Image::new(image.width, image.height, pixels)?);
    }
    Ok(image)
}
