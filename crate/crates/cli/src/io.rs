//! Image and file I/O. Inputs are limited to 8-bit grayscale and 24-bit
//! colour in lossless formats; outputs are PNG with provenance text chunks,
//! or text files with a `<name>.meta.json` sidecar. Every write goes to a
//! temporary file in the target directory and is renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use edgesal_core::labelgen::Mask;
use edgesal_core::Tensor;
use image::{DynamicImage, ImageFormat, ImageReader};

use crate::config::Provenance;
use crate::error::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `bytes` to `path` via a temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    ensure_dir(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Writes a text artifact and its provenance sidecar.
pub fn write_with_sidecar(path: &Path, bytes: &[u8], prov: &Provenance) -> CliResult<()> {
    write_atomic(path, bytes)?;
    write_atomic(&sidecar_path(path), prov.to_json().as_bytes())
}

fn decode(path: &Path) -> CliResult<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| CliError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| CliError::io(path, e))?;
    let ext_jpeg = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "jpg" | "jpeg"));
    if reader.format() == Some(ImageFormat::Jpeg) || ext_jpeg {
        return Err(CliError::Data(format!(
            "{}: lossy JPEG input is not accepted; convert to PNG",
            path.display()
        )));
    }
    reader.decode().map_err(|e| CliError::io(path, e))
}

fn unsupported(path: &Path, img: &DynamicImage) -> CliError {
    CliError::Data(format!(
        "{}: unsupported pixel format {:?}; expected 8-bit grayscale or 24-bit RGB",
        path.display(),
        img.color()
    ))
}

/// Reads an sRGB image as a `3 x H x W` tensor in `[0, 1]`. Grayscale
/// files are replicated to three channels.
pub fn read_rgb(path: &Path) -> CliResult<Tensor> {
    let img = decode(path)?;
    let rgb = match &img {
        DynamicImage::ImageRgb8(i) => i.clone(),
        DynamicImage::ImageLuma8(_) => img.to_rgb8(),
        _ => return Err(unsupported(path, &img)),
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut t = Tensor::zeros(&[3, h, w]);
    for (x, y, p) in rgb.enumerate_pixels() {
        for c in 0..3 {
            t.set(c, y as usize, x as usize, f64::from(p[c]) / 255.0);
        }
    }
    Ok(t)
}

fn read_gray(path: &Path) -> CliResult<(usize, usize, Vec<u8>)> {
    let img = decode(path)?;
    match img {
        DynamicImage::ImageLuma8(g) => Ok((g.height() as usize, g.width() as usize, g.into_raw())),
        other => Err(unsupported(path, &other)),
    }
}

/// Reads a binary mask stored as 8-bit grayscale with values {0, 255} or
/// {0, 1}.
pub fn read_mask(path: &Path) -> CliResult<Mask> {
    let (h, w, raw) = read_gray(path)?;
    let max = raw.iter().copied().max().unwrap_or(0);
    let on = if max > 1 { 255 } else { 1 };
    if let Some(v) = raw.iter().find(|&&v| v != 0 && v != on) {
        return Err(CliError::Data(format!(
            "{}: mask is not binary (value {v}; expected 0 and {on})",
            path.display()
        )));
    }
    Ok(Mask::from_bools(h, w, raw.iter().map(|&v| v == on).collect())?)
}

/// Reads an 8-bit grayscale saliency map as `1 x H x W` in `[0, 1]`.
pub fn read_map(path: &Path) -> CliResult<Tensor> {
    let (h, w, raw) = read_gray(path)?;
    Ok(Tensor::from_vec(&[1, h, w], raw.iter().map(|&v| f64::from(v) / 255.0).collect())?)
}

fn png_bytes(width: usize, height: usize, color: png::ColorType, data: &[u8], prov: &Provenance) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let text = [
            ("Software", format!("{} {}", prov.tool, prov.version)),
            ("edgesal:config-sha256", prov.config_sha256.clone()),
            ("edgesal:seed", prov.seed.to_string()),
        ];
        for (k, v) in text {
            enc.add_text_chunk(k.to_string(), v)
                .map_err(|e| CliError::Invariant(format!("png text chunk: {e}")))?;
        }
        let mut writer = enc
            .write_header()
            .map_err(|e| CliError::Invariant(format!("png header: {e}")))?;
        writer
            .write_image_data(data)
            .map_err(|e| CliError::Invariant(format!("png data: {e}")))?;
    }
    Ok(out)
}

/// Writes 8-bit grayscale pixels (row-major) as PNG.
pub fn write_gray_png(path: &Path, height: usize, width: usize, data: &[u8], prov: &Provenance) -> CliResult<()> {
    write_atomic(path, &png_bytes(width, height, png::ColorType::Grayscale, data, prov)?)
}

/// Writes a `1 x H x W` map in `[0, 1]` as an 8-bit PNG.
pub fn write_map_png(path: &Path, map: &Tensor, prov: &Provenance) -> CliResult<()> {
    let (_, h, w) = map.chw()?;
    let data: Vec<u8> = map.data().iter().map(|&v| edgesal_core::metrics::quantize(v)).collect();
    write_gray_png(path, h, w, &data, prov)
}

pub fn write_mask_png(path: &Path, mask: &Mask, prov: &Provenance) -> CliResult<()> {
    let data: Vec<u8> = mask.as_slice().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_gray_png(path, mask.height(), mask.width(), &data, prov)
}

/// Writes a `3 x H x W` image in `[0, 1]` as 24-bit RGB PNG.
pub fn write_rgb_png(path: &Path, image: &Tensor, prov: &Provenance) -> CliResult<()> {
    let (_, h, w) = image.chw()?;
    let mut data = Vec::with_capacity(3 * h * w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                data.push(edgesal_core::metrics::quantize(image.at(c, y, x)));
            }
        }
    }
    write_atomic(path, &png_bytes(w, h, png::ColorType::Rgb, &data, prov)?)
}

/// Text chunks of a PNG file as `(keyword, text)` pairs.
pub fn png_text(path: &Path) -> CliResult<Vec<(String, String)>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let reader = decoder.read_info().map_err(|e| CliError::io(path, e))?;
    Ok(reader
        .info()
        .uncompressed_latin1_text
        .iter()
        .map(|t| (t.keyword.clone(), t.text.clone()))
        .collect())
}
