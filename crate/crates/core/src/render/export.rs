//! On-disk formats for rendered buffers.
//!
//! - color: 8-bit RGB PNG
//! - face ids: 16-bit grayscale PNG holding `id + 1`, 0 for background
//! - depth: `DEPTH_MAGIC`, width and height as little-endian `u32`, then one
//!   little-endian `f32` per pixel in row-major order (`+∞` for background)

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{RenderBuffers, RenderError, RgbImage, NO_FACE};

pub const DEPTH_MAGIC: &[u8; 8] = b"CQDEPTH1";

fn image_err(path: &Path, e: impl std::fmt::Display) -> RenderError {
    RenderError::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn encode_png_rgb(image: &RgbImage) -> Result<Vec<u8>, RenderError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width, image.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| image_err(Path::new("<memory>"), e))?;
        let data: Vec<u8> = image.pixels.iter().flatten().copied().collect();
        writer
            .write_image_data(&data)
            .map_err(|e| image_err(Path::new("<memory>"), e))?;
    }
    Ok(out)
}

/// Decodes an 8-bit RGB or RGBA PNG; alpha is dropped.
pub fn decode_png_rgb(bytes: &[u8]) -> Result<RgbImage, RenderError> {
    let err = |e: &dyn std::fmt::Display| image_err(Path::new("<memory>"), e);
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| err(&e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| err(&"image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| err(&e))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(err(&"only 8-bit images are supported"));
    }
    let stride = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(err(&format!("unsupported color type {other:?}"))),
    };
    let pixels = buf[..info.buffer_size()]
        .chunks_exact(stride)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok(RgbImage {
        width: info.width,
        height: info.height,
        pixels,
    })
}

pub fn write_color_png(buffers: &RenderBuffers, path: &Path) -> Result<(), RenderError> {
    let bytes = encode_png_rgb(&buffers.color)?;
    std::fs::write(path, bytes).map_err(|e| image_err(path, e))
}

pub fn write_face_id_png(buffers: &RenderBuffers, path: &Path) -> Result<(), RenderError> {
    if buffers.face_count() > u16::MAX as usize - 1 {
        return Err(image_err(
            path,
            format!(
                "{} faces do not fit a 16-bit id image",
                buffers.face_count()
            ),
        ));
    }
    let file = File::create(path).map_err(|e| image_err(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), buffers.width(), buffers.height());
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let mut writer = enc.write_header().map_err(|e| image_err(path, e))?;
    let data: Vec<u8> = buffers
        .face_id
        .iter()
        .flat_map(|&f| {
            let v = if f == NO_FACE { 0 } else { f as u16 + 1 };
            v.to_be_bytes()
        })
        .collect();
    writer
        .write_image_data(&data)
        .map_err(|e| image_err(path, e))
}

/// Reads a face-id PNG back into `(width, height, ids)` with [`NO_FACE`] for
/// background.
pub fn read_face_id_png(path: &Path) -> Result<(u32, u32, Vec<u32>), RenderError> {
    let file = File::open(path).map_err(|e| image_err(path, e))?;
    let mut reader = png::Decoder::new(BufReader::new(file))
        .read_info()
        .map_err(|e| image_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| image_err(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| image_err(path, e))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(image_err(path, "expected a 16-bit grayscale image"));
    }
    let ids = buf[..info.buffer_size()]
        .chunks_exact(2)
        .map(|c| match u16::from_be_bytes([c[0], c[1]]) {
            0 => NO_FACE,
            v => v as u32 - 1,
        })
        .collect();
    Ok((info.width, info.height, ids))
}

pub fn write_depth(buffers: &RenderBuffers, path: &Path) -> Result<(), RenderError> {
    let file = File::create(path).map_err(|e| image_err(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| image_err(path, e);
    w.write_all(DEPTH_MAGIC).map_err(io)?;
    w.write_all(&buffers.width().to_le_bytes()).map_err(io)?;
    w.write_all(&buffers.height().to_le_bytes()).map_err(io)?;
    for &d in &buffers.depth {
        w.write_all(&(d as f32).to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_depth(path: &Path) -> Result<(u32, u32, Vec<f32>), RenderError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| image_err(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != DEPTH_MAGIC {
        return Err(image_err(path, "not a depth buffer file"));
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let body = &bytes[16..];
    if body.len() != width as usize * height as usize * 4 {
        return Err(image_err(
            path,
            "depth buffer size does not match its header",
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((width, height, values))
}
