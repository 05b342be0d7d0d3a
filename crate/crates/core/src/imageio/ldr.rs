use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::{write_file, LdrImage};
use crate::error::{Error, Result};

fn png_error(e: png::DecodingError) -> Error {
    Error::format(0, format!("PNG decode failed: {e}"))
}

/// Decodes an 8-bit RGB PNG, mapping byte `p` to `p / 255`.
pub fn read_ldr_bytes(bytes: &[u8]) -> Result<LdrImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_error)?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if depth != BitDepth::Eight {
        return Err(Error::format(24, format!("expected 8-bit PNG, found {depth:?}")));
    }
    if color != ColorType::Rgb {
        return Err(Error::format(25, format!("expected RGB PNG, found {color:?}")));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(16, "PNG dimensions overflow"))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_error)?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let data = buf[..frame.buffer_size()]
        .chunks_exact(frame.line_size)
        .flat_map(|line| line[..width * 3].chunks_exact(3))
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect();
    LdrImage::new(width, height, data)
}

pub fn read_ldr(path: impl AsRef<Path>) -> Result<LdrImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_ldr_bytes(&bytes)
}

fn quantize(v: f64) -> u8 {
    // round half up
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Encodes as an 8-bit RGB PNG.
pub fn encode_ldr_png(image: &LdrImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        encoder.set_color(ColorType::Rgb);
        encoder.set_depth(BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::invalid(format!("PNG encode failed: {e}")))?;
        let bytes: Vec<u8> = image
            .pixels()
            .iter()
            .flat_map(|p| p.map(quantize))
            .collect();
        writer
            .write_image_data(&bytes)
            .map_err(|e| Error::invalid(format!("PNG encode failed: {e}")))?;
    }
    Ok(out)
}

pub fn write_ldr(image: &LdrImage, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_ldr_png(image)?)
}
