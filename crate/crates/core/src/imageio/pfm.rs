use std::path::Path;

use super::{write_file, HdrImage};
use crate::error::{Error, Result};

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    little_endian: bool,
    data_offset: usize,
}

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let channels = match bytes.get(..2) {
        Some(b"PF") => 3,
        Some(b"Pf") => 1,
        _ => return Err(Error::format(0, "missing PF magic")),
    };
    let mut pos = 2;
    let mut token = |what: &str| -> Result<(usize, String)> {
        let start = pos;
        if !bytes.get(pos).copied().is_some_and(is_space) {
            return Err(Error::format(pos as u64, format!("expected whitespace before {what}")));
        }
        while bytes.get(pos).copied().is_some_and(is_space) {
            pos += 1;
        }
        let tok_start = pos;
        while bytes.get(pos).is_some_and(|&b| !is_space(b)) {
            pos += 1;
        }
        if tok_start == pos {
            return Err(Error::format(start as u64, format!("missing {what}")));
        }
        let text = String::from_utf8_lossy(&bytes[tok_start..pos]).into_owned();
        Ok((tok_start, text))
    };
    let (w_at, w) = token("width")?;
    let (h_at, h) = token("height")?;
    let (s_at, s) = token("scale")?;
    let parse_dim = |at: usize, text: &str| -> Result<usize> {
        let v: i64 = text
            .parse()
            .map_err(|_| Error::format(at as u64, format!("bad dimension {text:?}")))?;
        if v <= 0 {
            return Err(Error::format(at as u64, format!("nonpositive dimension {v}")));
        }
        Ok(v as usize)
    };
    let width = parse_dim(w_at, &w)?;
    let height = parse_dim(h_at, &h)?;
    let scale: f64 = s
        .parse()
        .map_err(|_| Error::format(s_at as u64, format!("bad scale {s:?}")))?;
    if !scale.is_finite() || scale == 0.0 {
        return Err(Error::format(s_at as u64, format!("invalid scale {s}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).copied().is_some_and(is_space) {
        return Err(Error::format(pos as u64, "header not terminated by whitespace"));
    }
    Ok(Header {
        channels,
        width,
        height,
        little_endian: scale < 0.0,
        data_offset: pos + 1,
    })
}

/// Decodes an in-memory PFM file. Grayscale (`Pf`) files are replicated to RGB.
pub fn decode_pfm(bytes: &[u8]) -> Result<HdrImage> {
    let h = parse_header(bytes)?;
    let row_floats = h
        .width
        .checked_mul(h.channels)
        .ok_or_else(|| Error::format(3, "image too large"))?;
    let needed = row_floats
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(3, "image too large"))?;
    let available = bytes.len() - h.data_offset;
    if available < needed {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload: need {needed} bytes, have {available}"),
        ));
    }
    let mut data = vec![[0.0; 3]; h.width * h.height];
    // rows are stored bottom to top
    for file_row in 0..h.height {
        let y = h.height - 1 - file_row;
        for x in 0..h.width {
            let mut px = [0.0; 3];
            for c in 0..h.channels {
                let at = h.data_offset + 4 * (file_row * row_floats + x * h.channels + c);
                let raw = [bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]];
                let v = if h.little_endian {
                    f32::from_le_bytes(raw)
                } else {
                    f32::from_be_bytes(raw)
                };
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::format(at as u64, format!("invalid sample {v}")));
                }
                px[c] = v as f64;
            }
            if h.channels == 1 {
                px = [px[0]; 3];
            }
            data[y * h.width + x] = px;
        }
    }
    HdrImage::new(h.width, h.height, data)
}

/// Encodes a three-channel little-endian PFM. Fails if a sample does not fit
/// in a finite `f32`.
pub fn encode_pfm(image: &HdrImage) -> Result<Vec<u8>> {
    let (width, height) = image.dims();
    let mut out = format!("PF\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(width * height * 12);
    for row in image.pixels().chunks(width).rev() {
        for px in row {
            for &c in px {
                let v = c as f32;
                if !v.is_finite() {
                    return Err(Error::invalid(format!("sample {c} overflows f32")));
                }
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn write_pfm(image: &HdrImage, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_pfm(image)?)
}
