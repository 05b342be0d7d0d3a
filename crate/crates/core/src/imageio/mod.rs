//! Image containers and file codecs.
//!
//! HDR images hold linear relative radiance and are read from Radiance RGBE
//! (`.hdr`) or portable float map (`.pfm`) files. LDR images hold
//! display-encoded values in `[0, 1]` and are exchanged as 8-bit RGB PNG.

mod ldr;
mod pfm;
mod rgbe;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ldr::{read_ldr, read_ldr_bytes, write_ldr, encode_ldr_png};
pub use pfm::{decode_pfm, encode_pfm, write_pfm};
pub use rgbe::{decode_rgbe, decode_rgbe_pixel, encode_rgbe, encode_rgbe_pixel, write_rgbe};

pub type Rgb = [f64; 3];

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::invalid(format!(
            "pixel buffer of length {len} does not match {width}x{height}"
        )));
    }
    Ok(())
}

/// Linear relative radiance, three channels, all values finite and `>= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct HdrImage {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize, data: Vec<Rgb>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(i) = data
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite() || *c < 0.0))
        {
            return Err(Error::invalid(format!(
                "HDR pixel {i} is negative or non-finite: {:?}",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Row-major pixels, top row first.
    pub fn pixels(&self) -> &[Rgb] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    /// Multiplies every channel by `gain`, which must be positive and finite.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::invalid(format!("gain must be positive, got {gain}")));
        }
        let data = self
            .data
            .iter()
            .map(|p| [p[0] * gain, p[1] * gain, p[2] * gain])
            .collect();
        Self::new(self.width, self.height, data)
    }
}

/// Display-encoded image with every channel in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LdrImage {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
}

impl LdrImage {
    pub fn new(width: usize, height: usize, data: Vec<Rgb>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(i) = data
            .iter()
            .position(|p| p.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(Error::invalid(format!(
                "LDR pixel {i} is outside [0, 1]: {:?}",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    // Callers guarantee the range invariant.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<Rgb>) -> Self {
        debug_assert_eq!(width * height, data.len());
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }
}

/// On-disk HDR encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HdrFormat {
    /// Radiance RGBE, flat or run-length encoded scanlines.
    Rgbe,
    /// Portable float map.
    Pfm,
}

/// What a file contains, as far as the pipeline is concerned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    Hdr(HdrFormat),
    Ldr,
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Classifies a file by its magic bytes.
pub fn sniff_bytes(bytes: &[u8]) -> Option<FileKind> {
    if bytes.starts_with(b"#?") {
        Some(FileKind::Hdr(HdrFormat::Rgbe))
    } else if bytes.starts_with(b"PF") || bytes.starts_with(b"Pf") {
        Some(FileKind::Hdr(HdrFormat::Pfm))
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        Some(FileKind::Ldr)
    } else {
        None
    }
}

/// Classifies a file by magic bytes, falling back to its extension.
pub fn sniff(path: &Path) -> Result<FileKind> {
    let mut head = [0u8; 8];
    let n = {
        use std::io::Read;
        let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut n = 0;
        while n < head.len() {
            match f.read(&mut head[n..]) {
                Ok(0) => break,
                Ok(k) => n += k,
                Err(e) => return Err(Error::io(path, e)),
            }
        }
        n
    };
    if let Some(kind) = sniff_bytes(&head[..n]) {
        return Ok(kind);
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("hdr") | Some("pic") | Some("rgbe") => Ok(FileKind::Hdr(HdrFormat::Rgbe)),
        Some("pfm") => Ok(FileKind::Hdr(HdrFormat::Pfm)),
        Some("png") => Ok(FileKind::Ldr),
        _ => Err(Error::format(0, format!("unrecognized image file {}", path.display()))),
    }
}

/// Decodes an in-memory HDR file.
pub fn decode_hdr(bytes: &[u8], format: HdrFormat) -> Result<HdrImage> {
    match format {
        HdrFormat::Rgbe => decode_rgbe(bytes),
        HdrFormat::Pfm => decode_pfm(bytes),
    }
}

/// Reads an HDR file in the named format.
pub fn read_hdr(path: impl AsRef<Path>, format: HdrFormat) -> Result<HdrImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_hdr(&bytes, format)
}

/// Reads an HDR file, picking the format from its magic bytes.
pub fn read_hdr_auto(path: impl AsRef<Path>) -> Result<HdrImage> {
    let path = path.as_ref();
    match sniff(path)? {
        FileKind::Hdr(format) => read_hdr(path, format),
        FileKind::Ldr => Err(Error::format(0, format!("{} is an LDR image", path.display()))),
    }
}

pub fn write_hdr(image: &HdrImage, path: impl AsRef<Path>, format: HdrFormat) -> Result<()> {
    match format {
        HdrFormat::Rgbe => write_rgbe(image, path),
        HdrFormat::Pfm => write_pfm(image, path),
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
