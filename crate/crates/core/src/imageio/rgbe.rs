// Radiance RGBE: a text header, a resolution line, then scanlines of
// shared-exponent pixels. Scanlines are flat, old-style run-length encoded
// (1,1,1,n markers) or new-style per-channel run-length encoded.

use std::path::Path;

use super::{write_file, HdrImage, Rgb};
use crate::error::{Error, Result};

const MIN_RLE_WIDTH: usize = 8;
const MAX_RLE_WIDTH: usize = 0x7fff;
const MIN_RUN: usize = 4;

/// Decodes one shared-exponent pixel: `mantissa / 256 * 2^(e - 128)`.
pub fn decode_rgbe_pixel(px: [u8; 4]) -> Rgb {
    if px[3] == 0 {
        return [0.0; 3];
    }
    let f = 2f64.powi(px[3] as i32 - 136);
    [px[0] as f64 * f, px[1] as f64 * f, px[2] as f64 * f]
}

/// Splits a positive finite `v` into `(m, e)` with `v = m * 2^e`, `m` in `[0.5, 1)`.
fn frexp(v: f64) -> (f64, i32) {
    let mut e = v.log2().floor() as i32 + 1;
    let mut m = v / 2f64.powi(e);
    // log2 can be off by one ulp near powers of two
    if m >= 1.0 {
        m /= 2.0;
        e += 1;
    } else if m < 0.5 {
        m *= 2.0;
        e -= 1;
    }
    (m, e)
}

/// Encodes one pixel, truncating mantissas as the reference Radiance writer does.
pub fn encode_rgbe_pixel(rgb: Rgb) -> [u8; 4] {
    let v = rgb[0].max(rgb[1]).max(rgb[2]);
    if !(v > 1e-38) {
        return [0; 4];
    }
    let (m, e) = frexp(v);
    if e + 128 > 255 {
        return [255, 255, 255, 255];
    }
    if e + 128 < 1 {
        return [0; 4];
    }
    let scale = m * 256.0 / v;
    let q = |c: f64| ((c * scale) as i64).clamp(0, 255) as u8;
    [q(rgb[0]), q(rgb[1]), q(rgb[2]), (e + 128) as u8]
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn line(&mut self) -> Result<&'a str> {
        let start = self.pos;
        let rest = &self.bytes[start..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(start as u64, "unterminated header line"))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end])
            .map(|s| s.trim_end_matches('\r'))
            .map_err(|_| Error::format(start as u64, "header line is not valid text"))
    }

    fn byte(&mut self) -> Result<u8> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| Error::format(self.pos as u64, "truncated scanline data"))?;
        self.pos += 1;
        Ok(b)
    }

    fn quad(&mut self) -> Result<[u8; 4]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| Error::format(self.pos as u64, "truncated scanline data"))?;
        self.pos += 4;
        Ok([s[0], s[1], s[2], s[3]])
    }

    fn peek_quad(&self) -> Option<[u8; 4]> {
        self.bytes
            .get(self.pos..self.pos + 4)
            .map(|s| [s[0], s[1], s[2], s[3]])
    }
}

fn parse_resolution(line: &str, offset: u64) -> Result<(usize, usize)> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let bad = || Error::format(offset, format!("unsupported resolution line {line:?}"));
    if tokens.len() != 4 || tokens[0] != "-Y" || tokens[2] != "+X" {
        return Err(bad());
    }
    let height: i64 = tokens[1].parse().map_err(|_| bad())?;
    let width: i64 = tokens[3].parse().map_err(|_| bad())?;
    if width <= 0 || height <= 0 {
        return Err(Error::format(
            offset,
            format!("nonpositive dimensions {width}x{height}"),
        ));
    }
    Ok((width as usize, height as usize))
}

fn read_rle_scanline(cur: &mut Cursor, width: usize, out: &mut [[u8; 4]]) -> Result<()> {
    let start = cur.offset();
    let head = cur.quad()?;
    let encoded_width = ((head[2] as usize) << 8) | head[3] as usize;
    if encoded_width != width {
        return Err(Error::format(
            start,
            format!("scanline width {encoded_width} does not match image width {width}"),
        ));
    }
    for channel in 0..4 {
        let mut x = 0;
        while x < width {
            let at = cur.offset();
            let count = cur.byte()? as usize;
            if count > 128 {
                let run = count - 128;
                if x + run > width {
                    return Err(Error::format(at, "run overflows scanline"));
                }
                let value = cur.byte()?;
                for px in &mut out[x..x + run] {
                    px[channel] = value;
                }
                x += run;
            } else {
                if count == 0 || x + count > width {
                    return Err(Error::format(at, "bad literal count in scanline"));
                }
                for px in &mut out[x..x + count] {
                    px[channel] = cur.byte()?;
                }
                x += count;
            }
        }
    }
    Ok(())
}

fn read_flat_scanline(
    cur: &mut Cursor,
    width: usize,
    out: &mut [[u8; 4]],
    previous: &mut Option<[u8; 4]>,
) -> Result<()> {
    let mut x = 0;
    let mut shift = 0u32;
    while x < width {
        let at = cur.offset();
        let px = cur.quad()?;
        if px[0] == 1 && px[1] == 1 && px[2] == 1 {
            let prev = previous.ok_or_else(|| Error::format(at, "run marker with no previous pixel"))?;
            let count = (px[3] as usize)
                .checked_shl(shift)
                .filter(|&c| x + c <= width)
                .ok_or_else(|| Error::format(at, "run overflows scanline"))?;
            out[x..x + count].fill(prev);
            x += count;
            shift += 8;
        } else {
            out[x] = px;
            *previous = Some(px);
            x += 1;
            shift = 0;
        }
    }
    Ok(())
}

/// Decodes an in-memory Radiance RGBE file.
pub fn decode_rgbe(bytes: &[u8]) -> Result<HdrImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.line()?;
    if !magic.starts_with("#?") {
        return Err(Error::format(0, "missing #? magic"));
    }
    loop {
        let at = cur.offset();
        let line = cur.line()?;
        if line.is_empty() {
            break;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(Error::format(at, format!("unsupported pixel format {fmt:?}")));
            }
        }
    }
    let at = cur.offset();
    let (width, height) = parse_resolution(cur.line()?, at)?;

    let mut row = vec![[0u8; 4]; width];
    let mut data = Vec::with_capacity(width * height);
    let mut previous = None;
    for _ in 0..height {
        let is_rle = (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&width)
            && matches!(cur.peek_quad(), Some([2, 2, hi, _]) if hi & 0x80 == 0);
        if is_rle {
            read_rle_scanline(&mut cur, width, &mut row)?;
            previous = row.last().copied();
        } else {
            read_flat_scanline(&mut cur, width, &mut row, &mut previous)?;
        }
        data.extend(row.iter().map(|&px| decode_rgbe_pixel(px)));
    }
    HdrImage::new(width, height, data)
}

fn rle_channel(values: &[u8], out: &mut Vec<u8>) {
    let n = values.len();
    let mut i = 0;
    while i < n {
        // find the next run of at least MIN_RUN equal bytes
        let mut run_start = i;
        let mut run_len = 0;
        while run_start < n {
            run_len = 1;
            while run_start + run_len < n
                && run_len < 127
                && values[run_start + run_len] == values[run_start]
            {
                run_len += 1;
            }
            if run_len >= MIN_RUN {
                break;
            }
            run_start += run_len;
        }
        if run_start >= n {
            run_len = 0;
        }
        while i < run_start {
            let count = (run_start - i).min(128);
            out.push(count as u8);
            out.extend_from_slice(&values[i..i + count]);
            i += count;
        }
        if run_len >= MIN_RUN {
            out.push(128 + run_len as u8);
            out.push(values[run_start]);
            i = run_start + run_len;
        }
    }
}

/// Encodes an image as Radiance RGBE, run-length encoding scanlines when the
/// width allows it.
pub fn encode_rgbe(image: &HdrImage) -> Vec<u8> {
    let (width, height) = image.dims();
    let mut out = Vec::new();
    out.extend_from_slice(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n");
    out.extend_from_slice(format!("-Y {height} +X {width}\n").as_bytes());
    let rle = (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&width);
    for row in image.pixels().chunks(width) {
        let quads: Vec<[u8; 4]> = row.iter().map(|&p| encode_rgbe_pixel(p)).collect();
        if rle {
            out.extend_from_slice(&[2, 2, (width >> 8) as u8, (width & 0xff) as u8]);
            for channel in 0..4 {
                let values: Vec<u8> = quads.iter().map(|q| q[channel]).collect();
                rle_channel(&values, &mut out);
            }
        } else {
            for q in &quads {
                out.extend_from_slice(q);
            }
        }
    }
    out
}

pub fn write_rgbe(image: &HdrImage, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_rgbe(image))
}
