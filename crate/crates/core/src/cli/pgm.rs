//! Netpbm graymaps: P2 (ASCII) and P5 (binary), 8-bit only.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Next decimal token and the offset where it starts.
    fn number(&mut self, what: &str) -> Result<(u32, usize)> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.bytes.get(start) {
                None => parse_err(start, format!("unexpected end of file, expected {what}")),
                Some(b) => parse_err(start, format!("expected {what}, found byte 0x{b:02x}")),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map(|v| (v, start))
            .ok_or_else(|| parse_err(start, format!("{what} out of range")))
    }
}

/// Parses a P2 or P5 image, scaling pixels to `[0, 1]`.
pub fn parse_pgm(bytes: &[u8]) -> Result<Mat> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(parse_err(0, "magic number is not P2 or P5")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?.0 as usize;
    let height = cur.number("height")?.0 as usize;
    let (maxval, maxval_at) = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err(2, format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(maxval_at, format!("maxval {maxval} outside 1..=255")));
    }
    let scale = maxval as f64;
    let count = width * height;
    let mut data = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the payload.
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(parse_err(cur.pos, "missing whitespace before payload")),
        }
        let payload = &bytes[cur.pos..];
        if payload.len() < count {
            return Err(parse_err(
                bytes.len(),
                format!("truncated payload: {} of {count} bytes", payload.len()),
            ));
        }
        for (k, &b) in payload[..count].iter().enumerate() {
            if b as u32 > maxval {
                return Err(parse_err(cur.pos + k, format!("pixel {b} exceeds maxval {maxval}")));
            }
            data.push(b as f64 / scale);
        }
    } else {
        for _ in 0..count {
            let (v, at) = cur.number("pixel")?;
            if v > maxval {
                return Err(parse_err(at, format!("pixel {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    }
    Mat::new(height, width, data)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Mat> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_pgm(&bytes).map_err(|e| e.context(path.display().to_string()))
}

/// P5 encoding with values clamped to `[0, 1]` and rounded to 8 bits.
pub fn encode_pgm(image: &Mat) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend(
        image
            .as_slice()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn write_pgm(path: impl AsRef<Path>, image: &Mat) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(image)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
