use std::path::Path;

use super::IoError;
use crate::bp::GrayImage;

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space(&mut self) {
        while let Some(&c) = self.data.get(self.pos) {
            if c == b'#' {
                while self.data.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, IoError> {
        self.skip_space();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IoError::CorruptHeader(format!("missing {what}")))
    }
}

/// Decodes a binary (P5) PGM with maxval 255.
pub fn parse_pgm(data: &[u8]) -> Result<GrayImage, IoError> {
    match data.get(..2) {
        Some(b"P5") => {}
        Some(m) if m[0] == b'P' => {
            return Err(IoError::UnsupportedFormat(format!(
                "netpbm variant {}, need binary P5",
                String::from_utf8_lossy(m)
            )))
        }
        _ => return Err(IoError::UnsupportedFormat("not a PGM file".into())),
    }
    let mut c = Cursor { data, pos: 2 };
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if maxval != 255 {
        return Err(IoError::UnsupportedFormat(format!("maxval {maxval}, need 255")));
    }
    if !data.get(c.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(IoError::CorruptHeader("no separator after maxval".into()));
    }
    let body = &data[c.pos + 1..];
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| IoError::CorruptHeader("image size overflows".into()))?;
    if body.len() < expected {
        return Err(IoError::TruncatedData {
            expected,
            found: body.len(),
        });
    }
    GrayImage::new(width, height, body[..expected].to_vec())
        .map_err(|e| IoError::CorruptHeader(e.to_string()))
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage, IoError> {
    parse_pgm(&std::fs::read(path)?)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<(), IoError> {
    Ok(std::fs::write(path, encode_pgm(img))?)
}
