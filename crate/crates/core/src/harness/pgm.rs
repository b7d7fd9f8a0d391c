//! Binary PGM (P5) with 8-bit samples.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Decoded 8-bit grayscale raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Parses a P5 file with maxval 255. Header fields may be separated by any
/// whitespace and `#` comments; exactly one whitespace byte precedes the
/// raster.
pub fn decode(bytes: &[u8]) -> std::result::Result<Pgm, String> {
    let mut pos = 0;
    if bytes.get(..2) != Some(b"P5") {
        return Err("not a binary PGM (missing P5 magic)".into());
    }
    pos += 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            let name = ["width", "height", "maxval"][i];
            return Err(format!("malformed header: expected {name}"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|e| format!("malformed header: {e}"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, only 255 is accepted"));
    }
    if width == 0 || height == 0 {
        return Err(format!("empty image {width}x{height}"));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed header: missing whitespace before raster".into());
    }
    pos += 1;
    let n = width * height;
    let raster = bytes.get(pos..pos + n).ok_or_else(|| {
        format!(
            "truncated raster: need {n} bytes, have {}",
            bytes.len() - pos
        )
    })?;
    Ok(Pgm {
        width,
        height,
        pixels: raster.to_vec(),
    })
}

pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn read(path: &Path) -> Result<Pgm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

pub fn write(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    fs::write(path, encode(width, height, pixels)).map_err(|e| Error::io(path, e))
}
