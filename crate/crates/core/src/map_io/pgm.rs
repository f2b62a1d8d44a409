//! Binary PGM (`P5`) reading and writing, 8- and 16-bit.

use std::io::Write;

use super::MapIoError;

/// Decoded PGM raster, rows top to bottom as stored in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, MapIoError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MapIoError::Format(format!("PGM header: bad {what}")))
    }
}

/// Parses a binary PGM. 16-bit samples are big-endian.
pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm, MapIoError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(MapIoError::Format("PGM: magic is not P5".into()));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(MapIoError::Format("PGM: empty raster".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(MapIoError::Format(format!("PGM: maxval {maxval} out of range")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(MapIoError::Format("PGM: missing raster separator".into()));
    }
    let data = &bytes[h.pos + 1..];
    let n = width * height;
    let pixels: Vec<u16> = if maxval < 256 {
        if data.len() < n {
            return Err(MapIoError::Format(format!("PGM: expected {n} bytes, got {}", data.len())));
        }
        data[..n].iter().map(|&b| u16::from(b)).collect()
    } else {
        if data.len() < 2 * n {
            return Err(MapIoError::Format(format!(
                "PGM: expected {} bytes, got {}",
                2 * n,
                data.len()
            )));
        }
        data[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    if let Some(i) = pixels.iter().position(|&p| usize::from(p) > maxval) {
        return Err(MapIoError::Format(format!("PGM: pixel {i} exceeds maxval {maxval}")));
    }
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        pixels,
    })
}

pub fn encode_pgm8(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn encode_pgm16(width: usize, height: usize, pixels: &[u16]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for p in pixels {
        out.write_all(&p.to_be_bytes()).expect("write to Vec");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_with_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# max\n255\n".to_vec();
        bytes.extend([7, 9]);
        let p = decode_pgm(&bytes).unwrap();
        assert_eq!((p.width, p.height, p.maxval), (2, 1, 255));
        assert_eq!(p.pixels, vec![7, 9]);
    }

    #[test]
    fn sixteen_bit_big_endian() {
        let bytes = encode_pgm16(2, 1, &[9000, 65535]);
        assert_eq!(&bytes[bytes.len() - 4..], &[0x23, 0x28, 0xff, 0xff]);
        assert_eq!(decode_pgm(&bytes).unwrap().pixels, vec![9000, 65535]);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0"), Err(MapIoError::Format(_))));
        assert!(matches!(decode_pgm(b"P5\n2 2\n255\n\0"), Err(MapIoError::Format(_))));
        assert!(matches!(decode_pgm(b"P5\n1 1\n0\n\0"), Err(MapIoError::Format(_))));
    }
}
