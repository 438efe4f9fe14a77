//! Binary PGM (P5) / PPM (P6) reading and writing.

use super::{GrayImage, Rect};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PnmError {
    #[error("bad magic number at byte 0: expected P5 or P6")]
    BadMagic,
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: &'static str },
    #[error("maxval {maxval} at byte {offset} exceeds 255")]
    MaxvalTooLarge { offset: usize, maxval: u32 },
    #[error("truncated payload at byte {offset}: expected {expected} bytes, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &'static str) -> Result<(usize, u32), PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        let mut value: u64 = 0;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            value = value * 10 + (self.bytes[self.pos] - b'0') as u64;
            if value > u32::MAX as u64 {
                return Err(PnmError::MalformedHeader {
                    offset: start,
                    reason: "header value overflows",
                });
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(PnmError::MalformedHeader {
                offset: start,
                reason: what,
            });
        }
        Ok((start, value as u32))
    }
}

/// Decodes a binary PGM, or a binary PPM converted to integer luma.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, PnmError> {
    if bytes.len() < 2 || bytes[0] != b'P' || !matches!(bytes[1], b'5' | b'6') {
        return Err(PnmError::BadMagic);
    }
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut hdr = Header { bytes, pos: 2 };
    if hdr.pos < bytes.len() && !bytes[hdr.pos].is_ascii_whitespace() && bytes[hdr.pos] != b'#' {
        return Err(PnmError::MalformedHeader {
            offset: 2,
            reason: "expected whitespace after magic",
        });
    }
    let (woff, width) = hdr.number("expected width")?;
    let (hoff, height) = hdr.number("expected height")?;
    let (moff, maxval) = hdr.number("expected maxval")?;
    if width == 0 {
        return Err(PnmError::MalformedHeader {
            offset: woff,
            reason: "width must be positive",
        });
    }
    if height == 0 {
        return Err(PnmError::MalformedHeader {
            offset: hoff,
            reason: "height must be positive",
        });
    }
    if maxval == 0 {
        return Err(PnmError::MalformedHeader {
            offset: moff,
            reason: "maxval must be positive",
        });
    }
    if maxval > 255 {
        return Err(PnmError::MaxvalTooLarge {
            offset: moff,
            maxval,
        });
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(hdr.pos) {
        Some(b) if b.is_ascii_whitespace() => hdr.pos += 1,
        _ => {
            return Err(PnmError::MalformedHeader {
                offset: hdr.pos,
                reason: "expected whitespace before raster",
            })
        }
    }
    let pixels = width as usize * height as usize;
    let expected = pixels * channels;
    let payload = &bytes[hdr.pos..];
    if payload.len() < expected {
        return Err(PnmError::Truncated {
            offset: hdr.pos,
            expected,
            found: payload.len(),
        });
    }
    let data = if channels == 1 {
        payload[..expected].to_vec()
    } else {
        payload[..expected]
            .chunks_exact(3)
            .map(|px| luma(px[0], px[1], px[2]))
            .collect()
    };
    Ok(GrayImage::new(width, height, data).expect("header dimensions validated"))
}

/// Integer luma `0.299 R + 0.587 G + 0.114 B`, rounded half up.
pub(crate) fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

/// Grayscale image as a P6 copy with 1-pixel white borders drawn around `boxes`.
pub fn write_ppm(img: &GrayImage, boxes: &[Rect]) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut rgb: Vec<u8> = img.data().iter().flat_map(|&p| [p, p, p]).collect();
    let mut paint = |x: u32, y: u32| {
        if x < w && y < h {
            let i = 3 * (y as usize * w as usize + x as usize);
            rgb[i..i + 3].copy_from_slice(&[255, 255, 255]);
        }
    };
    for b in boxes {
        if b.w == 0 || b.h == 0 {
            continue;
        }
        let (x1, y1) = (b.right() - 1, b.bottom() - 1);
        for x in b.x..=x1 {
            paint(x, b.y);
            paint(x, y1);
        }
        for y in b.y..=y1 {
            paint(b.x, y);
            paint(x1, y);
        }
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&rgb);
    out
}
