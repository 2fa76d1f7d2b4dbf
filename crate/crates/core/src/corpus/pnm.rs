//! Minimal binary PPM (P6, 8-bit) and PGM (P5, 16-bit) codecs.

use crate::{Error, Result};

use super::{ImageRaster, LabelRaster};

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_header(bytes: &[u8], what: &str) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::format(what, "empty file"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::format(what, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(what, "expected a number in header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::format(what, "header number overflow"))?;
    }
    // exactly one whitespace byte separates the header from the samples
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(what, "missing whitespace after maxval"));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::format(what, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(what, format!("bad maxval {maxval}")));
    }
    Ok(Header {
        magic,
        width: width as usize,
        height: height as usize,
        maxval: maxval as u32,
        data_start: pos + 1,
    })
}

fn samples<'a>(bytes: &'a [u8], h: &Header, per_pixel: usize, what: &str) -> Result<&'a [u8]> {
    let sample_bytes = if h.maxval < 256 { 1 } else { 2 };
    let need = h
        .width
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(per_pixel * sample_bytes))
        .ok_or_else(|| Error::format(what, "image too large"))?;
    let data = &bytes[h.data_start.min(bytes.len())..];
    if data.len() < need {
        return Err(Error::format(
            what,
            format!("expected {need} sample bytes, found {}", data.len()),
        ));
    }
    Ok(&data[..need])
}

pub fn decode_ppm(bytes: &[u8], what: &str) -> Result<ImageRaster> {
    let h = parse_header(bytes, what)?;
    if &h.magic != b"P6" {
        return Err(Error::format(what, "not a binary PPM (P6)"));
    }
    if h.maxval != 255 {
        return Err(Error::format(
            what,
            format!("only 8-bit PPM supported, maxval {}", h.maxval),
        ));
    }
    let data = samples(bytes, &h, 3, what)?;
    let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    ImageRaster::new(h.width, h.height, pixels)
}

pub fn encode_ppm(image: &ImageRaster) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.reserve(image.pixels.len() * 3);
    for p in &image.pixels {
        out.extend_from_slice(p);
    }
    out
}

/// Decodes a P5 graymap. 16-bit samples are big-endian; 8-bit files are
/// accepted and widened.
pub fn decode_pgm(bytes: &[u8], what: &str) -> Result<LabelRaster> {
    let h = parse_header(bytes, what)?;
    if &h.magic != b"P5" {
        return Err(Error::format(what, "not a binary PGM (P5)"));
    }
    let data = samples(bytes, &h, 1, what)?;
    let labels = if h.maxval < 256 {
        data.iter().map(|&b| b as u16).collect()
    } else {
        data.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    LabelRaster::new(h.width, h.height, labels)
}

pub fn encode_pgm16(width: usize, height: usize, values: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(values.len() * 2);
    for v in values {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_is_big_endian() {
        let bytes = encode_pgm16(2, 1, &[1, 0x0203]);
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 1, 2, 3]);
        let back = decode_pgm(&bytes, "t").unwrap();
        assert_eq!(back.labels, vec![1, 0x0203]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P6\n# made by hand\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[9, 8, 7]);
        let img = decode_ppm(&bytes, "t").unwrap();
        assert_eq!(img.pixels, vec![[9, 8, 7]]);
    }

    #[test]
    fn truncated_samples_rejected() {
        let mut bytes = encode_ppm(&ImageRaster::filled(4, 4, [1, 2, 3]));
        bytes.truncate(bytes.len() - 1);
        assert!(decode_ppm(&bytes, "t").is_err());
    }

    #[test]
    fn wrong_magic_rejected() {
        let bytes = encode_pgm16(1, 1, &[0]);
        assert!(decode_ppm(&bytes, "t").is_err());
    }
}
