//! Netpbm PGM (P2/P5) and PPM (P6) codecs.
//!
//! Decoding follows the Netpbm rules: whitespace- and comment-separated
//! ASCII header fields, exactly one whitespace byte between `maxval` and a
//! binary raster, one byte per sample when `maxval < 256`, otherwise two
//! bytes big-endian.

use crate::raster::Raster;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{reason} at byte offset {offset}")]
pub struct DecodeError {
    pub offset: usize,
    pub reason: String,
}

impl DecodeError {
    fn new(offset: usize, reason: impl Into<String>) -> Self {
        Self {
            offset,
            reason: reason.into(),
        }
    }
}

/// Raw grayscale samples exactly as stored in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

/// Raw RGB samples, three per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' || b == b'\r' {
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

    fn number(&mut self, what: &str) -> Result<u64, DecodeError> {
        self.skip_space_and_comments();
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(b - b'0')))
                .ok_or_else(|| DecodeError::new(start, format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(match self.bytes.get(self.pos) {
                None => DecodeError::new(self.pos, format!("truncated header: missing {what}")),
                Some(_) => DecodeError::new(self.pos, format!("expected decimal {what}")),
            });
        }
        Ok(value)
    }
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u16,
    /// Offset of the first raster byte (after the single separator for
    /// binary formats; right after `maxval` for ASCII).
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<(Header, Cursor<'_>), DecodeError> {
    if bytes.len() < 2 {
        return Err(DecodeError::new(0, "truncated magic number"));
    }
    let magic = [bytes[0], bytes[1]];
    if !matches!(&magic, b"P2" | b"P5" | b"P6") {
        return Err(DecodeError::new(
            0,
            format!("unsupported magic {:?}", String::from_utf8_lossy(&magic)),
        ));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let width_at = cur.pos;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    if width == 0 || height == 0 {
        return Err(DecodeError::new(width_at, "zero image dimension"));
    }
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(DecodeError::new(
            maxval_at,
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }
    let mut data_offset = cur.pos;
    if magic != *b"P2" {
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => data_offset += 1,
            Some(_) => {
                return Err(DecodeError::new(
                    cur.pos,
                    "expected single whitespace after maxval",
                ))
            }
            None => return Err(DecodeError::new(cur.pos, "truncated header")),
        }
    }
    let width = usize::try_from(width).map_err(|_| DecodeError::new(width_at, "width too large"))?;
    let height =
        usize::try_from(height).map_err(|_| DecodeError::new(width_at, "height too large"))?;
    Ok((
        Header {
            magic,
            width,
            height,
            maxval: maxval as u16,
            data_offset,
        },
        cur,
    ))
}

fn read_binary_samples(
    bytes: &[u8],
    offset: usize,
    count: usize,
    maxval: u16,
) -> Result<Vec<u16>, DecodeError> {
    let wide = maxval > 255;
    let needed = count
        .checked_mul(if wide { 2 } else { 1 })
        .ok_or_else(|| DecodeError::new(offset, "image too large"))?;
    let available = bytes.len().saturating_sub(offset);
    if available < needed {
        return Err(DecodeError::new(
            bytes.len(),
            format!("truncated payload: need {needed} bytes, have {available}"),
        ));
    }
    let payload = &bytes[offset..offset + needed];
    let samples: Vec<u16> = if wide {
        payload
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]))
            .collect()
    } else {
        payload.iter().map(|&b| u16::from(b)).collect()
    };
    if let Some(i) = samples.iter().position(|&s| s > maxval) {
        let at = offset + if wide { 2 * i } else { i };
        return Err(DecodeError::new(at, format!("sample exceeds maxval {maxval}")));
    }
    Ok(samples)
}

/// Decode P2 or P5 into raw samples.
pub fn decode_pgm_image(bytes: &[u8]) -> Result<GrayImage, DecodeError> {
    let (header, mut cur) = parse_header(bytes)?;
    let count = header
        .width
        .checked_mul(header.height)
        .ok_or_else(|| DecodeError::new(2, "image too large"))?;
    let samples = match &header.magic {
        b"P5" => read_binary_samples(bytes, header.data_offset, count, header.maxval)?,
        b"P2" => {
            let mut samples = Vec::with_capacity(count);
            for _ in 0..count {
                let at = {
                    cur.skip_space_and_comments();
                    cur.pos
                };
                let v = cur.number("sample")?;
                if v > u64::from(header.maxval) {
                    return Err(DecodeError::new(at, format!("sample exceeds maxval {}", header.maxval)));
                }
                samples.push(v as u16);
            }
            samples
        }
        _ => return Err(DecodeError::new(0, "not a PGM file")),
    };
    Ok(GrayImage {
        width: header.width,
        height: header.height,
        maxval: header.maxval,
        samples,
    })
}

/// Decode a PGM into a raster scaled to `[0, 1]` by `maxval`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Raster, DecodeError> {
    let img = decode_pgm_image(bytes)?;
    let scale = f64::from(img.maxval);
    let data = img
        .samples
        .iter()
        .map(|&s| (f64::from(s) / scale) as f32)
        .collect();
    Ok(Raster::new(img.height, img.width, data).expect("validated dimensions"))
}

fn push_header(out: &mut Vec<u8>, magic: &str, width: usize, height: usize, maxval: u16) {
    out.extend_from_slice(format!("{magic}\n{width} {height}\n{maxval}\n").as_bytes());
}

fn push_binary_samples(out: &mut Vec<u8>, samples: &[u16], maxval: u16) {
    if maxval > 255 {
        for s in samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(samples.iter().map(|&s| s as u8));
    }
}

/// Encode raw samples as binary P5.
pub fn encode_pgm_image(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.samples.len() * 2 + 32);
    push_header(&mut out, "P5", img.width, img.height, img.maxval);
    push_binary_samples(&mut out, &img.samples, img.maxval);
    out
}

/// Encode raw samples as ASCII P2, at most 16 samples per line.
pub fn encode_pgm_image_ascii(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    push_header(&mut out, "P2", img.width, img.height, img.maxval);
    for line in img.samples.chunks(16) {
        let text: Vec<String> = line.iter().map(u16::to_string).collect();
        out.extend_from_slice(text.join(" ").as_bytes());
        out.push(b'\n');
    }
    out
}

/// Quantize `[0, 1]` to `0..=255`, rounding half up.
pub fn quantize_u8(v: f32) -> u8 {
    (f64::from(v.clamp(0.0, 1.0)) * 255.0 + 0.5).floor() as u8
}

/// Encode a raster as 8-bit P5; values are clamped and quantized half-up.
pub fn encode_pgm(raster: &Raster) -> Vec<u8> {
    encode_pgm_image(&GrayImage {
        width: raster.width(),
        height: raster.height(),
        maxval: 255,
        samples: raster.data().iter().map(|&v| u16::from(quantize_u8(v))).collect(),
    })
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, DecodeError> {
    let (header, _) = parse_header(bytes)?;
    if header.magic != *b"P6" {
        return Err(DecodeError::new(0, "not a binary PPM (P6) file"));
    }
    let count = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| DecodeError::new(2, "image too large"))?;
    let samples = read_binary_samples(bytes, header.data_offset, count, header.maxval)?;
    Ok(RgbImage {
        width: header.width,
        height: header.height,
        maxval: header.maxval,
        samples,
    })
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.samples.len() * 2 + 32);
    push_header(&mut out, "P6", img.width, img.height, img.maxval);
    push_binary_samples(&mut out, &img.samples, img.maxval);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p5_scales_by_maxval() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 255, 0]);
        let r = decode_pgm(&bytes).unwrap();
        assert_eq!((r.height(), r.width()), (2, 2));
        assert_eq!(r.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn p2_single_pixel() {
        let r = decode_pgm(b"P2\n1 1\n1\n1\n").unwrap();
        assert_eq!(r.data(), &[1.0]);
    }

    #[test]
    fn comments_in_header_are_skipped() {
        let mut bytes = b"P5 # made by hand\n# another\n2 1 # dims\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 9]);
        let img = decode_pgm_image(&bytes).unwrap();
        assert_eq!(img.samples, vec![7, 9]);
    }

    #[test]
    fn sixteen_bit_samples_are_big_endian() {
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x01, 0x02, 0xff, 0xff]);
        let img = decode_pgm_image(&bytes).unwrap();
        assert_eq!(img.samples, vec![0x0102, 0xffff]);
    }

    #[test]
    fn checkerboard_round_trips() {
        let samples: Vec<u16> = (0..16).map(|i| if (i / 4 + i % 4) % 2 == 0 { 255 } else { 0 }).collect();
        let img = GrayImage {
            width: 4,
            height: 4,
            maxval: 255,
            samples,
        };
        let bytes = encode_pgm_image(&img);
        assert_eq!(decode_pgm_image(&bytes).unwrap(), img);
        let raster = decode_pgm(&bytes).unwrap();
        assert_eq!(encode_pgm(&raster), bytes);
    }

    #[test]
    fn truncated_payload_names_offset() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        let err = decode_pgm(&bytes).unwrap_err();
        assert_eq!(err.offset, bytes.len());
        assert!(err.to_string().contains("truncated payload"));
    }

    #[test]
    fn unsupported_magic_and_bad_header() {
        assert_eq!(decode_pgm(b"P4\n1 1\n").unwrap_err().offset, 0);
        let err = decode_pgm(b"P5\n2 x\n255\n").unwrap_err();
        assert_eq!(err.offset, 5);
        let err = decode_pgm(b"P5\n2 2\n70000\n").unwrap_err();
        assert!(err.reason.contains("maxval"));
        assert!(decode_pgm(b"P5\n2 2").is_err());
    }

    #[test]
    fn sample_above_maxval_is_rejected() {
        let mut bytes = b"P5\n2 1\n10\n".to_vec();
        bytes.extend_from_slice(&[3, 11]);
        assert_eq!(decode_pgm(&bytes).unwrap_err().offset, bytes.len() - 1);
        assert!(decode_pgm(b"P2\n1 1\n3\n4\n").is_err());
    }

    #[test]
    fn ppm_round_trip() {
        let img = RgbImage {
            width: 2,
            height: 1,
            maxval: 255,
            samples: vec![255, 0, 0, 0, 128, 255],
        };
        let bytes = encode_ppm(&img);
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(decode_ppm(&bytes).unwrap(), img);
        assert!(decode_ppm(&encode_pgm_image(&GrayImage {
            width: 1,
            height: 1,
            maxval: 255,
            samples: vec![0],
        }))
        .is_err());
    }

    fn gray_image() -> impl Strategy<Value = GrayImage> {
        (1usize..12, 1usize..12, prop_oneof![Just(1u16), Just(255u16), 256u16..=65535])
            .prop_flat_map(|(w, h, maxval)| {
                proptest::collection::vec(0..=maxval, w * h).prop_map(move |samples| GrayImage {
                    width: w,
                    height: h,
                    maxval,
                    samples,
                })
            })
    }

    proptest! {
        #[test]
        fn binary_and_ascii_encodings_decode_to_the_same_samples(img in gray_image()) {
            prop_assert_eq!(&decode_pgm_image(&encode_pgm_image(&img)).unwrap(), &img);
            prop_assert_eq!(&decode_pgm_image(&encode_pgm_image_ascii(&img)).unwrap(), &img);
        }

        #[test]
        fn decode_encode_decode_is_identity_for_8bit(img in gray_image()) {
            prop_assume!(img.maxval == 255);
            let bytes = encode_pgm_image(&img);
            let raster = decode_pgm(&bytes).unwrap();
            prop_assert_eq!(encode_pgm(&raster), bytes);
        }
    }
}
