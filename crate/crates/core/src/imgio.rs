//! Binary PPM (P6, 8-bit) and the raw planar float format.
//!
//! The raw format is headerless: little-endian IEEE-754 `f32` samples, plane
//! after plane, rows in order within a plane. A Bayer mosaic has one plane,
//! an RGB image three.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::image::{ImageError, PlanarImage, RawBayerImage};

#[derive(Debug, Error)]
pub enum ImgIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("ppm parse error at byte {offset}: {kind}")]
    Parse { offset: usize, kind: PpmErrorKind },
    #[error("raw length mismatch: expected {expected} bytes, got {actual}")]
    RawLength { expected: usize, actual: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PpmErrorKind {
    #[error("unsupported magic {0:?}")]
    UnsupportedMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("unsupported maxval {0}")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
}

impl ImgIoError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        ImgIoError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn parse(offset: usize, kind: PpmErrorKind) -> Self {
        ImgIoError::Parse { offset, kind }
    }
}

/// Maps a real sample to a byte: `clamp(round(v * 255), 0, 255)`, ties away
/// from zero.
#[inline]
pub fn quantize_u8(v: f32) -> u8 {
    let q = (v * 255.0).round();
    if q.is_nan() {
        0
    } else {
        q.clamp(0.0, 255.0) as u8
    }
}

/// Snaps a real sample to the 1/255 grid.
#[inline]
pub fn quantize(v: f32) -> f32 {
    quantize_u8(v) as f32 / 255.0
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<PlanarImage, ImgIoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ImgIoError::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn save_ppm(img: &PlanarImage, path: impl AsRef<Path>) -> Result<(), ImgIoError> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(img)).map_err(|e| ImgIoError::io(path, e))
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
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

    fn number(&mut self, what: &'static str) -> Result<u32, ImgIoError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImgIoError::parse(start, PpmErrorKind::MalformedHeader(what)));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImgIoError::parse(start, PpmErrorKind::MalformedHeader(what)))
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<PlanarImage, ImgIoError> {
    if bytes.len() < 2 {
        return Err(ImgIoError::parse(0, PpmErrorKind::MalformedHeader("missing magic")));
    }
    if &bytes[..2] != b"P6" {
        let magic = String::from_utf8_lossy(&bytes[..2]).into_owned();
        return Err(ImgIoError::parse(0, PpmErrorKind::UnsupportedMagic(magic)));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(ImgIoError::parse(2, PpmErrorKind::MalformedHeader("no separator after magic")));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    cur.skip_whitespace_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(ImgIoError::parse(maxval_at, PpmErrorKind::UnsupportedMaxval(maxval)));
    }
    if width == 0 || height == 0 {
        return Err(ImgIoError::parse(maxval_at, PpmErrorKind::MalformedHeader("zero dimension")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(ImgIoError::parse(
                cur.pos,
                PpmErrorKind::MalformedHeader("no separator before raster"),
            ))
        }
    }
    let n = width * height;
    let payload = &bytes[cur.pos..];
    if payload.len() < 3 * n {
        return Err(ImgIoError::parse(
            bytes.len(),
            PpmErrorKind::Truncated {
                expected: 3 * n,
                actual: payload.len(),
            },
        ));
    }
    let mut data = vec![0.0f32; 3 * n];
    for (i, px) in payload[..3 * n].chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * n + i] = px[c] as f32 / 255.0;
        }
    }
    Ok(PlanarImage::from_planar(width, height, data)?)
}

pub fn encode_ppm(img: &PlanarImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + 3 * img.pixels());
    out.extend_from_slice(header.as_bytes());
    for i in 0..img.pixels() {
        out.extend(img.pixel(i).map(quantize_u8));
    }
    out
}

/// Plane count of a raw planar file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawPlanes {
    Bayer,
    Rgb,
}

impl RawPlanes {
    pub fn count(self) -> usize {
        match self {
            RawPlanes::Bayer => 1,
            RawPlanes::Rgb => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawImage {
    Bayer(RawBayerImage),
    Rgb(PlanarImage),
}

pub fn load_raw_planar(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    planes: RawPlanes,
) -> Result<RawImage, ImgIoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ImgIoError::io(path, e))?;
    decode_raw_planar(&bytes, width, height, planes)
}

pub fn decode_raw_planar(
    bytes: &[u8],
    width: usize,
    height: usize,
    planes: RawPlanes,
) -> Result<RawImage, ImgIoError> {
    let expected = 4 * width * height * planes.count();
    if bytes.len() != expected {
        return Err(ImgIoError::RawLength {
            expected,
            actual: bytes.len(),
        });
    }
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(match planes {
        RawPlanes::Bayer => RawImage::Bayer(RawBayerImage::new(width, height, samples)?),
        RawPlanes::Rgb => RawImage::Rgb(PlanarImage::from_planar(width, height, samples)?),
    })
}

pub fn encode_raw(samples: &[f32]) -> Vec<u8> {
    samples.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn save_raw_bayer(img: &RawBayerImage, path: impl AsRef<Path>) -> Result<(), ImgIoError> {
    let path = path.as_ref();
    fs::write(path, encode_raw(img.mosaic())).map_err(|e| ImgIoError::io(path, e))
}

pub fn save_raw_planar(img: &PlanarImage, path: impl AsRef<Path>) -> Result<(), ImgIoError> {
    let path = path.as_ref();
    fs::write(path, encode_raw(img.as_slice())).map_err(|e| ImgIoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ppm(w: usize, h: usize, px: &[u8]) -> Vec<u8> {
        let mut v = format!("P6\n{w} {h}\n255\n").into_bytes();
        v.extend_from_slice(px);
        v
    }

    #[test]
    fn single_red_pixel() {
        let img = decode_ppm(&ppm(1, 1, &[255, 0, 0])).unwrap();
        assert_eq!(img.plane(0), &[1.0]);
        assert_eq!(img.plane(1), &[0.0]);
        assert_eq!(img.plane(2), &[0.0]);
    }

    #[test]
    fn black_and_white_pair() {
        let img = decode_ppm(&ppm(2, 1, &[0, 0, 0, 255, 255, 255])).unwrap();
        for c in 0..3 {
            assert_eq!(img.plane(c), &[0.0, 1.0]);
        }
    }

    #[test]
    fn header_with_comment() {
        let bytes = b"P6\n# made by hand\n1 1\n255\n\x01\x02\x03".to_vec();
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!(img.pixel(0), [1.0 / 255.0, 2.0 / 255.0, 3.0 / 255.0]);
    }

    #[test]
    fn rejects_p5() {
        let err = decode_ppm(b"P5\n1 1\n255\n\0").unwrap_err();
        assert!(err.to_string().contains("unsupported magic"), "{err}");
        assert!(matches!(err, ImgIoError::Parse { offset: 0, .. }));
    }

    #[test]
    fn rejects_bad_maxval_and_truncation() {
        let err = decode_ppm(b"P6\n1 1\n65535\n\0\0\0\0\0\0").unwrap_err();
        assert!(matches!(
            err,
            ImgIoError::Parse {
                offset: 7,
                kind: PpmErrorKind::UnsupportedMaxval(65535)
            }
        ));
        let err = decode_ppm(&ppm(2, 1, &[0, 0, 0, 1])).unwrap_err();
        assert!(matches!(
            err,
            ImgIoError::Parse {
                kind: PpmErrorKind::Truncated { expected: 6, actual: 4 },
                ..
            }
        ));
        let err = decode_ppm(b"P6\nx 1\n255\n").unwrap_err();
        assert!(matches!(
            err,
            ImgIoError::Parse {
                offset: 3,
                kind: PpmErrorKind::MalformedHeader("width")
            }
        ));
    }

    #[test]
    fn encode_rounds_half_away_and_clamps() {
        let img = PlanarImage::from_planes(2, 1, &[1.0, 1.2], &[0.5, -0.1], &[0.0, 0.3]).unwrap();
        let bytes = encode_ppm(&img);
        let header = b"P6\n2 1\n255\n".len();
        assert_eq!(&bytes[header..], &[255, 128, 0, 255, 0, 77]);
    }

    #[test]
    fn raw_sizes() {
        let bytes = encode_raw(&[0.25, 0.5]);
        assert_eq!(bytes.len(), 8);
        match decode_raw_planar(&bytes, 2, 1, RawPlanes::Bayer) {
            // 2x1 is not a valid bayer geometry
            Err(ImgIoError::Image(ImageError::BadBayerDims { .. })) => {}
            other => panic!("{other:?}"),
        }
        let err = decode_raw_planar(&[0u8; 23], 2, 1, RawPlanes::Bayer).unwrap_err();
        assert!(matches!(err, ImgIoError::RawLength { expected: 8, actual: 23 }));
        assert!(err.to_string().contains("expected 8"));
    }

    #[test]
    fn raw_file_roundtrip_keeps_subnormals() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.raw");
        let sub = f32::from_bits(1);
        let img = PlanarImage::from_planes(2, 1, &[sub, -0.0], &[f32::MAX, 1e-30], &[0.1, -7.5]).unwrap();
        save_raw_planar(&img, &path).unwrap();
        match load_raw_planar(&path, 2, 1, RawPlanes::Rgb).unwrap() {
            RawImage::Rgb(back) => {
                let a: Vec<u32> = img.as_slice().iter().map(|v| v.to_bits()).collect();
                let b: Vec<u32> = back.as_slice().iter().map(|v| v.to_bits()).collect();
                assert_eq!(a, b);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ppm_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        let img = PlanarImage::from_planes(2, 2, &[0.0, 1.0, 0.2, 0.4], &[1.0; 4], &[0.0; 4])
            .unwrap()
            .map(quantize);
        save_ppm(&img, &path).unwrap();
        assert_eq!(load_ppm(&path).unwrap(), img);
        assert!(matches!(
            save_ppm(&img, dir.path().join("missing/x.ppm")),
            Err(ImgIoError::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn ppm_roundtrip_on_quantized_grid(w in 1usize..6, h in 1usize..6, seed in any::<u64>()) {
            let n = 3 * w * h;
            let data: Vec<f32> = (0..n)
                .map(|i| ((seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 33) % 256) as f32 / 255.0)
                .collect();
            let img = PlanarImage::from_planar(w, h, data).unwrap();
            prop_assert_eq!(decode_ppm(&encode_ppm(&img)).unwrap(), img);
        }

        #[test]
        fn raw_roundtrip_bit_exact(bits in proptest::collection::vec(any::<u32>(), 12)) {
            let vals: Vec<f32> = bits.iter().map(|b| f32::from_bits(*b)).filter(|v| v.is_finite()).collect();
            let n = vals.len() / 3 * 3;
            prop_assume!(n >= 3);
            let img = PlanarImage::from_planar(n / 3, 1, vals[..n].to_vec()).unwrap();
            match decode_raw_planar(&encode_raw(img.as_slice()), n / 3, 1, RawPlanes::Rgb).unwrap() {
                RawImage::Rgb(back) => {
                    let a: Vec<u32> = img.as_slice().iter().map(|v| v.to_bits()).collect();
                    let b: Vec<u32> = back.as_slice().iter().map(|v| v.to_bits()).collect();
                    prop_assert_eq!(a, b);
                }
                _ => prop_assert!(false),
            }
        }
    }
}
