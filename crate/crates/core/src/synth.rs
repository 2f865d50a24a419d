//! Deterministic synthetic mosaics for benchmarking.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{ImageError, PlanarImage, RawBayerImage, Site};
use crate::params::DEFAULT_SEED;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthKind {
    Constant(f32),
    /// R, G and B values placed at their RGGB sites.
    UniformColor(f32, f32, f32),
    /// Diagonal ramp from 0 at the top-left to 1 at the bottom-right.
    Gradient,
    SeededNoise(u64),
}

pub fn synth_bayer(width: usize, height: usize, kind: SynthKind) -> Result<RawBayerImage, ImageError> {
    RawBayerImage::check_dims(width, height)?;
    let n = width * height;
    let mosaic: Vec<f32> = match kind {
        SynthKind::Constant(v) => vec![v; n],
        SynthKind::UniformColor(r, g, b) => (0..n)
            .map(|i| [r, g, b][Site::at(i / width, i % width).channel()])
            .collect(),
        SynthKind::Gradient => {
            let span = (width + height - 2) as f32;
            (0..n).map(|i| ((i / width + i % width) as f32) / span).collect()
        }
        SynthKind::SeededNoise(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random::<f32>()).collect()
        }
    };
    RawBayerImage::new(width, height, mosaic)
}

/// Samples an RGB image at its RGGB sites, clamping to [0, 1] (NaN to 0).
pub fn mosaic_rgb(img: &PlanarImage) -> Result<RawBayerImage, ImageError> {
    let (w, h) = (img.width(), img.height());
    RawBayerImage::check_dims(w, h)?;
    let mosaic = (0..w * h)
        .map(|i| {
            let v = img.plane(Site::at(i / w, i % w).channel())[i];
            if v.is_nan() {
                0.0
            } else {
                v.clamp(0.0, 1.0)
            }
        })
        .collect();
    RawBayerImage::new(w, h, mosaic)
}

/// A synthetic input written `WxH:kind[:arg]`, e.g. `768x512:noise:42`,
/// `64x64:gradient`, `8x8:constant:0.5`, `8x8:uniform:0.2,0.4,0.6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub kind: SynthKind,
}

impl SynthSpec {
    pub fn generate(&self) -> Result<RawBayerImage, ImageError> {
        synth_bayer(self.width, self.height, self.kind)
    }
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 768,
            height: 512,
            kind: SynthKind::SeededNoise(DEFAULT_SEED),
        }
    }
}

impl fmt::Display for SynthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}:", self.width, self.height)?;
        match self.kind {
            SynthKind::Constant(v) => write!(f, "constant:{v}"),
            SynthKind::UniformColor(r, g, b) => write!(f, "uniform:{r},{g},{b}"),
            SynthKind::Gradient => write!(f, "gradient"),
            SynthKind::SeededNoise(seed) => write!(f, "noise:{seed}"),
        }
    }
}

impl FromStr for SynthSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(3, ':');
        let dims = parts.next().unwrap_or_default();
        let (w, h) = dims
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got {dims:?}"))?;
        let dim = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad dimension {v:?}"));
        let (width, height) = (dim(w)?, dim(h)?);
        let kind_name = parts.next().unwrap_or("noise");
        let arg = parts.next();
        let real = |v: &str| v.trim().parse::<f32>().map_err(|_| format!("bad value {v:?}"));
        let kind = match (kind_name, arg) {
            ("noise" | "seeded_noise", None) => SynthKind::SeededNoise(DEFAULT_SEED),
            ("noise" | "seeded_noise", Some(seed)) => {
                SynthKind::SeededNoise(seed.parse().map_err(|_| format!("bad seed {seed:?}"))?)
            }
            ("gradient", None) => SynthKind::Gradient,
            ("constant", Some(v)) => SynthKind::Constant(real(v)?),
            ("uniform" | "uniform_color", Some(rgb)) => {
                let v: Vec<&str> = rgb.split(',').collect();
                let [r, g, b] = v[..] else {
                    return Err(format!("uniform needs r,g,b, got {rgb:?}"));
                };
                SynthKind::UniformColor(real(r)?, real(g)?, real(b)?)
            }
            (k, _) => return Err(format!("unknown or malformed synthetic kind {k:?}")),
        };
        Ok(Self { width, height, kind })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant() {
        let img = synth_bayer(4, 4, SynthKind::Constant(0.5)).unwrap();
        assert_eq!(img.mosaic(), &[0.5; 16]);
    }

    #[test]
    fn uniform_color_sites() {
        let img = synth_bayer(4, 4, SynthKind::UniformColor(0.2, 0.4, 0.6)).unwrap();
        let m = img.mosaic();
        assert_eq!(m[0], 0.2);
        assert_eq!(m[1], 0.4);
        assert_eq!(m[4], 0.4);
        assert_eq!(m[5], 0.6);
    }

    #[test]
    fn noise_is_deterministic() {
        let a = synth_bayer(8, 6, SynthKind::SeededNoise(7)).unwrap();
        let b = synth_bayer(8, 6, SynthKind::SeededNoise(7)).unwrap();
        let c = synth_bayer(8, 6, SynthKind::SeededNoise(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn gradient_spans_unit_range() {
        let img = synth_bayer(4, 2, SynthKind::Gradient).unwrap();
        assert_eq!(img.mosaic()[0], 0.0);
        assert_eq!(*img.mosaic().last().unwrap(), 1.0);
    }

    #[test]
    fn odd_dimensions_rejected() {
        assert!(synth_bayer(3, 4, SynthKind::Gradient).is_err());
        assert!(synth_bayer(0, 4, SynthKind::Gradient).is_err());
    }

    #[test]
    fn spec_round_trip() {
        for text in ["768x512:noise:42", "4x4:gradient", "8x2:constant:0.5", "2x2:uniform:0.2,0.4,0.6"] {
            let spec: SynthSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert_eq!("6x4".parse::<SynthSpec>().unwrap().kind, SynthKind::SeededNoise(DEFAULT_SEED));
        assert!("6x4:sparkle".parse::<SynthSpec>().is_err());
        assert!("6:noise".parse::<SynthSpec>().is_err());
    }

    #[test]
    fn mosaic_samples_sites() {
        let rgb = PlanarImage::from_planes(2, 2, &[0.1; 4], &[0.5; 4], &[2.0; 4]).unwrap();
        let raw = mosaic_rgb(&rgb).unwrap();
        assert_eq!(raw.mosaic(), &[0.1, 0.5, 0.5, 1.0]);
    }
}
