//! Image containers shared by every stage.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("bayer dimensions must be even and at least 2x2, got {width}x{height}")]
    BadBayerDims { width: usize, height: usize },
    #[error("image dimensions must be non-zero, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("mosaic value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },
}

/// Color of an RGGB mosaic site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Red,
    /// Green on a red row.
    GreenR,
    /// Green on a blue row.
    GreenB,
    Blue,
}

impl Site {
    /// RGGB: red at even row / even column.
    #[inline]
    pub fn at(y: usize, x: usize) -> Site {
        match (y & 1, x & 1) {
            (0, 0) => Site::Red,
            (0, 1) => Site::GreenR,
            (1, 0) => Site::GreenB,
            _ => Site::Blue,
        }
    }

    /// Channel index (0 = R, 1 = G, 2 = B) sampled at this site.
    pub fn channel(self) -> usize {
        match self {
            Site::Red => 0,
            Site::GreenR | Site::GreenB => 1,
            Site::Blue => 2,
        }
    }
}

/// Single-plane RGGB sensor mosaic, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawBayerImage {
    width: usize,
    height: usize,
    mosaic: Vec<f32>,
}

impl RawBayerImage {
    pub fn new(width: usize, height: usize, mosaic: Vec<f32>) -> Result<Self, ImageError> {
        Self::check_dims(width, height)?;
        if mosaic.len() != width * height {
            return Err(ImageError::LengthMismatch {
                expected: width * height,
                actual: mosaic.len(),
            });
        }
        if let Some((index, &value)) = mosaic
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            mosaic,
        })
    }

    pub(crate) fn check_dims(width: usize, height: usize) -> Result<(), ImageError> {
        if width < 2 || height < 2 || width % 2 != 0 || height % 2 != 0 {
            return Err(ImageError::BadBayerDims { width, height });
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn mosaic(&self) -> &[f32] {
        &self.mosaic
    }

    /// Sample with coordinates clamped to the image edge.
    #[inline]
    pub fn at_clamped(&self, y: isize, x: isize) -> f32 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.mosaic[y * self.width + x]
    }
}

/// Three row-major planes, R then G then B.
///
/// The serialized layout ([`PlanarImage::as_slice`]) is every row of R,
/// followed by every row of G, followed by every row of B.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl PlanarImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; 3 * width * height],
        }
    }

    /// Builds an image from its plane-major serialization.
    pub fn from_planar(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        if data.len() != 3 * width * height {
            return Err(ImageError::LengthMismatch {
                expected: 3 * width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_planes(
        width: usize,
        height: usize,
        r: &[f32],
        g: &[f32],
        b: &[f32],
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(3 * width * height);
        data.extend_from_slice(r);
        data.extend_from_slice(g);
        data.extend_from_slice(b);
        Self::from_planar(width, height, data)
    }

    /// Builds an image from per-pixel RGB triples in raster order.
    pub fn from_pixels(width: usize, height: usize, pixels: &[[f32; 3]]) -> Result<Self, ImageError> {
        if pixels.len() != width * height {
            return Err(ImageError::LengthMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        let mut img = Self::from_planar(width, height, vec![0.0; 3 * width * height])?;
        for (i, px) in pixels.iter().enumerate() {
            img.set_pixel(i, *px);
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.pixels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.pixels();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[c * self.pixels() + y * self.width + x]
    }

    #[inline]
    pub fn get_clamped(&self, c: usize, y: isize, x: isize) -> f32 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(c, y, x)
    }

    /// RGB triple at raster index `i`.
    #[inline]
    pub fn pixel(&self, i: usize) -> [f32; 3] {
        let n = self.pixels();
        [self.data[i], self.data[n + i], self.data[2 * n + i]]
    }

    #[inline]
    pub fn set_pixel(&mut self, i: usize, px: [f32; 3]) {
        let n = self.pixels();
        self.data[i] = px[0];
        self.data[n + i] = px[1];
        self.data[2 * n + i] = px[2];
    }

    /// Applies `f` to every sample.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}
