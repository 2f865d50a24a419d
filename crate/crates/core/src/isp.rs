//! Reference kernels for the five pipeline stages.
//!
//! These are the correctness oracle for every optimization variant. Each
//! kernel is a pure function; with [`Exec::Parallel`] rows are distributed
//! over the rayon pool, which never changes a single output bit.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::image::{PlanarImage, RawBayerImage, Site};
use crate::imgio::quantize_u8;
use crate::params::{GamutParams, PipelineParams, ToneLut, TransformMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Demosaic,
    Denoise,
    Transform,
    Gamut,
    #[serde(rename = "tonemap")]
    ToneMap,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Demosaic,
        Stage::Denoise,
        Stage::Transform,
        Stage::Gamut,
        Stage::ToneMap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Demosaic => "demosaic",
            Stage::Denoise => "denoise",
            Stage::Transform => "transform",
            Stage::Gamut => "gamut",
            Stage::ToneMap => "tonemap",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Bilinear RGGB interpolation of one pixel, neighbors clamped to the edge.
#[inline]
pub(crate) fn demosaic_pixel(raw: &RawBayerImage, y: usize, x: usize) -> [f32; 3] {
    let (yi, xi) = (y as isize, x as isize);
    let at = |dy: isize, dx: isize| raw.at_clamped(yi + dy, xi + dx);
    let center = at(0, 0);
    let edges = || (((at(-1, 0) + at(1, 0)) + at(0, -1)) + at(0, 1)) * 0.25;
    let diagonals = || (((at(-1, -1) + at(-1, 1)) + at(1, -1)) + at(1, 1)) * 0.25;
    let horizontal = || (at(0, -1) + at(0, 1)) * 0.5;
    let vertical = || (at(-1, 0) + at(1, 0)) * 0.5;
    match Site::at(y, x) {
        Site::Red => [center, edges(), diagonals()],
        Site::GreenR => [horizontal(), center, vertical()],
        Site::GreenB => [vertical(), center, horizontal()],
        Site::Blue => [diagonals(), edges(), center],
    }
}

pub fn demosaic(raw: &RawBayerImage) -> PlanarImage {
    demosaic_with(raw, Exec::default())
}

pub fn demosaic_with(raw: &RawBayerImage, exec: Exec) -> PlanarImage {
    let (w, h) = (raw.width(), raw.height());
    let mut out = PlanarImage::zeros(w, h);
    exec.for_each_rgb_row(out.as_mut_slice(), w, |y, r, g, b| {
        for x in 0..w {
            let [pr, pg, pb] = demosaic_pixel(raw, y, x);
            r[x] = pr;
            g[x] = pg;
            b[x] = pb;
        }
    });
    out
}

/// Median of the clamped 3x3 window, by full sort.
#[inline]
fn median3x3(img: &PlanarImage, c: usize, y: usize, x: usize) -> f32 {
    let mut win = [0.0f32; 9];
    let mut k = 0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            win[k] = img.get_clamped(c, y as isize + dy, x as isize + dx);
            k += 1;
        }
    }
    win.sort_unstable_by(f32::total_cmp);
    win[4]
}

pub fn denoise(img: &PlanarImage) -> PlanarImage {
    denoise_with(img, Exec::default())
}

pub fn denoise_with(img: &PlanarImage, exec: Exec) -> PlanarImage {
    let w = img.width();
    let mut out = PlanarImage::zeros(w, img.height());
    exec.for_each_rgb_row(out.as_mut_slice(), w, |y, r, g, b| {
        for (c, row) in [r, g, b].into_iter().enumerate() {
            for (x, v) in row.iter_mut().enumerate() {
                *v = median3x3(img, c, y, x);
            }
        }
    });
    out
}

pub fn transform(img: &PlanarImage, m: &TransformMatrix) -> PlanarImage {
    transform_with(img, m, Exec::default())
}

pub fn transform_with(img: &PlanarImage, m: &TransformMatrix, exec: Exec) -> PlanarImage {
    let w = img.width();
    let m = &m.0;
    let mut out = PlanarImage::zeros(w, img.height());
    exec.for_each_rgb_row(out.as_mut_slice(), w, |y, r, g, b| {
        for x in 0..w {
            let [pr, pg, pb] = img.pixel(y * w + x);
            let row = |c: usize| m[c][0] * pr + m[c][1] * pg + m[c][2] * pb;
            r[x] = row(0);
            g[x] = row(1);
            b[x] = row(2);
        }
    });
    out
}

#[inline]
fn gamut_pixel(p: [f32; 3], g: &GamutParams) -> [f32; 3] {
    let [r, gr, b] = p;
    let mut acc = [0.0f32; 3];
    for (pt, w) in g.ctrl_pts.iter().zip(&g.weights) {
        let dr = r - pt[0];
        let dg = gr - pt[1];
        let db = b - pt[2];
        let dist = (dr * dr + dg * dg + db * db).sqrt();
        acc[0] += w[0] * dist;
        acc[1] += w[1] * dist;
        acc[2] += w[2] * dist;
    }
    let k = &g.coefs;
    [0, 1, 2].map(|c| acc[c] + k[0][c] + k[1][c] * r + k[2][c] * gr + k[3][c] * b)
}

pub fn gamut_map(img: &PlanarImage, g: &GamutParams) -> PlanarImage {
    gamut_map_with(img, g, Exec::default())
}

pub fn gamut_map_with(img: &PlanarImage, g: &GamutParams, exec: Exec) -> PlanarImage {
    let w = img.width();
    let mut out = PlanarImage::zeros(w, img.height());
    exec.for_each_rgb_row(out.as_mut_slice(), w, |y, r, gr, b| {
        for x in 0..w {
            let [pr, pg, pb] = gamut_pixel(img.pixel(y * w + x), g);
            r[x] = pr;
            gr[x] = pg;
            b[x] = pb;
        }
    });
    out
}

pub fn tone_map(img: &PlanarImage, t: &ToneLut) -> PlanarImage {
    tone_map_with(img, t, Exec::default())
}

pub fn tone_map_with(img: &PlanarImage, t: &ToneLut, exec: Exec) -> PlanarImage {
    let w = img.width();
    let lut = t.rows();
    let mut out = PlanarImage::zeros(w, img.height());
    exec.for_each_rgb_row(out.as_mut_slice(), w, |y, r, g, b| {
        for (c, row) in [r, g, b].into_iter().enumerate() {
            let src = &img.plane(c)[y * w..(y + 1) * w];
            for (o, &v) in row.iter_mut().zip(src) {
                *o = lut[quantize_u8(v) as usize][c];
            }
        }
    });
    out
}

/// Wall time spent in each stage, indexed by [`Stage::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes(pub [Duration; 5]);

impl StageTimes {
    pub fn get(&self, s: Stage) -> Duration {
        self.0[s.index()]
    }

    pub fn total(&self) -> Duration {
        self.0.iter().sum()
    }

    /// Fraction of the total per stage; sums to 1.
    pub fn shares(&self) -> [f64; 5] {
        let secs = self.0.map(|d| d.as_secs_f64());
        let total: f64 = secs.iter().sum();
        if total == 0.0 {
            return [0.2; 5];
        }
        secs.map(|s| s / total)
    }
}

impl std::ops::AddAssign for StageTimes {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

/// Runs the five reference stages in order.
pub fn run_pipeline(raw: &RawBayerImage, p: &PipelineParams) -> PlanarImage {
    run_pipeline_timed(raw, p, Exec::default()).0
}

/// [`run_pipeline`] with per-stage wall-time instrumentation.
pub fn run_pipeline_timed(raw: &RawBayerImage, p: &PipelineParams, exec: Exec) -> (PlanarImage, StageTimes) {
    let mut times = StageTimes::default();
    let mut timed = |s: Stage, f: &mut dyn FnMut() -> PlanarImage| {
        let t0 = Instant::now();
        let out = f();
        times.0[s.index()] = t0.elapsed();
        out
    };
    let img = timed(Stage::Demosaic, &mut || demosaic_with(raw, exec));
    let img = timed(Stage::Denoise, &mut || denoise_with(&img, exec));
    let img = timed(Stage::Transform, &mut || transform_with(&img, &p.transform, exec));
    let img = timed(Stage::Gamut, &mut || gamut_map_with(&img, &p.gamut, exec));
    let img = timed(Stage::ToneMap, &mut || tone_map_with(&img, &p.tone, exec));
    (img, times)
}

/// Output of every reference stage for one raw frame, indexed by
/// [`Stage::index`]. Stage `s > 0` reads `outputs[s - 1]`.
pub fn stage_outputs(raw: &RawBayerImage, p: &PipelineParams, exec: Exec) -> [PlanarImage; 5] {
    let a = demosaic_with(raw, exec);
    let b = denoise_with(&a, exec);
    let c = transform_with(&b, &p.transform, exec);
    let d = gamut_map_with(&c, &p.gamut, exec);
    let e = tone_map_with(&d, &p.tone, exec);
    [a, b, c, d, e]
}
