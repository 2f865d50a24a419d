//! Loop-structure variants of the five kernels, instrumented through a
//! [`Probe`].
//!
//! Baseline variants walk the channels outermost, producing every R pixel,
//! then every G pixel, then every B pixel. Fused variants (`W`) produce the
//! R, G and B of a pixel in one iteration. Per-pixel arithmetic is the same
//! expression tree as the reference kernels in either order.

use super::counters::{Probe, Silent};
use super::{ReadonlyMode, StageInput, VariantConfig, VariantError};
use crate::image::{PlanarImage, RawBayerImage, Site};
use crate::imgio::quantize_u8;
use crate::isp::Stage;
use crate::params::PipelineParams;

pub(crate) fn dispatch<P: Probe>(
    stage: Stage,
    cfg: &VariantConfig,
    input: StageInput<'_>,
    params: &PipelineParams,
    probe: &mut P,
) -> Result<PlanarImage, VariantError> {
    match (stage, input) {
        (Stage::Demosaic, StageInput::Raw(raw)) => Ok(demosaic(raw, probe)),
        (Stage::Demosaic, _) => Err(VariantError::WrongInput {
            stage,
            expected: "raw bayer",
        }),
        (_, StageInput::Raw(_)) => Err(VariantError::WrongInput {
            stage,
            expected: "planar RGB",
        }),
        (Stage::Denoise, StageInput::Image(img)) => Ok(denoise(img, cfg, probe)),
        (Stage::Transform, StageInput::Image(img)) => {
            let region: Vec<f32> = params.transform.0.iter().flatten().copied().collect();
            Ok(transform(img, &region, cfg, probe))
        }
        (Stage::Gamut, StageInput::Image(img)) => Ok(gamut(img, &gamut_region(params), cfg, probe)),
        (Stage::ToneMap, StageInput::Image(img)) => {
            let region: Vec<f32> = params.tone.rows().iter().flatten().copied().collect();
            Ok(tone_map(img, &region, cfg, probe))
        }
    }
}

/// Points, then weights, then the 4x3 bias, as one flat array.
pub(crate) fn gamut_region(params: &PipelineParams) -> Vec<f32> {
    let g = &params.gamut;
    g.ctrl_pts
        .iter()
        .flatten()
        .chain(g.weights.iter().flatten())
        .chain(g.coefs.iter().flatten())
        .copied()
        .collect()
}

/// Local copy of the read-only operands when buffering, otherwise a view of
/// global memory.
fn stage_readonly<'a, P: Probe>(region: &'a [f32], cfg: &VariantConfig, probe: &mut P) -> std::borrow::Cow<'a, [f32]> {
    if cfg.readonly_mode == ReadonlyMode::Buffered {
        probe.buffer_fill(region.len());
        std::borrow::Cow::Owned(region.to_vec())
    } else {
        std::borrow::Cow::Borrowed(region)
    }
}

fn demosaic<P: Probe>(raw: &RawBayerImage, probe: &mut P) -> PlanarImage {
    let (w, h) = (raw.width(), raw.height());
    let m = raw.mosaic();
    let mut out = PlanarImage::zeros(w, h);
    let n = w * h;
    let data = out.as_mut_slice();
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            let c = m[y * w + x];
            let px = match Site::at(y, x) {
                Site::Red | Site::Blue => {
                    probe.pixel_loads(9);
                    let edges = (((m[up * w + x] + m[down * w + x]) + m[y * w + left]) + m[y * w + right]) * 0.25;
                    let diag =
                        (((m[up * w + left] + m[up * w + right]) + m[down * w + left]) + m[down * w + right]) * 0.25;
                    if Site::at(y, x) == Site::Red {
                        [c, edges, diag]
                    } else {
                        [diag, edges, c]
                    }
                }
                site => {
                    probe.pixel_loads(5);
                    let horiz = (m[y * w + left] + m[y * w + right]) * 0.5;
                    let vert = (m[up * w + x] + m[down * w + x]) * 0.5;
                    if site == Site::GreenR {
                        [horiz, c, vert]
                    } else {
                        [vert, c, horiz]
                    }
                }
            };
            let i = y * w + x;
            data[i] = px[0];
            data[n + i] = px[1];
            data[2 * n + i] = px[2];
            probe.stores(3);
        }
    }
    out
}

#[inline(always)]
fn cswap(v: &mut [f32; 9], a: usize, b: usize) {
    if v[a].total_cmp(&v[b]).is_gt() {
        v.swap(a, b);
    }
}

/// Median of nine by a 19-exchange selection network.
pub fn median9_network(mut v: [f32; 9]) -> f32 {
    const NET: [(usize, usize); 19] = [
        (1, 2), (4, 5), (7, 8), (0, 1), (3, 4), (6, 7), (1, 2), (4, 5), (7, 8),
        (0, 3), (5, 8), (4, 7), (3, 6), (1, 4), (2, 5), (4, 7), (4, 2), (6, 4), (4, 2),
    ];
    for (a, b) in NET {
        cswap(&mut v, a, b);
    }
    v[4]
}

#[inline(always)]
fn window<P: Probe>(plane: &[f32], w: usize, h: usize, y: usize, x: usize, probe: &mut P) -> [f32; 9] {
    probe.pixel_loads(9);
    let rows = [y.saturating_sub(1), y, (y + 1).min(h - 1)];
    let cols = [x.saturating_sub(1), x, (x + 1).min(w - 1)];
    let mut win = [0.0; 9];
    for (k, &yy) in rows.iter().enumerate() {
        for (j, &xx) in cols.iter().enumerate() {
            win[3 * k + j] = plane[yy * w + xx];
        }
    }
    win
}

fn denoise<P: Probe>(img: &PlanarImage, cfg: &VariantConfig, probe: &mut P) -> PlanarImage {
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let mut out = PlanarImage::zeros(w, h);
    let src = img.as_slice();
    let dst = out.as_mut_slice();
    if cfg.fused_rewrite {
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let win = window(&src[c * n..(c + 1) * n], w, h, y, x, probe);
                    dst[c * n + y * w + x] = median9_network(win);
                }
                probe.stores(3);
            }
        }
    } else {
        for c in 0..3 {
            let plane = &src[c * n..(c + 1) * n];
            for y in 0..h {
                for x in 0..w {
                    let mut win = window(plane, w, h, y, x, probe);
                    win.sort_unstable_by(f32::total_cmp);
                    dst[c * n + y * w + x] = win[4];
                    probe.stores(1);
                }
            }
        }
    }
    out
}

fn transform<P: Probe>(img: &PlanarImage, region: &[f32], cfg: &VariantConfig, probe: &mut P) -> PlanarImage {
    let n = img.pixels();
    let m = stage_readonly(region, cfg, probe);
    let src = img.as_slice();
    let mut out = PlanarImage::zeros(img.width(), img.height());
    let dst = out.as_mut_slice();
    let row = |c: usize, i: usize, probe: &mut P| {
        for k in 0..3 {
            probe.readonly_load(3 * c + k);
        }
        m[3 * c] * src[i] + m[3 * c + 1] * src[n + i] + m[3 * c + 2] * src[2 * n + i]
    };
    if cfg.fused_rewrite {
        for i in 0..n {
            probe.pixel_loads(3);
            for c in 0..3 {
                dst[c * n + i] = row(c, i, probe);
            }
            probe.stores(3);
        }
    } else {
        for c in 0..3 {
            for i in 0..n {
                probe.pixel_loads(3);
                dst[c * n + i] = row(c, i, probe);
                probe.stores(1);
            }
        }
    }
    out
}

/// Chunking of an inner loop of `trip` iterations unrolled `factor` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnrollPlan {
    pub factor: usize,
    pub full_chunks: usize,
    pub remainder: usize,
}

impl UnrollPlan {
    pub fn new(trip: usize, factor: usize) -> Self {
        let factor = factor.max(1);
        Self {
            factor,
            full_chunks: trip / factor,
            remainder: trip % factor,
        }
    }

    /// Chunks executed per outer iteration, the partial one included.
    pub fn chunks(&self) -> usize {
        self.full_chunks + usize::from(self.remainder > 0)
    }
}

/// Weighted distance sums of one pixel for the requested channels.
///
/// Keeps `factor` partial sums per channel: point `k * factor + j` goes to
/// partial `j`, the remainder chunk last, then the partials fold left to
/// right. With factor 1 this is the plain left-to-right sum.
#[inline(always)]
fn rbf_sums<P: Probe>(
    p: [f32; 3],
    region: &[f32],
    points: usize,
    channels: &[usize],
    plan: UnrollPlan,
    partial: &mut [[f32; 3]],
    probe: &mut P,
) -> [f32; 3] {
    for s in partial.iter_mut() {
        *s = [0.0; 3];
    }
    let mut visit = |i: usize, slot: usize, probe: &mut P| {
        for k in 0..3 {
            probe.readonly_load(3 * i + k);
        }
        let dr = p[0] - region[3 * i];
        let dg = p[1] - region[3 * i + 1];
        let db = p[2] - region[3 * i + 2];
        let dist = (dr * dr + dg * dg + db * db).sqrt();
        for &c in channels {
            let at = 3 * points + 3 * i + c;
            probe.readonly_load(at);
            partial[slot][c] += region[at] * dist;
        }
    };
    for chunk in 0..plan.full_chunks {
        for j in 0..plan.factor {
            visit(chunk * plan.factor + j, j, probe);
        }
    }
    let tail = plan.full_chunks * plan.factor;
    for j in 0..plan.remainder {
        visit(tail + j, j, probe);
    }
    let mut acc = partial[0];
    for s in &partial[1..] {
        for &c in channels {
            acc[c] += s[c];
        }
    }
    acc
}

#[inline(always)]
fn bias<P: Probe>(acc: f32, p: [f32; 3], region: &[f32], points: usize, c: usize, probe: &mut P) -> f32 {
    let k = |row: usize, probe: &mut P| {
        let at = 6 * points + 3 * row + c;
        probe.readonly_load(at);
        region[at]
    };
    let k0 = k(0, probe);
    let k1 = k(1, probe);
    let k2 = k(2, probe);
    let k3 = k(3, probe);
    acc + k0 + k1 * p[0] + k2 * p[1] + k3 * p[2]
}

/// Fused gamut of one pixel, uninstrumented.
pub(crate) fn gamut_pixel_fused(p: [f32; 3], region: &[f32], plan: UnrollPlan, partial: &mut [[f32; 3]]) -> [f32; 3] {
    let points = (region.len() - 12) / 6;
    let probe = &mut Silent;
    let acc = rbf_sums(p, region, points, &[0, 1, 2], plan, partial, probe);
    [0, 1, 2].map(|c| bias(acc[c], p, region, points, c, probe))
}

fn gamut<P: Probe>(img: &PlanarImage, region: &[f32], cfg: &VariantConfig, probe: &mut P) -> PlanarImage {
    let n = img.pixels();
    let points = (region.len() - 12) / 6;
    let ro = stage_readonly(region, cfg, probe);
    let plan = UnrollPlan::new(points, cfg.unroll_factor as usize);
    let mut partial = vec![[0.0f32; 3]; plan.factor];
    let mut out = PlanarImage::zeros(img.width(), img.height());
    let dst = out.as_mut_slice();
    if cfg.fused_rewrite {
        for i in 0..n {
            probe.pixel_loads(3);
            let p = img.pixel(i);
            let acc = rbf_sums(p, &ro, points, &[0, 1, 2], plan, &mut partial, probe);
            for c in 0..3 {
                dst[c * n + i] = bias(acc[c], p, &ro, points, c, probe);
            }
            probe.stores(3);
        }
    } else {
        for c in 0..3 {
            for i in 0..n {
                probe.pixel_loads(3);
                let p = img.pixel(i);
                let acc = rbf_sums(p, &ro, points, &[c], plan, &mut partial, probe);
                dst[c * n + i] = bias(acc[c], p, &ro, points, c, probe);
                probe.stores(1);
            }
        }
    }
    out
}

fn tone_map<P: Probe>(img: &PlanarImage, region: &[f32], cfg: &VariantConfig, probe: &mut P) -> PlanarImage {
    let n = img.pixels();
    let lut = stage_readonly(region, cfg, probe);
    let src = img.as_slice();
    let mut out = PlanarImage::zeros(img.width(), img.height());
    let dst = out.as_mut_slice();
    let mut one = |c: usize, i: usize, probe: &mut P| {
        let at = 3 * quantize_u8(src[c * n + i]) as usize + c;
        probe.readonly_load(at);
        dst[c * n + i] = lut[at];
    };
    if cfg.fused_rewrite {
        for i in 0..n {
            probe.pixel_loads(3);
            for c in 0..3 {
                one(c, i, probe);
            }
            probe.stores(3);
        }
    } else {
        for c in 0..3 {
            for i in 0..n {
                probe.pixel_loads(1);
                one(c, i, probe);
                probe.stores(1);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unroll_plan_for_default_gamut() {
        let plan = UnrollPlan::new(3611, 6);
        assert_eq!(plan.full_chunks, 601);
        assert_eq!(plan.remainder, 5);
        assert_eq!(plan.chunks(), 602);
        assert_eq!(UnrollPlan::new(12, 6).chunks(), 2);
        assert_eq!(UnrollPlan::new(5, 1).chunks(), 5);
    }

    // 0-1 principle: a comparator network selects the median of every input
    // iff it does so for every 0/1 input.
    #[test]
    fn median_network_zero_one_exhaustive() {
        for mask in 0u32..512 {
            let v: [f32; 9] = std::array::from_fn(|i| ((mask >> i) & 1) as f32);
            let ones = mask.count_ones();
            let want = if ones >= 5 { 1.0 } else { 0.0 };
            assert_eq!(median9_network(v), want, "mask {mask:09b}");
        }
    }

    #[test]
    fn median_network_matches_sort_with_signed_zero() {
        let v = [0.0, -0.0, 0.0, -0.0, 1.0, -1.0, 0.0, -0.0, 2.0];
        let mut s = v;
        s.sort_unstable_by(f32::total_cmp);
        assert_eq!(median9_network(v).to_bits(), s[4].to_bits());
    }
}
