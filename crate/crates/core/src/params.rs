//! Pipeline parameters and the TOML parameter file.
//!
//! Every section is optional; missing sections take the defaults of
//! [`PipelineParams::default`] and [`ModelConfig::default`].
//!
//! ```toml
//! [transform]
//! matrix = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
//!
//! [gamut]
//! # either explicit arrays ...
//! # ctrl_pts = [[r, g, b], ...]
//! # weights  = [[wr, wg, wb], ...]   # same length as ctrl_pts
//! # coefs    = [[c0r, c0g, c0b], [rr, rg, rb], [gr, gg, gb], [br, bg, bb]]
//! # ... or a generator
//! generate = { points = 3611, seed = 42, weights = "zero" }   # or "random"
//!
//! [tone]
//! kind = "identity"          # "identity" | "gamma" (with gamma = 2.2) | "table"
//! # lut = [[r, g, b], ...]   # 256 rows, required for kind = "table"
//!
//! [model]
//! pipeline_depth = 100
//! assumed_dep_ii = 64
//! [model.costs]
//! base = 10.0
//! datapath_per_unroll = 5.0
//! ram_per_byte = 0.001
//! capacity = 2000.0
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::perfmodel::ModelConfig;

/// Control-point count of the default gamut table.
pub const DEFAULT_GAMUT_POINTS: usize = 3611;
pub const DEFAULT_SEED: u64 = 42;
pub const TONE_LEVELS: usize = 256;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parameter file: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ParamsError {
    ParamsError::Invalid(msg.into())
}

/// 3x3 color matrix; row = output channel, column = input channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformMatrix(pub [[f32; 3]; 3]);

impl TransformMatrix {
    pub const IDENTITY: TransformMatrix =
        TransformMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn diagonal(r: f32, g: f32, b: f32) -> Self {
        TransformMatrix([[r, 0.0, 0.0], [0.0, g, 0.0], [0.0, 0.0, b]])
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.0.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(invalid("transform matrix has non-finite entries"))
        }
    }
}

impl Default for TransformMatrix {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Radial-basis gamut table: per-point weighted L2 distances plus an affine
/// bias.
///
/// For a pixel `p = (r, g, b)` and output channel `c`:
/// `out_c = sum_i weights[i][c] * |p - ctrl_pts[i]| + coefs[0][c]
///          + coefs[1][c] * r + coefs[2][c] * g + coefs[3][c] * b`.
#[derive(Debug, Clone, PartialEq)]
pub struct GamutParams {
    pub ctrl_pts: Vec<[f32; 3]>,
    pub weights: Vec<[f32; 3]>,
    pub coefs: [[f32; 3]; 4],
}

/// Bias rows that reproduce the input: zero constant, identity per channel.
pub const AFFINE_IDENTITY: [[f32; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

impl GamutParams {
    pub fn new(ctrl_pts: Vec<[f32; 3]>, weights: Vec<[f32; 3]>, coefs: [[f32; 3]; 4]) -> Result<Self, ParamsError> {
        let g = Self {
            ctrl_pts,
            weights,
            coefs,
        };
        g.validate()?;
        Ok(g)
    }

    /// Control points drawn from `seed`, zero weights, affine identity bias.
    /// Output equals input, but the kernel still walks every point.
    pub fn seeded_zero_weights(points: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctrl_pts = (0..points).map(|_| rng.random::<[f32; 3]>()).collect();
        Self {
            ctrl_pts,
            weights: vec![[0.0; 3]; points],
            coefs: AFFINE_IDENTITY,
        }
    }

    /// Random points, non-negative weights scaled so the RBF term stays
    /// O(1), and a perturbed identity bias.
    pub fn seeded(points: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctrl_pts = (0..points).map(|_| rng.random::<[f32; 3]>()).collect();
        let scale = 2.0 / points.max(1) as f32;
        let weights = (0..points)
            .map(|_| [0, 1, 2].map(|_| rng.random::<f32>() * scale))
            .collect();
        let mut coefs = AFFINE_IDENTITY;
        for row in coefs.iter_mut() {
            for v in row.iter_mut() {
                *v += rng.random::<f32>() * 0.05;
            }
        }
        Self {
            ctrl_pts,
            weights,
            coefs,
        }
    }

    pub fn points(&self) -> usize {
        self.ctrl_pts.len()
    }

    /// Size of the flat read-only region: points, then weights, then coefs.
    pub fn readonly_bytes(&self) -> usize {
        readonly_bytes_for(self.points())
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.ctrl_pts.is_empty() {
            return Err(invalid("gamut needs at least one control point"));
        }
        if self.ctrl_pts.len() != self.weights.len() {
            return Err(invalid(format!(
                "gamut has {} control points but {} weight rows",
                self.ctrl_pts.len(),
                self.weights.len()
            )));
        }
        let finite = self
            .ctrl_pts
            .iter()
            .chain(self.weights.iter())
            .chain(self.coefs.iter())
            .flatten()
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("gamut table has non-finite entries"));
        }
        Ok(())
    }
}

/// Bytes of gamut read-only data for `points` control points.
pub const fn readonly_bytes_for(points: usize) -> usize {
    (points * 6 + 12) * 4
}

/// 256-level tone curve; row = quantized input level, column = channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneLut(Vec<[f32; 3]>);

impl ToneLut {
    pub fn new(rows: Vec<[f32; 3]>) -> Result<Self, ParamsError> {
        if rows.len() != TONE_LEVELS {
            return Err(invalid(format!("tone LUT needs {TONE_LEVELS} rows, got {}", rows.len())));
        }
        if !rows.iter().flatten().all(|v| v.is_finite()) {
            return Err(invalid("tone LUT has non-finite entries"));
        }
        Ok(Self(rows))
    }

    pub fn identity() -> Self {
        Self((0..TONE_LEVELS).map(|i| [i as f32 / 255.0; 3]).collect())
    }

    pub fn constant(k: f32) -> Self {
        Self(vec![[k; 3]; TONE_LEVELS])
    }

    /// `lut[i] = (i / 255)^(1 / gamma)`.
    pub fn gamma(gamma: f32) -> Self {
        Self(
            (0..TONE_LEVELS)
                .map(|i| [(i as f32 / 255.0).powf(1.0 / gamma); 3])
                .collect(),
        )
    }

    pub fn rows(&self) -> &[[f32; 3]] {
        &self.0
    }

    pub fn bytes(&self) -> usize {
        TONE_LEVELS * 3 * 4
    }
}

impl Default for ToneLut {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub transform: TransformMatrix,
    pub gamut: GamutParams,
    pub tone: ToneLut,
}

impl Default for PipelineParams {
    /// Identity transform, zero-weight affine-identity gamut with
    /// [`DEFAULT_GAMUT_POINTS`] points, identity tone curve.
    fn default() -> Self {
        Self {
            transform: TransformMatrix::IDENTITY,
            gamut: GamutParams::seeded_zero_weights(DEFAULT_GAMUT_POINTS, DEFAULT_SEED),
            tone: ToneLut::identity(),
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        self.transform.validate()?;
        self.gamut.validate()
    }
}

/// Contents of a parameter file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamsFile {
    pub params: PipelineParams,
    pub model: ModelConfig,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawFile {
    transform: Option<RawTransform>,
    gamut: Option<RawGamut>,
    tone: Option<RawTone>,
    model: Option<ModelConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransform {
    matrix: [[f32; 3]; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGamut {
    ctrl_pts: Option<Vec<[f32; 3]>>,
    weights: Option<Vec<[f32; 3]>>,
    coefs: Option<[[f32; 3]; 4]>,
    generate: Option<RawGenerate>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerate {
    points: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    weights: WeightKind,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Deserialize, Default, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum WeightKind {
    #[default]
    Zero,
    Random,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTone {
    kind: Option<String>,
    gamma: Option<f32>,
    lut: Option<Vec<[f32; 3]>>,
}

impl ParamsFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ParamsError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ParamsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ParamsError> {
        let raw: RawFile = toml::from_str(text)?;
        let defaults = PipelineParams::default();

        let transform = match raw.transform {
            Some(t) => TransformMatrix(t.matrix),
            None => defaults.transform,
        };

        let gamut = match raw.gamut {
            None => defaults.gamut,
            Some(g) => match (g.generate, g.ctrl_pts, g.weights) {
                (Some(gen), None, None) => {
                    if gen.points == 0 {
                        return Err(invalid("gamut generator needs points >= 1"));
                    }
                    let mut gp = match gen.weights {
                        WeightKind::Zero => GamutParams::seeded_zero_weights(gen.points, gen.seed),
                        WeightKind::Random => GamutParams::seeded(gen.points, gen.seed),
                    };
                    if let Some(c) = g.coefs {
                        gp.coefs = c;
                    }
                    gp
                }
                (None, Some(pts), Some(w)) => GamutParams {
                    ctrl_pts: pts,
                    weights: w,
                    coefs: g.coefs.unwrap_or(AFFINE_IDENTITY),
                },
                (Some(_), _, _) => {
                    return Err(invalid("gamut: `generate` cannot be combined with explicit ctrl_pts/weights"))
                }
                _ => return Err(invalid("gamut: give both ctrl_pts and weights, or `generate`")),
            },
        };

        let tone = match raw.tone {
            None => defaults.tone,
            Some(t) => match (t.kind.as_deref(), t.lut) {
                (Some("table") | None, Some(rows)) => ToneLut::new(rows)?,
                (Some("identity") | None, None) => ToneLut::identity(),
                (Some("gamma"), None) => ToneLut::gamma(t.gamma.unwrap_or(2.2)),
                (Some(k), _) => return Err(invalid(format!("tone: unsupported kind {k:?} for the given fields"))),
            },
        };

        let params = PipelineParams {
            transform,
            gamut,
            tone,
        };
        params.validate()?;
        let model = raw.model.unwrap_or_default();
        model.validate().map_err(invalid)?;
        Ok(Self { params, model })
    }
}
