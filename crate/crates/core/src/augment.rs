use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationKind {
    /// Additive i.i.d. Gaussian noise on every feature.
    GaussianJitter,
    /// Random translation with zero padding plus an optional mirror, for grid data.
    ShiftFlip,
}

impl std::str::FromStr for AugmentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_jitter" | "jitter" => Ok(AugmentationKind::GaussianJitter),
            "shift_flip" => Ok(AugmentationKind::ShiftFlip),
            other => Err(Error::invalid(format!("unknown augmentation `{other}`"))),
        }
    }
}

impl AugmentationKind {
    pub fn name(self) -> &'static str {
        match self {
            AugmentationKind::GaussianJitter => "gaussian_jitter",
            AugmentationKind::ShiftFlip => "shift_flip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub kind: AugmentationKind,
    pub sigma: f64,
    pub max_shift: usize,
    pub flip: bool,
    /// Augmented views per sample used by the consistency score.
    pub n_eval_augs: usize,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            kind: AugmentationKind::GaussianJitter,
            sigma: 0.3,
            max_shift: 1,
            flip: true,
            n_eval_augs: 10,
        }
    }
}

impl AugmentationSpec {
    pub fn jitter(sigma: f64, n_eval_augs: usize) -> Self {
        AugmentationSpec {
            kind: AugmentationKind::GaussianJitter,
            sigma,
            n_eval_augs,
            ..Self::default()
        }
    }

    pub fn shift_flip(max_shift: usize, flip: bool, n_eval_augs: usize) -> Self {
        AugmentationSpec {
            kind: AugmentationKind::ShiftFlip,
            sigma: 0.0,
            max_shift,
            flip,
            n_eval_augs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("augmentation sigma must be finite and >= 0"));
        }
        if self.n_eval_augs == 0 {
            return Err(Error::invalid("n_eval_augs must be >= 1"));
        }
        Ok(())
    }
}

/// Side length of a square grid holding `len` pixels.
pub fn grid_side(len: usize) -> Option<usize> {
    let g = (len as f64).sqrt().round() as usize;
    (g * g == len && g > 0).then_some(g)
}

/// Draws one augmented view of `x`.
pub fn augment(x: &[f64], spec: &AugmentationSpec, rng: &mut Rng) -> Result<Vec<f64>> {
    match spec.kind {
        AugmentationKind::GaussianJitter => {
            if spec.sigma == 0.0 {
                return Ok(x.to_vec());
            }
            Ok(x.iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(rng);
                    v + spec.sigma * z
                })
                .collect())
        }
        AugmentationKind::ShiftFlip => {
            let g = grid_side(x.len()).ok_or_else(|| {
                Error::invalid(format!(
                    "shift_flip needs a square grid, got {} features",
                    x.len()
                ))
            })?;
            let m = spec.max_shift as i64;
            let dy = rng.gen_range(-m..=m);
            let dx = rng.gen_range(-m..=m);
            let flip = spec.flip && rng.gen::<bool>();
            shift_flip_with(x, g, dx, dy, flip)
        }
    }
}

/// Deterministic shift-and-flip: output pixel `(r, c)` reads input pixel
/// `(r - dy, c' - dx)` where `c'` is `c` mirrored when `flip` is set; pixels
/// shifted in from outside the grid are zero.
pub fn shift_flip_with(x: &[f64], g: usize, dx: i64, dy: i64, flip: bool) -> Result<Vec<f64>> {
    if g * g != x.len() {
        return Err(Error::DimensionMismatch {
            what: "grid",
            expected: g * g,
            got: x.len(),
        });
    }
    let gi = g as i64;
    let mut out = vec![0.0; x.len()];
    for r in 0..gi {
        for c in 0..gi {
            let sr = r - dy;
            let sc0 = c - dx;
            if !(0..gi).contains(&sr) || !(0..gi).contains(&sc0) {
                continue;
            }
            let sc = if flip { gi - 1 - sc0 } else { sc0 };
            out[(r * gi + c) as usize] = x[(sr * gi + sc) as usize];
        }
    }
    Ok(out)
}
