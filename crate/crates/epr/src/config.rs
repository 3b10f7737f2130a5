//! JSON model configuration.
//!
//! A config file selects one model kind and its payload; matrices are nested
//! row-major arrays. Potentials and nonlinear drifts come from a closed
//! registry rather than an expression parser — new ones are code
//! contributions.
//!
//! ```json
//! { "kind": "linear", "pi": [[1,0],[0,1]], "d": [[1,0],[0,1]],
//!   "q": [[0,1],[-1,0]], "rng_seed": 7 }
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::RankCutoff;
use crate::model::{LinearDiffusion, Model, NonlinearSDE, UnderdampedLangevin};
use crate::{EprError, Result};

/// A potential from the built-in registry, acting coordinate-wise unless
/// stated otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PotentialConfig {
    /// `V(q) = ½ qᵀKq`
    Quadratic { k: Vec<Vec<f64>> },
    /// `V(q) = Σᵢ a·qᵢ⁴ − b·qᵢ²`
    DoubleWell { a: f64, b: f64 },
    /// `V(q) = Σᵢ −cos(k·qᵢ)/k²`
    Cosine { k: f64 },
}

type GradientFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

impl PotentialConfig {
    fn gradient(&self, n: usize) -> Result<GradientFn> {
        match self {
            PotentialConfig::Quadratic { k } => {
                let k = matrix_from(k)?;
                if k.shape() != (n, n) {
                    return Err(EprError::InvalidConfig(format!(
                        "quadratic potential matrix must be {n}x{n}"
                    )));
                }
                Ok(Box::new(move |q: &DVector<f64>| &k * q))
            }
            PotentialConfig::DoubleWell { a, b } => {
                let (a, b) = (*a, *b);
                Ok(Box::new(move |q: &DVector<f64>| {
                    DVector::from_fn(q.len(), |i, _| 4.0 * a * q[i].powi(3) - 2.0 * b * q[i])
                }))
            }
            PotentialConfig::Cosine { k } => {
                let k = *k;
                if k == 0.0 {
                    return Err(EprError::InvalidConfig("cosine potential needs k ≠ 0".into()));
                }
                Ok(Box::new(move |q: &DVector<f64>| {
                    DVector::from_fn(q.len(), |i, _| (k * q[i]).sin() / k)
                }))
            }
        }
    }
}

/// A nonlinear drift from the built-in registry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum NonlinearConfig {
    /// Overdamped dynamics in the coordinate-wise double-well potential with
    /// an extra solenoidal rotation of strength `omega`:
    /// `b(x) = −(I + Q)∇V(x)`, `σ = √2·I`, `ρ ∝ e^{−V}`,
    /// `Q` the block-planar rotation by `omega` (requires even `dim` when
    /// `omega ≠ 0`).
    DoubleWellRotated { a: f64, b: f64, omega: f64, dim: usize },
}

impl NonlinearConfig {
    fn build(&self) -> Result<NonlinearSDE> {
        match self {
            NonlinearConfig::DoubleWellRotated { a, b, omega, dim } => {
                let (a, b, omega, dim) = (*a, *b, *omega, *dim);
                if dim == 0 {
                    return Err(EprError::InvalidConfig("dim must be positive".into()));
                }
                if omega != 0.0 && dim % 2 != 0 {
                    return Err(EprError::InvalidConfig(
                        "the rotated double well needs an even dimension".into(),
                    ));
                }
                let grad_v = move |x: &DVector<f64>| {
                    DVector::from_fn(x.len(), |i, _| 4.0 * a * x[i].powi(3) - 2.0 * b * x[i])
                };
                let mut rot = DMatrix::zeros(dim, dim);
                for pair in 0..dim / 2 {
                    rot[(2 * pair, 2 * pair + 1)] = omega;
                    rot[(2 * pair + 1, 2 * pair)] = -omega;
                }
                let drift = move |x: &DVector<f64>| {
                    let g = grad_v(x);
                    -(&g + &rot * &g)
                };
                NonlinearSDE::new(
                    dim,
                    drift,
                    DMatrix::identity(dim, dim) * 2.0_f64.sqrt(),
                    Some(std::sync::Arc::new(move |x: &DVector<f64>| -grad_v(x))),
                )
            }
        }
    }
}

/// Kind-specific payload of a model config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Either `(drift, sigma)` or the certificate `(pi, d, q)`.
    Linear {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drift: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pi: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<Vec<f64>>>,
    },
    LangevinQuadratic {
        k: Vec<Vec<f64>>,
        mass: Vec<f64>,
        gamma: f64,
        beta: f64,
    },
    LangevinCustom {
        potential: PotentialConfig,
        n: usize,
        mass: Vec<f64>,
        gamma: f64,
        beta: f64,
    },
    Nonlinear { model: NonlinearConfig },
}

/// A model specification plus run-wide knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    /// Override for the shared rank cutoff (relative to the largest singular
    /// value).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_cutoff: Option<f64>,
}

fn matrix_from(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 {
        return Err(EprError::InvalidConfig("empty matrix".into()));
    }
    let c = rows[0].len();
    if c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(EprError::InvalidConfig("ragged or empty matrix rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(EprError::InvalidConfig("non-finite matrix entry".into()));
    }
    Ok(DMatrix::from_row_slice(r, c, &flat))
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig =
            serde_json::from_str(text).map_err(|e| EprError::InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed.unwrap_or(0)
    }

    pub fn cutoff(&self) -> Result<RankCutoff> {
        match self.rank_cutoff {
            Some(tol) => RankCutoff::relative(tol),
            None => Ok(RankCutoff::default()),
        }
    }

    /// Validate the payload into exactly one model.
    pub fn build(&self) -> Result<Model> {
        let cutoff = self.cutoff()?;
        match &self.kind {
            ModelKind::Linear {
                drift,
                sigma,
                pi,
                d,
                q,
            } => match (drift, sigma, pi, d, q) {
                (Some(b), Some(s), None, None, None) => Ok(Model::Linear(
                    LinearDiffusion::from_drift_with_cutoff(
                        matrix_from(b)?,
                        matrix_from(s)?,
                        cutoff,
                    )?,
                )),
                (None, None, Some(pi), Some(d), Some(q)) => Ok(Model::Linear(
                    LinearDiffusion::from_parts_with_cutoff(
                        matrix_from(pi)?,
                        matrix_from(d)?,
                        matrix_from(q)?,
                        cutoff,
                    )?,
                )),
                _ => Err(EprError::InvalidConfig(
                    "a linear model takes either (drift, sigma) or (pi, d, q)".into(),
                )),
            },
            ModelKind::LangevinQuadratic { k, mass, gamma, beta } => {
                Ok(Model::Langevin(UnderdampedLangevin::quadratic(
                    matrix_from(k)?,
                    DVector::from_vec(mass.clone()),
                    *gamma,
                    *beta,
                )?))
            }
            ModelKind::LangevinCustom {
                potential,
                n,
                mass,
                gamma,
                beta,
            } => {
                let grad = potential.gradient(*n)?;
                Ok(Model::Langevin(UnderdampedLangevin::custom(
                    *n,
                    grad,
                    DVector::from_vec(mass.clone()),
                    *gamma,
                    *beta,
                )?))
            }
            ModelKind::Nonlinear { model } => Ok(Model::Nonlinear(model.build()?)),
        }
    }
}
