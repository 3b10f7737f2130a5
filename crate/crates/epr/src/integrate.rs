//! Approximate integrators and their discretisation artefacts.
//!
//! [`simulate_em`] is the Euler–Maruyama chain
//! `x_{i+1} = x_i + ε b(x_i) + σ ω_i`, `ω_i ~ N(0, ε I_m)`;
//! [`simulate_bbk`] is the BBK half-kick / drift / half-kick splitting for
//! underdamped Langevin dynamics. [`em_kernel_supports`] exposes why the
//! Euler–Maruyama chain of a hypoelliptic model has infinite entropy
//! production at every time step: its forward and backward one-step kernels
//! live on different affine subspaces.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::linalg::{range_basis, RankCutoff};
use crate::model::{Model, UnderdampedLangevin};
use crate::{EprError, Result};

/// Which generator produced a batch of trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Exact,
    EulerMaruyama,
    Bbk,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Exact => write!(f, "exact"),
            Scheme::EulerMaruyama => write!(f, "euler_maruyama"),
            Scheme::Bbk => write!(f, "bbk"),
        }
    }
}

/// Where each path starts.
#[derive(Debug, Clone)]
pub enum InitialState {
    /// All paths start at this state.
    Point(DVector<f64>),
    /// Each path draws its own start from the model's stationary density.
    Stationary,
}

/// A batch of discretely observed trajectories with fixed time step.
///
/// States are stored row-major as `(path, step, coordinate)`; all states are
/// finite by construction (integrators abort on explosion instead of storing
/// non-finite values).
#[derive(Debug, Clone)]
pub struct SamplePaths {
    dim: usize,
    eps: f64,
    n_steps: usize,
    n_paths: usize,
    scheme: Scheme,
    seed: u64,
    data: Vec<f64>,
}

impl SamplePaths {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Time step between stored states.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total number of observed transitions `n_paths · n_steps`.
    pub fn n_transitions(&self) -> usize {
        self.n_paths * self.n_steps
    }

    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        let start = (path * (self.n_steps + 1) + step) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// States of one path in step order.
    pub fn path_states(&self, path: usize) -> impl Iterator<Item = &[f64]> {
        (0..=self.n_steps).map(move |s| self.state(path, s))
    }

    /// All consecutive state pairs `(x_i, x_{i+1})` across paths.
    pub fn transitions(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        (0..self.n_paths).flat_map(move |p| {
            (0..self.n_steps).map(move |s| (self.state(p, s), self.state(p, s + 1)))
        })
    }

    /// A batch with every path read backwards.
    pub fn reversed(&self) -> SamplePaths {
        let mut out = self.clone();
        for p in 0..self.n_paths {
            for s in 0..=self.n_steps {
                let src = self.state(p, self.n_steps - s);
                let start = (p * (self.n_steps + 1) + s) * self.dim;
                out.data[start..start + self.dim].copy_from_slice(src);
            }
        }
        out
    }
}

/// SplitMix64 finaliser, used to decorrelate per-path seed material. A plain
/// `seed ^ path_index` would make adjacent seeds share path streams
/// (`s ^ 1` is the neighbouring seed), which silently aliases whole
/// experiments; the mix makes every (seed, path) pair an independent stream.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `n_paths` independent chains in parallel. Each path derives its own
/// generator as `ChaCha12Rng::seed_from_u64(mix(seed, path_index))` with a
/// SplitMix64 mix, draws its initial state first, then steps; the result is
/// identical regardless of thread scheduling.
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive_paths<Init, Step>(
    dim: usize,
    eps: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    scheme: Scheme,
    init: Init,
    step: Step,
) -> Result<SamplePaths>
where
    Init: Fn(&mut ChaCha12Rng) -> DVector<f64> + Sync,
    Step: Fn(&mut ChaCha12Rng, &[f64], &mut [f64]) + Sync,
{
    if !eps.is_finite() || eps <= 0.0 {
        return Err(EprError::InvalidArgument(format!(
            "time step must be positive and finite, got {eps}"
        )));
    }
    if n_steps == 0 || n_paths == 0 {
        return Err(EprError::InvalidArgument(
            "need at least one path and one step".into(),
        ));
    }
    let stride = (n_steps + 1) * dim;
    let mut data = vec![0.0; n_paths * stride];
    let statuses: Vec<Option<usize>> = data
        .par_chunks_mut(stride)
        .enumerate()
        .map(|(path, chunk)| {
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, path as u64));
            let x0 = init(&mut rng);
            chunk[..dim].copy_from_slice(x0.as_slice());
            for s in 0..n_steps {
                let (prev, rest) = chunk[s * dim..].split_at_mut(dim);
                let next = &mut rest[..dim];
                step(&mut rng, prev, next);
                if next.iter().any(|v| !v.is_finite()) {
                    return Some(s + 1);
                }
            }
            None
        })
        .collect();
    if let Some((path, step)) = statuses
        .iter()
        .enumerate()
        .find_map(|(p, s)| s.map(|s| (p, s)))
    {
        return Err(EprError::Explosion { path, step });
    }
    Ok(SamplePaths {
        dim,
        eps,
        n_steps,
        n_paths,
        scheme,
        seed,
        data,
    })
}

fn stationary_sampler(model: &Model) -> Result<DMatrix<f64>> {
    // Returns a factor L with LLᵀ equal to the stationary covariance.
    match model {
        Model::Linear(m) => {
            crate::linalg::psd_sqrt_factor(m.stationary_covariance(), m.cutoff())
        }
        Model::Langevin(l) => {
            let cov = l.canonical_covariance().ok_or_else(|| {
                EprError::Unsupported(
                    "stationary start needs a quadratic potential; pass an explicit state".into(),
                )
            })?;
            crate::linalg::psd_sqrt_factor(&cov, RankCutoff::default())
        }
        Model::Nonlinear(_) => Err(EprError::Unsupported(
            "stationary start is unknown for a generic SDE; pass an explicit state".into(),
        )),
    }
}

fn initial_draw(
    init: &InitialState,
    dim: usize,
    factor: Option<DMatrix<f64>>,
) -> Result<impl Fn(&mut ChaCha12Rng) -> DVector<f64> + Sync> {
    if let InitialState::Point(x) = init {
        if x.len() != dim {
            return Err(EprError::DimensionMismatch(format!(
                "initial state has length {}, model dimension is {dim}",
                x.len()
            )));
        }
    }
    let point = match init {
        InitialState::Point(x) => Some(x.clone()),
        InitialState::Stationary => None,
    };
    Ok(move |rng: &mut ChaCha12Rng| match &point {
        Some(x) => x.clone(),
        None => {
            let f = factor.as_ref().expect("stationary factor prepared");
            let z = DVector::from_fn(f.ncols(), |_, _| rng.sample(StandardNormal));
            f * z
        }
    })
}

/// Euler–Maruyama chain for any model with constant volatility:
/// `x_{i+1} = x_i + ε b(x_i) + σ ω_i`, `ω_i ~ N(0, ε I_m)`.
///
/// A non-finite state aborts the offending path with
/// [`EprError::Explosion`]; results are bit-reproducible given the seed.
pub fn simulate_em(
    model: &Model,
    x0: &InitialState,
    eps: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<SamplePaths> {
    let dim = model.dim();
    type DriftFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Sync>;
    let (drift, sigma): (DriftFn, DMatrix<f64>) =
        match model {
            Model::Linear(m) => {
                let vol = m.volatility().clone();
                let m = m.clone();
                (Box::new(move |x| m.drift(x)), vol)
            }
            Model::Langevin(l) => {
                let l2 = l.clone();
                (Box::new(move |x| l2.drift(x)), l.volatility())
            }
            Model::Nonlinear(s) => {
                let s2 = s.clone();
                (Box::new(move |x| s2.drift(x)), s.volatility().clone())
            }
        };
    let factor = match x0 {
        InitialState::Stationary => Some(stationary_sampler(model)?),
        InitialState::Point(_) => None,
    };
    let init = initial_draw(x0, dim, factor)?;
    let m_noise = sigma.ncols();
    let sqrt_eps = eps.sqrt();
    drive_paths(
        dim,
        eps,
        n_steps,
        n_paths,
        seed,
        Scheme::EulerMaruyama,
        init,
        |rng, prev, next| {
            let x = DVector::from_column_slice(prev);
            let w = DVector::from_fn(m_noise, |_, _| {
                let z: f64 = rng.sample(StandardNormal);
                z * sqrt_eps
            });
            let y = &x + drift(&x) * eps + &sigma * w;
            next.copy_from_slice(y.as_slice());
        },
    )
}

/// BBK splitting for underdamped Langevin dynamics:
///
/// ```text
/// p_{i+1/2} = p_i − ∇V(q_i)·ε/2 − γM⁻¹p_i·ε/2 + √(2γβ⁻¹) ω_i
/// q_{i+1}   = q_i + M⁻¹ p_{i+1/2}·ε
/// p_{i+1}   = p_{i+1/2} − ∇V(q_{i+1})·ε/2 − γM⁻¹p_{i+1/2}·ε/2 + √(2γβ⁻¹) ω_{i+1/2}
/// ```
///
/// with independent `ω_i, ω_{i+1/2} ~ N(0, (ε/2) I_n)`, exactly as printed —
/// the mass matrix does not enter the noise amplitude.
pub fn simulate_bbk(
    l: &UnderdampedLangevin,
    x0: &InitialState,
    eps: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<SamplePaths> {
    let n = l.spatial_dim();
    let dim = 2 * n;
    let model = Model::Langevin(l.clone());
    let factor = match x0 {
        InitialState::Stationary => Some(stationary_sampler(&model)?),
        InitialState::Point(_) => None,
    };
    let init = initial_draw(x0, dim, factor)?;
    let amp = (2.0 * l.gamma() / l.beta()).sqrt();
    let sqrt_half_eps = (eps / 2.0).sqrt();
    let gamma = l.gamma();
    let mass = l.mass().clone();
    let lphys = l.clone();
    drive_paths(
        dim,
        eps,
        n_steps,
        n_paths,
        seed,
        Scheme::Bbk,
        init,
        move |rng, prev, next| {
            let q = DVector::from_column_slice(&prev[..n]);
            let p = DVector::from_column_slice(&prev[n..]);
            let noise = |rng: &mut ChaCha12Rng| {
                DVector::from_fn(n, |_, _| {
                    let z: f64 = rng.sample(StandardNormal);
                    z * sqrt_half_eps * amp
                })
            };
            let minv = |v: &DVector<f64>| DVector::from_fn(n, |i, _| v[i] / mass[i]);
            let p_half = &p - lphys.grad_potential(&q) * (eps / 2.0)
                - minv(&p) * (gamma * eps / 2.0)
                + noise(rng);
            let q_next = &q + minv(&p_half) * eps;
            let p_next = &p_half - lphys.grad_potential(&q_next) * (eps / 2.0)
                - minv(&p_half) * (gamma * eps / 2.0)
                + noise(rng);
            next[..n].copy_from_slice(q_next.as_slice());
            next[n..].copy_from_slice(p_next.as_slice());
        },
    )
}

/// An affine subspace `point + span(basis)` with orthonormal basis columns.
#[derive(Debug, Clone)]
pub struct AffineSubspace {
    pub point: DVector<f64>,
    /// d×r matrix with orthonormal columns; r = 0 encodes a single point.
    pub basis: DMatrix<f64>,
}

impl AffineSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Distance of `y` from the subspace, normalised by `1 + ‖y − point‖`.
    pub fn relative_distance(&self, y: &DVector<f64>) -> f64 {
        let delta = y - &self.point;
        let residual = &delta - &self.basis * (self.basis.transpose() * &delta);
        residual.norm() / (1.0 + delta.norm())
    }

    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        self.relative_distance(y) <= tol
    }

    /// Whether the two affine sets coincide within tolerance (same dimension,
    /// mutually containing points and directions).
    pub fn approx_eq(&self, other: &AffineSubspace, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        if !self.contains(&other.point, tol) || !other.contains(&self.point, tol) {
            return false;
        }
        for j in 0..other.basis.ncols() {
            let v = &other.point + other.basis.column(j).into_owned();
            if !self.contains(&v, tol) {
                return false;
            }
        }
        true
    }
}

/// Supports of the forward and backward Euler–Maruyama kernels at `x`.
#[derive(Debug, Clone)]
pub struct EmSupports {
    pub forward: AffineSubspace,
    pub backward: AffineSubspace,
    /// True when the two affine supports differ, in which case the forward
    /// and backward kernels are mutually singular and the chain's entropy
    /// production is infinite at this time step.
    pub disjoint: bool,
}

const SUPPORT_EQ_TOL: f64 = 1e-7;

/// Affine supports of the one-step Euler–Maruyama kernels:
/// forward `x + εb(x) + im D`, backward the closure of
/// `{y : x ∈ y + εb(y) + im D}`.
///
/// Linear and underdamped models get exact descriptors; a generic constant-σ
/// SDE gets a backward support fitted from probe points. For an elliptic
/// model both supports are the whole space and `disjoint` is false; for
/// underdamped Langevin the supports are the hyperplanes
/// `{y_q = x_q + εM⁻¹x_p}` and `{y_q + εM⁻¹y_p = x_q}`, disjoint for every
/// `ε > 0`.
pub fn em_kernel_supports(model: &Model, x: &DVector<f64>, eps: f64) -> Result<EmSupports> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(EprError::InvalidArgument(format!(
            "time step must be positive and finite, got {eps}"
        )));
    }
    let d = model.dim();
    if x.len() != d {
        return Err(EprError::DimensionMismatch(format!(
            "state has length {}, model dimension is {d}",
            x.len()
        )));
    }
    let cutoff = RankCutoff::default();
    match model {
        Model::Linear(m) => {
            let u = range_basis(m.diffusion(), cutoff)?;
            let forward = AffineSubspace {
                point: x + m.drift(x) * eps,
                basis: u.clone(),
            };
            // x ∈ y + εb(y) + im D with b(y) = -By means (I − εB)y ∈ x − im D.
            let step_map = DMatrix::identity(d, d) - m.drift_matrix() * eps;
            let lu = step_map.lu();
            let back_point = lu.solve(x).ok_or_else(|| {
                EprError::InvalidArgument("ε is a resonance of the drift: I − εB is singular".into())
            })?;
            let mut mapped = DMatrix::zeros(d, u.ncols());
            for j in 0..u.ncols() {
                let col = lu.solve(&u.column(j).into_owned()).ok_or_else(|| {
                    EprError::InvalidArgument(
                        "ε is a resonance of the drift: I − εB is singular".into(),
                    )
                })?;
                mapped.set_column(j, &col);
            }
            let backward = AffineSubspace {
                point: back_point,
                basis: range_basis(&mapped, cutoff)?,
            };
            let disjoint = !forward.approx_eq(&backward, SUPPORT_EQ_TOL);
            Ok(EmSupports {
                forward,
                backward,
                disjoint,
            })
        }
        Model::Langevin(l) => {
            let n = l.spatial_dim();
            let forward = AffineSubspace {
                point: x + l.drift(x) * eps,
                basis: range_basis(&(l.volatility() * l.volatility().transpose()), cutoff)?,
            };
            // Backward constraint y_q + εM⁻¹y_p = x_q is independent of the
            // potential: its solution set is spanned by (−εM⁻¹u, u).
            let mut back_point = DVector::zeros(2 * n);
            back_point.rows_mut(0, n).copy_from(&x.rows(0, n).into_owned());
            let mut span = DMatrix::zeros(2 * n, n);
            for j in 0..n {
                span[(j, j)] = -eps / l.mass()[j];
                span[(n + j, j)] = 1.0;
            }
            let backward = AffineSubspace {
                point: back_point,
                basis: range_basis(&span, cutoff)?,
            };
            let disjoint = !forward.approx_eq(&backward, SUPPORT_EQ_TOL);
            Ok(EmSupports {
                forward,
                backward,
                disjoint,
            })
        }
        Model::Nonlinear(s) => {
            let diffusion = s.diffusion();
            let u = range_basis(&diffusion, cutoff)?;
            let r = u.ncols();
            let forward = AffineSubspace {
                point: x + s.drift(x) * eps,
                basis: u.clone(),
            };
            if r == d {
                let backward = forward.clone();
                return Ok(EmSupports {
                    forward,
                    backward,
                    disjoint: false,
                });
            }
            // Probe the backward set: solve (I − UUᵀ)(y − x + εb(y)) = 0 by
            // fixed point for a spread of in-range offsets Uξ.
            let proj_complement = |v: &DVector<f64>| v - &u * (u.transpose() * v);
            let scale = 1.0 + x.norm();
            let mut probes: Vec<DVector<f64>> = Vec::new();
            let mut offsets = vec![DVector::zeros(r)];
            for j in 0..r {
                for s in [scale, -scale] {
                    let mut xi = DVector::zeros(r);
                    xi[j] = s;
                    offsets.push(xi);
                }
            }
            for xi in &offsets {
                let in_range = &u * xi;
                let mut w = proj_complement(&(x - s.drift(x) * eps));
                for _ in 0..100 {
                    let y = &in_range + &w;
                    w = proj_complement(&(x - s.drift(&y) * eps));
                }
                let y = &in_range + &w;
                let residual = proj_complement(&(&y - x + s.drift(&y) * eps)).norm();
                if residual <= 1e-8 * scale {
                    probes.push(y);
                }
            }
            if probes.is_empty() {
                return Err(EprError::Unsupported(
                    "backward support probe did not converge; drift too stiff for ε".into(),
                ));
            }
            let base = probes[0].clone();
            let mut directions = DMatrix::zeros(d, probes.len().saturating_sub(1));
            for (j, p) in probes.iter().skip(1).enumerate() {
                directions.set_column(j, &(p - &base));
            }
            let backward = AffineSubspace {
                point: base,
                basis: if directions.ncols() == 0 {
                    DMatrix::zeros(d, 0)
                } else {
                    range_basis(&directions, cutoff)?
                },
            };
            let disjoint = !forward.approx_eq(&backward, SUPPORT_EQ_TOL);
            Ok(EmSupports {
                forward,
                backward,
                disjoint,
            })
        }
    }
}
