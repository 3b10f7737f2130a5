//! Possibly-degenerate Gaussian distributions: construction, exact sampling,
//! and relative entropy.
//!
//! Degeneracy is first-class here because transition kernels of diffusions
//! with rank-deficient volatility live on proper affine subspaces, and the
//! relative entropy between two such kernels is exactly what the entropy
//! production rate aggregates. The KL routine therefore works with
//! pseudo-inverses and pseudo-determinants throughout and returns `+∞` when
//! the supports do not nest.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{
    self, ensure_finite, ensure_finite_vec, log_pseudo_det, psd_rank, pseudo_inverse, RankCutoff,
};
use crate::{EprError, Result};

/// Relative residual above which a support-inclusion test fails and the
/// relative entropy is reported as `+∞`.
const SUPPORT_TOL: f64 = 1e-8;

/// A Gaussian with symmetric positive-semidefinite (possibly singular)
/// covariance.
#[derive(Debug, Clone)]
pub struct GaussianDist {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianDist {
    /// Validates symmetry (relative defect ≤ 1e-10) and positive
    /// semidefiniteness (smallest eigenvalue ≥ -1e-10·‖cov‖).
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        ensure_finite_vec(&mean, "gaussian mean")?;
        ensure_finite(&cov, "gaussian covariance")?;
        if cov.nrows() != mean.len() || !cov.is_square() {
            return Err(EprError::DimensionMismatch(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if linalg::symmetry_defect(&cov) > 1e-10 {
            return Err(EprError::NotSymmetric);
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let eigs = cov.symmetric_eigenvalues();
        let scale = cov.norm().max(1.0);
        if eigs.iter().any(|l| *l < -1e-10 * scale) {
            return Err(EprError::NotPositiveSemidefinite);
        }
        Ok(GaussianDist { mean, cov })
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        GaussianDist {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim),
        }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `n` i.i.d. draws, reproducible from the seed (ChaCha12 keyed by
    /// `seed_from_u64(seed)`). Directions with eigenvalue below the cutoff
    /// receive exactly zero noise, so degenerate coordinates are
    /// deterministic.
    pub fn sample(&self, n: usize, seed: u64, cutoff: RankCutoff) -> Result<Vec<DVector<f64>>> {
        let factor = linalg::psd_sqrt_factor(&self.cov, cutoff)?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let rank = factor.ncols();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let z = DVector::from_fn(rank, |_, _| StandardNormal.sample(&mut rng));
            out.push(&self.mean + &factor * z);
        }
        Ok(out)
    }

    /// Orthogonal projector onto the support (the range of the covariance):
    /// `P = Σ Σ⁻`, symmetric and idempotent.
    pub fn support_projector(&self, cutoff: RankCutoff) -> Result<DMatrix<f64>> {
        linalg::range_projector(&self.cov, cutoff)
    }
}

/// Relative entropy `KL(p0 ‖ p1)` between possibly-degenerate Gaussians:
///
/// `½ [ tr(Σ₁⁻ Σ₀) − rank Σ₀ + log(det* Σ₁ / det* Σ₀) + (μ₁−μ₀)ᵀ Σ₁⁻ (μ₁−μ₀) ]`
///
/// Returns `+∞` when the support of `p0` is not contained in the support of
/// `p1` — detected as `(I − Σ₁Σ₁⁻)Σ₀ ≠ 0` or `(I − Σ₁Σ₁⁻)(μ₁−μ₀) ≠ 0` beyond
/// tolerance. Mutually singular kernels are a meaningful outcome for entropy
/// production, not an error.
pub fn kl_gaussian(p0: &GaussianDist, p1: &GaussianDist, cutoff: RankCutoff) -> Result<f64> {
    if p0.dim() != p1.dim() {
        return Err(EprError::DimensionMismatch(format!(
            "KL between Gaussians of dimension {} and {}",
            p0.dim(),
            p1.dim()
        )));
    }
    let dmu = p1.mean() - p0.mean();
    let proj1 = p1.support_projector(cutoff)?;
    let leak_cov = (&p0.cov - &proj1 * &p0.cov * &proj1).norm();
    if leak_cov > SUPPORT_TOL * p0.cov.norm().max(f64::MIN_POSITIVE) {
        return Ok(f64::INFINITY);
    }
    let leak_mean = (&dmu - &proj1 * &dmu).norm();
    if leak_mean > SUPPORT_TOL * (1.0 + dmu.norm()) {
        return Ok(f64::INFINITY);
    }
    let pinv1 = pseudo_inverse(&p1.cov, cutoff)?;
    let rank0 = psd_rank(&p0.cov, cutoff)?;
    let trace = (&pinv1 * &p0.cov).trace();
    let log_det = log_pseudo_det(&p1.cov, cutoff)? - log_pseudo_det(&p0.cov, cutoff)?;
    let quad = (pinv1 * &dmu).dot(&dmu);
    let two_kl = trace - rank0 as f64 + log_det + quad;
    Ok(0.5 * two_kl.max(0.0))
}
