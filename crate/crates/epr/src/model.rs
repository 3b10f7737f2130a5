//! Process definitions and the Helmholtz decomposition.
//!
//! A stationary diffusion `dx = b(x) dt + σ dW` with density `ρ` splits as
//! `b = b_rev + b_irr` with `b_rev = D ∇log ρ` (constant volatility) and
//! `∇·(b_irr ρ) = 0`. For linear diffusions `dx = -Bx dt + σ dW` stationary
//! at `ρ = N(0, Π⁻¹)` this reads `B = (D + Q)Π` with `D = σσᵀ/2` and an
//! antisymmetric `Q`; the time-reversed process is again linear with drift
//! matrix `C = (D − Q)Π`. The pair `(Π, Q)` is a stationarity certificate
//! that every [`LinearDiffusion`] carries and revalidates on construction.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{
    self, ensure_finite, ensure_finite_vec, lyapunov_solve, ou_kernel_parts, range_projector,
    RankCutoff,
};
use crate::{EprError, Result};

/// Relative tolerance for the antisymmetry of a recovered `Q`. A symmetric
/// residual in `BΣ − D` means the supplied density is not stationary for the
/// drift, which must fail loudly rather than be symmetrised away.
const ANTISYM_TOL: f64 = 1e-6;

/// Relative tolerance for range-inclusion tests on matrices (`im Q ⊆ im σ`).
const RANGE_TOL: f64 = 1e-8;

/// A stationary linear diffusion `dx = -Bx dt + σ dW` together with its
/// Helmholtz certificate `(Π, D, Q)`.
#[derive(Debug, Clone)]
pub struct LinearDiffusion {
    b: DMatrix<f64>,
    sigma: DMatrix<f64>,
    diffusion: DMatrix<f64>,
    sigma_stat: DMatrix<f64>,
    pi: DMatrix<f64>,
    q: DMatrix<f64>,
    cutoff: RankCutoff,
}

impl LinearDiffusion {
    /// Build from the drift matrix and volatility.
    ///
    /// Computes `D = σσᵀ/2`, the stationary covariance `Σ` from
    /// `BΣ + ΣBᵀ = 2D`, then `Π = Σ⁻¹` and `Q = BΣ − D`. Fails with
    /// `NoStationaryState` when `B` is not stable, and with
    /// `InconsistentModel` when the recovered `Q` is not antisymmetric
    /// (no Gaussian density is stationary for such a pair) or when `Σ` is
    /// singular (use [`LinearDiffusion::from_parts`] for degenerate
    /// stationary covariances).
    pub fn from_drift(b: DMatrix<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        Self::from_drift_with_cutoff(b, sigma, RankCutoff::default())
    }

    pub fn from_drift_with_cutoff(
        b: DMatrix<f64>,
        sigma: DMatrix<f64>,
        cutoff: RankCutoff,
    ) -> Result<Self> {
        ensure_finite(&b, "drift matrix")?;
        ensure_finite(&sigma, "volatility")?;
        let d = b.nrows();
        if !b.is_square() || sigma.nrows() != d {
            return Err(EprError::DimensionMismatch(format!(
                "drift is {}x{}, volatility has {} rows",
                b.nrows(),
                b.ncols(),
                sigma.nrows()
            )));
        }
        let diffusion = &sigma * sigma.transpose() * 0.5;
        let sigma_stat = lyapunov_solve(&b, &diffusion)?;
        let pi = invert_spd(&sigma_stat).map_err(|_| {
            EprError::InconsistentModel(
                "stationary covariance is singular; construct the model from (Π, D, Q)".into(),
            )
        })?;
        let q_raw = &b * &sigma_stat - &diffusion;
        let q = antisymmetrize_checked(&q_raw, b.norm())?;
        Ok(LinearDiffusion {
            b,
            sigma,
            diffusion,
            sigma_stat,
            pi,
            q,
            cutoff,
        })
    }

    /// Build from the certificate: precision `Π` (SPD), diffusion tensor `D`
    /// (symmetric PSD) and solenoidal `Q` (antisymmetric). The drift matrix
    /// is `B = (D + Q)Π` and the volatility is the symmetric PSD square root
    /// `σ = √(2D)`.
    ///
    /// Stability of `B` is not required: a certificate with a conservative
    /// direction (zero row in both `D` and `Q`) is still a valid stationary
    /// model, it just is not ergodic.
    pub fn from_parts(pi: DMatrix<f64>, diffusion: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self> {
        Self::from_parts_with_cutoff(pi, diffusion, q, RankCutoff::default())
    }

    pub fn from_parts_with_cutoff(
        pi: DMatrix<f64>,
        diffusion: DMatrix<f64>,
        q: DMatrix<f64>,
        cutoff: RankCutoff,
    ) -> Result<Self> {
        ensure_finite(&pi, "precision")?;
        ensure_finite(&diffusion, "diffusion tensor")?;
        ensure_finite(&q, "solenoidal matrix")?;
        let d = pi.nrows();
        if !pi.is_square() || diffusion.shape() != (d, d) || q.shape() != (d, d) {
            return Err(EprError::DimensionMismatch(
                "Π, D, Q must be square matrices of equal size".into(),
            ));
        }
        if linalg::symmetry_defect(&pi) > 1e-8 {
            return Err(EprError::NotSymmetric);
        }
        let pi = (&pi + pi.transpose()) * 0.5;
        let pi_eigs = pi.symmetric_eigenvalues();
        if pi_eigs.iter().any(|l| *l <= 1e-12 * pi.norm().max(1.0)) {
            return Err(EprError::NotPositiveDefinite);
        }
        if (&q + q.transpose()).norm() > ANTISYM_TOL * q.norm().max(1.0) {
            return Err(EprError::NotAntisymmetric);
        }
        let q = (&q - q.transpose()) * 0.5;
        let sigma = linalg::psd_sqrt(&(&diffusion * 2.0), cutoff)?;
        let diffusion = (&diffusion + diffusion.transpose()) * 0.5;
        let sigma_stat = invert_spd(&pi)?;
        let b = (&diffusion + &q) * &pi;
        Ok(LinearDiffusion {
            b,
            sigma,
            diffusion,
            sigma_stat,
            pi,
            q,
            cutoff,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// Drift matrix `B` of `dx = -Bx dt + σ dW`.
    pub fn drift_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn volatility(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Diffusion tensor `D = σσᵀ/2`.
    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    /// Stationary covariance `Σ = Π⁻¹`.
    pub fn stationary_covariance(&self) -> &DMatrix<f64> {
        &self.sigma_stat
    }

    /// Stationary precision `Π`.
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.pi
    }

    /// Antisymmetric solenoidal part `Q`.
    pub fn solenoidal(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn cutoff(&self) -> RankCutoff {
        self.cutoff
    }

    /// Drift value `b(x) = -Bx`.
    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        -(&self.b * x)
    }

    /// Matrix `DΠ` of the reversible part `b_rev(x) = -DΠ x`.
    pub fn reversible_drift_matrix(&self) -> DMatrix<f64> {
        &self.diffusion * &self.pi
    }

    /// Matrix `QΠ` of the irreversible part `b_irr(x) = -QΠ x`.
    pub fn irreversible_drift_matrix(&self) -> DMatrix<f64> {
        &self.q * &self.pi
    }

    /// Drift matrix `C = (D − Q)Π` of the time-reversed process.
    pub fn reversed_drift_matrix(&self) -> DMatrix<f64> {
        (&self.diffusion - &self.q) * &self.pi
    }

    /// The time-reversed model: drift matrix `C = (D − Q)Π`, same volatility,
    /// same stationary density. Reversing twice gives back the original.
    pub fn time_reverse(&self) -> Self {
        LinearDiffusion {
            b: self.reversed_drift_matrix(),
            sigma: self.sigma.clone(),
            diffusion: self.diffusion.clone(),
            sigma_stat: self.sigma_stat.clone(),
            pi: self.pi.clone(),
            q: -&self.q,
            cutoff: self.cutoff,
        }
    }

    /// Whether `im Q ⊆ im σ`, the point-free form of the range condition
    /// `b_irr(x) ∈ im σ` for linear models.
    pub fn range_condition_holds(&self) -> Result<bool> {
        let proj = range_projector(&self.sigma, self.cutoff)?;
        let leak = (&self.q - &proj * &self.q).norm();
        Ok(leak <= RANGE_TOL * self.q.norm().max(1.0))
    }

    /// View as a [`NonlinearSDE`] with `b(x) = -Bx` and `∇log ρ(x) = -Πx`.
    pub fn as_nonlinear(&self) -> NonlinearSDE {
        let b = self.b.clone();
        let pi = self.pi.clone();
        NonlinearSDE {
            drift: Arc::new(move |x: &DVector<f64>| -(&b * x)),
            sigma: self.sigma.clone(),
            dim: self.dim(),
            log_density_grad: Some(Arc::new(move |x: &DVector<f64>| -(&pi * x))),
        }
    }
}

fn invert_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eigs = a.symmetric_eigenvalues();
    let max = eigs.iter().cloned().fold(0.0_f64, f64::max);
    if eigs.iter().any(|l| *l <= 1e-12 * max.max(1.0)) {
        return Err(EprError::NotPositiveDefinite);
    }
    a.clone()
        .try_inverse()
        .ok_or(EprError::NotPositiveDefinite)
        .map(|inv| (&inv + inv.transpose()) * 0.5)
}

fn antisymmetrize_checked(q: &DMatrix<f64>, drift_scale: f64) -> Result<DMatrix<f64>> {
    let sym_residual = (q + q.transpose()).norm() * 0.5;
    if sym_residual > ANTISYM_TOL * drift_scale.max(1.0) {
        return Err(EprError::InconsistentModel(format!(
            "recovered Q has symmetric residual {sym_residual:.3e}; \
             the model has no centred Gaussian stationary density"
        )));
    }
    Ok((q - q.transpose()) * 0.5)
}

type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// A generic SDE `dx = b(x) dt + σ dW` with constant volatility, optionally
/// carrying `∇log ρ` of a known stationary density.
#[derive(Clone)]
pub struct NonlinearSDE {
    drift: VectorField,
    sigma: DMatrix<f64>,
    dim: usize,
    log_density_grad: Option<VectorField>,
}

impl NonlinearSDE {
    pub fn new(
        dim: usize,
        drift: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        sigma: DMatrix<f64>,
        log_density_grad: Option<VectorField>,
    ) -> Result<Self> {
        ensure_finite(&sigma, "volatility")?;
        if sigma.nrows() != dim {
            return Err(EprError::DimensionMismatch(format!(
                "volatility has {} rows for state dimension {dim}",
                sigma.nrows()
            )));
        }
        Ok(NonlinearSDE {
            drift: Arc::new(drift),
            sigma,
            dim,
            log_density_grad,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }

    pub fn volatility(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Diffusion tensor `D = σσᵀ/2`.
    pub fn diffusion(&self) -> DMatrix<f64> {
        &self.sigma * self.sigma.transpose() * 0.5
    }

    pub fn has_density_grad(&self) -> bool {
        self.log_density_grad.is_some()
    }

    pub fn log_density_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self
            .log_density_grad
            .as_ref()
            .ok_or(EprError::MissingDensityGrad)?;
        Ok(g(x))
    }

    /// Helmholtz split at a point: `b_rev(x) = D ∇log ρ(x)` (constant σ, so
    /// the `∇·D` term vanishes) and `b_irr(x) = b(x) − b_rev(x)`.
    pub fn helmholtz_pointwise(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let grad = self.log_density_grad(x)?;
        let b_rev = self.diffusion() * grad;
        let b_irr = self.drift(x) - &b_rev;
        Ok((b_rev, b_irr))
    }

    /// Max over `points` of the stationarity residual
    /// `∇·(b_irr ρ)/ρ = ∇·b_irr + b_irr·∇log ρ`, with the divergence taken
    /// by central differences of step `h` (default `1e-4·(1+‖x‖)`).
    pub fn divergence_check(&self, points: &[DVector<f64>], h: Option<f64>) -> Result<f64> {
        if !self.has_density_grad() {
            return Err(EprError::MissingDensityGrad);
        }
        let mut worst = 0.0_f64;
        for x in points {
            let step = h.unwrap_or(1e-4 * (1.0 + x.norm()));
            let mut div = 0.0;
            for i in 0..self.dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += step;
                xm[i] -= step;
                let bp = self.helmholtz_pointwise(&xp)?.1;
                let bm = self.helmholtz_pointwise(&xm)?.1;
                div += (bp[i] - bm[i]) / (2.0 * step);
            }
            let (_, b_irr) = self.helmholtz_pointwise(x)?;
            let residual = div + b_irr.dot(&self.log_density_grad(x)?);
            worst = worst.max(residual.abs());
        }
        Ok(worst)
    }
}

impl std::fmt::Debug for NonlinearSDE {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearSDE")
            .field("dim", &self.dim)
            .field("sigma", &self.sigma)
            .field("has_density_grad", &self.has_density_grad())
            .finish()
    }
}

/// Fraction of `points` violating the range condition
/// `b_irr(x) ∈ im σ`, measured as
/// `r(x) = ‖(I − σσ⁻) b_irr(x)‖ / (1 + ‖b_irr(x)‖) > tol`.
pub fn range_condition_fraction(
    sde: &NonlinearSDE,
    points: &[DVector<f64>],
    tol: f64,
) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let proj = range_projector(sde.volatility(), RankCutoff::default())?;
    let id = DMatrix::<f64>::identity(sde.dim(), sde.dim());
    let complement = id - proj;
    let mut violations = 0usize;
    for x in points {
        let (_, b_irr) = sde.helmholtz_pointwise(x)?;
        let r = (&complement * &b_irr).norm() / (1.0 + b_irr.norm());
        if r > tol {
            violations += 1;
        }
    }
    Ok(violations as f64 / points.len() as f64)
}

/// Kinetic model `dq = M⁻¹p dt`, `dp = -∇V(q) dt − γM⁻¹p dt + √(2γβ⁻¹) dW`
/// with diagonal mass matrix, friction `γ` and inverse temperature `β`.
#[derive(Clone)]
pub struct UnderdampedLangevin {
    grad_v: VectorField,
    mass: DVector<f64>,
    gamma: f64,
    beta: f64,
    n: usize,
    quadratic_k: Option<DMatrix<f64>>,
}

impl UnderdampedLangevin {
    /// Quadratic potential `V(q) = ½ qᵀKq` with `K` SPD. Keeping `K` around
    /// makes the canonical density Gaussian and the model exactly linear.
    pub fn quadratic(k: DMatrix<f64>, mass: DVector<f64>, gamma: f64, beta: f64) -> Result<Self> {
        ensure_finite(&k, "stiffness matrix")?;
        let n = k.nrows();
        if !k.is_square() {
            return Err(EprError::DimensionMismatch("K must be square".into()));
        }
        if linalg::symmetry_defect(&k) > 1e-8 {
            return Err(EprError::NotSymmetric);
        }
        let k = (&k + k.transpose()) * 0.5;
        if k.symmetric_eigenvalues()
            .iter()
            .any(|l| *l <= 1e-12 * k.norm().max(1.0))
        {
            return Err(EprError::NotPositiveDefinite);
        }
        let grad_k = k.clone();
        Self::build(
            n,
            Arc::new(move |q: &DVector<f64>| &grad_k * q),
            mass,
            gamma,
            beta,
            Some(k),
        )
    }

    /// Arbitrary smooth potential given by its gradient.
    pub fn custom(
        n: usize,
        grad_v: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        mass: DVector<f64>,
        gamma: f64,
        beta: f64,
    ) -> Result<Self> {
        Self::build(n, Arc::new(grad_v), mass, gamma, beta, None)
    }

    fn build(
        n: usize,
        grad_v: VectorField,
        mass: DVector<f64>,
        gamma: f64,
        beta: f64,
        quadratic_k: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        ensure_finite_vec(&mass, "mass")?;
        if mass.len() != n {
            return Err(EprError::DimensionMismatch(format!(
                "mass vector has length {} for spatial dimension {n}",
                mass.len()
            )));
        }
        if mass.iter().any(|m| *m <= 0.0) {
            return Err(EprError::InvalidArgument("masses must be positive".into()));
        }
        // γ = 0 is admitted as the deterministic (Hamiltonian) limit used to
        // validate the splitting scheme; β must stay positive.
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(EprError::InvalidArgument(
                "friction must be nonnegative and finite".into(),
            ));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(EprError::InvalidArgument(
                "inverse temperature must be positive and finite".into(),
            ));
        }
        Ok(UnderdampedLangevin {
            grad_v,
            mass,
            gamma,
            beta,
            n,
            quadratic_k,
        })
    }

    /// Spatial dimension `n`; the phase-space state is `(q, p) ∈ R^{2n}`.
    pub fn spatial_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    /// Stiffness matrix when the potential is quadratic.
    pub fn quadratic_stiffness(&self) -> Option<&DMatrix<f64>> {
        self.quadratic_k.as_ref()
    }

    pub fn grad_potential(&self, q: &DVector<f64>) -> DVector<f64> {
        (self.grad_v)(q)
    }

    /// Phase-space drift `(M⁻¹p, −∇V(q) − γM⁻¹p)`.
    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let q = x.rows(0, n).into_owned();
        let p = x.rows(n, n).into_owned();
        let minv_p = DVector::from_fn(n, |i, _| p[i] / self.mass[i]);
        let grad = self.grad_potential(&q);
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&minv_p);
        out.rows_mut(n, n)
            .copy_from(&(-grad - minv_p * self.gamma));
        out
    }

    /// Phase-space volatility `(0, √(2γβ⁻¹) I)ᵀ` (2n×n).
    pub fn volatility(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut sigma = DMatrix::zeros(2 * n, n);
        let amp = (2.0 * self.gamma / self.beta).sqrt();
        for i in 0..n {
            sigma[(n + i, i)] = amp;
        }
        sigma
    }

    /// Canonical stationary covariance `blockdiag(K⁻¹/β, M/β)` when the
    /// potential is quadratic.
    pub fn canonical_covariance(&self) -> Option<DMatrix<f64>> {
        let k = self.quadratic_k.as_ref()?;
        let k_inv = k.clone().try_inverse()?;
        let n = self.n;
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        cov.view_mut((0, 0), (n, n)).copy_from(&(k_inv / self.beta));
        for i in 0..n {
            cov[(n + i, n + i)] = self.mass[i] / self.beta;
        }
        Some(cov)
    }

    /// View as a [`NonlinearSDE`] on phase space, carrying
    /// `∇log ρ = -β(∇V(q), M⁻¹p)` of the canonical density.
    pub fn as_nonlinear(&self) -> NonlinearSDE {
        let this = self.clone();
        let grad_model = self.clone();
        let n = self.n;
        let beta = self.beta;
        NonlinearSDE {
            drift: Arc::new(move |x: &DVector<f64>| this.drift(x)),
            sigma: self.volatility(),
            dim: 2 * n,
            log_density_grad: Some(Arc::new(move |x: &DVector<f64>| {
                let q = x.rows(0, n).into_owned();
                let p = x.rows(n, n).into_owned();
                let mut g = DVector::zeros(2 * n);
                g.rows_mut(0, n)
                    .copy_from(&(-grad_model.grad_potential(&q) * beta));
                for i in 0..n {
                    g[n + i] = -beta * p[i] / grad_model.mass[i];
                }
                g
            })),
        }
    }
}

impl std::fmt::Debug for UnderdampedLangevin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnderdampedLangevin")
            .field("n", &self.n)
            .field("gamma", &self.gamma)
            .field("beta", &self.beta)
            .field("quadratic", &self.quadratic_k.is_some())
            .finish()
    }
}

/// The linear (Ornstein–Uhlenbeck) form of underdamped Langevin dynamics in
/// the quadratic potential `V(q) = ½ qᵀKq`:
/// `Π = β·blockdiag(K, M⁻¹)`, `D = blockdiag(0, γβ⁻¹ I)`,
/// `Q = β⁻¹ [[0, −I], [I, 0]]`.
pub fn langevin_as_linear(l: &UnderdampedLangevin, k: &DMatrix<f64>) -> Result<LinearDiffusion> {
    langevin_perturbed_as_linear(
        l,
        k,
        &DMatrix::zeros(l.spatial_dim(), l.spatial_dim()),
        &DMatrix::zeros(l.spatial_dim(), l.spatial_dim()),
    )
}

/// Linear form of the perturbed underdamped equation
/// `dq = M⁻¹p dt − Q₁∇V(q) dt`,
/// `dp = −∇V(q) dt − Q₂M⁻¹p dt − γM⁻¹p dt + √(2γβ⁻¹) dW`
/// with antisymmetric `Q₁, Q₂` and quadratic `V`: the certificate keeps the
/// canonical `Π` and `D` while `Q = β⁻¹ [[Q₁, −I], [I, Q₂]]`.
pub fn langevin_perturbed_as_linear(
    l: &UnderdampedLangevin,
    k: &DMatrix<f64>,
    q1: &DMatrix<f64>,
    q2: &DMatrix<f64>,
) -> Result<LinearDiffusion> {
    let n = l.spatial_dim();
    ensure_finite(k, "stiffness matrix")?;
    if k.shape() != (n, n) || q1.shape() != (n, n) || q2.shape() != (n, n) {
        return Err(EprError::DimensionMismatch(
            "K, Q1, Q2 must be n×n for spatial dimension n".into(),
        ));
    }
    if linalg::symmetry_defect(k) > 1e-8 {
        return Err(EprError::NotSymmetric);
    }
    if k.symmetric_eigenvalues()
        .iter()
        .any(|l| *l <= 1e-12 * k.norm().max(1.0))
    {
        return Err(EprError::NotPositiveDefinite);
    }
    let beta = l.beta();
    let gamma = l.gamma();
    let mut pi = DMatrix::zeros(2 * n, 2 * n);
    pi.view_mut((0, 0), (n, n)).copy_from(&(k * beta));
    for i in 0..n {
        pi[(n + i, n + i)] = beta / l.mass()[i];
    }
    let mut diffusion = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        diffusion[(n + i, n + i)] = gamma / beta;
    }
    let mut q = DMatrix::zeros(2 * n, 2 * n);
    q.view_mut((0, 0), (n, n)).copy_from(&(q1 / beta));
    q.view_mut((n, n), (n, n)).copy_from(&(q2 / beta));
    for i in 0..n {
        q[(i, n + i)] = -1.0 / beta;
        q[(n + i, i)] = 1.0 / beta;
    }
    LinearDiffusion::from_parts(pi, diffusion, q)
}

/// Generalised entropy production rate of the perturbed underdamped model
/// under the momentum-flip involution: `+∞` when `Q₁ ≠ 0`, otherwise
/// `−γ⁻¹ β tr(Q₂ M⁻¹ Q₂)`.
pub fn generalized_ep_perturbed_closed_form(
    l: &UnderdampedLangevin,
    q1: &DMatrix<f64>,
    q2: &DMatrix<f64>,
) -> f64 {
    if q1.norm() > RANGE_TOL * q1.nrows() as f64 {
        return f64::INFINITY;
    }
    let n = l.spatial_dim();
    let m_inv_q2 = DMatrix::from_fn(n, n, |i, j| q2[(i, j)] / l.mass()[i]);
    let value = -(l.beta() / l.gamma()) * (q2 * m_inv_q2).trace();
    value.max(0.0)
}

/// Momentum-flip matrix `P = blockdiag(I_n, −I_n)`.
pub fn momentum_flip_matrix(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::identity(2 * n, 2 * n);
    for i in 0..n {
        p[(n + i, n + i)] = -1.0;
    }
    p
}

/// Residuals of the momentum-flip identity at lag `ε`.
#[derive(Debug, Clone, Copy)]
pub struct FlipCheck {
    /// `‖P e^{-εC} P − e^{-εB}‖_F`
    pub mean_residual: f64,
    /// `‖P S̄_ε P − S_ε‖_F`
    pub cov_residual: f64,
    /// Both residuals within 1e-9.
    pub holds: bool,
}

/// Checks the kinetic time-reversal identity "time reversal equals momentum
/// reversal": `P e^{-εC} P = e^{-εB}` and `P S̄_ε P = S_ε` with
/// `P = blockdiag(I, −I)`. Holds for models built by [`langevin_as_linear`];
/// fails for generic even-dimensional models.
pub fn momentum_flip_identity(m: &LinearDiffusion, eps: f64) -> Result<FlipCheck> {
    let d = m.dim();
    if !d.is_multiple_of(2) {
        return Err(EprError::DimensionMismatch(format!(
            "momentum flip needs an even state dimension, got {d}"
        )));
    }
    if eps < 0.0 || !eps.is_finite() {
        return Err(EprError::InvalidArgument("lag must be nonnegative".into()));
    }
    if eps == 0.0 {
        return Ok(FlipCheck {
            mean_residual: 0.0,
            cov_residual: 0.0,
            holds: true,
        });
    }
    let p = momentum_flip_matrix(d / 2);
    let (fwd_mean, fwd_cov) = ou_kernel_parts(m.drift_matrix(), m.diffusion(), eps)?;
    let (rev_mean, rev_cov) = ou_kernel_parts(&m.reversed_drift_matrix(), m.diffusion(), eps)?;
    let mean_residual = (&p * rev_mean * &p - fwd_mean).norm();
    let cov_residual = (&p * rev_cov * &p - fwd_cov).norm();
    Ok(FlipCheck {
        mean_residual,
        cov_residual,
        holds: mean_residual <= 1e-9 && cov_residual <= 1e-9,
    })
}

/// A process the simulators and experiment drivers can dispatch on.
#[derive(Debug, Clone)]
pub enum Model {
    Linear(LinearDiffusion),
    Langevin(UnderdampedLangevin),
    Nonlinear(NonlinearSDE),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.dim(),
            Model::Langevin(l) => l.dim(),
            Model::Nonlinear(s) => s.dim(),
        }
    }
}
