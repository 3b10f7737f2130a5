//! Dense small-matrix kernels: rank-aware pseudo-inverse and
//! pseudo-determinant, matrix exponential, Lyapunov solve, and the Van Loan
//! block-exponential integral behind Ornstein–Uhlenbeck covariances.
//!
//! Everything here is pure and operates on `nalgebra::DMatrix<f64>` at the
//! library's target scale (d ≲ 50). All rank decisions downstream — `rank σ`,
//! `det*`, `D⁻`, support projectors — share one [`RankCutoff`] so that the
//! finite/infinite classifications stay mutually consistent.

use nalgebra::{DMatrix, DVector};

use crate::{EprError, Result};

/// Relative threshold under which singular values (or eigenvalues of a PSD
/// matrix) are treated as zero.
///
/// The default is `max(rows, cols) · machine-epsilon`, scaled by the largest
/// singular value at the point of use. No analytical result fixes this
/// tolerance; it is a library convention, overridable per call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankCutoff {
    relative_tolerance: Option<f64>,
}

impl RankCutoff {
    /// Default cutoff: `max(rows, cols) · eps · σ_max`.
    pub const fn default_cutoff() -> Self {
        RankCutoff {
            relative_tolerance: None,
        }
    }

    /// Fixed relative tolerance (must be nonnegative and finite).
    pub fn relative(tol: f64) -> Result<Self> {
        if !tol.is_finite() || tol < 0.0 {
            return Err(EprError::InvalidArgument(format!(
                "rank cutoff must be a nonnegative finite number, got {tol}"
            )));
        }
        Ok(RankCutoff {
            relative_tolerance: Some(tol),
        })
    }

    /// Absolute threshold for a matrix with the given shape and largest
    /// singular value.
    pub fn threshold(&self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        let rel = self
            .relative_tolerance
            .unwrap_or(rows.max(cols) as f64 * f64::EPSILON);
        rel * sigma_max.max(0.0)
    }
}

impl Default for RankCutoff {
    fn default() -> Self {
        Self::default_cutoff()
    }
}

pub(crate) fn ensure_finite(a: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EprError::NonFinite(what))
    }
}

pub(crate) fn ensure_finite_vec(v: &DVector<f64>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EprError::NonFinite(what))
    }
}

/// Relative symmetry defect `‖A − Aᵀ‖_F / max(1, ‖A‖_F)`.
pub fn symmetry_defect(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).norm() / a.norm().max(1.0)
}

fn symmetrized(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Moore–Penrose pseudo-inverse with singular values below the cutoff
/// treated as zero.
pub fn pseudo_inverse(a: &DMatrix<f64>, cutoff: RankCutoff) -> Result<DMatrix<f64>> {
    ensure_finite(a, "pseudo_inverse input")?;
    let (rows, cols) = a.shape();
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let thr = cutoff.threshold(sigma_max, rows, cols);
    svd.pseudo_inverse(thr)
        .map_err(|e| EprError::InvalidArgument(e.to_string()))
}

/// Number of singular values above the cutoff.
pub fn rank_of(a: &DMatrix<f64>, cutoff: RankCutoff) -> Result<usize> {
    ensure_finite(a, "rank input")?;
    let (rows, cols) = a.shape();
    let svd = a.clone().svd(false, false);
    let sigma_max = svd.singular_values.max();
    let thr = cutoff.threshold(sigma_max, rows, cols);
    Ok(svd.singular_values.iter().filter(|s| **s > thr).count())
}

/// Orthogonal projector onto the range of `a`: `P = A A⁻`, computed from the
/// left singular vectors above the cutoff so it is exactly symmetric.
pub fn range_projector(a: &DMatrix<f64>, cutoff: RankCutoff) -> Result<DMatrix<f64>> {
    ensure_finite(a, "range_projector input")?;
    let (rows, cols) = a.shape();
    let svd = a.clone().svd(true, false);
    let sigma_max = svd.singular_values.max();
    let thr = cutoff.threshold(sigma_max, rows, cols);
    let u = svd.u.as_ref().expect("svd requested u");
    let mut p = DMatrix::zeros(rows, rows);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > thr {
            let col = u.column(i);
            p += col * col.transpose();
        }
    }
    Ok(symmetrized(&p))
}

/// Orthonormal basis (d×r) of the range of `a`: the left singular vectors
/// with singular value above the cutoff.
pub fn range_basis(a: &DMatrix<f64>, cutoff: RankCutoff) -> Result<DMatrix<f64>> {
    ensure_finite(a, "range_basis input")?;
    let (rows, cols) = a.shape();
    let svd = a.clone().svd(true, false);
    let sigma_max = svd.singular_values.max();
    let thr = cutoff.threshold(sigma_max, rows, cols);
    let u = svd.u.as_ref().expect("svd requested u");
    let kept: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > thr)
        .map(|(i, _)| i)
        .collect();
    let mut basis = DMatrix::zeros(rows, kept.len());
    for (j, i) in kept.iter().enumerate() {
        basis.set_column(j, &u.column(*i));
    }
    Ok(basis)
}

/// Eigenvalues of a symmetric PSD matrix, sorted descending, after checking
/// symmetry and positive semidefiniteness within tolerance.
///
/// Eigenvalues in `[-psd_slack, threshold]` are flushed to zero; anything
/// below `-psd_slack` (relative slack `1e-10`) is an indefiniteness error.
fn psd_eigenvalues(a: &DMatrix<f64>, cutoff: RankCutoff) -> Result<Vec<f64>> {
    ensure_finite(a, "psd input")?;
    if !a.is_square() {
        return Err(EprError::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if symmetry_defect(a) > 1e-8 {
        return Err(EprError::NotSymmetric);
    }
    let sym = symmetrized(a);
    let n = sym.nrows();
    let mut eig: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let lambda_max = eig.first().copied().unwrap_or(0.0).max(0.0);
    let slack = 1e-10 * lambda_max.max(1.0);
    if eig.iter().any(|l| *l < -slack) {
        return Err(EprError::NotPositiveSemidefinite);
    }
    let thr = cutoff.threshold(lambda_max, n, n);
    Ok(eig
        .into_iter()
        .map(|l| if l > thr { l } else { 0.0 })
        .collect())
}

/// Pseudo-determinant of a symmetric PSD matrix: the product of eigenvalues
/// above the cutoff. The empty product (zero matrix) is 1.
pub fn pseudo_det(a: &DMatrix<f64>, cutoff: RankCutoff) -> Result<f64> {
    Ok(psd_eigenvalues(a, cutoff)?
        .into_iter()
        .filter(|l| *l > 0.0)
        .product())
}

/// `log det*` of a symmetric PSD matrix, summed in the log domain so tiny
/// eigenvalue products do not underflow.
pub fn log_pseudo_det(a: &DMatrix<f64>, cutoff: RankCutoff) -> Result<f64> {
    Ok(psd_eigenvalues(a, cutoff)?
        .into_iter()
        .filter(|l| *l > 0.0)
        .map(f64::ln)
        .sum())
}

/// Rank of a symmetric PSD matrix under the shared cutoff (eigenvalue count,
/// consistent with [`pseudo_det`]).
pub fn psd_rank(a: &DMatrix<f64>, cutoff: RankCutoff) -> Result<usize> {
    Ok(psd_eigenvalues(a, cutoff)?
        .into_iter()
        .filter(|l| *l > 0.0)
        .count())
}

/// Rectangular factor `L` (d×r) of a symmetric PSD matrix with `L Lᵀ = A`,
/// truncated at the cutoff. Columns are ordered by descending eigenvalue so
/// the factorisation is deterministic.
pub fn psd_sqrt_factor(a: &DMatrix<f64>, cutoff: RankCutoff) -> Result<DMatrix<f64>> {
    ensure_finite(a, "psd_sqrt input")?;
    if symmetry_defect(a) > 1e-8 {
        return Err(EprError::NotSymmetric);
    }
    let sym = symmetrized(a);
    let n = sym.nrows();
    let eig = sym.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let slack = 1e-10 * lambda_max.max(1.0);
    if eig.eigenvalues.iter().any(|l| *l < -slack) {
        return Err(EprError::NotPositiveSemidefinite);
    }
    let thr = cutoff.threshold(lambda_max, n, n);
    let mut kept: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > thr)
        .map(|(i, l)| (*l, i))
        .collect();
    kept.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let mut factor = DMatrix::zeros(n, kept.len());
    for (j, (l, i)) in kept.iter().enumerate() {
        factor.set_column(j, &(eig.eigenvectors.column(*i) * l.sqrt()));
    }
    Ok(factor)
}

/// Full symmetric PSD square root `A^{1/2}` (d×d), with eigenvalues below
/// the cutoff flushed to zero.
pub fn psd_sqrt(a: &DMatrix<f64>, cutoff: RankCutoff) -> Result<DMatrix<f64>> {
    ensure_finite(a, "psd_sqrt input")?;
    if symmetry_defect(a) > 1e-8 {
        return Err(EprError::NotSymmetric);
    }
    let sym = symmetrized(a);
    let n = sym.nrows();
    let eig = sym.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let slack = 1e-10 * lambda_max.max(1.0);
    if eig.eigenvalues.iter().any(|l| *l < -slack) {
        return Err(EprError::NotPositiveSemidefinite);
    }
    let thr = cutoff.threshold(lambda_max, n, n);
    let mut root = DMatrix::zeros(n, n);
    for (i, l) in eig.eigenvalues.iter().enumerate() {
        if *l > thr {
            let col = eig.eigenvectors.column(i);
            root += col * col.transpose() * l.sqrt();
        }
    }
    Ok(symmetrized(&root))
}

/// Matrix exponential via scaling-and-squaring with Padé approximation.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(a, "expm input")?;
    if !a.is_square() {
        return Err(EprError::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.exp())
}

/// Solve `BΣ + ΣBᵀ = 2D` for the stationary covariance of `dx = -Bx dt` with
/// diffusion `D`, by Kronecker vectorisation.
///
/// Errors with [`EprError::NoStationaryState`] when `B` has an eigenvalue
/// with nonpositive real part.
pub fn lyapunov_solve(b: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(b, "lyapunov drift")?;
    ensure_finite(d, "lyapunov diffusion")?;
    let n = b.nrows();
    if !b.is_square() || d.shape() != (n, n) {
        return Err(EprError::DimensionMismatch(
            "lyapunov_solve needs square B and D of equal size".into(),
        ));
    }
    if symmetry_defect(d) > 1e-8 {
        return Err(EprError::NotSymmetric);
    }
    let stability_slack = 1e-9 * b.norm().max(1.0);
    if b.complex_eigenvalues().iter().any(|l| l.re <= stability_slack) {
        return Err(EprError::NoStationaryState);
    }
    let id = DMatrix::<f64>::identity(n, n);
    let system = id.kronecker(b) + b.kronecker(&id);
    let rhs = DVector::from_column_slice((d * 2.0).as_slice());
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| EprError::InconsistentModel("singular Lyapunov system".into()))?;
    let sigma = symmetrized(&DMatrix::from_column_slice(n, n, sol.as_slice()));
    let residual = (b * &sigma + &sigma * b.transpose() - d * 2.0).norm();
    if residual > 1e-10 * (1.0 + d.norm()) {
        return Err(EprError::InconsistentModel(format!(
            "Lyapunov residual {residual:.3e} exceeds bound"
        )));
    }
    Ok(sigma)
}

/// Mean map and covariance of the Ornstein–Uhlenbeck kernel at lag `eps`:
/// `(e^{-εB},  S_ε = ∫_0^ε e^{-tB} 2D e^{-tBᵀ} dt)`.
///
/// Both come from one block exponential of `[[-B, 2D], [0, Bᵀ]]·ε`, which
/// keeps `S_ε` accurate even at tiny lags where quadrature would lose digits.
pub fn ou_kernel_parts(
    b: &DMatrix<f64>,
    d: &DMatrix<f64>,
    eps: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    ensure_finite(b, "kernel drift")?;
    ensure_finite(d, "kernel diffusion")?;
    let n = b.nrows();
    if !b.is_square() || d.shape() != (n, n) {
        return Err(EprError::DimensionMismatch(
            "ou_kernel_parts needs square B and D of equal size".into(),
        ));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(EprError::InvalidArgument(format!(
            "time step must be positive and finite, got {eps}"
        )));
    }
    let mut block = DMatrix::<f64>::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-b * eps));
    block.view_mut((0, n), (n, n)).copy_from(&(d * (2.0 * eps)));
    block
        .view_mut((n, n), (n, n))
        .copy_from(&(b.transpose() * eps));
    let e = expm(&block)?;
    let mean_map = e.view((0, 0), (n, n)).clone_owned();
    let f12 = e.view((0, n), (n, n)).clone_owned();
    let cov = symmetrized(&(&f12 * mean_map.transpose()));
    Ok((mean_map, cov))
}

/// The integral `S_ε = ∫_0^ε e^{-tB} 2D e^{-tBᵀ} dt` (Van Loan method).
pub fn van_loan_covariance(b: &DMatrix<f64>, d: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    Ok(ou_kernel_parts(b, d, eps)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn cutoff() -> RankCutoff {
        RankCutoff::default()
    }

    #[test]
    fn pseudo_inverse_basics() {
        let pinv = pseudo_inverse(&dmatrix![2.0, 0.0; 0.0, 0.0], cutoff()).unwrap();
        assert_relative_eq!(pinv, dmatrix![0.5, 0.0; 0.0, 0.0], epsilon = 1e-14);
        let id = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(pseudo_inverse(&id, cutoff()).unwrap(), id, epsilon = 1e-14);
        let ones = dmatrix![1.0, 1.0; 1.0, 1.0];
        let pinv = pseudo_inverse(&ones, cutoff()).unwrap();
        assert_relative_eq!(
            pinv,
            dmatrix![0.25, 0.25; 0.25, 0.25],
            epsilon = 1e-12
        );
        assert!(pseudo_inverse(&dmatrix![f64::NAN], cutoff()).is_err());
    }

    #[test]
    fn pseudo_det_and_rank() {
        let a = dmatrix![2.0, 0.0, 0.0; 0.0, 0.0, 0.0; 0.0, 0.0, 3.0];
        assert_relative_eq!(pseudo_det(&a, cutoff()).unwrap(), 6.0, epsilon = 1e-12);
        assert_eq!(psd_rank(&a, cutoff()).unwrap(), 2);
        assert_relative_eq!(
            pseudo_det(&DMatrix::identity(4, 4), cutoff()).unwrap(),
            1.0
        );
        // Empty eigenvalue product: det* of the zero matrix is 1, keeping
        // log det* finite for zero covariances.
        assert_relative_eq!(pseudo_det(&DMatrix::zeros(2, 2), cutoff()).unwrap(), 1.0);
        assert!(pseudo_det(&dmatrix![0.0, 1.0; 0.0, 0.0], cutoff()).is_err());
        assert!(pseudo_det(&dmatrix![1.0, 0.0; 0.0, -1.0], cutoff()).is_err());

        assert_eq!(rank_of(&dmatrix![1.0, 0.0; 0.0, 0.0], cutoff()).unwrap(), 1);
        assert_eq!(rank_of(&DMatrix::zeros(3, 2), cutoff()).unwrap(), 0);
        assert_eq!(rank_of(&dmatrix![1.0, 1.0; 1.0, 1.0], cutoff()).unwrap(), 1);
    }

    #[test]
    fn expm_closed_forms() {
        assert_relative_eq!(
            expm(&DMatrix::zeros(3, 3)).unwrap(),
            DMatrix::identity(3, 3),
            epsilon = 1e-15
        );
        let diag = expm(&dmatrix![0.3, 0.0; 0.0, -1.2]).unwrap();
        assert_relative_eq!(diag[(0, 0)], 0.3_f64.exp(), epsilon = 1e-13);
        assert_relative_eq!(diag[(1, 1)], (-1.2_f64).exp(), epsilon = 1e-13);
        // Rotation generator: exp([[0, θ], [-θ, 0]]) is the rotation matrix.
        let theta = std::f64::consts::FRAC_PI_2;
        let rot = expm(&dmatrix![0.0, theta; -theta, 0.0]).unwrap();
        assert_relative_eq!(
            rot,
            dmatrix![0.0, 1.0; -1.0, 0.0],
            epsilon = 1e-12
        );
    }

    #[test]
    fn lyapunov_closed_forms() {
        let id = DMatrix::<f64>::identity(2, 2);
        assert_relative_eq!(lyapunov_solve(&id, &id).unwrap(), id, epsilon = 1e-12);
        // B + Bᵀ = 2I makes Σ = I for any rotation part.
        let b = dmatrix![1.0, 0.7; -0.7, 1.0];
        assert_relative_eq!(
            lyapunov_solve(&b, &DMatrix::identity(2, 2)).unwrap(),
            DMatrix::identity(2, 2),
            epsilon = 1e-10
        );
        assert!(matches!(
            lyapunov_solve(&dmatrix![-1.0, 0.0; 0.0, 1.0], &DMatrix::identity(2, 2)),
            Err(EprError::NoStationaryState)
        ));
    }

    #[test]
    fn van_loan_closed_forms() {
        // B = 0: the integrand is constant, S_ε = 2Dε.
        let d = dmatrix![0.8, 0.1; 0.1, 0.5];
        let s = van_loan_covariance(&DMatrix::zeros(2, 2), &d, 0.7).unwrap();
        assert_relative_eq!(s, &d * 1.4, epsilon = 1e-12);
        // Scalar: S_ε = σ²(1 − e^{-2bε})/(2b).
        let (b, sig2, eps) = (1.3, 2.0, 0.4);
        let s = van_loan_covariance(&dmatrix![b], &(dmatrix![sig2 / 2.0]), eps).unwrap();
        assert_relative_eq!(
            s[(0, 0)],
            sig2 * (1.0 - (-2.0 * b * eps).exp()) / (2.0 * b),
            epsilon = 1e-12
        );
        // Small-lag asymptotics: S_ε/ε → 2D.
        let b = dmatrix![1.0, 0.4; -0.4, 2.0];
        let tiny = 1e-7;
        let s = van_loan_covariance(&b, &d, tiny).unwrap();
        assert!((s / tiny - &d * 2.0).norm() < 1e-5);
        assert!(van_loan_covariance(&b, &d, 0.0).is_err());
        assert!(van_loan_covariance(&b, &d, -0.1).is_err());
    }
}
