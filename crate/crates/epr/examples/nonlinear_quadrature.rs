//! Monte-Carlo evaluation of e_p = ∫ b_irrᵀ D⁻ b_irr ρ dx for models with a
//! known density gradient, including the honest +∞ verdict when the
//! irreversible drift leaves the range of the volatility.
//!
//! ```text
//! cargo run --release --example nonlinear_quadrature
//! ```

use epr::exact::{ep_closed_form, ep_quadrature_nonlinear};
use epr::gaussian::GaussianDist;
use epr::linalg::RankCutoff;
use epr::model::{LinearDiffusion, UnderdampedLangevin};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};

fn main() -> epr::Result<()> {
    // Linear rotational model wrapped as a generic SDE: the quadrature
    // average reproduces the closed form 2θ².
    let theta = 1.0;
    let m = LinearDiffusion::from_parts(
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2),
        dmatrix![0.0, theta; -theta, 0.0],
    )?;
    let sde = m.as_nonlinear();
    let rho = GaussianDist::new(DVector::zeros(2), m.stationary_covariance().clone())?;
    let samples = rho.sample(200_000, 9, RankCutoff::default())?;
    let est = ep_quadrature_nonlinear(&sde, &samples)?;
    println!(
        "rotational model: quadrature {:.4} ± {:.4}, closed form {}",
        est.value,
        est.std_error,
        ep_closed_form(&m)?
    );

    // Underdamped Langevin: the drift moves positions without noise on them,
    // the range condition fails on essentially every sample, e_p = +∞.
    let l = UnderdampedLangevin::quadratic(DMatrix::identity(1, 1), dvector![1.0], 1.0, 1.0)?;
    let kinetic = l.as_nonlinear();
    let canonical = GaussianDist::new(DVector::zeros(2), l.canonical_covariance().unwrap())?;
    let samples = canonical.sample(10_000, 10, RankCutoff::default())?;
    let est = ep_quadrature_nonlinear(&kinetic, &samples)?;
    println!(
        "underdamped: value {}, violating fraction {:.3}",
        est.value, est.violating_fraction
    );
    Ok(())
}
