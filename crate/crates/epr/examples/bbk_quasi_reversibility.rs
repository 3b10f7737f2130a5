//! The BBK splitting keeps absolutely continuous kernels (unlike
//! Euler–Maruyama), and it is quasi time-reversible: its momentum-flip
//! corrected entropy production decays toward zero with the step size, while
//! the plain phase-space rate tracks the exact simulation and grows.
//!
//! ```text
//! cargo run --release --example bbk_quasi_reversibility
//! ```

use epr::estimate::{ep_binned_bootstrap, ep_binned_generalized_bootstrap, BinGrid, BootstrapOptions, EpMode};
use epr::exact::ep_eps;
use epr::integrate::{simulate_bbk, InitialState};
use epr::model::{langevin_as_linear, UnderdampedLangevin};
use nalgebra::{dvector, DMatrix, DVector};

fn main() -> epr::Result<()> {
    let k = DMatrix::identity(1, 1);
    let l = UnderdampedLangevin::quadratic(k.clone(), dvector![1.0], 1.0, 1.0)?;
    let linear = langevin_as_linear(&l, &k)?;
    let grid = BinGrid::symmetric(4.0, 30, 2)?;
    let flip = |x: &DVector<f64>| dvector![x[0], -x[1]];
    let opts = BootstrapOptions {
        replicates: 0,
        seed: 1,
    };
    println!(
        "{:>6} {:>14} {:>14} {:>16}",
        "ε", "exact e_p(ε)", "BBK plain", "BBK flip-corr."
    );
    for eps in [0.4, 0.2, 0.1, 0.05] {
        let paths = simulate_bbk(&l, &InitialState::Stationary, eps, 100_000, 100, 77)?;
        let plain = ep_binned_bootstrap(&paths, &grid, EpMode::Digamma, &opts)?;
        let flipped =
            ep_binned_generalized_bootstrap(&paths, &flip, &grid, EpMode::Digamma, &opts)?;
        println!(
            "{eps:>6} {:>14.3} {:>14.3} {:>16.5}",
            ep_eps(&linear, eps)?,
            plain.point,
            flipped.point
        );
    }
    println!("(plain values chase the diverging exact rate up to the binned chain's resolution;");
    println!(" the flip-corrected rate decays like O(ε) down to the estimator floor ~1e-4)");
    Ok(())
}
