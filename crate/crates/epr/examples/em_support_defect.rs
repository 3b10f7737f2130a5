//! Why the Euler–Maruyama discretisation of a kinetic model has infinite
//! entropy production at every time step: its forward and backward one-step
//! kernels live on different affine subspaces of phase space, so the two
//! laws are mutually singular no matter how small ε is.
//!
//! ```text
//! cargo run --release --example em_support_defect
//! ```

use epr::integrate::em_kernel_supports;
use epr::model::{LinearDiffusion, Model, UnderdampedLangevin};
use nalgebra::{dmatrix, dvector, DMatrix};

fn main() -> epr::Result<()> {
    let l = UnderdampedLangevin::quadratic(DMatrix::identity(1, 1), dvector![1.0], 1.0, 1.0)?;
    let x = dvector![0.4, -1.1];
    println!("underdamped model, state (q, p) = ({}, {})", x[0], x[1]);
    for eps in [1.0, 0.1, 0.01] {
        let s = em_kernel_supports(&Model::Langevin(l.clone()), &x, eps)?;
        println!(
            "ε = {eps:<5} forward support: q pinned at {:.3} (dim {}), backward: q + εp = {:.3} (dim {}), disjoint = {}",
            s.forward.point[0],
            s.forward.dim(),
            x[0],
            s.backward.dim(),
            s.disjoint
        );
    }
    println!("(disjoint supports at every ε ⇒ the EM chain's e_p is +∞ for any time step)");

    // Elliptic noise has full-dimensional supports both ways: nothing is
    // singular and the EM chain's e_p is finite.
    let elliptic = LinearDiffusion::from_drift(
        dmatrix![1.0, 1.0; -1.0, 1.0],
        DMatrix::identity(2, 2) * 2.0_f64.sqrt(),
    )?;
    let s = em_kernel_supports(&Model::Linear(elliptic), &x, 0.1)?;
    println!(
        "elliptic model at the same state: forward dim {}, backward dim {}, disjoint = {}",
        s.forward.dim(),
        s.backward.dim(),
        s.disjoint
    );
    Ok(())
}
