//! The finite-lag rate e_p(ε) of an exact simulation converges to the true
//! e_p as ε ↓ 0 when the irreversible drift stays in the range of the
//! volatility, and diverges when it does not.
//!
//! ```text
//! cargo run --release --example eps_convergence
//! ```

use epr::exact::{ep_closed_form, ep_eps};
use epr::model::LinearDiffusion;
use nalgebra::{dmatrix, DMatrix};

fn main() -> epr::Result<()> {
    // Elliptic rotational model: e_p = 2, recovered in the limit.
    let m = LinearDiffusion::from_parts(
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2),
        dmatrix![0.0, 1.0; -1.0, 0.0],
    )?;
    println!("elliptic model, e_p = {}", ep_closed_form(&m)?);
    for eps in [0.5, 0.2, 0.1, 0.05, 0.01, 0.001] {
        println!("  e_p({eps:<6}) = {:.6}", ep_eps(&m, eps)?);
    }

    // Degenerate noise on one axis only, with a two-dimensional solenoidal
    // flow: the forward and reversed kernels stay equivalent at every finite
    // lag but separate in the limit, so e_p(ε) blows up and the closed form
    // is +∞.
    let q = dmatrix![0.0, 1.0, 0.0; -1.0, 0.0, 0.0; 0.0, 0.0, 0.0];
    let d = dmatrix![0.5, 0.0, 0.0; 0.0, 0.0, 0.0; 0.0, 0.0, 0.0];
    let singular = LinearDiffusion::from_parts(DMatrix::identity(3, 3), d, q)?;
    println!(
        "rank-1 noise, rank-2 solenoidal flow: e_p = {}",
        ep_closed_form(&singular)?
    );
    for eps in [0.05, 0.02, 0.01, 0.005, 0.002, 0.001] {
        println!("  e_p({eps:<6}) = {:.4e}", ep_eps(&singular, eps)?);
    }

    // When σ = Q share their rank-2 column space the range condition holds
    // and the limit is finite even though the noise is degenerate.
    let q2 = dmatrix![0.0, 1.0, 0.0; -1.0, 0.0, 0.0; 0.0, 0.0, 0.0];
    let d2 = &q2 * q2.transpose() * 0.5;
    let planar = LinearDiffusion::from_parts(DMatrix::identity(3, 3), d2, q2)?;
    println!(
        "σ = Q of rank 2: range condition holds, e_p = {}",
        ep_closed_form(&planar)?
    );
    for eps in [0.1, 0.01, 0.001] {
        println!("  e_p({eps:<6}) = {:.6}", ep_eps(&planar, eps)?);
    }
    Ok(())
}
