//! Model-free entropy production estimation from sampled trajectories.
//!
//! The state space is cut into a uniform grid, consecutive states are counted
//! as bin-to-bin transitions, and the rate is the plug-in functional
//!
//! `ê_p = (1/ε) Σ_{ij} p̂_{i→j} log( p̂_{i→j} / p̂_{j→i} )`
//!
//! with `p̂` the joint empirical pair frequencies. Strict mode reports `+∞`
//! as soon as some pair is observed one way only — mutual singularity is the
//! honest reading of a one-way transition; pseudocount mode smooths every
//! observed pair symmetrically instead. The generalised variant replaces the
//! mirrored pairs by the image of the reversed pairs under a state-space
//! involution (e.g. a momentum flip).
//!
//! The plug-in log ratios carry the usual positive KL bias of order
//! (occupied pairs)/(2·transitions), which dwarfs the signal in the sparse
//! regime; [`EpMode::Digamma`] replaces them with nearly unbiased
//! digamma-corrected ratios and is what the experiment drivers use.
//! Uncertainty comes from a whole-path bootstrap: paths are the independent
//! unit, so within-path correlation never crosses a resample boundary. Near
//! the reversible null the statistic is degenerate and the bootstrap spread
//! is conservative (it overstates the true seed-to-seed spread).

use std::collections::HashMap;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::exact::{ep_eps, simulate_exact};
use crate::integrate::{simulate_bbk, simulate_em, InitialState, SamplePaths, Scheme};
use crate::model::{langevin_as_linear, Model};
use crate::{EprError, Result};

/// Hard cap on the total number of bins a grid may declare.
pub const MAX_TOTAL_BINS: u64 = 1_000_000;

/// A state-space involution used by the generalised estimator.
pub type Involution<'a> = &'a dyn Fn(&DVector<f64>) -> DVector<f64>;

/// A uniform rectangular grid over `[lo, hi)` per axis.
#[derive(Debug, Clone)]
pub struct BinGrid {
    lo: DVector<f64>,
    hi: DVector<f64>,
    bins_per_axis: Vec<usize>,
    width: Vec<f64>,
    total: u64,
}

impl BinGrid {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>, bins_per_axis: Vec<usize>) -> Result<Self> {
        let dim = lo.len();
        if hi.len() != dim || bins_per_axis.len() != dim {
            return Err(EprError::DimensionMismatch(
                "grid bounds and bin counts must share the state dimension".into(),
            ));
        }
        if dim == 0 {
            return Err(EprError::InvalidArgument("empty grid".into()));
        }
        let mut total = 1u64;
        for i in 0..dim {
            if !lo[i].is_finite() || !hi[i].is_finite() || lo[i] >= hi[i] {
                return Err(EprError::InvalidArgument(format!(
                    "grid needs lo < hi on axis {i}"
                )));
            }
            if bins_per_axis[i] == 0 {
                return Err(EprError::InvalidArgument(format!(
                    "axis {i} has zero bins"
                )));
            }
            total = total.saturating_mul(bins_per_axis[i] as u64);
        }
        if total > MAX_TOTAL_BINS {
            return Err(EprError::InvalidArgument(format!(
                "grid declares {total} bins, cap is {MAX_TOTAL_BINS}"
            )));
        }
        let width = (0..dim)
            .map(|i| (hi[i] - lo[i]) / bins_per_axis[i] as f64)
            .collect();
        Ok(BinGrid {
            lo,
            hi,
            bins_per_axis,
            width,
            total,
        })
    }

    /// Cube `[-extent, extent]^dim` with the same bin count on every axis.
    pub fn symmetric(extent: f64, bins: usize, dim: usize) -> Result<Self> {
        BinGrid::new(
            DVector::from_element(dim, -extent),
            DVector::from_element(dim, extent),
            vec![bins; dim],
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn total_bins(&self) -> u64 {
        self.total
    }

    /// Flat bin index of a state, or `None` when it falls outside the grid.
    /// The closed upper boundary belongs to the last bin.
    pub fn bin_of(&self, state: &[f64]) -> Option<u32> {
        let mut idx = 0u64;
        for (i, &x) in state.iter().enumerate().take(self.dim()) {
            if !x.is_finite() || x < self.lo[i] || x > self.hi[i] {
                return None;
            }
            let mut k = ((x - self.lo[i]) / self.width[i]) as u64;
            if k >= self.bins_per_axis[i] as u64 {
                k = self.bins_per_axis[i] as u64 - 1;
            }
            idx = idx * self.bins_per_axis[i] as u64 + k;
        }
        Some(idx as u32)
    }
}

/// Transition counts of a binned trajectory batch at fixed lag.
#[derive(Debug, Clone)]
pub struct EmpiricalChain {
    /// Lag between counted states (the batch time step).
    pub eps: f64,
    /// Sorted `((from, to), count)` pairs.
    pub counts: Vec<((u32, u32), u64)>,
    /// States that fell outside the grid.
    pub n_dropped: u64,
    /// Transitions kept (both endpoints inside the grid).
    pub n_transitions: u64,
    /// Distinct bins visited.
    pub occupied_bins: usize,
}

/// Count consecutive-state bin pairs across all paths. Out-of-grid states are
/// dropped (never clipped) and tallied in `n_dropped`; a transition is kept
/// only when both endpoints land inside the grid.
pub fn bin_transitions(paths: &SamplePaths, grid: &BinGrid) -> Result<EmpiricalChain> {
    if paths.dim() != grid.dim() {
        return Err(EprError::DimensionMismatch(format!(
            "paths have dimension {}, grid has {}",
            paths.dim(),
            grid.dim()
        )));
    }
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut occupied = vec![false; grid.total_bins() as usize];
    let mut n_dropped = 0u64;
    let mut n_transitions = 0u64;
    for p in 0..paths.n_paths() {
        let mut prev: Option<u32> = None;
        for s in 0..=paths.n_steps() {
            let bin = grid.bin_of(paths.state(p, s));
            match bin {
                Some(b) => occupied[b as usize] = true,
                None => n_dropped += 1,
            }
            if s > 0 {
                if let (Some(a), Some(b)) = (prev, bin) {
                    *counts.entry((a, b)).or_insert(0) += 1;
                    n_transitions += 1;
                }
            }
            prev = bin;
        }
    }
    let mut counts: Vec<_> = counts.into_iter().collect();
    counts.sort_unstable_by_key(|(k, _)| *k);
    Ok(EmpiricalChain {
        eps: paths.eps(),
        counts,
        n_dropped,
        n_transitions,
        occupied_bins: occupied.iter().filter(|b| **b).count(),
    })
}

/// How the per-pair log-ratios are estimated, and with them how one-way
/// pairs are handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpMode {
    /// Plug-in log ratios; any pair observed one way only makes the estimate
    /// `+∞`.
    Strict,
    /// Plug-in log ratios after adding α to both directions of every
    /// observed pair and renormalising.
    Pseudocount(f64),
    /// Plug-in log ratios with only the missing direction clamped: a pair
    /// observed forward but never backward contributes `log(a/α)` instead of
    /// `+∞`; counts that were observed enter exactly. Minimal distortion at
    /// large sample sizes, where it converges to the strict plug-in.
    Clamped(f64),
    /// Small-count corrected log ratios: each `log(p̂/q̂)` is estimated by
    /// `ψ(a) − ψ(b+1)` with `a, b` the pair counts and `ψ` the digamma
    /// function. For Poisson counts `ψ(a+1)` estimates `log λ` with
    /// exponentially small bias and the weighted combination
    /// `E[a·(ψ(a) − ψ(b+1))] = λ_a(log λ_a − log λ_b)` holds up to
    /// `O(e^{-λ})`, so the estimator is nearly unbiased and exactly
    /// median-centred at the reversible null; `b = 0` is finite via
    /// `ψ(1) = −γ`, no smoothing needed.
    Digamma,
}

impl EpMode {
    /// Pseudocount mode at the default α = 0.5.
    pub fn pseudocount_default() -> Self {
        EpMode::Pseudocount(0.5)
    }

    fn alpha(&self) -> f64 {
        match self {
            EpMode::Pseudocount(a) => *a,
            _ => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            EpMode::Pseudocount(a) | EpMode::Clamped(a) if !a.is_finite() || *a <= 0.0 => {
                    return Err(EprError::InvalidArgument(format!(
                        "pseudocount must be positive and finite, got {a}"
                    )));
                }
            _ => {}
        }
        Ok(())
    }
}

/// Digamma of a positive integer, `ψ(n) = −γ + Σ_{k<n} 1/k`, by exact
/// harmonic sum for small `n` and the asymptotic expansion beyond.
fn digamma_int(n: u64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    debug_assert!(n >= 1);
    if n <= 64 {
        let mut h = 0.0;
        for k in 1..n {
            h += 1.0 / k as f64;
        }
        h - EULER_GAMMA
    } else {
        let x = n as f64;
        let x2 = x * x;
        x.ln() - 0.5 / x - 1.0 / (12.0 * x2) + 1.0 / (120.0 * x2 * x2)
    }
}

/// A binned entropy production estimate with its diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct EpEstimate {
    /// Estimated rate (1/time); `+∞` in strict mode with one-way pairs.
    pub value: f64,
    pub is_infinite: bool,
    /// Pairs observed in one direction only (from raw counts, any mode).
    pub one_way_pairs: usize,
    pub occupied_bins: usize,
    pub n_transitions: u64,
    /// α actually applied (0 in strict mode).
    pub pseudocount_used: f64,
}

// Internal pair-count representation shared by the plug-in estimators and
// the bootstrap: a global cell table plus per-path sparse counts for the
// forward pairs and their comparison pairs (mirror or involution image).
struct PairData {
    n_cells: usize,
    p_paths: Vec<Vec<(u32, u32)>>,
    q_paths: Vec<Vec<(u32, u32)>>,
    occupied_bins: usize,
    n_dropped: u64,
    eps: f64,
}

impl PairData {
    fn pooled(&self) -> (Vec<f64>, Vec<f64>) {
        let mut p = vec![0.0; self.n_cells];
        let mut q = vec![0.0; self.n_cells];
        for path in &self.p_paths {
            for (c, n) in path {
                p[*c as usize] += *n as f64;
            }
        }
        for path in &self.q_paths {
            for (c, n) in path {
                q[*c as usize] += *n as f64;
            }
        }
        (p, q)
    }
}

fn estimate_from_arrays(p: &[f64], q: &[f64], eps: f64, mode: EpMode) -> (f64, usize) {
    let n_p: f64 = p.iter().sum();
    let n_q: f64 = q.iter().sum();
    let mut one_way = 0usize;
    let mut support = 0usize;
    for c in 0..p.len() {
        if p[c] > 0.0 && q[c] == 0.0 {
            one_way += 1;
        }
        if p[c] > 0.0 || q[c] > 0.0 {
            support += 1;
        }
    }
    let value = match mode {
        EpMode::Strict => {
            if one_way > 0 {
                f64::INFINITY
            } else {
                let mut sum = 0.0;
                for c in 0..p.len() {
                    if p[c] > 0.0 {
                        let pf = p[c] / n_p;
                        let qf = q[c] / n_q;
                        sum += pf * (pf / qf).ln();
                    }
                }
                sum / eps
            }
        }
        EpMode::Pseudocount(alpha) => {
            let denom_p = n_p + alpha * support as f64;
            let denom_q = n_q + alpha * support as f64;
            let mut sum = 0.0;
            for c in 0..p.len() {
                if p[c] > 0.0 || q[c] > 0.0 {
                    let pf = (p[c] + alpha) / denom_p;
                    let qf = (q[c] + alpha) / denom_q;
                    sum += pf * (pf / qf).ln();
                }
            }
            sum / eps
        }
        EpMode::Clamped(alpha) => {
            let mut sum = 0.0;
            for c in 0..p.len() {
                if p[c] > 0.0 {
                    let pf = p[c] / n_p;
                    let qf = q[c].max(alpha) / n_q;
                    sum += pf * (pf / qf).ln();
                }
            }
            sum / eps
        }
        EpMode::Digamma => {
            // Different totals on the two sides shift every log ratio by
            // log(n_p/n_q); counts estimate rates, frequencies need the
            // correction.
            let total_shift = (n_p / n_q).ln();
            let mut sum = 0.0;
            for c in 0..p.len() {
                if p[c] > 0.0 {
                    let a = p[c] as u64;
                    let b = q[c] as u64;
                    sum += p[c] / n_p * (digamma_int(a) - digamma_int(b + 1) - total_shift);
                }
            }
            sum / eps
        }
    };
    (value, one_way)
}

// Builds the pair representation. With an involution θ the comparison pairs
// are (θ(x_{k+1}), θ(x_k)); without one they are the mirrored forward pairs.
fn build_pair_data(
    paths: &SamplePaths,
    grid: &BinGrid,
    involution: Option<Involution<'_>>,
) -> Result<PairData> {
    if paths.dim() != grid.dim() {
        return Err(EprError::DimensionMismatch(format!(
            "paths have dimension {}, grid has {}",
            paths.dim(),
            grid.dim()
        )));
    }
    if let Some(theta) = involution {
        // θ∘θ must be the identity on a probe set drawn from the data.
        let probes = paths.n_paths().min(8);
        for p in 0..probes {
            for s in (0..=paths.n_steps()).step_by((paths.n_steps() / 4).max(1)) {
                let x = DVector::from_column_slice(paths.state(p, s));
                let twice = theta(&theta(&x));
                if (twice - &x).norm() > 1e-9 * (1.0 + x.norm()) {
                    return Err(EprError::NotInvolution);
                }
            }
        }
    }
    let mut cell_ids: HashMap<(u32, u32), u32> = HashMap::new();
    let mut id_of = |key: (u32, u32), next: &mut u32| -> u32 {
        *cell_ids.entry(key).or_insert_with(|| {
            let id = *next;
            *next += 1;
            id
        })
    };
    let mut next_id = 0u32;
    let mut occupied = vec![false; grid.total_bins() as usize];
    let mut n_dropped = 0u64;
    let mut p_paths = Vec::with_capacity(paths.n_paths());
    let mut q_paths = Vec::with_capacity(paths.n_paths());
    for p in 0..paths.n_paths() {
        let mut p_count: HashMap<(u32, u32), u32> = HashMap::new();
        let mut q_count: HashMap<(u32, u32), u32> = HashMap::new();
        let mut prev_fwd: Option<u32> = None;
        let mut prev_inv: Option<u32> = None;
        for s in 0..=paths.n_steps() {
            let state = paths.state(p, s);
            let fwd = grid.bin_of(state);
            match fwd {
                Some(b) => occupied[b as usize] = true,
                None => n_dropped += 1,
            }
            let inv = match involution {
                Some(theta) => {
                    let mapped = theta(&DVector::from_column_slice(state));
                    grid.bin_of(mapped.as_slice())
                }
                None => fwd,
            };
            if s > 0 {
                if let (Some(a), Some(b)) = (prev_fwd, fwd) {
                    *p_count.entry((a, b)).or_insert(0) += 1;
                }
                // Comparison pair: (θ(x_{s}), θ(x_{s-1})) — the reversed
                // transition pushed through the involution; with θ = id this
                // is exactly the mirrored pair.
                if let (Some(a), Some(b)) = (inv, prev_inv) {
                    *q_count.entry((a, b)).or_insert(0) += 1;
                }
            }
            prev_fwd = fwd;
            prev_inv = inv;
        }
        let mut pv: Vec<((u32, u32), u32)> = p_count.into_iter().collect();
        let mut qv: Vec<((u32, u32), u32)> = q_count.into_iter().collect();
        pv.sort_unstable_by_key(|(k, _)| *k);
        qv.sort_unstable_by_key(|(k, _)| *k);
        p_paths.push(
            pv.into_iter()
                .map(|(k, n)| (id_of(k, &mut next_id), n))
                .collect::<Vec<_>>(),
        );
        q_paths.push(
            qv.into_iter()
                .map(|(k, n)| (id_of(k, &mut next_id), n))
                .collect::<Vec<_>>(),
        );
    }
    Ok(PairData {
        n_cells: next_id as usize,
        p_paths,
        q_paths,
        occupied_bins: occupied.iter().filter(|b| **b).count(),
        n_dropped,
        eps: paths.eps(),
    })
}

fn estimate_from_pair_data(data: &PairData, mode: EpMode) -> Result<EpEstimate> {
    mode.validate()?;
    let (p, q) = data.pooled();
    let n_transitions = p.iter().sum::<f64>() as u64;
    if n_transitions == 0 {
        return Err(EprError::EmptyChain);
    }
    let (value, one_way) = estimate_from_arrays(&p, &q, data.eps, mode);
    let value = if value.is_infinite() { value } else { value.max(0.0) };
    Ok(EpEstimate {
        value,
        is_infinite: value.is_infinite(),
        one_way_pairs: one_way,
        occupied_bins: data.occupied_bins,
        n_transitions,
        pseudocount_used: mode.alpha(),
    })
}

/// Plug-in estimate from a pre-binned chain:
/// `(1/ε) Σ p̂_{i→j} log(p̂_{i→j}/p̂_{j→i})` over the joint pair frequencies.
pub fn ep_binned(chain: &EmpiricalChain, mode: EpMode) -> Result<EpEstimate> {
    mode.validate()?;
    if chain.counts.is_empty() {
        return Err(EprError::EmptyChain);
    }
    // Cell table: observed pairs and their mirrors.
    let mut ids: HashMap<(u32, u32), u32> = HashMap::new();
    let mut next = 0u32;
    for ((a, b), _) in &chain.counts {
        for key in [(*a, *b), (*b, *a)] {
            ids.entry(key).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            });
        }
    }
    let mut p = vec![0.0; next as usize];
    let mut q = vec![0.0; next as usize];
    for ((a, b), n) in &chain.counts {
        p[ids[&(*a, *b)] as usize] += *n as f64;
        q[ids[&(*b, *a)] as usize] += *n as f64;
    }
    let (value, one_way) = estimate_from_arrays(&p, &q, chain.eps, mode);
    let value = if value.is_infinite() { value } else { value.max(0.0) };
    Ok(EpEstimate {
        value,
        is_infinite: value.is_infinite(),
        one_way_pairs: one_way,
        occupied_bins: chain.occupied_bins,
        n_transitions: chain.n_transitions,
        pseudocount_used: mode.alpha(),
    })
}

/// Generalised binned estimate: the reversed chain is pushed through the
/// involution `θ` before comparison, i.e. forward pairs `(x_k, x_{k+1})` are
/// tested against `(θ(x_{k+1}), θ(x_k))`. With `θ = id` this is exactly
/// [`ep_binned`] on the same data.
pub fn ep_binned_generalized(
    paths: &SamplePaths,
    involution: Involution<'_>,
    grid: &BinGrid,
    mode: EpMode,
) -> Result<EpEstimate> {
    let data = build_pair_data(paths, grid, Some(involution))?;
    estimate_from_pair_data(&data, mode)
}

/// Bootstrap settings: whole paths are resampled with replacement.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            replicates: 200,
            seed: 0x5eed,
        }
    }
}

/// A binned estimate with bootstrap uncertainty.
#[derive(Debug, Clone, Copy)]
pub struct EpInterval {
    /// The point estimate (same as `raw.value`).
    pub point: f64,
    /// The full-data estimate and its diagnostics.
    pub raw: EpEstimate,
    /// Standard deviation of the bootstrap replicates.
    pub std_error: f64,
    /// Percentile bootstrap 95% interval, clamped at 0.
    pub lo95: f64,
    pub hi95: f64,
    pub replicates: usize,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn bootstrap_interval(data: &PairData, mode: EpMode, opts: &BootstrapOptions) -> Result<EpInterval> {
    let raw = estimate_from_pair_data(data, mode)?;
    if raw.value.is_infinite() {
        return Ok(EpInterval {
            point: f64::INFINITY,
            raw,
            std_error: f64::INFINITY,
            lo95: f64::INFINITY,
            hi95: f64::INFINITY,
            replicates: 0,
        });
    }
    let n_paths = data.p_paths.len();
    if opts.replicates == 0 || n_paths < 2 {
        return Ok(EpInterval {
            point: raw.value,
            raw,
            std_error: f64::NAN,
            lo95: f64::NAN,
            hi95: f64::NAN,
            replicates: 0,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let mut p = vec![0.0; data.n_cells];
    let mut q = vec![0.0; data.n_cells];
    let mut values = Vec::with_capacity(opts.replicates);
    for _ in 0..opts.replicates {
        p.iter_mut().for_each(|v| *v = 0.0);
        q.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..n_paths {
            let k = rng.random_range(0..n_paths);
            for (c, n) in &data.p_paths[k] {
                p[*c as usize] += *n as f64;
            }
            for (c, n) in &data.q_paths[k] {
                q[*c as usize] += *n as f64;
            }
        }
        let (v, _) = estimate_from_arrays(&p, &q, data.eps, mode);
        values.push(v);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (values.len() - 1).max(1) as f64;
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo95 = percentile(&sorted, 0.025).max(0.0);
    let hi95 = percentile(&sorted, 0.975).max(0.0);
    Ok(EpInterval {
        point: raw.value,
        raw,
        std_error: var.sqrt(),
        lo95,
        hi95: hi95.max(lo95),
        replicates: opts.replicates,
    })
}

/// Binned estimate with whole-path bootstrap uncertainty and bias-corrected
/// point value.
pub fn ep_binned_bootstrap(
    paths: &SamplePaths,
    grid: &BinGrid,
    mode: EpMode,
    opts: &BootstrapOptions,
) -> Result<EpInterval> {
    let data = build_pair_data(paths, grid, None)?;
    bootstrap_interval(&data, mode, opts)
}

/// Generalised (involution-corrected) estimate with bootstrap uncertainty.
pub fn ep_binned_generalized_bootstrap(
    paths: &SamplePaths,
    involution: Involution<'_>,
    grid: &BinGrid,
    mode: EpMode,
    opts: &BootstrapOptions,
) -> Result<EpInterval> {
    let data = build_pair_data(paths, grid, Some(involution))?;
    bootstrap_interval(&data, mode, opts)
}

/// Options for an ε-sweep.
#[derive(Debug, Clone)]
pub struct CurveOptions {
    pub n_paths: usize,
    pub n_steps: usize,
    pub mode: EpMode,
    pub bootstrap_replicates: usize,
    pub seed: u64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            n_paths: 100,
            n_steps: 1000,
            mode: EpMode::Clamped(0.5),
            bootstrap_replicates: 200,
            seed: 42,
        }
    }
}

/// One row of an ε-sweep.
#[derive(Debug, Clone)]
pub struct EpCurveRow {
    pub eps: f64,
    pub interval: EpInterval,
    /// `e_p(ε)` from the exact kernel formula, when the model is linear (or
    /// linearisable, as for quadratic-potential Langevin dynamics).
    pub analytic: Option<f64>,
    pub n_dropped: u64,
}

/// Simulates the model at stationarity for each lag in `eps_list` and returns
/// the binned estimate next to the analytic `e_p(ε)` where one exists.
pub fn ep_curve(
    model: &Model,
    scheme: Scheme,
    eps_list: &[f64],
    grid: &BinGrid,
    opts: &CurveOptions,
) -> Result<Vec<EpCurveRow>> {
    let linear_view = match model {
        Model::Linear(m) => Some(m.clone()),
        Model::Langevin(l) => l
            .quadratic_stiffness()
            .cloned()
            .map(|k| langevin_as_linear(l, &k))
            .transpose()?,
        Model::Nonlinear(_) => None,
    };
    let mut rows = Vec::with_capacity(eps_list.len());
    for (i, &eps) in eps_list.iter().enumerate() {
        let sim_seed = opts
            .seed
            .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let paths = match scheme {
            Scheme::Exact => {
                let m = linear_view.as_ref().ok_or(EprError::IncompatibleScheme(
                    "a linear (or quadratic-potential Langevin)",
                ))?;
                simulate_exact(m, &InitialState::Stationary, eps, opts.n_steps, opts.n_paths, sim_seed)?
            }
            Scheme::EulerMaruyama => simulate_em(
                model,
                &InitialState::Stationary,
                eps,
                opts.n_steps,
                opts.n_paths,
                sim_seed,
            )?,
            Scheme::Bbk => match model {
                Model::Langevin(l) => simulate_bbk(
                    l,
                    &InitialState::Stationary,
                    eps,
                    opts.n_steps,
                    opts.n_paths,
                    sim_seed,
                )?,
                _ => return Err(EprError::IncompatibleScheme("a Langevin")),
            },
        };
        let data = build_pair_data(&paths, grid, None)?;
        let interval = bootstrap_interval(
            &data,
            opts.mode,
            &BootstrapOptions {
                replicates: opts.bootstrap_replicates,
                seed: sim_seed ^ 0xB007_5EED,
            },
        )?;
        let analytic = match &linear_view {
            Some(m) => Some(ep_eps(m, eps)?),
            None => None,
        };
        rows.push(EpCurveRow {
            eps,
            interval,
            analytic,
            n_dropped: data.n_dropped,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearDiffusion;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector, DMatrix};

    fn theta_model(theta: f64) -> LinearDiffusion {
        LinearDiffusion::from_parts(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            dmatrix![0.0, theta; -theta, 0.0],
        )
        .unwrap()
    }

    fn chain_from_counts(counts: Vec<((u32, u32), u64)>, eps: f64) -> EmpiricalChain {
        let n: u64 = counts.iter().map(|(_, c)| c).sum();
        let mut bins: Vec<u32> = counts.iter().flat_map(|((a, b), _)| [*a, *b]).collect();
        bins.sort_unstable();
        bins.dedup();
        EmpiricalChain {
            eps,
            counts,
            n_dropped: 0,
            n_transitions: n,
            occupied_bins: bins.len(),
        }
    }

    #[test]
    fn grid_binning_basics() {
        let grid = BinGrid::symmetric(4.0, 4, 2).unwrap();
        assert_eq!(grid.total_bins(), 16);
        assert_eq!(grid.bin_of(&[-4.0, -4.0]), Some(0));
        assert_eq!(grid.bin_of(&[4.0, 4.0]), Some(15));
        assert_eq!(grid.bin_of(&[4.1, 0.0]), None);
        let grid = BinGrid::new(dvector![0.0], dvector![1.0], vec![10]).unwrap();
        assert_eq!(grid.bin_of(&[0.05]), Some(0));
        assert_eq!(grid.bin_of(&[0.95]), Some(9));
    }

    #[test]
    fn grid_rejects_oversized_and_inverted() {
        assert!(BinGrid::symmetric(1.0, 1001, 2).is_err());
        assert!(BinGrid::new(dvector![1.0], dvector![0.0], vec![3]).is_err());
    }

    #[test]
    fn two_state_asymmetric_counts() {
        // counts(1→2) = 75, counts(2→1) = 25 at ε = 1:
        // 0.75·log 3 + 0.25·log(1/3) = 0.5·log 3.
        let chain = chain_from_counts(vec![((1, 2), 75), ((2, 1), 25)], 1.0);
        let est = ep_binned(&chain, EpMode::Strict).unwrap();
        assert_relative_eq!(est.value, 0.5 * 3.0_f64.ln(), epsilon = 1e-12);
        assert_eq!(est.one_way_pairs, 0);
        assert!(!est.is_infinite);
    }

    #[test]
    fn symmetric_counts_give_zero() {
        let chain = chain_from_counts(
            vec![((0, 1), 40), ((1, 0), 40), ((1, 2), 7), ((2, 1), 7), ((2, 2), 99)],
            0.5,
        );
        let est = ep_binned(&chain, EpMode::Strict).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn one_way_pair_is_infinite_in_strict_mode() {
        let chain = chain_from_counts(vec![((1, 2), 10)], 1.0);
        let est = ep_binned(&chain, EpMode::Strict).unwrap();
        assert!(est.is_infinite);
        assert_eq!(est.one_way_pairs, 1);
        // Pseudocount mode keeps it finite and reports the α used.
        let est = ep_binned(&chain, EpMode::pseudocount_default()).unwrap();
        assert!(est.value.is_finite());
        assert_eq!(est.pseudocount_used, 0.5);
        assert_eq!(est.one_way_pairs, 1);
    }

    #[test]
    fn estimate_is_invariant_under_path_reversal() {
        let m = Model::Linear(theta_model(1.0));
        let paths = simulate_em(&m, &InitialState::Stationary, 0.05, 400, 20, 3).unwrap();
        let grid = BinGrid::symmetric(4.0, 12, 2).unwrap();
        let fwd = ep_binned(&bin_transitions(&paths, &grid).unwrap(), EpMode::pseudocount_default())
            .unwrap();
        let rev = ep_binned(
            &bin_transitions(&paths.reversed(), &grid).unwrap(),
            EpMode::pseudocount_default(),
        )
        .unwrap();
        assert_relative_eq!(fwd.value, rev.value, epsilon = 1e-12);
    }

    #[test]
    fn binning_drops_tail_samples_quietly() {
        let m = theta_model(1.0);
        let paths = simulate_exact(&m, &InitialState::Stationary, 0.05, 1000, 100, 9).unwrap();
        let grid = BinGrid::symmetric(4.0, 30, 2).unwrap();
        let chain = bin_transitions(&paths, &grid).unwrap();
        let total_states = (paths.n_paths() * (paths.n_steps() + 1)) as f64;
        assert!(
            (chain.n_dropped as f64) < 0.01 * total_states,
            "dropped {} of {}",
            chain.n_dropped,
            total_states
        );
    }

    #[test]
    fn constant_and_alternating_paths() {
        // A path glued to one bin yields a single diagonal cell.
        let chain = chain_from_counts(vec![((5, 5), 100)], 1.0);
        let est = ep_binned(&chain, EpMode::Strict).unwrap();
        assert_eq!(est.value, 0.0);
        // Deterministic alternation is perfectly symmetric.
        let chain = chain_from_counts(vec![((0, 1), 50), ((1, 0), 50)], 1.0);
        assert_eq!(ep_binned(&chain, EpMode::Strict).unwrap().value, 0.0);
    }

    #[test]
    fn identity_involution_reduces_to_plain_estimator() {
        let m = Model::Linear(theta_model(1.0));
        let paths = simulate_em(&m, &InitialState::Stationary, 0.05, 500, 16, 17).unwrap();
        let grid = BinGrid::symmetric(4.0, 10, 2).unwrap();
        let plain = ep_binned(&bin_transitions(&paths, &grid).unwrap(), EpMode::pseudocount_default())
            .unwrap();
        let gen = ep_binned_generalized(
            &paths,
            &|x: &DVector<f64>| x.clone(),
            &grid,
            EpMode::pseudocount_default(),
        )
        .unwrap();
        assert_relative_eq!(plain.value, gen.value, epsilon = 1e-12);
        assert_eq!(plain.one_way_pairs, gen.one_way_pairs);
    }

    #[test]
    fn non_involutive_map_is_rejected() {
        let m = Model::Linear(theta_model(0.5));
        let paths = simulate_em(&m, &InitialState::Stationary, 0.1, 50, 4, 2).unwrap();
        let grid = BinGrid::symmetric(4.0, 8, 2).unwrap();
        let err = ep_binned_generalized(
            &paths,
            &|x: &DVector<f64>| x * 0.5,
            &grid,
            EpMode::Strict,
        )
        .unwrap_err();
        assert!(matches!(err, EprError::NotInvolution));
    }

    #[test]
    fn estimates_track_ep_eps_and_reversible_null() {
        // Exact θ-model paths: the clamped plug-in converges to e_p(ε) from
        // above as transitions accumulate; the reversible model is
        // statistically indistinguishable from zero under the digamma
        // estimator.
        let eps = 0.1;
        let m = theta_model(1.0);
        let grid = BinGrid::symmetric(4.0, 30, 2).unwrap();
        let paths = simulate_exact(&m, &InitialState::Stationary, eps, 20_000, 100, 31).unwrap();
        let est = ep_binned(&bin_transitions(&paths, &grid).unwrap(), EpMode::Clamped(0.5)).unwrap();
        let target = ep_eps(&m, eps).unwrap();
        assert!(
            (est.value - target).abs() < 0.12 * target,
            "estimate {} vs e_p(ε) {target}",
            est.value
        );

        let rev = theta_model(0.0);
        let paths = simulate_exact(&rev, &InitialState::Stationary, eps, 20_000, 100, 32).unwrap();
        let interval = ep_binned_bootstrap(
            &paths,
            &grid,
            EpMode::Digamma,
            &BootstrapOptions {
                replicates: 100,
                seed: 2,
            },
        )
        .unwrap();
        assert!(
            interval.point <= 3.0 * interval.std_error.max(1e-6),
            "reversible null: {} vs 3·SE {}",
            interval.point,
            3.0 * interval.std_error
        );
    }

    #[test]
    fn exact_underdamped_curve_increases_as_lag_shrinks() {
        // The exact simulation of a kinetic model gets more irreversible as
        // the lag shrinks (its phase-space e_p is infinite in the limit), so
        // the binned estimates rise monotonically across the sweep.
        let l = crate::model::UnderdampedLangevin::quadratic(
            DMatrix::identity(1, 1),
            dvector![1.0],
            1.0,
            1.0,
        )
        .unwrap();
        let grid = BinGrid::symmetric(4.0, 30, 2).unwrap();
        let rows = ep_curve(
            &Model::Langevin(l),
            Scheme::Exact,
            &[0.4, 0.2, 0.1],
            &grid,
            &CurveOptions {
                n_paths: 50,
                n_steps: 4000,
                mode: EpMode::Digamma,
                bootstrap_replicates: 0,
                seed: 99,
            },
        )
        .unwrap();
        assert!(rows[0].interval.point < rows[1].interval.point);
        assert!(rows[1].interval.point < rows[2].interval.point);
        // The analytic lag rates rise too.
        let analytic: Vec<f64> = rows.iter().map(|r| r.analytic.unwrap()).collect();
        assert!(analytic[0] < analytic[1] && analytic[1] < analytic[2]);
    }

    #[test]
    fn curve_rows_carry_analytics_for_linear_models() {
        let m = Model::Linear(theta_model(1.0));
        let grid = BinGrid::symmetric(4.0, 20, 2).unwrap();
        let rows = ep_curve(
            &m,
            Scheme::Exact,
            &[0.2, 0.1],
            &grid,
            &CurveOptions {
                n_paths: 40,
                n_steps: 400,
                mode: EpMode::pseudocount_default(),
                bootstrap_replicates: 50,
                seed: 7,
            },
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            let analytic = row.analytic.unwrap();
            assert!(analytic > 0.0 && analytic < 2.0);
            assert!(row.interval.point.is_finite());
        }
    }
}
