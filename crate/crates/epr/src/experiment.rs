//! Experiment drivers behind the `epr` binary: each takes a validated config,
//! runs one experiment, and returns tables plus provenance-tagged scalars.
//! Results serialise to CSV tables and one metadata JSON per run, with `+∞`
//! rendered as the literal string `"inf"` everywhere. Outputs are written
//! atomically (temp file, then rename) and are byte-identical for identical
//! configs and seeds.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::config::ModelConfig;
use crate::estimate::{
    ep_binned_bootstrap, ep_binned_generalized_bootstrap, ep_curve, BinGrid,
    BootstrapOptions, CurveOptions, EpMode,
};
use crate::exact::{ep_closed_form, ep_eps, ep_quadrature_nonlinear, simulate_exact};
use crate::gaussian::GaussianDist;
use crate::integrate::{simulate_bbk, simulate_em, em_kernel_supports, InitialState, SamplePaths, Scheme};
use crate::model::{
    langevin_as_linear, momentum_flip_identity, momentum_flip_matrix, range_condition_fraction,
    Model,
};
use crate::{EprError, Result};

/// Where a reported scalar came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    FormulaEps,
    Binned,
}

/// A named scalar with provenance; `+∞` serialises as `"inf"`.
#[derive(Debug, Clone, Copy)]
pub struct Scalar {
    pub value: f64,
    pub provenance: Provenance,
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(2))?;
        if self.value.is_infinite() {
            map.serialize_entry("value", "inf")?;
        } else {
            map.serialize_entry("value", &self.value)?;
        }
        map.serialize_entry("provenance", &self.provenance)?;
        map.end()
    }
}

/// A CSV block: header plus preformatted rows.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub library_version: String,
    pub wall_time_ms: u128,
    pub extra: BTreeMap<String, String>,
}

/// The result of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub metadata: Metadata,
    pub scalars: BTreeMap<String, Scalar>,
    pub tables: Vec<Table>,
}

/// Full round-trip float formatting (shortest representation that parses
/// back to the same bits); `+∞` prints as `inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn config_hash(config: &ModelConfig) -> String {
    let canon = serde_json::to_string(config).unwrap_or_default();
    let digest = Sha256::digest(canon.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

struct RunClock {
    start: Instant,
    command: String,
    config_hash: String,
    seed: u64,
}

impl RunClock {
    fn new(command: &str, config: &ModelConfig) -> Self {
        RunClock {
            start: Instant::now(),
            command: command.to_string(),
            config_hash: config_hash(config),
            seed: config.seed(),
        }
    }

    fn finish(self, extra: BTreeMap<String, String>) -> Metadata {
        Metadata {
            command: self.command,
            config_hash: self.config_hash,
            seed: self.seed,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_ms: self.start.elapsed().as_millis(),
            extra,
        }
    }
}

fn matrix_table(name: &str, m: &DMatrix<f64>) -> Table {
    let header = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    let rows = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect())
        .collect();
    Table {
        name: name.to_string(),
        header,
        rows,
    }
}

/// Atomically writes `metadata.json` plus one `<table name>.csv` per table.
pub fn write_result(result: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for table in &result.tables {
        let path = out_dir.join(format!("{}.csv", table.name));
        atomic_write(&path, table.to_csv().as_bytes())?;
        written.push(path);
    }
    let meta_path = out_dir.join("metadata.json");
    #[derive(Serialize)]
    struct MetaFile<'a> {
        metadata: &'a Metadata,
        scalars: &'a BTreeMap<String, Scalar>,
        tables: Vec<String>,
    }
    let meta = MetaFile {
        metadata: &result.metadata,
        scalars: &result.scalars,
        tables: result.tables.iter().map(|t| format!("{}.csv", t.name)).collect(),
    };
    atomic_write(&meta_path, serde_json::to_string_pretty(&meta)?.as_bytes())?;
    written.push(meta_path);
    Ok(written)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Options shared by the estimator-driven commands.
#[derive(Debug, Clone)]
pub struct EstimatorOptions {
    pub bins: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub mode: EpMode,
    pub bootstrap_replicates: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            bins: 30,
            grid_lo: -4.0,
            grid_hi: 4.0,
            n_paths: 100,
            n_steps: 1000,
            mode: EpMode::Clamped(0.5),
            bootstrap_replicates: 200,
        }
    }
}

impl EstimatorOptions {
    fn grid(&self, dim: usize) -> Result<BinGrid> {
        BinGrid::new(
            DVector::from_element(dim, self.grid_lo),
            DVector::from_element(dim, self.grid_hi),
            vec![self.bins; dim],
        )
    }

    fn mode(&self) -> EpMode {
        self.mode
    }
}

/// How `cmd_ep` computes its number.
#[derive(Debug, Clone)]
pub enum EpMethod {
    ClosedForm,
    EpsFormula(f64),
    Binned { eps: f64, opts: EstimatorOptions },
}

fn require_linear(model: &Model) -> Result<crate::model::LinearDiffusion> {
    match model {
        Model::Linear(m) => Ok(m.clone()),
        Model::Langevin(l) => match l.quadratic_stiffness() {
            Some(k) => langevin_as_linear(l, &k.clone()),
            None => Err(EprError::IncompatibleScheme(
                "a linear (or quadratic-potential Langevin)",
            )),
        },
        Model::Nonlinear(_) => Err(EprError::IncompatibleScheme(
            "a linear (or quadratic-potential Langevin)",
        )),
    }
}

/// Helmholtz decomposition report: `D`, `Q`, `Π` tables for linear models, a
/// pointwise `b_rev`/`b_irr` table with divergence residuals for nonlinear
/// ones, plus a range-condition verdict.
pub fn cmd_decompose(config: &ModelConfig) -> Result<ExperimentResult> {
    let clock = RunClock::new("decompose", config);
    let model = config.build()?;
    let mut scalars = BTreeMap::new();
    let mut tables = Vec::new();
    let mut extra = BTreeMap::new();
    match &model {
        Model::Linear(m) => {
            tables.push(matrix_table("diffusion_d", m.diffusion()));
            tables.push(matrix_table("solenoidal_q", m.solenoidal()));
            tables.push(matrix_table("precision_pi", m.precision()));
            let holds = m.range_condition_holds()?;
            let reversible = m.solenoidal().norm() <= 1e-10 * m.drift_matrix().norm().max(1.0);
            extra.insert(
                "range_condition".into(),
                if holds { "holds".into() } else { "violated (e_p = +inf)".into() },
            );
            extra.insert(
                "verdict".into(),
                if reversible {
                    "reversible".into()
                } else if holds {
                    "irreversible, finite e_p".into()
                } else {
                    "irreversible, e_p = +inf".into()
                },
            );
            scalars.insert(
                "ep_closed_form".into(),
                Scalar {
                    value: ep_closed_form(m)?,
                    provenance: Provenance::ClosedForm,
                },
            );
        }
        Model::Langevin(l) => {
            let sde = l.as_nonlinear();
            let (table, max_residual, fraction) =
                pointwise_decomposition_table(&sde, config.seed())?;
            tables.push(table);
            scalars_insert_residual(&mut scalars, max_residual);
            extra.insert(
                "range_condition".into(),
                if fraction == 0.0 {
                    "holds".into()
                } else {
                    "violated (e_p = +inf)".into()
                },
            );
        }
        Model::Nonlinear(s) => {
            let (table, max_residual, fraction) = pointwise_decomposition_table(s, config.seed())?;
            tables.push(table);
            scalars_insert_residual(&mut scalars, max_residual);
            extra.insert(
                "range_condition".into(),
                if fraction == 0.0 {
                    "holds".into()
                } else {
                    "violated (e_p = +inf)".into()
                },
            );
        }
    }
    Ok(ExperimentResult {
        metadata: clock.finish(extra),
        scalars,
        tables,
    })
}

fn scalars_insert_residual(scalars: &mut BTreeMap<String, Scalar>, residual: f64) {
    scalars.insert(
        "max_divergence_residual".into(),
        Scalar {
            value: residual,
            provenance: Provenance::FormulaEps,
        },
    );
}

fn pointwise_decomposition_table(
    sde: &crate::model::NonlinearSDE,
    seed: u64,
) -> Result<(Table, f64, f64)> {
    let dim = sde.dim();
    let probe = GaussianDist::standard(dim);
    let points = probe.sample(100, seed, crate::linalg::RankCutoff::default())?;
    let max_residual = sde.divergence_check(&points, None)?;
    let fraction = range_condition_fraction(sde, &points, 1e-6)?;
    let mut header = Vec::new();
    for i in 0..dim {
        header.push(format!("x{i}"));
    }
    for i in 0..dim {
        header.push(format!("b_rev{i}"));
    }
    for i in 0..dim {
        header.push(format!("b_irr{i}"));
    }
    let mut rows = Vec::new();
    for x in &points {
        let (b_rev, b_irr) = sde.helmholtz_pointwise(x)?;
        let mut row = Vec::with_capacity(3 * dim);
        row.extend(x.iter().map(|v| fmt_f64(*v)));
        row.extend(b_rev.iter().map(|v| fmt_f64(*v)));
        row.extend(b_irr.iter().map(|v| fmt_f64(*v)));
        rows.push(row);
    }
    Ok((
        Table {
            name: "helmholtz_pointwise".into(),
            header,
            rows,
        },
        max_residual,
        fraction,
    ))
}

/// Simulate trajectories and return them as a CSV table
/// (`path,step,t,x0,...,x{d-1}`, one row per stored state).
pub fn cmd_simulate(
    config: &ModelConfig,
    scheme: Scheme,
    eps: f64,
    n_steps: usize,
    n_paths: usize,
) -> Result<ExperimentResult> {
    let clock = RunClock::new("simulate", config);
    let model = config.build()?;
    let seed = config.seed();
    let paths = run_scheme(&model, scheme, eps, n_steps, n_paths, seed)?;
    let mut header = vec!["path".to_string(), "step".to_string(), "t".to_string()];
    for i in 0..paths.dim() {
        header.push(format!("x{i}"));
    }
    let mut rows = Vec::with_capacity(n_paths * (n_steps + 1));
    for p in 0..paths.n_paths() {
        for (s, state) in paths.path_states(p).enumerate() {
            let mut row = Vec::with_capacity(3 + paths.dim());
            row.push(p.to_string());
            row.push(s.to_string());
            row.push(fmt_f64(s as f64 * eps));
            row.extend(state.iter().map(|v| fmt_f64(*v)));
            rows.push(row);
        }
    }
    let mut extra = BTreeMap::new();
    extra.insert("scheme".into(), scheme.to_string());
    extra.insert("eps".into(), fmt_f64(eps));
    Ok(ExperimentResult {
        metadata: clock.finish(extra),
        scalars: BTreeMap::new(),
        tables: vec![Table {
            name: "trajectories".into(),
            header,
            rows,
        }],
    })
}

fn run_scheme(
    model: &Model,
    scheme: Scheme,
    eps: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<SamplePaths> {
    match scheme {
        Scheme::Exact => {
            let m = require_linear(model)?;
            simulate_exact(&m, &InitialState::Stationary, eps, n_steps, n_paths, seed)
        }
        Scheme::EulerMaruyama => {
            simulate_em(model, &InitialState::Stationary, eps, n_steps, n_paths, seed)
        }
        Scheme::Bbk => match model {
            Model::Langevin(l) => {
                simulate_bbk(l, &InitialState::Stationary, eps, n_steps, n_paths, seed)
            }
            _ => Err(EprError::IncompatibleScheme("a Langevin")),
        },
    }
}

/// One e_p number by the requested method, with provenance.
pub fn cmd_ep(config: &ModelConfig, method: &EpMethod) -> Result<ExperimentResult> {
    let clock = RunClock::new("ep", config);
    let model = config.build()?;
    let mut scalars = BTreeMap::new();
    let mut extra = BTreeMap::new();
    match method {
        EpMethod::ClosedForm => {
            let m = require_linear(&model)?;
            scalars.insert(
                "ep".into(),
                Scalar {
                    value: ep_closed_form(&m)?,
                    provenance: Provenance::ClosedForm,
                },
            );
        }
        EpMethod::EpsFormula(eps) => {
            let m = require_linear(&model)?;
            scalars.insert(
                "ep".into(),
                Scalar {
                    value: ep_eps(&m, *eps)?,
                    provenance: Provenance::FormulaEps,
                },
            );
            extra.insert("eps".into(), fmt_f64(*eps));
        }
        EpMethod::Binned { eps, opts } => {
            let paths = run_scheme(
                &model,
                default_scheme_for(&model),
                *eps,
                opts.n_steps,
                opts.n_paths,
                config.seed(),
            )?;
            let grid = opts.grid(model.dim())?;
            let interval = ep_binned_bootstrap(
                &paths,
                &grid,
                opts.mode(),
                &BootstrapOptions {
                    replicates: opts.bootstrap_replicates,
                    seed: config.seed() ^ 0xB007_5EED,
                },
            )?;
            scalars.insert(
                "ep".into(),
                Scalar {
                    value: interval.point,
                    provenance: Provenance::Binned,
                },
            );
            scalars.insert(
                "ep_raw_plugin".into(),
                Scalar {
                    value: interval.raw.value,
                    provenance: Provenance::Binned,
                },
            );
            extra.insert("eps".into(), fmt_f64(*eps));
            extra.insert("lo95".into(), fmt_f64(interval.lo95));
            extra.insert("hi95".into(), fmt_f64(interval.hi95));
            extra.insert("one_way_pairs".into(), interval.raw.one_way_pairs.to_string());
            extra.insert("occupied_bins".into(), interval.raw.occupied_bins.to_string());
        }
    }
    Ok(ExperimentResult {
        metadata: clock.finish(extra),
        scalars,
        tables: Vec::new(),
    })
}

fn default_scheme_for(model: &Model) -> Scheme {
    match model {
        Model::Linear(_) => Scheme::Exact,
        Model::Langevin(l) if l.quadratic_stiffness().is_some() => Scheme::Exact,
        Model::Langevin(_) => Scheme::Bbk,
        Model::Nonlinear(_) => Scheme::EulerMaruyama,
    }
}

/// The ε-sweep behind the simulation figures: one CSV row per lag with the
/// binned estimate, its CI, and the analytic value where available.
pub fn cmd_ep_curve(
    config: &ModelConfig,
    scheme: Scheme,
    eps_list: &[f64],
    opts: &EstimatorOptions,
) -> Result<ExperimentResult> {
    let clock = RunClock::new("ep-curve", config);
    let model = config.build()?;
    if eps_list.is_empty() {
        return Err(EprError::InvalidArgument("empty ε list".into()));
    }
    let grid = opts.grid(model.dim())?;
    let rows = ep_curve(
        &model,
        scheme,
        eps_list,
        &grid,
        &CurveOptions {
            n_paths: opts.n_paths,
            n_steps: opts.n_steps,
            mode: opts.mode(),
            bootstrap_replicates: opts.bootstrap_replicates,
            seed: config.seed(),
        },
    )?;
    let header = vec![
        "eps".into(),
        "estimate".into(),
        "lo95".into(),
        "hi95".into(),
        "analytic_ep_eps".into(),
        "one_way_pairs".into(),
        "occupied_bins".into(),
        "n_dropped".into(),
    ];
    let table_rows = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.eps),
                fmt_f64(r.interval.point),
                fmt_f64(r.interval.lo95),
                fmt_f64(r.interval.hi95),
                r.analytic.map(fmt_f64).unwrap_or_default(),
                r.interval.raw.one_way_pairs.to_string(),
                r.interval.raw.occupied_bins.to_string(),
                r.n_dropped.to_string(),
            ]
        })
        .collect();
    let mut extra = BTreeMap::new();
    extra.insert("scheme".into(), scheme.to_string());
    Ok(ExperimentResult {
        metadata: clock.finish(extra),
        scalars: BTreeMap::new(),
        tables: vec![Table {
            name: "ep_curve".into(),
            header,
            rows: table_rows,
        }],
    })
}

/// Range-condition check: fraction of probe points with
/// `b_irr(x) ∉ im σ(x)`, plus the point-free verdict for linear models.
pub fn cmd_check_range(config: &ModelConfig, n_points: usize, tol: f64) -> Result<ExperimentResult> {
    let clock = RunClock::new("check-range", config);
    let model = config.build()?;
    let mut scalars = BTreeMap::new();
    let mut extra = BTreeMap::new();
    let fraction = match &model {
        Model::Linear(m) => {
            let holds = m.range_condition_holds()?;
            if holds { 0.0 } else { 1.0 }
        }
        Model::Langevin(l) => {
            let sde = l.as_nonlinear();
            let points =
                GaussianDist::standard(sde.dim()).sample(n_points, config.seed(), m_cutoff(config)?)?;
            range_condition_fraction(&sde, &points, tol)?
        }
        Model::Nonlinear(s) => {
            let points =
                GaussianDist::standard(s.dim()).sample(n_points, config.seed(), m_cutoff(config)?)?;
            range_condition_fraction(s, &points, tol)?
        }
    };
    scalars.insert(
        "violating_fraction".into(),
        Scalar {
            value: fraction,
            provenance: Provenance::FormulaEps,
        },
    );
    extra.insert(
        "verdict".into(),
        if fraction == 0.0 {
            "holds (e_p finite if quadratic form integrable)".into()
        } else {
            "violated (e_p = +inf)".into()
        },
    );
    Ok(ExperimentResult {
        metadata: clock.finish(extra),
        scalars,
        tables: Vec::new(),
    })
}

fn m_cutoff(config: &ModelConfig) -> Result<crate::linalg::RankCutoff> {
    config.cutoff()
}

/// Momentum-flip identity check for kinetic models: residuals of
/// `P e^{-εC} P = e^{-εB}` and `P S̄_ε P = S_ε` per lag, and the generalised
/// `e_p(ε)` under the flip.
pub fn cmd_flip_check(config: &ModelConfig, eps_list: &[f64]) -> Result<ExperimentResult> {
    let clock = RunClock::new("flip-check", config);
    let model = config.build()?;
    let m = require_linear(&model)?;
    if m.dim() % 2 != 0 {
        return Err(EprError::DimensionMismatch(
            "momentum flip needs an even state dimension".into(),
        ));
    }
    let flip = momentum_flip_matrix(m.dim() / 2);
    let mut rows = Vec::new();
    let mut all_hold = true;
    for &eps in eps_list {
        let check = momentum_flip_identity(&m, eps)?;
        let gen_ep = crate::exact::ep_eps_conjugated(&m, eps, &flip)?;
        all_hold &= check.holds;
        rows.push(vec![
            fmt_f64(eps),
            fmt_f64(check.mean_residual),
            fmt_f64(check.cov_residual),
            check.holds.to_string(),
            fmt_f64(gen_ep),
        ]);
    }
    let mut extra = BTreeMap::new();
    extra.insert(
        "verdict".into(),
        if all_hold {
            "time reversal equals momentum reversal".into()
        } else {
            "identity fails: not a kinetic model".into()
        },
    );
    Ok(ExperimentResult {
        metadata: clock.finish(extra),
        scalars: BTreeMap::new(),
        tables: vec![Table {
            name: "flip_check".into(),
            header: vec![
                "eps".into(),
                "mean_residual".into(),
                "cov_residual".into(),
                "holds".into(),
                "generalized_ep_eps".into(),
            ],
            rows,
        }],
    })
}

/// Generalised binned estimate under the momentum flip, for kinetic models.
pub fn cmd_ep_generalized(
    config: &ModelConfig,
    eps: f64,
    opts: &EstimatorOptions,
) -> Result<ExperimentResult> {
    let clock = RunClock::new("ep-generalized", config);
    let model = config.build()?;
    let m = require_linear(&model)?;
    if m.dim() % 2 != 0 {
        return Err(EprError::DimensionMismatch(
            "momentum flip needs an even state dimension".into(),
        ));
    }
    let n = m.dim() / 2;
    let paths = simulate_exact(
        &m,
        &InitialState::Stationary,
        eps,
        opts.n_steps,
        opts.n_paths,
        config.seed(),
    )?;
    let grid = opts.grid(m.dim())?;
    let flip = move |x: &DVector<f64>| {
        let mut y = x.clone();
        for i in 0..n {
            y[n + i] = -y[n + i];
        }
        y
    };
    let interval = ep_binned_generalized_bootstrap(
        &paths,
        &flip,
        &grid,
        opts.mode(),
        &BootstrapOptions {
            replicates: opts.bootstrap_replicates,
            seed: config.seed() ^ 0xB007_5EED,
        },
    )?;
    let mut scalars = BTreeMap::new();
    scalars.insert(
        "ep_generalized".into(),
        Scalar {
            value: interval.point,
            provenance: Provenance::Binned,
        },
    );
    let mut extra = BTreeMap::new();
    extra.insert("eps".into(), fmt_f64(eps));
    extra.insert("lo95".into(), fmt_f64(interval.lo95));
    extra.insert("hi95".into(), fmt_f64(interval.hi95));
    extra.insert("std_error".into(), fmt_f64(interval.std_error));
    Ok(ExperimentResult {
        metadata: clock.finish(extra),
        scalars,
        tables: Vec::new(),
    })
}

/// Euler–Maruyama support analysis at a probe state.
pub fn cmd_em_supports(config: &ModelConfig, eps: f64) -> Result<ExperimentResult> {
    let clock = RunClock::new("em-supports", config);
    let model = config.build()?;
    let dim = model.dim();
    let x = DVector::from_fn(dim, |i, _| 0.5 + 0.25 * i as f64);
    let supports = em_kernel_supports(&model, &x, eps)?;
    let mut extra = BTreeMap::new();
    extra.insert("eps".into(), fmt_f64(eps));
    extra.insert("forward_dim".into(), supports.forward.dim().to_string());
    extra.insert("backward_dim".into(), supports.backward.dim().to_string());
    extra.insert("disjoint".into(), supports.disjoint.to_string());
    let mut scalars = BTreeMap::new();
    scalars.insert(
        "em_ep".into(),
        Scalar {
            value: if supports.disjoint { f64::INFINITY } else { f64::NAN },
            provenance: Provenance::FormulaEps,
        },
    );
    Ok(ExperimentResult {
        metadata: clock.finish(extra),
        scalars,
        tables: vec![
            matrix_table("em_forward_basis", &supports.forward.basis),
            matrix_table("em_backward_basis", &supports.backward.basis),
        ],
    })
}

/// Monte-Carlo quadrature `e_p` for a nonlinear model with known density
/// gradient, sampling the probe points from a supplied Gaussian proxy for ρ.
pub fn cmd_ep_quadrature(
    config: &ModelConfig,
    n_samples: usize,
) -> Result<ExperimentResult> {
    let clock = RunClock::new("ep-quadrature", config);
    let model = config.build()?;
    let sde = match &model {
        Model::Nonlinear(s) => s.clone(),
        Model::Langevin(l) => l.as_nonlinear(),
        Model::Linear(m) => m.as_nonlinear(),
    };
    let samples = match &model {
        Model::Linear(m) => {
            GaussianDist::new(DVector::zeros(m.dim()), m.stationary_covariance().clone())?
                .sample(n_samples, config.seed(), m.cutoff())?
        }
        Model::Langevin(l) => {
            let cov = l.canonical_covariance().ok_or_else(|| {
                EprError::Unsupported("quadrature sampling needs a quadratic potential".into())
            })?;
            GaussianDist::new(DVector::zeros(l.dim()), cov)?.sample(
                n_samples,
                config.seed(),
                config.cutoff()?,
            )?
        }
        Model::Nonlinear(s) => {
            GaussianDist::standard(s.dim()).sample(n_samples, config.seed(), config.cutoff()?)?
        }
    };
    let est = ep_quadrature_nonlinear(&sde, &samples)?;
    let mut scalars = BTreeMap::new();
    scalars.insert(
        "ep_quadrature".into(),
        Scalar {
            value: est.value,
            provenance: Provenance::Binned,
        },
    );
    let mut extra = BTreeMap::new();
    extra.insert("std_error".into(), fmt_f64(est.std_error));
    extra.insert("violating_fraction".into(), fmt_f64(est.violating_fraction));
    extra.insert("n_samples".into(), est.n_samples.to_string());
    Ok(ExperimentResult {
        metadata: clock.finish(extra),
        scalars,
        tables: Vec::new(),
    })
}
