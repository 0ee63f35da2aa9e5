//! Monte-Carlo experiments: config, seeded trials, metrics and output files.
//!
//! A run generates one scenario per `(trial, L)` pair, solves it with every
//! configured solver at every grid point from several random starts, keeps
//! the start with the lowest objective, optionally debiases it and scores it
//! against the ground truth.
//!
//! Outputs (in `output_dir`):
//! * `trials.csv`: one row per trial, `L`, solver and grid point;
//! * `trace_t<trial>_l<L>_<solver>_k<exponent>.csv`: trace of the kept start
//!   followed by its debiasing pass;
//! * `summary.json`: medians per group. It carries no timing, so equal seeds
//!   give byte-identical files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluate::{evaluate, per_column_phase, EvalOptions};
use crate::linalg::CMat;
use crate::operators::OperatorCase;
use crate::problem::ProblemInstance;
use crate::scenario::{generate, MixingCase, Scenario, ScenarioParams};
use crate::scprime::StepBounds;
use crate::solver::{Init, SolverConfig, SolverReport, TraceRow};
use crate::{compact, scaphase, scprime, tuning};

/// The three solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Compact,
    Scaphase,
    Scprime,
}

impl SolverKind {
    pub fn tag(self) -> &'static str {
        match self {
            SolverKind::Compact => "compact",
            SolverKind::Scaphase => "scaphase",
            SolverKind::Scprime => "scprime",
        }
    }

    /// Solvers of the conventional formulation (with `X` and `μ`).
    pub fn is_conventional(self) -> bool {
        self != SolverKind::Compact
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "compact" | "compact-scaphase" | "cscaphase" => Ok(SolverKind::Compact),
            "scaphase" => Ok(SolverKind::Scaphase),
            "scprime" | "sc-prime" => Ok(SolverKind::Scprime),
            other => Err(Error::Parameter(format!(
                "unknown solver '{other}' (expected compact, scaphase or scprime)"
            ))),
        }
    }
}

/// Scenario sizes with a grid over the number of active atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioGrid {
    pub case: MixingCase,
    pub n: usize,
    pub p: usize,
    pub i: usize,
    pub m1: usize,
    /// Nonzeros per code column. Give this or `density`.
    #[serde(default)]
    pub l: Vec<usize>,
    /// `L/P` values, rounded to the nearest count (at least 1).
    #[serde(default)]
    pub density: Vec<f64>,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub normalize_dict: bool,
}

impl ScenarioGrid {
    /// The `L` values to sweep.
    pub fn l_values(&self) -> Result<Vec<usize>> {
        match (self.l.is_empty(), self.density.is_empty()) {
            (false, true) => Ok(self.l.clone()),
            (true, false) => Ok(self
                .density
                .iter()
                .map(|d| ((d * self.p as f64).round() as usize).max(1))
                .collect()),
            _ => Err(Error::Config("give exactly one nonempty list of `l` or `density`".into())),
        }
    }

    pub fn params(&self, l: usize) -> ScenarioParams {
        ScenarioParams {
            case: self.case,
            n: self.n,
            p: self.p,
            i: self.i,
            m1: self.m1,
            l,
            snr_db: self.snr_db,
            normalize_dict: self.normalize_dict,
        }
    }
}

fn default_mu_scale() -> f64 {
    1.0
}

/// One solver and the weights to try.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub kind: SolverKind,
    /// Exponents `k`: the sparsity weight is `0.75ᵏ` times its upper bound.
    pub grid: Vec<u32>,
    #[serde(default)]
    pub config: SolverConfig,
    /// `μ` as a multiple of `σ²_min,nz(F)` (conventional solvers).
    #[serde(default = "default_mu_scale")]
    pub mu_scale: f64,
    /// Curvature constants of the block-coordinate baseline.
    #[serde(default)]
    pub bounds: StepBounds,
    /// Overrides the experiment's number of starts.
    #[serde(default)]
    pub n_inits: Option<usize>,
}

fn default_trials() -> usize {
    50
}

fn default_inits() -> usize {
    10
}

/// A full experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every scenario and start is derived from it.
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_inits")]
    pub n_inits: usize,
    #[serde(default)]
    pub output_dir: PathBuf,
    /// Worker threads; `0` uses the global pool.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_true")]
    pub write_traces: bool,
    pub scenario: ScenarioGrid,
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub eval: EvalOptions,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Check the config; returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.n_inits == 0 {
            return Err(Error::Config("n_inits must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("no solvers selected".into()));
        }
        let ls = self.scenario.l_values()?;
        for &l in &ls {
            self.scenario.params(l).validate()?;
        }
        let mut warnings = Vec::new();
        for s in &self.solvers {
            if s.grid.is_empty() {
                return Err(Error::Config(format!("empty weight grid for {}", s.kind)));
            }
            if s.n_inits == Some(0) {
                return Err(Error::Config(format!("n_inits for {} must be at least 1", s.kind)));
            }
            s.config.validate()?;
            if s.kind.is_conventional() && !(s.mu_scale > 0.0) {
                return Err(Error::Config(format!("mu_scale for {} must be > 0", s.kind)));
            }
            if s.kind == SolverKind::Compact && self.scenario.case == MixingCase::PerSnapshot {
                warnings.push(format!(
                    "compact solver on mixing case {}: without a shared spatial factor each \
                     atom update needs a dense {}×{} SVD per iteration, which scales far worse \
                     than the conventional solvers",
                    self.scenario.case.number(),
                    self.scenario.m1 * self.scenario.i,
                    self.scenario.n
                ));
            }
        }
        Ok(warnings)
    }
}

/// Seed for a node of the seeding tree `master → label → indices`.
pub fn derive_seed(master: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    for i in indices {
        h.update(i.to_le_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Result of one start.
#[derive(Debug, Clone, Serialize)]
pub struct StartRecord {
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
}

/// Everything computed for one `(trial, L, solver, exponent)` cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub row: TrialRow,
    /// One entry per start, `None` when the run failed.
    pub starts: Vec<Option<StartRecord>>,
    pub best: Option<SolverReport>,
    pub debiased: Option<SolverReport>,
}

/// One line of `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub l: usize,
    pub solver: SolverKind,
    pub exponent: u32,
    /// `λ` or `ρ`.
    pub weight: f64,
    pub mu: f64,
    pub scenario_seed: u64,
    /// Index of the kept start.
    pub best_start: usize,
    pub converged: bool,
    /// Iterations of the kept start.
    pub iterations: usize,
    pub debias_iterations: usize,
    /// All starts plus debiasing.
    pub total_iterations: usize,
    pub median_start_iterations: f64,
    /// Objective of the kept start before debiasing.
    pub objective: f64,
    pub mnse_d: f64,
    pub mnse_z: f64,
    pub mnse_d_db: f64,
    pub mnse_z_db: f64,
    pub f_measure: f64,
    /// All starts plus debiasing.
    pub wall_secs: f64,
    /// Empty unless every start failed or scoring failed.
    pub error: String,
}

fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// Median of the finite values; `NaN` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Instance with the weights of `spec` at grid exponent `k`.
pub fn weighted_instance(base: &ProblemInstance, spec: &SolverSpec, k: u32) -> Result<ProblemInstance> {
    let factor = tuning::GRID_RATIO.powi(k as i32);
    if spec.kind.is_conventional() {
        let inst = base.clone().with_mu(spec.mu_scale * tuning::mu_default(base));
        let rho = tuning::rho_max(&inst)? * factor;
        Ok(inst.with_rho(rho))
    } else {
        let lambda = tuning::lambda_max(base) * factor;
        Ok(base.clone().with_lambda(lambda))
    }
}

fn random_start(inst: &ProblemInstance, kind: SolverKind, seed: u64) -> Init {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if kind.is_conventional() {
        Init::random_conventional(inst, &mut rng, None)
    } else {
        Init::random_compact(inst, &mut rng, None)
    }
}

fn solve(inst: &ProblemInstance, spec: &SolverSpec, init: &Init) -> Result<SolverReport> {
    match spec.kind {
        SolverKind::Compact => compact::run(inst, init, &spec.config),
        SolverKind::Scaphase => scaphase::run(inst, init, &spec.config),
        SolverKind::Scprime => scprime::run(inst, init, &spec.config, spec.bounds),
    }
}

fn debias(inst: &ProblemInstance, spec: &SolverSpec, rep: &SolverReport) -> Result<SolverReport> {
    let init = Init {
        d: rep.d.clone(),
        z: rep.z.clone(),
        x: rep.x.clone(),
    };
    match spec.kind {
        SolverKind::Compact => compact::debias(inst, &rep.d, &rep.z, &spec.config),
        SolverKind::Scaphase => scaphase::debias(inst, &init, &spec.config),
        SolverKind::Scprime => scprime::debias(inst, &init, &spec.config, spec.bounds),
    }
}

/// Solve one cell: all starts, keep the best, debias, score.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    trial: usize,
    l_index: usize,
    spec: &SolverSpec,
    exponent: u32,
) -> CellOutcome {
    let clock = Instant::now();
    let n_inits = spec.n_inits.unwrap_or(cfg.n_inits);
    let mut row = TrialRow {
        trial,
        l: scenario.params.l,
        solver: spec.kind,
        exponent,
        weight: f64::NAN,
        mu: f64::NAN,
        scenario_seed: scenario.seed,
        best_start: 0,
        converged: false,
        iterations: 0,
        debias_iterations: 0,
        total_iterations: 0,
        median_start_iterations: f64::NAN,
        objective: f64::NAN,
        mnse_d: f64::NAN,
        mnse_z: f64::NAN,
        mnse_d_db: f64::NAN,
        mnse_z_db: f64::NAN,
        f_measure: f64::NAN,
        wall_secs: 0.0,
        error: String::new(),
    };
    let inst = match weighted_instance(&scenario.inst, spec, exponent) {
        Ok(i) => i,
        Err(e) => {
            row.error = e.to_string();
            return CellOutcome { row, starts: Vec::new(), best: None, debiased: None };
        }
    };
    row.weight = if spec.kind.is_conventional() { inst.rho } else { inst.lambda };
    row.mu = inst.mu;

    // Starts depend on the trial, L and start index only, so the two
    // conventional solvers are paired on identical starting points.
    let runs: Vec<Result<SolverReport>> = (0..n_inits)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(cfg.seed, "start", &[trial as u64, l_index as u64, k as u64]);
            solve(&inst, spec, &random_start(&inst, spec.kind, seed))
        })
        .collect();
    let mut errors = Vec::new();
    let starts: Vec<Option<StartRecord>> = runs
        .iter()
        .map(|r| match r {
            Ok(rep) => Some(StartRecord {
                iterations: rep.iterations,
                objective: rep.final_objective(),
                converged: rep.converged,
            }),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        })
        .collect();
    row.total_iterations = starts.iter().flatten().map(|s| s.iterations).sum();
    row.median_start_iterations = median(starts.iter().flatten().map(|s| s.iterations as f64));
    let best_idx = starts
        .iter()
        .enumerate()
        .filter_map(|(k, s)| s.as_ref().map(|s| (k, s.objective)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k);
    let Some(best_idx) = best_idx else {
        row.error = format!("all starts failed: {}", errors.join("; "));
        row.wall_secs = clock.elapsed().as_secs_f64();
        return CellOutcome { row, starts, best: None, debiased: None };
    };
    let best = runs.into_iter().nth(best_idx).expect("index in range").expect("start succeeded");
    row.best_start = best_idx;
    row.converged = best.converged;
    row.iterations = best.iterations;
    row.objective = best.final_objective();

    let debiased = if spec.config.debias {
        match debias(&inst, spec, &best) {
            Ok(rep) => Some(rep),
            Err(e) => {
                row.error = format!("debiasing failed: {e}");
                None
            }
        }
    } else {
        None
    };
    if let Some(d) = &debiased {
        row.debias_iterations = d.iterations;
        row.total_iterations += d.iterations;
    }
    let fin = debiased.as_ref().unwrap_or(&best);
    let x_est: CMat = match &fin.x {
        Some(x) => x.clone(),
        None => fin.d.dot(&fin.z),
    };
    match evaluate(
        &x_est,
        &fin.d,
        &fin.z,
        &scenario.x_true,
        &scenario.d_true,
        &scenario.z_true,
        per_column_phase(inst.op()),
        cfg.eval,
    ) {
        Ok(m) => {
            row.mnse_d = m.mnse_d;
            row.mnse_z = m.mnse_z;
            row.mnse_d_db = db(m.mnse_d);
            row.mnse_z_db = db(m.mnse_z);
            row.f_measure = m.f_measure;
        }
        Err(e) => row.error = format!("evaluation failed: {e}"),
    }
    row.wall_secs = clock.elapsed().as_secs_f64();
    CellOutcome { row, starts, best: Some(best), debiased }
}

/// Scenario of trial `trial` at the `l_index`-th grid value.
pub fn trial_scenario(cfg: &ExperimentConfig, trial: usize, l_index: usize) -> Result<Scenario> {
    let ls = cfg.scenario.l_values()?;
    let l = *ls.get(l_index).ok_or(Error::Index { index: l_index, len: ls.len() })?;
    let seed = derive_seed(cfg.seed, "scenario", &[trial as u64, l_index as u64]);
    generate(&cfg.scenario.params(l), seed)
}

/// All cells of one trial at one `L`, in config order.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize, l_index: usize) -> Result<Vec<CellOutcome>> {
    let scenario = trial_scenario(cfg, trial, l_index)?;
    let cells: Vec<(&SolverSpec, u32)> = cfg
        .solvers
        .iter()
        .flat_map(|s| s.grid.iter().map(move |&k| (s, k)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(s, k)| run_cell(cfg, &scenario, trial, l_index, s, k))
        .collect())
}

/// Medians of one `(L, solver, exponent)` group. No timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryGroup {
    pub l: usize,
    pub solver: SolverKind,
    pub exponent: u32,
    pub trials: usize,
    pub failures: usize,
    pub converged_fraction: f64,
    pub median_iterations: f64,
    pub median_total_iterations: f64,
    pub median_objective: f64,
    pub median_mnse_d_db: f64,
    pub median_mnse_z_db: f64,
    pub median_f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub n_trials: usize,
    pub n_inits: usize,
    pub groups: Vec<SummaryGroup>,
}

/// Aggregate rows; recomputable from `trials.csv` alone.
pub fn summarize(cfg: &ExperimentConfig, rows: &[TrialRow]) -> Summary {
    let mut keys: Vec<(usize, SolverKind, u32)> = Vec::new();
    for r in rows {
        let key = (r.l, r.solver, r.exponent);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let groups = keys
        .into_iter()
        .map(|(l, solver, exponent)| {
            let g: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| r.l == l && r.solver == solver && r.exponent == exponent)
                .collect();
            let ok: Vec<&&TrialRow> = g.iter().filter(|r| r.error.is_empty()).collect();
            SummaryGroup {
                l,
                solver,
                exponent,
                trials: g.len(),
                failures: g.len() - ok.len(),
                converged_fraction: g.iter().filter(|r| r.converged).count() as f64 / g.len() as f64,
                median_iterations: median(ok.iter().map(|r| r.iterations as f64)),
                median_total_iterations: median(ok.iter().map(|r| r.total_iterations as f64)),
                median_objective: median(ok.iter().map(|r| r.objective)),
                median_mnse_d_db: median(ok.iter().map(|r| r.mnse_d_db)),
                median_mnse_z_db: median(ok.iter().map(|r| r.mnse_z_db)),
                median_f_measure: median(ok.iter().map(|r| r.f_measure)),
            }
        })
        .collect();
    Summary { seed: cfg.seed, n_trials: cfg.n_trials, n_inits: cfg.n_inits, groups }
}

/// What [`run_experiment`] produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
    pub warnings: Vec<String>,
    /// SHA-256 of `summary.json`.
    pub summary_digest: String,
}

const TRACE_HEADER: [&str; 8] =
    ["phase", "iteration", "objective", "r_d", "r_z", "r_x", "step", "elapsed_secs"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serde(format!("{}: {other:?}", path.display())),
    }
}

fn write_trace(path: &Path, cell: &CellOutcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(TRACE_HEADER).map_err(|e| csv_err(path, e))?;
    let phases = [("main", cell.best.as_ref()), ("debias", cell.debiased.as_ref())];
    for (phase, rep) in phases {
        for r in rep.iter().flat_map(|r| r.trace.iter()) {
            let TraceRow { iteration, objective, r_d, r_z, r_x, step, elapsed_secs } = *r;
            w.serialize((phase, iteration, objective, r_d, r_z, r_x, step, elapsed_secs))
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn run_all(cfg: &ExperimentConfig) -> Result<Vec<Vec<CellOutcome>>> {
    let n_l = cfg.scenario.l_values()?.len();
    let jobs: Vec<(usize, usize)> =
        (0..cfg.n_trials).flat_map(|t| (0..n_l).map(move |l| (t, l))).collect();
    jobs.into_par_iter().map(|(t, l)| run_trial(cfg, t, l)).collect()
}

/// Run the experiment and write its files into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let warnings = cfg.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let results = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_all(cfg))?
    } else {
        run_all(cfg)?
    };

    let rows: Vec<TrialRow> = results.iter().flatten().map(|c| c.row.clone()).collect();
    for cell in results.iter().flatten() {
        if !cell.row.error.is_empty() {
            log::warn!(
                "trial {} L={} {} k={}: {}",
                cell.row.trial,
                cell.row.l,
                cell.row.solver,
                cell.row.exponent,
                cell.row.error
            );
        }
        if cfg.write_traces && cell.best.is_some() {
            let name = format!(
                "trace_t{}_l{}_{}_k{}.csv",
                cell.row.trial, cell.row.l, cell.row.solver, cell.row.exponent
            );
            write_trace(&dir.join(name), cell)?;
        }
    }
    let path = dir.join("trials.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    for r in &rows {
        w.serialize(r).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let summary = summarize(cfg, &rows);
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Serde(e.to_string()))?;
    let path = dir.join("summary.json");
    std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    Ok(ExperimentOutput { rows, summary, warnings, summary_digest: sha256_hex(text.as_bytes()) })
}

/// Read `trials.csv` back.
pub fn read_trials(path: &Path) -> Result<Vec<TrialRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

/// Dominant per-iteration flop counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    /// Cost of one application of `F`, clamped to its admissible range.
    pub c_f: f64,
    /// Cost of `F` for this operator's structure, before clamping.
    pub c_f_structural: f64,
    pub gradient: f64,
    pub partial_hessians: f64,
    pub line_search: f64,
    pub total: f64,
}

/// Per-iteration cost of `kind` on `inst`.
///
/// The operator cost is the structural count, clamped to
/// `[2NI·max(M1, M2), 2·M1·M2·N·I]`.
pub fn estimate_complexity(kind: SolverKind, inst: &ProblemInstance) -> ComplexityEstimate {
    let (m1, m2, n, i) = inst.dims();
    let (m1, m2, n, i) = (m1 as f64, m2 as f64, n as f64, i as f64);
    let p = inst.atoms() as f64;
    let op = inst.op();
    let raw = op.structural_cost();
    let lo = 2.0 * n * i * m1.max(m2);
    let hi = 2.0 * m1 * m2 * n * i;
    let c_f = raw.clamp(lo, hi);
    let (gradient, partial_hessians, line_search) = match kind {
        SolverKind::Compact => {
            let hess = if op.case() == OperatorCase::TimeInvariant {
                2.0 * m1 * n * p + 2.0 * m2 * p * i
            } else {
                4.0 * m1 * m2 * n * p * i + m1 * m2 * n * n * p
            };
            (c_f + 4.0 * n * p * i, hess, 2.0 * c_f + 6.0 * n * p * i)
        }
        SolverKind::Scaphase => (
            c_f + 4.0 * n * p * i,
            2.0 * n * p + 2.0 * p * i,
            c_f + 6.0 * n * p * i,
        ),
        SolverKind::Scprime => (2.0 * c_f + 6.0 * n * p * i, 0.0, 0.0),
    };
    ComplexityEstimate {
        c_f,
        c_f_structural: raw,
        gradient,
        partial_hessians,
        line_search,
        total: gradient + partial_hessians + line_search,
    }
}
