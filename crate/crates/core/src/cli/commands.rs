//! The four batch subcommands. Each returns a structured outcome; printing
//! is left to the caller.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use nalgebra::{Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{Config, ConfigError};
use super::io::{self, IoError, Schema};
use crate::filters::FilterKind;
use crate::ident::{fit_ocv_polynomial_with, ocv_ident_init, ocv_ident_step, IdentError};
use crate::model::{coulomb_step, OcvCurve};
use crate::pipeline::{run_joint, FlagCounts, PipelineError, RunResult};
use crate::sim::{
    corrupt, generate_cycle, simulate_truth, MeasuredTrace, NoiseSpec, SimError, TruthTrace,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("invalid input data: {0}")]
    Input(String),
    #[error("insufficient excitation: {0}")]
    Excitation(String),
    #[error("{0}")]
    Reference(String),
    #[error("{0}")]
    Misuse(String),
}

impl CliError {
    /// Stable process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Input(_) => 3,
            CliError::Excitation(_) => 4,
            CliError::Reference(_) => 5,
            CliError::Misuse(_) => 6,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::MissingReferenceSource(_) => CliError::Reference(e.to_string()),
            PipelineError::InvalidConfig(msg) => CliError::Config(ConfigError::InvalidValue {
                key: "run".into(),
                msg,
            }),
            PipelineError::Ident(IdentError::IllConditioned(msg)) => CliError::Excitation(msg),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn sim_config_error(e: SimError) -> CliError {
    let key = match e {
        SimError::InvalidCycle(_) => "cycle",
        SimError::InvalidNoise(_) => "noise",
        SimError::InvalidInitialSoc(_) => "sim.soc_init",
    };
    CliError::Config(ConfigError::InvalidValue {
        key: key.into(),
        msg: e.to_string(),
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| {
        CliError::Io(IoError::Io {
            path: dir.display().to_string(),
            source,
        })
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| {
        CliError::Io(IoError::Io {
            path: path.display().to_string(),
            source,
        })
    })
}

fn load_config(path: Option<&Path>, ocv: Option<&Path>) -> Result<Config, CliError> {
    let mut cfg = Config::load(path)?;
    if let Some(p) = ocv {
        cfg.run.curve = io::read_coeffs(p)?;
        cfg.validate()?;
    }
    Ok(cfg)
}

/// Filter selection for `run` and `compare`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterSelection {
    FromConfig,
    All,
    One(FilterKind),
}

impl std::str::FromStr for FilterSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            Ok(FilterSelection::All)
        } else {
            s.parse()
                .map(FilterSelection::One)
                .map_err(|_| format!("unknown filter `{s}` (ekf|hiekf|ahiekf|iahiekf|all)"))
        }
    }
}

impl FilterSelection {
    fn apply(self, cfg: &mut Config) {
        match self {
            FilterSelection::FromConfig => {}
            FilterSelection::All => cfg.run.kinds = FilterKind::ALL.to_vec(),
            FilterSelection::One(k) => cfg.run.kinds = vec![k],
        }
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub steps: usize,
    pub final_soc: f64,
    pub cutoff_events: u64,
    pub truth_path: PathBuf,
    pub measured_path: PathBuf,
}

impl fmt::Display for SimulateOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "simulated {} steps, final SOC {:.4}, cutoff events {}",
            self.steps, self.final_soc, self.cutoff_events
        )
    }
}

pub fn simulate_from_config(cfg: &Config) -> Result<(TruthTrace, MeasuredTrace), CliError> {
    let spec = &cfg.run.spec;
    let cycle = generate_cycle(&cfg.sim.cycle, spec.dt_s).map_err(sim_config_error)?;
    let truth = simulate_truth(
        spec,
        &cfg.sim.params,
        &cfg.run.curve,
        &cycle,
        cfg.sim.soc_init,
    )
    .map_err(sim_config_error)?;
    let measured = corrupt(&truth, &cfg.sim.noise).map_err(sim_config_error)?;
    Ok((truth, measured))
}

pub fn cmd_simulate(
    config_path: Option<&Path>,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<SimulateOutcome, CliError> {
    let mut cfg = load_config(config_path, None)?;
    if let Some(s) = seed {
        cfg.sim.noise.seed = s;
    }
    let (truth, measured) = simulate_from_config(&cfg)?;
    if truth.soc_clamped {
        warn!("true SOC left [0, 1] and was clamped");
    }
    create_dir(out_dir)?;
    let truth_path = out_dir.join("truth.csv");
    let measured_path = out_dir.join("measured.csv");
    io::write_truth(&truth_path, &truth)?;
    io::write_measured(&measured_path, &measured)?;
    Ok(SimulateOutcome {
        steps: truth.len(),
        final_soc: truth.samples.last().map_or(cfg.sim.soc_init, |s| s.soc),
        cutoff_events: u64::from(truth.cutoff),
        truth_path,
        measured_path,
    })
}

// ----------------------------------------------------------------- fit-ocv

#[derive(Debug, Clone, PartialEq)]
pub struct FitOcvOutcome {
    pub curve: OcvCurve,
    pub out_path: PathBuf,
}

impl fmt::Display for FitOcvOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.curve.coeffs.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "k{} = {c}", 6 - i)?;
        }
        Ok(())
    }
}

/// Condition number of the normal matrix of the Rint regressor `[1, -I]`.
fn rint_condition(currents: &[f64]) -> f64 {
    let (mut s1, mut s2) = (0.0, 0.0);
    for &i in currents {
        s1 -= i;
        s2 += i * i;
    }
    let n = currents.len() as f64;
    let eig = SymmetricEigen::new(Matrix2::new(n, s1, s1, s2)).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Rint identification followed by a polynomial fit, on in-memory data.
pub fn fit_ocv_trace(cfg: &Config, trace: &MeasuredTrace) -> Result<OcvCurve, CliError> {
    let fit = &cfg.ocv_fit;
    let currents: Vec<f64> = trace.samples.iter().map(|s| s.current_a).collect();
    let cond = rint_condition(&currents);
    if !(cond < fit.poly.max_condition) {
        return Err(CliError::Excitation(format!(
            "current does not vary enough to separate OCV from R0 (condition {cond:e})"
        )));
    }
    let mut state =
        ocv_ident_init(fit.ocv_init, fit.r0_init, fit.cov0, fit.lambda).map_err(|e| {
            CliError::Config(ConfigError::InvalidValue {
                key: "ocv_fit".into(),
                msg: e.to_string(),
            })
        })?;
    let mut soc = fit.soc_init;
    let mut soc_seq = Vec::with_capacity(trace.len());
    let mut ocv_seq = Vec::with_capacity(trace.len());
    let mut clamped = false;
    for s in &trace.samples {
        let ocv;
        (state, ocv) = ocv_ident_step(&state, s.current_a, s.voltage_v)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let step = coulomb_step(soc, s.current_a, &cfg.run.spec);
        soc = step.soc;
        clamped |= step.out_of_range;
        soc_seq.push(soc);
        ocv_seq.push(ocv);
    }
    if clamped {
        warn!("coulomb-counted SOC left [0, 1]; check ocv_fit.soc_init and battery.capacity_ah");
    }
    debug!("rint identification: final R0 {}", state.theta[1]);
    let curve = fit_ocv_polynomial_with(&soc_seq, &ocv_seq, &fit.poly).map_err(|e| match e {
        IdentError::IllConditioned(msg) => CliError::Excitation(msg),
        other => CliError::Input(other.to_string()),
    })?;
    if let Err(e) = curve.check_band(cfg.ocv_band.0, cfg.ocv_band.1) {
        warn!("fitted curve fails the sanity band: {e}");
    }
    Ok(curve)
}

pub fn cmd_fit_ocv(
    input: &Path,
    config_path: Option<&Path>,
    out_path: &Path,
) -> Result<FitOcvOutcome, CliError> {
    let cfg = load_config(config_path, None)?;
    let trace = io::read_measured(input)?;
    let times: Vec<f64> = trace.samples.iter().map(|s| s.time_s).collect();
    io::check_sampling(input, &times, cfg.run.spec.dt_s)?;
    let curve = fit_ocv_trace(&cfg, &trace)?;
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    io::write_coeffs(out_path, &curve)?;
    Ok(FitOcvOutcome {
        curve,
        out_path: out_path.to_path_buf(),
    })
}

// --------------------------------------------------------------------- run

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub filter: String,
    pub rmse_pct: f64,
    pub mae_pct: f64,
    pub flags: FlagCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steps: usize,
    pub dt_s: f64,
    pub reference_mode: String,
    pub cutoff_events: u64,
    pub filters: Vec<FilterSummary>,
}

impl Summary {
    pub fn from_result(cfg: &Config, result: &RunResult) -> Self {
        Self {
            steps: result.time_s.len(),
            dt_s: cfg.run.spec.dt_s,
            reference_mode: cfg.run.reference_mode.as_str().to_string(),
            cutoff_events: result.cutoff_events,
            filters: result
                .runs
                .iter()
                .map(|r| FilterSummary {
                    filter: r.kind.as_str().to_string(),
                    rmse_pct: r.rmse_pct,
                    mae_pct: r.mae_pct,
                    flags: r.flags,
                })
                .collect(),
        }
    }

    pub fn filter(&self, kind: FilterKind) -> Option<&FilterSummary> {
        self.filters.iter().find(|f| f.filter == kind.as_str())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Method / RMSE / MAE rows, lowest RMSE first.
pub fn format_table(rows: &[(String, f64, f64)]) -> String {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut out = format!("{:<10}{:>12}{:>12}\n", "Method", "RMSE (%)", "MAE (%)");
    for (name, rmse, mae) in rows {
        out.push_str(&format!("{name:<10}{rmse:>12.4}{mae:>12.4}\n"));
    }
    out
}

fn label_of(name: &str) -> String {
    name.parse::<FilterKind>()
        .map(|k| k.label().to_string())
        .unwrap_or_else(|_| name.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: Summary,
    pub result: RunResult,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn table(&self) -> String {
        let rows: Vec<_> = self
            .summary
            .filters
            .iter()
            .map(|f| (label_of(&f.filter), f.rmse_pct, f.mae_pct))
            .collect();
        format_table(&rows)
    }
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.table())
    }
}

fn write_run(out_dir: &Path, cfg: &Config, result: &RunResult) -> Result<Summary, CliError> {
    create_dir(out_dir)?;
    for run in &result.runs {
        let path = out_dir.join(format!("trace_{}.csv", run.kind.as_str()));
        io::write_filter_trace(&path, result, run)?;
    }
    let summary = Summary::from_result(cfg, result);
    write_text(&out_dir.join("summary.json"), &summary.to_json())?;
    Ok(summary)
}

fn log_flags(result: &RunResult) {
    for r in &result.runs {
        let f = r.flags;
        if f != FlagCounts::default() {
            info!(
                "{}: negative_rx={} nonphysical={} filter_failures={} ident_failures={} windup={} soc_clamps={}",
                r.kind, f.negative_rx, f.nonphysical_params, f.filter_failures,
                f.ident_failures, f.windup_events, f.soc_clamps
            );
        }
    }
}

pub fn cmd_run(
    input: &Path,
    config_path: Option<&Path>,
    out_dir: &Path,
    filters: FilterSelection,
    ocv_path: Option<&Path>,
) -> Result<RunOutcome, CliError> {
    let mut cfg = load_config(config_path, ocv_path)?;
    filters.apply(&mut cfg);
    let trace = io::read_measured(input)?;
    let times: Vec<f64> = trace.samples.iter().map(|s| s.time_s).collect();
    io::check_sampling(input, &times, cfg.run.spec.dt_s)?;
    let result = run_joint(&cfg.run, &trace, None)?;
    log_flags(&result);
    let summary = write_run(out_dir, &cfg, &result)?;
    Ok(RunOutcome {
        summary,
        result,
        out_dir: out_dir.to_path_buf(),
    })
}

// ----------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub filter: String,
    pub rmse_pct: f64,
    pub mae_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianSummary {
    pub seeds: Vec<u64>,
    pub filters: Vec<MedianRow>,
}

impl MedianSummary {
    pub fn filter(&self, kind: FilterKind) -> Option<&MedianRow> {
        self.filters.iter().find(|f| f.filter == kind.as_str())
    }

    pub fn table(&self) -> String {
        let rows: Vec<_> = self
            .filters
            .iter()
            .map(|f| (label_of(&f.filter), f.rmse_pct, f.mae_pct))
            .collect();
        format_table(&rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutcome {
    pub per_seed: Vec<(u64, Summary)>,
    pub median: MedianSummary,
}

impl fmt::Display for CompareOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "median over {} seed(s)", self.per_seed.len())?;
        write!(f, "{}", self.median.table())
    }
}

/// Median of a non-empty slice; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Seed `i` of a comparison: `master + i`, wrapping.
pub fn seed_list(master: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| master.wrapping_add(i)).collect()
}

fn run_seed(cfg: &Config, truth: &TruthTrace, seed: u64) -> Result<RunResult, CliError> {
    let noise = NoiseSpec {
        seed,
        ..cfg.sim.noise
    };
    let measured = corrupt(truth, &noise).map_err(sim_config_error)?;
    Ok(run_joint(&cfg.run, &measured, Some(truth))?)
}

/// Runs every seed on a bounded pool of scoped threads; results come back
/// in seed order.
fn run_seeds(cfg: &Config, truth: &TruthTrace, seeds: &[u64]) -> Vec<Result<RunResult, CliError>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(seeds.len())
        .max(1);
    let chunk = seeds.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk.max(1))
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&s| run_seed(cfg, truth, s))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("seed worker panicked"))
            .collect()
    })
}

pub fn compare_truth(
    cfg: &Config,
    truth: &TruthTrace,
    seeds: &[u64],
) -> Result<Vec<(u64, RunResult)>, CliError> {
    seeds
        .iter()
        .copied()
        .zip(run_seeds(cfg, truth, seeds))
        .map(|(s, r)| r.map(|r| (s, r)))
        .collect()
}

pub fn median_summary(per_seed: &[(u64, Summary)]) -> MedianSummary {
    let first = &per_seed[0].1;
    let filters = first
        .filters
        .iter()
        .map(|f| {
            let pick = |g: fn(&FilterSummary) -> f64| {
                let v: Vec<f64> = per_seed
                    .iter()
                    .filter_map(|(_, s)| s.filters.iter().find(|x| x.filter == f.filter))
                    .map(g)
                    .collect();
                median(&v)
            };
            MedianRow {
                filter: f.filter.clone(),
                rmse_pct: pick(|x| x.rmse_pct),
                mae_pct: pick(|x| x.mae_pct),
            }
        })
        .collect();
    MedianSummary {
        seeds: per_seed.iter().map(|(s, _)| *s).collect(),
        filters,
    }
}

pub fn cmd_compare(
    input: &Path,
    config_path: Option<&Path>,
    out_dir: &Path,
    seeds: usize,
    master_seed: Option<u64>,
    filters: FilterSelection,
    ocv_path: Option<&Path>,
) -> Result<CompareOutcome, CliError> {
    if seeds == 0 {
        return Err(CliError::Misuse("--seeds must be at least 1".into()));
    }
    let mut cfg = load_config(config_path, ocv_path)?;
    filters.apply(&mut cfg);
    match io::detect_schema(input)? {
        Schema::Truth => {}
        Schema::Measured { .. } => {
            return Err(CliError::Misuse(format!(
                "{} is a measured trace; compare re-draws sensor noise and needs the simulator's truth.csv",
                input.display()
            )))
        }
    }
    let truth = io::read_truth(input, cfg.sim.params, cfg.run.curve)?;
    let times: Vec<f64> = truth.samples.iter().map(|s| s.time_s).collect();
    io::check_sampling(input, &times, cfg.run.spec.dt_s)?;

    let seed_values = seed_list(master_seed.unwrap_or(cfg.sim.noise.seed), seeds);
    let results = compare_truth(&cfg, &truth, &seed_values)?;
    create_dir(out_dir)?;
    let mut per_seed = Vec::with_capacity(results.len());
    for (seed, result) in &results {
        log_flags(result);
        let dir = out_dir.join(format!("seed_{seed}"));
        create_dir(&dir)?;
        let summary = Summary::from_result(&cfg, result);
        write_text(&dir.join("summary.json"), &summary.to_json())?;
        per_seed.push((*seed, summary));
    }
    let median = median_summary(&per_seed);
    let mut json = serde_json::to_string_pretty(&median).expect("median serializes");
    json.push('\n');
    write_text(&out_dir.join("median.json"), &json)?;
    write_text(&out_dir.join("median.txt"), &median.table())?;
    Ok(CompareOutcome { per_seed, median })
}
