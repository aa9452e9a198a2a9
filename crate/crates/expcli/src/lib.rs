//! Seeded experiment runner: training runs, full-factorial sweeps, a
//! resumable results table, and plot-data export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uavec::agents::{self, AgentKind, EpisodeMetrics};
use uavec::env::trace::TraceWriter;
use uavec::{ConfigError, SimConfig};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "experiment.toml";
/// Share of the final episodes averaged into a cell summary.
pub const FINAL_WINDOW: f64 = 0.2;
/// Environment variable that relocates relative output paths.
pub const OUT_ROOT_ENV: &str = "UAVEC_OUT_ROOT";

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write to {path}: {source}")]
    Unwritable { path: PathBuf, source: io::Error },
    #[error("corrupt results file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("missing cells: {0}")]
    MissingCells(String),
    #[error(transparent)]
    Train(#[from] agents::TrainError),
    #[error(transparent)]
    Checkpoint(#[from] agents::CheckpointError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    LuavCount,
    VehicleCount,
    /// HUAV uplink and downlink bandwidth, in MHz.
    HuavBandwidth,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::LuavCount => "luav_count",
            SweepVar::VehicleCount => "vehicle_count",
            SweepVar::HuavBandwidth => "huav_bandwidth",
        }
    }

    pub fn figure(self) -> Figure {
        match self {
            SweepVar::LuavCount => Figure::F3,
            SweepVar::VehicleCount => Figure::F4,
            SweepVar::HuavBandwidth => Figure::F5,
        }
    }

    pub fn apply(self, cfg: &mut SimConfig, value: f64) -> Result<(), ExpError> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(ExpError::Invalid(format!("{} needs a whole number, got {value}", self.name())))
            }
        };
        match self {
            SweepVar::LuavCount => cfg.network.num_luavs = count()?,
            SweepVar::VehicleCount => cfg.network.num_vehicles = count()?,
            SweepVar::HuavBandwidth => {
                cfg.channel.bw_vehicle_huav = value * 1e6;
                cfg.channel.bw_huav_node = value * 1e6;
            }
        }
        Ok(())
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVar {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "luav_count" | "luavs" => Ok(SweepVar::LuavCount),
            "vehicle_count" | "vehicles" => Ok(SweepVar::VehicleCount),
            "huav_bandwidth" | "bandwidth" => Ok(SweepVar::HuavBandwidth),
            _ => Err(ExpError::Invalid(format!(
                "unknown sweep '{s}' (expected luav_count, vehicle_count or huav_bandwidth)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    F3,
    F4,
    F5,
}

impl Figure {
    pub fn sweep(self) -> SweepVar {
        match self {
            Figure::F3 => SweepVar::LuavCount,
            Figure::F4 => SweepVar::VehicleCount,
            Figure::F5 => SweepVar::HuavBandwidth,
        }
    }
}

impl FromStr for Figure {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "f3" => Ok(Figure::F3),
            "f4" => Ok(Figure::F4),
            "f5" => Ok(Figure::F5),
            _ => Err(ExpError::Invalid(format!("unknown figure '{s}' (expected f3, f4 or f5)"))),
        }
    }
}

/// Written next to the results so that export knows which cells to expect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    pub agents: Vec<AgentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepVar>,
    /// Ignored without a sweep.
    #[serde(default)]
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub agent: AgentKind,
    pub sweep: String,
    pub value: String,
    pub seed: u64,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}={}/seed{}", self.agent, self.sweep, self.value, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub agent: AgentKind,
    pub sweep: String,
    pub value: String,
    pub seed: u64,
    pub episodes: usize,
    pub window: usize,
    pub config_hash: String,
    pub code_version: String,
    pub completion_rate: f64,
    pub delay: f64,
    pub energy: f64,
    pub utility: f64,
    pub hard_violations: u32,
}

impl ResultRow {
    pub fn key(&self) -> CellKey {
        CellKey { agent: self.agent, sweep: self.sweep.clone(), value: self.value.clone(), seed: self.seed }
    }
}

pub const RESULT_HEADER: [&str; 13] = [
    "agent",
    "sweep",
    "value",
    "seed",
    "episodes",
    "window",
    "config_hash",
    "code_version",
    "completion_rate",
    "delay",
    "energy",
    "utility",
    "hard_violations",
];

/// Canonical text of a sweep value, used in keys and file names.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Resolves a user-supplied output path against the output-root variable.
pub fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

/// One cell of the factorial design with its concrete configuration.
pub struct Cell {
    pub key: CellKey,
    pub cfg: SimConfig,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExpError> {
        if self.seeds.is_empty() {
            return Err(ExpError::Invalid("seeds list is empty".into()));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(ExpError::Invalid("seeds must be distinct".into()));
        }
        if self.agents.is_empty() {
            return Err(ExpError::Invalid("agent list is empty".into()));
        }
        if self.episodes == 0 {
            return Err(ExpError::Invalid("episodes must be positive".into()));
        }
        if self.sweep.is_some() {
            if self.values.is_empty() {
                return Err(ExpError::Invalid("sweep values are empty".into()));
            }
            let vals: BTreeSet<String> = self.values.iter().map(|&v| format_value(v)).collect();
            if vals.len() != self.values.len() {
                return Err(ExpError::Invalid("sweep values must be distinct".into()));
            }
        }
        for c in self.cells()? {
            c.cfg.validate()?;
        }
        Ok(())
    }

    /// Full factorial agent × value × seed, in that nesting order.
    pub fn cells(&self) -> Result<Vec<Cell>, ExpError> {
        let values: Vec<Option<f64>> = match self.sweep {
            Some(_) => self.values.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for &agent in &self.agents {
            for v in &values {
                for &seed in &self.seeds {
                    let mut cfg = self.base.clone();
                    cfg.seed = seed;
                    let (sweep, value) = match (self.sweep, v) {
                        (Some(s), Some(v)) => {
                            s.apply(&mut cfg, *v)?;
                            (s.name().to_string(), format_value(*v))
                        }
                        _ => ("none".to_string(), "base".to_string()),
                    };
                    out.push(Cell { key: CellKey { agent, sweep, value, seed }, cfg });
                }
            }
        }
        Ok(out)
    }

    pub fn results_path(&self) -> PathBuf {
        self.out_dir.join(RESULTS_FILE)
    }

    pub fn series_path(&self, key: &CellKey) -> PathBuf {
        self.out_dir
            .join("series")
            .join(format!("{}_{}_{}_seed{}.csv", key.agent, key.sweep, key.value, key.seed))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    pub fn from_toml(text: &str, out_dir: PathBuf) -> Result<Self, ExpError> {
        let mut s: ExperimentSpec =
            toml::from_str(text).map_err(|e| ExpError::Invalid(format!("manifest: {e}")))?;
        s.out_dir = out_dir;
        Ok(s)
    }
}

/// Mean over the last `ceil(FINAL_WINDOW · n)` episodes (at least one).
pub fn final_window(series: &[EpisodeMetrics]) -> (usize, [f64; 4]) {
    let n = series.len();
    let w = ((FINAL_WINDOW * n as f64).ceil() as usize).clamp(1.min(n), n);
    let tail = &series[n - w..];
    let mut acc = [0.0; 4];
    for m in tail {
        acc[0] += m.completion_rate;
        acc[1] += m.delay;
        acc[2] += m.energy;
        acc[3] += m.utility;
    }
    if w > 0 {
        for a in acc.iter_mut() {
            *a /= w as f64;
        }
    }
    (w, acc)
}

fn unwritable(path: &Path) -> impl FnOnce(io::Error) -> ExpError + '_ {
    move |source| ExpError::Unwritable { path: path.to_path_buf(), source }
}

/// Reads an existing results table, or returns an empty one if absent.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, ExpError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let corrupt = |reason: String| ExpError::Corrupt { path: path.to_path_buf(), reason };
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers().map_err(|e| corrupt(e.to_string()))?.clone();
    if header.iter().ne(RESULT_HEADER.iter().copied()) {
        return Err(corrupt(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, r) in rdr.deserialize().enumerate() {
        rows.push(r.map_err(|e| corrupt(format!("row {}: {e}", i + 1)))?);
    }
    Ok(rows)
}

/// Writes an episode metrics series as CSV.
pub fn write_series(path: &Path, series: &[EpisodeMetrics]) -> Result<(), ExpError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(unwritable(dir))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for m in series {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series(path: &Path) -> Result<Vec<EpisodeMetrics>, ExpError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Runs every missing cell and appends one summary row per cell. Cells whose
/// key already appears in the results file are skipped, so an interrupted run
/// resumes where it stopped and a finished one is left untouched.
pub fn run_experiment(spec: &ExperimentSpec, mut progress: impl FnMut(&ResultRow)) -> Result<Vec<ResultRow>, ExpError> {
    spec.validate()?;
    let dir = &spec.out_dir;
    fs::create_dir_all(dir).map_err(unwritable(dir))?;
    let path = spec.results_path();
    let mut rows = read_results(&path)?;
    let done: BTreeMap<CellKey, &ResultRow> = rows.iter().map(|r| (r.key(), r)).collect();
    let cells = spec.cells()?;
    for cell in &cells {
        if let Some(r) = done.get(&cell.key) {
            let hash = cell.cfg.hash();
            if r.config_hash != hash || r.episodes != spec.episodes || r.code_version != CODE_VERSION {
                return Err(ExpError::Invalid(format!(
                    "{} already holds {} from config {} ({} episodes, version {}), this run is config {hash} ({} episodes, version {CODE_VERSION}); use another --out",
                    path.display(),
                    cell.key,
                    r.config_hash,
                    r.episodes,
                    r.code_version,
                    spec.episodes
                )));
            }
        }
    }
    let done: BTreeSet<CellKey> = done.into_keys().collect();
    let manifest = dir.join(MANIFEST_FILE);
    let text = spec.to_toml();
    if fs::read_to_string(&manifest).ok().as_deref() != Some(text.as_str()) {
        fs::write(&manifest, &text).map_err(unwritable(&manifest))?;
    }
    let fresh = !path.exists();
    let file = OpenOptions::new().create(true).append(true).open(&path).map_err(unwritable(&path))?;
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        out.write_record(RESULT_HEADER)?;
        out.flush()?;
    }

    for cell in cells {
        if done.contains(&cell.key) {
            continue;
        }
        let scn = cell.cfg.validate()?;
        let (_, series) =
            agents::train(&scn, cell.key.agent, spec.episodes, cell.key.seed, None::<&mut TraceWriter<io::Sink>>)?;
        write_series(&spec.series_path(&cell.key), &series)?;
        let (window, [completion_rate, delay, energy, utility]) = final_window(&series);
        let row = ResultRow {
            agent: cell.key.agent,
            sweep: cell.key.sweep.clone(),
            value: cell.key.value.clone(),
            seed: cell.key.seed,
            episodes: spec.episodes,
            window,
            config_hash: cell.cfg.hash(),
            code_version: CODE_VERSION.to_string(),
            completion_rate,
            delay,
            energy,
            utility,
            hard_violations: series.iter().map(|m| m.hard_violations).sum(),
        };
        out.serialize(&row)?;
        out.flush()?;
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub agent: AgentKind,
    pub sweep: String,
    pub value: String,
    pub n: usize,
    pub completion_rate_mean: f64,
    pub completion_rate_std: f64,
    pub delay_mean: f64,
    pub delay_std: f64,
    pub energy_mean: f64,
    pub energy_std: f64,
    pub utility_mean: f64,
    pub utility_std: f64,
}

/// Arithmetic mean and unbiased standard deviation (0 for a single sample).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Mean ± std per (agent, value) of the figure's sweep. When `expected`
/// is given, every one of its cells must be present.
pub fn export_plotdata(
    rows: &[ResultRow],
    figure: Figure,
    expected: Option<&ExperimentSpec>,
) -> Result<Vec<PlotRow>, ExpError> {
    let sweep = figure.sweep().name();
    if let Some(spec) = expected {
        if spec.sweep != Some(figure.sweep()) {
            return Err(ExpError::Invalid(format!("experiment does not sweep {sweep}")));
        }
        let have: BTreeSet<CellKey> = rows.iter().map(ResultRow::key).collect();
        let missing: Vec<String> =
            spec.cells()?.into_iter().filter(|c| !have.contains(&c.key)).map(|c| c.key.to_string()).collect();
        if !missing.is_empty() {
            return Err(ExpError::MissingCells(missing.join(", ")));
        }
    }
    let mut groups: BTreeMap<(AgentKind, OrderedValue), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.sweep == sweep) {
        groups.entry((r.agent, OrderedValue(r.value.clone()))).or_default().push(r);
    }
    if groups.is_empty() {
        return Err(ExpError::MissingCells(format!("no {sweep} rows")));
    }
    Ok(groups
        .into_iter()
        .map(|((agent, value), rs)| {
            let col = |f: fn(&ResultRow) -> f64| mean_std(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (cm, cs) = col(|r| r.completion_rate);
            let (dm, ds) = col(|r| r.delay);
            let (em, es) = col(|r| r.energy);
            let (um, us) = col(|r| r.utility);
            PlotRow {
                agent,
                sweep: sweep.to_string(),
                value: value.0,
                n: rs.len(),
                completion_rate_mean: cm,
                completion_rate_std: cs,
                delay_mean: dm,
                delay_std: ds,
                energy_mean: em,
                energy_std: es,
                utility_mean: um,
                utility_std: us,
            }
        })
        .collect())
}

/// Sweep value ordered numerically when it parses, textually otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
struct OrderedValue(String);

impl Ord for OrderedValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self.0.parse::<f64>(), other.0.parse::<f64>()) {
            (Ok(a), Ok(b)) => a.total_cmp(&b).then_with(|| self.0.cmp(&other.0)),
            _ => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for OrderedValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

pub fn write_plotdata(path: &Path, rows: &[PlotRow]) -> Result<(), ExpError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(unwritable(dir))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads the manifest and results of a finished experiment directory.
pub fn load_experiment(dir: &Path) -> Result<(ExperimentSpec, Vec<ResultRow>), ExpError> {
    let manifest = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest)
        .map_err(|e| ExpError::Invalid(format!("cannot read {}: {e}", manifest.display())))?;
    let spec = ExperimentSpec::from_toml(&text, dir.to_path_buf())?;
    let rows = read_results(&spec.results_path())?;
    Ok((spec, rows))
}

/// Writes a one-line-per-record trace alongside training.
pub fn open_trace(path: &Path) -> Result<TraceWriter<io::BufWriter<fs::File>>, ExpError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(unwritable(dir))?;
    }
    let f = fs::File::create(path).map_err(unwritable(path))?;
    Ok(TraceWriter::new(io::BufWriter::new(f)))
}

/// Flushes a trace writer.
pub fn close_trace(t: TraceWriter<io::BufWriter<fs::File>>) -> Result<(), ExpError> {
    t.into_inner().flush()?;
    Ok(())
}
