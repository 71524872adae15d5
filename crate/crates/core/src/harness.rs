//! Configuration files, Monte Carlo experiments and CSV output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_scheme, Scheme};
use crate::channel::{apply_estimation_error, draw_channel_set};
use crate::config::SystemConfig;
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 16] = [
    "scheme",
    "axis",
    "trial",
    "F_bits",
    "EE_bits_per_J",
    "T1",
    "C1U",
    "C2U",
    "C1D",
    "C2D",
    "R1U",
    "R2U",
    "R1D",
    "R2D",
    "iters",
    "ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    PowerDbm,
    XRis,
    YRis,
    RhoE,
    RhoSi,
    #[serde(rename = "n", alias = "N")]
    N,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::PowerDbm => "power_dbm",
            Axis::XRis => "x_ris",
            Axis::YRis => "y_ris",
            Axis::RhoE => "rho_e",
            Axis::RhoSi => "rho_si",
            Axis::N => "n",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::config("experiment.axis", format!("unknown axis `{s}`")))
    }

    /// Current value of this axis in `config`.
    pub fn current(self, config: &SystemConfig) -> f64 {
        match self {
            Axis::PowerDbm => config.power_dbm,
            Axis::XRis => config.geometry.ris[0],
            Axis::YRis => config.geometry.ris[1],
            Axis::RhoE => config.rho_e,
            Axis::RhoSi => config.rho_si,
            Axis::N => config.ris_elements as f64,
        }
    }

    /// Copy of `config` with the axis set to `value`, validated.
    pub fn apply(self, config: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut c = config.clone();
        match self {
            Axis::PowerDbm => c.power_dbm = value,
            Axis::XRis => c.geometry.ris[0] = value,
            Axis::YRis => c.geometry.ris[1] = value,
            Axis::RhoE => c.rho_e = value,
            Axis::RhoSi => c.rho_si = value,
            Axis::N => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::config("experiment.values", format!("N must be a positive integer, got {value}")));
                }
                c.ris_elements = value as usize;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub axis: Axis,
    /// Axis points. Empty means the single value already in the system config.
    pub values: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub out_dir: PathBuf,
    /// Reuse the same channel seeds at every axis point.
    pub paired_axis: bool,
    /// Fill the `ms` column. Off by default so outputs are byte-reproducible.
    pub record_timing: bool,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            name: "default".into(),
            axis: Axis::PowerDbm,
            values: Vec::new(),
            trials: 100,
            schemes: Scheme::ALL.to_vec(),
            out_dir: PathBuf::from("results"),
            paired_axis: false,
            record_timing: false,
        }
    }
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("experiment.trials", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("experiment.schemes", "must list at least one scheme"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("experiment.values", "must be finite"));
        }
        if self.values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("experiment.values", "must be sorted in increasing order"));
        }
        Ok(())
    }

    /// Axis points, falling back to the configured value.
    pub fn points(&self, config: &SystemConfig) -> Vec<f64> {
        if self.values.is_empty() {
            vec![self.axis.current(config)]
        } else {
            self.values.clone()
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    system: SystemConfig,
    experiment: Experiment,
}

/// Parses and validates a JSON config. Missing fields take their defaults.
pub fn parse_config(text: &str) -> Result<(SystemConfig, Experiment)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::from("<root>") } else { path }, e.into_inner().to_string())
    })?;
    file.system.validate()?;
    file.experiment.validate()?;
    Ok((file.system, file.experiment))
}

pub fn load_config(path: &Path) -> Result<(SystemConfig, Experiment)> {
    let text = fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

pub fn save_config(path: &Path, system: &SystemConfig, experiment: &Experiment) -> Result<()> {
    let file = ConfigFile {
        system: system.clone(),
        experiment: experiment.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Per-trial seed from (master, axis index, trial), splitmix64-mixed.
pub fn trial_seed(master: u64, axis_index: u64, trial: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(master) ^ axis_index) ^ trial)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    /// Index of the axis point.
    pub point: usize,
    pub axis: f64,
    pub trial: usize,
    pub f_bits: f64,
    pub ee: f64,
    pub t1: f64,
    /// (C1U, C2U, C1D, C2D).
    pub capacities: [f64; 4],
    /// (R1U, R2U, R1D, R2D).
    pub rates: [f64; 4],
    pub iterations: usize,
    pub ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    /// `None` when the failure happened before any scheme ran.
    pub scheme: Option<Scheme>,
    pub point: usize,
    pub axis: f64,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scheme: Scheme,
    pub point: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<Failure>,
    /// Objective traces of trial 0 at each point.
    pub traces: Vec<Trace>,
}

struct TrialOutput {
    rows: Vec<ResultRow>,
    failures: Vec<Failure>,
    traces: Vec<Trace>,
}

fn run_trial(config: &SystemConfig, experiment: &Experiment, point: usize, axis: f64, trial: usize) -> TrialOutput {
    let mut out = TrialOutput {
        rows: Vec::new(),
        failures: Vec::new(),
        traces: Vec::new(),
    };
    let fail = |scheme, e: Error| Failure {
        scheme,
        point,
        axis,
        trial,
        message: e.to_string(),
    };
    let axis_index = if experiment.paired_axis { 0 } else { point as u64 };
    let seed = trial_seed(config.seed, axis_index, trial as u64);
    let channels = (|| {
        let cfg = experiment.axis.apply(config, axis)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let drawn = draw_channel_set(&cfg, &mut rng)?;
        let (channels, _) = apply_estimation_error(&drawn, cfg.rho_e, &cfg)?;
        Ok::<_, Error>((cfg, channels))
    })();
    let (cfg, channels) = match channels {
        Ok(v) => v,
        Err(e) => {
            out.failures.push(fail(None, e));
            return out;
        }
    };
    for &scheme in &experiment.schemes {
        let start = Instant::now();
        match run_scheme(scheme, &cfg, &channels, seed) {
            Ok(r) => {
                let s = &r.solution;
                out.rows.push(ResultRow {
                    scheme,
                    point,
                    axis,
                    trial,
                    f_bits: r.objective,
                    ee: r.energy_efficiency,
                    t1: s.slots.t1,
                    capacities: s.capacities.to_array(),
                    rates: s.rates.to_array(),
                    iterations: s.iterations,
                    ms: experiment.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3),
                });
                if trial == 0 {
                    out.traces.push(Trace {
                        scheme,
                        point,
                        values: s.trace.clone(),
                    });
                }
            }
            Err(e) => out.failures.push(fail(Some(scheme), e)),
        }
    }
    out
}

/// Runs every (point, trial) in parallel. Output order does not depend on scheduling.
pub fn run_experiment(config: &SystemConfig, experiment: &Experiment) -> Result<ExperimentOutput> {
    config.validate()?;
    experiment.validate()?;
    let points = experiment.points(config);
    let work: Vec<(usize, f64, usize)> = points
        .iter()
        .enumerate()
        .flat_map(|(p, &v)| (0..experiment.trials).map(move |t| (p, v, t)))
        .collect();
    let parts: Vec<TrialOutput> = work
        .par_iter()
        .map(|&(p, v, t)| run_trial(config, experiment, p, v, t))
        .collect();

    let mut out = ExperimentOutput::default();
    for part in parts {
        out.rows.extend(part.rows);
        out.failures.extend(part.failures);
        out.traces.extend(part.traces);
    }
    out.rows.sort_by_key(|r| (r.point, r.scheme, r.trial));
    out.failures.sort_by_key(|f| (f.point, f.trial, f.scheme));
    out.traces.sort_by_key(|t| (t.point, t.scheme));
    Ok(out)
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub axis: f64,
    pub n: usize,
    pub f_mean: f64,
    pub f_std: f64,
    pub ee_mean: f64,
    pub ee_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per point and scheme: mean and sample standard deviation of F and EE.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<((usize, Scheme), f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for r in rows {
        let key = (r.point, r.scheme);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => {
                g.2.push(r.f_bits);
                g.3.push(r.ee);
            }
            None => groups.push((key, r.axis, vec![r.f_bits], vec![r.ee])),
        }
    }
    groups.sort_by_key(|g| g.0);
    groups
        .into_iter()
        .map(|((_, scheme), axis, f, ee)| {
            let (f_mean, f_std) = mean_std(&f);
            let (ee_mean, ee_std) = mean_std(&ee);
            SummaryRow {
                scheme,
                axis,
                n: f.len(),
                f_mean,
                f_std,
                ee_mean,
                ee_std,
            }
        })
        .collect()
}

/// Writes results.csv, summary.csv, failures.csv and one trace file per (scheme, point).
pub fn write_results(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in &output.rows {
        let mut rec = vec![r.scheme.id().to_string(), fmt_f64(r.axis), r.trial.to_string()];
        rec.extend([r.f_bits, r.ee, r.t1].map(fmt_f64));
        rec.extend(r.capacities.map(fmt_f64));
        rec.extend(r.rates.map(fmt_f64));
        rec.push(r.iterations.to_string());
        rec.push(r.ms.map(fmt_f64).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["scheme", "axis", "n", "F_mean", "F_std", "EE_mean", "EE_std"])?;
    for s in summarize(&output.rows) {
        w.write_record([
            s.scheme.id().to_string(),
            fmt_f64(s.axis),
            s.n.to_string(),
            fmt_f64(s.f_mean),
            fmt_f64(s.f_std),
            fmt_f64(s.ee_mean),
            fmt_f64(s.ee_std),
        ])?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("failures.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["scheme", "axis", "trial", "error"])?;
    for f in &output.failures {
        w.write_record([
            f.scheme.map(|s| s.id()).unwrap_or("").to_string(),
            fmt_f64(f.axis),
            f.trial.to_string(),
            f.message.clone(),
        ])?;
    }
    w.flush()?;
    written.push(path);

    for t in &output.traces {
        let path = dir.join(format!("trace_{}_{}.csv", t.scheme.id(), t.point));
        write_trace(&t.values, &path)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_trace(values: &[f64], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "iteration,F_bits")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(f, "{i},{}", fmt_f64(*v))?;
    }
    Ok(())
}

/// `steps` evenly spaced values from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(Error::config("sweep", "need finite bounds and at least one step"));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    let h = (to - from) / (steps - 1) as f64;
    Ok((0..steps).map(|k| if k == steps - 1 { to } else { from + h * k as f64 }).collect())
}
