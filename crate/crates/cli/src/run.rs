//! The `run` and `cdf` subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use relaylab::analytic::{average_schemes, evaluate_point, throughput_cdf};
use relaylab::model::{NetworkParams, Protocol, Receiver, SchemeSpec, ScMode, UePolar};
use relaylab::simulator::{conditional_throughputs, empirical_cdf, estimate, Placement};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SweepAxis};
use crate::CliError;

/// One line of the `run` CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scheme: &'static str,
    pub receiver: &'static str,
    pub sc_mode: String,
    pub axis: &'static str,
    pub value: Option<f64>,
    pub throughput: f64,
    /// MC standard error, or the integration error estimate of an analytic
    /// cell average.
    pub throughput_se: Option<f64>,
    /// Joules per delivered packet; `inf` when nothing is delivered.
    pub energy_per_packet: f64,
    pub energy_se: Option<f64>,
    pub engine: &'static str,
    pub n_trials: Option<u64>,
    pub seed: Option<u64>,
    /// Only filled in with `--timing`, so that outputs stay reproducible.
    pub wall_time_s: Option<f64>,
    /// Energy per packet over that of the basic scheme, same engine.
    pub energy_normalized: f64,
}

/// One line of the `cdf` CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfRow {
    pub threshold: f64,
    pub prob: f64,
    pub scheme: String,
    pub engine: &'static str,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record wall-clock times in the CSV.
    pub timing: bool,
}

/// Summary of a finished command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rows: usize,
    pub csv_sha256: String,
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Streams rows into a CSV, flushing after each batch so that a later
/// failure leaves the completed rows on disk.
struct RowSink<W: Write> {
    csv: csv::Writer<HashingWriter<W>>,
    rows: usize,
}

impl<W: Write> RowSink<W> {
    fn new(out: W) -> Self {
        let inner = HashingWriter { inner: out, hasher: Sha256::new() };
        Self { csv: csv::WriterBuilder::new().from_writer(inner), rows: 0 }
    }

    fn write_batch<R: Serialize>(&mut self, rows: &[R]) -> Result<(), CliError> {
        for r in rows {
            self.csv.serialize(r)?;
        }
        self.rows += rows.len();
        self.csv.flush()?;
        Ok(())
    }

    fn finish(self) -> Result<RunSummary, CliError> {
        let inner = self.csv.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(RunSummary { rows: self.rows, csv_sha256: hex(&inner.hasher.finalize()) })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn finite_energy(r: relaylab::Result<f64>) -> Result<f64, CliError> {
    match r {
        Ok(e) => Ok(e),
        Err(relaylab::Error::ZeroThroughput) => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}

fn is_plain_basic(s: &SchemeSpec<f64>) -> bool {
    s.protocol == Protocol::Basic && s.receiver == Receiver::Sic && s.sc == ScMode::Off
}

/// Per-scheme `(throughput, throughput_se, energy, energy_se)` of one engine.
type EngineValues = Vec<(f64, Option<f64>, f64, Option<f64>)>;

fn analytic_values(
    cfg: &ExperimentConfig,
    params: &NetworkParams<f64>,
    schemes: &[SchemeSpec<f64>],
) -> Result<EngineValues, CliError> {
    let opts = cfg.analytic.to_options()?;
    match cfg.position {
        Some(pos) => evaluate_point(params, UePolar::new(pos.d_ub, pos.theta_u), schemes, &opts)?
            .iter()
            .map(|o| Ok((o.throughput, None, finite_energy(o.energy_per_packet(params))?, None)))
            .collect(),
        None => average_schemes(params, schemes, &opts)?
            .iter()
            .map(|c| Ok((c.throughput, Some(c.throughput_error), finite_energy(c.energy_per_packet(params))?, None)))
            .collect(),
    }
}

fn mc_values(
    cfg: &ExperimentConfig,
    params: &NetworkParams<f64>,
    schemes: &[SchemeSpec<f64>],
) -> Result<EngineValues, CliError> {
    let placement = match cfg.position {
        Some(pos) => Placement::Fixed(UePolar::new(pos.d_ub, pos.theta_u)),
        None => Placement::CellAverage,
    };
    let est = estimate(params, schemes, placement, &cfg.mc.to_config())?;
    Ok(est
        .schemes
        .iter()
        .map(|s| {
            let e = s.energy_per_packet;
            (s.throughput.mean, Some(s.throughput.se), e.mean, Some(e.se).filter(|se| se.is_finite()))
        })
        .collect())
}

fn evaluate_sweep_point(
    cfg: &ExperimentConfig,
    point: Option<(SweepAxis, f64)>,
    opts: RunOptions,
) -> Result<Vec<ResultRow>, CliError> {
    let (params, schemes) = match point {
        Some((axis, v)) => cfg.at(axis, v)?,
        None => (cfg.params()?, cfg.scheme_specs()?),
    };
    // The basic scheme is always evaluated for the energy normalization.
    let mut all = schemes.clone();
    let basic = match all.iter().position(is_plain_basic) {
        Some(i) => i,
        None => {
            all.push(SchemeSpec::new(Protocol::Basic));
            all.len() - 1
        }
    };
    let mut rows = Vec::new();
    let mut emit = |engine: &'static str, values: EngineValues, wall: f64, mc: bool| {
        let e_basic = values[basic].2;
        for (s, (thr, thr_se, e, e_se)) in schemes.iter().zip(values) {
            rows.push(ResultRow {
                scheme: s.protocol.name(),
                receiver: s.receiver.name(),
                sc_mode: s.sc.label(),
                axis: point.map_or("none", |(a, _)| a.name()),
                value: point.map(|(_, v)| v),
                throughput: thr,
                throughput_se: thr_se,
                energy_per_packet: e,
                energy_se: e_se,
                engine,
                n_trials: mc.then_some(cfg.mc.trials),
                seed: mc.then_some(cfg.mc.seed),
                wall_time_s: opts.timing.then_some(wall),
                energy_normalized: e / e_basic,
            });
        }
    };
    if cfg.engine.analytic() {
        let t0 = Instant::now();
        let v = analytic_values(cfg, &params, &all)?;
        emit("analytic", v, t0.elapsed().as_secs_f64(), false);
    }
    if cfg.engine.mc() {
        let t0 = Instant::now();
        let v = mc_values(cfg, &params, &all)?;
        emit("mc", v, t0.elapsed().as_secs_f64(), true);
    }
    Ok(rows)
}

/// Evaluates every sweep point and streams the rows to `out` in sweep order.
///
/// Points are computed in parallel; if one fails, the rows of all earlier
/// points are written before the error is returned.
pub fn run_to_writer<W: Write>(cfg: &ExperimentConfig, out: W, opts: RunOptions) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let points: Vec<Option<(SweepAxis, f64)>> = match &cfg.sweep {
        Some(s) => s.values.iter().map(|&v| Some((s.axis, v))).collect(),
        None => vec![None],
    };
    let results: Vec<_> = points.par_iter().map(|&p| evaluate_sweep_point(cfg, p, opts)).collect();
    let mut sink = RowSink::new(out);
    for r in results {
        sink.write_batch(&r?)?;
    }
    sink.finish()
}

/// CDF rows of every scheme and engine over the cell.
pub fn cdf_to_writer<W: Write>(cfg: &ExperimentConfig, out: W) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    if cfg.sweep.is_some() || cfg.position.is_some() {
        return Err(CliError::Config("cdf takes neither a sweep nor a fixed position".into()));
    }
    if cfg.cdf.thresholds.is_empty() {
        return Err(CliError::Config("cdf.thresholds is empty".into()));
    }
    let params = cfg.params()?;
    let schemes = cfg.scheme_specs()?;
    let opts = cfg.analytic.to_options()?;
    let mc_cfg = cfg.mc.to_config();
    let th = &cfg.cdf.thresholds;
    let results: Vec<Result<Vec<CdfRow>, CliError>> = schemes
        .par_iter()
        .map(|s| {
            let mut rows = Vec::new();
            let mut push = |curve: relaylab::CdfCurve, engine| {
                for (t, p) in curve.thresholds.iter().zip(&curve.probs) {
                    rows.push(CdfRow { threshold: *t, prob: *p, scheme: s.to_string(), engine });
                }
            };
            if cfg.engine.analytic() {
                push(throughput_cdf(&params, s, th, &opts)?, "analytic");
            }
            if cfg.engine.mc() {
                let samples =
                    conditional_throughputs(&params, s, cfg.cdf.positions, cfg.cdf.trials_per_position, &mc_cfg)?;
                push(empirical_cdf(&samples, th), "mc");
            }
            Ok(rows)
        })
        .collect();
    let mut sink = RowSink::new(out);
    for r in results {
        sink.write_batch(&r?)?;
    }
    sink.finish()
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
    rows: usize,
    csv_sha256: &'a str,
    /// Set when the command failed part-way; the CSV then holds the rows
    /// completed before the failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Path of the sidecar next to `csv`: `results.csv` → `results.csv.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Which of the two CSV-producing commands to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Cdf,
}

/// Runs `command`, writing the CSV to `path` and the sidecar beside it.
pub fn execute_to_file(
    command: Command,
    cfg: &ExperimentConfig,
    path: &Path,
    opts: RunOptions,
) -> Result<RunSummary, CliError> {
    // Config errors are reported before anything is created on disk.
    cfg.validate()?;
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?;
    let out = std::io::BufWriter::new(file);
    let result = match command {
        Command::Run => run_to_writer(cfg, out, opts),
        Command::Cdf => cdf_to_writer(cfg, out),
    };
    // The hash of a partial CSV is recomputed from disk.
    let (rows, hash, error) = match &result {
        Ok(s) => (s.rows, s.csv_sha256.clone(), None),
        Err(e) => {
            let bytes = std::fs::read(path)?;
            let rows = bytes.iter().filter(|&&b| b == b'\n').count().saturating_sub(1);
            (rows, hex(&Sha256::digest(&bytes)), Some(e.to_string()))
        }
    };
    let mut resolved = cfg.clone();
    resolved.output = Some(path.to_path_buf());
    let sidecar = Sidecar {
        command: match command {
            Command::Run => "run",
            Command::Cdf => "cdf",
        },
        version: env!("CARGO_PKG_VERSION"),
        config: &resolved,
        rows,
        csv_sha256: &hash,
        error,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("config serializes");
    std::fs::write(sidecar_path(path), json + "\n")?;
    result
}
