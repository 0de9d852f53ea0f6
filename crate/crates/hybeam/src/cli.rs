//! Scenario configuration, the Monte-Carlo experiment runner, and CSV
//! emission.
//!
//! A scenario pairs one channel setup with lists of RF-chain counts, SNR
//! points, and precoding schemes. Each trial draws one channel (seeded as
//! `seed XOR trial`, so trials are order-independent) and reuses it for every
//! scheme and SNR point. Raw per-trial rows go to a CSV with fixed columns and
//! 12-significant-digit floats so reruns diff cleanly; summaries are a
//! separate pass over the written file.

use rayon::prelude::*;
use serde::Deserialize;
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::fs;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::array::{ArrayGeometry, ArrayKind};
use crate::channel::{
    freq_response, generate_clustered, write_channel_dump, ClusterConfig, FreqChannel, OfdmGrid,
};
use crate::error::{Error, Result};
use crate::evaluator::{mutual_information, relaxed_objective};
use crate::partitioner::{
    exhaustive_partition, greedy_partition, PartitionScore, DEFAULT_EXHAUSTIVE_LIMIT,
};
use crate::precoder_full::{design_bb, design_rf_fully, effective_channel, phase_project};
use crate::precoder_subarray::{
    design_rf_subarray, fixed_partition, subarray_objective, FixedKind, Partition,
};
use crate::spectral::{sample_covariance, Covariance};
use crate::CMatrix;

/// One precoding scheme to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeSpec {
    FullyDigital,
    FullyConnected { constrained: bool },
    FixedSubarray(FixedKind),
    DynamicGreedy,
    DynamicExhaustive { score: PartitionScore },
    DynamicBestOfFixed,
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::FullyDigital => write!(f, "fully-digital"),
            SchemeSpec::FullyConnected { constrained: false } => write!(f, "fully-connected"),
            SchemeSpec::FullyConnected { constrained: true } => {
                write!(f, "fully-connected-constrained")
            }
            SchemeSpec::FixedSubarray(kind) => write!(f, "fixed-{kind}"),
            SchemeSpec::DynamicGreedy => write!(f, "dynamic-greedy"),
            SchemeSpec::DynamicExhaustive {
                score: PartitionScore::ApproxLambda1,
            } => write!(f, "dynamic-exhaustive"),
            SchemeSpec::DynamicExhaustive {
                score: PartitionScore::ExactLambda1,
            } => write!(f, "dynamic-exhaustive-exact"),
            SchemeSpec::DynamicBestOfFixed => write!(f, "dynamic-best-of-fixed"),
        }
    }
}

impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fully-digital" => Ok(SchemeSpec::FullyDigital),
            "fully-connected" => Ok(SchemeSpec::FullyConnected { constrained: false }),
            "fully-connected-constrained" => Ok(SchemeSpec::FullyConnected { constrained: true }),
            "dynamic-greedy" => Ok(SchemeSpec::DynamicGreedy),
            "dynamic-exhaustive" => Ok(SchemeSpec::DynamicExhaustive {
                score: PartitionScore::ApproxLambda1,
            }),
            "dynamic-exhaustive-exact" => Ok(SchemeSpec::DynamicExhaustive {
                score: PartitionScore::ExactLambda1,
            }),
            "dynamic-best-of-fixed" => Ok(SchemeSpec::DynamicBestOfFixed),
            other => {
                if let Some(kind) = other.strip_prefix("fixed-") {
                    Ok(SchemeSpec::FixedSubarray(kind.parse()?))
                } else {
                    Err(Error::Config(format!("unknown scheme {other:?}")))
                }
            }
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub tx: ArrayGeometry,
    pub rx: ArrayGeometry,
    pub n_rf_list: Vec<usize>,
    pub snr_db_list: Vec<f64>,
    pub grid: OfdmGrid,
    pub rolloff: f64,
    pub cluster: ClusterConfig,
    pub trials: u64,
    pub seed: u64,
    pub schemes: Vec<SchemeSpec>,
    pub output: PathBuf,
    pub summary_output: Option<PathBuf>,
    pub workers: usize,
    pub exhaustive_limit: u64,
    /// When false (the default) the `wall_time_ms` column is written as 0 so
    /// reruns of the same scenario are byte-identical.
    pub record_timings: bool,
    /// Append a `channel_hash` column for verifying channel reuse.
    pub channel_hash: bool,
    pub dump_channels: Option<PathBuf>,
    /// Candidate set for `dynamic-best-of-fixed`.
    pub fixed_set: Vec<FixedKind>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("run.trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("run.schemes must not be empty".into()));
        }
        if self.snr_db_list.is_empty() {
            return Err(Error::Config("run.snr_db must not be empty".into()));
        }
        let needs_rf = self
            .schemes
            .iter()
            .any(|s| !matches!(s, SchemeSpec::FullyDigital));
        if needs_rf && self.n_rf_list.is_empty() {
            return Err(Error::Config("run.n_rf must not be empty".into()));
        }
        for &n_rf in &self.n_rf_list {
            if n_rf == 0 || n_rf > self.tx.n_elements() {
                return Err(Error::Config(format!(
                    "run.n_rf entry {n_rf} outside 1..={}",
                    self.tx.n_elements()
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Config("ofdm.rolloff must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    arrays: RawArrays,
    #[serde(default)]
    ofdm: RawOfdm,
    #[serde(default)]
    channel: RawChannel,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArrays {
    tx: String,
    rx: String,
    spacing: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOfdm {
    subcarriers: Option<usize>,
    cyclic_prefix: Option<usize>,
    sample_period: Option<f64>,
    rolloff: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    clusters: Option<usize>,
    subrays: Option<usize>,
    angle_spread_deg: Option<f64>,
    azimuth_range_deg: Option<f64>,
    elevation_range_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    n_rf: Option<Vec<usize>>,
    snr_db: Vec<f64>,
    trials: u64,
    seed: Option<u64>,
    schemes: Vec<String>,
    output: String,
    summary_output: Option<String>,
    workers: Option<usize>,
    exhaustive_limit: Option<u64>,
    record_timings: Option<bool>,
    channel_hash: Option<bool>,
    dump_channels: Option<String>,
    fixed_set: Option<Vec<String>>,
}

/// Parse `"ula:N"` or `"upa:RxC"`.
pub fn parse_geometry(spec: &str, spacing: f64) -> Result<ArrayGeometry> {
    let err = || {
        Error::Config(format!(
            "array spec {spec:?} must look like \"ula:16\" or \"upa:8x8\""
        ))
    };
    let (kind, dims) = spec.split_once(':').ok_or_else(err)?;
    let geom = match kind {
        "ula" => ArrayGeometry::ula(dims.parse().map_err(|_| err())?),
        "upa" => {
            let (r, c) = dims.split_once('x').ok_or_else(err)?;
            ArrayGeometry::upa(r.parse().map_err(|_| err())?, c.parse().map_err(|_| err())?)
        }
        _ => return Err(err()),
    };
    if geom.n_elements() == 0 {
        return Err(err());
    }
    Ok(geom.with_spacing(spacing))
}

/// Parse a scenario from the `key = value` section format (TOML).
pub fn scenario_from_str(text: &str) -> Result<Scenario> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let spacing = raw.arrays.spacing.unwrap_or(0.5);
    if !(spacing > 0.0) {
        return Err(Error::Config("arrays.spacing must be positive".into()));
    }
    let tx = parse_geometry(&raw.arrays.tx, spacing)?;
    let rx = parse_geometry(&raw.arrays.rx, spacing)?;

    let subcarriers = raw.ofdm.subcarriers.unwrap_or(64);
    let cp_len = raw.ofdm.cyclic_prefix.unwrap_or(subcarriers / 4);
    let grid = OfdmGrid::new(subcarriers, cp_len, raw.ofdm.sample_period.unwrap_or(1.0))
        .map_err(|e| Error::Config(format!("ofdm: {e}")))?;

    let defaults = ClusterConfig::default();
    let cluster = ClusterConfig {
        n_cluster: raw.channel.clusters.unwrap_or(defaults.n_cluster),
        n_subray: raw.channel.subrays.unwrap_or(defaults.n_subray),
        angle_spread_deg: raw
            .channel
            .angle_spread_deg
            .unwrap_or(defaults.angle_spread_deg),
        az_range_deg: raw
            .channel
            .azimuth_range_deg
            .unwrap_or(defaults.az_range_deg),
        el_range_deg: raw
            .channel
            .elevation_range_deg
            .unwrap_or(defaults.el_range_deg),
    };
    if cluster.n_cluster == 0 || cluster.n_subray == 0 {
        return Err(Error::Config(
            "channel.clusters and channel.subrays must be at least 1".into(),
        ));
    }

    let schemes: Vec<SchemeSpec> = raw
        .run
        .schemes
        .iter()
        .map(|s| {
            s.parse::<SchemeSpec>()
                .map_err(|e| Error::Config(e.to_string()))
        })
        .collect::<Result<_>>()?;

    let fixed_set: Vec<FixedKind> = match raw.run.fixed_set {
        Some(names) => names
            .iter()
            .map(|s| {
                s.parse::<FixedKind>()
                    .map_err(|e| Error::Config(e.to_string()))
            })
            .collect::<Result<_>>()?,
        None => match tx.kind {
            ArrayKind::Ula { .. } => vec![FixedKind::Adjacent, FixedKind::Interlaced],
            ArrayKind::Upa { .. } => FixedKind::ALL.to_vec(),
        },
    };

    let scenario = Scenario {
        tx,
        rx,
        n_rf_list: raw.run.n_rf.unwrap_or_default(),
        snr_db_list: raw.run.snr_db,
        grid,
        rolloff: raw.ofdm.rolloff.unwrap_or(1.0),
        cluster,
        trials: raw.run.trials,
        seed: raw.run.seed.unwrap_or(0),
        schemes,
        output: PathBuf::from(raw.run.output),
        summary_output: raw.run.summary_output.map(PathBuf::from),
        workers: raw.run.workers.unwrap_or(1),
        exhaustive_limit: raw.run.exhaustive_limit.unwrap_or(DEFAULT_EXHAUSTIVE_LIMIT),
        record_timings: raw.run.record_timings.unwrap_or(false),
        channel_hash: raw.run.channel_hash.unwrap_or(false),
        dump_channels: raw.run.dump_channels.map(PathBuf::from),
        fixed_set,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn scenario_from_file(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    scenario_from_str(&text)
}

/// One raw result line.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: String,
    pub snr_db: f64,
    pub n_rf: usize,
    pub n_tx: usize,
    pub trial: u64,
    /// Per-subcarrier mutual information, bps/Hz.
    pub spectral_efficiency: f64,
    pub relaxed_objective: f64,
    /// `csv_cell` form of the subarray partition, when one exists.
    pub partition: Option<String>,
    pub wall_time_ms: u64,
    pub channel_hash: Option<u64>,
}

/// 12-significant-digit float form used everywhere in result CSVs.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

const CSV_HEADER: &str =
    "scheme,snr_db,n_rf,n_tx,trial,spectral_efficiency,relaxed_objective,partition,wall_time_ms";

pub fn write_results_csv(
    rows: &[ResultRow],
    include_hash: bool,
    out: &mut impl Write,
) -> Result<()> {
    if include_hash {
        writeln!(out, "{CSV_HEADER},channel_hash")?;
    } else {
        writeln!(out, "{CSV_HEADER}")?;
    }
    for row in rows {
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.scheme,
            fmt_float(row.snr_db),
            row.n_rf,
            row.n_tx,
            row.trial,
            fmt_float(row.spectral_efficiency),
            fmt_float(row.relaxed_objective),
            row.partition.as_deref().unwrap_or(""),
            row.wall_time_ms,
        )?;
        if include_hash {
            write!(out, ",{}", row.channel_hash.unwrap_or(0))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_results_csv(input: &mut impl BufRead) -> Result<Vec<ResultRow>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("results CSV is empty"))??;
    let with_hash = match header.trim_end() {
        h if h == CSV_HEADER => false,
        h if h == format!("{CSV_HEADER},channel_hash") => true,
        other => {
            return Err(Error::invalid(format!(
                "unexpected results CSV header: {other:?}"
            )))
        }
    };
    let expected = if with_hash { 10 } else { 9 };
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            return Err(Error::invalid(format!(
                "results CSV line {}: expected {} fields, got {}",
                lineno + 2,
                expected,
                fields.len()
            )));
        }
        let bad =
            |what: &str| Error::invalid(format!("results CSV line {}: bad {what}", lineno + 2));
        rows.push(ResultRow {
            scheme: fields[0].to_string(),
            snr_db: fields[1].parse().map_err(|_| bad("snr_db"))?,
            n_rf: fields[2].parse().map_err(|_| bad("n_rf"))?,
            n_tx: fields[3].parse().map_err(|_| bad("n_tx"))?,
            trial: fields[4].parse().map_err(|_| bad("trial"))?,
            spectral_efficiency: fields[5].parse().map_err(|_| bad("spectral_efficiency"))?,
            relaxed_objective: fields[6].parse().map_err(|_| bad("relaxed_objective"))?,
            partition: if fields[7].is_empty() {
                None
            } else {
                Some(fields[7].to_string())
            },
            wall_time_ms: fields[8].parse().map_err(|_| bad("wall_time_ms"))?,
            channel_hash: if with_hash {
                Some(fields[9].parse().map_err(|_| bad("channel_hash"))?)
            } else {
                None
            },
        });
    }
    Ok(rows)
}

/// Mean/std of spectral efficiency per (scheme, snr, n_rf) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: String,
    pub snr_db: f64,
    pub n_rf: usize,
    pub trials: u64,
    pub mean_se: f64,
    pub std_se: f64,
}

/// Group rows by (scheme, snr, n_rf) in first-appearance order and compute
/// mean and sample standard deviation of the spectral efficiency.
pub fn aggregate(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, String, usize)> = Vec::new();
    let mut buckets: std::collections::HashMap<(String, String, usize), Vec<f64>> =
        std::collections::HashMap::new();
    for row in rows {
        let key = (row.scheme.clone(), fmt_float(row.snr_db), row.n_rf);
        if !buckets.contains_key(&key) {
            order.push(key.clone());
        }
        buckets
            .entry(key)
            .or_default()
            .push(row.spectral_efficiency);
    }
    order
        .into_iter()
        .map(|key| {
            let values = &buckets[&key];
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            SummaryRow {
                scheme: key.0,
                snr_db: key.1.parse().expect("formatted float"),
                n_rf: key.2,
                trials: values.len() as u64,
                mean_se: mean,
                std_se: var.sqrt(),
            }
        })
        .collect()
}

pub fn write_summary_csv(rows: &[SummaryRow], out: &mut impl Write) -> Result<()> {
    writeln!(out, "scheme,snr_db,n_rf,trials,mean_se,std_se")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.scheme,
            fmt_float(r.snr_db),
            r.n_rf,
            r.trials,
            fmt_float(r.mean_se),
            fmt_float(r.std_se),
        )?;
    }
    Ok(())
}

fn hash_channel(ch: &FreqChannel) -> u64 {
    let mut h = DefaultHasher::new();
    (ch.subcarriers(), ch.n_rx(), ch.n_tx()).hash(&mut h);
    for m in ch.matrices() {
        for z in m.iter() {
            z.re.to_bits().hash(&mut h);
            z.im.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

/// RF design outcome for one (scheme, n_rf) cell.
struct RfDesign {
    f_rf: CMatrix,
    partition: Option<Partition>,
}

fn design_rf_for_scheme(
    scheme: SchemeSpec,
    scenario: &Scenario,
    cov: &Covariance,
    n_rf: usize,
) -> Result<RfDesign> {
    match scheme {
        SchemeSpec::FullyDigital => Ok(RfDesign {
            f_rf: CMatrix::identity(cov.dim(), cov.dim()),
            partition: None,
        }),
        SchemeSpec::FullyConnected { constrained } => {
            let f = design_rf_fully(cov, n_rf)?;
            Ok(RfDesign {
                f_rf: if constrained { phase_project(&f) } else { f },
                partition: None,
            })
        }
        SchemeSpec::FixedSubarray(kind) => {
            let part = fixed_partition(kind, &scenario.tx, n_rf)?;
            Ok(RfDesign {
                f_rf: design_rf_subarray(cov, &part)?,
                partition: Some(part),
            })
        }
        SchemeSpec::DynamicGreedy => {
            let part = greedy_partition(cov, n_rf)?;
            Ok(RfDesign {
                f_rf: design_rf_subarray(cov, &part)?,
                partition: Some(part),
            })
        }
        SchemeSpec::DynamicExhaustive { score } => {
            let (part, _) =
                exhaustive_partition(cov, n_rf, score, false, scenario.exhaustive_limit)?;
            Ok(RfDesign {
                f_rf: design_rf_subarray(cov, &part)?,
                partition: Some(part),
            })
        }
        SchemeSpec::DynamicBestOfFixed => {
            let mut best: Option<(f64, Partition)> = None;
            for &kind in &scenario.fixed_set {
                let Ok(part) = fixed_partition(kind, &scenario.tx, n_rf) else {
                    continue; // kind incompatible with this geometry/n_rf
                };
                let obj = subarray_objective(cov, &part)?;
                if best.as_ref().map_or(true, |(b, _)| obj > *b) {
                    best = Some((obj, part));
                }
            }
            let (_, part) = best.ok_or_else(|| {
                Error::invalid(format!(
                    "no fixed subarray kind in {:?} fits {} antennas with {} chains",
                    scenario.fixed_set,
                    scenario.tx.n_elements(),
                    n_rf
                ))
            })?;
            Ok(RfDesign {
                f_rf: design_rf_subarray(cov, &part)?,
                partition: Some(part),
            })
        }
    }
}

fn snr_db_to_p_tot(snr_db: f64, subcarriers: usize) -> f64 {
    // sigma2 = 1 and P_tot = K * SNR: the average per-subcarrier transmit
    // power equals the linear SNR.
    subcarriers as f64 * 10f64.powf(snr_db / 10.0)
}

fn run_trial(scenario: &Scenario, trial: u64) -> Result<(Vec<ResultRow>, Vec<String>)> {
    let seed = scenario.seed ^ trial;
    let paths = generate_clustered(&scenario.cluster, &scenario.grid, seed);
    let ch = freq_response(
        &paths,
        &scenario.tx,
        &scenario.rx,
        &scenario.grid,
        scenario.rolloff,
    )?;
    if let Some(dir) = &scenario.dump_channels {
        fs::create_dir_all(dir)?;
        let mut file = fs::File::create(dir.join(format!("trial_{trial:05}.csv")))?;
        write_channel_dump(&ch, &mut file)?;
    }
    let hash = scenario.channel_hash.then(|| hash_channel(&ch));
    let cov = sample_covariance(&ch);
    let n_tx = scenario.tx.n_elements();
    let sigma2 = 1.0;

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for &scheme in &scenario.schemes {
        // The fully-digital baseline does not depend on the RF chain count;
        // it is evaluated once per trial with n_rf reported as n_tx.
        let rf_counts: &[usize] = if matches!(scheme, SchemeSpec::FullyDigital) {
            &[0]
        } else {
            &scenario.n_rf_list
        };
        for &n_rf in rf_counts {
            let design_start = Instant::now();
            let designed = design_rf_for_scheme(scheme, scenario, &cov, n_rf);
            let design = match designed {
                Ok(d) => d,
                Err(e) => {
                    errors.push(format!("trial {trial}, scheme {scheme}, n_rf {n_rf}: {e}"));
                    continue;
                }
            };
            let design_ms = design_start.elapsed().as_secs_f64() * 1e3;
            let relaxed = relaxed_objective(&ch, &design.f_rf)?;
            let eff = effective_channel(&ch, &design.f_rf)?;
            for &snr_db in &scenario.snr_db_list {
                let eval_start = Instant::now();
                let p_tot = snr_db_to_p_tot(snr_db, scenario.grid.subcarriers);
                let pre = design_bb(&eff, p_tot, sigma2, &design.f_rf)?;
                let mi = mutual_information(&ch, &pre, sigma2);
                let eval_ms = eval_start.elapsed().as_secs_f64() * 1e3;
                rows.push(ResultRow {
                    scheme: scheme.to_string(),
                    snr_db,
                    n_rf: if matches!(scheme, SchemeSpec::FullyDigital) {
                        n_tx
                    } else {
                        n_rf
                    },
                    n_tx,
                    trial,
                    spectral_efficiency: mi.per_subcarrier,
                    relaxed_objective: relaxed,
                    partition: design.partition.as_ref().map(|p| p.csv_cell()),
                    wall_time_ms: if scenario.record_timings {
                        (design_ms + eval_ms).round() as u64
                    } else {
                        0
                    },
                    channel_hash: hash,
                });
            }
        }
    }
    Ok((rows, errors))
}

/// Outcome of [`run`]: rows in (trial, scheme, n_rf, snr) order plus any
/// per-scheme failures (an exhaustive-search guard, an incompatible fixed
/// layout) that did not stop the rest of the run.
#[derive(Debug)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub scheme_errors: Vec<String>,
}

/// Execute every trial of a scenario. Trials run concurrently on
/// `scenario.workers` threads; output order does not depend on scheduling.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(scenario.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let per_trial: Vec<Result<(Vec<ResultRow>, Vec<String>)>> = pool.install(|| {
        (0..scenario.trials)
            .into_par_iter()
            .map(|t| run_trial(scenario, t))
            .collect()
    });
    let mut rows = Vec::new();
    let mut scheme_errors = Vec::new();
    for r in per_trial {
        let (mut trial_rows, mut errs) = r?;
        rows.append(&mut trial_rows);
        scheme_errors.append(&mut errs);
    }
    Ok(RunOutput {
        rows,
        scheme_errors,
    })
}

fn create_with_parents(path: &Path) -> Result<fs::File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::File::create(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Run a scenario and write its CSV outputs. The summary, when requested, is
/// recomputed from the written results file, so re-aggregating that file
/// reproduces it exactly.
pub fn execute(scenario: &Scenario) -> Result<RunOutput> {
    let out = run(scenario)?;
    let mut file = std::io::BufWriter::new(create_with_parents(&scenario.output)?);
    write_results_csv(&out.rows, scenario.channel_hash, &mut file)?;
    file.flush()?;
    drop(file);
    if let Some(summary_path) = &scenario.summary_output {
        let mut reader = std::io::BufReader::new(fs::File::open(&scenario.output)?);
        let reread = read_results_csv(&mut reader)?;
        let summary = aggregate(&reread);
        let mut sfile = std::io::BufWriter::new(create_with_parents(summary_path)?);
        write_summary_csv(&summary, &mut sfile)?;
        sfile.flush()?;
    }
    Ok(out)
}
