//! Replicated synthetic studies: sample, detect with every method, score.

use std::io::{BufRead, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{sample, simulation_presets, GridPoint, SimCase, StudyPreset};
use crate::kmeans::KmeansOptions;
use crate::metrics::{accuracy_rate, evaluate};
use crate::modularity::{estimate_k_all, ModularityMetric, DEFAULT_K_CANDIDATES};
use crate::rng::derive_seed;
use crate::spectral::{detect, DetectOptions, MethodId, TauSpec};

/// Environment variable that bounds the worker pool.
pub const THREADS_ENV: &str = "RDSOS_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Full,
    Desk,
}

impl Scale {
    pub fn default_reps(self) -> usize {
        match self {
            Scale::Full => 50,
            Scale::Desk => 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub study: u32,
    pub case: SimCase,
    pub reps: usize,
    pub scale: Scale,
    pub seed: u64,
    pub kmeans: KmeansOptions,
    /// Restricts the preset's method list.
    pub methods: Option<Vec<MethodId>>,
    /// Runs the K-estimation grid with this many candidates.
    pub estimate_k: Option<usize>,
    /// Keeps only these grid indices; seeds still use the full-grid index.
    pub grid_filter: Option<Vec<usize>>,
}

impl SimulationConfig {
    pub fn new(study: u32, case: SimCase, scale: Scale, seed: u64) -> Self {
        SimulationConfig {
            study,
            case,
            reps: scale.default_reps(),
            scale,
            seed,
            kmeans: KmeansOptions::default(),
            methods: None,
            estimate_k: None,
            grid_filter: None,
        }
    }

    pub fn with_k_estimation(mut self) -> Self {
        self.estimate_k = Some(DEFAULT_K_CANDIDATES);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub study: u32,
    pub case: String,
    pub sweep: String,
    pub value: f64,
    pub method: String,
    /// Replicate index, or `mean` for aggregated rows.
    pub replicate: String,
    pub clustering_error: f64,
    pub hamming_error: f64,
    pub ari: f64,
    pub nmi: f64,
    /// `ok`, `error: ...` for failed replicates, `ok m/r` for means over `m` of `r`.
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KestRow {
    pub study: u32,
    pub case: String,
    pub sweep: String,
    pub value: f64,
    pub method: String,
    pub replicate: String,
    /// Estimated K on replicate rows, accuracy rate on mean rows.
    pub sos: f64,
    pub mnavrg: f64,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub value: f64,
    pub method: String,
    pub replicate: usize,
    pub seconds: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsTable {
    pub metrics: Vec<MetricRow>,
    pub kest: Vec<KestRow>,
    pub timings: Vec<TimingRow>,
}

fn write_rows<W: Write, T: Serialize>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows<R: BufRead, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

impl ResultsTable {
    pub fn write_metrics_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.metrics, w)
    }

    pub fn write_kest_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.kest, w)
    }

    /// Wall times, kept apart so the metric files stay reproducible.
    pub fn write_timings_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.timings, w)
    }

    pub fn read_metrics_csv<R: BufRead>(r: R) -> Result<Vec<MetricRow>> {
        read_rows(r)
    }

    pub fn read_kest_csv<R: BufRead>(r: R) -> Result<Vec<KestRow>> {
        read_rows(r)
    }
}

/// Mean rows for replicate rows sharing `(value, method)`, in first-seen order.
pub fn mean_rows(rows: &[MetricRow]) -> Vec<MetricRow> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in rows.iter().filter(|r| r.replicate != "mean") {
        if !keys.iter().any(|(v, m)| v.to_bits() == r.value.to_bits() && *m == r.method) {
            keys.push((r.value, r.method.clone()));
        }
    }
    keys.into_iter()
        .map(|(value, method)| {
            let group: Vec<&MetricRow> = rows
                .iter()
                .filter(|r| r.replicate != "mean" && r.value.to_bits() == value.to_bits() && r.method == method)
                .collect();
            let ok: Vec<&&MetricRow> = group.iter().filter(|r| r.status == "ok").collect();
            let mean = |f: fn(&MetricRow) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            let first = group[0];
            MetricRow {
                study: first.study,
                case: first.case.clone(),
                sweep: first.sweep.clone(),
                value,
                method,
                replicate: "mean".into(),
                clustering_error: mean(|r| r.clustering_error),
                hamming_error: mean(|r| r.hamming_error),
                ari: mean(|r| r.ari),
                nmi: mean(|r| r.nmi),
                status: format!("ok {}/{}", ok.len(), group.len()),
            }
        })
        .collect()
}

fn kest_means(rows: &[KestRow], true_k: usize) -> Vec<KestRow> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(v, m)| v.to_bits() == r.value.to_bits() && *m == r.method) {
            keys.push((r.value, r.method.clone()));
        }
    }
    keys.into_iter()
        .map(|(value, method)| {
            let group: Vec<&KestRow> =
                rows.iter().filter(|r| r.value.to_bits() == value.to_bits() && r.method == method).collect();
            let ok: Vec<&&KestRow> = group.iter().filter(|r| r.status == "ok").collect();
            let rate = |f: fn(&KestRow) -> f64| {
                let ks: Vec<usize> = ok.iter().map(|r| f(r) as usize).collect();
                accuracy_rate(&ks, true_k)
            };
            let first = group[0];
            KestRow {
                study: first.study,
                case: first.case.clone(),
                sweep: first.sweep.clone(),
                value,
                method,
                replicate: "mean".into(),
                sos: rate(|r| r.sos),
                mnavrg: rate(|r| r.mnavrg),
                status: format!("ok {}/{}", ok.len(), group.len()),
            }
        })
        .collect()
}

/// Seed for one replicate of one grid point. Domain `0` draws the model
/// parameters, `1` samples the network, `2 + m` runs method `m`.
pub fn replicate_seed(master: u64, study: u32, case: SimCase, grid: usize, rep: usize, domain: u64) -> u64 {
    derive_seed(master, &[study as u64, case.index(), grid as u64, rep as u64, domain])
}

fn method_index(m: MethodId) -> u64 {
    MethodId::ALL.iter().position(|&x| x == m).expect("known method") as u64
}

struct Cell<'a> {
    grid: usize,
    rep: usize,
    point: &'a GridPoint,
}

fn cells<'a>(points: &'a [GridPoint], reps: usize, filter: Option<&[usize]>) -> Vec<Cell<'a>> {
    points
        .iter()
        .enumerate()
        .filter(|(grid, _)| filter.is_none_or(|f| f.contains(grid)))
        .flat_map(|(grid, point)| (0..reps).map(move |rep| Cell { grid, rep, point }))
        .collect()
}

pub fn run_simulation_study(config: &SimulationConfig) -> Result<ResultsTable> {
    if config.reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    let preset = simulation_presets(config.study, config.case, config.scale == Scale::Desk)?;
    let methods = config.methods.clone().unwrap_or_else(|| preset.methods.clone());
    let mut table = ResultsTable::default();

    let per_cell: Vec<(Vec<MetricRow>, Vec<TimingRow>)> = cells(&preset.points, config.reps, config.grid_filter.as_deref())
        .par_iter()
        .map(|cell| run_cell(config, &preset, &methods, cell))
        .collect();
    let mut replicate_rows = Vec::new();
    for (rows, times) in per_cell {
        replicate_rows.extend(rows);
        table.timings.extend(times);
    }
    let means = mean_rows(&replicate_rows);
    table.metrics = replicate_rows;
    table.metrics.extend(means);

    if let (Some(k_max), Some(points)) = (config.estimate_k, preset.kest_points.as_ref()) {
        let rows: Vec<KestRow> = cells(points, config.reps, config.grid_filter.as_deref())
            .par_iter()
            .flat_map_iter(|cell| run_kest_cell(config, &preset, &methods, k_max, cell))
            .collect();
        let means = kest_means(&rows, 3);
        table.kest = rows;
        table.kest.extend(means);
    }
    Ok(table)
}

fn base_row(config: &SimulationConfig, preset: &StudyPreset, value: f64, method: MethodId, rep: usize) -> MetricRow {
    MetricRow {
        study: config.study,
        case: config.case.name().into(),
        sweep: preset.sweep.name().into(),
        value,
        method: method.name().into(),
        replicate: rep.to_string(),
        clustering_error: f64::NAN,
        hamming_error: f64::NAN,
        ari: f64::NAN,
        nmi: f64::NAN,
        status: "ok".into(),
    }
}

fn run_cell(
    config: &SimulationConfig,
    preset: &StudyPreset,
    methods: &[MethodId],
    cell: &Cell<'_>,
) -> (Vec<MetricRow>, Vec<TimingRow>) {
    let value = cell.point.swept_value(preset.sweep);
    let seed = |domain| replicate_seed(config.seed, config.study, config.case, cell.grid, cell.rep, domain);
    let drawn = cell.point.draw(seed(0)).and_then(|params| sample(&params, seed(1)));
    let mut rows = Vec::new();
    let mut times = Vec::new();
    let (net, truth) = match drawn {
        Ok(x) => x,
        Err(e) => {
            for &m in methods {
                let mut row = base_row(config, preset, value, m, cell.rep);
                row.status = format!("error: {e}");
                rows.push(row);
            }
            return (rows, times);
        }
    };
    let tau = cell.point.nu.map_or(TauSpec::Auto, TauSpec::Nu);
    let opts = DetectOptions {
        tau,
        kmeans: config.kmeans,
        ..Default::default()
    };
    for &m in methods {
        let mut row = base_row(config, preset, value, m, cell.rep);
        let start = Instant::now();
        let outcome = detect(&net, truth.k(), m, &opts, seed(2 + method_index(m)));
        let elapsed = start.elapsed().as_secs_f64();
        match outcome.and_then(|d| evaluate(&truth, &d.partition)) {
            Ok(rep) => {
                row.clustering_error = rep.clustering_error;
                row.hamming_error = rep.hamming_error;
                row.ari = rep.ari;
                row.nmi = rep.nmi;
            }
            Err(e) => row.status = format!("error: {e}"),
        }
        times.push(TimingRow {
            value,
            method: m.name().into(),
            replicate: cell.rep,
            seconds: format!("{elapsed:.3}"),
        });
        rows.push(row);
    }
    (rows, times)
}

fn run_kest_cell(
    config: &SimulationConfig,
    preset: &StudyPreset,
    methods: &[MethodId],
    k_max: usize,
    cell: &Cell<'_>,
) -> Vec<KestRow> {
    let value = cell.point.swept_value(preset.sweep);
    // Offset the grid index so K-estimation draws never reuse metric-run seeds.
    let grid = cell.grid + 1_000_000;
    let seed = |domain| replicate_seed(config.seed, config.study, config.case, grid, cell.rep, domain);
    let drawn = cell.point.draw(seed(0)).and_then(|params| sample(&params, seed(1)));
    let opts = DetectOptions {
        kmeans: config.kmeans,
        ..Default::default()
    };
    methods
        .iter()
        .map(|&m| {
            let mut row = KestRow {
                study: config.study,
                case: config.case.name().into(),
                sweep: preset.sweep.name().into(),
                value,
                method: m.name().into(),
                replicate: cell.rep.to_string(),
                sos: f64::NAN,
                mnavrg: f64::NAN,
                status: "ok".into(),
            };
            let curves = drawn
                .as_ref()
                .map_err(|e| Error::InvalidParameter(e.to_string()))
                .and_then(|(net, _)| estimate_k_all(net, m, k_max, &opts, seed(2 + method_index(m))));
            match curves {
                Ok(curves) => {
                    for c in curves {
                        match c.metric {
                            ModularityMetric::Sos => row.sos = c.best_k as f64,
                            ModularityMetric::Mnavrg => row.mnavrg = c.best_k as f64,
                        }
                    }
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            row
        })
        .collect()
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&t| t > 0)
}
