//! Experiment orchestration: parameter sweeps, worker pools, result files
//! and the fit and oracle pipelines.
//!
//! Work units are circuit realizations (or trajectories for the oracle).
//! Every unit draws from its own seed-addressed stream and partial results
//! are collected in unit order and merged sequentially, so output bytes do
//! not depend on the worker count.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    locate_threshold, power_law_fit, stiffness, window_sensitivity, FitOptions, FitResult, FitWindow,
    StiffnessReport, CRITICAL_STIFFNESS,
};
use crate::circuit::{realize, CircuitSpec, MeasurementMode};
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::filter::dump::TrajectoryDump;
use crate::filter::{run_realization, ExactMoments, InitialState, SnapshotSchedule};
use crate::hydro::{evolve, log_grid, steady_state, HydroParams};
use crate::io::{fmt_f64, list_files, read_json, tag, verify_checksum, write_atomic, write_json, CsvTable};
use crate::observables::{CorrelatorSet, ObservableAccumulator, SnapshotMoments};
use crate::percolation::{
    default_depth, linear_grid, scaling_collapse, threshold_estimate, wrap_probability, CollapseOptions,
    CollapseReport, Crossing, PropagationRule, WrapCurve, WrapEstimate,
};
use crate::rng::derive_seed;

pub const WORKERS_ENV: &str = "SHARPEN_WORKERS";

/// Worker count: explicit value, else the `SHARPEN_WORKERS` override, else
/// the number of available cores.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    let n = match explicit {
        Some(n) => n,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(Error::param("workers", "must be at least 1"));
    }
    Ok(n)
}

/// Runs `f` inside a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// One `(p, L)` point of a trajectory sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPoint {
    pub sites: usize,
    pub p: f64,
    pub depth: usize,
    pub mode: MeasurementMode,
    pub seed: u64,
    pub trajectories: usize,
    pub realizations: usize,
    pub schedule: SnapshotSchedule,
    pub initial: InitialState,
}

impl FilterPoint {
    /// Steady-state protocol: `snapshots` snapshots after a `4 L` burn-in,
    /// one every `L` steps, one trajectory per realization.
    pub fn steady_state(sites: usize, p: f64, realizations: usize, snapshots: usize, seed: u64) -> Self {
        let schedule = SnapshotSchedule::steady_state(sites);
        Self {
            sites,
            p,
            depth: schedule.depth_for(snapshots),
            mode: MeasurementMode::Projective,
            seed,
            trajectories: realizations,
            realizations,
            schedule,
            initial: InitialState::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec_for(0).validate()?;
        if self.trajectories == 0 || self.realizations == 0 {
            return Err(Error::param("trajectories", "counts must be at least 1"));
        }
        if self.realizations > self.trajectories {
            return Err(Error::param("realizations", "cannot exceed the trajectory count"));
        }
        if self.schedule.count_up_to(self.depth) == 0 {
            return Err(Error::param("snapshotEvery", "schedule takes no snapshot within the depth"));
        }
        Ok(())
    }

    /// Circuit of realization `r`; its seed does not depend on `p` or `L`.
    pub fn spec_for(&self, realization: u64) -> CircuitSpec {
        CircuitSpec {
            sites: self.sites,
            depth: self.depth,
            p: self.p,
            mode: self.mode,
            seed: derive_seed(self.seed, realization),
        }
    }

    pub fn key_values(&self) -> KeyValues {
        let mut kv = self.spec_for(0).key_values();
        kv.0.retain(|(k, _)| k != "seed");
        kv.push("seed", self.seed);
        kv.push("trajectories", self.trajectories);
        kv.push("realizations", self.realizations);
        kv.push("burnIn", self.schedule.burn_in);
        kv.push("snapshotEvery", self.schedule.every);
        kv.push("initial", serde_json::to_string(&self.initial).unwrap_or_default());
        kv
    }

    pub fn stem(&self) -> String {
        format!("run_L{}_p{}", self.sites, tag(self.p))
    }
}

/// Accumulated estimates of one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: FilterPoint,
    pub correlators: CorrelatorSet,
    /// Snapshot times and the total-charge variance at each.
    pub snapshot_times: Vec<usize>,
    pub total_variance: ObservableAccumulator,
}

/// Runs all trajectories of a point. Trajectory `t` uses realization
/// `t mod R` and stream `t`; realizations are the batches.
pub fn run_filter_point(point: &FilterPoint) -> Result<PointResult> {
    point.validate()?;
    let times: Vec<usize> = (0..=point.depth).filter(|t| point.schedule.contains(*t)).collect();
    let r_count = point.realizations as u64;
    let parts = (0..r_count)
        .into_par_iter()
        .map(|r| -> Result<(CorrelatorSet, ObservableAccumulator)> {
            let realization = realize(&point.spec_for(r))?;
            let mut set = CorrelatorSet::new(point.sites);
            let mut var = ObservableAccumulator::new("VarQtotal", times.len());
            for t in (r..point.trajectories as u64).step_by(point.realizations) {
                let mut trace = Vec::with_capacity(times.len());
                run_realization(&realization, &point.initial, t, &point.schedule, |_, dist| {
                    set.push(r, &SnapshotMoments::compute(dist).samples());
                    trace.push(dist.total_charge_variance());
                })?;
                var.push(r, &trace);
            }
            Ok((set, var))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut correlators = CorrelatorSet::new(point.sites);
    let mut total_variance = ObservableAccumulator::new("VarQtotal", times.len());
    for (set, var) in parts {
        correlators.merge(set)?;
        total_variance.merge(var)?;
    }
    Ok(PointResult {
        point: point.clone(),
        correlators,
        snapshot_times: times,
        total_variance,
    })
}

impl PointResult {
    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(
            "correlators",
            self.point.key_values(),
            &["p", "L", "observable", "x", "estimate", "stderr", "nSamples"],
        );
        let p = fmt_f64(self.point.p);
        let l = self.point.sites.to_string();
        let mut emit = |acc: &ObservableAccumulator, xs: Vec<usize>| {
            for ((x, m), e) in xs.iter().zip(acc.mean()).zip(acc.stderr()) {
                t.push(vec![
                    p.clone(),
                    l.clone(),
                    acc.label().to_string(),
                    x.to_string(),
                    fmt_f64(m),
                    fmt_f64(e),
                    acc.count().to_string(),
                ]);
            }
        };
        let half = self.point.sites / 2;
        emit(&self.correlators.cz, (0..=half).collect());
        emit(&self.correlators.cw, (1..=half).collect());
        emit(&self.correlators.var_q, (1..=half).collect());
        emit(&self.total_variance, self.snapshot_times.clone());
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub points: Vec<FilterPoint>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub points: Vec<RunSummaryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummaryEntry {
    pub sites: usize,
    pub p: f64,
    pub csv: String,
    pub json: String,
    pub samples: u64,
}

fn file_name(path: &Path) -> String {
    path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string()
}

/// True when both result files of a point exist and the CSV checksum holds.
pub fn point_complete(out: &Path, stem: &str) -> bool {
    let csv = out.join(format!("{stem}.csv"));
    let json = out.join(format!("{stem}.json"));
    verify_checksum(&csv) && json.is_file()
}

/// Runs every point not already complete in `plan.out`, then writes
/// `run_summary.json`. The JSON result of a point is written before its
/// CSV, whose checksum marks completion.
pub fn execute_run(plan: &RunPlan) -> Result<RunSummary> {
    if plan.points.is_empty() {
        return Err(Error::NoData("run plan has no points".into()));
    }
    std::fs::create_dir_all(&plan.out)?;
    let mut entries = Vec::new();
    for point in &plan.points {
        let stem = point.stem();
        let csv = plan.out.join(format!("{stem}.csv"));
        let json = plan.out.join(format!("{stem}.json"));
        let result = if point_complete(&plan.out, &stem) {
            read_json::<PointResult>(&json)?
        } else {
            let result = run_filter_point(point)?;
            write_json(&json, &result)?;
            result.table().write(&csv)?;
            result
        };
        entries.push(RunSummaryEntry {
            sites: point.sites,
            p: point.p,
            csv: file_name(&csv),
            json: file_name(&json),
            samples: result.correlators.cz.count(),
        });
    }
    let summary = RunSummary { points: entries };
    write_json(&plan.out.join("run_summary.json"), &summary)?;
    Ok(summary)
}

/// Writes binary dumps of the first `count` trajectories of `point` into
/// `dir`, one `traj_L{L}_p{p}_t{t}.bin` per trajectory.
pub fn write_dumps(point: &FilterPoint, count: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    point.validate()?;
    std::fs::create_dir_all(dir)?;
    (0..count.min(point.trajectories) as u64)
        .map(|t| {
            let realization = realize(&point.spec_for(t % point.realizations as u64))?;
            let mut dump = TrajectoryDump::new(point.sites);
            let res = run_realization(&realization, &point.initial, t, &point.schedule, |time, dist| {
                dump.push_snapshot(time, dist)
            })?;
            dump.records = res.records;
            let mut bytes = Vec::new();
            dump.write_to(&mut bytes)?;
            let path = dir.join(format!("traj_L{}_p{}_t{t}.bin", point.sites, tag(point.p)));
            write_atomic(&path, &bytes)?;
            Ok(path)
        })
        .collect()
}

/// Fits of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFit {
    pub sites: usize,
    pub p: f64,
    /// `C_z` power law; `alpha = -slope`.
    pub cz: Option<FitResult>,
    pub cz_error: Option<String>,
    pub alpha: Option<f64>,
    pub cz_windows: Vec<(FitWindow, Option<f64>)>,
    pub stiffness: Option<StiffnessReport>,
    pub stiffness_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub sites: usize,
    pub method: String,
    pub p: Option<f64>,
    pub stderr: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub window: Option<FitWindow>,
    pub points: Vec<PointFit>,
    pub thresholds: Vec<ThresholdReport>,
}

/// Fits one point's correlators over `window` (default `[2, L/4]`).
pub fn fit_point(result: &PointResult, window: Option<FitWindow>, opts: FitOptions) -> Result<PointFit> {
    let l = result.point.sites;
    let w = window.unwrap_or_else(|| FitWindow::default_for(l));
    let cz = result.correlators.cz_series()?;
    let cz_fit = power_law_fit(&cz, w, opts);
    let windows: Vec<FitWindow> = (3..=l / 2).map(|hi| FitWindow::new(2.0, hi as f64)).collect();
    let cz_windows = window_sensitivity(&cz, &windows, opts)
        .into_iter()
        .map(|(w, r)| (w, r.ok().map(|f| -f.slope)))
        .collect();
    let st = stiffness(&result.correlators.var_q_series()?, &result.correlators.cw_series()?, w, opts);
    Ok(PointFit {
        sites: l,
        p: result.point.p,
        alpha: cz_fit.as_ref().ok().map(|f| -f.slope),
        cz_error: cz_fit.as_ref().err().map(|e| e.to_string()),
        cz: cz_fit.ok(),
        cz_windows,
        stiffness_error: st.as_ref().err().map(|e| e.to_string()),
        stiffness: st.ok(),
    })
}

/// Fits every point and locates the `1/pi` crossing of `rho_s(p)` per
/// system size and per method.
pub fn fit_results(results: &[PointResult], window: Option<FitWindow>, opts: FitOptions) -> Result<FitReport> {
    if results.is_empty() {
        return Err(Error::NoData("no sweep results to fit".into()));
    }
    let mut points = results
        .iter()
        .map(|r| fit_point(r, window, opts))
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.sites.cmp(&b.sites).then(a.p.total_cmp(&b.p)));
    let mut sizes: Vec<usize> = points.iter().map(|p| p.sites).collect();
    sizes.dedup();
    let mut thresholds = Vec::new();
    for l in sizes {
        for (method, pick) in [("fromVarQ", 0usize), ("fromCW", 1)] {
            let (mut ps, mut rho, mut err) = (Vec::new(), Vec::new(), Vec::new());
            for pt in points.iter().filter(|pt| pt.sites == l) {
                if let Some(st) = &pt.stiffness {
                    let e = if pick == 0 { st.from_var_q } else { st.from_cw };
                    ps.push(pt.p);
                    rho.push(e.value);
                    err.push(e.stderr);
                }
            }
            let located = locate_threshold(&ps, &rho, &err, CRITICAL_STIFFNESS, opts);
            thresholds.push(ThresholdReport {
                sites: l,
                method: method.into(),
                p: located.as_ref().ok().map(|t| t.p),
                stderr: located.as_ref().ok().map(|t| t.stderr),
                error: located.err().map(|e| e.to_string()),
            });
        }
    }
    Ok(FitReport {
        window,
        points,
        thresholds,
    })
}

/// Reads every `run_*.json` in `dir`.
pub fn load_results(dir: &Path) -> Result<Vec<PointResult>> {
    if !dir.is_dir() {
        return Err(Error::NoData(format!("{} is not a directory", dir.display())));
    }
    let files = list_files(dir, "run_L", ".json")?;
    if files.is_empty() {
        return Err(Error::NoData(format!("no run results in {}", dir.display())));
    }
    files.iter().map(|f| read_json(f)).collect()
}

/// Fit pipeline over a result directory: writes `fit_report.json` and
/// `rho_s.csv` into `out`.
pub fn execute_fit(inputs: &Path, out: &Path, window: Option<FitWindow>, opts: FitOptions) -> Result<FitReport> {
    let results = load_results(inputs)?;
    let report = fit_results(&results, window, opts)?;
    write_json(&out.join("fit_report.json"), &report)?;
    let mut kv = KeyValues::default();
    kv.push("inputs", inputs.display());
    kv.push("window", window.map_or("default [2, L/4]".to_string(), |w| format!("[{}, {}]", w.min, w.max)));
    let mut t = CsvTable::new(
        "stiffness",
        kv,
        &["p", "L", "alpha", "rhoVarQ", "rhoVarQStderr", "rhoCW", "rhoCWStderr"],
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), fmt_f64);
    for pt in &report.points {
        t.push(vec![
            fmt_f64(pt.p),
            pt.sites.to_string(),
            opt(pt.alpha),
            opt(pt.stiffness.as_ref().map(|s| s.from_var_q.value)),
            opt(pt.stiffness.as_ref().map(|s| s.from_var_q.stderr)),
            opt(pt.stiffness.as_ref().map(|s| s.from_cw.value)),
            opt(pt.stiffness.as_ref().map(|s| s.from_cw.stderr)),
        ]);
    }
    t.write(&out.join("rho_s.csv"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercolationPlan {
    pub sizes: Vec<usize>,
    pub ps: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    /// Depth is `aspect * L` full steps.
    pub aspect: usize,
    pub rule: PropagationRule,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercolationReport {
    pub rule: PropagationRule,
    pub estimates: Vec<WrapEstimate>,
    pub crossings: Vec<Crossing>,
    pub threshold: Option<f64>,
    pub collapse: Option<CollapseReport>,
}

impl PercolationPlan {
    fn key_values(&self, sites: usize, p: f64) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.push("L", sites);
        kv.push("depth", self.aspect * sites);
        kv.push("p", p);
        kv.push("rule", self.rule.name());
        kv.push("realizations", self.realizations);
        kv.push("seed", self.seed);
        kv.push("boundary", "periodic");
        kv
    }
}

const WRAP_COLUMNS: [&str; 7] = ["p", "L", "depth", "P_wrap", "stderr", "nRealizations", "rule"];

fn wrap_row(e: &WrapEstimate, rule: PropagationRule) -> Vec<String> {
    vec![
        fmt_f64(e.p),
        e.sites.to_string(),
        e.depth.to_string(),
        fmt_f64(e.probability()),
        fmt_f64(e.stderr()),
        e.realizations.to_string(),
        rule.name().to_string(),
    ]
}

fn read_wrap_point(path: &Path) -> Result<WrapEstimate> {
    let csv = crate::io::ParsedCsv::read(path)?;
    let schema = |reason: &str| Error::Schema {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    let row = csv.rows.first().ok_or_else(|| schema("no data row"))?;
    let col = |name: &str| csv.column(name).map(|i| row[i].as_str()).ok_or_else(|| schema("missing column"));
    let parse = |s: &str| s.parse::<f64>().map_err(|_| schema("bad number"));
    let realizations = parse(col("nRealizations")?)? as usize;
    Ok(WrapEstimate {
        p: parse(col("p")?)?,
        sites: parse(col("L")?)? as usize,
        depth: parse(col("depth")?)? as usize,
        wrapping: (parse(col("P_wrap")?)? * realizations as f64).round() as usize,
        realizations,
    })
}

/// Wrap-probability sweep with one checksummed file per `(p, L)`, the
/// aggregated `wrap.csv` and, with three or more sizes, `collapse.json`.
pub fn execute_percolation(plan: &PercolationPlan) -> Result<PercolationReport> {
    if plan.sizes.is_empty() || plan.ps.is_empty() {
        return Err(Error::NoData("percolation plan has no points".into()));
    }
    std::fs::create_dir_all(&plan.out)?;
    let mut estimates = Vec::new();
    for &l in &plan.sizes {
        for &p in &plan.ps {
            let path = plan
                .out
                .join(format!("wrap_{}_L{}_p{}.csv", plan.rule.name(), l, tag(p)));
            let e = if verify_checksum(&path) {
                read_wrap_point(&path)?
            } else {
                let e = wrap_probability(p, l, plan.aspect * l, plan.realizations, plan.seed, plan.rule)?;
                let mut t = CsvTable::new("wrap", plan.key_values(l, p), &WRAP_COLUMNS);
                t.push(wrap_row(&e, plan.rule));
                t.write(&path)?;
                e
            };
            estimates.push(e);
        }
    }
    let mut kv = KeyValues::default();
    kv.push("Ls", format!("{:?}", plan.sizes));
    kv.push("rule", plan.rule.name());
    kv.push("realizations", plan.realizations);
    kv.push("seed", plan.seed);
    kv.push("aspect", plan.aspect);
    let mut table = CsvTable::new("wrap", kv, &WRAP_COLUMNS);
    for e in &estimates {
        table.push(wrap_row(e, plan.rule));
    }
    table.write(&plan.out.join(format!("wrap_{}.csv", plan.rule.name())))?;

    let (threshold, crossings) = match threshold_estimate(&estimates) {
        Ok((t, _, c)) => (Some(t), c),
        Err(_) => (None, Vec::new()),
    };
    let curves = WrapCurve::from_estimates(&estimates);
    let collapse = if curves.len() >= 3 {
        let lo = plan.ps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = plan.ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(scaling_collapse(
            &curves,
            &linear_grid(lo, hi, 0.0025),
            &linear_grid(0.6, 2.5, 0.02),
            &CollapseOptions::default(),
        )?)
    } else {
        None
    };
    let report = PercolationReport {
        rule: plan.rule,
        estimates,
        crossings,
        threshold,
        collapse,
    };
    write_json(&plan.out.join(format!("collapse_{}.json", plan.rule.name())), &report)?;
    Ok(report)
}

/// Default depth of a percolation sample.
pub fn percolation_depth(sites: usize) -> usize {
    default_depth(sites)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroPlan {
    pub ps: Vec<f64>,
    pub k_min: f64,
    pub k_max: f64,
    pub k_points: usize,
    pub t: f64,
    pub dt: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroRow {
    pub k: f64,
    pub p: f64,
    pub steady: f64,
    pub evolved: f64,
    pub rel_err: f64,
}

/// Integrates each `p` from `C = 0` and compares with the closed form.
pub fn execute_hydro(plan: &HydroPlan) -> Result<Vec<HydroRow>> {
    let k_grid = log_grid(plan.k_min, plan.k_max, plan.k_points);
    let mut rows = Vec::new();
    for &p in &plan.ps {
        let params = HydroParams::unit(p, k_grid.clone());
        let target = steady_state(&params)?;
        let evolved = evolve(&params, &vec![0.0; k_grid.len()], plan.t, plan.dt)?;
        for ((k, s), e) in k_grid.iter().zip(target).zip(evolved) {
            rows.push(HydroRow {
                k: *k,
                p,
                steady: s,
                evolved: e,
                rel_err: (e - s).abs() / s,
            });
        }
    }
    let mut kv = KeyValues::default();
    kv.push("B", 1);
    kv.push("D", 1);
    kv.push("kappa", 1);
    kv.push("t", plan.t);
    kv.push("dt", plan.dt);
    let mut table = CsvTable::new("hydro", kv, &["k", "p", "C_steady", "C_evolved", "relErr"]);
    for r in &rows {
        table.push(vec![fmt_f64(r.k), fmt_f64(r.p), fmt_f64(r.steady), fmt_f64(r.evolved), fmt_f64(r.rel_err)]);
    }
    table.write(&plan.out.join("hydro.csv"))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub observable: String,
    pub exact: f64,
    pub monte_carlo: f64,
    pub stderr: f64,
    /// `|mc - exact| / stderr`
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub spec: CircuitSpec,
    pub trajectories: usize,
    pub branches: usize,
    pub rows: Vec<OracleRow>,
}

/// Exact enumeration against `trajectories` Born-sampled trajectories of
/// the same realization, for `E[<s_0>]`, `E[<s_0 s_1>]` and
/// `E[<s_0 s_1> - <s_0><s_1>]`. Trajectory `t` uses stream `t`.
pub fn oracle_comparison(spec: &CircuitSpec, trajectories: usize) -> Result<OracleReport> {
    if trajectories < 2 {
        return Err(Error::param("trajectories", "need at least 2"));
    }
    let realization = realize(spec)?;
    let exact = ExactMoments::compute(&realization, &InitialState::Uniform)?;
    let samples = (0..trajectories as u64)
        .into_par_iter()
        .map(|t| -> Result<[f64; 3]> {
            let res = run_realization(&realization, &InitialState::Uniform, t, &SnapshotSchedule::NONE, |_, _| {})?;
            let m = SnapshotMoments::compute(&res.state);
            Ok([m.magnetization(0), m.pair(0, 1), m.covariance(0, 1)])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = ObservableAccumulator::new("oracle", 3);
    for (t, s) in samples.iter().enumerate() {
        acc.push(t as u64, s);
    }
    let mean = acc.mean();
    let err: Vec<f64> = acc
        .variance()
        .iter()
        .map(|v| (v / trajectories as f64).sqrt())
        .collect();
    let exact_values = [exact.magnetization(0), exact.pair(0, 1), exact.connected(0, 1)];
    let names = ["E[<s0>]", "E[<s0 s1>]", "E[<s0 s1>_c]"];
    let rows = (0..3)
        .map(|k| OracleRow {
            observable: names[k].into(),
            exact: exact_values[k],
            monte_carlo: mean[k],
            stderr: err[k],
            z: z_score(mean[k], exact_values[k], err[k]),
        })
        .collect();
    Ok(OracleReport {
        spec: spec.clone(),
        trajectories,
        branches: exact.branches,
        rows,
    })
}

/// `|value - reference| / stderr`. Agreement to rounding scores 0 even when
/// the spread is itself rounding noise; a mismatch with zero spread is
/// infinite.
pub fn z_score(value: f64, reference: f64, stderr: f64) -> f64 {
    let diff = (value - reference).abs();
    if diff <= 1e-12 {
        0.0
    } else if stderr > 0.0 {
        diff / stderr
    } else {
        f64::INFINITY
    }
}

pub fn execute_oracle(spec: &CircuitSpec, trajectories: usize, out: &Path) -> Result<OracleReport> {
    let report = oracle_comparison(spec, trajectories)?;
    write_json(&out.join("oracle.json"), &report)?;
    let mut kv = spec.key_values();
    kv.push("trajectories", trajectories);
    kv.push("branches", report.branches);
    let mut t = CsvTable::new("oracle", kv, &["observable", "exact", "monteCarlo", "stderr", "z"]);
    for r in &report.rows {
        t.push(vec![r.observable.clone(), fmt_f64(r.exact), fmt_f64(r.monte_carlo), fmt_f64(r.stderr), fmt_f64(r.z)]);
    }
    t.write(&out.join("oracle.csv"))?;
    Ok(report)
}

/// `a:b:step` inclusive grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Config(format!("grid `{text}` must be start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if !(v[2] > 0.0) || v[1] < v[0] {
        return Err(bad());
    }
    // round to the step's decimal precision so file tags are clean
    Ok(linear_grid(v[0], v[1], v[2])
        .into_iter()
        .map(|x| (x * 1e9).round() / 1e9)
        .collect())
}
