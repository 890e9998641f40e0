//! `sharpen` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sharpen_core::analysis::{FitOptions, FitWindow};
use sharpen_core::config::ConfigFile;
use sharpen_core::experiment::{
    execute_fit, execute_hydro, execute_oracle, execute_percolation, execute_run, parse_grid, resolve_workers,
    with_workers, write_dumps, FilterPoint, HydroPlan, PercolationPlan, RunPlan,
};
use sharpen_core::filter::SnapshotSchedule;
use sharpen_core::percolation::PropagationRule;
use sharpen_core::{CircuitSpec, InitialState, MeasurementMode};

#[derive(Parser)]
#[command(name = "sharpen", version, about = "Charge-sharpening simulator for monitored U(1) circuits")]
struct Cli {
    /// `key = value` file; the section named after the subcommand supplies
    /// defaults for any flag not given on the command line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory sweep over (p, L) writing correlator tables.
    Run(RunArgs),
    /// Wrapping-probability sweep and scaling collapse.
    Percolation(PercolationArgs),
    /// Structure-factor integration against the closed-form steady state.
    Hydro(HydroArgs),
    /// Power-law and stiffness fits over a directory of run results.
    Fit(FitArgs),
    /// Exact enumeration against Monte Carlo on a small circuit.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Projective,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    MeasuredOnly,
    ThreeOfFour,
    ChargeValues,
}

impl From<Rule> for PropagationRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::MeasuredOnly => PropagationRule::MeasuredOnly,
            Rule::ThreeOfFour => PropagationRule::ThreeOfFour,
            Rule::ChargeValues => PropagationRule::ChargeValues,
        }
    }
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to $SHARPEN_WORKERS, then the core count.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long = "L")]
    l: Option<usize>,
    /// Comma-separated system sizes.
    #[arg(long = "Ls", value_delimiter = ',')]
    ls: Option<Vec<usize>>,
    #[arg(long)]
    p: Option<f64>,
    /// `start:stop:step`
    #[arg(long = "pGrid")]
    p_grid: Option<String>,
    /// Full time steps; default fits `--snapshots` after the burn-in.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    /// Circuit realizations; defaults to one per trajectory.
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Full steps before the first snapshot (default 4 L).
    #[arg(long = "burnIn")]
    burn_in: Option<usize>,
    /// Full steps between snapshots (default L).
    #[arg(long = "snapshotEvery")]
    snapshot_every: Option<usize>,
    /// Snapshots per trajectory when `--depth` is not given.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Also write binary dumps of the first N trajectories of each point.
    #[arg(long)]
    dump: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PercolationArgs {
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long = "Ls", value_delimiter = ',')]
    ls: Option<Vec<usize>>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "pGrid")]
    p_grid: Option<String>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Depth in units of L.
    #[arg(long)]
    aspect: Option<usize>,
    #[arg(long, value_enum)]
    rule: Option<Rule>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct HydroArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "pGrid")]
    p_grid: Option<String>,
    #[arg(long = "kMin")]
    k_min: Option<f64>,
    #[arg(long = "kMax")]
    k_max: Option<f64>,
    #[arg(long = "kPoints")]
    k_points: Option<usize>,
    /// Integration time.
    #[arg(long)]
    time: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Directory holding `run_*.json` results (default: `--out`).
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Fit window `min:max` in sites (default 2:L/4).
    #[arg(long)]
    window: Option<String>,
    /// Bootstrap resamples.
    #[arg(long)]
    resamples: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[command(flatten)]
    common: Common,
}

/// Flag values with config-file fallback.
struct Settings {
    config: Option<ConfigFile>,
    section: &'static str,
}

impl Settings {
    fn load(path: Option<&Path>, section: &'static str) -> Result<Self> {
        let config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Some(ConfigFile::parse(&text)?)
            }
            None => None,
        };
        Ok(Self { config, section })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.config.as_ref()?.get(self.section, key)
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match &self.config {
            Some(c) => Ok(c.get_parsed(self.section, key)?),
            None => Ok(None),
        }
    }

    fn list<T: FromStr>(&self, flag: Option<Vec<T>>, key: &str) -> Result<Option<Vec<T>>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().parse::<T>().map_err(|_| anyhow::anyhow!("[{}] {key}: bad entry `{s}`", self.section)))
                    .collect()
            })
            .transpose()
    }

    fn sizes(&self, l: Option<usize>, ls: Option<Vec<usize>>) -> Result<Vec<usize>> {
        if let Some(ls) = self.list(ls, "Ls")? {
            return Ok(ls);
        }
        match self.get(l, "L")? {
            Some(l) => Ok(vec![l]),
            None => bail!("give --L or --Ls"),
        }
    }

    fn rates(&self, p: Option<f64>, grid: Option<String>) -> Result<Vec<f64>> {
        if let Some(g) = self.get(grid, "pGrid")? {
            return Ok(parse_grid(&g)?);
        }
        match self.get(p, "p")? {
            Some(p) => Ok(vec![p]),
            None => bail!("give --p or --pGrid"),
        }
    }

    fn common(&self, c: Common) -> Result<(u64, usize, PathBuf)> {
        let seed = self.get(c.seed, "seed")?.unwrap_or(0);
        let workers = resolve_workers(self.get(c.workers, "workers")?)?;
        let out = self.get(c.out, "out")?.unwrap_or_else(|| PathBuf::from("results"));
        Ok((seed, workers, out))
    }

    fn mode(&self, mode: Option<Mode>, gamma: Option<f64>, dt: Option<f64>) -> Result<MeasurementMode> {
        let mode = match mode {
            Some(m) => m,
            None => match self.raw("mode") {
                None | Some("projective") => Mode::Projective,
                Some("weak") => Mode::Weak,
                Some(other) => bail!("[{}] mode: unknown mode `{other}`", self.section),
            },
        };
        Ok(match mode {
            Mode::Projective => MeasurementMode::Projective,
            Mode::Weak => MeasurementMode::Weak {
                gamma: self.get(gamma, "gamma")?.context("weak mode needs --gamma")?,
                dt: self.get(dt, "dt")?.unwrap_or(1.0),
            },
        })
    }
}

fn run(settings: &Settings, a: RunArgs) -> Result<()> {
    let sizes = settings.sizes(a.l, a.ls)?;
    let ps = settings.rates(a.p, a.p_grid)?;
    let mode = settings.mode(a.mode, a.gamma, a.dt)?;
    let trajectories = settings.get(a.trajectories, "trajectories")?.unwrap_or(100);
    let realizations = settings.get(a.realizations, "realizations")?.unwrap_or(trajectories);
    let depth = settings.get(a.depth, "depth")?;
    let burn_in = settings.get(a.burn_in, "burnIn")?;
    let every = settings.get(a.snapshot_every, "snapshotEvery")?;
    let snapshots = settings.get(a.snapshots, "snapshots")?.unwrap_or(10);
    let dump = settings.get(a.dump, "dump")?.unwrap_or(0);
    let (seed, workers, out) = settings.common(a.common)?;

    let mut points = Vec::new();
    for &l in &sizes {
        for &p in &ps {
            let schedule = SnapshotSchedule {
                burn_in: burn_in.unwrap_or(4 * l),
                every: every.unwrap_or(l),
            };
            let point = FilterPoint {
                sites: l,
                p,
                depth: depth.unwrap_or_else(|| schedule.depth_for(snapshots)),
                mode,
                seed,
                trajectories,
                realizations,
                schedule,
                initial: InitialState::Uniform,
            };
            point.validate().with_context(|| format!("point L={l} p={p}"))?;
            points.push(point);
        }
    }
    let plan = RunPlan { points, out };
    let summary = with_workers(workers, || -> Result<_> {
        let summary = execute_run(&plan)?;
        if dump > 0 {
            for point in &plan.points {
                write_dumps(point, dump, &plan.out.join("dumps"))?;
            }
        }
        Ok(summary)
    })??;
    for e in &summary.points {
        println!("L={} p={} samples={} -> {}", e.sites, e.p, e.samples, e.csv);
    }
    Ok(())
}

fn percolation(settings: &Settings, a: PercolationArgs) -> Result<()> {
    let sizes = settings.sizes(a.l, a.ls)?;
    let ps = settings.rates(a.p, a.p_grid)?;
    let realizations = settings.get(a.realizations, "realizations")?.unwrap_or(1000);
    let aspect = settings.get(a.aspect, "aspect")?.unwrap_or(2);
    let rule = match a.rule {
        Some(r) => r.into(),
        None => match settings.raw("rule") {
            None => PropagationRule::ChargeValues,
            Some(name) => Rule::from_str(name, false)
                .map_err(|e| anyhow::anyhow!("[{}] rule: {e}", settings.section))?
                .into(),
        },
    };
    let (seed, workers, out) = settings.common(a.common)?;
    let plan = PercolationPlan {
        sizes,
        ps,
        realizations,
        seed,
        aspect,
        rule,
        out,
    };
    let report = with_workers(workers, || execute_percolation(&plan))??;
    for c in &report.crossings {
        println!("crossing L={} / L={}: p = {:.4}", c.small, c.large, c.p);
    }
    if let Some(t) = report.threshold {
        println!("threshold ({}): {t:.4}", rule.name());
    }
    if let Some(c) = &report.collapse {
        println!("collapse: p_c = {:.4}, nu = {:.3}", c.best_pc, c.best_nu);
    }
    Ok(())
}

fn hydro(settings: &Settings, a: HydroArgs) -> Result<()> {
    let ps = match (settings.get(a.p_grid, "pGrid")?, settings.get(a.p, "p")?) {
        (Some(g), _) => parse_grid(&g)?,
        (None, Some(p)) => vec![p],
        (None, None) => vec![0.1, 0.4],
    };
    let plan = HydroPlan {
        ps,
        k_min: settings.get(a.k_min, "kMin")?.unwrap_or(1e-2),
        k_max: settings.get(a.k_max, "kMax")?.unwrap_or(1.0),
        k_points: settings.get(a.k_points, "kPoints")?.unwrap_or(20),
        t: settings.get(a.time, "time")?.unwrap_or(20_000.0),
        dt: settings.get(a.dt, "dt")?.unwrap_or(0.05),
        out: settings.get(a.out, "out")?.unwrap_or_else(|| PathBuf::from("results")),
    };
    let rows = execute_hydro(&plan)?;
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    println!("{} modes, max relative error {worst:.3e}", rows.len());
    Ok(())
}

fn fit(settings: &Settings, a: FitArgs) -> Result<()> {
    let window = match settings.get(a.window, "window")? {
        Some(w) => {
            let (lo, hi) = w.split_once(':').context("--window must be min:max")?;
            Some(FitWindow::new(lo.trim().parse()?, hi.trim().parse()?))
        }
        None => None,
    };
    let resamples = settings.get(a.resamples, "resamples")?.unwrap_or(FitOptions::default().resamples);
    let (seed, workers, out) = settings.common(a.common)?;
    let inputs = settings.get(a.inputs, "inputs")?.unwrap_or_else(|| out.clone());
    let opts = FitOptions { resamples, seed };
    let report = with_workers(workers, || execute_fit(&inputs, &out, window, opts))??;
    for pt in &report.points {
        let st = pt.stiffness.as_ref();
        println!(
            "L={} p={}: alpha {} rho_s(VarQ) {} rho_s(CW) {}",
            pt.sites,
            pt.p,
            pt.alpha.map_or("n/a".into(), |v| format!("{v:.3}")),
            st.map_or("n/a".into(), |s| format!("{:.4} +- {:.4}", s.from_var_q.value, s.from_var_q.stderr)),
            st.map_or("n/a".into(), |s| format!("{:.4} +- {:.4}", s.from_cw.value, s.from_cw.stderr)),
        );
    }
    for t in &report.thresholds {
        match (t.p, t.stderr) {
            (Some(p), Some(e)) => println!("p_# (L={}, {}): {p:.4} +- {e:.4}", t.sites, t.method),
            _ => println!("p_# (L={}, {}): {}", t.sites, t.method, t.error.as_deref().unwrap_or("n/a")),
        }
    }
    Ok(())
}

fn oracle(settings: &Settings, a: OracleArgs) -> Result<()> {
    let sites = settings.get(a.l, "L")?.unwrap_or(4);
    let depth = settings.get(a.depth, "depth")?.unwrap_or(2);
    let p = settings.get(a.p, "p")?.unwrap_or(0.5);
    let trajectories = settings.get(a.trajectories, "trajectories")?.unwrap_or(100_000);
    let (seed, workers, out) = settings.common(a.common)?;
    let spec = CircuitSpec::projective(sites, depth, p, seed);
    let report = with_workers(workers, || execute_oracle(&spec, trajectories, &out))??;
    println!("{} outcome branches, {trajectories} trajectories", report.branches);
    for r in &report.rows {
        println!(
            "{:<14} exact {:+.6}  monte carlo {:+.6} +- {:.6}  z = {:.2}",
            r.observable, r.exact, r.monte_carlo, r.stderr, r.z
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Run(a) => run(&Settings::load(config, "run")?, a),
        Command::Percolation(a) => percolation(&Settings::load(config, "percolation")?, a),
        Command::Hydro(a) => hydro(&Settings::load(config, "hydro")?, a),
        Command::Fit(a) => fit(&Settings::load(config, "fit")?, a),
        Command::Oracle(a) => oracle(&Settings::load(config, "oracle")?, a),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
