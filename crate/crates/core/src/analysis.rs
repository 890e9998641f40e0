//! Power-law and logarithmic fits with batch bootstrap errors, stiffness
//! extraction and threshold location.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_stream, BOOTSTRAP_STREAM};

/// A series `x -> y` observed in independent batches (circuit realizations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchedSeries {
    x: Vec<f64>,
    batches: Vec<Vec<f64>>,
}

impl BatchedSeries {
    pub fn new(x: Vec<f64>, batches: Vec<Vec<f64>>) -> Result<Self> {
        if batches.is_empty() {
            return Err(Error::NoData("series has no batches".into()));
        }
        if let Some(bad) = batches.iter().find(|b| b.len() != x.len()) {
            return Err(Error::Degenerate(format!(
                "batch of length {} for {} abscissae",
                bad.len(),
                x.len()
            )));
        }
        Ok(Self { x, batches })
    }

    /// Deterministic series: one batch.
    pub fn exact(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(x, vec![y])
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn batches(&self) -> &[Vec<f64>] {
        &self.batches
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        mean_of(self.batches.iter())
    }

    /// Standard error of the mean from the batch spread; NaN with one batch.
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.batches.len() as f64;
        let mean = self.mean();
        (0..self.x.len())
            .map(|k| {
                let ss: f64 = self.batches.iter().map(|b| (b[k] - mean[k]).powi(2)).sum();
                (ss / (n - 1.0) / n).sqrt()
            })
            .collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            x: self.x.clone(),
            batches: self
                .batches
                .iter()
                .map(|b| b.iter().map(|v| f(*v)).collect())
                .collect(),
        }
    }

    fn resampled_mean<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.batches.len();
        mean_of((0..n).map(|_| &self.batches[rng.random_range(0..n)]))
    }
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let mut total: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for row in rows {
        if total.is_empty() {
            total = vec![0.0; row.len()];
        }
        for (t, v) in total.iter_mut().zip(row) {
            *t += v;
        }
        n += 1;
    }
    total.into_iter().map(|t| t / n as f64).collect()
}

/// Inclusive abscissa window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub min: f64,
    pub max: f64,
}

impl FitWindow {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    /// `[2, L/4]`
    pub fn default_for(sites: usize) -> Self {
        Self::new(2.0, sites as f64 / 4.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            resamples: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub window: FitWindow,
    pub points: usize,
    /// Reduced chi-square against the batch standard errors (NaN with one
    /// batch or two points).
    pub reduced_chi2: f64,
    /// Sign of the fitted data; power-law fits of signed series fit `|y|`.
    pub sign: f64,
    /// Bootstrap resamples discarded because the window went non-positive.
    pub rejected_resamples: usize,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return Err(Error::Window(format!("{} points, need at least 2", x.len())));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Window("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Clone, Copy, PartialEq)]
enum Transform {
    LogLog,
    LogLinear,
}

fn select(series: &BatchedSeries, window: FitWindow) -> Result<Vec<usize>> {
    let idx: Vec<usize> = (0..series.x.len())
        .filter(|&k| window.contains(series.x[k]))
        .collect();
    if idx.len() < 3 {
        return Err(Error::Window(format!(
            "{} points in [{}, {}], need at least 3",
            idx.len(),
            window.min,
            window.max
        )));
    }
    if idx.iter().any(|&k| series.x[k] <= 0.0) {
        return Err(Error::Window("non-positive abscissa in window".into()));
    }
    Ok(idx)
}

fn transformed(
    series_x: &[f64],
    y: &[f64],
    idx: &[usize],
    t: Transform,
    sign: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let xs = idx.iter().map(|&k| series_x[k].ln()).collect();
    let ys: Option<Vec<f64>> = idx
        .iter()
        .map(|&k| match t {
            Transform::LogLinear => Some(y[k]),
            Transform::LogLog => {
                let v = sign * y[k];
                (v > 0.0).then(|| v.ln())
            }
        })
        .collect();
    ys.map(|ys| (xs, ys))
}

fn fit(series: &BatchedSeries, window: FitWindow, t: Transform, opts: FitOptions) -> Result<FitResult> {
    let idx = select(series, window)?;
    let mean = series.mean();
    let sign = if t == Transform::LogLog && idx.iter().map(|&k| mean[k]).sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    let (xs, ys) = transformed(&series.x, &mean, &idx, t, sign).ok_or_else(|| {
        Error::Window(format!(
            "non-positive value in [{}, {}] for a power-law fit",
            window.min, window.max
        ))
    })?;
    let (slope, intercept) = ols(&xs, &ys)?;

    let err = series.stderr();
    let reduced_chi2 = if idx.len() > 2 && series.batch_count() > 1 {
        let chi2: f64 = idx
            .iter()
            .zip(xs.iter().zip(&ys))
            .map(|(&k, (x, y))| {
                let sigma = match t {
                    Transform::LogLinear => err[k],
                    Transform::LogLog => err[k] / mean[k].abs(),
                };
                ((y - slope * x - intercept) / sigma).powi(2)
            })
            .sum();
        chi2 / (idx.len() - 2) as f64
    } else {
        f64::NAN
    };

    let mut rng = rng_stream(opts.seed, BOOTSTRAP_STREAM);
    let (mut slopes, mut intercepts, mut rejected) = (Vec::new(), Vec::new(), 0);
    for _ in 0..opts.resamples {
        let y = series.resampled_mean(&mut rng);
        match transformed(&series.x, &y, &idx, t, sign) {
            Some((bx, by)) => {
                let (s, c) = ols(&bx, &by)?;
                slopes.push(s);
                intercepts.push(c);
            }
            None => rejected += 1,
        }
    }
    Ok(FitResult {
        slope,
        intercept,
        slope_stderr: std_dev(&slopes),
        intercept_stderr: std_dev(&intercepts),
        window,
        points: idx.len(),
        reduced_chi2,
        sign,
        rejected_resamples: rejected,
    })
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Fit `|y| = e^c x^slope` on `(ln x, ln |y|)`. A series whose window mean
/// is negative is fitted in magnitude and reported with `sign = -1`; any
/// point of the wrong sign is a window error.
pub fn power_law_fit(series: &BatchedSeries, window: FitWindow, opts: FitOptions) -> Result<FitResult> {
    fit(series, window, Transform::LogLog, opts)
}

/// Fit `y = slope ln x + c`.
pub fn log_fit(series: &BatchedSeries, window: FitWindow, opts: FitOptions) -> Result<FitResult> {
    fit(series, window, Transform::LogLinear, opts)
}

/// Power-law fits over several windows, for reporting fit sensitivity.
pub fn window_sensitivity(
    series: &BatchedSeries,
    windows: &[FitWindow],
    opts: FitOptions,
) -> Vec<(FitWindow, Result<FitResult>)> {
    windows
        .iter()
        .map(|w| (*w, power_law_fit(series, *w, opts)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StiffnessMethod {
    FromVarQ,
    FromCW,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: StiffnessMethod,
}

impl StiffnessEstimate {
    /// `rho_s = pi * slope / 8` from the `Var_q` log slope.
    pub fn from_var_q(fit: &FitResult) -> Self {
        Self {
            value: PI * fit.slope / 8.0,
            stderr: PI * fit.slope_stderr / 8.0,
            method: StiffnessMethod::FromVarQ,
        }
    }

    /// `rho_s = -slope / (2 pi)` from the `C_W` power law.
    pub fn from_cw(fit: &FitResult) -> Self {
        Self {
            value: -fit.slope / (2.0 * PI),
            stderr: fit.slope_stderr / (2.0 * PI),
            method: StiffnessMethod::FromCW,
        }
    }

    /// Difference in units of the combined standard error.
    pub fn tension(&self, other: &Self) -> f64 {
        (self.value - other.value).abs() / self.stderr.hypot(other.stderr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessReport {
    pub var_q_fit: FitResult,
    pub cw_fit: FitResult,
    pub from_var_q: StiffnessEstimate,
    pub from_cw: StiffnessEstimate,
}

/// Both stiffness estimates from `Var_q(len)` and `C_W(x)` series.
pub fn stiffness(
    var_q: &BatchedSeries,
    cw: &BatchedSeries,
    window: FitWindow,
    opts: FitOptions,
) -> Result<StiffnessReport> {
    let var_q_fit = log_fit(var_q, window, opts)?;
    let cw_fit = power_law_fit(cw, window, opts)?;
    Ok(StiffnessReport {
        from_var_q: StiffnessEstimate::from_var_q(&var_q_fit),
        from_cw: StiffnessEstimate::from_cw(&cw_fit),
        var_q_fit,
        cw_fit,
    })
}

/// Critical stiffness of the modified KT transition.
pub const CRITICAL_STIFFNESS: f64 = 1.0 / PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub p: f64,
    pub stderr: f64,
    /// Index of the left end of the bracketing interval.
    pub bracket: usize,
}

/// First downward crossing of `level` by linear interpolation.
fn crossing(p: &[f64], rho: &[f64], level: f64) -> Option<(f64, usize)> {
    (0..p.len().saturating_sub(1)).find_map(|k| {
        let (a, b) = (rho[k], rho[k + 1]);
        (a >= level && b <= level && a != b).then(|| (p[k] + (a - level) / (a - b) * (p[k + 1] - p[k]), k))
    })
}

/// Linear-interpolated crossing of a decreasing `rho_s(p)` with `level`,
/// with a parametric bootstrap over the per-point standard errors.
pub fn locate_threshold(
    p: &[f64],
    rho: &[f64],
    rho_stderr: &[f64],
    level: f64,
    opts: FitOptions,
) -> Result<ThresholdEstimate> {
    if p.len() != rho.len() || p.len() != rho_stderr.len() || p.len() < 2 {
        return Err(Error::NoData("threshold needs at least two points".into()));
    }
    if let Some(k) = (1..p.len()).find(|&k| p[k] <= p[k - 1]) {
        return Err(Error::NotMonotone { index: k });
    }
    if let Some(k) = (1..rho.len()).find(|&k| rho[k] > rho[k - 1]) {
        return Err(Error::NotMonotone { index: k });
    }
    let (pc, bracket) = crossing(p, rho, level).ok_or(Error::NoCrossing { level })?;
    let mut rng = rng_stream(opts.seed, BOOTSTRAP_STREAM);
    let mut samples = Vec::with_capacity(opts.resamples);
    for _ in 0..opts.resamples {
        let r: Vec<f64> = rho
            .iter()
            .zip(rho_stderr)
            .map(|(v, e)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + e * z
            })
            .collect();
        if let Some((c, _)) = crossing(p, &r, level) {
            samples.push(c);
        }
    }
    Ok(ThresholdEstimate {
        p: pc,
        stderr: std_dev(&samples),
        bracket,
    })
}

/// Linear interpolation on an ascending grid; `None` outside the range.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let k = xs.partition_point(|v| *v < x);
    if k == 0 || xs[k] == x {
        return Some(ys[k]);
    }
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    Some(ys[k - 1] + t * (ys[k] - ys[k - 1]))
}
