//! Structure-factor hydrodynamics `dC/dt = B k^2 - kappa p C^2 - D k^2 C`,
//! one independent scalar ODE per wavevector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroParams {
    pub b: f64,
    pub d: f64,
    pub kappa: f64,
    pub p: f64,
    pub k_grid: Vec<f64>,
}

impl HydroParams {
    /// `B = D = kappa = 1`.
    pub fn unit(p: f64, k_grid: Vec<f64>) -> Self {
        Self {
            b: 1.0,
            d: 1.0,
            kappa: 1.0,
            p,
            k_grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("B", self.b), ("D", self.d), ("kappa", self.kappa)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, "must be finite and positive"));
            }
        }
        if !(self.p.is_finite() && self.p >= 0.0) {
            return Err(Error::param("p", "must be finite and non-negative"));
        }
        if self.k_grid.is_empty() || self.k_grid.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::param("kGrid", "wavevectors must be finite and positive"));
        }
        if self.k_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("kGrid", "must be sorted ascending"));
        }
        Ok(())
    }

    fn rhs(&self, k: f64, c: f64) -> f64 {
        let k2 = k * k;
        self.b * k2 - self.kappa * self.p * c * c - self.d * k2 * c
    }

    /// Largest stable step for solutions bounded by `c_max`.
    pub fn stable_dt(&self, c_max: f64) -> f64 {
        let k_max = self.k_grid.iter().cloned().fold(0.0, f64::max);
        1.0 / (self.d * k_max * k_max + 2.0 * self.kappa * self.p * c_max)
    }
}

/// Positive root of `kappa p C^2 + D k^2 C - B k^2 = 0`, written in the
/// cancellation-free form that tends to `B / D` as `p -> 0`.
pub fn steady_state_mode(params: &HydroParams, k: f64) -> f64 {
    let k2 = k * k;
    let dk2 = params.d * k2;
    let kp = params.kappa * params.p;
    2.0 * params.b * k2 / (dk2 + (dk2 * dk2 + 4.0 * kp * params.b * k2).sqrt())
}

pub fn steady_state(params: &HydroParams) -> Result<Vec<f64>> {
    params.validate()?;
    Ok(params.k_grid.iter().map(|&k| steady_state_mode(params, k)).collect())
}

/// Classical fourth-order Runge-Kutta from `c0` to time `t` with step `dt`
/// (the last step shortened to land on `t`).
pub fn evolve(params: &HydroParams, c0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    params.validate()?;
    if c0.len() != params.k_grid.len() {
        return Err(Error::param("C0", "length must match kGrid"));
    }
    if c0.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::param("C0", "must be finite and non-negative"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", "must be finite and non-negative"));
    }
    let c_max = c0
        .iter()
        .cloned()
        .chain(steady_state(params)?)
        .fold(0.0, f64::max);
    if !(dt > 0.0 && dt < params.stable_dt(c_max)) {
        return Err(Error::param(
            "dt",
            format!("must lie in (0, {:.3e}) for stability", params.stable_dt(c_max)),
        ));
    }
    let guard = 10.0 * c_max.max(1e-300);
    let mut out = Vec::with_capacity(c0.len());
    for (&k, &start) in params.k_grid.iter().zip(c0) {
        let mut c = start;
        let mut time = 0.0;
        while time < t {
            let h = dt.min(t - time);
            let f = |y: f64| params.rhs(k, y);
            let k1 = f(c);
            let k2 = f(c + 0.5 * h * k1);
            let k3 = f(c + 0.5 * h * k2);
            let k4 = f(c + h * k3);
            c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            time += h;
            if !c.is_finite() || c.abs() > guard {
                return Err(Error::Unstable { time });
            }
        }
        out.push(c.max(0.0));
    }
    Ok(out)
}

/// Log-log slope of `y(x)` by least squares.
pub fn log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(crate::analysis::ols(&lx, &ly)?.0)
}

/// Log-spaced grid of `n` points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
