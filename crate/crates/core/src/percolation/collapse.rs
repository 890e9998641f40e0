//! Finite-size scaling collapse of wrapping curves.

use serde::{Deserialize, Serialize};

use super::wrap::WrapEstimate;
use crate::analysis::interpolate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrapCurve {
    pub sites: usize,
    pub p: Vec<f64>,
    pub wrap: Vec<f64>,
}

impl WrapCurve {
    /// One curve per system size, sorted by `p`.
    pub fn from_estimates(estimates: &[WrapEstimate]) -> Vec<WrapCurve> {
        let mut sizes: Vec<usize> = estimates.iter().map(|e| e.sites).collect();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
            .into_iter()
            .map(|l| {
                let mut pts: Vec<(f64, f64)> = estimates
                    .iter()
                    .filter(|e| e.sites == l)
                    .map(|e| (e.p, e.probability()))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let (p, wrap) = pts.into_iter().unzip();
                WrapCurve { sites: l, p, wrap }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseOptions {
    /// Only points with `band.0 < P < band.1` enter the score, so the
    /// saturated plateaus cannot produce a trivial collapse.
    pub band: (f64, f64),
    /// Fewer overlapping residuals than this gives an infinite score.
    pub min_overlap: usize,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        Self {
            band: (0.02, 0.98),
            min_overlap: 6,
        }
    }
}

fn check_sizes(curves: &[WrapCurve]) -> Result<()> {
    let mut sizes: Vec<usize> = curves.iter().map(|c| c.sites).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::Degenerate(format!(
            "scaling collapse needs at least 3 system sizes, got {}",
            sizes.len()
        )));
    }
    Ok(())
}

/// Mean squared deviation between each curve's points and the other
/// curves' interpolants on the rescaled axis `(p - p_c) L^{1/nu}`.
pub fn collapse_score(curves: &[WrapCurve], pc: f64, nu: f64, opts: &CollapseOptions) -> Result<f64> {
    check_sizes(curves)?;
    let scaled: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| {
            let f = (c.sites as f64).powf(1.0 / nu);
            c.p.iter().map(|p| (p - pc) * f).collect()
        })
        .collect();
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, ci) in curves.iter().enumerate() {
        for (k, &y) in ci.wrap.iter().enumerate() {
            if !(y > opts.band.0 && y < opts.band.1) {
                continue;
            }
            for (j, cj) in curves.iter().enumerate() {
                if i == j {
                    continue;
                }
                if let Some(other) = interpolate(&scaled[j], &cj.wrap, scaled[i][k]) {
                    sum += (y - other).powi(2);
                    count += 1;
                }
            }
        }
    }
    Ok(if count < opts.min_overlap {
        f64::INFINITY
    } else {
        sum / count as f64
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub pc_grid: Vec<f64>,
    pub nu_grid: Vec<f64>,
    /// `scores[a][b]` at `(pc_grid[a], nu_grid[b])`.
    pub scores: Vec<Vec<f64>>,
    pub best_pc: f64,
    pub best_nu: f64,
    pub best_score: f64,
}

/// Evenly spaced grid `start, start + step, ..., <= stop`.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

/// Score surface over `pc_grid x nu_grid` and its argmin.
pub fn scaling_collapse(
    curves: &[WrapCurve],
    pc_grid: &[f64],
    nu_grid: &[f64],
    opts: &CollapseOptions,
) -> Result<CollapseReport> {
    check_sizes(curves)?;
    if pc_grid.is_empty() || nu_grid.is_empty() {
        return Err(Error::Degenerate("empty collapse grid".into()));
    }
    let mut scores = Vec::with_capacity(pc_grid.len());
    let mut best = (f64::INFINITY, pc_grid[0], nu_grid[0]);
    for &pc in pc_grid {
        let row = nu_grid
            .iter()
            .map(|&nu| collapse_score(curves, pc, nu, opts))
            .collect::<Result<Vec<f64>>>()?;
        for (&nu, &s) in nu_grid.iter().zip(&row) {
            if s < best.0 {
                best = (s, pc, nu);
            }
        }
        scores.push(row);
    }
    Ok(CollapseReport {
        pc_grid: pc_grid.to_vec(),
        nu_grid: nu_grid.to_vec(),
        scores,
        best_pc: best.1,
        best_nu: best.2,
        best_score: best.0,
    })
}
