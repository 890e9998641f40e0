//! Wrapping probability of sharp clusters and size-pair crossings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cluster::cluster;
use super::lattice::{propagate_sharpness, ChargeHistory, PropagationRule, SweepOrder};
use crate::circuit::{realize, CircuitSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_stream, HISTORY_STREAM};

/// Wrap statistics for one `(p, L, depth)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrapEstimate {
    pub p: f64,
    pub sites: usize,
    pub depth: usize,
    pub wrapping: usize,
    pub realizations: usize,
}

impl WrapEstimate {
    pub fn probability(&self) -> f64 {
        self.wrapping as f64 / self.realizations as f64
    }

    /// Binomial standard error.
    pub fn stderr(&self) -> f64 {
        let q = self.probability();
        (q * (1.0 - q) / self.realizations as f64).sqrt()
    }
}

/// Whether realization `index` of `(p, L, depth)` under master seed
/// `seed` has a wrapping sharp cluster. Placements and the hidden history
/// depend on `(seed, index)` only, so realizations are nested in `p`.
pub fn realization_wraps(
    sites: usize,
    depth: usize,
    p: f64,
    seed: u64,
    index: u64,
    rule: PropagationRule,
) -> Result<bool> {
    let spec = CircuitSpec::projective(sites, depth, p, derive_seed(seed, index));
    let realization = realize(&spec)?;
    let history = (rule == PropagationRule::ChargeValues)
        .then(|| ChargeHistory::sample(&realization, &mut rng_stream(spec.seed, HISTORY_STREAM)));
    let lattice = propagate_sharpness(
        &realization,
        history.as_ref().map(|h| h.values()),
        rule,
        SweepOrder::Worklist,
    )?;
    Ok(cluster(&realization, &lattice).wraps())
}

/// Fraction of `realizations` circuits with a wrapping sharp cluster.
pub fn wrap_probability(
    p: f64,
    sites: usize,
    depth: usize,
    realizations: usize,
    seed: u64,
    rule: PropagationRule,
) -> Result<WrapEstimate> {
    if realizations == 0 {
        return Err(Error::param("realizations", "must be at least 1"));
    }
    CircuitSpec::projective(sites, depth, p, seed).validate()?;
    let flags = (0..realizations as u64)
        .into_par_iter()
        .map(|r| realization_wraps(sites, depth, p, seed, r, rule))
        .collect::<Result<Vec<bool>>>()?;
    Ok(WrapEstimate {
        p,
        sites,
        depth,
        wrapping: flags.iter().filter(|w| **w).count(),
        realizations,
    })
}

/// Same pipeline with only measured links sharp.
pub fn measured_link_percolation(
    p: f64,
    sites: usize,
    depth: usize,
    realizations: usize,
    seed: u64,
) -> Result<WrapEstimate> {
    wrap_probability(p, sites, depth, realizations, seed, PropagationRule::MeasuredOnly)
}

/// Default aspect ratio: depth `2 L` full steps.
pub fn default_depth(sites: usize) -> usize {
    2 * sites
}

/// `P_wrap` on a grid of `p` for each size; depth from `depth_of(L)`.
pub fn wrap_scan(
    ps: &[f64],
    sizes: &[usize],
    depth_of: impl Fn(usize) -> usize,
    realizations: usize,
    seed: u64,
    rule: PropagationRule,
) -> Result<Vec<WrapEstimate>> {
    let mut out = Vec::with_capacity(ps.len() * sizes.len());
    for &l in sizes {
        for &p in ps {
            out.push(wrap_probability(p, l, depth_of(l), realizations, seed, rule)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub small: usize,
    pub large: usize,
    pub p: f64,
}

/// Points of one size, sorted by `p`.
fn curve(estimates: &[WrapEstimate], sites: usize) -> Vec<(f64, f64)> {
    let mut c: Vec<(f64, f64)> = estimates
        .iter()
        .filter(|e| e.sites == sites)
        .map(|e| (e.p, e.probability()))
        .collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0));
    c
}

/// Crossing of `P_wrap(p; large) - P_wrap(p; small)` from below to above
/// zero, by linear interpolation. With several sign changes (noise) the
/// steepest one is taken.
pub fn crossing(small: &[(f64, f64)], large: &[(f64, f64)]) -> Option<f64> {
    let diff: Vec<(f64, f64)> = small
        .iter()
        .filter_map(|&(p, a)| {
            large
                .iter()
                .find(|(q, _)| (q - p).abs() < 1e-12)
                .map(|&(_, b)| (p, b - a))
        })
        .collect();
    diff.windows(2)
        .filter(|w| w[0].1 < 0.0 && w[1].1 > 0.0)
        .max_by(|a, b| (a[1].1 - a[0].1).total_cmp(&(b[1].1 - b[0].1)))
        .map(|w| w[0].0 + (-w[0].1) / (w[1].1 - w[0].1) * (w[1].0 - w[0].0))
}

/// Crossings of consecutive system sizes.
pub fn pairwise_crossings(estimates: &[WrapEstimate]) -> Vec<Crossing> {
    let mut sizes: Vec<usize> = estimates.iter().map(|e| e.sites).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .windows(2)
        .filter_map(|w| {
            crossing(&curve(estimates, w[0]), &curve(estimates, w[1])).map(|p| Crossing {
                small: w[0],
                large: w[1],
                p,
            })
        })
        .collect()
}

/// Mean and spread of the consecutive-size crossings.
pub fn threshold_estimate(estimates: &[WrapEstimate]) -> Result<(f64, f64, Vec<Crossing>)> {
    let crossings = pairwise_crossings(estimates);
    if crossings.is_empty() {
        return Err(Error::NoCrossing { level: 0.0 });
    }
    let n = crossings.len() as f64;
    let mean = crossings.iter().map(|c| c.p).sum::<f64>() / n;
    let spread = (crossings.iter().map(|c| (c.p - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok((mean, spread, crossings))
}
