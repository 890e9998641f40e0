//! Charge-diagonal observables of a trajectory snapshot and their
//! disorder-averaged accumulation.
//!
//! All parity expectations `<prod_{j in S} sigma_j>` of a snapshot are read
//! off one fast Walsh-Hadamard transform of the weights:
//! `sum_n w_n (-1)^{|n & S|} = (-1)^{|S|} <prod_{j in S} sigma_j>`.
//! Separations and interval lengths run up to `L / 2` and every estimate
//! is averaged over all base sites of the periodic chain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::BatchedSeries;
use crate::error::{Error, Result};
use crate::filter::ChargeDistribution;

/// In-place unnormalized Walsh-Hadamard transform.
pub fn walsh_hadamard(values: &mut [f64]) {
    let n = values.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for chunk in values.chunks_exact_mut(h << 1) {
            let (a, b) = chunk.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h <<= 1;
    }
}

/// Bit mask of the `len` sites `start, start + 1, ...` (mod `sites`).
pub fn ring_mask(sites: usize, start: usize, len: usize) -> usize {
    (0..len).fold(0usize, |m, k| m | 1 << ((start + k) % sites))
}

/// Site-resolved moments of a single snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMoments {
    sites: usize,
    /// `<sigma_i>`
    magnetization: Vec<f64>,
    /// `<sigma_i sigma_j>`, row-major `L x L`.
    pair: Vec<f64>,
    /// `<W>` for base `i` and separation `x` (`1..=L/2`), row-major with
    /// stride `L / 2`; interior sites are `i + 1 .. i + x - 1`.
    string: Vec<f64>,
}

impl SnapshotMoments {
    pub fn compute(dist: &ChargeDistribution) -> Self {
        let l = dist.sites();
        let total = dist.total_weight();
        let mut spectrum = dist.weights().to_vec();
        walsh_hadamard(&mut spectrum);
        // <prod_{S} sigma> = (-1)^{|S|} spectrum[S] / total
        let parity = |mask: usize| -> f64 {
            let v = spectrum[mask] / total;
            if mask.count_ones() % 2 == 0 {
                v
            } else {
                -v
            }
        };
        let magnetization = (0..l).map(|i| parity(1 << i)).collect();
        let mut pair = vec![1.0; l * l];
        for i in 0..l {
            for j in (i + 1)..l {
                let v = parity(1 << i | 1 << j);
                pair[i * l + j] = v;
                pair[j * l + i] = v;
            }
        }
        let half = l / 2;
        let mut string = vec![0.0; l * half];
        for i in 0..l {
            for x in 1..=half {
                string[i * half + x - 1] = parity(ring_mask(l, i + 1, x - 1));
            }
        }
        Self {
            sites: l,
            magnetization,
            pair,
            string,
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn magnetization(&self, i: usize) -> f64 {
        self.magnetization[i % self.sites]
    }

    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.pair[(i % self.sites) * self.sites + j % self.sites]
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.pair(i, j) - self.magnetization(i) * self.magnetization(j)
    }

    /// `<W_{[i, i+x]}>`, `1 <= x <= L/2`.
    pub fn string(&self, i: usize, x: usize) -> f64 {
        let half = self.sites / 2;
        self.string[(i % self.sites) * half + x - 1]
    }

    /// Variance of the charge on the `len` sites starting at `start`, from
    /// the covariance matrix.
    pub fn block_variance(&self, start: usize, len: usize) -> f64 {
        let mut v = 0.0;
        for a in 0..len {
            for b in 0..len {
                v += self.covariance(start + a, start + b);
            }
        }
        v
    }

    /// Translation-averaged `(<sigma_x sigma_0>, <sigma_x>, <sigma_0>)` and
    /// the translation-averaged connected part.
    pub fn two_point(&self, x: usize) -> TwoPoint {
        let l = self.sites as f64;
        let mut tp = TwoPoint::default();
        for i in 0..self.sites {
            tp.correlation += self.pair(i, i + x) / l;
            tp.mean_x += self.magnetization(i + x) / l;
            tp.mean_0 += self.magnetization(i) / l;
            tp.connected += self.covariance(i, i + x) / l;
        }
        tp
    }

    /// Translation-averaged `<W_{[0,x]}>`.
    pub fn string_mean(&self, x: usize) -> f64 {
        (0..self.sites).map(|i| self.string(i, x)).sum::<f64>() / self.sites as f64
    }

    /// Translation-averaged `<W_{[0,x]}>^2`: one sample of `C_W(x)`.
    pub fn string_squared(&self, x: usize) -> f64 {
        (0..self.sites).map(|i| self.string(i, x).powi(2)).sum::<f64>() / self.sites as f64
    }

    /// Translation-averaged block variance over intervals of `len` sites.
    pub fn interval_variance(&self, len: usize) -> f64 {
        (0..self.sites)
            .map(|i| self.block_variance(i, len))
            .sum::<f64>()
            / self.sites as f64
    }

    /// Per-snapshot samples of the three correlator families.
    pub fn samples(&self) -> CorrelatorSample {
        let half = self.sites / 2;
        CorrelatorSample {
            cz: (0..=half).map(|x| self.two_point(x).connected).collect(),
            cw: (1..=half).map(|x| self.string_squared(x)).collect(),
            var_q: (1..=half).map(|len| self.interval_variance(len)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TwoPoint {
    pub correlation: f64,
    pub mean_x: f64,
    pub mean_0: f64,
    pub connected: f64,
}

pub fn two_point(dist: &ChargeDistribution, x: usize) -> TwoPoint {
    SnapshotMoments::compute(dist).two_point(x)
}

pub fn string_op(dist: &ChargeDistribution, x: usize) -> f64 {
    SnapshotMoments::compute(dist).string_mean(x)
}

pub fn interval_variance(dist: &ChargeDistribution, len: usize) -> f64 {
    SnapshotMoments::compute(dist).interval_variance(len)
}

/// Direct popcount evaluations, independent of the transform.
pub mod direct {
    use crate::filter::ChargeDistribution;

    /// `<prod_{j in mask} sigma_j>`
    pub fn parity(dist: &ChargeDistribution, mask: usize) -> f64 {
        let total = dist.total_weight();
        let size = mask.count_ones();
        dist.weights()
            .iter()
            .enumerate()
            .map(|(n, w)| {
                let minus = size - (n & mask).count_ones();
                if minus % 2 == 0 {
                    *w
                } else {
                    -*w
                }
            })
            .sum::<f64>()
            / total
    }

    /// Second moment minus squared mean of the block charge.
    pub fn block_variance(dist: &ChargeDistribution, mask: usize) -> f64 {
        let total = dist.total_weight();
        let size = mask.count_ones() as f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for (n, w) in dist.weights().iter().enumerate() {
            let q = 2.0 * (n & mask).count_ones() as f64 - size;
            m1 += w * q;
            m2 += w * q * q;
        }
        m1 /= total;
        m2 / total - m1 * m1
    }
}

/// One snapshot's values for `C_z(x)` (`x = 0..=L/2`), `C_W(x)`
/// (`x = 1..=L/2`) and `Var_q(len)` (`len = 1..=L/2`).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorSample {
    pub cz: Vec<f64>,
    pub cw: Vec<f64>,
    pub var_q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BatchSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: u64,
}

/// Streaming sums keyed by batch (circuit realization). Totals are always
/// formed in batch-key order, so merging partial accumulators in any order
/// gives bit-identical results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableAccumulator {
    label: String,
    len: usize,
    batches: BTreeMap<u64, BatchSums>,
}

impl ObservableAccumulator {
    pub fn new(label: impl Into<String>, len: usize) -> Self {
        Self {
            label: label.into(),
            len,
            batches: BTreeMap::new(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn push(&mut self, batch: u64, values: &[f64]) {
        assert_eq!(values.len(), self.len, "accumulator `{}` width", self.label);
        let entry = self.batches.entry(batch).or_insert_with(|| BatchSums {
            sum: vec![0.0; values.len()],
            sum_sq: vec![0.0; values.len()],
            count: 0,
        });
        for (k, v) in values.iter().enumerate() {
            entry.sum[k] += v;
            entry.sum_sq[k] += v * v;
        }
        entry.count += 1;
    }

    /// Union of two accumulators over disjoint batch sets.
    pub fn merge(&mut self, other: ObservableAccumulator) -> Result<()> {
        if other.label != self.label || other.len != self.len {
            return Err(Error::Degenerate(format!(
                "cannot merge `{}` ({}) into `{}` ({})",
                other.label, other.len, self.label, self.len
            )));
        }
        for (batch, sums) in other.batches {
            if self.batches.contains_key(&batch) {
                return Err(Error::Degenerate(format!(
                    "batch {batch} present in both accumulators"
                )));
            }
            self.batches.insert(batch, sums);
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.batches.values().map(|b| b.count).sum()
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    pub fn sum(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.len];
        for b in self.batches.values() {
            for (t, s) in total.iter_mut().zip(&b.sum) {
                *t += s;
            }
        }
        total
    }

    pub fn sum_sq(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.len];
        for b in self.batches.values() {
            for (t, s) in total.iter_mut().zip(&b.sum_sq) {
                *t += s;
            }
        }
        total
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count() as f64;
        self.sum().into_iter().map(|s| s / n).collect()
    }

    /// Per-sample variance (unbiased), never negative.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.count() as f64;
        self.sum()
            .into_iter()
            .zip(self.sum_sq())
            .map(|(s, q)| ((q - s * s / n) / (n - 1.0)).max(0.0))
            .collect()
    }

    pub fn batch_means(&self) -> Vec<Vec<f64>> {
        self.batches
            .values()
            .map(|b| b.sum.iter().map(|s| s / b.count as f64).collect())
            .collect()
    }

    /// Standard error from the spread of batch means.
    pub fn stderr(&self) -> Vec<f64> {
        BatchedSeries::new(vec![0.0; self.len], self.batch_means())
            .map(|s| s.stderr())
            .unwrap_or_else(|_| vec![f64::NAN; self.len])
    }

    pub fn series(&self, x: Vec<f64>) -> Result<BatchedSeries> {
        BatchedSeries::new(x, self.batch_means())
    }
}

/// Disorder-averaged `C_z`, `C_W` and `Var_q` with batch-level errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSet {
    pub sites: usize,
    pub cz: ObservableAccumulator,
    pub cw: ObservableAccumulator,
    pub var_q: ObservableAccumulator,
}

impl CorrelatorSet {
    pub fn new(sites: usize) -> Self {
        let half = sites / 2;
        Self {
            sites,
            cz: ObservableAccumulator::new("Cz", half + 1),
            cw: ObservableAccumulator::new("CW", half),
            var_q: ObservableAccumulator::new("VarQ", half),
        }
    }

    pub fn push(&mut self, batch: u64, sample: &CorrelatorSample) {
        self.cz.push(batch, &sample.cz);
        self.cw.push(batch, &sample.cw);
        self.var_q.push(batch, &sample.var_q);
    }

    pub fn merge(&mut self, other: CorrelatorSet) -> Result<()> {
        if other.sites != self.sites {
            return Err(Error::Degenerate("site count mismatch".into()));
        }
        self.cz.merge(other.cz)?;
        self.cw.merge(other.cw)?;
        self.var_q.merge(other.var_q)
    }

    /// `C_z(x)` for `x = 0..=L/2`.
    pub fn cz_series(&self) -> Result<BatchedSeries> {
        self.cz.series((0..=self.sites / 2).map(|x| x as f64).collect())
    }

    /// `C_W(x)` for `x = 1..=L/2`.
    pub fn cw_series(&self) -> Result<BatchedSeries> {
        self.cw.series((1..=self.sites / 2).map(|x| x as f64).collect())
    }

    /// `Var_q(len)` for `len = 1..=L/2`.
    pub fn var_q_series(&self) -> Result<BatchedSeries> {
        self.var_q.series((1..=self.sites / 2).map(|x| x as f64).collect())
    }
}

/// Time series of the total-charge variance for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpeningTrace {
    pub times: Vec<usize>,
    pub variance: Vec<f64>,
}

pub const SHARP_VARIANCE: f64 = 0.01;

impl SharpeningTrace {
    pub fn from_snapshots<'a>(snaps: impl IntoIterator<Item = (usize, &'a ChargeDistribution)>) -> Self {
        let (times, variance) = snaps
            .into_iter()
            .map(|(t, d)| (t, d.total_charge_variance()))
            .unzip();
        Self { times, variance }
    }

    /// First snapshot time with variance below [`SHARP_VARIANCE`].
    pub fn sharpening_time(&self) -> Option<usize> {
        self.times
            .iter()
            .zip(&self.variance)
            .find(|(_, v)| **v < SHARP_VARIANCE)
            .map(|(t, _)| *t)
    }
}

/// Ensemble mean of equally-timed traces; a trace that never sharpens
/// contributes its final time plus one step to the mean sharpening time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpeningSummary {
    pub times: Vec<usize>,
    pub mean_variance: Vec<f64>,
    pub mean_sharpening_time: f64,
    pub unsharpened: usize,
}

pub fn sharpening_diagnostics(traces: &[SharpeningTrace]) -> Result<SharpeningSummary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::NoData("no sharpening traces".into()))?;
    let mut mean_variance = vec![0.0; first.times.len()];
    let (mut time_sum, mut unsharpened) = (0.0, 0);
    for trace in traces {
        if trace.times != first.times {
            return Err(Error::Degenerate("traces sampled at different times".into()));
        }
        for (m, v) in mean_variance.iter_mut().zip(&trace.variance) {
            *m += v / traces.len() as f64;
        }
        match trace.sharpening_time() {
            Some(t) => time_sum += t as f64,
            None => {
                unsharpened += 1;
                time_sum += (*trace.times.last().unwrap_or(&0) + 1) as f64;
            }
        }
    }
    Ok(SharpeningSummary {
        times: first.times.clone(),
        mean_variance,
        mean_sharpening_time: time_sum / traces.len() as f64,
        unsharpened,
    })
}
