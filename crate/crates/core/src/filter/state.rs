//! Dense trajectory-conditional distribution over charge configurations.
//!
//! Index bit `i` set means the charge at site `i` is `+1`; clear means `-1`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense storage cap: `8 * 2^22` bytes is 32 MB per trajectory.
pub const MAX_DENSE_SITES: usize = 22;

/// Branch probabilities below this are treated as impossible.
pub const DEGENERATE_PROBABILITY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChargeConfig(pub u64);

impl ChargeConfig {
    #[inline]
    pub fn charge(self, site: usize) -> i8 {
        if self.0 >> site & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn from_charges(charges: &[i8]) -> Self {
        let bits = charges
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .fold(0u64, |acc, (i, _)| acc | 1 << i);
        ChargeConfig(bits)
    }

    /// Total charge `sum_i sigma_i` on `sites` sites.
    pub fn total_charge(self, sites: usize) -> i32 {
        2 * self.0.count_ones() as i32 - sites as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Diagonal of the maximally mixed state.
    Uniform,
    /// `weight` on the sector with `occupied` positive charges and
    /// `1 - weight` on the sector with `occupied + 1`, uniform within each.
    TwoSector { occupied: usize, weight: f64 },
    Config(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub layer: usize,
    pub site: usize,
    /// `+1.0` or `-1.0` for projective measurements, any real for weak ones.
    pub outcome: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeDistribution {
    sites: usize,
    weights: Vec<f64>,
    log_norm: f64,
}

#[inline]
fn check_sites(sites: usize) -> Result<()> {
    if sites == 0 || sites > MAX_DENSE_SITES {
        return Err(Error::SizeLimit {
            what: "dense site count",
            value: sites,
            limit: MAX_DENSE_SITES,
        });
    }
    Ok(())
}

impl ChargeDistribution {
    pub fn uniform(sites: usize) -> Result<Self> {
        check_sites(sites)?;
        let n = 1usize << sites;
        Ok(Self {
            sites,
            weights: vec![1.0 / n as f64; n],
            log_norm: 0.0,
        })
    }

    pub fn delta(sites: usize, config: ChargeConfig) -> Result<Self> {
        check_sites(sites)?;
        if config.0 >> sites != 0 {
            return Err(Error::param("config", "has bits beyond the site count"));
        }
        let mut weights = vec![0.0; 1 << sites];
        weights[config.0 as usize] = 1.0;
        Ok(Self {
            sites,
            weights,
            log_norm: 0.0,
        })
    }

    pub fn two_sector(sites: usize, occupied: usize, weight: f64) -> Result<Self> {
        check_sites(sites)?;
        if occupied >= sites {
            return Err(Error::param("occupied", format!("must be < L = {sites}")));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::param("weight", "must lie in [0, 1]"));
        }
        let n = 1usize << sites;
        let low = binomial(sites, occupied);
        let high = binomial(sites, occupied + 1);
        let weights = (0..n)
            .map(|idx| match idx.count_ones() as usize {
                c if c == occupied => weight / low,
                c if c == occupied + 1 => (1.0 - weight) / high,
                _ => 0.0,
            })
            .collect();
        Ok(Self {
            sites,
            weights,
            log_norm: 0.0,
        })
    }

    pub fn from_initial(sites: usize, init: &InitialState) -> Result<Self> {
        match *init {
            InitialState::Uniform => Self::uniform(sites),
            InitialState::TwoSector { occupied, weight } => Self::two_sector(sites, occupied, weight),
            InitialState::Config(bits) => Self::delta(sites, ChargeConfig(bits)),
        }
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(sites: usize, mut weights: Vec<f64>) -> Result<Self> {
        check_sites(sites)?;
        if weights.len() != 1 << sites {
            return Err(Error::param("weights", format!("expected 2^{sites} entries")));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("weights", "must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::param("weights", "total weight is zero"));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            sites,
            weights,
            log_norm: 0.0,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Accumulated log of Born probabilities (log-likelihood of the record).
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Averages every pair of configurations related by swapping the charges
    /// on `(i, j)`; configurations with equal charges there are untouched.
    pub fn apply_gate(&mut self, i: usize, j: usize) {
        debug_assert!(i != j && i < self.sites && j < self.sites);
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let (bl, bh) = (1usize << lo, 1usize << hi);
        let n = self.weights.len();
        let w = &mut self.weights;
        for base in (0..n).step_by(bh << 1) {
            for mid in (base..base + bh).step_by(bl << 1) {
                for idx in mid..mid + bl {
                    let (a, b) = (idx | bl, idx | bh);
                    let avg = 0.5 * (w[a] + w[b]);
                    w[a] = avg;
                    w[b] = avg;
                }
            }
        }
    }

    /// Total weight with `sigma_site = +1` and `-1` respectively.
    pub fn site_weights(&self, site: usize) -> (f64, f64) {
        let b = 1usize << site;
        let (mut plus, mut minus) = (0.0, 0.0);
        for chunk in self.weights.chunks_exact(b << 1) {
            minus += chunk[..b].iter().sum::<f64>();
            plus += chunk[b..].iter().sum::<f64>();
        }
        (plus, minus)
    }

    /// `P(sigma_site = +1)`.
    pub fn marginal_plus(&self, site: usize) -> f64 {
        let (plus, minus) = self.site_weights(site);
        plus / (plus + minus)
    }

    /// `<sigma_site>`.
    pub fn magnetization(&self, site: usize) -> f64 {
        let (plus, minus) = self.site_weights(site);
        (plus - minus) / (plus + minus)
    }

    /// Projects onto `sigma_site = outcome` and renormalizes. Returns the
    /// Born probability of the outcome.
    pub fn condition(&mut self, site: usize, outcome: i8) -> Result<f64> {
        let (plus, minus) = self.site_weights(site);
        let kept = if outcome > 0 { plus } else { minus };
        let probability = kept / (plus + minus);
        if !(probability >= DEGENERATE_PROBABILITY) {
            return Err(Error::DegenerateBranch { site, probability });
        }
        let scale = 1.0 / kept;
        let b = 1usize << site;
        for chunk in self.weights.chunks_exact_mut(b << 1) {
            let (minus_half, plus_half) = chunk.split_at_mut(b);
            let (keep, zero) = if outcome > 0 {
                (plus_half, minus_half)
            } else {
                (minus_half, plus_half)
            };
            keep.iter_mut().for_each(|w| *w *= scale);
            zero.iter_mut().for_each(|w| *w = 0.0);
        }
        self.log_norm += probability.ln();
        Ok(probability)
    }

    /// Born-sampled projective measurement.
    pub fn measure_projective<R: Rng + ?Sized>(
        &mut self,
        site: usize,
        layer: usize,
        rng: &mut R,
    ) -> Result<MeasurementRecord> {
        let p_plus = self.marginal_plus(site);
        let outcome: i8 = if rng.random::<f64>() < p_plus { 1 } else { -1 };
        self.condition(site, outcome)?;
        Ok(MeasurementRecord {
            layer,
            site,
            outcome: outcome as f64,
        })
    }

    /// Reweights by `exp[-(strength / 2) (sigma_site - m)^2]` and
    /// renormalizes. Returns the log density of `m` under the current
    /// marginal mixture.
    pub fn condition_weak(&mut self, site: usize, m: f64, strength: f64) -> Result<f64> {
        if !m.is_finite() {
            return Err(Error::NonFiniteOutcome { site });
        }
        if strength == 0.0 {
            return Ok(0.0);
        }
        let (plus, minus) = self.site_weights(site);
        let total = plus + minus;
        let lp = -0.5 * strength * (1.0 - m).powi(2);
        let lm = -0.5 * strength * (-1.0 - m).powi(2);
        let lmax = lp.max(lm);
        let (fp, fm) = ((lp - lmax).exp(), (lm - lmax).exp());
        let z = (plus * fp + minus * fm) / total;
        if !(z > 0.0) {
            return Err(Error::DegenerateBranch { site, probability: z });
        }
        let (sp, sm) = (fp / (z * total), fm / (z * total));
        let b = 1usize << site;
        for chunk in self.weights.chunks_exact_mut(b << 1) {
            let (minus_half, plus_half) = chunk.split_at_mut(b);
            minus_half.iter_mut().for_each(|w| *w *= sm);
            plus_half.iter_mut().for_each(|w| *w *= sp);
        }
        let log_density =
            lmax + z.ln() + 0.5 * (strength / (2.0 * std::f64::consts::PI)).ln();
        self.log_norm += log_density;
        Ok(log_density)
    }

    /// Weak measurement with `m` drawn from the exact Gaussian mixture
    /// `sum_n P(n) N(m; sigma_site(n), 1 / strength)`. At zero strength the
    /// state is untouched and `m` is a standard normal draw.
    pub fn measure_weak<R: Rng + ?Sized>(
        &mut self,
        site: usize,
        layer: usize,
        strength: f64,
        rng: &mut R,
    ) -> Result<MeasurementRecord> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::param("gamma*dt", "must be finite and >= 0"));
        }
        let noise: f64 = rng.sample(StandardNormal);
        let m = if strength == 0.0 {
            noise
        } else {
            let centre = if rng.random::<f64>() < self.marginal_plus(site) {
                1.0
            } else {
                -1.0
            };
            centre + noise / strength.sqrt()
        };
        self.condition_weak(site, m, strength)?;
        Ok(MeasurementRecord {
            layer,
            site,
            outcome: m,
        })
    }

    /// Distribution of the total charge `sum_i sigma_i`, indexed by the
    /// number of positive charges `0..=L`.
    pub fn sector_weights(&self) -> Vec<f64> {
        let mut sectors = vec![0.0; self.sites + 1];
        for (idx, w) in self.weights.iter().enumerate() {
            sectors[idx.count_ones() as usize] += w;
        }
        sectors
    }

    /// Variance of the total charge `sum_i sigma_i`.
    pub fn total_charge_variance(&self) -> f64 {
        let sectors = self.sector_weights();
        let total: f64 = sectors.iter().sum();
        let l = self.sites as f64;
        let (mut mean, mut second) = (0.0, 0.0);
        for (n, w) in sectors.iter().enumerate() {
            let q = 2.0 * n as f64 - l;
            mean += w * q;
            second += w * q * q;
        }
        mean /= total;
        (second / total - mean * mean).max(0.0)
    }

    /// True when every entry but one is zero.
    pub fn is_delta(&self) -> bool {
        self.weights.iter().filter(|&&w| w > 0.0).count() == 1
    }

    /// Total-variation distance to another distribution on the same sites.
    pub fn total_variation(&self, other: &Self) -> f64 {
        assert_eq!(self.sites, other.sites);
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Relabels sites by `site -> (site + shift) mod L`.
    pub fn translated(&self, shift: usize) -> Self {
        let l = self.sites;
        let shift = shift % l;
        let mask = (1usize << l) - 1;
        if shift == 0 {
            return self.clone();
        }
        let mut weights = vec![0.0; self.weights.len()];
        for (idx, w) in self.weights.iter().enumerate() {
            weights[((idx << shift) | (idx >> (l - shift))) & mask] = *w;
        }
        Self {
            sites: l,
            weights,
            log_norm: self.log_norm,
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;
    use rand::Rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn random_dist(sites: usize, seed: u64) -> ChargeDistribution {
        let mut rng = rng_stream(seed, 0);
        let w = (0..1 << sites).map(|_| rng.random::<f64>()).collect();
        ChargeDistribution::from_weights(sites, w).unwrap()
    }

    #[test]
    fn gate_keeps_uniform_fixed() {
        let mut d = ChargeDistribution::uniform(6).unwrap();
        let before = d.clone();
        for (i, j) in [(0, 1), (2, 3), (5, 0)] {
            d.apply_gate(i, j);
        }
        assert_eq!(d, before);
    }

    #[test]
    fn gate_splits_a_delta_across_the_mixed_pair() {
        // sites (0, 1) hold charges (+1, -1); site 2 is +1 throughout.
        let mut d = ChargeDistribution::delta(3, ChargeConfig(0b101)).unwrap();
        d.apply_gate(0, 1);
        assert_eq!(d.weights()[0b101], 0.5);
        assert_eq!(d.weights()[0b110], 0.5);
        assert_abs_diff_eq!(d.total_weight(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn gate_averages_mixed_sector_hand_example() {
        let mut d = ChargeDistribution::from_weights(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        d.apply_gate(0, 1);
        let expected = [0.1, 0.25, 0.25, 0.4];
        for (w, e) in d.weights().iter().zip(expected) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn symmetric_marginal_measurement() {
        let mut plus = 0;
        for stream in 0..2000 {
            let mut d = ChargeDistribution::uniform(4).unwrap();
            let mut rng = rng_stream(3, stream);
            let rec = d.measure_projective(2, 0, &mut rng).unwrap();
            if rec.outcome > 0.0 {
                plus += 1;
                assert_eq!(d.marginal_plus(2), 1.0);
            } else {
                assert_eq!(d.marginal_plus(2), 0.0);
            }
            assert_abs_diff_eq!(d.log_norm(), 0.5f64.ln(), epsilon = 1e-15);
        }
        // Binomial(2000, 1/2): 3 sigma is about 67.
        assert!((plus as i64 - 1000).abs() < 70, "{plus}");
    }

    #[test]
    fn delta_measurement_is_certain_and_inert() {
        let cfg = ChargeConfig::from_charges(&[1, -1, -1, 1]);
        let mut d = ChargeDistribution::delta(4, cfg).unwrap();
        let before = d.clone();
        let mut rng = rng_stream(1, 1);
        for site in 0..4 {
            let rec = d.measure_projective(site, 0, &mut rng).unwrap();
            assert_eq!(rec.outcome as i8, cfg.charge(site));
        }
        assert_eq!(d.weights(), before.weights());
    }

    #[test]
    fn impossible_branch_is_an_error() {
        let mut d = ChargeDistribution::delta(2, ChargeConfig(0b11)).unwrap();
        assert!(matches!(d.condition(0, -1), Err(Error::DegenerateBranch { .. })));
    }

    #[test]
    fn strong_weak_measurement_approaches_projective() {
        let base = random_dist(5, 17);
        let strength = 1e3;
        for stream in 0..50 {
            let mut weak = base.clone();
            let mut rng = rng_stream(11, stream);
            let rec = weak.measure_weak(3, 0, strength, &mut rng).unwrap();
            let mut proj = base.clone();
            proj.condition(3, if rec.outcome > 0.0 { 1 } else { -1 }).unwrap();
            assert!(weak.total_variation(&proj) < 1e-3);
        }
    }

    #[test]
    fn zero_strength_weak_measurement_is_inert() {
        let base = random_dist(4, 5);
        let mut d = base.clone();
        let mut rng = rng_stream(0, 0);
        let rec = d.measure_weak(1, 0, 0.0, &mut rng).unwrap();
        assert!(rec.outcome.is_finite());
        assert_eq!(d.weights(), base.weights());
    }

    #[test]
    fn weak_null_outcome_keeps_symmetric_marginal() {
        let mut d = ChargeDistribution::uniform(3).unwrap();
        d.condition_weak(1, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(d.marginal_plus(1), 0.5, epsilon = 1e-15);
        assert!(d.condition_weak(1, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn two_sector_weights() {
        let d = ChargeDistribution::two_sector(6, 3, 0.25).unwrap();
        let sectors = d.sector_weights();
        assert_abs_diff_eq!(sectors[3], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sectors[4], 0.75, epsilon = 1e-15);
        // Q = 2N - L takes values 0 and 2: variance 4 * w(1-w).
        assert_abs_diff_eq!(d.total_charge_variance(), 4.0 * 0.25 * 0.75, epsilon = 1e-14);
    }

    #[test]
    fn translation_matches_bit_rotation() {
        let d = ChargeDistribution::delta(5, ChargeConfig(0b00011)).unwrap();
        let t = d.translated(2);
        assert_eq!(t.weights()[0b01100], 1.0);
        let t = d.translated(4);
        assert_eq!(t.weights()[0b10001], 1.0);
        assert_eq!(d.translated(0), d);
    }

    #[test]
    fn size_limits() {
        assert!(ChargeDistribution::uniform(0).is_err());
        assert!(ChargeDistribution::uniform(MAX_DENSE_SITES + 1).is_err());
        assert!(ChargeDistribution::delta(3, ChargeConfig(0b1000)).is_err());
    }

    proptest! {
        #[test]
        fn gate_preserves_every_charge_sector(seed in any::<u64>(), i in 0usize..6) {
            let mut d = random_dist(6, seed);
            let before = d.sector_weights();
            d.apply_gate(i, (i + 1) % 6);
            for (a, b) in before.iter().zip(d.sector_weights()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn measurement_keeps_normalization(seed in any::<u64>(), site in 0usize..5, stream in 0u64..100) {
            let mut d = random_dist(5, seed);
            let mut rng = rng_stream(seed, stream);
            d.measure_projective(site, 0, &mut rng).unwrap();
            prop_assert!((d.total_weight() - 1.0).abs() < 1e-12);
            d.measure_weak((site + 1) % 5, 0, 0.7, &mut rng).unwrap();
            prop_assert!((d.total_weight() - 1.0).abs() < 1e-12);
            prop_assert!(d.weights().iter().all(|&w| w >= 0.0));
        }
    }
}
