//! Literal replicated transfer matrix for small systems. Replica `a`
//! occupies bits `a L .. (a + 1) L` of the joint configuration index.

use super::enumerate::enumerate_trajectories;
use super::state::{InitialState, MeasurementRecord};
use crate::circuit::CircuitRealization;
use crate::error::{Error, Result};

pub const MAX_REPLICA_SITES: usize = 8;

/// How a measurement layer acts on the replicas.
#[derive(Debug, Clone, Copy)]
pub enum Outcomes<'a> {
    /// All replicas forced to agree, outcome summed over.
    Summed,
    /// All replicas forced to the recorded outcomes.
    Fixed(&'a [MeasurementRecord]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOracleState {
    sites: usize,
    replicas: usize,
    weights: Vec<f64>,
}

type Complex = (f64, f64);

fn cmul(a: Complex, b: Complex) -> Complex {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// `(X X + Y Y + Z Z + 3) / 4` in the basis `|s_i s_j>`, `s = 0, 1`, with
/// row index `2 s_i + s_j`. Equals the projector onto the triplet.
pub fn triplet_gate() -> [[f64; 4]; 4] {
    let zero = (0.0, 0.0);
    let one = (1.0, 0.0);
    let x = [[zero, one], [one, zero]];
    let y = [[zero, (0.0, -1.0)], [(0.0, 1.0), zero]];
    let z = [[one, zero], [zero, (-1.0, 0.0)]];
    let mut m = [[0.0; 4]; 4];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            let (ri, rj, ci, cj) = (r >> 1, r & 1, c >> 1, c & 1);
            let mut sum = if r == c { (3.0, 0.0) } else { zero };
            for p in [&x, &y, &z] {
                let t = cmul(p[ri][ci], p[rj][cj]);
                sum = (sum.0 + t.0, sum.1 + t.1);
            }
            debug_assert!(sum.1 == 0.0);
            *entry = sum.0 / 4.0;
        }
    }
    m
}

impl ReplicaOracleState {
    /// Product of `replicas` copies of the uniform distribution.
    pub fn uniform(sites: usize, replicas: usize) -> Result<Self> {
        if !(2..=3).contains(&replicas) {
            return Err(Error::param("Q", "replica count must be 2 or 3"));
        }
        if sites == 0 || sites > MAX_REPLICA_SITES {
            return Err(Error::SizeLimit {
                what: "replica oracle sites",
                value: sites,
                limit: MAX_REPLICA_SITES,
            });
        }
        let n = 1usize << (sites * replicas);
        Ok(Self {
            sites,
            replicas,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Unnormalized total weight, the replicated partition function.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Configuration of replica `a` in joint index `idx`.
    pub fn replica_config(&self, idx: usize, a: usize) -> usize {
        (idx >> (a * self.sites)) & ((1 << self.sites) - 1)
    }

    /// Applies the triplet projector on bond `(i, j)` in every replica.
    pub fn apply_gate(&mut self, i: usize, j: usize) {
        let m = triplet_gate();
        for a in 0..self.replicas {
            let (bi, bj) = (1usize << (i + a * self.sites), 1usize << (j + a * self.sites));
            for idx in 0..self.weights.len() {
                if idx & (bi | bj) != 0 {
                    continue;
                }
                let legs = [idx, idx | bj, idx | bi, idx | bi | bj];
                let old = legs.map(|k| self.weights[k]);
                for (r, &k) in legs.iter().enumerate() {
                    self.weights[k] = (0..4).map(|c| m[r][c] * old[c]).sum();
                }
            }
        }
    }

    /// Keeps only joint configurations whose replicas all carry charge
    /// `outcome` at `site` (any common value when `outcome` is `None`).
    pub fn measure(&mut self, site: usize, outcome: Option<i8>) {
        let (sites, replicas) = (self.sites, self.replicas);
        for (idx, w) in self.weights.iter_mut().enumerate() {
            let bits: Vec<usize> = (0..replicas).map(|a| (idx >> (site + a * sites)) & 1).collect();
            let agree = bits.iter().all(|b| *b == bits[0]);
            let allowed = match outcome {
                None => agree,
                Some(o) => agree && bits[0] == usize::from(o > 0),
            };
            if !allowed {
                *w = 0.0;
            }
        }
    }

    /// One gate layer followed by its measurement layer.
    pub fn transfer_step(&mut self, realization: &CircuitRealization, layer: usize, outcomes: Outcomes<'_>) -> Result<()> {
        if realization.sites() != self.sites {
            return Err(Error::param("realization", "site count differs from oracle state"));
        }
        for &(i, j) in realization.bonds(layer) {
            self.apply_gate(i, j);
        }
        for &site in realization.measured_sites(layer) {
            let outcome = match outcomes {
                Outcomes::Summed => None,
                Outcomes::Fixed(records) => {
                    let record = records
                        .iter()
                        .find(|r| r.layer == layer && r.site == site)
                        .ok_or_else(|| Error::param("records", format!("no outcome for layer {layer} site {site}")))?;
                    Some(if record.outcome > 0.0 { 1 } else { -1 })
                }
            };
            self.measure(site, outcome);
        }
        Ok(())
    }

    pub fn evolve(&mut self, realization: &CircuitRealization, outcomes: Outcomes<'_>) -> Result<()> {
        for layer in 0..realization.gate_layers() {
            self.transfer_step(realization, layer, outcomes)?;
        }
        Ok(())
    }

    /// `<1| O (x) ... (x) O |rho>` for a diagonal single-replica observable.
    pub fn replicated_moment(&self, observable: impl Fn(usize) -> f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(idx, w)| w * (0..self.replicas).map(|a| observable(self.replica_config(idx, a))).product::<f64>())
            .sum()
    }
}

/// `sigma_i sigma_j` of a single-replica configuration.
pub fn pair_observable(i: usize, j: usize) -> impl Fn(usize) -> f64 + Copy {
    move |n| if ((n >> i) ^ (n >> j)) & 1 == 0 { 1.0 } else { -1.0 }
}

/// Born-weighted replica moment `sum_m Z_m^{1/Q} <1|O^{(x)Q}|rho_m> / Z_m`
/// over all outcome histories `m`, with `rho_m` the fixed-outcome replicated
/// state and `Z_m` its weight. Equals `E[<O>^Q]` over Born-sampled
/// trajectories.
pub fn born_weighted_moment(
    realization: &CircuitRealization,
    replicas: usize,
    observable: impl Fn(usize) -> f64 + Copy,
) -> Result<f64> {
    let mut total = 0.0;
    let mut failure = None;
    enumerate_trajectories(realization, &InitialState::Uniform, |leaf| {
        if failure.is_some() {
            return;
        }
        let run = || -> Result<f64> {
            let mut state = ReplicaOracleState::uniform(realization.sites(), replicas)?;
            state.evolve(realization, Outcomes::Fixed(leaf.records))?;
            let z = state.total_weight();
            Ok(z.powf(1.0 / replicas as f64) * state.replicated_moment(observable) / z)
        };
        match run() {
            Ok(v) => total += v,
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{realize, CircuitSpec};
    use crate::filter::{ChargeDistribution, ExactMoments};
    use approx::assert_abs_diff_eq;

    #[test]
    fn triplet_gate_is_half_identity_plus_swap() {
        let m = triplet_gate();
        let expect = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        assert_eq!(m, expect);
    }

    #[test]
    fn uniform_is_stationary_without_measurements() {
        let r = realize(&CircuitSpec::projective(4, 2, 0.0, 5)).unwrap();
        let mut s = ReplicaOracleState::uniform(4, 2).unwrap();
        let before = s.clone();
        s.evolve(&r, Outcomes::Summed).unwrap();
        for (a, b) in s.weights().iter().zip(before.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn unmeasured_replicas_factorize() {
        // Start from a product of two different delta states and compare
        // with two independent single-replica evolutions.
        let r = realize(&CircuitSpec::projective(4, 2, 0.0, 5)).unwrap();
        let (c0, c1) = (0b0011usize, 0b0101usize);
        let mut s = ReplicaOracleState::uniform(4, 2).unwrap();
        s.weights.iter_mut().for_each(|w| *w = 0.0);
        s.weights[c0 | c1 << 4] = 1.0;
        s.evolve(&r, Outcomes::Summed).unwrap();
        let single = |c: usize| {
            let mut d = ChargeDistribution::delta(4, crate::filter::ChargeConfig(c as u64)).unwrap();
            for layer in 0..r.gate_layers() {
                for &(i, j) in r.bonds(layer) {
                    d.apply_gate(i, j);
                }
            }
            d
        };
        let (d0, d1) = (single(c0), single(c1));
        for (idx, w) in s.weights().iter().enumerate() {
            let expect = d0.weights()[idx & 15] * d1.weights()[idx >> 4];
            assert_abs_diff_eq!(*w, expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn contract_errors() {
        assert!(ReplicaOracleState::uniform(4, 1).is_err());
        assert!(ReplicaOracleState::uniform(4, 4).is_err());
        assert!(ReplicaOracleState::uniform(9, 2).is_err());
        let r = realize(&CircuitSpec::projective(4, 1, 1.0, 5)).unwrap();
        let mut s = ReplicaOracleState::uniform(4, 2).unwrap();
        assert!(s.transfer_step(&r, 0, Outcomes::Fixed(&[])).is_err());
    }

    #[test]
    fn born_weighted_moment_matches_enumeration() {
        for seed in 0..3 {
            let r = realize(&CircuitSpec::projective(4, 2, 0.5, seed)).unwrap();
            let exact = ExactMoments::compute(&r, &InitialState::Uniform).unwrap();
            for x in 1..4 {
                let v = born_weighted_moment(&r, 2, pair_observable(x, 0)).unwrap();
                assert_abs_diff_eq!(v, exact.pair_squared(x, 0), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn summed_outcomes_give_squared_born_weights() {
        for seed in 0..3 {
            let r = realize(&CircuitSpec::projective(4, 2, 0.5, seed)).unwrap();
            let exact = ExactMoments::compute(&r, &InitialState::Uniform).unwrap();
            let mut s = ReplicaOracleState::uniform(4, 2).unwrap();
            s.evolve(&r, Outcomes::Summed).unwrap();
            assert_abs_diff_eq!(s.total_weight(), exact.born2_norm, epsilon = 1e-12);
            for x in 1..4 {
                let v = s.replicated_moment(pair_observable(x, 0));
                assert_abs_diff_eq!(v, exact.pair_squared_born2(x, 0), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn three_replicas_cube_of_expectation() {
        let r = realize(&CircuitSpec::projective(4, 1, 0.5, 9)).unwrap();
        let mut cube = 0.0;
        enumerate_trajectories(&r, &InitialState::Uniform, |leaf| {
            let m = crate::observables::SnapshotMoments::compute(leaf.state);
            cube += leaf.weight * m.pair(1, 0).powi(3);
        })
        .unwrap();
        let v = born_weighted_moment(&r, 3, pair_observable(1, 0)).unwrap();
        assert_abs_diff_eq!(v, cube, epsilon = 1e-10);
    }
}
