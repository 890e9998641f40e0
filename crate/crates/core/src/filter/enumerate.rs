//! Exhaustive enumeration of projective measurement histories with exact
//! Born weights.

use serde::{Deserialize, Serialize};

use super::state::{ChargeDistribution, InitialState, MeasurementRecord, DEGENERATE_PROBABILITY};
use crate::circuit::{CircuitRealization, MeasurementMode};
use crate::error::{Error, Result};
use crate::observables::SnapshotMoments;

pub const MAX_ENUMERATION_SITES: usize = 6;
pub const MAX_ENUMERATION_DEPTH: usize = 6;
pub const MAX_BRANCHES: usize = 1 << 20;

/// One complete measurement history.
pub struct Leaf<'a> {
    /// Born probability of the history.
    pub weight: f64,
    pub state: &'a ChargeDistribution,
    pub records: &'a [MeasurementRecord],
}

struct Walker<'r, F> {
    realization: &'r CircuitRealization,
    records: Vec<MeasurementRecord>,
    leaves: usize,
    visit: F,
}

impl<F: FnMut(Leaf<'_>)> Walker<'_, F> {
    fn descend(&mut self, mut state: ChargeDistribution, layer: usize, next: usize, weight: f64) -> Result<()> {
        let r = self.realization;
        if layer == r.gate_layers() {
            self.leaves += 1;
            if self.leaves > MAX_BRANCHES {
                return Err(Error::SizeLimit {
                    what: "outcome branches",
                    value: self.leaves,
                    limit: MAX_BRANCHES,
                });
            }
            (self.visit)(Leaf {
                weight,
                state: &state,
                records: &self.records,
            });
            return Ok(());
        }
        if next == 0 {
            for &(i, j) in r.bonds(layer) {
                state.apply_gate(i, j);
            }
        }
        let sites = r.measured_sites(layer);
        if next == sites.len() {
            return self.descend(state, layer + 1, 0, weight);
        }
        let site = sites[next];
        let p_plus = state.marginal_plus(site);
        let branches = [(1i8, p_plus), (-1i8, 1.0 - p_plus)];
        let live: Vec<_> = branches
            .into_iter()
            .filter(|(_, p)| *p >= DEGENERATE_PROBABILITY)
            .collect();
        let n_live = live.len();
        let mut owned = Some(state);
        for (k, (outcome, _)) in live.into_iter().enumerate() {
            let mut branch = if k + 1 == n_live {
                owned.take().expect("state consumed once")
            } else {
                owned.clone().expect("state present")
            };
            let prob = branch.condition(site, outcome)?;
            self.records.push(MeasurementRecord {
                layer,
                site,
                outcome: outcome as f64,
            });
            self.descend(branch, layer, next + 1, weight * prob)?;
            self.records.pop();
        }
        Ok(())
    }
}

/// Depth-first walk over every measurement history of `realization` with
/// nonzero probability, calling `visit` at each complete history. Returns
/// the number of histories.
pub fn enumerate_trajectories<F>(
    realization: &CircuitRealization,
    initial: &InitialState,
    visit: F,
) -> Result<usize>
where
    F: FnMut(Leaf<'_>),
{
    let spec = realization.spec();
    if spec.mode != MeasurementMode::Projective {
        return Err(Error::spec("mode", "enumeration needs projective measurements"));
    }
    if spec.sites > MAX_ENUMERATION_SITES {
        return Err(Error::SizeLimit {
            what: "enumeration sites",
            value: spec.sites,
            limit: MAX_ENUMERATION_SITES,
        });
    }
    if spec.depth > MAX_ENUMERATION_DEPTH {
        return Err(Error::SizeLimit {
            what: "enumeration depth",
            value: spec.depth,
            limit: MAX_ENUMERATION_DEPTH,
        });
    }
    let mut walker = Walker {
        realization,
        records: Vec::new(),
        leaves: 0,
        visit,
    };
    let state = ChargeDistribution::from_initial(spec.sites, initial)?;
    walker.descend(state, 0, 0, 1.0)?;
    Ok(walker.leaves)
}

/// Exact trajectory averages of diagonal one- and two-point functions at
/// the final time. Matrices are row-major `L x L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub sites: usize,
    pub branches: usize,
    pub total_weight: f64,
    /// `E[<sigma_i>]`
    pub magnetization: Vec<f64>,
    /// `E[<sigma_i sigma_j>]`
    pub pair: Vec<f64>,
    /// `E[<sigma_i> <sigma_j>]`
    pub product: Vec<f64>,
    /// `E[<sigma_i sigma_j>^2]`
    pub pair_squared: Vec<f64>,
    /// `sum_m P(m)^2 <sigma_i sigma_j>_m^2`
    pub pair_squared_born2: Vec<f64>,
    /// `sum_m P(m)^2`
    pub born2_norm: f64,
}

impl ExactMoments {
    pub fn compute(realization: &CircuitRealization, initial: &InitialState) -> Result<Self> {
        let l = realization.sites();
        let mut m = ExactMoments {
            sites: l,
            branches: 0,
            total_weight: 0.0,
            magnetization: vec![0.0; l],
            pair: vec![0.0; l * l],
            product: vec![0.0; l * l],
            pair_squared: vec![0.0; l * l],
            pair_squared_born2: vec![0.0; l * l],
            born2_norm: 0.0,
        };
        m.branches = enumerate_trajectories(realization, initial, |leaf| {
            let s = SnapshotMoments::compute(leaf.state);
            let w = leaf.weight;
            m.total_weight += w;
            m.born2_norm += w * w;
            for i in 0..l {
                m.magnetization[i] += w * s.magnetization(i);
                for j in 0..l {
                    let k = i * l + j;
                    let c = s.pair(i, j);
                    m.pair[k] += w * c;
                    m.product[k] += w * s.magnetization(i) * s.magnetization(j);
                    m.pair_squared[k] += w * c * c;
                    m.pair_squared_born2[k] += w * w * c * c;
                }
            }
        })?;
        Ok(m)
    }

    pub fn magnetization(&self, i: usize) -> f64 {
        self.magnetization[i]
    }

    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.pair[i * self.sites + j]
    }

    pub fn product(&self, i: usize, j: usize) -> f64 {
        self.product[i * self.sites + j]
    }

    pub fn connected(&self, i: usize, j: usize) -> f64 {
        self.pair(i, j) - self.product(i, j)
    }

    pub fn pair_squared(&self, i: usize, j: usize) -> f64 {
        self.pair_squared[i * self.sites + j]
    }

    pub fn pair_squared_born2(&self, i: usize, j: usize) -> f64 {
        self.pair_squared_born2[i * self.sites + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{realize, CircuitSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn no_measurements_single_branch() {
        let r = realize(&CircuitSpec::projective(4, 3, 0.0, 1)).unwrap();
        let mut weights = Vec::new();
        let n = enumerate_trajectories(&r, &InitialState::Uniform, |leaf| weights.push(leaf.weight)).unwrap();
        assert_eq!(n, 1);
        assert_eq!(weights, vec![1.0]);
    }

    #[test]
    fn full_measurement_branches_are_configurations() {
        // p = 1: the first layer's outcomes fix everything; later ones are forced.
        let r = realize(&CircuitSpec::projective(4, 1, 1.0, 1)).unwrap();
        let mut leaves = Vec::new();
        enumerate_trajectories(&r, &InitialState::Uniform, |leaf| {
            assert!(leaf.state.is_delta());
            leaves.push(leaf.weight);
        })
        .unwrap();
        let total: f64 = leaves.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(leaves.len() >= 16);
    }

    #[test]
    fn size_guards() {
        let big = realize(&CircuitSpec::projective(8, 1, 0.5, 1)).unwrap();
        assert!(matches!(
            enumerate_trajectories(&big, &InitialState::Uniform, |_| {}),
            Err(Error::SizeLimit { .. })
        ));
        let deep = realize(&CircuitSpec::projective(4, 7, 0.5, 1)).unwrap();
        assert!(matches!(
            enumerate_trajectories(&deep, &InitialState::Uniform, |_| {}),
            Err(Error::SizeLimit { .. })
        ));
        let weak = CircuitSpec {
            mode: MeasurementMode::Weak { gamma: 1.0, dt: 0.1 },
            ..CircuitSpec::projective(4, 1, 0.5, 1)
        };
        assert!(enumerate_trajectories(&realize(&weak).unwrap(), &InitialState::Uniform, |_| {}).is_err());
    }

    #[test]
    fn branch_overflow_is_refused() {
        // 64 first-layer outcomes, then roughly a factor 3 per layer
        let r = realize(&CircuitSpec::projective(6, 6, 1.0, 1)).unwrap();
        let result = enumerate_trajectories(&r, &InitialState::Uniform, |_| {});
        assert!(matches!(result, Err(Error::SizeLimit { what: "outcome branches", .. })));
    }

    #[test]
    fn uniform_without_measurement_has_trivial_moments() {
        let r = realize(&CircuitSpec::projective(4, 2, 0.0, 3)).unwrap();
        let m = ExactMoments::compute(&r, &InitialState::Uniform).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(m.magnetization(i), 0.0, epsilon = 1e-15);
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m.pair(i, j), expect, epsilon = 1e-15);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn weights_sum_to_one(seed in any::<u64>(), p in 0.0f64..1.0, depth in 1usize..3) {
            let r = realize(&CircuitSpec::projective(4, depth, p, seed)).unwrap();
            let mut total = 0.0;
            enumerate_trajectories(&r, &InitialState::Uniform, |leaf| total += leaf.weight).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn uniform_start_is_unbiased(seed in any::<u64>(), p in 0.0f64..1.0) {
            // E[<sigma_i>] = 0 by the global charge-flip symmetry of the uniform start
            let r = realize(&CircuitSpec::projective(4, 2, p, seed)).unwrap();
            let m = ExactMoments::compute(&r, &InitialState::Uniform).unwrap();
            for i in 0..4 {
                prop_assert!(m.magnetization(i).abs() < 1e-12);
            }
        }
    }
}
