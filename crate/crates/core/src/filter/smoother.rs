//! Forward-backward smoothing of link charges given a full projective
//! outcome record. Link `(s, i)` is the charge of site `i` on time slice
//! `s`: slice 0 precedes gate layer 0 and slice `k + 1` follows gate layer
//! `k` and carries its measurements.

use super::state::{ChargeDistribution, InitialState, MeasurementRecord};
use crate::circuit::CircuitRealization;
use crate::error::{Error, Result};

/// Posterior `P(sigma = +1 | all outcomes)` for every link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPosterior {
    sites: usize,
    slices: usize,
    plus: Vec<f64>,
}

impl LinkPosterior {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn plus(&self, slice: usize, site: usize) -> f64 {
        self.plus[slice * self.sites + site]
    }

    /// Definite value (`+1` / `-1`) when the posterior is within `tol` of
    /// certainty.
    pub fn definite(&self, slice: usize, site: usize, tol: f64) -> Option<i8> {
        let p = self.plus(slice, site);
        if p >= 1.0 - tol {
            Some(1)
        } else if p <= tol {
            Some(-1)
        } else {
            None
        }
    }
}

fn outcome_of(records: &[MeasurementRecord], layer: usize, site: usize) -> Result<i8> {
    records
        .iter()
        .find(|r| r.layer == layer && r.site == site)
        .map(|r| if r.outcome > 0.0 { 1 } else { -1 })
        .ok_or_else(|| Error::param("records", format!("no outcome for layer {layer} site {site}")))
}

fn gate_layer(dist: &mut ChargeDistribution, realization: &CircuitRealization, layer: usize) {
    for &(i, j) in realization.bonds(layer) {
        dist.apply_gate(i, j);
    }
}

fn project(dist: &mut ChargeDistribution, realization: &CircuitRealization, layer: usize, records: &[MeasurementRecord]) -> Result<()> {
    for &site in realization.measured_sites(layer) {
        dist.condition(site, outcome_of(records, layer, site)?)?;
    }
    Ok(())
}

/// Smoothed link marginals. The gate layers are symmetric matrices, so the
/// backward pass reuses the forward kernels.
pub fn smooth(realization: &CircuitRealization, initial: &InitialState, records: &[MeasurementRecord]) -> Result<LinkPosterior> {
    let l = realization.sites();
    let g = realization.gate_layers();
    let mut forward = Vec::with_capacity(g + 1);
    let mut alpha = ChargeDistribution::from_initial(l, initial)?;
    forward.push(alpha.clone());
    for layer in 0..g {
        gate_layer(&mut alpha, realization, layer);
        project(&mut alpha, realization, layer, records)?;
        forward.push(alpha.clone());
    }

    let mut plus = vec![0.0; (g + 1) * l];
    let mut beta = ChargeDistribution::uniform(l)?;
    for slice in (0..=g).rev() {
        let joint: Vec<f64> = forward[slice]
            .weights()
            .iter()
            .zip(beta.weights())
            .map(|(a, b)| a * b)
            .collect();
        let joint = ChargeDistribution::from_weights(l, joint)?;
        for site in 0..l {
            plus[slice * l + site] = joint.marginal_plus(site);
        }
        if slice > 0 {
            project(&mut beta, realization, slice - 1, records)?;
            gate_layer(&mut beta, realization, slice - 1);
        }
    }
    Ok(LinkPosterior {
        sites: l,
        slices: g + 1,
        plus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{realize, CircuitSpec};
    use crate::filter::enumerate_trajectories;
    use approx::assert_abs_diff_eq;

    #[test]
    fn final_slice_matches_filter() {
        let r = realize(&CircuitSpec::projective(4, 2, 0.4, 17)).unwrap();
        enumerate_trajectories(&r, &InitialState::Uniform, |leaf| {
            let post = smooth(&r, &InitialState::Uniform, leaf.records).unwrap();
            for site in 0..4 {
                assert_abs_diff_eq!(post.plus(r.gate_layers(), site), leaf.state.marginal_plus(site), epsilon = 1e-12);
            }
        })
        .unwrap();
    }

    #[test]
    fn measured_links_are_definite() {
        let r = realize(&CircuitSpec::projective(4, 2, 0.5, 2)).unwrap();
        enumerate_trajectories(&r, &InitialState::Uniform, |leaf| {
            let post = smooth(&r, &InitialState::Uniform, leaf.records).unwrap();
            for rec in leaf.records {
                let v = post.definite(rec.layer + 1, rec.site, 1e-12);
                assert_eq!(v, Some(rec.outcome as i8));
            }
        })
        .unwrap();
    }

    #[test]
    fn no_records_leave_links_uncertain() {
        let r = realize(&CircuitSpec::projective(4, 2, 0.0, 2)).unwrap();
        let post = smooth(&r, &InitialState::Uniform, &[]).unwrap();
        for s in 0..post.slices() {
            for i in 0..4 {
                assert_abs_diff_eq!(post.plus(s, i), 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn missing_record_is_an_error() {
        let r = realize(&CircuitSpec::projective(4, 1, 1.0, 2)).unwrap();
        assert!(smooth(&r, &InitialState::Uniform, &[]).is_err());
    }
}
