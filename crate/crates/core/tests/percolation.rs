use std::collections::HashMap;

use proptest::prelude::*;
use rand::Rng;
use sharpen_core::filter::{enumerate_trajectories, smooth};
use sharpen_core::percolation::{
    cluster, propagate_sharpness, threshold_estimate, wrap_probability, ChargeHistory, PropagationRule,
    SharpLattice, SweepOrder,
};
use sharpen_core::rng::{rng_stream, HISTORY_STREAM};
use sharpen_core::{realize, CircuitRealization, CircuitSpec, InitialState};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const ORDERS: [SweepOrder; 3] = [SweepOrder::Worklist, SweepOrder::ForwardSweeps, SweepOrder::BackwardSweeps];

fn history(realization: &CircuitRealization) -> ChargeHistory {
    ChargeHistory::sample(realization, &mut rng_stream(realization.spec().seed, HISTORY_STREAM))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fixed_point_does_not_depend_on_sweep_order(
        half in 2usize..12,
        depth in 1usize..16,
        p in 0.0f64..0.7,
        seed in any::<u64>(),
    ) {
        let realization = realize(&CircuitSpec::projective(2 * half, depth, p, seed)).unwrap();
        let h = history(&realization);
        for rule in [PropagationRule::ThreeOfFour, PropagationRule::ChargeValues] {
            let values = (rule == PropagationRule::ChargeValues).then(|| h.values());
            let reference = propagate_sharpness(&realization, values, rule, ORDERS[0]).unwrap();
            for order in &ORDERS[1..] {
                let other = propagate_sharpness(&realization, values, rule, *order).unwrap();
                prop_assert_eq!(reference.sharp_flags(), other.sharp_flags());
                prop_assert!(reference == other);
            }
        }
    }

    #[test]
    fn an_extra_measurement_never_removes_sharpness(
        half in 2usize..10,
        depth in 1usize..12,
        p in 0.0f64..0.6,
        seed in any::<u64>(),
        extra in any::<(usize, usize)>(),
    ) {
        let realization = realize(&CircuitSpec::projective(2 * half, depth, p, seed)).unwrap();
        let h = history(&realization);
        let layer = extra.0 % realization.gate_layers();
        let site = extra.1 % realization.sites();
        let more = realization.with_measurement(layer, site);
        for rule in [PropagationRule::MeasuredOnly, PropagationRule::ThreeOfFour, PropagationRule::ChargeValues] {
            let values = (rule == PropagationRule::ChargeValues).then(|| h.values());
            let before = propagate_sharpness(&realization, values, rule, SweepOrder::Worklist).unwrap();
            let after = propagate_sharpness(&more, values, rule, SweepOrder::Worklist).unwrap();
            for (b, a) in before.sharp_flags().iter().zip(after.sharp_flags()) {
                prop_assert!(!b || *a);
            }
            // a wrapping cluster survives as well
            if cluster(&realization, &before).wraps() {
                prop_assert!(cluster(&more, &after).wraps());
            }
        }
    }
}

#[test]
fn value_aware_propagation_dominates_the_three_of_four_rule() {
    for seed in 0..200 {
        let realization = realize(&CircuitSpec::projective(12, 12, 0.3, seed)).unwrap();
        let h = history(&realization);
        let literal = propagate_sharpness(&realization, None, PropagationRule::ThreeOfFour, SweepOrder::Worklist).unwrap();
        let aware =
            propagate_sharpness(&realization, Some(h.values()), PropagationRule::ChargeValues, SweepOrder::Worklist)
                .unwrap();
        for (l, a) in literal.sharp_flags().iter().zip(aware.sharp_flags()) {
            assert!(!l || *a);
        }
        // every deduced value agrees with the hidden history
        for s in 0..aware.slices() {
            for i in 0..aware.sites() {
                if let Some(v) = aware.value(s, i) {
                    assert_eq!(v, h.value(s, i));
                }
            }
        }
    }
}

#[test]
fn propagated_links_are_definite_under_exact_smoothing() {
    let mut propagated = 0usize;
    let mut extra = 0usize;
    for seed in 0..6 {
        for (sites, depth, p) in [(4, 3, 0.4), (6, 2, 0.35)] {
            let realization = realize(&CircuitSpec::projective(sites, depth, p, seed)).unwrap();
            let mut leaves = Vec::new();
            enumerate_trajectories(&realization, &InitialState::Uniform, |leaf| leaves.push(leaf.records.to_vec()))
                .unwrap();
            for records in &leaves {
                let lattice = SharpLattice::from_records(&realization, records);
                let sharp = sharpen_core::percolation::propagate_from(
                    &realization,
                    lattice,
                    PropagationRule::ChargeValues,
                    SweepOrder::Worklist,
                )
                .unwrap();
                let posterior = smooth(&realization, &InitialState::Uniform, records).unwrap();
                for s in 0..sharp.slices() {
                    for i in 0..sites {
                        let definite = posterior.definite(s, i, 1e-12);
                        match sharp.value(s, i) {
                            Some(v) => {
                                assert_eq!(definite, Some(v), "seed {seed} L={sites} link ({s},{i})");
                                propagated += 1;
                            }
                            None => extra += definite.is_some() as usize,
                        }
                    }
                }
            }
        }
    }
    assert!(propagated > 0);
    println!("propagated sharp links: {propagated}, definite but not propagated: {extra}");
}

#[test]
fn sampled_histories_give_born_distributed_records() {
    let realization = realize(&CircuitSpec::projective(4, 2, 0.5, 21)).unwrap();
    let key = |records: &[sharpen_core::MeasurementRecord]| -> Vec<i8> {
        records.iter().map(|r| if r.outcome > 0.0 { 1 } else { -1 }).collect()
    };
    let mut exact = HashMap::new();
    enumerate_trajectories(&realization, &InitialState::Uniform, |leaf| {
        exact.insert(key(leaf.records), leaf.weight);
    })
    .unwrap();
    assert!(exact.len() > 4);
    let n = 50_000;
    let mut counts: HashMap<Vec<i8>, usize> = HashMap::new();
    let mut rng = rng_stream(5, 0);
    for _ in 0..n {
        let h = ChargeHistory::sample(&realization, &mut rng);
        *counts.entry(key(&h.records(&realization))).or_default() += 1;
    }
    for k in counts.keys() {
        assert!(exact.contains_key(k), "history produced an impossible record {k:?}");
    }
    let chi2: f64 = exact
        .iter()
        .map(|(k, w)| {
            let expected = w * n as f64;
            let observed = *counts.get(k).unwrap_or(&0) as f64;
            (observed - expected).powi(2) / expected
        })
        .sum();
    let dof = (exact.len() - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "chi2 = {chi2} on {dof} dof");
}

#[test]
fn wrap_probability_is_monotone_in_p_for_nested_realizations() {
    let sizes = [8usize, 16];
    let ps = [0.1, 0.3, 0.5, 0.7, 0.9];
    for rule in [PropagationRule::MeasuredOnly, PropagationRule::ChargeValues] {
        for l in sizes {
            let mut last = 0;
            for p in ps {
                let e = wrap_probability(p, l, 2 * l, 200, 3, rule).unwrap();
                assert!(e.wrapping >= last, "{rule:?} L={l} p={p}");
                last = e.wrapping;
            }
        }
    }
}

#[test]
fn value_aware_threshold_sits_below_measured_link_threshold() {
    let ps: Vec<f64> = (0..9).map(|k| 0.2 + 0.05 * k as f64).collect();
    let scan = |rule| {
        let mut out = Vec::new();
        for l in [8usize, 16] {
            for &p in &ps {
                out.push(wrap_probability(p, l, 2 * l, 300, 9, rule).unwrap());
            }
        }
        threshold_estimate(&out).unwrap().0
    };
    let charge = scan(PropagationRule::ChargeValues);
    let measured = scan(PropagationRule::MeasuredOnly);
    assert!(charge < measured, "{charge} vs {measured}");
}

#[test]
fn wrapping_needs_a_connected_loop() {
    let mut rng = rng_stream(77, 0);
    for _ in 0..50 {
        let seed: u64 = rng.random();
        let realization = realize(&CircuitSpec::projective(10, 6, 0.0, seed)).unwrap();
        let lattice = propagate_sharpness(&realization, None, PropagationRule::ThreeOfFour, SweepOrder::Worklist).unwrap();
        assert_eq!(lattice.sharp_count(), 0);
        assert!(!cluster(&realization, &lattice).wraps());
    }
}
