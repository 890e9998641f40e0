//! Fixtures shared by the kernel benchmarks.

use sharpen_core::filter::{run_realization, SnapshotSchedule};
use sharpen_core::{realize, ChargeDistribution, CircuitRealization, CircuitSpec, InitialState};

/// A mid-evolution distribution: `L` full steps at rate `p` from uniform.
pub fn evolved_state(sites: usize, p: f64) -> ChargeDistribution {
    let realization = realize(&CircuitSpec::projective(sites, sites, p, 1)).expect("valid spec");
    run_realization(&realization, &InitialState::Uniform, 0, &SnapshotSchedule::NONE, |_, _| {})
        .expect("trajectory")
        .state
}

/// Percolation-sized circuit with depth `2 L`.
pub fn percolation_circuit(sites: usize, p: f64, seed: u64) -> CircuitRealization {
    realize(&CircuitSpec::projective(sites, 2 * sites, p, seed)).expect("valid spec")
}
