use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::{ChargeDistribution, InitialState, MeasurementRecord};
use crate::circuit::{realize, CircuitRealization, CircuitSpec, MeasurementMode};
use crate::error::Result;
use crate::rng::rng_stream;

/// Snapshot times in full time steps: `t = burn_in, burn_in + every, ...`.
/// `t = 0` is the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotSchedule {
    pub burn_in: usize,
    pub every: usize,
}

impl SnapshotSchedule {
    pub const NONE: SnapshotSchedule = SnapshotSchedule {
        burn_in: usize::MAX,
        every: 1,
    };

    pub fn every_step() -> Self {
        Self { burn_in: 0, every: 1 }
    }

    /// Burn-in of `4 L` full steps, then one snapshot every `L` steps.
    pub fn steady_state(sites: usize) -> Self {
        Self {
            burn_in: 4 * sites,
            every: sites,
        }
    }

    pub fn contains(&self, t: usize) -> bool {
        self.every > 0 && t >= self.burn_in && (t - self.burn_in) % self.every == 0
    }

    pub fn count_up_to(&self, depth: usize) -> usize {
        (0..=depth).filter(|&t| self.contains(t)).count()
    }

    /// Depth giving exactly `snapshots` snapshots.
    pub fn depth_for(&self, snapshots: usize) -> usize {
        self.burn_in + self.every * snapshots.saturating_sub(1)
    }
}

/// Applies gate layer `layer` followed by its measurement layer.
pub fn step<R: Rng + ?Sized>(
    dist: &mut ChargeDistribution,
    realization: &CircuitRealization,
    layer: usize,
    rng: &mut R,
    records: &mut Vec<MeasurementRecord>,
) -> Result<()> {
    for &(i, j) in realization.bonds(layer) {
        dist.apply_gate(i, j);
    }
    let mode = realization.spec().mode;
    for &site in realization.measured_sites(layer) {
        let record = match mode {
            MeasurementMode::Projective => dist.measure_projective(site, layer, rng)?,
            MeasurementMode::Weak { gamma, dt } => dist.measure_weak(site, layer, gamma * dt, rng)?,
        };
        records.push(record);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub state: ChargeDistribution,
    pub records: Vec<MeasurementRecord>,
}

/// Evolves one trajectory over the full depth of `realization`, calling
/// `on_snapshot(t, state)` at each scheduled full time step. Outcomes are
/// drawn from stream `stream_id` of the realization's seed.
pub fn run_realization<F>(
    realization: &CircuitRealization,
    initial: &InitialState,
    stream_id: u64,
    schedule: &SnapshotSchedule,
    mut on_snapshot: F,
) -> Result<TrajectoryResult>
where
    F: FnMut(usize, &ChargeDistribution),
{
    let spec = realization.spec();
    let mut rng = rng_stream(spec.seed, stream_id);
    let mut state = ChargeDistribution::from_initial(spec.sites, initial)?;
    let mut records = Vec::new();
    if schedule.contains(0) {
        on_snapshot(0, &state);
    }
    for t in 1..=spec.depth {
        step(&mut state, realization, 2 * (t - 1), &mut rng, &mut records)?;
        step(&mut state, realization, 2 * (t - 1) + 1, &mut rng, &mut records)?;
        if schedule.contains(t) {
            on_snapshot(t, &state);
        }
    }
    Ok(TrajectoryResult { state, records })
}

/// Realizes `spec` and runs one trajectory from the uniform state.
pub fn run_trajectory<F>(
    spec: &CircuitSpec,
    stream_id: u64,
    schedule: &SnapshotSchedule,
    on_snapshot: F,
) -> Result<TrajectoryResult>
where
    F: FnMut(usize, &ChargeDistribution),
{
    let realization = realize(spec)?;
    run_realization(&realization, &InitialState::Uniform, stream_id, schedule, on_snapshot)
}

/// Convenience wrapper collecting owned snapshots.
pub fn collect_snapshots(
    realization: &CircuitRealization,
    initial: &InitialState,
    stream_id: u64,
    schedule: &SnapshotSchedule,
) -> Result<(TrajectoryResult, Vec<(usize, ChargeDistribution)>)> {
    let mut snaps = Vec::new();
    let result = run_realization(realization, initial, stream_id, schedule, |t, d| {
        snaps.push((t, d.clone()))
    })?;
    Ok((result, snaps))
}
