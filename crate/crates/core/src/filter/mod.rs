//! Trajectory-conditional charge distributions and exact small-system oracles.

pub mod dump;
pub mod enumerate;
pub mod replica;
pub mod smoother;
pub mod state;
pub mod trajectory;
pub mod variance;

pub use enumerate::{enumerate_trajectories, ExactMoments, Leaf};
pub use replica::{born_weighted_moment, Outcomes, ReplicaOracleState};
pub use smoother::{smooth, LinkPosterior};
pub use state::{ChargeConfig, ChargeDistribution, InitialState, MeasurementRecord};
pub use trajectory::{collect_snapshots, run_realization, run_trajectory, step, SnapshotSchedule, TrajectoryResult};
pub use variance::{variance_decrement_closed_form, variance_decrement_dense, variance_decrement_oracle};
