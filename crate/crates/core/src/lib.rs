//! Charge-sharpening simulator for U(1)-symmetric monitored random circuits
//! in the large-qudit limit.
//!
//! Within a trajectory the state is a probability distribution over the
//! `2^L` charge configurations of a periodic chain, evolved by
//! gate-averaged charge-conserving brick-wall gates and Born-sampled
//! measurements.

pub mod analysis;
pub mod circuit;
pub mod config;
pub mod error;
pub mod filter;
pub mod experiment;
pub mod hydro;
pub mod io;
pub mod observables;
pub mod percolation;
pub mod rng;

pub use circuit::{realize, CircuitRealization, CircuitSpec, MeasurementMode};
pub use error::{Error, Result};
pub use filter::{ChargeConfig, ChargeDistribution, InitialState, MeasurementRecord};
pub use observables::{CorrelatorSet, ObservableAccumulator};
