//! Charge-sharp links by constraint propagation, union-find clustering and
//! wrapping-probability finite-size scaling.

pub mod cluster;
pub mod collapse;
pub mod lattice;
pub mod wrap;

pub use cluster::{cluster, ClusterForest};
pub use collapse::{collapse_score, linear_grid, scaling_collapse, CollapseOptions, CollapseReport, WrapCurve};
pub use lattice::{
    propagate_from, propagate_sharpness, ChargeHistory, Gate, PropagationRule, SharpLattice, SweepOrder,
};
pub use wrap::{
    default_depth, measured_link_percolation, pairwise_crossings, realization_wraps, threshold_estimate,
    wrap_probability, wrap_scan, Crossing, WrapEstimate,
};
