//! Charge-sharp links of the space-time circuit graph.
//!
//! Link `(s, i)` is the charge on site `i` at time slice `s`; gate layer
//! `k` on bond `(a, b)` has input legs `(k, a)`, `(k, b)` and output legs
//! `(k + 1, a)`, `(k + 1, b)`. Measurements of layer `k` read slice `k + 1`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::CircuitRealization;
use crate::error::{Error, Result};
use crate::filter::MeasurementRecord;

/// Deduction rule applied at each gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationRule {
    /// Measured links only.
    MeasuredOnly,
    /// Three sharp legs make the fourth sharp, regardless of values.
    ThreeOfFour,
    /// Any leg whose value is fixed by the known leg values and
    /// `in_a + in_b = out_a + out_b` becomes sharp. Two equal inputs fix
    /// both outputs, and so on.
    ChargeValues,
}

impl PropagationRule {
    pub fn name(self) -> &'static str {
        match self {
            PropagationRule::MeasuredOnly => "measured_only",
            PropagationRule::ThreeOfFour => "three_of_four",
            PropagationRule::ChargeValues => "charge_values",
        }
    }
}

/// Visiting order for the propagation fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepOrder {
    Worklist,
    ForwardSweeps,
    BackwardSweeps,
}

/// Gate legs in the order `in_a, in_b, out_a, out_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    pub layer: usize,
    pub a: usize,
    pub b: usize,
}

impl Gate {
    pub fn legs(&self, sites: usize) -> [usize; 4] {
        let (k, a, b) = (self.layer, self.a, self.b);
        [k * sites + a, k * sites + b, (k + 1) * sites + a, (k + 1) * sites + b]
    }
}

/// The hidden classical charge history of a circuit: a uniformly random
/// initial configuration, each gate swapping its two charges with
/// probability one half. Reading measured links off a sampled history
/// gives Born-distributed outcome records.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeHistory {
    sites: usize,
    values: Vec<i8>,
}

impl ChargeHistory {
    pub fn sample<R: Rng + ?Sized>(realization: &CircuitRealization, rng: &mut R) -> Self {
        let l = realization.sites();
        let g = realization.gate_layers();
        let mut values = vec![0i8; (g + 1) * l];
        for v in values[..l].iter_mut() {
            *v = if rng.random::<bool>() { 1 } else { -1 };
        }
        for k in 0..g {
            let (before, after) = values.split_at_mut((k + 1) * l);
            let (prev, next) = (&before[k * l..], &mut after[..l]);
            next.copy_from_slice(prev);
            for &(a, b) in realization.bonds(k) {
                if rng.random::<bool>() {
                    next.swap(a, b);
                }
            }
        }
        Self { sites: l, values }
    }

    pub fn value(&self, slice: usize, site: usize) -> i8 {
        self.values[slice * self.sites + site]
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Outcome records of the measured links, in circuit order.
    pub fn records(&self, realization: &CircuitRealization) -> Vec<MeasurementRecord> {
        (0..realization.gate_layers())
            .flat_map(|k| {
                realization.measured_sites(k).iter().map(move |&site| MeasurementRecord {
                    layer: k,
                    site,
                    outcome: self.value(k + 1, site) as f64,
                })
            })
            .collect()
    }
}

/// Consistent `(in_a, in_b, out_a, out_b)` assignments, bit set = `+1`.
const CONSISTENT: [u8; 6] = [0b0000, 0b1111, 0b0101, 0b1001, 0b0110, 0b1010];

/// Sharpness flags and (where known) link values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharpLattice {
    sites: usize,
    slices: usize,
    sharp: Vec<bool>,
    /// `+1` / `-1` for sharp links with known value, 0 otherwise.
    values: Vec<i8>,
}

impl SharpLattice {
    /// Measured links are sharp; `values`, indexed like the link array, is
    /// read at measured links only.
    pub fn measured(realization: &CircuitRealization, values: Option<&[i8]>) -> Self {
        let l = realization.sites();
        let slices = realization.gate_layers() + 1;
        let mut lattice = Self {
            sites: l,
            slices,
            sharp: vec![false; slices * l],
            values: vec![0; slices * l],
        };
        for k in 0..realization.gate_layers() {
            for &site in realization.measured_sites(k) {
                let idx = (k + 1) * l + site;
                lattice.sharp[idx] = true;
                if let Some(v) = values {
                    lattice.values[idx] = v[idx];
                }
            }
        }
        lattice
    }

    /// Measured links with values taken from outcome records.
    pub fn from_records(realization: &CircuitRealization, records: &[MeasurementRecord]) -> Self {
        let l = realization.sites();
        let mut values = vec![0i8; (realization.gate_layers() + 1) * l];
        for r in records {
            values[(r.layer + 1) * l + r.site] = if r.outcome > 0.0 { 1 } else { -1 };
        }
        Self::measured(realization, Some(&values))
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn is_sharp(&self, slice: usize, site: usize) -> bool {
        self.sharp[slice * self.sites + site]
    }

    pub fn value(&self, slice: usize, site: usize) -> Option<i8> {
        match self.values[slice * self.sites + site] {
            0 => None,
            v => Some(v),
        }
    }

    pub fn sharp_flags(&self) -> &[bool] {
        &self.sharp
    }

    pub fn sharp_count(&self) -> usize {
        self.sharp.iter().filter(|s| **s).count()
    }

    /// Marks a link sharp by hand (used to build examples).
    pub fn set_sharp(&mut self, slice: usize, site: usize, value: Option<i8>) {
        let idx = slice * self.sites + site;
        self.sharp[idx] = true;
        self.values[idx] = value.unwrap_or(0);
    }

    /// Applies `rule` at one gate; returns the newly sharpened legs.
    fn deduce(&mut self, gate: &Gate, rule: PropagationRule) -> Result<Vec<usize>> {
        let legs = gate.legs(self.sites);
        let known = legs.map(|i| self.sharp[i]);
        let n_known = known.iter().filter(|k| **k).count();
        if n_known == 0 || n_known == 4 {
            return Ok(Vec::new());
        }
        match rule {
            PropagationRule::MeasuredOnly => Ok(Vec::new()),
            PropagationRule::ThreeOfFour => {
                if n_known != 3 {
                    return Ok(Vec::new());
                }
                let j = known.iter().position(|k| !k).expect("one unknown leg");
                let vals = legs.map(|i| self.values[i]);
                if vals.iter().enumerate().all(|(m, v)| m == j || *v != 0) {
                    // out_a + out_b = in_a + in_b fixes the missing value
                    let sum = |a: usize, b: usize| vals[a] as i32 + vals[b] as i32;
                    let v = match j {
                        0 => sum(2, 3) - vals[1] as i32,
                        1 => sum(2, 3) - vals[0] as i32,
                        2 => sum(0, 1) - vals[3] as i32,
                        _ => sum(0, 1) - vals[2] as i32,
                    };
                    if v.abs() != 1 {
                        return Err(inconsistent(gate));
                    }
                    self.values[legs[j]] = v as i8;
                }
                self.sharp[legs[j]] = true;
                Ok(vec![legs[j]])
            }
            PropagationRule::ChargeValues => {
                let vals = legs.map(|i| self.values[i]);
                if known.iter().zip(&vals).any(|(k, v)| *k && *v == 0) {
                    return Err(Error::param("values", "value-aware propagation needs link values"));
                }
                let (mut can_plus, mut can_minus, mut any) = ([false; 4], [false; 4], false);
                for assignment in CONSISTENT {
                    let bit = |j: usize| (assignment >> (3 - j)) & 1 == 1;
                    if (0..4).all(|j| !known[j] || bit(j) == (vals[j] > 0)) {
                        any = true;
                        for j in 0..4 {
                            if bit(j) {
                                can_plus[j] = true;
                            } else {
                                can_minus[j] = true;
                            }
                        }
                    }
                }
                if !any {
                    return Err(inconsistent(gate));
                }
                let mut fresh = Vec::new();
                for j in 0..4 {
                    if !known[j] && can_plus[j] != can_minus[j] {
                        self.sharp[legs[j]] = true;
                        self.values[legs[j]] = if can_plus[j] { 1 } else { -1 };
                        fresh.push(legs[j]);
                    }
                }
                Ok(fresh)
            }
        }
    }
}

fn inconsistent(gate: &Gate) -> Error {
    Error::Degenerate(format!(
        "inconsistent charges at gate layer {} bond ({}, {})",
        gate.layer, gate.a, gate.b
    ))
}

/// All gates of the realization, layer by layer.
pub fn gates(realization: &CircuitRealization) -> Vec<Gate> {
    (0..realization.gate_layers())
        .flat_map(|k| realization.bonds(k).iter().map(move |&(a, b)| Gate { layer: k, a, b }))
        .collect()
}

/// Index into [`gates`] of the gate in `layer` touching `site`.
fn gate_index(sites: usize, layer: usize, site: usize) -> usize {
    let half = sites / 2;
    let parity = layer % 2;
    let start = if (site + sites - parity) % 2 == 0 {
        site
    } else {
        (site + sites - 1) % sites
    };
    layer * half + (start + sites - parity) % sites / 2
}

/// Fixed point of `rule` starting from the measured links.
pub fn propagate_sharpness(
    realization: &CircuitRealization,
    values: Option<&[i8]>,
    rule: PropagationRule,
    order: SweepOrder,
) -> Result<SharpLattice> {
    let lattice = SharpLattice::measured(realization, values);
    propagate_from(realization, lattice, rule, order)
}

/// Fixed point of `rule` starting from an arbitrary sharp set.
pub fn propagate_from(
    realization: &CircuitRealization,
    mut lattice: SharpLattice,
    rule: PropagationRule,
    order: SweepOrder,
) -> Result<SharpLattice> {
    if rule == PropagationRule::MeasuredOnly {
        return Ok(lattice);
    }
    let all = gates(realization);
    let l = realization.sites();
    let g = realization.gate_layers();
    match order {
        SweepOrder::Worklist => {
            let mut queued = vec![true; all.len()];
            let mut queue: VecDeque<usize> = (0..all.len()).collect();
            while let Some(gi) = queue.pop_front() {
                queued[gi] = false;
                for link in lattice.deduce(&all[gi], rule)? {
                    let (slice, site) = (link / l, link % l);
                    let touching = [
                        (slice > 0).then(|| gate_index(l, slice - 1, site)),
                        (slice < g).then(|| gate_index(l, slice, site)),
                    ];
                    for t in touching.into_iter().flatten() {
                        if !queued[t] {
                            queued[t] = true;
                            queue.push_back(t);
                        }
                    }
                }
            }
        }
        SweepOrder::ForwardSweeps | SweepOrder::BackwardSweeps => loop {
            let mut changed = false;
            let mut visit = |gate: &Gate| -> Result<()> {
                changed |= !lattice.deduce(gate, rule)?.is_empty();
                Ok(())
            };
            if order == SweepOrder::ForwardSweeps {
                all.iter().try_for_each(&mut visit)?;
            } else {
                all.iter().rev().try_for_each(&mut visit)?;
            }
            if !changed {
                break;
            }
        },
    }
    Ok(lattice)
}
