//! Brick-wall circuit geometry and seed-determined measurement placements.
//!
//! One full time step is: even gate layer, measurement layer, odd gate
//! layer, measurement layer. Gate layer `k` (0-based, `0..2 * depth`) uses
//! bonds starting at sites of parity `k % 2`; the spatial boundary is
//! periodic so odd layers carry the wrap bond `(L - 1, 0)`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigFile, KeyValues};
use crate::error::{Error, Result};
use crate::rng::{rng_stream, PLACEMENT_STREAM};

/// Largest chain the percolation and circuit code accepts.
pub const MAX_SITES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MeasurementMode {
    Projective,
    /// Gaussian-softened measurement of strength `gamma * dt`.
    Weak { gamma: f64, dt: f64 },
}

impl MeasurementMode {
    pub fn name(&self) -> &'static str {
        match self {
            MeasurementMode::Projective => "projective",
            MeasurementMode::Weak { .. } => "weak",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    /// Site count `L`; even and at least 2.
    pub sites: usize,
    /// Number of full time steps.
    pub depth: usize,
    /// Per-site, per-measurement-layer measurement probability.
    pub p: f64,
    pub mode: MeasurementMode,
    pub seed: u64,
}

impl CircuitSpec {
    pub fn projective(sites: usize, depth: usize, p: f64, seed: u64) -> Self {
        Self {
            sites,
            depth,
            p,
            mode: MeasurementMode::Projective,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 || self.sites % 2 != 0 {
            return Err(Error::spec("L", format!("must be even and >= 2, got {}", self.sites)));
        }
        if self.sites > MAX_SITES {
            return Err(Error::spec("L", format!("must be <= {MAX_SITES}")));
        }
        if self.depth < 1 {
            return Err(Error::spec("depth", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::spec("p", format!("must lie in [0, 1], got {}", self.p)));
        }
        if let MeasurementMode::Weak { gamma, dt } = self.mode {
            if !(gamma.is_finite() && gamma > 0.0) {
                return Err(Error::spec("gamma", format!("must be finite and > 0, got {gamma}")));
            }
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::spec("dt", format!("must be finite and > 0, got {dt}")));
            }
        }
        Ok(())
    }

    pub fn gate_layers(&self) -> usize {
        2 * self.depth
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.push("L", self.sites);
        kv.push("depth", self.depth);
        kv.push("p", self.p);
        kv.push("mode", self.mode.name());
        if let MeasurementMode::Weak { gamma, dt } = self.mode {
            kv.push("gamma", gamma);
            kv.push("dt", dt);
        }
        kv.push("seed", self.seed);
        kv.push("boundary", "periodic");
        kv
    }

    /// Parses the `key = value` form produced by [`CircuitSpec::key_values`].
    pub fn from_config(cfg: &ConfigFile, section: &str) -> Result<Self> {
        let need = |key: &'static str| -> Result<&str> {
            cfg.get(section, key)
                .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
        };
        let parse_f = |key: &'static str| -> Result<f64> {
            need(key)?.parse().map_err(|_| Error::spec(key, "not a number"))
        };
        let parse_u = |key: &'static str| -> Result<u64> {
            need(key)?.parse().map_err(|_| Error::spec(key, "not an unsigned integer"))
        };
        let mode = match need("mode").unwrap_or("projective") {
            "projective" => MeasurementMode::Projective,
            "weak" => MeasurementMode::Weak {
                gamma: parse_f("gamma")?,
                dt: parse_f("dt")?,
            },
            other => return Err(Error::spec("mode", format!("unknown mode `{other}`"))),
        };
        if let Some(b) = cfg.get(section, "boundary") {
            if b != "periodic" {
                return Err(Error::spec("boundary", "only `periodic` is supported"));
            }
        }
        let spec = Self {
            sites: parse_u("L")? as usize,
            depth: parse_u("depth")? as usize,
            p: parse_f("p")?,
            mode,
            seed: parse_u("seed")?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for CircuitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key_values().render(""))
    }
}

/// Bonds of gate layer `layer` on a periodic chain of `sites` sites.
pub fn layer_bonds(sites: usize, layer: usize) -> impl Iterator<Item = (usize, usize)> {
    (layer % 2..sites).step_by(2).map(move |i| (i, (i + 1) % sites))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitRealization {
    spec: CircuitSpec,
    bonds: Vec<Vec<(usize, usize)>>,
    /// Sorted measured sites, one list per measurement layer.
    measured: Vec<Vec<usize>>,
}

/// Draws measurement placements from the spec's seed. Each (layer, site)
/// slot consumes exactly one uniform in a fixed order, so realizations with
/// the same seed are nested in `p`.
pub fn realize(spec: &CircuitSpec) -> Result<CircuitRealization> {
    spec.validate()?;
    let mut rng = rng_stream(spec.seed, PLACEMENT_STREAM);
    let layers = spec.gate_layers();
    let measured = (0..layers)
        .map(|_| {
            (0..spec.sites)
                .filter(|_| rng.random::<f64>() < spec.p)
                .collect()
        })
        .collect();
    Ok(CircuitRealization::assemble(*spec, measured))
}

impl CircuitRealization {
    fn assemble(spec: CircuitSpec, measured: Vec<Vec<usize>>) -> Self {
        let bonds = (0..spec.gate_layers())
            .map(|k| layer_bonds(spec.sites, k).collect())
            .collect();
        Self {
            spec,
            bonds,
            measured,
        }
    }

    /// Builds a realization with explicit placements (hand-made examples).
    pub fn from_placements(spec: CircuitSpec, mut measured: Vec<Vec<usize>>) -> Result<Self> {
        spec.validate()?;
        if measured.len() != spec.gate_layers() {
            return Err(Error::spec(
                "measured",
                format!("expected {} layers, got {}", spec.gate_layers(), measured.len()),
            ));
        }
        for layer in &mut measured {
            layer.sort_unstable();
            layer.dedup();
            if layer.last().is_some_and(|&s| s >= spec.sites) {
                return Err(Error::spec("measured", "site index out of range"));
            }
        }
        Ok(Self::assemble(spec, measured))
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn sites(&self) -> usize {
        self.spec.sites
    }

    pub fn gate_layers(&self) -> usize {
        self.bonds.len()
    }

    pub fn bonds(&self, layer: usize) -> &[(usize, usize)] {
        &self.bonds[layer]
    }

    /// Sites measured right after gate layer `layer`.
    pub fn measured_sites(&self, layer: usize) -> &[usize] {
        &self.measured[layer]
    }

    pub fn is_measured(&self, layer: usize, site: usize) -> bool {
        self.measured[layer].binary_search(&site).is_ok()
    }

    pub fn measurement_count(&self) -> usize {
        self.measured.iter().map(Vec::len).sum()
    }

    pub fn placements(&self) -> &[Vec<usize>] {
        &self.measured
    }

    /// Copy with one extra measurement; used for monotonicity checks.
    pub fn with_measurement(&self, layer: usize, site: usize) -> Self {
        let mut measured = self.measured.clone();
        if let Err(pos) = measured[layer].binary_search(&site) {
            measured[layer].insert(pos, site);
        }
        Self::assemble(self.spec, measured)
    }
}
