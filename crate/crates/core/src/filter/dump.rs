//! Binary per-trajectory dump: measurement records and snapshot site
//! marginals, little-endian, behind a versioned header.
//!
//! Layout: magic `SHRPTRJ\0`, `u32` version, `u32` sites, `u64` record
//! count, records as (`u32` layer, `u32` site, `f64` outcome), `u64`
//! snapshot count, snapshots as (`u64` time, `sites` x `f64` P(+1)).

use std::io::{Read, Write};

use super::state::{ChargeDistribution, MeasurementRecord};
use crate::error::{Error, Result};

pub const DUMP_MAGIC: [u8; 8] = *b"SHRPTRJ\0";
pub const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDump {
    pub sites: usize,
    pub records: Vec<MeasurementRecord>,
    /// `(time, P(sigma_i = +1) for each site)`
    pub snapshots: Vec<(u64, Vec<f64>)>,
}

impl TrajectoryDump {
    pub fn new(sites: usize) -> Self {
        Self {
            sites,
            records: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub fn push_snapshot(&mut self, time: usize, dist: &ChargeDistribution) {
        let marginals = (0..dist.sites()).map(|i| dist.marginal_plus(i)).collect();
        self.snapshots.push((time as u64, marginals));
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.sites as u32).to_le_bytes())?;
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        for r in &self.records {
            w.write_all(&(r.layer as u32).to_le_bytes())?;
            w.write_all(&(r.site as u32).to_le_bytes())?;
            w.write_all(&r.outcome.to_le_bytes())?;
        }
        w.write_all(&(self.snapshots.len() as u64).to_le_bytes())?;
        for (t, marginals) in &self.snapshots {
            w.write_all(&t.to_le_bytes())?;
            for m in marginals {
                w.write_all(&m.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != DUMP_MAGIC {
            return Err(schema("bad magic"));
        }
        let version = read_u32(&mut r)?;
        if version != DUMP_VERSION {
            return Err(schema(&format!("unsupported version {version}")));
        }
        let sites = read_u32(&mut r)? as usize;
        let n_records = read_u64(&mut r)?;
        let mut records = Vec::new();
        for _ in 0..n_records {
            let layer = read_u32(&mut r)? as usize;
            let site = read_u32(&mut r)? as usize;
            let outcome = f64::from_bits(read_u64(&mut r)?);
            records.push(MeasurementRecord { layer, site, outcome });
        }
        let n_snaps = read_u64(&mut r)?;
        let mut snapshots = Vec::new();
        for _ in 0..n_snaps {
            let t = read_u64(&mut r)?;
            let marginals = (0..sites)
                .map(|_| read_u64(&mut r).map(f64::from_bits))
                .collect::<Result<Vec<_>>>()?;
            snapshots.push((t, marginals));
        }
        Ok(Self {
            sites,
            records,
            snapshots,
        })
    }
}

fn schema(reason: &str) -> Error {
    Error::Schema {
        path: "trajectory dump".into(),
        reason: reason.into(),
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{realize, CircuitSpec};
    use crate::filter::{run_realization, InitialState, SnapshotSchedule};

    #[test]
    fn round_trip() {
        let r = realize(&CircuitSpec::projective(6, 4, 0.3, 8)).unwrap();
        let mut dump = TrajectoryDump::new(6);
        let result = run_realization(&r, &InitialState::Uniform, 0, &SnapshotSchedule::every_step(), |t, d| {
            dump.push_snapshot(t, d)
        })
        .unwrap();
        dump.records = result.records;
        let mut bytes = Vec::new();
        dump.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"SHRPTRJ\0");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        let back = TrajectoryDump::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, dump);
    }

    #[test]
    fn rejects_foreign_bytes() {
        assert!(matches!(
            TrajectoryDump::read_from(&b"NOTADUMP\x01\0\0\0"[..]),
            Err(Error::Schema { .. })
        ));
        let mut bytes = Vec::new();
        TrajectoryDump::new(2).write_to(&mut bytes).unwrap();
        bytes[8] = 9;
        assert!(TrajectoryDump::read_from(bytes.as_slice()).is_err());
        assert!(TrajectoryDump::read_from(&bytes[..10]).is_err());
    }
}
