//! Single-region hierarchical temporal memory used as a streaming anomaly
//! detector.
//!
//! Each record (timestamp, users, CPU, RAM) is encoded into bits, spatially
//! pooled into a sparse set of columns and fed through temporal pooling. The
//! anomaly score is the share of active columns none of whose cells had been
//! predicted by the previous step.

mod encoder;
mod sdr;
mod spatial;
mod temporal;

use std::any::Any;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use encoder::{
    encode_sample, encode_scalar, DateEncoderConfig, PeriodicEncoderConfig, SampleEncoderConfig,
    ScalarEncoderConfig,
};
pub use sdr::BitVector;
pub use spatial::{select_columns, SpatialPooler};
pub use temporal::{Synapse, TemporalMemory, TemporalOutput};

use crate::par::Execution;
use crate::{Error, Result};

/// Scores produced before this many samples have been seen are unreliable.
pub const DEFAULT_WARMUP: u64 = 110;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HtmConfig {
    pub column_count: usize,
    pub cells_per_column: usize,
    pub potential_pool_fraction: f64,
    pub active_column_fraction: f64,
    pub permanence_threshold: f64,
    pub permanence_increment: f64,
    pub permanence_decrement: f64,
    /// Connected active synapses needed to predict a cell.
    pub segment_activation_threshold: usize,
    /// Synapses of any weight needed to count as the best-matching cell.
    pub segment_matching_threshold: usize,
    pub initial_segment_weight: f64,
    pub segment_weight_increment: f64,
    pub segment_weight_decay: f64,
    /// Connections grown per learning step.
    pub new_synapse_count: usize,
    pub max_synapses_per_cell: usize,
    pub inhibition_radius: usize,
    pub warmup_samples: u64,
    pub rng_seed: u64,
    pub encoder: SampleEncoderConfig,
}

impl Default for HtmConfig {
    fn default() -> Self {
        HtmConfig {
            column_count: 2048,
            cells_per_column: 32,
            potential_pool_fraction: 0.5,
            active_column_fraction: 0.02,
            permanence_threshold: 0.5,
            permanence_increment: 0.05,
            permanence_decrement: 0.008,
            segment_activation_threshold: 13,
            segment_matching_threshold: 10,
            initial_segment_weight: 0.21,
            segment_weight_increment: 0.1,
            segment_weight_decay: 0.1,
            new_synapse_count: 20,
            max_synapses_per_cell: 255,
            inhibition_radius: 0,
            warmup_samples: DEFAULT_WARMUP,
            rng_seed: 42,
            encoder: SampleEncoderConfig::default(),
        }
    }
}

impl HtmConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| v > 0.0 && v < 1.0;
        if !frac(self.potential_pool_fraction)
            || !frac(self.active_column_fraction)
            || !frac(self.permanence_threshold)
            || !frac(self.initial_segment_weight)
        {
            return Err(Error::InvalidConfig(
                "HTM fractions must lie in (0, 1)".into(),
            ));
        }
        if self.column_count < 100 {
            return Err(Error::InvalidConfig(
                "HTM needs at least 100 columns".into(),
            ));
        }
        if self.cells_per_column < 1 || self.cells_per_column > 1 << 10 {
            return Err(Error::InvalidConfig(
                "cells_per_column must be in [1, 1024]".into(),
            ));
        }
        if self.segment_activation_threshold == 0 || self.new_synapse_count == 0 {
            return Err(Error::InvalidConfig(
                "segment thresholds and growth must be positive".into(),
            ));
        }
        self.encoder.validate()
    }

    /// Number of columns spatial pooling keeps active.
    pub fn active_column_count(&self) -> usize {
        ((self.active_column_fraction * self.column_count as f64).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyResult {
    pub score: f64,
    pub warmed_up: bool,
}

impl AnomalyResult {
    /// The score, or 0 while the detector is still warming up.
    pub fn effective_score(&self) -> f64 {
        if self.warmed_up {
            self.score
        } else {
            0.0
        }
    }
}

/// Share of `active_columns` that contain none of `predicted_cells`.
///
/// Both slices must be sorted. With no active columns the score is 0.
pub fn anomaly_score(
    active_columns: &[usize],
    predicted_cells: &[u32],
    cells_per_column: usize,
) -> f64 {
    if active_columns.is_empty() {
        return 0.0;
    }
    let mut predicted_cols: Vec<usize> = predicted_cells
        .iter()
        .map(|&c| c as usize / cells_per_column)
        .collect();
    predicted_cols.dedup();
    let missed = active_columns
        .iter()
        .filter(|c| predicted_cols.binary_search(c).is_err())
        .count();
    missed as f64 / active_columns.len() as f64
}

/// Anything that scores how unexpected a record is.
pub trait AnomalySource: Send + Sync {
    fn observe(&mut self, timestamp: f64, users: f64, cpu: f64, ram: f64) -> Result<AnomalyResult>;

    fn samples_seen(&self) -> u64;

    /// Deep, independent copy.
    fn clone_source(&self) -> Box<dyn AnomalySource>;

    fn as_any(&self) -> &dyn Any;
}

/// Detector that always reports the same score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantAnomaly {
    pub score: f64,
    seen: u64,
}

impl ConstantAnomaly {
    pub fn new(score: f64) -> Self {
        ConstantAnomaly { score, seen: 0 }
    }
}

impl AnomalySource for ConstantAnomaly {
    fn observe(&mut self, _: f64, _: f64, _: f64, _: f64) -> Result<AnomalyResult> {
        self.seen += 1;
        Ok(AnomalyResult {
            score: self.score,
            warmed_up: true,
        })
    }

    fn samples_seen(&self) -> u64 {
        self.seen
    }

    fn clone_source(&self) -> Box<dyn AnomalySource> {
        Box::new(*self)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RegionSnapshot {
    kind: String,
    version: u32,
    region: HtmRegion,
}

/// A single HTM region with its encoder, spatial pooler and temporal memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HtmRegion {
    config: HtmConfig,
    spatial: SpatialPooler,
    temporal: TemporalMemory,
    rng: ChaCha8Rng,
    samples_seen: u64,
    last_score: f64,
    #[serde(skip)]
    exec: Execution,
}

impl HtmRegion {
    pub fn new(config: HtmConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let spatial = SpatialPooler::new(&config, config.encoder.width(), &mut rng)?;
        let temporal = TemporalMemory::new(&config);
        Ok(HtmRegion {
            config,
            spatial,
            temporal,
            rng,
            samples_seen: 0,
            last_score: 0.0,
            exec: Execution::default(),
        })
    }

    /// Chooses how spatial overlaps are computed.
    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn config(&self) -> &HtmConfig {
        &self.config
    }

    pub fn spatial(&self) -> &SpatialPooler {
        &self.spatial
    }

    pub fn temporal(&self) -> &TemporalMemory {
        &self.temporal
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    pub fn last_score(&self) -> f64 {
        self.last_score
    }

    pub fn encode(&self, timestamp: f64, users: f64, cpu: f64, ram: f64) -> Result<BitVector> {
        encode_sample(&self.config.encoder, timestamp, users, cpu, ram)
    }

    pub fn spatial_pool(&mut self, input: &BitVector, learn: bool) -> Result<Vec<usize>> {
        self.spatial.compute(&self.config, input, learn, self.exec)
    }

    pub fn temporal_step(&mut self, active_columns: &[usize], learn: bool) -> TemporalOutput {
        self.temporal
            .step(&self.config, active_columns, learn, &mut self.rng)
    }

    /// Encode, pool, score against the previous prediction, then learn.
    pub fn process_sample(
        &mut self,
        timestamp: f64,
        users: f64,
        cpu: f64,
        ram: f64,
    ) -> Result<AnomalyResult> {
        let input = self.encode(timestamp, users, cpu, ram)?;
        let columns = self.spatial_pool(&input, true)?;
        let score = anomaly_score(
            &columns,
            self.temporal.predicted_cells(),
            self.config.cells_per_column,
        );
        self.temporal_step(&columns, true);
        self.samples_seen += 1;
        self.last_score = score;
        Ok(AnomalyResult {
            score,
            warmed_up: self.samples_seen > self.config.warmup_samples,
        })
    }

    /// Writes a versioned CBOR snapshot.
    pub fn write_snapshot<W: Write>(&self, w: W) -> Result<()> {
        let snap = RegionSnapshot {
            kind: "htm".into(),
            version: SNAPSHOT_VERSION,
            region: self.clone(),
        };
        ciborium::into_writer(&snap, w).map_err(|e| Error::Snapshot(e.to_string()))
    }

    pub fn read_snapshot<R: Read>(r: R) -> Result<Self> {
        let snap: RegionSnapshot =
            ciborium::from_reader(r).map_err(|e| Error::Snapshot(e.to_string()))?;
        if snap.kind != "htm" {
            return Err(Error::Snapshot(format!(
                "not an HTM snapshot: {}",
                snap.kind
            )));
        }
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::SnapshotVersion {
                expected: SNAPSHOT_VERSION,
                found: snap.version,
            });
        }
        snap.region.config.validate()?;
        Ok(snap.region)
    }
}

impl AnomalySource for HtmRegion {
    fn observe(&mut self, timestamp: f64, users: f64, cpu: f64, ram: f64) -> Result<AnomalyResult> {
        self.process_sample(timestamp, users, cpu, ram)
    }

    fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    fn clone_source(&self) -> Box<dyn AnomalySource> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fast_config(seed: u64) -> HtmConfig {
        HtmConfig {
            column_count: 1024,
            cells_per_column: 8,
            rng_seed: seed,
            ..HtmConfig::default()
        }
    }

    #[test]
    fn anomaly_score_examples() {
        let cols: Vec<usize> = (0..40).collect();
        assert_eq!(anomaly_score(&cols, &[], 4), 1.0);
        let all: Vec<u32> = cols.iter().map(|&c| (c * 4) as u32).collect();
        assert_eq!(anomaly_score(&cols, &all, 4), 0.0);
        let most: Vec<u32> = cols[8..].iter().map(|&c| (c * 4 + 1) as u32).collect();
        assert!((anomaly_score(&cols, &most, 4) - 0.2).abs() < 1e-12);
        assert_eq!(anomaly_score(&[], &most, 4), 0.0);
    }

    #[test]
    fn warmup_lasts_110_samples() {
        let mut r = HtmRegion::new(fast_config(1)).unwrap();
        for i in 1..=120u64 {
            let res = r.process_sample(i as f64 * 5.0, 50.0, 0.2, 0.1).unwrap();
            assert_eq!(res.warmed_up, i > 110, "call {i}");
            assert!((0.0..=1.0).contains(&res.score));
        }
    }

    #[test]
    fn clones_are_independent_and_replay_identically() {
        let mut a = HtmRegion::new(fast_config(7)).unwrap();
        for i in 0..50 {
            a.process_sample(i as f64 * 5.0, 100.0 + (i % 3) as f64, 0.3, 0.2)
                .unwrap();
        }
        let mut b = a.clone();
        assert_eq!(a, b);
        let mut c = a.clone();
        for i in 50..550 {
            let t = i as f64 * 5.0;
            let users = 100.0 + (i % 3) as f64;
            let sa = a.process_sample(t, users, 0.3, 0.2).unwrap();
            let sb = b.process_sample(t, users, 0.3, 0.2).unwrap();
            assert_eq!(sa, sb);
        }
        // A clone fed something else diverges without touching the original.
        c.process_sample(0.0, 900.0, 0.9, 0.9).unwrap();
        assert_ne!(a, c);
        assert_eq!(a, b);
    }

    #[test]
    fn cold_clone_equals_fresh_region() {
        let a = HtmRegion::new(fast_config(3)).unwrap();
        assert_eq!(a.clone(), HtmRegion::new(fast_config(3)).unwrap());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut a = HtmRegion::new(fast_config(9)).unwrap();
        for i in 0..20 {
            a.process_sample(i as f64, 40.0, 0.1, 0.1).unwrap();
        }
        let mut buf = Vec::new();
        a.write_snapshot(&mut buf).unwrap();
        let mut b = HtmRegion::read_snapshot(&buf[..]).unwrap();
        assert_eq!(a, b);
        let sa = a.process_sample(100.0, 41.0, 0.1, 0.1).unwrap();
        let sb = b.process_sample(100.0, 41.0, 0.1, 0.1).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn constant_source_is_swappable() {
        let mut src: Box<dyn AnomalySource> = Box::new(ConstantAnomaly::new(0.0));
        let r = src.observe(0.0, 1.0, 0.1, 0.1).unwrap();
        assert_eq!(r.score, 0.0);
        assert_eq!(src.clone_source().samples_seen(), 1);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = HtmConfig {
            column_count: 50,
            ..HtmConfig::default()
        };
        assert!(HtmRegion::new(cfg).is_err());
        let cfg = HtmConfig {
            active_column_fraction: 1.0,
            ..HtmConfig::default()
        };
        assert!(HtmRegion::new(cfg).is_err());
    }
}
