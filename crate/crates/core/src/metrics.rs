//! Monitoring samples, fleet-relative normalisation and training filters.
//!
//! Every application-server VM reports a [`MonitoringSample`] every five
//! seconds. CPU figures are normalised against the largest VM the provider
//! offers (`n_max_cores * fr_max`) and RAM against the largest RAM size, so
//! readings from heterogeneous VM types land on one common scale.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Opaque identifier of a VM instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VmId(pub String);

impl VmId {
    pub fn new(id: impl Into<String>) -> Self {
        VmId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Hardware bounds of the largest VM type in the considered cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FleetConstants {
    /// Maximal physical core frequency, GHz.
    pub fr_max_ghz: f64,
    /// Maximal number of cores of any VM type.
    pub n_max_cores: u32,
    /// Largest RAM size of any VM type, bytes.
    pub ram_max_bytes: u64,
}

impl FleetConstants {
    pub fn new(fr_max_ghz: f64, n_max_cores: u32, ram_max_bytes: u64) -> Result<Self> {
        let c = FleetConstants {
            fr_max_ghz,
            n_max_cores,
            ram_max_bytes,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fr_max_ghz > 0.0) || !self.fr_max_ghz.is_finite() {
            return Err(Error::InvalidConfig("fr_max must be positive".into()));
        }
        if self.n_max_cores < 1 {
            return Err(Error::InvalidConfig(
                "n_max_cores must be at least 1".into(),
            ));
        }
        if self.ram_max_bytes == 0 {
            return Err(Error::InvalidConfig("ram_max must be positive".into()));
        }
        Ok(())
    }

    /// `n_max_cores * fr_max`: the CPU capacity that normalises to 1.0.
    pub fn max_cpu_ghz(&self) -> f64 {
        self.n_max_cores as f64 * self.fr_max_ghz
    }
}

/// One utilisation report from one application-server VM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringSample {
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
    pub vm_id: VmId,
    pub vm_type: String,
    /// Distinct active user sessions.
    pub users: u32,
    pub pct_idle: f64,
    pub pct_steal: f64,
    /// Frequency of every core visible to the VM, GHz.
    pub core_freqs: Vec<f64>,
    /// The "active memory" figure, bytes.
    pub active_memory: u64,
    pub disk_util: f64,
    pub net_util: f64,
}

impl MonitoringSample {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidSample {
            vm_id: self.vm_id.0.clone(),
            reason: reason.to_string(),
        };
        let pct = |v: f64| (0.0..=100.0).contains(&v);
        if !pct(self.pct_idle) || !pct(self.pct_steal) {
            return Err(bad("idle/steal percentages must lie in [0, 100]"));
        }
        if self.pct_idle + self.pct_steal > 100.0 + 1e-9 {
            return Err(bad("idle + steal exceeds 100%"));
        }
        if self.core_freqs.is_empty() {
            return Err(bad("no core frequencies reported"));
        }
        if self
            .core_freqs
            .iter()
            .any(|f| !(*f > 0.0) || !f.is_finite())
        {
            return Err(bad("core frequencies must be positive"));
        }
        if !self.timestamp.is_finite() {
            return Err(bad("timestamp is not finite"));
        }
        Ok(())
    }

    pub fn total_ghz(&self) -> f64 {
        self.core_freqs.iter().sum()
    }
}

/// A sample expressed on the fleet-wide normalised scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSample {
    pub timestamp: f64,
    pub vm_id: VmId,
    pub users: u32,
    pub cpu_capacity: f64,
    pub cpu_load: f64,
    pub ram_load: f64,
    /// Raw disk utilisation, percent.
    pub disk_util: f64,
    /// Raw network utilisation, percent.
    pub net_util: f64,
}

impl NormalizedSample {
    /// Normalises a raw report onto the fleet-wide scale.
    pub fn from_sample(s: &MonitoringSample, c: &FleetConstants) -> Result<Self> {
        Ok(NormalizedSample {
            timestamp: s.timestamp,
            vm_id: s.vm_id.clone(),
            users: s.users,
            cpu_capacity: normalize_cpu_capacity(s, c)?,
            cpu_load: normalize_cpu_load(s, c)?,
            ram_load: normalize_ram_load(s.active_memory, c)?,
            disk_util: s.disk_util,
            net_util: s.net_util,
        })
    }

    /// CPU load relative to this VM's own measured capacity.
    pub fn cpu_relative(&self) -> f64 {
        if self.cpu_capacity > 0.0 {
            self.cpu_load / self.cpu_capacity
        } else {
            1.0
        }
    }
}

fn checked_total_ghz(s: &MonitoringSample, c: &FleetConstants) -> Result<f64> {
    s.validate()?;
    let total = s.total_ghz();
    let max = c.max_cpu_ghz();
    if total > max * (1.0 + 1e-12) {
        return Err(Error::CapacityExceedsFleetMax {
            total_ghz: total,
            max_ghz: max,
        });
    }
    Ok(total)
}

/// CPU capacity left to the VM after hypervisor steal, on the fleet scale.
pub fn normalize_cpu_capacity(s: &MonitoringSample, c: &FleetConstants) -> Result<f64> {
    let total = checked_total_ghz(s, c)?;
    Ok((100.0 - s.pct_steal) * total / (100.0 * c.max_cpu_ghz()))
}

/// CPU actually consumed by the VM, on the fleet scale.
pub fn normalize_cpu_load(s: &MonitoringSample, c: &FleetConstants) -> Result<f64> {
    let total = checked_total_ghz(s, c)?;
    let busy = (100.0 - s.pct_idle - s.pct_steal).max(0.0);
    Ok(busy * total / (100.0 * c.max_cpu_ghz()))
}

pub fn normalize_ram_load(active_memory: u64, c: &FleetConstants) -> Result<f64> {
    if active_memory > c.ram_max_bytes {
        return Err(Error::MemoryExceedsFleetMax {
            active: active_memory,
            ram_max: c.ram_max_bytes,
        });
    }
    Ok(active_memory as f64 / c.ram_max_bytes as f64)
}

/// Thresholds of the training-sample filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Reject when any resource runs above this fraction of its capacity.
    pub overload_threshold: f64,
    /// Reject when fewer users than this are served.
    pub min_users: u32,
    /// Reject when CPU load is below this fraction of capacity.
    pub min_cpu_ratio: f64,
    /// Reject when users fall below this multiple of the recent mean.
    pub jump_low: f64,
    /// Reject when users exceed this multiple of the recent mean.
    pub jump_high: f64,
    /// Number of previous user counts averaged by the jump filter.
    pub jump_history: usize,
    /// Reject samples the model already predicts with a smaller error.
    pub min_rmse: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            overload_threshold: 0.70,
            min_users: 25,
            min_cpu_ratio: 0.10,
            jump_low: 0.5,
            jump_high: 1.5,
            jump_history: 3,
            min_rmse: 0.01,
        }
    }
}

/// Per-resource capacities the filter compares loads against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityRatios {
    pub cpu: f64,
    pub ram: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterReason {
    Overload,
    NegligibleLoad,
    UserCountJump,
    AlreadyWellPredicted,
    Accepted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub accepted: bool,
    pub reason: FilterReason,
}

impl FilterDecision {
    fn reject(reason: FilterReason) -> Self {
        FilterDecision {
            accepted: false,
            reason,
        }
    }

    fn accept() -> Self {
        FilterDecision {
            accepted: true,
            reason: FilterReason::Accepted,
        }
    }
}

/// Decides whether a normalised sample may train the regression model.
///
/// Filters fire in a fixed order: overload, negligible load, user-count jump,
/// already well predicted. `recent_users` holds the previous user counts of
/// the same VM, oldest first; the jump filter is skipped until
/// `cfg.jump_history` of them exist.
pub fn filter_training_sample(
    s: &NormalizedSample,
    capacity: CapacityRatios,
    recent_users: &[u32],
    rmse_pre: f64,
    cfg: &FilterConfig,
) -> FilterDecision {
    let ratio = |load: f64, cap: f64| if cap > 0.0 { load / cap } else { f64::INFINITY };
    let cpu_rel = ratio(s.cpu_load, capacity.cpu);
    let ram_rel = ratio(s.ram_load, capacity.ram);
    // Disk and network are only reported as raw percentages.
    let disk_rel = s.disk_util / 100.0;
    let net_rel = s.net_util / 100.0;
    if [cpu_rel, ram_rel, disk_rel, net_rel]
        .iter()
        .any(|&r| r > cfg.overload_threshold)
    {
        return FilterDecision::reject(FilterReason::Overload);
    }

    if s.users < cfg.min_users || cpu_rel < cfg.min_cpu_ratio {
        return FilterDecision::reject(FilterReason::NegligibleLoad);
    }

    if cfg.jump_history > 0 && recent_users.len() >= cfg.jump_history {
        let tail = &recent_users[recent_users.len() - cfg.jump_history..];
        let mean = tail.iter().map(|&u| u as f64).sum::<f64>() / tail.len() as f64;
        let users = s.users as f64;
        if users < cfg.jump_low * mean || users > cfg.jump_high * mean {
            return FilterDecision::reject(FilterReason::UserCountJump);
        }
    }

    if rmse_pre < cfg.min_rmse {
        return FilterDecision::reject(FilterReason::AlreadyWellPredicted);
    }
    FilterDecision::accept()
}

/// Writes samples as one JSON object per line.
pub fn write_samples_jsonl<W: Write>(mut w: W, samples: &[MonitoringSample]) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s).map_err(|e| Error::json("writing sample", e))?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<sample stream>", e))?;
    }
    Ok(())
}

/// Reads a line-delimited JSON sample stream, skipping blank lines.
pub fn read_samples_jsonl<R: BufRead>(r: R) -> Result<Vec<MonitoringSample>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<sample stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line)
            .map_err(|e| Error::json(format!("sample line {}", n + 1), e))?;
        out.push(s);
    }
    Ok(out)
}
