use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ann::AnnConfig;
use crate::autoscaler::{PolicyConfig, TriggerMetric};
use crate::capacity::Catalog;
use crate::htm::HtmConfig;
use crate::metrics::{FilterConfig, FleetConstants};
use crate::{Error, Result, GIB, MIB};

/// Shift in application behaviour applied from `at_seconds` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadChange {
    pub at_seconds: f64,
    /// Added to the busy share of the VM's available CPU, in percentage points.
    pub cpu_util_delta: f64,
    pub ram_fixed_delta: u64,
    pub ram_per_user_delta: u64,
}

/// Ground-truth resource usage of the application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppModel {
    /// CPU demand per user on the fleet-normalised scale.
    pub base_cpu_per_user: f64,
    pub base_ram_fixed: u64,
    pub base_ram_per_user: u64,
    pub disk_util: f64,
    pub net_util: f64,
    pub change: Option<WorkloadChange>,
}

impl AppModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_cpu_per_user >= 0.0)
            || !(0.0..=100.0).contains(&self.disk_util)
            || !(0.0..=100.0).contains(&self.net_util)
        {
            return Err(Error::InvalidConfig(
                "application rates out of range".into(),
            ));
        }
        if let Some(c) = self.change {
            if !(c.at_seconds >= 0.0 && (0.0..100.0).contains(&c.cpu_util_delta)) {
                return Err(Error::InvalidConfig("workload change out of range".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadProfile {
    pub initial_users: u32,
    pub step_users: u32,
    pub step_interval_seconds: f64,
    pub max_users: u32,
}

impl Default for WorkloadProfile {
    fn default() -> Self {
        WorkloadProfile {
            initial_users: 30,
            step_users: 10,
            step_interval_seconds: 360.0,
            max_users: 400,
        }
    }
}

/// Physical characteristics of one VM type's hosts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub core_freqs_ghz: Vec<f64>,
    /// Each instance's mean steal is drawn uniformly from this range (percent).
    pub steal_mean_min: f64,
    pub steal_mean_max: f64,
    /// Per-sample steal varies uniformly within +/- this amount.
    pub steal_jitter: f64,
}

impl HardwareProfile {
    pub fn validate(&self, name: &str, constants: &FleetConstants) -> Result<()> {
        let total: f64 = self.core_freqs_ghz.iter().sum();
        if self.core_freqs_ghz.is_empty()
            || self.core_freqs_ghz.iter().any(|f| !(*f > 0.0))
            || total > constants.max_cpu_ghz()
        {
            return Err(Error::InvalidConfig(format!(
                "hardware of `{name}` must have positive core frequencies within the fleet maximum"
            )));
        }
        if !(0.0 <= self.steal_mean_min
            && self.steal_mean_min <= self.steal_mean_max
            && self.steal_jitter >= 0.0
            && self.steal_mean_max + self.steal_jitter < 100.0
            && self.steal_mean_min - self.steal_jitter >= 0.0)
        {
            return Err(Error::InvalidConfig(format!(
                "steal range of `{name}` is invalid"
            )));
        }
        Ok(())
    }

    /// Mean normalised CPU capacity over instances.
    pub fn mean_capacity(&self, constants: &FleetConstants) -> f64 {
        let steal = (self.steal_mean_min + self.steal_mean_max) / 2.0;
        (100.0 - steal) * self.core_freqs_ghz.iter().sum::<f64>()
            / (100.0 * constants.max_cpu_ghz())
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub duration_seconds: f64,
    pub tick_seconds: f64,
    /// Simulated seconds per reported wall-clock second.
    pub time_compression: f64,
    pub billing_block_seconds: f64,
    pub provisioning_delay_seconds: f64,
    pub initial_vm_type: String,
    pub fr_max_ghz: f64,
    pub n_max_cores: u32,
    pub catalog: Catalog,
    pub hardware: BTreeMap<String, HardwareProfile>,
    pub app: AppModel,
    pub workload: WorkloadProfile,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub ann: AnnConfig,
    #[serde(default)]
    pub htm: HtmConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        let hw = |freqs: &[f64], lo: f64, hi: f64| HardwareProfile {
            core_freqs_ghz: freqs.to_vec(),
            steal_mean_min: lo,
            steal_mean_max: hi,
            steal_jitter: 3.0,
        };
        let hardware = BTreeMap::from([
            ("m1.small".to_string(), hw(&[2.0], 15.0, 25.0)),
            ("m1.medium".to_string(), hw(&[1.2, 1.2], 3.0, 7.0)),
            ("m3.medium".to_string(), hw(&[2.4], 5.0, 15.0)),
        ]);
        Scenario {
            name: "default".into(),
            seed: 1,
            duration_seconds: 330.0 * 60.0,
            tick_seconds: 5.0,
            time_compression: 60.0,
            billing_block_seconds: 3600.0,
            provisioning_delay_seconds: 90.0,
            initial_vm_type: "m1.small".into(),
            fr_max_ghz: 3.5,
            n_max_cores: 2,
            catalog: Catalog::aws_reference(),
            hardware,
            app: AppModel {
                // One user takes 1% of a mean m1.small's capacity.
                base_cpu_per_user: 0.01 * 0.8 * 2.0 / 7.0,
                base_ram_fixed: 100 * MIB,
                base_ram_per_user: 2 * MIB,
                disk_util: 2.0,
                net_util: 3.0,
                change: Some(WorkloadChange {
                    at_seconds: 3.5 * 3600.0,
                    cpu_util_delta: 10.0,
                    ram_fixed_delta: GIB,
                    ram_per_user_delta: 2 * MIB,
                }),
            },
            workload: WorkloadProfile::default(),
            policy: PolicyConfig {
                trigger_metric: TriggerMetric::FarmTotal,
                ..PolicyConfig::default()
            },
            filter: FilterConfig::default(),
            ann: AnnConfig::default(),
            htm: HtmConfig::default(),
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Scenario =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn constants(&self) -> Result<FleetConstants> {
        FleetConstants::new(self.fr_max_ghz, self.n_max_cores, self.catalog.ram_max())
    }

    pub fn validate(&self) -> Result<()> {
        let constants = self.constants()?;
        if !(self.duration_seconds > 0.0
            && self.tick_seconds > 0.0
            && self.time_compression > 0.0
            && self.billing_block_seconds > 0.0
            && self.provisioning_delay_seconds >= 0.0)
        {
            return Err(Error::InvalidConfig(
                "scenario durations must be positive".into(),
            ));
        }
        let w = &self.workload;
        if w.initial_users == 0 || w.max_users < w.initial_users || !(w.step_interval_seconds > 0.0)
        {
            return Err(Error::InvalidConfig("workload profile is invalid".into()));
        }
        self.catalog.get(&self.initial_vm_type)?;
        for t in self.catalog.types() {
            let hw = self.hardware.get(&t.name).ok_or_else(|| {
                Error::InvalidConfig(format!("no hardware profile for `{}`", t.name))
            })?;
            hw.validate(&t.name, &constants)?;
        }
        self.app.validate()?;
        self.policy.validate()?;
        self.ann.validate()?;
        self.htm.validate()?;
        if (self.policy.sample_interval - self.tick_seconds).abs() > 1e-9 {
            return Err(Error::InvalidConfig(
                "policy sample_interval must equal the tick length".into(),
            ));
        }
        Ok(())
    }

    /// Converts a simulated duration to reported wall-clock seconds.
    pub fn wall_clock(&self, sim_seconds: f64) -> f64 {
        sim_seconds / self.time_compression
    }
}
