//! Reactive scale-up control: utilisation trigger, cooldown, VM type choice
//! and load-balancer weights.

mod engine;
mod fleet;
mod scaler;
mod trigger;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use engine::{LearningEngine, SampleOutcome};
pub use fleet::{recompute_weights, FleetState, FleetVm};
pub use scaler::{
    Autoscaler, AutoscalerParts, ScalingEvent, ScalingReason, SelectionDetail, TickReport,
};
pub use trigger::{evaluate_trigger, farm_utilisation, required_breaches, vm_utilisation, Trigger};

use crate::capacity::Extrapolation;
use crate::selector::{DEFAULT_DELTA, DEFAULT_PROBE_LIMIT};
use crate::{Error, Result};

/// Which VM type a scale-up adds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Policy {
    Dvts,
    Static(String),
}

impl Policy {
    pub fn is_dvts(&self) -> bool {
        matches!(self, Policy::Dvts)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Dvts => f.write_str("dvts"),
            Policy::Static(t) => write!(f, "static:{t}"),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s.eq_ignore_ascii_case("dvts") => Ok(Policy::Dvts),
            Some((kind, ty)) if kind.eq_ignore_ascii_case("static") && !ty.is_empty() => {
                Ok(Policy::Static(ty.to_string()))
            }
            _ => Err(Error::InvalidConfig(format!(
                "unknown policy `{s}` (expected `dvts` or `static:<type>`)"
            ))),
        }
    }
}

impl TryFrom<String> for Policy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Policy> for String {
    fn from(p: Policy) -> String {
        p.to_string()
    }
}

/// How per-VM readings are combined into one farm utilisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMetric {
    /// Mean over VMs of `max(cpu_relative, ram_relative)`.
    #[default]
    VmMean,
    /// `max(total cpu load / total cpu capacity, total ram / total ram)`.
    FarmTotal,
    /// Mean over VMs of CPU-relative load only.
    CpuMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub policy: Policy,
    pub trigger_threshold: f64,
    pub trigger_metric: TriggerMetric,
    pub sustain_seconds: f64,
    pub cooldown_seconds: f64,
    /// Monitoring cadence.
    pub sample_interval: f64,
    pub delta: u32,
    pub probe_limit: u32,
    pub extrapolation: Extrapolation,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            policy: Policy::Dvts,
            trigger_threshold: 0.70,
            trigger_metric: TriggerMetric::default(),
            sustain_seconds: 10.0,
            cooldown_seconds: 600.0,
            sample_interval: 5.0,
            delta: DEFAULT_DELTA,
            probe_limit: DEFAULT_PROBE_LIMIT,
            extrapolation: Extrapolation::default(),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.trigger_threshold > 0.0 && self.trigger_threshold < 1.0) {
            return Err(Error::InvalidConfig(
                "trigger threshold must lie in (0, 1)".into(),
            ));
        }
        if !(self.sustain_seconds > 0.0
            && self.cooldown_seconds > 0.0
            && self.sample_interval > 0.0)
        {
            return Err(Error::InvalidConfig(
                "policy durations must be positive".into(),
            ));
        }
        if self.delta == 0 {
            return Err(Error::InvalidConfig("delta must be at least 1".into()));
        }
        Ok(())
    }
}
