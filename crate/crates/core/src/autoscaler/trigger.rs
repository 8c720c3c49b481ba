use std::collections::VecDeque;

use super::{PolicyConfig, TriggerMetric};
use crate::metrics::NormalizedSample;

/// `(cpu, ram)` load of one VM relative to its own capacity.
///
/// `ram_capacity` is the VM's RAM on the fleet-normalised scale.
pub fn vm_utilisation(s: &NormalizedSample, ram_capacity: f64) -> (f64, f64) {
    let cpu = if s.cpu_capacity > 0.0 {
        s.cpu_load / s.cpu_capacity
    } else {
        1.0
    };
    let ram = if ram_capacity > 0.0 {
        s.ram_load / ram_capacity
    } else {
        1.0
    };
    (cpu, ram)
}

/// Combines one tick of samples into a single utilisation figure.
///
/// Each entry pairs a sample with that VM's normalised RAM capacity.
/// Returns 0 for an empty tick.
pub fn farm_utilisation(metric: TriggerMetric, samples: &[(NormalizedSample, f64)]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let n = samples.len() as f64;
    match metric {
        TriggerMetric::VmMean => {
            samples
                .iter()
                .map(|(s, ram)| {
                    let (c, r) = vm_utilisation(s, *ram);
                    c.max(r)
                })
                .sum::<f64>()
                / n
        }
        TriggerMetric::CpuMean => {
            samples
                .iter()
                .map(|(s, ram)| vm_utilisation(s, *ram).0)
                .sum::<f64>()
                / n
        }
        TriggerMetric::FarmTotal => {
            let (mut cl, mut cc, mut rl, mut rc) = (0.0, 0.0, 0.0, 0.0);
            for (s, ram) in samples {
                cl += s.cpu_load;
                cc += s.cpu_capacity;
                rl += s.ram_load;
                rc += ram;
            }
            let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 1.0 };
            ratio(cl, cc).max(ratio(rl, rc))
        }
    }
}

/// Consecutive breaching samples needed to cover `sustain_seconds`.
pub fn required_breaches(sustain_seconds: f64, sample_interval: f64) -> usize {
    ((sustain_seconds / sample_interval).ceil() as usize).max(1)
}

/// True when the last samples of `window` (oldest first) all exceed the
/// threshold for the configured sustain time and the cooldown has passed.
pub fn evaluate_trigger(
    window: &[f64],
    now: f64,
    last_scale_time: Option<f64>,
    cfg: &PolicyConfig,
) -> bool {
    let need = required_breaches(cfg.sustain_seconds, cfg.sample_interval);
    if window.len() < need {
        return false;
    }
    let sustained = window[window.len() - need..]
        .iter()
        .all(|&u| u > cfg.trigger_threshold);
    let cooled = last_scale_time.is_none_or(|t| now - t >= cfg.cooldown_seconds);
    sustained && cooled
}

/// Rolling window of farm utilisation readings.
#[derive(Debug, Clone, Default)]
pub struct Trigger {
    window: VecDeque<f64>,
}

impl Trigger {
    pub fn push(&mut self, utilisation: f64, cfg: &PolicyConfig) {
        self.window.push_back(utilisation);
        let keep = required_breaches(cfg.sustain_seconds, cfg.sample_interval);
        while self.window.len() > keep {
            self.window.pop_front();
        }
    }

    pub fn fires(&self, now: f64, last_scale_time: Option<f64>, cfg: &PolicyConfig) -> bool {
        let w: Vec<f64> = self.window.iter().copied().collect();
        evaluate_trigger(&w, now, last_scale_time, cfg)
    }
}
