use serde::{Deserialize, Serialize};

use super::engine::{LearningEngine, SampleOutcome};
use super::fleet::{FleetState, FleetVm};
use super::trigger::{farm_utilisation, Trigger};
use super::{Policy, PolicyConfig};
use crate::ann::AnnModel;
use crate::capacity::{estimate_ram_capacity, Catalog};
use crate::htm::AnomalySource;
use crate::metrics::{FilterConfig, FleetConstants, MonitoringSample, VmId};
use crate::selector::{candidates, select_vm_type, SelectionInput, SelectionResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingReason {
    ThresholdBreach,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionDetail {
    Dvts(SelectionResult),
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEvent {
    pub time: f64,
    pub vm_id: VmId,
    pub chosen_type: String,
    pub reason: ScalingReason,
    pub utilisation: f64,
    pub ready_at: f64,
    pub selection: SelectionDetail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub now: f64,
    pub utilisation: f64,
    pub outcomes: Vec<SampleOutcome>,
    pub event: Option<ScalingEvent>,
}

/// Everything needed to start an autoscaler.
pub struct AutoscalerParts {
    pub config: PolicyConfig,
    pub catalog: Catalog,
    pub constants: FleetConstants,
    pub filter: FilterConfig,
    pub ann: AnnModel,
    pub anomaly_template: Box<dyn AnomalySource>,
    pub initial_type: String,
    pub provisioning_delay: f64,
}

/// Single control loop owning the fleet: feeds samples to the learning
/// engine, watches the trigger and adds VMs.
pub struct Autoscaler {
    config: PolicyConfig,
    fleet: FleetState,
    engine: LearningEngine,
    trigger: Trigger,
    provisioning_delay: f64,
    events: Vec<ScalingEvent>,
}

impl Autoscaler {
    /// Starts with one VM of the initial type, already serving at `start`.
    pub fn new(parts: AutoscalerParts, start: f64) -> Result<Self> {
        parts.config.validate()?;
        if let Policy::Static(t) = &parts.config.policy {
            parts.catalog.get(t)?;
        }
        if !(parts.provisioning_delay >= 0.0) {
            return Err(Error::InvalidConfig(
                "provisioning delay must be >= 0".into(),
            ));
        }
        let learn = parts.config.policy.is_dvts();
        let mut me = Autoscaler {
            engine: LearningEngine::new(
                parts.catalog,
                parts.constants,
                parts.filter,
                parts.ann,
                parts.anomaly_template,
                learn,
            ),
            config: parts.config,
            fleet: FleetState::default(),
            trigger: Trigger::default(),
            provisioning_delay: parts.provisioning_delay,
            events: Vec::new(),
        };
        me.add_vm(&parts.initial_type, start, start)?;
        Ok(me)
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn fleet(&self) -> &FleetState {
        &self.fleet
    }

    pub fn engine(&self) -> &LearningEngine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut LearningEngine {
        &mut self.engine
    }

    pub fn events(&self) -> &[ScalingEvent] {
        &self.events
    }

    /// Load-balancer weights over the VMs serving at `now`.
    pub fn weights(&self, now: f64) -> Vec<(VmId, f64)> {
        self.fleet.weights(now)
    }

    fn add_vm(&mut self, vm_type: &str, requested_at: f64, ready_at: f64) -> Result<VmId> {
        let spec = self.engine.catalog().get(vm_type)?;
        let id = VmId::new(format!("vm-{}", self.fleet.vms.len()));
        self.fleet.vms.push(FleetVm {
            id: id.clone(),
            vm_type: spec.name.clone(),
            ecu: spec.cpu_spec,
            ram_bytes: spec.ram_bytes,
            requested_at,
            ready_at,
        });
        self.engine.add_vm(id.clone());
        Ok(id)
    }

    /// Handles one monitoring tick and scales up if the trigger fires.
    pub fn observe(&mut self, now: f64, samples: &[MonitoringSample]) -> Result<TickReport> {
        let processed = self.engine.ingest(samples)?;
        let mut pairs = Vec::with_capacity(processed.len());
        for (s, (n, _)) in samples.iter().zip(&processed) {
            let ram = estimate_ram_capacity(
                self.engine.catalog().get(&s.vm_type)?,
                self.engine.constants(),
            );
            pairs.push((n.clone(), ram));
        }
        let utilisation = farm_utilisation(self.config.trigger_metric, &pairs);
        if !samples.is_empty() {
            self.trigger.push(utilisation, &self.config);
        }
        let event = if self
            .trigger
            .fires(now, self.fleet.last_scale_time, &self.config)
        {
            Some(self.scale_up(now, utilisation)?)
        } else {
            None
        };
        Ok(TickReport {
            now,
            utilisation,
            outcomes: processed.into_iter().map(|(_, o)| o).collect(),
            event,
        })
    }

    /// Chooses a type for the next VM without changing the fleet.
    pub fn choose_type(&self) -> Result<(String, SelectionDetail)> {
        match &self.config.policy {
            Policy::Static(t) => Ok((t.clone(), SelectionDetail::Static)),
            Policy::Dvts => {
                let ann = self.engine.ann();
                let (min_users, max_users) =
                    ann.state().user_range().ok_or(Error::ModelNotTrained)?;
                let cands = candidates(
                    self.engine.catalog(),
                    self.engine.repository(),
                    self.engine.constants(),
                    self.config.extrapolation,
                )?;
                let result = select_vm_type(&SelectionInput {
                    candidates: &cands,
                    model: ann,
                    delta: self.config.delta,
                    min_users,
                    max_users,
                    probe_limit: self.config.probe_limit,
                })?;
                Ok((result.chosen_type.clone(), SelectionDetail::Dvts(result)))
            }
        }
    }

    fn scale_up(&mut self, now: f64, utilisation: f64) -> Result<ScalingEvent> {
        let (chosen_type, selection) = self.choose_type()?;
        let ready_at = now + self.provisioning_delay;
        let vm_id = self.add_vm(&chosen_type, now, ready_at)?;
        self.fleet.last_scale_time = Some(now);
        let event = ScalingEvent {
            time: now,
            vm_id,
            chosen_type,
            reason: ScalingReason::ThresholdBreach,
            utilisation,
            ready_at,
            selection,
        };
        log::info!(
            "t={now:.0}s scale-up: {} ({}) at utilisation {utilisation:.3}",
            event.chosen_type,
            event.vm_id
        );
        self.events.push(event.clone());
        Ok(event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::AnnConfig;
    use crate::htm::ConstantAnomaly;

    fn parts(policy: Policy) -> AutoscalerParts {
        let catalog = Catalog::aws_reference();
        let constants = FleetConstants::new(3.5, 2, catalog.ram_max()).unwrap();
        AutoscalerParts {
            config: PolicyConfig {
                policy,
                ..PolicyConfig::default()
            },
            catalog,
            constants,
            filter: FilterConfig::default(),
            ann: AnnModel::new(AnnConfig {
                hidden_units: 10,
                ..AnnConfig::default()
            })
            .unwrap(),
            anomaly_template: Box::new(ConstantAnomaly::new(0.0)),
            initial_type: "m1.small".into(),
            provisioning_delay: 90.0,
        }
    }

    fn busy(vm: &VmId, vm_type: &str, t: f64, idle: f64) -> MonitoringSample {
        MonitoringSample {
            timestamp: t,
            vm_id: vm.clone(),
            vm_type: vm_type.into(),
            users: 60,
            pct_idle: idle,
            pct_steal: 10.0,
            core_freqs: vec![2.0],
            active_memory: 300 << 20,
            disk_util: 0.0,
            net_util: 0.0,
        }
    }

    fn drive(a: &mut Autoscaler, until: f64, idle: f64) {
        let mut t = 0.0;
        while t <= until {
            let samples: Vec<_> = a
                .fleet()
                .ready(t)
                .map(|v| busy(&v.id, &v.vm_type, t, idle))
                .collect();
            a.observe(t, &samples).unwrap();
            t += 5.0;
        }
    }

    #[test]
    fn static_policy_repeats_its_type_and_respects_cooldown() {
        let mut a = Autoscaler::new(parts(Policy::Static("m1.medium".into())), 0.0).unwrap();
        drive(&mut a, 3600.0, 5.0);
        let ev = a.events();
        assert!(ev.len() >= 5);
        assert!(ev.iter().all(|e| e.chosen_type == "m1.medium"));
        for w in ev.windows(2) {
            assert!(w[1].time - w[0].time >= 600.0);
        }
        assert_eq!(ev[0].time, 5.0);
        let w = a.weights(3600.0);
        assert_eq!(w.len(), a.fleet().vms.len());
        assert!((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calm_fleet_never_scales() {
        let mut a = Autoscaler::new(parts(Policy::Dvts), 0.0).unwrap();
        drive(&mut a, 1800.0, 60.0);
        assert!(a.events().is_empty());
        assert!(a.engine().ann().state().k > 0);
    }

    #[test]
    fn dvts_with_untrained_model_reports_it() {
        let a = Autoscaler::new(parts(Policy::Dvts), 0.0).unwrap();
        assert!(matches!(a.choose_type(), Err(Error::ModelNotTrained)));
    }

    #[test]
    fn unknown_static_type_rejected() {
        assert!(Autoscaler::new(parts(Policy::Static("x9.huge".into())), 0.0).is_err());
    }
}
