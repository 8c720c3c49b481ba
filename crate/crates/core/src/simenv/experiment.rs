use serde::{Deserialize, Serialize};

use super::app::{emit_sample, SimVm};
use super::ledger::CostLedger;
use super::scenario::Scenario;
use super::workload::{assign_users, generate_workload};
use crate::ann::{AnnConfig, AnnModel, TrainOutcome};
use crate::autoscaler::{Autoscaler, AutoscalerParts, Policy, PolicyConfig, ScalingEvent};
use crate::capacity::CapacityRecord;
use crate::htm::{HtmConfig, HtmRegion};
use crate::metrics::{FilterReason, MonitoringSample, VmId};
use crate::par::Execution;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ExperimentEvent {
    Started {
        time: f64,
        policy: Policy,
        seed: u64,
        vm_id: VmId,
        vm_type: String,
    },
    WorkloadChange {
        time: f64,
    },
    ScaleUp(ScalingEvent),
    VmReady {
        time: f64,
        vm_id: VmId,
        vm_type: String,
    },
    /// The control loop hit an error; the run stops at `time`.
    Aborted {
        time: f64,
        error: String,
    },
    Finished {
        time: f64,
        vm_count: usize,
        total_cost: f64,
    },
}

/// Fleet state after one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub time: f64,
    pub users: u32,
    pub serving_vms: usize,
    pub total_vms: usize,
    pub utilisation: f64,
}

/// Learning decision for one monitoring sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub time: f64,
    pub vm_id: VmId,
    pub users: u32,
    /// `None` while the VM's detector warms up.
    pub anomaly: Option<f64>,
    pub reason: FilterReason,
    pub outcome: Option<TrainOutcome>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub scenario: Scenario,
    pub policy: Policy,
    pub seed: u64,
    pub events: Vec<ExperimentEvent>,
    pub samples: Vec<MonitoringSample>,
    pub capacity: Vec<CapacityRecord>,
    pub training: Vec<TrainingRow>,
    pub timeline: Vec<TimelineRow>,
    pub ledger: CostLedger,
    /// Final model and first VM's detector; `None` for static policies.
    pub ann: Option<AnnModel>,
    pub htm: Option<HtmRegion>,
    pub aborted: bool,
}

impl ExperimentResult {
    pub fn scale_ups(&self) -> impl Iterator<Item = &ScalingEvent> {
        self.events.iter().filter_map(|e| match e {
            ExperimentEvent::ScaleUp(s) => Some(s),
            _ => None,
        })
    }

    pub fn total_cost(&self) -> f64 {
        self.ledger.total_cost
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `scenario` under `policy`.
pub fn run_experiment(scenario: &Scenario, policy: &Policy, seed: u64) -> Result<ExperimentResult> {
    run_experiment_with(scenario, policy, seed, Execution::default())
}

/// As [`run_experiment`], choosing how the per-tick work is executed. The
/// result does not depend on `exec`.
pub fn run_experiment_with(
    scenario: &Scenario,
    policy: &Policy,
    seed: u64,
    exec: Execution,
) -> Result<ExperimentResult> {
    scenario.validate()?;
    let constants = scenario.constants()?;
    let catalog = scenario.catalog.clone();
    if let Policy::Static(t) = policy {
        catalog.get(t)?;
    }

    let ann = AnnModel::new(AnnConfig {
        seed: mix(seed, scenario.ann.seed),
        ..scenario.ann.clone()
    })?;
    let htm = HtmRegion::new(HtmConfig {
        rng_seed: mix(seed, scenario.htm.rng_seed),
        ..scenario.htm.clone()
    })?
    .with_execution(exec);

    let mut scaler = Autoscaler::new(
        AutoscalerParts {
            config: PolicyConfig {
                policy: policy.clone(),
                ..scenario.policy.clone()
            },
            catalog: catalog.clone(),
            constants,
            filter: scenario.filter,
            ann,
            anomaly_template: Box::new(htm),
            initial_type: scenario.initial_vm_type.clone(),
            provisioning_delay: scenario.provisioning_delay_seconds,
        },
        0.0,
    )?;
    scaler.engine_mut().set_execution(exec);

    let env_seed = mix(seed, 0);
    let provision = |id: &VmId, index: usize, vm_type: &str| -> Result<SimVm> {
        let hw = scenario
            .hardware
            .get(vm_type)
            .ok_or_else(|| Error::InvalidConfig(format!("no hardware profile for `{vm_type}`")))?;
        Ok(SimVm::provision(
            id.clone(),
            index as u64,
            catalog.get(vm_type)?,
            hw,
            env_seed,
        ))
    };

    let first = scaler.fleet().vms[0].clone();
    let mut vms = vec![provision(&first.id, 0, &first.vm_type)?];
    let mut announced = vec![true];
    let mut events = vec![ExperimentEvent::Started {
        time: 0.0,
        policy: policy.clone(),
        seed,
        vm_id: first.id.clone(),
        vm_type: first.vm_type.clone(),
    }];
    let mut samples = Vec::new();
    let mut capacity = Vec::new();
    let mut training = Vec::new();
    let mut timeline = Vec::new();
    let mut change_pending = scenario.app.change;
    let mut aborted = false;
    let mut end = 0.0;

    let ticks = (scenario.duration_seconds / scenario.tick_seconds).floor() as u64;
    for tick in 0..=ticks {
        let now = tick as f64 * scenario.tick_seconds;
        end = now;
        if let Some(c) = change_pending.filter(|c| now >= c.at_seconds) {
            events.push(ExperimentEvent::WorkloadChange { time: c.at_seconds });
            change_pending = None;
        }
        for (i, vm) in scaler.fleet().vms.iter().enumerate() {
            if !announced[i] && vm.is_ready(now) {
                announced[i] = true;
                events.push(ExperimentEvent::VmReady {
                    time: vm.ready_at,
                    vm_id: vm.id.clone(),
                    vm_type: vm.vm_type.clone(),
                });
            }
        }

        let users = generate_workload(&scenario.workload, now);
        let weights = scaler.weights(now);
        let w: Vec<f64> = weights.iter().map(|(_, w)| *w).collect();
        let shares = assign_users(users, &w);
        let mut tick_samples = Vec::with_capacity(weights.len());
        for ((id, _), n) in weights.iter().zip(shares) {
            let idx = scaler
                .fleet()
                .vms
                .iter()
                .position(|v| &v.id == id)
                .expect("weighted VM is in fleet");
            tick_samples.push(emit_sample(
                &mut vms[idx],
                &scenario.app,
                &constants,
                n,
                now,
            ));
        }

        let report = match scaler.observe(now, &tick_samples) {
            Ok(r) => r,
            Err(e) => {
                samples.extend(tick_samples);
                events.push(ExperimentEvent::Aborted {
                    time: now,
                    error: e.to_string(),
                });
                aborted = true;
                break;
            }
        };
        for (s, o) in tick_samples.iter().zip(&report.outcomes) {
            if o.cpu_capacity > 0.0 {
                capacity.push(CapacityRecord {
                    time: now,
                    vm_type: s.vm_type.clone(),
                    vm_id: s.vm_id.clone(),
                    cpu_capacity_norm: o.cpu_capacity,
                });
            }
            if let Some(d) = o.decision {
                training.push(TrainingRow {
                    time: now,
                    vm_id: o.vm_id.clone(),
                    users: o.users,
                    anomaly: o.anomaly.filter(|a| a.warmed_up).map(|a| a.score),
                    reason: d.reason,
                    outcome: o.training,
                });
            }
        }
        samples.extend(tick_samples);
        if let Some(ev) = report.event {
            let index = scaler.fleet().vms.len() - 1;
            vms.push(provision(&ev.vm_id, index, &ev.chosen_type)?);
            announced.push(ev.ready_at <= now);
            events.push(ExperimentEvent::ScaleUp(ev));
        }
        timeline.push(TimelineRow {
            time: now,
            users,
            serving_vms: weights.len(),
            total_vms: scaler.fleet().vms.len(),
            utilisation: report.utilisation,
        });
    }

    let mut ledger = CostLedger::new(scenario.billing_block_seconds, scenario.time_compression);
    for vm in &scaler.fleet().vms {
        let spec = catalog.get(&vm.vm_type)?;
        ledger.close(
            vm.id.clone(),
            &vm.vm_type,
            spec.cost_per_hour,
            vm.requested_at,
            vm.ready_at,
            end,
            scenario.time_compression,
        );
    }
    events.push(ExperimentEvent::Finished {
        time: end,
        vm_count: ledger.vm_count(),
        total_cost: ledger.total_cost,
    });

    let (ann, htm) = if scaler.engine().learning() {
        let htm = scaler
            .engine()
            .first_region()
            .and_then(|r| r.as_any().downcast_ref::<HtmRegion>())
            .cloned();
        (Some(scaler.engine().ann().clone()), htm)
    } else {
        (None, None)
    };

    Ok(ExperimentResult {
        scenario: scenario.clone(),
        policy: policy.clone(),
        seed,
        events,
        samples,
        capacity,
        training,
        timeline,
        ledger,
        ann,
        htm,
        aborted,
    })
}
