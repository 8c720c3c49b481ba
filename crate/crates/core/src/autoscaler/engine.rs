use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::ann::{AnnModel, TrainOutcome};
use crate::capacity::{estimate_ram_capacity, CapacityRecord, CapacityRepository, Catalog};
use crate::htm::{AnomalyResult, AnomalySource};
use crate::metrics::{
    filter_training_sample, CapacityRatios, FilterConfig, FilterDecision, FleetConstants,
    MonitoringSample, NormalizedSample, VmId,
};
use crate::par::{self, Execution};
use crate::{Error, Result};

/// What happened to one monitoring sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub vm_id: VmId,
    pub users: u32,
    pub cpu_capacity: f64,
    pub cpu_relative: f64,
    pub ram_relative: f64,
    pub anomaly: Option<AnomalyResult>,
    pub decision: Option<FilterDecision>,
    pub training: Option<TrainOutcome>,
}

/// Turns raw samples into capacity records, anomaly scores and ANN updates.
///
/// With learning disabled only normalisation and capacity recording run.
pub struct LearningEngine {
    catalog: Catalog,
    constants: FleetConstants,
    filter: FilterConfig,
    learn: bool,
    ann: AnnModel,
    repo: CapacityRepository,
    template: Box<dyn AnomalySource>,
    regions: BTreeMap<VmId, Box<dyn AnomalySource>>,
    first_vm: Option<VmId>,
    recent_users: BTreeMap<VmId, VecDeque<u32>>,
    exec: Execution,
}

impl LearningEngine {
    pub fn new(
        catalog: Catalog,
        constants: FleetConstants,
        filter: FilterConfig,
        ann: AnnModel,
        anomaly_template: Box<dyn AnomalySource>,
        learn: bool,
    ) -> Self {
        LearningEngine {
            catalog,
            constants,
            filter,
            learn,
            ann,
            repo: CapacityRepository::new(),
            template: anomaly_template,
            regions: BTreeMap::new(),
            first_vm: None,
            recent_users: BTreeMap::new(),
            exec: Execution::default(),
        }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn set_execution(&mut self, exec: Execution) {
        self.exec = exec;
    }

    pub fn with_repository(mut self, repo: CapacityRepository) -> Self {
        self.repo = repo;
        self
    }

    pub fn learning(&self) -> bool {
        self.learn
    }

    pub fn ann(&self) -> &AnnModel {
        &self.ann
    }

    pub fn repository(&self) -> &CapacityRepository {
        &self.repo
    }

    pub fn repository_mut(&mut self) -> &mut CapacityRepository {
        &mut self.repo
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn constants(&self) -> &FleetConstants {
        &self.constants
    }

    pub fn region(&self, id: &VmId) -> Option<&dyn AnomalySource> {
        self.regions.get(id).map(|r| r.as_ref())
    }

    /// Region of the first VM, which new VMs are seeded from.
    pub fn first_region(&self) -> Option<&dyn AnomalySource> {
        self.region(self.first_vm.as_ref()?)
    }

    /// Registers a VM. The first one gets a fresh detector; later ones a
    /// deep copy of the first VM's current detector.
    pub fn add_vm(&mut self, id: VmId) {
        if !self.learn {
            return;
        }
        let region = match self.first_region() {
            Some(first) => first.clone_source(),
            None => {
                self.first_vm = Some(id.clone());
                self.template.clone_source()
            }
        };
        self.regions.insert(id, region);
    }

    fn ram_capacity(&self, vm_type: &str) -> Result<f64> {
        Ok(estimate_ram_capacity(
            self.catalog.get(vm_type)?,
            &self.constants,
        ))
    }

    /// Processes one tick of samples (at most one per VM).
    pub fn ingest(
        &mut self,
        samples: &[MonitoringSample],
    ) -> Result<Vec<(NormalizedSample, SampleOutcome)>> {
        let mut norm = Vec::with_capacity(samples.len());
        for s in samples {
            let n = NormalizedSample::from_sample(s, &self.constants)?;
            if n.cpu_capacity > 0.0 {
                self.repo.record(CapacityRecord {
                    time: s.timestamp,
                    vm_type: s.vm_type.clone(),
                    vm_id: s.vm_id.clone(),
                    cpu_capacity_norm: n.cpu_capacity,
                })?;
            }
            norm.push(n);
        }

        let anomalies = if self.learn {
            self.score(&norm)?
        } else {
            vec![None; norm.len()]
        };

        let mut out = Vec::with_capacity(norm.len());
        for ((s, n), anomaly) in samples.iter().zip(norm).zip(anomalies) {
            let ram_cap = self.ram_capacity(&s.vm_type)?;
            let cpu_relative = if n.cpu_capacity > 0.0 {
                n.cpu_load / n.cpu_capacity
            } else {
                1.0
            };
            let ram_relative = n.ram_load / ram_cap;
            let mut outcome = SampleOutcome {
                vm_id: s.vm_id.clone(),
                users: s.users,
                cpu_capacity: n.cpu_capacity,
                cpu_relative,
                ram_relative,
                anomaly,
                decision: None,
                training: None,
            };
            let recent = self.recent_users.entry(s.vm_id.clone()).or_default();
            if self.learn {
                let rmse_pre = self.ann.rmse(n.users as f64, n.cpu_load, n.ram_load);
                let history: Vec<u32> = recent.iter().copied().collect();
                let decision = filter_training_sample(
                    &n,
                    CapacityRatios {
                        cpu: n.cpu_capacity,
                        ram: ram_cap,
                    },
                    &history,
                    rmse_pre,
                    &self.filter,
                );
                if decision.accepted {
                    let score = anomaly.map_or(0.0, |a| a.effective_score());
                    outcome.training = Some(self.ann.train(&n, score)?);
                }
                outcome.decision = Some(decision);
            }
            recent.push_back(s.users);
            while recent.len() > self.filter.jump_history.max(1) {
                recent.pop_front();
            }
            out.push((n, outcome));
        }
        Ok(out)
    }

    /// Anomaly scores, one region per VM, regions updated in parallel.
    fn score(&mut self, norm: &[NormalizedSample]) -> Result<Vec<Option<AnomalyResult>>> {
        let mut work = Vec::with_capacity(norm.len());
        for n in norm {
            let region = self
                .regions
                .remove(&n.vm_id)
                .ok_or_else(|| Error::InvalidSample {
                    vm_id: n.vm_id.0.clone(),
                    reason: "no anomaly detector registered (unknown or duplicate VM in tick)"
                        .into(),
                });
            match region {
                Ok(r) => work.push((r, n)),
                Err(e) => {
                    for (r, n) in work {
                        self.regions.insert(n.vm_id.clone(), r);
                    }
                    return Err(e);
                }
            }
        }
        let results = par::map_mut(self.exec, &mut work, |(region, n)| {
            region.observe(n.timestamp, n.users as f64, n.cpu_load, n.ram_load)
        });
        for (r, n) in work {
            self.regions.insert(n.vm_id.clone(), r);
        }
        results.into_iter().map(|r| r.map(Some)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::AnnConfig;
    use crate::htm::ConstantAnomaly;
    use crate::metrics::FilterReason;

    fn engine(learn: bool) -> LearningEngine {
        let catalog = Catalog::aws_reference();
        let constants = FleetConstants::new(3.5, 2, catalog.ram_max()).unwrap();
        let ann = AnnModel::new(AnnConfig {
            hidden_units: 10,
            ..AnnConfig::default()
        })
        .unwrap();
        LearningEngine::new(
            catalog,
            constants,
            FilterConfig::default(),
            ann,
            Box::new(ConstantAnomaly::new(0.0)),
            learn,
        )
    }

    fn sample(vm: &str, t: f64, users: u32, idle: f64) -> MonitoringSample {
        MonitoringSample {
            timestamp: t,
            vm_id: VmId::new(vm),
            vm_type: "m1.small".into(),
            users,
            pct_idle: idle,
            pct_steal: 20.0,
            core_freqs: vec![2.0],
            active_memory: 400 << 20,
            disk_util: 1.0,
            net_util: 1.0,
        }
    }

    #[test]
    fn records_capacity_and_trains() {
        let mut e = engine(true);
        e.add_vm(VmId::new("vm-0"));
        let out = e.ingest(&[sample("vm-0", 0.0, 50, 40.0)]).unwrap();
        assert_eq!(e.repository().record_count("m1.small"), 1);
        let o = &out[0].1;
        assert_eq!(o.decision.unwrap().reason, FilterReason::Accepted);
        assert!(o.training.is_some());
        assert_eq!(e.ann().state().k, 1);
    }

    #[test]
    fn overloaded_and_light_samples_are_skipped() {
        let mut e = engine(true);
        e.add_vm(VmId::new("vm-0"));
        let out = e.ingest(&[sample("vm-0", 0.0, 50, 5.0)]).unwrap();
        assert_eq!(out[0].1.decision.unwrap().reason, FilterReason::Overload);
        let out = e.ingest(&[sample("vm-0", 5.0, 10, 40.0)]).unwrap();
        assert_eq!(
            out[0].1.decision.unwrap().reason,
            FilterReason::NegligibleLoad
        );
        assert_eq!(e.ann().state().k, 0);
    }

    #[test]
    fn unknown_vm_is_an_error_and_keeps_regions() {
        let mut e = engine(true);
        e.add_vm(VmId::new("vm-0"));
        let r = e.ingest(&[sample("vm-0", 0.0, 50, 40.0), sample("vm-9", 0.0, 50, 40.0)]);
        assert!(r.is_err());
        assert!(e.region(&VmId::new("vm-0")).is_some());
    }

    #[test]
    fn later_vms_copy_the_first_detector() {
        let mut e = engine(true);
        e.add_vm(VmId::new("vm-0"));
        for i in 0..5 {
            e.ingest(&[sample("vm-0", i as f64 * 5.0, 50, 40.0)])
                .unwrap();
        }
        e.add_vm(VmId::new("vm-1"));
        assert_eq!(e.region(&VmId::new("vm-1")).unwrap().samples_seen(), 5);
    }

    #[test]
    fn static_mode_only_measures() {
        let mut e = engine(false);
        e.add_vm(VmId::new("vm-0"));
        let out = e.ingest(&[sample("vm-0", 0.0, 50, 40.0)]).unwrap();
        assert!(out[0].1.decision.is_none());
        assert_eq!(e.repository().len(), 1);
    }
}
