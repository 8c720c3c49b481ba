//! Deterministic simulated cloud: a ramping user population served by a
//! load-balanced fleet whose VMs report noisy monitoring samples, plus
//! hourly-block billing.

mod app;
mod experiment;
mod ledger;
mod output;
mod scenario;
mod workload;

pub use app::{demand, emit_sample, SimVm, StealProcess};
pub use experiment::{
    run_experiment, run_experiment_with, ExperimentEvent, ExperimentResult, TimelineRow,
    TrainingRow,
};
pub use ledger::{billed_cost, CostLedger, LedgerEntry};
pub use output::{write_result, RunMeta};
pub use scenario::{AppModel, HardwareProfile, Scenario, WorkloadChange, WorkloadProfile};
pub use workload::{assign_users, generate_workload};
