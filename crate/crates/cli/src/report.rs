use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use dvts_core::simenv::{CostLedger, RunMeta, Scenario};

/// One row of `summary.csv` / `comparison.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub policy: String,
    pub seed: u64,
    pub total_cost: f64,
    pub vm_count: usize,
    pub scale_ups: usize,
    pub first_selection: String,
    pub aborted: bool,
    pub duration_wall_seconds: f64,
}

impl SummaryRow {
    pub fn of(meta: &RunMeta) -> Self {
        SummaryRow {
            policy: meta.policy.to_string(),
            seed: meta.seed,
            total_cost: meta.total_cost,
            vm_count: meta.vm_count,
            scale_ups: meta.scale_ups,
            first_selection: meta.first_selection.clone().unwrap_or_default(),
            aborted: meta.aborted,
            duration_wall_seconds: meta.duration_wall_seconds,
        }
    }
}

/// One VM of one run, for per-VM timeline reports.
#[derive(Debug, Clone, Serialize)]
pub struct VmRow {
    pub policy: String,
    pub seed: u64,
    pub vm_id: String,
    pub vm_type: String,
    pub start: f64,
    pub ready_at: f64,
    pub end: f64,
    pub start_wall: f64,
    pub end_wall: f64,
    pub billed_blocks: u64,
    pub cost: f64,
}

pub fn vm_rows(policy: &str, seed: u64, ledger: &CostLedger) -> Vec<VmRow> {
    ledger
        .entries
        .iter()
        .map(|e| VmRow {
            policy: policy.to_string(),
            seed,
            vm_id: e.vm_id.0.clone(),
            vm_type: e.vm_type.clone(),
            start: e.start,
            ready_at: e.ready_at,
            end: e.end,
            start_wall: e.start_wall,
            end_wall: e.end_wall,
            billed_blocks: e.billed_blocks,
            cost: e.cost,
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Hex SHA-256 of the scenario's canonical JSON.
pub fn scenario_digest(s: &Scenario) -> Result<String> {
    let bytes = serde_json::to_vec(s)?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Directory name used for a policy's outputs, e.g. `static-m1.small`.
pub fn policy_slug(policy: &str) -> String {
    policy.replace(':', "-")
}
