use serde::{Deserialize, Serialize};

use crate::metrics::VmId;

/// Started blocks (at least one) and their cost for a VM that ran `runtime`
/// seconds.
pub fn billed_cost(cost_per_hour: f64, runtime: f64, block_seconds: f64) -> (u64, f64) {
    let blocks = ((runtime / block_seconds).ceil() as u64).max(1);
    (
        blocks,
        cost_per_hour * blocks as f64 * block_seconds / 3600.0,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub vm_id: VmId,
    pub vm_type: String,
    /// Simulated seconds.
    pub start: f64,
    pub end: f64,
    pub ready_at: f64,
    /// The same instants in reported wall-clock seconds.
    pub start_wall: f64,
    pub end_wall: f64,
    pub billed_blocks: u64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub billing_block_seconds: f64,
    pub billing_block_wall_seconds: f64,
    pub entries: Vec<LedgerEntry>,
    pub total_cost: f64,
}

impl CostLedger {
    pub fn new(billing_block_seconds: f64, time_compression: f64) -> Self {
        CostLedger {
            billing_block_seconds,
            billing_block_wall_seconds: billing_block_seconds / time_compression,
            entries: Vec::new(),
            total_cost: 0.0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn close(
        &mut self,
        vm_id: VmId,
        vm_type: &str,
        cost_per_hour: f64,
        start: f64,
        ready_at: f64,
        end: f64,
        time_compression: f64,
    ) {
        let (blocks, cost) = billed_cost(cost_per_hour, end - start, self.billing_block_seconds);
        self.entries.push(LedgerEntry {
            vm_id,
            vm_type: vm_type.to_string(),
            start,
            end,
            ready_at,
            start_wall: start / time_compression,
            end_wall: end / time_compression,
            billed_blocks: blocks,
            cost,
        });
        self.total_cost = self.entries.iter().map(|e| e.cost).sum();
    }

    pub fn vm_count(&self) -> usize {
        self.entries.len()
    }
}
