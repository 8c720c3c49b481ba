use serde::{Deserialize, Serialize};

use crate::metrics::VmId;

/// Routing weights proportional to declared compute units.
pub fn recompute_weights(ecus: &[f64]) -> Vec<f64> {
    let total: f64 = ecus.iter().sum();
    ecus.iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetVm {
    pub id: VmId,
    pub vm_type: String,
    pub ecu: f64,
    pub ram_bytes: u64,
    /// When the VM was requested (billing starts here).
    pub requested_at: f64,
    /// When it starts serving users.
    pub ready_at: f64,
}

impl FleetVm {
    pub fn is_ready(&self, now: f64) -> bool {
        now >= self.ready_at
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FleetState {
    pub vms: Vec<FleetVm>,
    pub last_scale_time: Option<f64>,
}

impl FleetState {
    pub fn ready(&self, now: f64) -> impl Iterator<Item = &FleetVm> {
        self.vms.iter().filter(move |v| v.is_ready(now))
    }

    pub fn get(&self, id: &VmId) -> Option<&FleetVm> {
        self.vms.iter().find(|v| &v.id == id)
    }

    /// `(id, weight)` for every VM serving at `now`, in fleet order.
    pub fn weights(&self, now: f64) -> Vec<(VmId, f64)> {
        let ready: Vec<&FleetVm> = self.ready(now).collect();
        let ecus: Vec<f64> = ready.iter().map(|v| v.ecu).collect();
        ready
            .iter()
            .zip(recompute_weights(&ecus))
            .map(|(v, w)| (v.id.clone(), w))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        assert_eq!(recompute_weights(&[1.0]), vec![1.0]);
        assert_eq!(recompute_weights(&[1.0, 3.0]), vec![0.25, 0.75]);
        let w = recompute_weights(&[1.0, 2.0, 3.0]);
        for (a, b) in w.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn pending_vms_get_no_traffic() {
        let vm = |id: &str, ecu: f64, ready_at: f64| FleetVm {
            id: VmId::new(id),
            vm_type: "t".into(),
            ecu,
            ram_bytes: 1,
            requested_at: 0.0,
            ready_at,
        };
        let fleet = FleetState {
            vms: vec![vm("a", 1.0, 0.0), vm("b", 3.0, 100.0)],
            last_scale_time: None,
        };
        assert_eq!(fleet.weights(50.0), vec![(VmId::new("a"), 1.0)]);
        assert_eq!(fleet.weights(100.0).len(), 2);
    }
}
