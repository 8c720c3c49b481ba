use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{AppModel, HardwareProfile};
use crate::capacity::VmTypeSpec;
use crate::metrics::{FleetConstants, MonitoringSample, VmId};

/// Hypervisor steal of one instance: a fixed mean plus bounded jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StealProcess {
    pub mean: f64,
    pub amplitude: f64,
}

impl StealProcess {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let jitter = if self.amplitude > 0.0 {
            rng.gen_range(-self.amplitude..=self.amplitude)
        } else {
            0.0
        };
        (self.mean + jitter).clamp(0.0, 99.0)
    }
}

/// A simulated VM instance.
#[derive(Debug, Clone)]
pub struct SimVm {
    pub id: VmId,
    pub vm_type: String,
    pub core_freqs: Vec<f64>,
    pub ram_bytes: u64,
    pub steal: StealProcess,
    rng: ChaCha8Rng,
}

impl SimVm {
    /// Draws the instance's steal level. Every VM gets its own random stream
    /// derived from the experiment seed and its launch index.
    pub fn provision(
        id: VmId,
        index: u64,
        spec: &VmTypeSpec,
        hw: &HardwareProfile,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index + 1);
        let mean = if hw.steal_mean_max > hw.steal_mean_min {
            rng.gen_range(hw.steal_mean_min..=hw.steal_mean_max)
        } else {
            hw.steal_mean_min
        };
        SimVm {
            id,
            vm_type: spec.name.clone(),
            core_freqs: hw.core_freqs_ghz.clone(),
            ram_bytes: spec.ram_bytes,
            steal: StealProcess {
                mean,
                amplitude: hw.steal_jitter,
            },
            rng,
        }
    }
}

/// Application demand for `users` at time `t`, before capping by the VM.
pub fn demand(app: &AppModel, users: u32, t: f64) -> (f64, f64, u64) {
    let cpu = users as f64 * app.base_cpu_per_user;
    let mut ram = app.base_ram_fixed + app.base_ram_per_user * users as u64;
    let mut extra_busy = 0.0;
    if let Some(c) = app.change.filter(|c| t >= c.at_seconds) {
        extra_busy = c.cpu_util_delta / 100.0;
        ram += c.ram_fixed_delta + c.ram_per_user_delta * users as u64;
    }
    (cpu, extra_busy, ram)
}

/// One monitoring report of `vm` serving `users` at time `t`.
pub fn emit_sample(
    vm: &mut SimVm,
    app: &AppModel,
    constants: &FleetConstants,
    users: u32,
    t: f64,
) -> MonitoringSample {
    let steal = vm.steal.sample(&mut vm.rng);
    let (cpu_demand, extra_busy, ram) = demand(app, users, t);
    let ghz: f64 = vm.core_freqs.iter().sum();
    let capacity = (100.0 - steal) * ghz / (100.0 * constants.max_cpu_ghz());
    let busy_share = if capacity > 0.0 {
        (cpu_demand / capacity + extra_busy).min(1.0)
    } else {
        1.0
    };
    let busy = (100.0 - steal) * busy_share;
    let idle = (100.0 - steal - busy).max(0.0);
    MonitoringSample {
        timestamp: t,
        vm_id: vm.id.clone(),
        vm_type: vm.vm_type.clone(),
        users,
        pct_idle: idle,
        pct_steal: steal,
        core_freqs: vm.core_freqs.clone(),
        active_memory: ram.min(vm.ram_bytes).max(1),
        disk_util: app.disk_util,
        net_util: app.net_util,
    }
}
