//! Online regression from user count to normalised (CPU, RAM) load.
//!
//! One network serves the whole fleet. Every accepted sample trains it with
//! a learning rate, momentum and epoch count derived from the sample's error
//! relative to recent errors and from recent anomaly scores: surprising
//! samples are learned quickly, routine ones with the ideal parameters.

mod network;
mod schedule;

use std::collections::VecDeque;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use network::{logistic, output_error, Network};
pub use schedule::{base_learning_rate, boosted_learning_rate, epochs_for, momentum_for};

use crate::metrics::NormalizedSample;
use crate::{Error, Result};

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnConfig {
    pub hidden_units: usize,
    /// Output layer initialisation range.
    pub init_range: f64,
    /// Input-to-hidden weights are drawn from `[-hidden_init_range, hidden_init_range]`
    /// and hidden biases from `[-hidden_bias_range, hidden_bias_range]`, so the
    /// sigmoid transitions spread over the user range instead of all units
    /// starting in their linear region.
    pub hidden_init_range: f64,
    pub hidden_bias_range: f64,
    /// User counts are divided by this before entering the network.
    pub user_scale: f64,
    pub ideal_lr: f64,
    pub ideal_momentum: f64,
    /// Length of the anomaly and error histories.
    pub history: usize,
    /// Samples predicted better than this are not trained on.
    pub min_rmse: f64,
    /// Number of schedule records kept for inspection.
    pub trace_len: usize,
    pub seed: u64,
}

impl Default for AnnConfig {
    fn default() -> Self {
        AnnConfig {
            hidden_units: 250,
            init_range: 0.1,
            hidden_init_range: 20.0,
            hidden_bias_range: 3.0,
            user_scale: 1000.0,
            ideal_lr: 0.001,
            ideal_momentum: 0.9,
            history: 10,
            min_rmse: 0.01,
            trace_len: 256,
            seed: 7,
        }
    }
}

impl AnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 || self.history == 0 {
            return Err(Error::InvalidConfig(
                "ANN needs hidden units and history".into(),
            ));
        }
        if !(self.user_scale > 0.0 && self.ideal_lr > 0.0 && self.ideal_lr < 1.0) {
            return Err(Error::InvalidConfig(
                "ANN user_scale and ideal_lr must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.ideal_momentum)
            || self.init_range < 0.0
            || self.hidden_init_range < 0.0
            || self.hidden_bias_range < 0.0
        {
            return Err(Error::InvalidConfig(
                "ANN momentum must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Schedule values used for one accepted sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub k: u64,
    pub base_lr: f64,
    pub boosted_lr: f64,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: u32,
    pub rmse_pre: f64,
    pub rmse_post: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainerState {
    /// Accepted samples so far.
    pub k: u64,
    /// Most recent anomaly scores, oldest first.
    pub anomalies: VecDeque<f64>,
    /// Most recent pre-update errors, oldest first.
    pub errors: VecDeque<f64>,
    pub min_users: Option<u32>,
    pub max_users: Option<u32>,
    pub trace: VecDeque<ScheduleRecord>,
}

impl TrainerState {
    /// Observed `(min, max)` users of trained samples.
    pub fn user_range(&self) -> Option<(u32, u32)> {
        Some((self.min_users?, self.max_users?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub filtered: bool,
    pub rmse_pre: f64,
    pub rmse_post: f64,
    pub lr_used: f64,
    pub momentum_used: f64,
    pub epochs_used: u32,
}

/// The regression network together with its training schedule state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    config: AnnConfig,
    network: Network,
    state: TrainerState,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    kind: String,
    version: u32,
    model: AnnModel,
}

impl AnnModel {
    pub fn new(config: AnnConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut network = Network::new(1, config.hidden_units, 2, config.init_range, &mut rng);
        network.init_hidden(config.hidden_init_range, config.hidden_bias_range, &mut rng);
        Ok(AnnModel {
            config,
            network,
            state: TrainerState::default(),
        })
    }

    /// Wraps an existing network, e.g. one with hand-set weights.
    pub fn from_network(config: AnnConfig, network: Network) -> Result<Self> {
        config.validate()?;
        if network.dims() != (1, config.hidden_units, 2) {
            return Err(Error::InvalidConfig(format!(
                "network dims {:?} do not match a 1-{}-2 model",
                network.dims(),
                config.hidden_units
            )));
        }
        Ok(AnnModel {
            config,
            network,
            state: TrainerState::default(),
        })
    }

    pub fn config(&self) -> &AnnConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn state(&self) -> &TrainerState {
        &self.state
    }

    fn input(&self, users: f64) -> [f64; 1] {
        [users / self.config.user_scale]
    }

    /// Predicted `(cpu, ram)`; not clamped.
    pub fn predict(&self, users: f64) -> (f64, f64) {
        let o = self.network.forward(&self.input(users));
        (o[0], o[1])
    }

    /// Error of the current prediction for a sample.
    pub fn rmse(&self, users: f64, cpu: f64, ram: f64) -> f64 {
        let (c, r) = self.predict(users);
        output_error(&[c, r], &[cpu, ram])
    }

    pub fn train(&mut self, s: &NormalizedSample, anomaly: f64) -> Result<TrainOutcome> {
        self.train_point(s.users, s.cpu_load, s.ram_load, anomaly)
    }

    /// Trains on one `(users, cpu, ram)` observation with its anomaly score.
    pub fn train_point(
        &mut self,
        users: u32,
        cpu: f64,
        ram: f64,
        anomaly: f64,
    ) -> Result<TrainOutcome> {
        if !(cpu.is_finite() && ram.is_finite() && anomaly.is_finite()) {
            return Err(Error::InvalidSample {
                vm_id: String::new(),
                reason: "non-finite training target".into(),
            });
        }
        let x = self.input(users as f64);
        let target = [cpu, ram];
        let rmse_pre = output_error(&self.network.forward(&x), &target);
        if rmse_pre < self.config.min_rmse {
            return Ok(TrainOutcome {
                filtered: true,
                rmse_pre,
                rmse_post: rmse_pre,
                lr_used: 0.0,
                momentum_used: 0.0,
                epochs_used: 0,
            });
        }

        let cfg = &self.config;
        let k = self.state.k + 1;
        let base = base_learning_rate(k, cfg.ideal_lr);
        let recent: Vec<f64> = std::iter::once(anomaly)
            .chain(self.state.anomalies.iter().rev().copied())
            .collect();
        let errors: Vec<f64> = self.state.errors.iter().copied().collect();
        let boosted = boosted_learning_rate(base, rmse_pre, &errors, &recent, cfg.history);
        let momentum = momentum_for(boosted, cfg.ideal_lr, cfg.ideal_momentum);
        let epochs = epochs_for(boosted, cfg.ideal_lr);

        // Trial update on a throwaway copy.
        let mut trial = self.network.clone();
        trial.train_step(&x, &target, boosted, momentum);
        let rmse_post = output_error(&trial.forward(&x), &target);
        let lr = if rmse_pre > rmse_post {
            boosted
        } else {
            cfg.ideal_lr
        };

        for _ in 0..epochs {
            self.network.train_step(&x, &target, lr, momentum);
        }
        if !self.network.is_finite() {
            return Err(Error::NonFiniteWeights);
        }

        let st = &mut self.state;
        st.k = k;
        push_bounded(&mut st.anomalies, anomaly, cfg.history);
        push_bounded(&mut st.errors, rmse_pre, cfg.history);
        st.min_users = Some(st.min_users.map_or(users, |m| m.min(users)));
        st.max_users = Some(st.max_users.map_or(users, |m| m.max(users)));
        push_bounded(
            &mut st.trace,
            ScheduleRecord {
                k,
                base_lr: base,
                boosted_lr: boosted,
                lr,
                momentum,
                epochs,
                rmse_pre,
                rmse_post,
            },
            cfg.trace_len,
        );
        Ok(TrainOutcome {
            filtered: false,
            rmse_pre,
            rmse_post,
            lr_used: lr,
            momentum_used: momentum,
            epochs_used: epochs,
        })
    }

    /// Writes a versioned JSON snapshot.
    pub fn write_snapshot<W: Write>(&self, w: W) -> Result<()> {
        let snap = Snapshot {
            kind: "ann".into(),
            version: SNAPSHOT_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer_pretty(w, &snap).map_err(|e| Error::json("ANN snapshot", e))
    }

    pub fn read_snapshot<R: Read>(r: R) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_reader(r).map_err(|e| Error::json("ANN snapshot", e))?;
        if v.get("kind").and_then(|k| k.as_str()) != Some("ann") {
            return Err(Error::Snapshot("not an ANN snapshot".into()));
        }
        let found = v.get("version").and_then(|x| x.as_u64()).unwrap_or(0) as u32;
        if found != SNAPSHOT_VERSION {
            return Err(Error::SnapshotVersion {
                expected: SNAPSHOT_VERSION,
                found,
            });
        }
        let snap: Snapshot =
            serde_json::from_value(v).map_err(|e| Error::json("ANN snapshot", e))?;
        let m = snap.model;
        m.config.validate()?;
        if m.network.dims() != (1, m.config.hidden_units, 2)
            || m.network.params().len() != m.network.prev_update().len()
            || m.network.params().len() != Network::param_count_for(1, m.config.hidden_units, 2)
        {
            return Err(Error::Snapshot(
                "ANN snapshot dimensions are inconsistent".into(),
            ));
        }
        if !m.network.is_finite() {
            return Err(Error::NonFiniteWeights);
        }
        Ok(m)
    }
}

fn push_bounded<T>(buf: &mut VecDeque<T>, v: T, cap: usize) {
    buf.push_back(v);
    while buf.len() > cap {
        buf.pop_front();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> AnnModel {
        AnnModel::new(AnnConfig {
            hidden_units: 20,
            ..AnnConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn well_predicted_samples_are_skipped() {
        let mut m = small();
        let (c, r) = m.predict(100.0);
        let out = m.train_point(100, c + 0.003, r + 0.004, 0.0).unwrap();
        assert!(out.filtered);
        assert_eq!(out.epochs_used, 0);
        assert_eq!(m.state().k, 0);
        assert_eq!(m.state().user_range(), None);
    }

    #[test]
    fn first_sample_uses_the_cold_start_rate() {
        let mut m = small();
        let out = m.train_point(100, 0.5, 0.5, 0.0).unwrap();
        assert!(!out.filtered);
        let t = m.state().trace[0];
        assert!((t.base_lr - logistic(-1.0)).abs() < 1e-12);
        assert_eq!(t.boosted_lr, t.base_lr);
        assert!(out.epochs_used >= 1);
        assert_eq!(m.state().user_range(), Some((100, 100)));
    }

    #[test]
    fn trial_leaves_weights_alone_when_rejected() {
        // A huge anomaly burst makes the trial overshoot; the committed
        // update must then use the ideal rate.
        let mut m = small();
        for i in 0..30 {
            m.train_point(50 + i, 0.2, 0.1, 0.0).unwrap();
        }
        let out = m.train_point(60, 5.0, -3.0, 50.0).unwrap();
        assert!(out.lr_used == m.config().ideal_lr || out.rmse_post < out.rmse_pre);
    }

    #[test]
    fn learns_a_linear_relation() {
        let mut m = AnnModel::new(AnnConfig::default()).unwrap();
        for i in 0..6000u32 {
            let u = 30 + (i * 37) % 371;
            m.train_point(u, 0.001 * u as f64, 0.1 + 0.0005 * u as f64, 0.0)
                .unwrap();
        }
        for u in [40u32, 150, 300, 390] {
            let (c, _) = m.predict(u as f64);
            assert!((c - 0.001 * u as f64).abs() < 0.02, "u={u} cpu={c}");
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let mut m = small();
        m.train_point(80, 0.3, 0.2, 0.1).unwrap();
        let mut buf = Vec::new();
        m.write_snapshot(&mut buf).unwrap();
        let back = AnnModel::read_snapshot(&buf[..]).unwrap();
        assert_eq!(back, m);
        let text = String::from_utf8(buf)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            AnnModel::read_snapshot(text.as_bytes()),
            Err(Error::SnapshotVersion { found: 9, .. })
        ));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut m = small();
        assert!(m.train_point(10, f64::NAN, 0.0, 0.0).is_err());
    }
}
