//! Temporal pooling: cell activation, bursting and lateral prediction.
//!
//! Each cell owns one lateral segment: a list of weighted connections from
//! presynaptic cells. A cell is predicted for the next step when at least
//! `segment_activation_threshold` of its connections are connected
//! (weight >= `permanence_threshold`) and come from currently active cells.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HtmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Synapse {
    pub presynaptic: u32,
    pub weight: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalMemory {
    column_count: usize,
    cells_per_column: usize,
    /// Incoming connections per postsynaptic cell.
    incoming: Vec<Vec<Synapse>>,
    /// Postsynaptic cells reached from each presynaptic cell.
    outgoing: Vec<Vec<u32>>,
    active: Vec<u32>,
    winners: Vec<u32>,
    predicted: Vec<u32>,
    /// Per cell, how many connections (of any weight) the current active
    /// cells reach; used to pick learning cells in bursting columns.
    matching: Vec<u16>,
    /// Same, restricted to connected synapses.
    connected: Vec<u16>,
    matching_touched: Vec<u32>,
    /// Scratch bitset of active cells; all zero between steps.
    active_bits: Vec<u64>,
}

/// Outcome of one temporal step.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalOutput {
    pub active_cells: Vec<u32>,
    pub predicted_cells: Vec<u32>,
    pub bursting_columns: usize,
}

impl TemporalMemory {
    pub fn new(cfg: &HtmConfig) -> Self {
        let cells = cfg.column_count * cfg.cells_per_column;
        TemporalMemory {
            column_count: cfg.column_count,
            cells_per_column: cfg.cells_per_column,
            incoming: vec![Vec::new(); cells],
            outgoing: vec![Vec::new(); cells],
            active: Vec::new(),
            winners: Vec::new(),
            predicted: Vec::new(),
            matching: vec![0; cells],
            connected: vec![0; cells],
            matching_touched: Vec::new(),
            active_bits: vec![0; cells.div_ceil(64)],
        }
    }

    pub fn cell_count(&self) -> usize {
        self.column_count * self.cells_per_column
    }

    pub fn column_of(&self, cell: u32) -> usize {
        cell as usize / self.cells_per_column
    }

    pub fn active_cells(&self) -> &[u32] {
        &self.active
    }

    /// Cells predicted for the next input, sorted.
    pub fn predicted_cells(&self) -> &[u32] {
        &self.predicted
    }

    /// Columns holding at least one predicted cell, sorted and deduplicated.
    pub fn predicted_columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self.predicted.iter().map(|&c| self.column_of(c)).collect();
        cols.dedup();
        cols
    }

    pub fn synapses(&self, cell: u32) -> &[Synapse] {
        &self.incoming[cell as usize]
    }

    pub fn synapse_count(&self) -> usize {
        self.incoming.iter().map(Vec::len).sum()
    }

    /// Iterates every connection weight.
    pub fn weights(&self) -> impl Iterator<Item = f32> + '_ {
        self.incoming.iter().flatten().map(|s| s.weight)
    }

    /// Activates cells in `active_columns` (sorted), learns lateral
    /// connections when `learn`, and computes predictions for the next step.
    pub fn step(
        &mut self,
        cfg: &HtmConfig,
        active_columns: &[usize],
        learn: bool,
        rng: &mut ChaCha8Rng,
    ) -> TemporalOutput {
        let cpc = self.cells_per_column;
        let prev_active = std::mem::take(&mut self.active);
        let prev_winners = std::mem::take(&mut self.winners);
        let prev_predicted = std::mem::take(&mut self.predicted);

        let mut active = Vec::new();
        let mut winners = Vec::new();
        let mut bursting = 0;
        let mut p = 0;
        for &col in active_columns {
            let lo = (col * cpc) as u32;
            let hi = lo + cpc as u32;
            while p < prev_predicted.len() && prev_predicted[p] < lo {
                p += 1;
            }
            let start = p;
            while p < prev_predicted.len() && prev_predicted[p] < hi {
                p += 1;
            }
            if p > start {
                active.extend_from_slice(&prev_predicted[start..p]);
                winners.extend_from_slice(&prev_predicted[start..p]);
            } else {
                bursting += 1;
                active.extend(lo..hi);
                winners.push(self.learning_cell(cfg, lo, hi, rng));
            }
        }

        if learn {
            let mut prev_sorted = prev_active;
            prev_sorted.sort_unstable();
            for &cell in &winners {
                self.adapt(cfg, cell, &prev_sorted, &prev_winners, rng);
            }
        }

        // Predictions from the new activity: gather every cell reached from
        // an active cell, then count its active presynaptic partners.
        for &c in &self.matching_touched {
            self.matching[c as usize] = 0;
            self.connected[c as usize] = 0;
        }
        self.matching_touched.clear();
        if self.active_bits.len() != self.cell_count().div_ceil(64) {
            self.active_bits = vec![0; self.cell_count().div_ceil(64)];
        }
        for &c in &active {
            self.active_bits[c as usize / 64] |= 1 << (c % 64);
        }
        for &pre in &active {
            for &post in &self.outgoing[pre as usize] {
                if self.matching[post as usize] == 0 {
                    self.matching[post as usize] = 1;
                    self.matching_touched.push(post);
                }
            }
        }
        let thr = cfg.permanence_threshold as f32;
        for &post in &self.matching_touched {
            let (mut m, mut conn) = (0u16, 0u16);
            for s in &self.incoming[post as usize] {
                let p = s.presynaptic as usize;
                if self.active_bits[p / 64] >> (p % 64) & 1 == 1 {
                    m += 1;
                    if s.weight >= thr {
                        conn += 1;
                    }
                }
            }
            self.matching[post as usize] = m;
            self.connected[post as usize] = conn;
        }
        for &c in &active {
            self.active_bits[c as usize / 64] = 0;
        }
        let mut predicted: Vec<u32> = self
            .matching_touched
            .iter()
            .copied()
            .filter(|&c| self.connected[c as usize] as usize >= cfg.segment_activation_threshold)
            .collect();
        predicted.sort_unstable();

        active.sort_unstable();
        winners.sort_unstable();
        self.active = active;
        self.winners = winners;
        self.predicted = predicted;
        TemporalOutput {
            active_cells: self.active.clone(),
            predicted_cells: self.predicted.clone(),
            bursting_columns: bursting,
        }
    }

    /// Best-matching cell of a bursting column, or the least used one.
    fn learning_cell(&self, cfg: &HtmConfig, lo: u32, hi: u32, rng: &mut ChaCha8Rng) -> u32 {
        let best = (lo..hi)
            .map(|c| (c, self.matching[c as usize]))
            .filter(|&(_, m)| m as usize >= cfg.segment_matching_threshold)
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((c, _)) = best {
            return c;
        }
        let fewest = (lo..hi)
            .map(|c| self.incoming[c as usize].len())
            .min()
            .unwrap_or(0);
        let candidates: Vec<u32> = (lo..hi)
            .filter(|&c| self.incoming[c as usize].len() == fewest)
            .collect();
        candidates[rng.gen_range(0..candidates.len())]
    }

    fn adapt(
        &mut self,
        cfg: &HtmConfig,
        cell: u32,
        prev_active: &[u32],
        prev_winners: &[u32],
        rng: &mut ChaCha8Rng,
    ) {
        let (inc, dec) = (
            cfg.segment_weight_increment as f32,
            cfg.segment_weight_decay as f32,
        );
        let mut removed = Vec::new();
        {
            let syns = &mut self.incoming[cell as usize];
            for s in syns.iter_mut() {
                if prev_active.binary_search(&s.presynaptic).is_ok() {
                    s.weight = (s.weight + inc).min(1.0);
                } else {
                    s.weight = (s.weight - dec).max(0.0);
                }
            }
            syns.retain(|s| {
                if s.weight <= 0.0 {
                    removed.push(s.presynaptic);
                    false
                } else {
                    true
                }
            });
        }
        for pre in removed {
            self.unlink(pre, cell);
        }

        // Grow connections to previous winners not yet connected.
        let existing = &self.incoming[cell as usize];
        let mut fresh: Vec<u32> = prev_winners
            .iter()
            .copied()
            .filter(|w| existing.iter().all(|s| s.presynaptic != *w))
            .collect();
        while fresh.len() > cfg.new_synapse_count {
            let i = rng.gen_range(0..fresh.len());
            fresh.swap_remove(i);
        }
        fresh.sort_unstable();
        for pre in fresh {
            self.incoming[cell as usize].push(Synapse {
                presynaptic: pre,
                weight: cfg.initial_segment_weight as f32,
            });
            self.outgoing[pre as usize].push(cell);
        }

        let syns = &mut self.incoming[cell as usize];
        if syns.len() > cfg.max_synapses_per_cell {
            syns.sort_by(|a, b| {
                b.weight
                    .total_cmp(&a.weight)
                    .then(a.presynaptic.cmp(&b.presynaptic))
            });
            let dropped: Vec<u32> = syns
                .drain(cfg.max_synapses_per_cell..)
                .map(|s| s.presynaptic)
                .collect();
            for pre in dropped {
                self.unlink(pre, cell);
            }
        }
    }

    fn unlink(&mut self, pre: u32, post: u32) {
        let out = &mut self.outgoing[pre as usize];
        if let Some(i) = out.iter().position(|&p| p == post) {
            out.swap_remove(i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cfg() -> HtmConfig {
        HtmConfig {
            column_count: 200,
            cells_per_column: 8,
            ..HtmConfig::default()
        }
    }

    #[test]
    fn first_step_bursts_every_column() {
        let cfg = cfg();
        let mut tm = TemporalMemory::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = tm.step(&cfg, &[3, 7, 50], true, &mut rng);
        assert_eq!(out.bursting_columns, 3);
        assert_eq!(out.active_cells.len(), 3 * 8);
    }

    #[test]
    fn learns_an_alternating_sequence() {
        let cfg = cfg();
        let mut tm = TemporalMemory::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<usize> = (0..20).collect();
        let b: Vec<usize> = (100..120).collect();
        for i in 0..200 {
            tm.step(&cfg, if i % 2 == 0 { &a } else { &b }, true, &mut rng);
        }
        // The last input was B; feed A and look at what is predicted next.
        tm.step(&cfg, &a, true, &mut rng);
        let predicted = tm.predicted_columns();
        let covered = b.iter().filter(|c| predicted.contains(c)).count();
        assert!(covered as f64 >= 0.9 * b.len() as f64, "covered {covered}");
    }

    #[test]
    fn no_learning_leaves_weights_untouched() {
        let cfg = cfg();
        let mut tm = TemporalMemory::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..30 {
            let cols: Vec<usize> = ((i % 3) * 10..(i % 3) * 10 + 10).collect();
            tm.step(&cfg, &cols, true, &mut rng);
        }
        let before = tm.incoming.clone();
        for i in 0..30 {
            let cols: Vec<usize> = ((i % 5) * 7..(i % 5) * 7 + 10).collect();
            tm.step(&cfg, &cols, false, &mut rng);
        }
        assert_eq!(before, tm.incoming);
    }
}
