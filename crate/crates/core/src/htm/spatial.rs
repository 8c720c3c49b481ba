//! Spatial pooling: maps an encoded input onto a sparse set of columns.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sdr::BitVector;
use super::HtmConfig;
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Column connections to the input space.
///
/// Each column owns a fixed potential pool of input positions with one
/// permanence per position. `connected` caches, per column, which input
/// positions currently have a permanence above the threshold, so overlap
/// scores reduce to AND + popcount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialPooler {
    input_width: usize,
    column_count: usize,
    pool_size: usize,
    words_per_column: usize,
    pools: Vec<u16>,
    permanences: Vec<f32>,
    connected: Vec<u64>,
}

impl SpatialPooler {
    pub fn new(cfg: &HtmConfig, input_width: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if input_width == 0 || input_width > u16::MAX as usize + 1 {
            return Err(Error::InvalidConfig(format!(
                "spatial pooler input width {input_width} unsupported"
            )));
        }
        let pool_size = ((cfg.potential_pool_fraction * input_width as f64).round() as usize)
            .clamp(1, input_width);
        let words = input_width.div_ceil(64);
        let mut sp = SpatialPooler {
            input_width,
            column_count: cfg.column_count,
            pool_size,
            words_per_column: words,
            pools: Vec::with_capacity(cfg.column_count * pool_size),
            permanences: Vec::with_capacity(cfg.column_count * pool_size),
            connected: vec![0; cfg.column_count * words],
        };
        let thr = cfg.permanence_threshold as f32;
        for col in 0..cfg.column_count {
            let mut pool: Vec<usize> = sample(rng, input_width, pool_size).into_vec();
            pool.sort_unstable();
            for input in pool {
                // Roughly half of the pool starts connected.
                let p = (thr + rng.gen_range(-0.1f32..0.1)).clamp(0.0, 1.0);
                sp.pools.push(input as u16);
                sp.permanences.push(p);
                if p > thr {
                    sp.connected[col * words + input / 64] |= 1 << (input % 64);
                }
            }
        }
        Ok(sp)
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn column_count(&self) -> usize {
        self.column_count
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn permanences(&self, column: usize) -> &[f32] {
        &self.permanences[column * self.pool_size..(column + 1) * self.pool_size]
    }

    pub fn pool(&self, column: usize) -> &[u16] {
        &self.pools[column * self.pool_size..(column + 1) * self.pool_size]
    }

    /// Number of set input bits reached through connected synapses, per column.
    pub fn overlaps(&self, input: &BitVector, exec: Execution) -> Result<Vec<u32>> {
        if input.len() != self.input_width {
            return Err(Error::WidthMismatch {
                expected: self.input_width,
                got: input.len(),
            });
        }
        let words = input.words();
        let mut out = vec![0u32; self.column_count];
        par::fill_indexed(exec, &mut out, 256, |col| {
            let conn = &self.connected[col * self.words_per_column..][..self.words_per_column];
            conn.iter()
                .zip(words)
                .map(|(a, b)| (a & b).count_ones())
                .sum()
        });
        Ok(out)
    }

    /// Selects the winning columns, optionally adapting their permanences.
    pub fn compute(
        &mut self,
        cfg: &HtmConfig,
        input: &BitVector,
        learn: bool,
        exec: Execution,
    ) -> Result<Vec<usize>> {
        let overlaps = self.overlaps(input, exec)?;
        let active = select_columns(&overlaps, cfg.active_column_count(), cfg.inhibition_radius);
        if learn {
            let (inc, dec, thr) = (
                cfg.permanence_increment as f32,
                cfg.permanence_decrement as f32,
                cfg.permanence_threshold as f32,
            );
            for &col in &active {
                let base = col * self.pool_size;
                let conn =
                    &mut self.connected[col * self.words_per_column..][..self.words_per_column];
                for k in 0..self.pool_size {
                    let idx = self.pools[base + k] as usize;
                    let p = &mut self.permanences[base + k];
                    *p = if input.get(idx) { *p + inc } else { *p - dec }.clamp(0.0, 1.0);
                    let bit = 1u64 << (idx % 64);
                    if *p > thr {
                        conn[idx / 64] |= bit;
                    } else {
                        conn[idx / 64] &= !bit;
                    }
                }
            }
        }
        Ok(active)
    }
}

/// Picks up to `k` columns by descending overlap (ties: lower index first),
/// skipping any column within `radius` of one already chosen.
pub fn select_columns(overlaps: &[u32], k: usize, radius: usize) -> Vec<usize> {
    let rank = |&a: &usize, &b: &usize| overlaps[b].cmp(&overlaps[a]).then(a.cmp(&b));
    let mut order: Vec<usize> = (0..overlaps.len()).collect();
    if radius == 0 {
        // Global inhibition only needs the top k.
        if k < order.len() {
            order.select_nth_unstable_by(k, rank);
            order.truncate(k);
        }
        order.sort_unstable();
        return order;
    }
    order.sort_by(rank);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for col in order {
        if chosen.len() == k {
            break;
        }
        if radius > 0 && chosen.iter().any(|&c| c.abs_diff(col) <= radius) {
            continue;
        }
        chosen.push(col);
    }
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn small_cfg() -> HtmConfig {
        HtmConfig {
            column_count: 400,
            ..HtmConfig::default()
        }
    }

    fn random_input(rng: &mut ChaCha8Rng, width: usize, ones: usize) -> BitVector {
        let mut v = BitVector::zeros(width);
        for i in sample(rng, width, ones) {
            v.set(i, true);
        }
        v
    }

    #[test]
    fn sparsity_matches_configuration() {
        let cfg = HtmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sp = SpatialPooler::new(&cfg, 600, &mut rng).unwrap();
        assert_eq!(sp.pool_size(), 300);
        let input = random_input(&mut rng, 600, 60);
        let active = sp
            .compute(&cfg, &input, true, Execution::Sequential)
            .unwrap();
        assert_eq!(active.len(), (0.02f64 * 2048.0).round() as usize);
    }

    #[test]
    fn zero_input_picks_lowest_indices() {
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut sp = SpatialPooler::new(&cfg, 300, &mut rng).unwrap();
        let overlaps = sp
            .overlaps(&BitVector::zeros(300), Execution::Sequential)
            .unwrap();
        assert!(overlaps.iter().all(|&o| o == 0));
        let active = sp
            .compute(&cfg, &BitVector::zeros(300), false, Execution::Sequential)
            .unwrap();
        assert_eq!(active, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sp = SpatialPooler::new(&cfg, 300, &mut rng).unwrap();
        let r = sp.compute(&cfg, &BitVector::zeros(299), true, Execution::Sequential);
        assert!(matches!(
            r,
            Err(Error::WidthMismatch {
                expected: 300,
                got: 299
            })
        ));
    }

    #[test]
    fn inhibition_radius_spreads_winners() {
        let overlaps = vec![9, 8, 7, 6, 5, 4, 3, 2, 1, 0];
        assert_eq!(select_columns(&overlaps, 3, 0), vec![0, 1, 2]);
        assert_eq!(select_columns(&overlaps, 3, 2), vec![0, 3, 6]);
    }

    #[test]
    fn repeated_input_reinforces_winning_columns() {
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sp = SpatialPooler::new(&cfg, 300, &mut rng).unwrap();
        let input = random_input(&mut rng, 300, 30);
        let mut prev: Option<(Vec<usize>, f64)> = None;
        for _ in 0..50 {
            let active = sp
                .compute(&cfg, &input, true, Execution::Sequential)
                .unwrap();
            let mean_on_set = {
                let mut sum = 0.0;
                let mut n = 0;
                for &c in &active {
                    for (k, &idx) in sp.pool(c).iter().enumerate() {
                        if input.get(idx as usize) {
                            sum += sp.permanences(c)[k] as f64;
                            n += 1;
                        }
                    }
                }
                sum / n as f64
            };
            if let Some((prev_active, prev_mean)) = &prev {
                if *prev_active == active {
                    assert!(mean_on_set >= *prev_mean);
                }
            }
            prev = Some((active, mean_on_set));
        }
        // The winner set stabilises under a constant input.
        let a = sp
            .compute(&cfg, &input, true, Execution::Sequential)
            .unwrap();
        assert_eq!(a, prev.unwrap().0);
    }

    #[test]
    fn parallel_and_sequential_overlaps_agree() {
        let cfg = HtmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sp = SpatialPooler::new(&cfg, 1000, &mut rng).unwrap();
        let input = random_input(&mut rng, 1000, 80);
        assert_eq!(
            sp.overlaps(&input, Execution::Sequential).unwrap(),
            sp.overlaps(&input, Execution::Parallel).unwrap()
        );
    }
}
