use serde::{Deserialize, Serialize};

/// Fixed-width bit vector backed by 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, on: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if on {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of positions set in both vectors.
    pub fn overlap(&self, other: &BitVector) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    /// Copies `other` into this vector starting at bit `offset`.
    pub fn splice(&mut self, offset: usize, other: &BitVector) {
        for i in other.iter_ones() {
            self.set(offset + i, true);
        }
    }

    /// Positions at which the two vectors differ.
    pub fn diff_positions(&self, other: &BitVector) -> Vec<usize> {
        (0..self.len.min(other.len))
            .filter(|&i| self.get(i) != other.get(i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_and_iterate() {
        let mut v = BitVector::zeros(130);
        for i in [0, 63, 64, 129] {
            v.set(i, true);
        }
        assert_eq!(v.count_ones(), 4);
        assert_eq!(v.iter_ones().collect::<Vec<_>>(), vec![0, 63, 64, 129]);
        v.set(63, false);
        assert!(!v.get(63));
        let mut w = BitVector::zeros(130);
        w.set(129, true);
        w.set(1, true);
        assert_eq!(v.overlap(&w), 1);
        assert_eq!(v.diff_positions(&w), vec![0, 1, 64]);
    }
}
