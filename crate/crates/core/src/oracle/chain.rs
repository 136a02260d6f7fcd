use serde::{Deserialize, Serialize};

use crate::seed::splitmix64;

/// Lazily evaluated chain `A = A_0 ⊇ A_1 ⊇ … ⊇ A_L` where each level keeps
/// every row of the previous one independently with probability 1/2.
///
/// Membership of row `i` at level `ℓ` is a keyed hash of `(seed, i, ℓ)`, so
/// nothing of size `n·L` is ever stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalvingChain {
    pub seed: u64,
    pub depth: usize,
}

impl HalvingChain {
    /// Chain of depth `⌈log2(n/d)⌉` (zero when `n ≤ d`).
    pub fn new(seed: u64, n: usize, d: usize) -> Self {
        let depth = if n > d && d > 0 {
            (n as f64 / d as f64).log2().ceil() as usize
        } else {
            0
        };
        HalvingChain { seed, depth }
    }

    #[inline]
    fn coin(&self, i: usize, level: usize) -> bool {
        let key = splitmix64(self.seed ^ splitmix64((i as u64) ^ ((level as u64) << 48)));
        key >> 63 == 1
    }

    /// Whether row `i` survives levels `1..=level`. Level 0 holds every row.
    pub fn member(&self, i: usize, level: usize) -> bool {
        (1..=level).all(|l| self.coin(i, l))
    }

    /// Row indices of every level, `levels[ℓ]` for `ℓ = 0..=depth`.
    pub fn levels(&self, n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.depth + 1);
        out.push((0..n).collect::<Vec<_>>());
        for l in 1..=self.depth {
            let next: Vec<usize> = out[l - 1].iter().copied().filter(|&i| self.coin(i, l)).collect();
            out.push(next);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_zero_is_everything() {
        let c = HalvingChain::new(9, 100, 3);
        assert!((0..100).all(|i| c.member(i, 0)));
        assert_eq!(c.depth, 6);
    }

    #[test]
    fn levels_agree_with_member() {
        let c = HalvingChain::new(4, 500, 2);
        let lv = c.levels(500);
        for (l, rows) in lv.iter().enumerate() {
            let direct: Vec<usize> = (0..500).filter(|&i| c.member(i, l)).collect();
            assert_eq!(rows, &direct);
        }
    }
}
