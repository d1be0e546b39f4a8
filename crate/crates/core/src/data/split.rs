use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn round_half_even(v: f64) -> usize {
    let floor = libm::floor(v);
    let frac = v - floor;
    let f = floor as usize;
    if frac > 0.5 || (frac == 0.5 && f % 2 == 1) {
        f + 1
    } else {
        f
    }
}

/// Partitions `0..n` after a seeded shuffle. The train/val and val/test
/// boundaries are `n·train` and `n·(train + val)` rounded half-to-even, so
/// 100 items give 70/15/15 and 10 give 7/1/2. With `n ≥ 3`, every part with
/// a positive fraction gets at least one item, taken from train.
pub fn split_dataset(n: usize, spec: &SplitSpec) -> Result<Split> {
    let fractions = [spec.train, spec.val, spec.test];
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        bail!(InvalidArgument, "split fractions must lie in [0, 1]: {:?}", fractions);
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        bail!(InvalidArgument, "split fractions must sum to 1: {:?}", fractions);
    }
    if n == 0 {
        bail!(Data, "cannot split an empty dataset");
    }
    let cut_a = round_half_even(n as f64 * spec.train).min(n);
    let cut_b = round_half_even(n as f64 * (spec.train + spec.val)).clamp(cut_a, n);
    let mut sizes = [cut_a, cut_b - cut_a, n - cut_b];
    if n >= 3 {
        for part in [1, 2] {
            if sizes[part] == 0 && fractions[part] > 0.0 && sizes[0] > 1 {
                sizes[part] = 1;
                sizes[0] -= 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = order.split_off(sizes[0] + sizes[1]);
    let val = order.split_off(sizes[0]);
    Ok(Split {
        train: order,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    fn sizes(s: &Split) -> [usize; 3] {
        [s.train.len(), s.val.len(), s.test.len()]
    }

    #[test]
    fn documented_sizes() {
        let spec = SplitSpec::default();
        assert_eq!(sizes(&split_dataset(100, &spec).unwrap()), [70, 15, 15]);
        assert_eq!(sizes(&split_dataset(10, &spec).unwrap()), [7, 1, 2]);
        assert_eq!(sizes(&split_dataset(32, &spec).unwrap()), [22, 5, 5]);
        assert_eq!(sizes(&split_dataset(3, &spec).unwrap()), [1, 1, 1]);
    }

    #[test]
    fn partition_and_determinism() {
        let spec = SplitSpec {
            seed: 9,
            ..SplitSpec::default()
        };
        let a = split_dataset(57, &spec).unwrap();
        assert_eq!(a, split_dataset(57, &spec).unwrap());
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(split_dataset(0, &SplitSpec::default()).is_err());
        let bad = SplitSpec {
            train: 0.8,
            val: 0.3,
            test: 0.1,
            seed: 0,
        };
        assert!(split_dataset(10, &bad).is_err());
    }
}
