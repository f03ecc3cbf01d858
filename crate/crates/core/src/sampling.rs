//! Seeded quasi-random sampling and deterministic parallel reduction
//! helpers. Results are reproducible bit-for-bit for a fixed seed
//! independently of the worker count: work is split into fixed-size chunks
//! keyed by index, and chunk results are merged in index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 2D low-discrepancy sequence (additive recurrence on the plastic constant)
/// with a seeded Cranley-Patterson rotation.
#[derive(Debug, Clone)]
pub struct R2Seq {
    idx: u64,
    off: (f64, f64),
}

const R2_A1: f64 = 0.754_877_666_246_693;
const R2_A2: f64 = 0.569_840_290_998_053_2;

impl R2Seq {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        R2Seq {
            idx: 0,
            off: (rng.gen::<f64>(), rng.gen::<f64>()),
        }
    }

    /// Start at an arbitrary index (used to key chunks off one seed).
    pub fn with_start(seed: u64, start: u64) -> Self {
        let mut s = Self::new(seed);
        s.idx = start;
        s
    }

    pub fn next_pair(&mut self) -> (f64, f64) {
        self.idx += 1;
        let i = self.idx as f64;
        (
            (self.off.0 + i * R2_A1).fract(),
            (self.off.1 + i * R2_A2).fract(),
        )
    }
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Run `f` inside a rayon pool of the given size (0 = the current pool).
pub fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

/// Split `total` items into fixed chunks, map each chunk in parallel and fold
/// the chunk results in index order. `chunk_seed` keys a chunk's RNG stream.
pub fn chunked_map_fold<T: Send, A>(
    total: usize,
    chunk_size: usize,
    workers: usize,
    map: impl Fn(usize, usize, u64) -> T + Sync,
    init: A,
    fold: impl Fn(A, T) -> A,
    seed: u64,
) -> A {
    use rayon::prelude::*;
    let chunks: Vec<(usize, usize)> = (0..total)
        .step_by(chunk_size.max(1))
        .map(|start| (start, chunk_size.min(total - start)))
        .collect();
    let results: Vec<T> = with_pool(workers, || {
        chunks
            .par_iter()
            .enumerate()
            .map(|(i, &(start, len))| {
                let chunk_seed = seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                map(start, len, chunk_seed)
            })
            .collect()
    });
    results.into_iter().fold(init, fold)
}

/// Track a minimum together with its witness; merged deterministically.
#[derive(Debug, Clone, Copy)]
pub struct MinWitness<W: Copy> {
    pub value: f64,
    pub witness: Option<W>,
}

impl<W: Copy> MinWitness<W> {
    pub fn empty() -> Self {
        MinWitness {
            value: f64::INFINITY,
            witness: None,
        }
    }

    pub fn observe(&mut self, value: f64, witness: W) {
        if value < self.value {
            self.value = value;
            self.witness = Some(witness);
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        // strictly-less keeps the earliest chunk's witness on ties
        if other.value < self.value {
            self = other;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r2_is_deterministic_and_in_unit_square() {
        let mut a = R2Seq::new(7);
        let mut b = R2Seq::new(7);
        for _ in 0..100 {
            let (x, y) = a.next_pair();
            assert_eq!((x, y), b.next_pair());
            assert!((0.0..1.0).contains(&x) && (0.0..1.0).contains(&y));
        }
        let mut c = R2Seq::new(8);
        assert_ne!(a.next_pair(), c.next_pair());
    }

    #[test]
    fn wilson_basic_properties() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
        let (lo2, hi2) = wilson_interval(5000, 10000);
        assert!(hi2 - lo2 < hi - lo, "interval shrinks with n");
        let (lo3, _) = wilson_interval(0, 100);
        assert!(lo3 < 1e-12);
    }

    #[test]
    fn chunked_fold_is_worker_count_invariant() {
        let run = |workers| {
            chunked_map_fold(
                10_000,
                256,
                workers,
                |start, len, seed| {
                    let mut acc = 0u64;
                    let mut s = seed;
                    for i in start..start + len {
                        s = s.wrapping_mul(6364136223846793005).wrapping_add(i as u64);
                        acc = acc.wrapping_add(s >> 32);
                    }
                    acc
                },
                0u64,
                |a, b| a.wrapping_add(b),
                42,
            )
        };
        assert_eq!(run(1), run(2));
        assert_eq!(run(1), run(0));
    }
}
