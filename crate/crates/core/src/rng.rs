//! Deterministic seed handling. A master seed is split into per-task
//! sub-seeds with a counter so that concurrent tasks draw from independent
//! streams and runs are reproducible across platforms.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Counter-based seed splitter. Each call yields a new sub-seed derived
/// from the master seed; the sequence of (label, seed) pairs is recorded so
/// reports can echo the exact assignment.
#[derive(Debug, Clone)]
pub struct SeedSequence {
    master: u64,
    counter: u64,
    log: Vec<(String, u64)>,
}

impl SeedSequence {
    pub fn new(master: u64) -> Self {
        SeedSequence {
            master,
            counter: 0,
            log: Vec::new(),
        }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Derives the next sub-seed via SplitMix64 over (master, counter).
    pub fn next_seed(&mut self, label: &str) -> u64 {
        let seed = split_mix(self.master, self.counter);
        self.log.push((label.to_string(), seed));
        self.counter += 1;
        seed
    }

    pub fn next_rng(&mut self, label: &str) -> Rng {
        rng_from_seed(self.next_seed(label))
    }

    pub fn log(&self) -> &[(String, u64)] {
        &self.log
    }
}

/// Stateless sub-seed derivation, for parallel loops indexed by a counter.
pub fn split_mix(master: u64, counter: u64) -> u64 {
    let mut z = master ^ counter.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn deterministic_streams() {
        let mut a = rng_from_seed(42);
        let mut b = rng_from_seed(42);
        for _ in 0..16 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn subseeds_differ_and_reproduce() {
        let mut s1 = SeedSequence::new(7);
        let mut s2 = SeedSequence::new(7);
        let a = s1.next_seed("task-a");
        let b = s1.next_seed("task-b");
        assert_ne!(a, b);
        assert_eq!(a, s2.next_seed("task-a"));
        assert_eq!(b, s2.next_seed("task-b"));
    }
}
