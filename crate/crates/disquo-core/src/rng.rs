//! Counter-based deterministic randomness.
//!
//! Every random quantity in a run is a pure function of the run seed plus a
//! handful of integer coordinates (slot, port indices, a stream tag). Ports
//! can therefore derive the shared permutation H(n) for any slot — including
//! the next one — without shared mutable RNG state, and any run replays
//! bit-identically from its seed.

/// Stream tags keep unrelated draws statistically independent.
pub const TAG_PERM: u64 = 0x01;
pub const TAG_COIN: u64 = 0x02;
pub const TAG_ARRIVAL: u64 = 0x03;
pub const TAG_BURST: u64 = 0x04;
pub const TAG_MUGD: u64 = 0x05;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a full-avalanche bijection on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash an ordered word sequence into one key.
#[inline]
pub fn hash_words(words: &[u64]) -> u64 {
    let mut acc = 0x243F_6A88_85A3_08D3; // pi fraction; arbitrary nonzero start
    for &w in words {
        acc = mix64(acc ^ w);
    }
    acc
}

/// A keyed counter stream: draw k yields `mix64(key + k*GOLDEN)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    ctr: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key, ctr: 0 }
    }

    pub fn from_words(words: &[u64]) -> Self {
        CounterRng::new(hash_words(words))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = mix64(self.key.wrapping_add(self.ctr.wrapping_mul(GOLDEN)));
        self.ctr += 1;
        out
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, n) without modulo bias (rejection sampling).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // 2^64 mod n; draws below this would fold unevenly.
        let cutoff = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= cutoff {
                return x % n;
            }
        }
    }
}

/// The per-cell scheduling coin for slot `slot`: uniform in [0, 1), a pure
/// function of its arguments.
#[inline]
pub fn coin(seed: u64, slot: u64, input: usize, output: usize) -> f64 {
    let h = hash_words(&[seed, TAG_COIN, slot, input as u64, output as u64]);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform random permutation of 0..n via Fisher-Yates on a counter stream.
pub fn random_permutation(rng: &mut CounterRng, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    perm
}
