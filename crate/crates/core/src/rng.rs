//! SplitMix64: a counter-based generator with fixed, published constants.
//!
//! State advances by the golden-ratio increment `0x9E3779B97F4A7C15` and each
//! output is passed through the Stafford "mix13" finalizer
//! (`0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`, shifts 30/27/31). Because the
//! stream is a pure function of the counter, sub-streams can be derived by
//! hashing `(seed, tag...)` without any shared state, which keeps parallel
//! work reproducible regardless of scheduling.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fixed per-purpose constants XORed into the run seed to derive sub-seeds.
pub mod purpose {
    pub const VICTIM: u64 = 0x5649_4354_494D_0001;
    pub const INPUT: u64 = 0x494E_5055_5400_0002;
    pub const SYNTH: u64 = 0x5359_4E54_4800_0003;
    pub const SUBSTITUTE: u64 = 0x5355_4253_5400_0004;
    pub const PROBE: u64 = 0x5052_4F42_4500_0005;
    pub const RANDOM_ARM: u64 = 0x5241_4E44_4F4D_0006;
    pub const TRAIN: u64 = 0x5452_4149_4E00_0007;
}

/// Sub-seed derivation rule: `seed XOR purpose`.
pub fn sub_seed(seed: u64, purpose: u64) -> u64 {
    seed ^ purpose
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
    seed: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed, seed }
    }

    /// Independent stream keyed by `seed` and a path of indices, e.g.
    /// `(step, candidate)`. Same inputs give the same stream on every platform.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut h = mix64(seed ^ GOLDEN_GAMMA);
        for &p in path {
            h = mix64(h ^ mix64(p.wrapping_add(GOLDEN_GAMMA)));
        }
        Self::new(h)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`; `n` must be positive. Uses rejection
    /// sampling so the result is unbiased.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let r = self.next_u64();
            if r < zone {
                return r % n;
            }
        }
    }

    /// Standard normal via Box-Muller (one of the pair is discarded).
    pub fn normal(&mut self) -> f64 {
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
