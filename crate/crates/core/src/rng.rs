//! Seedable random streams.
//!
//! Every consumer of randomness takes an [`RngStream`] identified by a
//! `(seed, stream_id)` pair. The generator is xoshiro256++ whose state is
//! filled by splitmix64 from a key mixing both halves of the pair, so two
//! components handed different stream ids never share a sequence. All
//! conversions to floats and bounded integers are defined here and do not
//! depend on `rand` distribution code, which keeps the streams identical on
//! every platform and across dependency upgrades.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Fixed stream ids for pipeline stages.
pub mod streams {
    pub const SIM_INPUTS: u64 = 0x10;
    pub const SIM_BETA: u64 = 0x11;
    pub const SIM_LABELS: u64 = 0x12;
    pub const SPLIT: u64 = 0x20;
    pub const CV_SHAP: u64 = 0x30;
    pub const EMBED_RAW: u64 = 0x40;
    pub const EMBED_SHAP: u64 = 0x41;
    pub const CLUSTER_EMBED: u64 = 0x50;
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One step of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let key = splitmix64(seed) ^ splitmix64(stream_id ^ 0xD1B5_4A32_D192_ED03).rotate_left(17);
        Self {
            seed,
            stream_id,
            inner: Xoshiro256PlusPlus::seed_from_u64(key),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream for sub-task `index` (a fold, a repeat, a row block).
    /// Depends only on this stream's identity, not on how much of it was consumed.
    pub fn derive(&self, index: u64) -> RngStream {
        RngStream::new(self.seed, splitmix64(self.stream_id.wrapping_mul(GOLDEN_GAMMA) ^ index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal draw via the Box–Muller transform; the second variate
    /// of each pair is cached for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Uniform integer in `0..n` by rejection (no modulo bias). `n` must be > 0.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `m` distinct indices from `0..n`, returned in ascending order.
    pub fn sample_indices(&mut self, n: usize, m: usize) -> Vec<usize> {
        let m = m.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(m);
        pool.sort_unstable();
        pool
    }
}
