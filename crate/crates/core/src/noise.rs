//! The driving noise: i.i.d. pairs (U_n, V_n) of uniforms on (0, 1].

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

/// Seeded stream of uniform pairs.
///
/// Each pair takes two 64-bit words from a ChaCha8 keystream. Path `i` of a
/// batch uses stream id `i` under the master-seed key, so distinct paths
/// never share keystream blocks and any path can be regenerated on its own.
#[derive(Debug, Clone)]
pub struct DriverNoise {
    rng: ChaCha8Rng,
}

impl DriverNoise {
    /// Stream 0 for `seed`.
    pub fn new(seed: u64) -> Self {
        Self::for_path(seed, 0)
    }

    /// Stream for path `index` of a batch keyed by `master_seed`.
    pub fn for_path(master_seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        Self { rng }
    }

    /// A uniform on the grid {k 2^-53 : k = 1..2^53}, so never 0 and
    /// possibly exactly 1.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * UNIT
    }

    #[inline]
    pub fn pair(&mut self) -> (f64, f64) {
        let u = self.uniform();
        let v = self.uniform();
        (u, v)
    }
}

impl Iterator for DriverNoise {
    type Item = (f64, f64);

    #[inline]
    fn next(&mut self) -> Option<(f64, f64)> {
        Some(self.pair())
    }
}
