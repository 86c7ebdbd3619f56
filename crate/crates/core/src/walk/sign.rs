//! Counter-based sign generation.
//!
//! Every sign is a pure function of `(seed, path_id, step)`: the seed and path id
//! are mixed into a per-path key, and the step counter is pushed through the
//! SplitMix64 output permutation from that key. There is no sequential state, so
//! paths can be generated in any order or in parallel with identical results.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const PATH_GAMMA: u64 = 0xD1B5_4A32_D192_ED03;

/// 64-bit avalanche bijection (SplitMix64 finalizer).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The sign stream `eps(path_id, step)` of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStream {
    key: u64,
}

impl PathStream {
    pub fn new(seed: u64, path_id: u64) -> Self {
        let key = mix64(mix64(seed ^ GOLDEN_GAMMA) ^ path_id.wrapping_add(1).wrapping_mul(PATH_GAMMA));
        Self { key }
    }

    #[inline]
    fn word(&self, step: u64) -> u64 {
        mix64(self.key.wrapping_add(step.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    /// `+1` or `-1`, from the top bit of the mixed counter.
    #[inline]
    pub fn sign(&self, step: u64) -> i8 {
        if self.word(step) >> 63 == 1 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn sign_f64(&self, step: u64) -> f64 {
        f64::from(self.sign(step))
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&self, step: u64) -> f64 {
        (self.word(step) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Deterministic family of sign streams indexed by path id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignStream {
    seed: u64,
}

impl SignStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self, path_id: u64) -> PathStream {
        PathStream::new(self.seed, path_id)
    }

    pub fn sign(&self, path_id: u64, step: u64) -> i8 {
        self.path(path_id).sign(step)
    }
}

pub fn sample_sign(seed: u64, path_id: u64, step: u64) -> i8 {
    PathStream::new(seed, path_id).sign(step)
}
