//! Deterministic pseudo-random number generation.
//!
//! Everything stochastic in this crate (synthetic data, shuffles, stochastic
//! solvers) draws from [`SplitMix64`], a fixed published algorithm, rather
//! than a platform or library default generator. Given the same seed the
//! byte stream is identical on every platform, which is what makes seeded
//! pipelines reproduce bit for bit.
//!
//! Normal deviates come from the Box-Muller transform ([`NormalSource`]) in a
//! fixed draw order, so Gaussian streams are reproducible as well.

/// SplitMix64 generator (Steele, Lea, Flood; public domain reference
/// constants). State advances by the golden-gamma increment and the output
/// is a bijective scramble of the state.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Finalizer used both as the output scramble and for seed mixing.
fn scramble(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        scramble(self.state)
    }

    /// Uniform double in `[0, 1)` built from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Unbiased integer in `[0, bound)` by rejection sampling, so the result
    /// depends only on the stream, never on platform arithmetic quirks.
    pub fn bounded(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bounded() needs a positive bound");
        let zone = bound * (u64::MAX / bound);
        loop {
            let r = self.next_u64();
            if r < zone {
                return r % bound;
            }
        }
    }

    /// In-place Fisher-Yates shuffle driven by [`Self::bounded`].
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        let n = slice.len();
        for i in (1..n).rev() {
            let j = self.bounded(i as u64 + 1) as usize;
            slice.swap(i, j);
        }
    }
}

/// Standard normal deviates via Box-Muller over SplitMix64 uniforms.
///
/// Each transform consumes exactly two uniforms (`u1` first, then `u2`) and
/// yields the cosine branch immediately; the sine branch is cached and
/// returned on the next call. The draw order is part of the reproducibility
/// contract.
#[derive(Clone, Debug)]
pub struct NormalSource {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl NormalSource {
    pub fn new(seed: u64) -> Self {
        NormalSource {
            rng: SplitMix64::new(seed),
            spare: None,
        }
    }

    pub fn from_rng(rng: SplitMix64) -> Self {
        NormalSource { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u keeps the argument of ln strictly positive.
        let u1 = 1.0 - self.rng.next_f64();
        let u2 = self.rng.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Derives an independent stream seed from a base seed and an index.
///
/// Both arguments pass through the SplitMix64 finalizer so that nearby
/// indices (0, 1, 2, ...) give uncorrelated streams; `mix_seed(s, 0)` is not
/// `s` itself, which keeps a run's substreams disjoint from the parent.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    scramble(seed ^ scramble(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1)))
}
