//! Deterministic random streams for offspring sampling.
//!
//! Every offspring drawn during a run gets its own stream, keyed by
//! (root seed, generation, island, index). Re-deriving the same key always
//! reproduces the same stream, so a run's output never depends on which
//! worker evaluated which individual or in what order. It also lets the
//! engine regenerate an offspring's parameter vector from its key instead
//! of keeping it in memory.
//!
//! The generator is SplitMix64 with stable output across platforms; normal
//! draws use the Box-Muller transform. Not for cryptographic use.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain tag keeping offspring streams disjoint from any other use of the
/// same root seed.
const STREAM_TAG: u64 = 0x6F66_6673_7072_6e67;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    mix64(state.wrapping_add(GOLDEN_GAMMA).wrapping_add(word))
}

/// A SplitMix64 stream with standard-normal draws.
#[derive(Clone, Debug)]
pub struct NormalStream {
    state: u64,
    spare: Option<f64>,
}

impl NormalStream {
    /// Stream seeded directly. Used by tests and standalone sampling.
    pub fn new(seed: u64) -> Self {
        NormalStream { state: seed, spare: None }
    }

    /// The counter-based scheme: the stream for offspring `index` of
    /// `island` at `generation` under `root`. Each field is absorbed into
    /// the key through a full SplitMix64 avalanche.
    pub fn for_individual(root: u64, generation: u32, island: u32, index: u32) -> Self {
        let mut key = absorb(root, STREAM_TAG);
        key = absorb(key, u64::from(generation));
        key = absorb(key, u64::from(island));
        key = absorb(key, u64::from(index));
        NormalStream { state: key, spare: None }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1]; never zero, so it is safe under `ln`.
    #[inline]
    fn next_unit_positive(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard-normal draw via Box-Muller. Pairs of uniforms produce pairs
    /// of normals; the second is cached for the next call.
    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let radius = (-2.0 * self.next_unit_positive().ln()).sqrt();
        let angle = std::f64::consts::TAU * self.next_unit();
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
