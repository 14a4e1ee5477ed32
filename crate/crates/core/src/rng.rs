//! Pinned pseudo-random streams.
//!
//! Everything random in the toolkit goes through SplitMix64 so that results
//! are reproducible across platforms and language bindings.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Stream key for a (seed, label) pair, e.g. a document id or method name.
pub fn derive(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a64(label.as_bytes())))
}

/// Maps 64 random bits to a double in `[0, 1)`.
pub fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Value of the keyed stream at `index`, in `[0, 1)`.
pub fn keyed_uniform(key: u64, index: u64) -> f64 {
    to_unit(splitmix64(key.wrapping_add(index.wrapping_mul(GOLDEN_GAMMA))))
}

/// Sequential SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        to_unit(self.next_u64())
    }
}
