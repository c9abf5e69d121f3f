//! Small numeric helpers shared across modules: compensated summation,
//! seed splitting and seeded random substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Name of the random generator recorded in provenance files.
pub const RNG_ALGORITHM: &str =
    "ChaCha20Rng (rand_chacha 0.9) seeded via seed_from_u64, substreams via set_stream";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Neumaier compensated accumulator. Terms are added in call order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator, reduced in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// Per-column optimizer seed: `seed XOR (column * golden_gamma)`.
///
/// Column 0 keeps the master seed, so a one-column fit reproduces a direct
/// optimizer call bit for bit.
pub fn column_seed(seed: u64, column: usize) -> u64 {
    seed ^ (column as u64).wrapping_mul(GOLDEN_GAMMA)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a sequence of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed), |acc, &i| mix64(acc ^ mix64(i)))
}

/// Seeded generator on an independent stream of the same key.
pub fn substream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
