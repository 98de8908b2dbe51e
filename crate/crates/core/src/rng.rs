//! Seed derivation and per-point random substreams.
//!
//! All randomness flows from ChaCha8 (`rand_chacha::ChaCha8Rng`). A sample of
//! size `n` drawn with seed `s` uses, for point `i`, a generator seeded with
//! `s` and switched to stream `i`. The `i`-th point therefore depends only on
//! `(s, i)`: prefixes agree across sample sizes and points can be generated in
//! any order. Seeds for experiment cells are derived with [`mix_seed`], a
//! SplitMix64 chain over the cell coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into one seed: `h ← splitmix64(h ⊕ splitmix64(part))`.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_u64, |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Stable 64-bit tag for a string (FNV-1a), used to fold names into seeds.
pub fn tag(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Generator for substream `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
