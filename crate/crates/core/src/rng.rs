//! Reproducible random streams.
//!
//! Every experiment derives a test-specific key from the base seed and a
//! label, and every replicate draws from its own ChaCha8 stream under that
//! key. Results therefore depend only on `(seed, label, replicate)` and never
//! on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type LabRng = ChaCha8Rng;

/// SplitMix64 finalizer, used to spread user seeds and labels over the key space.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key for one named sub-experiment under a base seed.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    label
        .bytes()
        .fold(mix(base), |acc, b| mix(acc ^ u64::from(b)))
}

/// Independent generator for replicate `index` under `key`.
pub fn stream(key: u64, index: u64) -> LabRng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Runs `f` once per replicate, in parallel, and returns results in replicate
/// order. Each call receives its own stream, so the output is identical for
/// any thread count.
pub fn replicate<T, F>(key: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut LabRng) -> T + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(key, i as u64);
            f(i, &mut rng)
        })
        .collect()
}
