//! Seeded random sub-streams.
//!
//! Every stochastic site (stream cycle jitter, anomaly decisions, clock
//! offsets) owns an independent ChaCha8 stream keyed by `(seed, site)`, so the
//! draws of one site never depend on how events of other sites interleave.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives the 64-bit key of a named site.
pub fn site_key(seed: u64, site: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(site.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// Random generator for one site.
pub fn site_rng(seed: u64, site: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(site_key(seed, site))
}

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stateless uniform draw in `[0, 1)` for random-access sites such as
/// per-sync clock offsets.
pub fn unit_at(key: u64, index: u64) -> f64 {
    let v = mix64(key ^ mix64(index));
    (v >> 11) as f64 / (1u64 << 53) as f64
}
