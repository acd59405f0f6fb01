use rayon::prelude::*;
use sha2::{Digest, Sha256};

/// Order-preserving parallel map with at most `width` worker threads.
pub(crate) fn bounded_map<T, R, F>(width: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if width <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(width).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

/// Stable 64-bit digest of the given parts (platform and release independent).
pub(crate) fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest is 32 bytes"))
}

/// Deterministic fraction in [0, 1) derived from a key and a seed.
pub(crate) fn unit_interval(seed: u64, key: &str) -> f64 {
    (stable_hash(&[&seed.to_le_bytes(), key.as_bytes()]) >> 11) as f64 / (1u64 << 53) as f64
}
