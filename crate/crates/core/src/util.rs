//! Small shared helpers.

/// FNV-1a over the bytes; stable across platforms and releases, unlike
/// `DefaultHasher`. Used to derive per-name RNG streams from a master seed.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Mixes a master seed with a named stream.
pub fn derive_seed(master: u64, stream: &str) -> u64 {
    master ^ stable_hash(stream).rotate_left(17)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_hash_is_stable() {
        // Frozen reference values; a change here would silently rewire
        // every seeded stream.
        assert_eq!(stable_hash(""), 0xcbf29ce484222325);
        assert_eq!(stable_hash("a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        assert_ne!(derive_seed(1, "alpha"), derive_seed(1, "beta"));
        assert_eq!(derive_seed(7, "x"), derive_seed(7, "x"));
    }
}
