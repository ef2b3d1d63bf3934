//! Deterministic, portable random-number substreams.
//!
//! Every randomized component of the crate draws from a ChaCha8 stream whose
//! 256-bit key is derived by hashing a master seed together with a list of
//! stream identifiers (repetition, fold, treatment, ...). Two consequences:
//!
//! * results are identical across platforms and worker counts, because no
//!   stream is ever shared between units of work, and
//! * a unit of work can be recomputed in isolation from `(seed, ids)` alone.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit finalizer from the splitmix64 generator.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a master seed and a list of stream identifiers into a single u64.
///
/// The chain absorbs the element count, so `(seed, [1])` and `(seed, [1, 0])`
/// land in different streams.
pub fn derive_seed(seed: u64, ids: &[u64]) -> u64 {
    let mut h = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    for &id in ids {
        h = mix(h.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ id);
    }
    mix(h ^ (ids.len() as u64))
}

/// A ChaCha8 generator keyed by `(seed, ids)`.
pub fn substream(seed: u64, ids: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut h = derive_seed(seed, ids);
    for chunk in key.chunks_exact_mut(8) {
        h = mix(h.wrapping_add(0x9e37_79b9_7f4a_7c15));
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_reproducible() {
        let mut a = substream(3, &[1, 2]);
        let mut b = substream(3, &[1, 2]);
        for _ in 0..16 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn distinct_ids_give_distinct_streams() {
        let mut a = substream(3, &[1, 2]);
        let mut b = substream(3, &[2, 1]);
        let mut c = substream(3, &[1]);
        let (xa, xb, xc) = (a.random::<u64>(), b.random::<u64>(), c.random::<u64>());
        assert_ne!(xa, xb);
        assert_ne!(xa, xc);
        assert_ne!(derive_seed(3, &[1]), derive_seed(3, &[1, 0]));
    }
}
