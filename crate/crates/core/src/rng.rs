//! Portable random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator seeded with
//! [`rand_core::SeedableRng::seed_from_u64`] and positioned on an explicit
//! 64-bit stream with `set_stream`. A coded packet with encoding index `i`
//! always draws from stream `i`, so the `i`-th packet of a block does not
//! depend on how many packets were requested before it.
//!
//! Derived quantities use only `next_u64`:
//!
//! * uniform integer in `0..n`: the high 64 bits of `next_u64() * n` (128-bit
//!   product);
//! * uniform real in `[0, 1)`: `(next_u64() >> 11) * 2^-53`;
//! * random bit rows: one `next_u64` per 64 columns, row-major, least
//!   significant bit first, bits past the row width cleared.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream holding the dense mixing rows of the precode.
pub const PRECODE_STREAM: u64 = u64::MAX;
/// First stream of the feedback (fix) packets; fix packet `i` uses
/// `FIX_STREAM_BASE + i`.
pub const FIX_STREAM_BASE: u64 = 1 << 63;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser applied to `seed` offset by `tag`; used to give each
/// Monte Carlo trial, generation or sweep point an independent seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn uniform_index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    debug_assert!(n > 0);
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

#[inline]
pub fn uniform_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    uniform_f64(rng) < p
}

/// `k` distinct values from `0..n` by Floyd's algorithm, returned sorted.
pub fn distinct_indices<R: RngCore + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot draw {k} distinct values from {n}");
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for j in (n - k)..n {
        let t = uniform_index(rng, j + 1);
        match chosen.binary_search(&t) {
            Ok(_) => {
                let pos = chosen.binary_search(&j).unwrap_err();
                chosen.insert(pos, j);
            }
            Err(pos) => chosen.insert(pos, t),
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent_of_request_order() {
        let mut a = stream(7, 3);
        let mut b = stream(7, 3);
        let _ = stream(7, 2).next_u64();
        assert_eq!(a.next_u64(), b.next_u64());
        assert_ne!(stream(7, 3).next_u64(), stream(7, 4).next_u64());
    }

    #[test]
    fn distinct_indices_are_distinct_and_in_range() {
        let mut rng = stream(1, 0);
        for k in 0..=20 {
            let v = distinct_indices(&mut rng, 20, k);
            assert_eq!(v.len(), k);
            assert!(v.windows(2).all(|w| w[0] < w[1]));
            assert!(v.iter().all(|&x| x < 20));
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|t| derive_seed(42, t)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
