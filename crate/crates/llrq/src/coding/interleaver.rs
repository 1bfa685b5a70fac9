//! Seeded pseudorandom interleaver.
//!
//! A fixed seed defines a fixed permutation; the same seed must be used on
//! both ends of the link. Used between the encoder and the symbol mapper
//! on frequency-selective channels to break up fading bursts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The permutation behind [`interleave`]: output position i takes input
/// position perm[i].
pub fn permutation(len: usize, seed: u64) -> Vec<u32> {
    let mut perm: Vec<u32> = (0..len as u32).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

/// Rearranges `data` with the seeded permutation.
pub fn interleave<T: Copy>(data: &[T], seed: u64) -> Vec<T> {
    let perm = permutation(data.len(), seed);
    perm.iter().map(|&p| data[p as usize]).collect()
}

/// Inverse of [`interleave`] with the same seed.
pub fn deinterleave<T: Copy + Default>(data: &[T], seed: u64) -> Vec<T> {
    let perm = permutation(data.len(), seed);
    let mut out = vec![T::default(); data.len()];
    for (i, &p) in perm.iter().enumerate() {
        out[p as usize] = data[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_identity() {
        let data: Vec<f64> = (0..648).map(|i| i as f64 * 0.37).collect();
        let inter = interleave(&data, 99);
        assert_ne!(inter, data);
        assert_eq!(deinterleave(&inter, 99), data);
    }

    #[test]
    fn output_is_a_permutation() {
        let data: Vec<u32> = (0..648).collect();
        let mut inter = interleave(&data, 5);
        inter.sort_unstable();
        assert_eq!(inter, data);
    }

    #[test]
    fn different_seeds_differ() {
        let a = permutation(648, 1);
        let b = permutation(648, 2);
        assert_ne!(a, b);
        assert_eq!(a, permutation(648, 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_any_seed(seed in any::<u64>(), len in 1usize..200) {
            let data: Vec<u16> = (0..len as u16).collect();
            prop_assert_eq!(deinterleave(&interleave(&data, seed), seed), data);
        }
    }
}
