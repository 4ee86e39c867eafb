//! Deterministic seed derivation.
//!
//! All randomness in the system is an explicit 64-bit seed; replays are
//! byte-identical because every draw is keyed by (master seed, index)
//! rather than by execution order.
//!
//! The mixing function is SplitMix64: `derive_seed(m, i)` is the (i+1)-th
//! output of the SplitMix64 stream seeded at `m`, i.e.
//! `finalize(m + (i+1) * 0x9E3779B97F4A7C15)`. The finalizer is a bijection
//! on u64 and the golden-ratio increment is odd, so for a fixed master the
//! map `i -> derive_seed(m, i)` is injective over the full u64 range.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Steele, Lea & Flood's mix; a u64 bijection).
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the `index`-th child seed of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    finalize(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Map a seed to a uniform f64 in [0, 1) using the top 53 bits of one more
/// mixing step.
pub fn unit_from_seed(seed: u64) -> f64 {
    let mixed = finalize(seed.wrapping_add(GAMMA));
    (mixed >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Pick an index from `weights` using the seed's uniform draw. Weights must
/// be positive with a positive sum; callers validate that upfront.
pub fn weighted_index(seed: u64, weights: &[f64]) -> usize {
    debug_assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    let r = unit_from_seed(seed) * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if r < acc {
            return i;
        }
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from an independent reference implementation of the SplitMix64
    // stream (finalize(42 + (i+1)*GAMMA) computed in big-integer arithmetic).
    const GOLDEN_M42: [(u64, u64); 8] = [
        (0, 0xBDD7_3226_2FEB_6E95),
        (1, 0x28EF_E333_B266_F103),
        (2, 0x4752_6757_130F_9F52),
        (3, 0x581C_E1FF_0E4A_E394),
        (4, 0x09BC_585A_2448_23F2),
        (5, 0xDE44_31FA_3C80_DB06),
        (6, 0x37E9_671C_4537_6D5D),
        (7, 0xCCF6_35EE_9E9E_2FA4),
    ];

    #[test]
    fn matches_golden_table() {
        for (i, expected) in GOLDEN_M42 {
            assert_eq!(derive_seed(42, i), expected, "index {i}");
        }
    }

    #[test]
    fn deterministic_and_distinct() {
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
    }

    #[test]
    fn injective_over_a_million_indices() {
        let mut seen = std::collections::HashSet::with_capacity(1_000_000);
        for i in 0..1_000_000u64 {
            assert!(seen.insert(derive_seed(0xDEADBEEF, i)), "collision at {i}");
        }
    }

    #[test]
    fn unit_draws_land_in_range_and_spread() {
        let mut sum = 0.0;
        let n = 10_000;
        for i in 0..n {
            let u = unit_from_seed(derive_seed(1, i));
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn weighted_index_respects_weights() {
        // single weight always picks 0
        assert_eq!(weighted_index(123, &[3.0]), 0);
        // frequency check is done at the backend level; here just bounds
        for i in 0..100 {
            let idx = weighted_index(derive_seed(9, i), &[0.6, 0.4]);
            assert!(idx < 2);
        }
    }
}
