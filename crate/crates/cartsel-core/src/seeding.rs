//! Sub-seed derivation.
//!
//! Every randomized operation takes a single `u64` seed. When one run needs
//! several independent streams (sample splitting, the internal split used by
//! the M2 forward tests, permutation draws), sub-seeds are derived from the
//! run seed with a fixed counter scheme so that results are reproducible and
//! documented: `derive(seed, tag)` mixes `seed ^ (tag * GAMMA)` through one
//! splitmix64 round.

/// Tag for the three-way sample split.
pub const TAG_SPLIT: u64 = 1;
/// Tag for the internal growing/validation split used under M2.
pub const TAG_INTERNAL_SPLIT: u64 = 2;
/// Base tag for permutation-test draws; the candidate variable index is
/// folded in by a second `derive`.
pub const TAG_PERMUTATION: u64 = 3;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives a sub-seed from `seed` for the stream identified by `tag`.
pub fn derive(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(GAMMA);
    z = z.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_tags_give_distinct_streams() {
        let s = 42;
        assert_ne!(derive(s, TAG_SPLIT), derive(s, TAG_INTERNAL_SPLIT));
        assert_ne!(derive(s, TAG_SPLIT), derive(s, TAG_PERMUTATION));
    }

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive(7, TAG_SPLIT), derive(7, TAG_SPLIT));
    }
}
