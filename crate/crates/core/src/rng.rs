//! Stable seed derivation.
//!
//! Every random decision in the generator draws from a ChaCha stream whose
//! seed is a hash of a fixed key path (run seed, video, frame, category,
//! ordinal). Output therefore does not depend on iteration or thread order.

use core::hash::Hasher;

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One component of a seed path.
#[derive(Debug, Clone, Copy)]
pub enum SeedPart<'a> {
    Int(u64),
    Str(&'a str),
}

impl From<u64> for SeedPart<'_> {
    fn from(v: u64) -> Self {
        SeedPart::Int(v)
    }
}

impl<'a> From<&'a str> for SeedPart<'a> {
    fn from(v: &'a str) -> Self {
        SeedPart::Str(v)
    }
}

/// FNV-1a over a length-prefixed encoding of `parts`.
pub fn derive_seed(parts: &[SeedPart<'_>]) -> u64 {
    let mut h = FnvHasher::default();
    for part in parts {
        match part {
            SeedPart::Int(v) => {
                h.write_u8(0);
                h.write(&v.to_le_bytes());
            }
            SeedPart::Str(s) => {
                h.write_u8(1);
                h.write(&(s.len() as u64).to_le_bytes());
                h.write(s.as_bytes());
            }
        }
    }
    // splitmix finalizer spreads FNV's weak low bits
    let mut z = h.finish().wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(parts: &[SeedPart<'_>]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}
