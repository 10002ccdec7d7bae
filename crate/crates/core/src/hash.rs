//! Stable 64-bit hashing.
//!
//! `std`'s `DefaultHasher` is not guaranteed stable across releases, and these
//! hashes key fixture files and seed generators, so FNV-1a is used instead.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |acc, &b| (acc ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}
