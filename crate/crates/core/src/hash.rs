//! FNV-1a hashing used for ids, feature hashing and prompt fingerprints.

use alloc::string::String;
use core::fmt::Write;

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

/// 64-bit FNV-1a over `bytes`.
#[inline]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_seeded(FNV_OFFSET_BASIS, bytes)
}

/// FNV-1a starting from a caller-chosen basis. Distinct bases give
/// independent-enough hash families for sign hashing.
#[inline]
pub fn fnv1a64_seeded(basis: u64, bytes: &[u8]) -> u64 {
    let mut hash = basis;
    for byte in bytes {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Lower-case 16 digit hex rendering of `fnv1a64(bytes)`.
pub fn fingerprint(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(16);
    let _ = write!(out, "{:016x}", fnv1a64(bytes));
    out
}
