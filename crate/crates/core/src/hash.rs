//! Short content hashes used to tie checkpoints, configs and indexes together.

use sha2::{Digest, Sha256};

/// First eight bytes of SHA-256, little-endian.
pub fn hash64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

pub fn hex64(value: u64) -> String {
    format!("{value:016x}")
}
