//! Stable content hashes used as oracle identities and cache keys.

use sha2::{Digest, Sha256};

/// Hex prefix of the SHA-256 of `parts`, each part length-prefixed so that
/// `["ab", "c"]` and `["a", "bc"]` differ.
pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(&h.finalize()[..8])
}

pub fn digest_str(parts: &[&str]) -> String {
    let bytes: Vec<&[u8]> = parts.iter().map(|s| s.as_bytes()).collect();
    digest(&bytes)
}
