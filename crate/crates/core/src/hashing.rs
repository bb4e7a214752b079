//! Short content hashes used for stable identifiers.

use sha2::{Digest, Sha256};

/// First `hex_len` hex characters of SHA-256 over `input`.
pub(crate) fn sha256_short_hex(input: &[u8], hex_len: usize) -> String {
    use std::fmt::Write;
    let digest = Sha256::digest(input);
    let mut out = String::with_capacity(hex_len + 1);
    for byte in digest.iter().take(hex_len.div_ceil(2)) {
        write!(out, "{byte:02x}").expect("writing to a String cannot fail");
    }
    out.truncate(hex_len);
    out
}
