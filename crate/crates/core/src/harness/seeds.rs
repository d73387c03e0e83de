use sha2::{Digest, Sha256};

/// First eight bytes (little-endian) of SHA-256 over the master seed and
/// `parts`, each part terminated by a NUL byte.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Canonical text for a grid coordinate, so 1.0 and 1 hash alike.
pub fn real_key(x: f64) -> String {
    format!("{x:?}")
}
