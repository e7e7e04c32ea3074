use sha2::{Digest, Sha256};

/// Seed for a named randomized stage, derived from the master seed by a
/// stable hash so that stages never share a stream.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}
