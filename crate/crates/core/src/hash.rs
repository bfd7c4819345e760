//! Stable 64-bit hashing used for trigram buckets and provenance pins.

use alloc::format;
use alloc::string::String;
use core::hash::Hasher;

use fnv::FnvHasher;

/// FNV-1a over raw bytes. Stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Hex digest used to pin bundled resources (stop-words, taxonomy) into models.
pub fn provenance_hash(content: &str) -> String {
    format!("fnv1a64:{:016x}", stable_hash(content.as_bytes()))
}
