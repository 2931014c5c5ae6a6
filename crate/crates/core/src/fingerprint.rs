use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::scalar::Scalar;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Short SHA-256 digest of a value's JSON encoding.
pub fn fingerprint<S: Serialize + ?Sized>(value: &S) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize");
    hex(&Sha256::digest(&bytes)[..8])
}

/// Digest of labels and the exact bit patterns of the inputs.
pub fn dataset_hash<T: Scalar>(rows: &[T], labels: &[usize]) -> String {
    let mut h = Sha256::new();
    for &l in labels {
        h.update((l as u64).to_le_bytes());
    }
    for &v in rows {
        h.update(v.as_f64().to_bits().to_le_bytes());
    }
    hex(&h.finalize()[..8])
}
