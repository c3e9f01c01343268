//! Feature extraction for syntax elements: a bag of BNF-tree label paths for
//! the signature (structure part) and hashed word uni/bi-grams of the
//! description (text part). Both parts are L2-normalized separately and use
//! stable FNV-1a hashing into fixed-size bucket spaces.

use crate::bnf;
use crate::kb::SyntaxElementSpec;
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("signature does not parse: {0}")]
    Signature(String),
}

/// Sparse feature map keyed by hash bucket, deterministic iteration order.
pub type SparseVec = BTreeMap<u32, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub structure: SparseVec,
    pub text: SparseVec,
}

pub fn fnv1a(s: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn bucket(s: &str, dims: usize) -> u32 {
    (fnv1a(s) % dims as u64) as u32
}

fn add(map: &mut SparseVec, key: u32, weight: f64) {
    *map.entry(key).or_insert(0.0) += weight;
}

fn l2_normalize(map: &mut SparseVec) {
    let norm = map.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in map.values_mut() {
            *v /= norm;
        }
    }
}

/// Root-to-node label paths of the parsed signature, depth <= 3:
/// `sig`, `sig/alt` per alternative, and `sig/alt/<term label>` per term.
pub fn structure_features(signature: &str, dims: usize) -> Result<SparseVec, FeatureError> {
    let alternatives =
        bnf::parse_signature(signature).map_err(|e| FeatureError::Signature(e.to_string()))?;
    let mut map = SparseVec::new();
    add(&mut map, bucket("sig", dims), 1.0);
    for alt in &alternatives {
        add(&mut map, bucket("sig/alt", dims), 1.0);
        for term in alt {
            add(&mut map, bucket(&format!("sig/alt/{}", term.label()), dims), 1.0);
        }
    }
    l2_normalize(&mut map);
    Ok(map)
}

fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            cur.push(c.to_ascii_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Lower-cased word unigrams and bigrams with term-frequency weights.
pub fn text_features(description: &str, dims: usize) -> SparseVec {
    let ws = words(description);
    let mut map = SparseVec::new();
    for w in &ws {
        add(&mut map, bucket(w, dims), 1.0);
    }
    for pair in ws.windows(2) {
        add(&mut map, bucket(&format!("{} {}", pair[0], pair[1]), dims), 1.0);
    }
    l2_normalize(&mut map);
    map
}

pub fn extract_features(
    spec: &SyntaxElementSpec,
    f_struct: usize,
    f_text: usize,
) -> Result<FeatureVector, FeatureError> {
    Ok(FeatureVector {
        structure: structure_features(&spec.signature, f_struct)?,
        text: text_features(&spec.description, f_text),
    })
}

/// Summary statistics of the text part that drive expert gating:
/// log feature count, mean weight, top weight, and a constant bias input.
pub fn gate_stats(text: &SparseVec) -> [f64; 4] {
    let n = text.len() as f64;
    let mean = if text.is_empty() {
        0.0
    } else {
        text.values().sum::<f64>() / n
    };
    let max = text.values().cloned().fold(0.0_f64, f64::max);
    [(1.0 + n).ln(), mean, max, 1.0]
}

/// Cosine similarity of two sparse maps (assumed normalized).
pub fn sparse_cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .filter_map(|(k, va)| large.get(k).map(|vb| va * vb))
        .sum()
}
