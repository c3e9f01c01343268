//! Cross-dialect embedding model: linear experts over hashed text features
//! gated by length/complexity statistics, a linear projection of signature
//! structure features, and an aggregation layer producing unit-norm vectors.
//! Equivalent syntax elements across dialects land close in cosine space.
//!
//! Only the linear maps are learned; features are fixed, which keeps the
//! manually derived training gradients tractable (see [`train`]).

pub mod features;
pub mod train;

use crate::kb::{ElementClass, KnowledgeBase, SyntaxElementSpec};
use crate::Dialect;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use features::{FeatureVector, SparseVec};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"XDEM";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    /// Embedding dimension.
    pub d: usize,
    /// Number of text experts.
    pub experts: usize,
    /// Contrastive temperature.
    pub tau: f64,
    /// Text feature hash buckets.
    pub f_text: usize,
    /// Structure feature hash buckets.
    pub f_struct: usize,
}

impl Default for Hyper {
    fn default() -> Hyper {
        Hyper { d: 64, experts: 4, tau: 0.07, f_text: 2048, f_struct: 512 }
    }
}

/// Gate input width: three text statistics plus a constant bias input.
pub const GATE_IN: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub hyper: Hyper,
    /// experts * d * f_text, row-major per expert.
    pub experts: Vec<f64>,
    /// experts * GATE_IN.
    pub gate: Vec<f64>,
    /// d * f_struct.
    pub structure_proj: Vec<f64>,
    /// d * 2d, combining [structure; text] halves.
    pub combine: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("feature bucket {bucket} exceeds configured space {dims}")]
    Dimension { bucket: u32, dims: usize },
    #[error("embeddings have different dimensions: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

#[derive(Debug, thiserror::Error)]
pub enum WeightsError {
    #[error("cannot read or write weights: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a weights file (bad magic)")]
    BadMagic,
    #[error("weights format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("weights file is truncated or inconsistent")]
    Corrupt,
}

impl ModelWeights {
    /// Xavier-style scaled uniform initialization from a seeded generator.
    pub fn init(hyper: Hyper, seed: u64) -> ModelWeights {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |rows: usize, cols: usize| -> Vec<f64> {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect()
        };
        ModelWeights {
            experts: mat(hyper.experts * hyper.d, hyper.f_text),
            gate: mat(hyper.experts, GATE_IN),
            structure_proj: mat(hyper.d, hyper.f_struct),
            combine: mat(hyper.d, 2 * hyper.d),
            hyper,
        }
    }

    pub fn param_count(&self) -> usize {
        self.experts.len() + self.gate.len() + self.structure_proj.len() + self.combine.len()
    }

    pub(crate) fn param(&self, i: usize) -> f64 {
        let mut i = i;
        for slab in [&self.experts, &self.gate, &self.structure_proj, &self.combine] {
            if i < slab.len() {
                return slab[i];
            }
            i -= slab.len();
        }
        panic!("parameter index out of range");
    }

    pub(crate) fn param_mut(&mut self, i: usize) -> &mut f64 {
        let mut i = i;
        for slab in [
            &mut self.experts,
            &mut self.gate,
            &mut self.structure_proj,
            &mut self.combine,
        ] {
            if i < slab.len() {
                return &mut slab[i];
            }
            i -= slab.len();
        }
        panic!("parameter index out of range");
    }

    pub fn save(&self, path: &Path) -> Result<(), WeightsError> {
        let mut out = Vec::new();
        out.write_all(MAGIC)?;
        out.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        out.write_u32::<LittleEndian>(self.hyper.d as u32)?;
        out.write_u32::<LittleEndian>(self.hyper.experts as u32)?;
        out.write_u32::<LittleEndian>(self.hyper.f_text as u32)?;
        out.write_u32::<LittleEndian>(self.hyper.f_struct as u32)?;
        out.write_u64::<LittleEndian>(self.hyper.tau.to_bits())?;
        for slab in [&self.experts, &self.gate, &self.structure_proj, &self.combine] {
            out.write_u64::<LittleEndian>(slab.len() as u64)?;
            for v in slab {
                out.write_u64::<LittleEndian>(v.to_bits())?;
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelWeights, WeightsError> {
        let data = std::fs::read(path)?;
        let mut r = std::io::Cursor::new(data);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(WeightsError::BadMagic);
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(WeightsError::Version { found: version, expected: FORMAT_VERSION });
        }
        let d = r.read_u32::<LittleEndian>()? as usize;
        let experts = r.read_u32::<LittleEndian>()? as usize;
        let f_text = r.read_u32::<LittleEndian>()? as usize;
        let f_struct = r.read_u32::<LittleEndian>()? as usize;
        let tau = f64::from_bits(r.read_u64::<LittleEndian>()?);
        let hyper = Hyper { d, experts, tau, f_text, f_struct };
        let mut slabs = Vec::new();
        for expect in [experts * d * f_text, experts * GATE_IN, d * f_struct, d * 2 * d] {
            let len = r.read_u64::<LittleEndian>()? as usize;
            if len != expect {
                return Err(WeightsError::Corrupt);
            }
            let mut slab = Vec::with_capacity(len);
            for _ in 0..len {
                slab.push(f64::from_bits(r.read_u64::<LittleEndian>()?));
            }
            slabs.push(slab);
        }
        let combine = slabs.pop().unwrap();
        let structure_proj = slabs.pop().unwrap();
        let gate = slabs.pop().unwrap();
        let experts = slabs.pop().unwrap();
        Ok(ModelWeights { hyper, experts, gate, structure_proj, combine })
    }
}

/// Unit-L2-norm embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Full forward pass with the intermediate values the trainer backpropagates
/// through.
#[derive(Debug, Clone)]
pub(crate) struct Forward {
    pub stats: [f64; GATE_IN],
    pub gate: Vec<f64>,
    /// Per-expert text outputs, experts * d.
    pub expert_out: Vec<Vec<f64>>,
    pub struct_emb: Vec<f64>,
    pub text_emb: Vec<f64>,
    pub norm: f64,
    pub unit: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|v| v / sum).collect()
}

fn check_dims(f: &FeatureVector, hyper: &Hyper) -> Result<(), EmbedError> {
    if let Some((&bucket, _)) = f.structure.iter().next_back() {
        if bucket as usize >= hyper.f_struct {
            return Err(EmbedError::Dimension { bucket, dims: hyper.f_struct });
        }
    }
    if let Some((&bucket, _)) = f.text.iter().next_back() {
        if bucket as usize >= hyper.f_text {
            return Err(EmbedError::Dimension { bucket, dims: hyper.f_text });
        }
    }
    Ok(())
}

fn sparse_matvec(mat: &[f64], row_offset: usize, cols: usize, d: usize, x: &SparseVec) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (&i, &v) in x {
        let i = i as usize;
        for (o, out_v) in out.iter_mut().enumerate() {
            *out_v += mat[row_offset + o * cols + i] * v;
        }
    }
    out
}

pub(crate) fn forward(w: &ModelWeights, f: &FeatureVector) -> Result<Forward, EmbedError> {
    check_dims(f, &w.hyper)?;
    let h = &w.hyper;
    let stats = features::gate_stats(&f.text);
    let gate_logits: Vec<f64> = (0..h.experts)
        .map(|e| (0..GATE_IN).map(|j| w.gate[e * GATE_IN + j] * stats[j]).sum())
        .collect();
    let gate = softmax(&gate_logits);
    let mut expert_out = Vec::with_capacity(h.experts);
    for e in 0..h.experts {
        expert_out.push(sparse_matvec(&w.experts, e * h.d * h.f_text, h.f_text, h.d, &f.text));
    }
    let mut text_emb = vec![0.0; h.d];
    for e in 0..h.experts {
        for o in 0..h.d {
            text_emb[o] += gate[e] * expert_out[e][o];
        }
    }
    let struct_emb = sparse_matvec(&w.structure_proj, 0, h.f_struct, h.d, &f.structure);
    let mut pre_norm = vec![0.0; h.d];
    for o in 0..h.d {
        let mut acc = 0.0;
        for j in 0..h.d {
            acc += w.combine[o * 2 * h.d + j] * struct_emb[j];
            acc += w.combine[o * 2 * h.d + h.d + j] * text_emb[j];
        }
        pre_norm[o] = acc;
    }
    let norm = pre_norm.iter().map(|v| v * v).sum::<f64>().sqrt();
    let unit = if norm > 1e-12 {
        pre_norm.iter().map(|v| v / norm).collect()
    } else {
        // degenerate input: fall back to a fixed unit vector
        let mut u = vec![0.0; h.d];
        u[0] = 1.0;
        u
    };
    Ok(Forward { stats, gate, expert_out, struct_emb, text_emb, norm, unit })
}

/// Encodes a feature vector into a unit-norm embedding.
pub fn encode(f: &FeatureVector, w: &ModelWeights) -> Result<Embedding, EmbedError> {
    Ok(Embedding { vector: forward(w, f)?.unit })
}

/// Cosine similarity; inputs are unit vectors so this is the dot product.
pub fn similarity(a: &Embedding, b: &Embedding) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch(a.dim(), b.dim()));
    }
    let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error("dialect {0} has no knowledge-base entries")]
    EmptyDialect(Dialect),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Candidate element as seen by the matcher. Equivalence labels are stripped
/// at construction so rankings can never consult them.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MatchedElement {
    pub dialect: Dialect,
    pub keyword: String,
    pub element_class: ElementClass,
    pub signature: String,
    pub description: String,
}

/// Pre-encoded candidate pool over a knowledge base.
pub struct Matcher {
    weights: ModelWeights,
    pool: BTreeMap<Dialect, Vec<(MatchedElement, Embedding)>>,
}

impl Matcher {
    pub fn new(kb: &KnowledgeBase, weights: ModelWeights) -> Result<Matcher, MatchError> {
        let mut pool = BTreeMap::new();
        for dialect in Dialect::ALL {
            let mut items = Vec::new();
            for spec in kb.elements_of(dialect) {
                let f = features::extract_features(spec, weights.hyper.f_struct, weights.hyper.f_text)?;
                let emb = encode(&f, &weights)?;
                items.push((
                    MatchedElement {
                        dialect: spec.dialect,
                        keyword: spec.keyword.clone(),
                        element_class: spec.element_class,
                        signature: spec.signature.clone(),
                        description: spec.description.clone(),
                    },
                    emb,
                ));
            }
            pool.insert(dialect, items);
        }
        Ok(Matcher { pool, weights })
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    /// Top-k elements of the target dialect by cosine similarity, descending,
    /// ties broken by keyword lexicographic order.
    pub fn rank(
        &self,
        element: &SyntaxElementSpec,
        target: Dialect,
        k: usize,
    ) -> Result<Vec<(MatchedElement, f64)>, MatchError> {
        let candidates = self.pool.get(&target).filter(|v| !v.is_empty());
        let candidates = candidates.ok_or(MatchError::EmptyDialect(target))?;
        let f = features::extract_features(
            element,
            self.weights.hyper.f_struct,
            self.weights.hyper.f_text,
        )?;
        let anchor = encode(&f, &self.weights)?;
        let mut scored: Vec<(MatchedElement, f64)> = candidates
            .iter()
            .map(|(el, emb)| Ok((el.clone(), similarity(&anchor, emb)?)))
            .collect::<Result<_, EmbedError>>()?;
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1).then_with(|| a.0.keyword.cmp(&b.0.keyword))
        });
        scored.truncate(k);
        Ok(scored)
    }
}

/// One-shot form of [`Matcher::rank`].
pub fn match_element(
    element: &SyntaxElementSpec,
    target: Dialect,
    k: usize,
    weights: &ModelWeights,
    kb: &KnowledgeBase,
) -> Result<Vec<(MatchedElement, f64)>, MatchError> {
    Matcher::new(kb, weights.clone())?.rank(element, target, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::SyntaxElementSpec;

    fn spec(dialect: Dialect, kw: &str, desc: &str) -> SyntaxElementSpec {
        SyntaxElementSpec {
            dialect,
            keyword: kw.to_string(),
            element_class: ElementClass::Function,
            signature: format!("{kw} \"(\" <expr> \")\""),
            description: desc.to_string(),
            examples: vec![],
            equivalences: vec![],
        }
    }

    fn fv(desc: &str) -> FeatureVector {
        features::extract_features(&spec(Dialect::Oracle, "NVL", desc), 512, 2048).unwrap()
    }

    #[test]
    fn encode_is_unit_norm() {
        let w = ModelWeights::init(Hyper::default(), 7);
        let e = encode(&fv("returns the first non-null argument"), &w).unwrap();
        let n: f64 = e.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_expert_reduces_to_identity_gate() {
        let hyper = Hyper { experts: 1, ..Hyper::default() };
        let w = ModelWeights::init(hyper, 3);
        let f = fv("computes a value");
        let fwd = forward(&w, &f).unwrap();
        assert_eq!(fwd.gate, vec![1.0]);
    }

    #[test]
    fn gate_is_a_probability_simplex() {
        let w = ModelWeights::init(Hyper::default(), 11);
        let fwd = forward(&w, &fv("some longer description about strings and nulls")).unwrap();
        let sum: f64 = fwd.gate.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(fwd.gate.iter().all(|g| *g >= 0.0));
    }

    #[test]
    fn similarity_bounds_and_symmetry() {
        let w = ModelWeights::init(Hyper::default(), 3);
        let a = encode(&fv("returns the first non-null argument"), &w).unwrap();
        let b = encode(&fv("formats a date into a string"), &w).unwrap();
        assert!((similarity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let neg = Embedding { vector: a.vector.iter().map(|v| -v).collect() };
        assert!((similarity(&a, &neg).unwrap() + 1.0).abs() < 1e-9);
        assert_eq!(similarity(&a, &b).unwrap(), similarity(&b, &a).unwrap());
        assert!(similarity(&a, &b).unwrap().abs() <= 1.0);
    }

    #[test]
    fn weights_roundtrip_bit_exact() {
        let w = ModelWeights::init(Hyper { d: 8, experts: 2, tau: 0.07, f_text: 64, f_struct: 32 }, 42);
        let tmp = tempfile::NamedTempFile::new().unwrap();
        w.save(tmp.path()).unwrap();
        let r = ModelWeights::load(tmp.path()).unwrap();
        assert_eq!(w, r);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let w = ModelWeights::init(Hyper { d: 4, experts: 1, tau: 0.1, f_text: 16, f_struct: 8 }, 1);
        let tmp = tempfile::NamedTempFile::new().unwrap();
        w.save(tmp.path()).unwrap();
        let mut bytes = std::fs::read(tmp.path()).unwrap();
        bytes[4] = 99; // bump version field
        std::fs::write(tmp.path(), bytes).unwrap();
        assert!(matches!(
            ModelWeights::load(tmp.path()),
            Err(WeightsError::Version { found: 99, .. })
        ));
    }

    #[test]
    fn match_ranks_self_dialect_identity_first() {
        let mut kb = KnowledgeBase::new();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        {
            use std::io::Write;
            let mut f = std::fs::File::create(tmp.path()).unwrap();
            for s in [
                spec(Dialect::Oracle, "NVL", "Returns the second argument when the first is null."),
                spec(Dialect::Oracle, "UPPER", "Converts a string to upper case."),
                spec(Dialect::Oracle, "LOWER", "Converts a string to lower case."),
            ] {
                writeln!(f, "{}", serde_json::to_string(&s).unwrap()).unwrap();
            }
        }
        kb.ingest(tmp.path()).unwrap();
        let w = ModelWeights::init(Hyper::default(), 5);
        let anchor = spec(Dialect::Oracle, "NVL", "Returns the second argument when the first is null.");
        let top = match_element(&anchor, Dialect::Oracle, 2, &w, &kb).unwrap();
        assert_eq!(top[0].0.keyword, "NVL");
        assert!((top[0].1 - 1.0).abs() < 1e-9);
        // k larger than the pool ranks the entire pool
        let all = match_element(&anchor, Dialect::Oracle, 10, &w, &kb).unwrap();
        assert_eq!(all.len(), 3);
        // empty dialect errors
        assert!(matches!(
            match_element(&anchor, Dialect::Mysql, 3, &w, &kb),
            Err(MatchError::EmptyDialect(Dialect::Mysql))
        ));
    }
}
