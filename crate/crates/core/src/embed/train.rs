//! Retrieval-enhanced contrastive training of the embedding model.
//!
//! Positive pairs come from three sources: synonym-augmented copies of an
//! element's own specification, same-keyword elements across dialects, and
//! equivalences implied by the rewrite-rule store. Hard negatives are mined
//! per anchor as the most text-similar non-equivalent elements and are forced
//! into the anchor's batch, where they join the other in-batch items as
//! softmax competitors of the true positive.
//!
//! Gradients are derived by hand through the whole stack (softmax contrastive
//! loss, L2 normalization, combine layer, gated experts, sparse projections)
//! and verified against central finite differences by [`grad_check`].

use super::features::{self, FeatureVector};
use super::{forward, Forward, Hyper, ModelWeights, GATE_IN};
use crate::engine::rules::RuleStore;
use crate::kb::{KnowledgeBase, SyntaxElementSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    Positive,
    HardNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Augmentation,
    SameKeywordCrossDialect,
    RuleToolEquivalence,
    MinedNegative,
}

impl Provenance {
    pub fn label(&self) -> PairLabel {
        match self {
            Provenance::MinedNegative => PairLabel::HardNegative,
            _ => PairLabel::Positive,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub anchor: SyntaxElementSpec,
    pub other: SyntaxElementSpec,
    pub label: PairLabel,
    pub provenance: Provenance,
}

impl TrainingPair {
    /// Label is implied by provenance, keeping the two consistent.
    pub fn new(anchor: SyntaxElementSpec, other: SyntaxElementSpec, provenance: Provenance) -> TrainingPair {
        TrainingPair { label: provenance.label(), anchor, other, provenance }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hyper: Hyper,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub decay_every: usize,
    pub decay: f64,
    pub hard_negatives_per_anchor: usize,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            hyper: Hyper::default(),
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.05,
            decay_every: 20,
            decay: 0.5,
            hard_negatives_per_anchor: 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("no positive pairs to train on")]
    NoPositives,
    #[error("loss became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Embed(#[from] super::EmbedError),
}

/// Fixed synonym table for deterministic description augmentation,
/// one `word|synonym` entry per line.
#[derive(Debug, Clone, Default)]
pub struct SynonymTable {
    entries: Vec<(String, String)>,
}

impl SynonymTable {
    pub fn load(path: &Path) -> std::io::Result<SynonymTable> {
        let text = std::fs::read_to_string(path)?;
        Ok(SynonymTable::parse(&text))
    }

    pub fn parse(text: &str) -> SynonymTable {
        let mut entries = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((a, b)) = line.split_once('|') {
                entries.push((a.trim().to_lowercase(), b.trim().to_lowercase()));
            }
        }
        SynonymTable { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn substitute(&self, word: &str) -> Option<String> {
        for (a, b) in &self.entries {
            if word == a {
                return Some(b.clone());
            }
            if word == b {
                return Some(a.clone());
            }
        }
        None
    }

    /// Lower-cases the description and swaps up to three substitutable words,
    /// chosen by the seeded generator.
    pub fn augment(&self, description: &str, rng: &mut ChaCha8Rng) -> String {
        let mut words: Vec<String> = description
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_ascii_alphanumeric()).to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        let mut positions: Vec<usize> = words
            .iter()
            .enumerate()
            .filter(|(_, w)| self.substitute(w).is_some())
            .map(|(i, _)| i)
            .collect();
        positions.shuffle(rng);
        for &i in positions.iter().take(3) {
            if let Some(sub) = self.substitute(&words[i]) {
                words[i] = sub;
            }
        }
        words.join(" ")
    }
}

fn element_key(spec: &SyntaxElementSpec) -> String {
    format!(
        "{}|{}|{:?}|{:x}",
        spec.dialect,
        spec.keyword,
        spec.element_class,
        features::fnv1a(&spec.description)
    )
}

/// Builds the contrastive training set from the knowledge base, the rewrite
/// rule store and the synonym table. Deterministic given the seed.
pub fn build_pairs(
    kb: &KnowledgeBase,
    rules: &RuleStore,
    synonyms: &SynonymTable,
    seed: u64,
) -> Vec<TrainingPair> {
    let mut entries: Vec<&SyntaxElementSpec> = kb.entries().iter().collect();
    entries.sort_by_key(|e| (e.dialect, e.keyword.clone(), format!("{:?}", e.element_class)));

    let mut pairs = Vec::new();

    // (1) augmented copies of each element's own specification
    for spec in &entries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ features::fnv1a(&element_key(spec)));
        let mut copy = (*spec).clone();
        copy.description = synonyms.augment(&spec.description, &mut rng);
        pairs.push(TrainingPair::new((*spec).clone(), copy, Provenance::Augmentation));
    }

    // (2) same keyword and class across dialects
    let mut by_keyword: BTreeMap<(String, String), Vec<&SyntaxElementSpec>> = BTreeMap::new();
    for spec in &entries {
        by_keyword
            .entry((spec.keyword.clone(), format!("{:?}", spec.element_class)))
            .or_default()
            .push(spec);
    }
    for group in by_keyword.values() {
        for i in 0..group.len() {
            for j in (i + 1)..group.len() {
                if group[i].dialect != group[j].dialect {
                    pairs.push(TrainingPair::new(
                        group[i].clone(),
                        group[j].clone(),
                        Provenance::SameKeywordCrossDialect,
                    ));
                }
            }
        }
    }

    // (3) equivalences implied by the rewrite-rule store
    let mut seen_rule_pairs = HashSet::new();
    for (sd, skw, td, tkw) in rules.equivalence_pairs() {
        let left = kb.lookup(sd, &skw);
        let right = kb.lookup(td, &tkw);
        if let (Some(l), Some(r)) = (left.first(), right.first()) {
            if l.keyword == r.keyword && l.dialect == r.dialect {
                continue;
            }
            let mut key = [element_key(l), element_key(r)];
            key.sort();
            if seen_rule_pairs.insert(key) {
                pairs.push(TrainingPair::new(
                    (*l).clone(),
                    (*r).clone(),
                    Provenance::RuleToolEquivalence,
                ));
            }
        }
    }

    // equivalence closure used to keep true positives out of the negatives
    let mut equivalent: HashSet<(String, String)> = HashSet::new();
    let mut mark = |a: &SyntaxElementSpec, b: &SyntaxElementSpec| {
        let (ka, kb_) = (
            format!("{}|{}", a.dialect, a.keyword),
            format!("{}|{}", b.dialect, b.keyword),
        );
        equivalent.insert((ka.clone(), kb_.clone()));
        equivalent.insert((kb_, ka));
    };
    for p in &pairs {
        mark(&p.anchor, &p.other);
    }
    for spec in &entries {
        for eq in &spec.equivalences {
            let other = kb.lookup(eq.dialect, &eq.keyword);
            if let Some(o) = other.first() {
                mark(spec, o);
            }
        }
    }

    // (4) hard negatives: most text-similar non-equivalent elements
    let m = 4;
    let dims_text = Hyper::default().f_text;
    let feats: Vec<features::SparseVec> = entries
        .iter()
        .map(|e| features::text_features(&e.description, dims_text))
        .collect();
    for (i, anchor) in entries.iter().enumerate() {
        let akey = format!("{}|{}", anchor.dialect, anchor.keyword);
        let mut scored: Vec<(f64, usize)> = Vec::new();
        for (j, other) in entries.iter().enumerate() {
            if i == j || other.keyword == anchor.keyword {
                continue;
            }
            let okey = format!("{}|{}", other.dialect, other.keyword);
            if equivalent.contains(&(akey.clone(), okey)) {
                continue;
            }
            scored.push((features::sparse_cosine(&feats[i], &feats[j]), j));
        }
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| entries[a.1].keyword.cmp(&entries[b.1].keyword))
        });
        for &(_, j) in scored.iter().take(m) {
            pairs.push(TrainingPair::new(
                (*anchor).clone(),
                entries[j].clone(),
                Provenance::MinedNegative,
            ));
        }
    }

    pairs
}

/// Interned training corpus: features per distinct element plus the positive
/// and hard-negative structure over element indices.
struct Corpus {
    features: Vec<FeatureVector>,
    positives: Vec<(usize, usize)>,
    hard: HashMap<usize, Vec<usize>>,
    partners: Vec<BTreeSet<usize>>,
}

fn build_corpus(pairs: &[TrainingPair], hyper: &Hyper) -> Result<Corpus, TrainError> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut feats: Vec<FeatureVector> = Vec::new();
    let intern = |spec: &SyntaxElementSpec,
                      index: &mut HashMap<String, usize>,
                      feats: &mut Vec<FeatureVector>|
     -> Result<usize, TrainError> {
        let key = element_key(spec);
        if let Some(&i) = index.get(&key) {
            return Ok(i);
        }
        let f = features::extract_features(spec, hyper.f_struct, hyper.f_text)?;
        feats.push(f);
        index.insert(key, feats.len() - 1);
        Ok(feats.len() - 1)
    };

    let mut positives = Vec::new();
    let mut hard: HashMap<usize, Vec<usize>> = HashMap::new();
    for pair in pairs {
        let a = intern(&pair.anchor, &mut index, &mut feats)?;
        let o = intern(&pair.other, &mut index, &mut feats)?;
        match pair.label {
            PairLabel::Positive => positives.push((a, o)),
            PairLabel::HardNegative => hard.entry(a).or_default().push(o),
        }
    }
    let mut partners = vec![BTreeSet::new(); feats.len()];
    for &(a, o) in &positives {
        partners[a].insert(o);
        partners[o].insert(a);
    }
    Ok(Corpus { features: feats, positives, hard, partners })
}

struct BatchItem {
    anchor: usize,
    /// Index of the positive inside `cands`.
    pos_slot: usize,
    cands: Vec<usize>,
}

fn make_batch(corpus: &Corpus, pair_ids: &[usize]) -> Vec<BatchItem> {
    // shared candidate pool: every positive plus every anchor's mined negatives
    let mut pool: Vec<usize> = Vec::new();
    let mut seen = HashSet::new();
    for &pid in pair_ids {
        let (a, p) = corpus.positives[pid];
        if seen.insert(p) {
            pool.push(p);
        }
        if let Some(negs) = corpus.hard.get(&a) {
            for &n in negs {
                if seen.insert(n) {
                    pool.push(n);
                }
            }
        }
    }
    let mut items = Vec::new();
    for &pid in pair_ids {
        let (a, p) = corpus.positives[pid];
        let mut cands = vec![p];
        for &x in &pool {
            if x == p || x == a || corpus.partners[a].contains(&x) {
                continue;
            }
            cands.push(x);
        }
        items.push(BatchItem { anchor: a, pos_slot: 0, cands });
    }
    items
}

fn forwards_for(
    w: &ModelWeights,
    corpus: &Corpus,
    items: &[BatchItem],
) -> Result<HashMap<usize, Forward>, TrainError> {
    let mut out: HashMap<usize, Forward> = HashMap::new();
    for item in items {
        for &e in std::iter::once(&item.anchor).chain(item.cands.iter()) {
            if !out.contains_key(&e) {
                out.insert(e, forward(w, &corpus.features[e])?);
            }
        }
    }
    Ok(out)
}

fn batch_loss(
    w: &ModelWeights,
    corpus: &Corpus,
    items: &[BatchItem],
) -> Result<f64, TrainError> {
    let fwd = forwards_for(w, corpus, items)?;
    let tau = w.hyper.tau;
    let mut total = 0.0;
    for item in items {
        let ua = &fwd[&item.anchor].unit;
        let scores: Vec<f64> = item
            .cands
            .iter()
            .map(|&c| dot(ua, &fwd[&c].unit) / tau)
            .collect();
        total += neg_log_softmax(&scores, item.pos_slot);
    }
    Ok(total / items.len() as f64)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn neg_log_softmax(scores: &[f64], target: usize) -> f64 {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    log_sum - scores[target]
}

struct Grads {
    experts: Vec<f64>,
    gate: Vec<f64>,
    structure_proj: Vec<f64>,
    combine: Vec<f64>,
}

impl Grads {
    fn zeros(w: &ModelWeights) -> Grads {
        Grads {
            experts: vec![0.0; w.experts.len()],
            gate: vec![0.0; w.gate.len()],
            structure_proj: vec![0.0; w.structure_proj.len()],
            combine: vec![0.0; w.combine.len()],
        }
    }
}

fn batch_backward(
    w: &ModelWeights,
    corpus: &Corpus,
    items: &[BatchItem],
) -> Result<(f64, Grads), TrainError> {
    let fwd = forwards_for(w, corpus, items)?;
    let h = &w.hyper;
    let tau = h.tau;
    let scale = 1.0 / items.len() as f64;

    // dL/d(unit embedding), accumulated per element across all items
    let mut d_unit: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut total = 0.0;
    for item in items {
        let ua = &fwd[&item.anchor].unit;
        let scores: Vec<f64> = item
            .cands
            .iter()
            .map(|&c| dot(ua, &fwd[&c].unit) / tau)
            .collect();
        total += neg_log_softmax(&scores, item.pos_slot);

        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let denom: f64 = exps.iter().sum();
        for (slot, &c) in item.cands.iter().enumerate() {
            let q = exps[slot] / denom;
            let coeff = (q - if slot == item.pos_slot { 1.0 } else { 0.0 }) / tau * scale;
            let ga = d_unit.entry(item.anchor).or_insert_with(|| vec![0.0; h.d]);
            let uc = &fwd[&c].unit;
            for o in 0..h.d {
                ga[o] += coeff * uc[o];
            }
            let gc = d_unit.entry(c).or_insert_with(|| vec![0.0; h.d]);
            for o in 0..h.d {
                gc[o] += coeff * ua[o];
            }
        }
    }

    let mut grads = Grads::zeros(w);
    for (&e, g) in &d_unit {
        let f = &fwd[&e];
        if f.norm <= 1e-12 {
            continue; // constant fallback vector, no gradient
        }
        // through L2 normalization: dz = (g - (g . u) u) / norm
        let gu = dot(g, &f.unit);
        let dz: Vec<f64> = (0..h.d).map(|o| (g[o] - gu * f.unit[o]) / f.norm).collect();
        // through combine: z = C [hs; ht]
        let mut dhs = vec![0.0; h.d];
        let mut dht = vec![0.0; h.d];
        for o in 0..h.d {
            let row = o * 2 * h.d;
            for j in 0..h.d {
                grads.combine[row + j] += dz[o] * f.struct_emb[j];
                grads.combine[row + h.d + j] += dz[o] * f.text_emb[j];
                dhs[j] += w.combine[row + j] * dz[o];
                dht[j] += w.combine[row + h.d + j] * dz[o];
            }
        }
        // structure projection (sparse columns)
        let xs = &corpus.features[e].structure;
        for (&i, &v) in xs {
            let i = i as usize;
            for (o, dhs_o) in dhs.iter().enumerate() {
                grads.structure_proj[o * h.f_struct + i] += dhs_o * v;
            }
        }
        // gated experts
        let xt = &corpus.features[e].text;
        let mut dgate_out = vec![0.0; h.experts];
        for ex in 0..h.experts {
            let base = ex * h.d * h.f_text;
            let ge = f.gate[ex];
            for (&i, &v) in xt {
                let i = i as usize;
                for (o, dht_o) in dht.iter().enumerate() {
                    grads.experts[base + o * h.f_text + i] += ge * dht_o * v;
                }
            }
            dgate_out[ex] = dot(&dht, &f.expert_out[ex]);
        }
        // softmax gate backprop onto logits, then onto the gate matrix
        let inner: f64 = (0..h.experts).map(|ex| dgate_out[ex] * f.gate[ex]).sum();
        for ex in 0..h.experts {
            let da = f.gate[ex] * (dgate_out[ex] - inner);
            for j in 0..GATE_IN {
                grads.gate[ex * GATE_IN + j] += da * f.stats[j];
            }
        }
    }

    Ok((total * scale, grads))
}

/// Mini-batch gradient descent over the contrastive loss. Deterministic for
/// a fixed seed: identical inputs produce bit-identical weights.
pub fn train(
    pairs: &[TrainingPair],
    config: &TrainConfig,
    seed: u64,
) -> Result<(ModelWeights, Vec<f64>), TrainError> {
    let corpus = build_corpus(pairs, &config.hyper)?;
    if corpus.positives.is_empty() {
        return Err(TrainError::NoPositives);
    }
    let mut weights = ModelWeights::init(config.hyper, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..corpus.positives.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.learning_rate * config.decay.powi((epoch / config.decay_every) as i32);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let items = make_batch(&corpus, chunk);
            let (loss, grads) = batch_backward(&weights, &corpus, &items)?;
            if !loss.is_finite() {
                return Err(TrainError::Divergence { epoch });
            }
            epoch_loss += loss * items.len() as f64;
            seen += items.len();
            apply(&mut weights.experts, &grads.experts, lr);
            apply(&mut weights.gate, &grads.gate, lr);
            apply(&mut weights.structure_proj, &grads.structure_proj, lr);
            apply(&mut weights.combine, &grads.combine, lr);
        }
        history.push(epoch_loss / seen as f64);
    }
    Ok((weights, history))
}

fn apply(params: &mut [f64], grads: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

/// Compares analytic gradients with central finite differences (h = 1e-5)
/// over a random subsample of parameters; returns the max relative error.
pub fn grad_check(
    weights: &ModelWeights,
    pairs: &[TrainingPair],
    samples: usize,
    seed: u64,
) -> Result<f64, TrainError> {
    let corpus = build_corpus(pairs, &weights.hyper)?;
    if corpus.positives.is_empty() {
        return Err(TrainError::NoPositives);
    }
    let all: Vec<usize> = (0..corpus.positives.len()).collect();
    let items = make_batch(&corpus, &all);
    let (_, grads) = batch_backward(weights, &corpus, &items)?;
    let flat_analytic = |i: usize| -> f64 {
        let mut i = i;
        for slab in [&grads.experts, &grads.gate, &grads.structure_proj, &grads.combine] {
            if i < slab.len() {
                return slab[i];
            }
            i -= slab.len();
        }
        unreachable!()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = weights.param_count();
    let h = 1e-5;
    let mut w = weights.clone();
    let mut max_rel = 0.0_f64;
    for _ in 0..samples {
        let idx = rng.gen_range(0..n);
        let original = w.param(idx);
        *w.param_mut(idx) = original + h;
        let plus = batch_loss(&w, &corpus, &items)?;
        *w.param_mut(idx) = original - h;
        let minus = batch_loss(&w, &corpus, &items)?;
        *w.param_mut(idx) = original;
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = flat_analytic(idx);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
