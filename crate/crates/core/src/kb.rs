//! Knowledge base of per-dialect syntax element specifications.
//!
//! Entries are hand-extracted from the official PostgreSQL, MySQL and Oracle
//! documentation and shipped as a JSON Lines file (one record per object).
//! The store is immutable after load and shared read-only across tasks.

use crate::bnf;
use crate::syntax::FunctionRegistry;
use crate::Dialect;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementClass {
    Function,
    Operator,
    Keyword,
    Type,
}

/// A labelled cross-dialect equivalence. These hand labels exist only to
/// build training pairs and evaluation ground truth; the matcher never
/// reads them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equivalence {
    pub dialect: Dialect,
    pub keyword: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntaxElementSpec {
    pub dialect: Dialect,
    /// Upper-case element keyword, e.g. `NVL` or `||`.
    pub keyword: String,
    pub element_class: ElementClass,
    /// BNF fragment describing the element's surface form.
    pub signature: String,
    /// Textual specification from the official documentation.
    pub description: String,
    #[serde(default)]
    pub examples: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub equivalences: Vec<Equivalence>,
}

impl SyntaxElementSpec {
    pub fn key(&self) -> (Dialect, String, ElementClass) {
        (self.dialect, self.keyword.clone(), self.element_class)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("record {record}: {reason}")]
    Schema { record: usize, reason: String },
    #[error("cannot read knowledge base: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Default, Clone)]
pub struct KnowledgeBase {
    entries: Vec<SyntaxElementSpec>,
    index: HashMap<(Dialect, String), Vec<usize>>,
}

impl KnowledgeBase {
    pub fn new() -> KnowledgeBase {
        KnowledgeBase::default()
    }

    pub fn load(path: &Path) -> Result<KnowledgeBase, KbError> {
        let mut kb = KnowledgeBase::new();
        kb.ingest(path)?;
        Ok(kb)
    }

    /// Merges records from a JSONL file; entries with an existing
    /// (dialect, keyword, element_class) key are replaced. Returns the number
    /// of records read from the file.
    pub fn ingest(&mut self, path: &Path) -> Result<usize, KbError> {
        let text = std::fs::read_to_string(path)?;
        let mut count = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let record = lineno + 1;
            let mut spec: SyntaxElementSpec =
                serde_json::from_str(line).map_err(|e| KbError::Schema {
                    record,
                    reason: e.to_string(),
                })?;
            spec.keyword = spec.keyword.to_ascii_uppercase();
            if spec.description.trim().is_empty() {
                return Err(KbError::Schema {
                    record,
                    reason: "description must be non-empty".to_string(),
                });
            }
            if let Err(e) = bnf::parse_signature(&spec.signature) {
                return Err(KbError::Schema {
                    record,
                    reason: format!("signature does not parse: {e}"),
                });
            }
            self.upsert(spec);
            count += 1;
        }
        self.rebuild_index();
        Ok(count)
    }

    fn upsert(&mut self, spec: SyntaxElementSpec) {
        let key = spec.key();
        if let Some(existing) = self.entries.iter_mut().find(|e| e.key() == key) {
            *existing = spec;
        } else {
            self.entries.push(spec);
        }
    }

    fn rebuild_index(&mut self) {
        self.index.clear();
        for (i, spec) in self.entries.iter().enumerate() {
            self.index
                .entry((spec.dialect, spec.keyword.clone()))
                .or_default()
                .push(i);
        }
    }

    /// Case-insensitive exact keyword lookup.
    pub fn lookup(&self, dialect: Dialect, keyword: &str) -> Vec<&SyntaxElementSpec> {
        self.index
            .get(&(dialect, keyword.to_ascii_uppercase()))
            .map(|ids| ids.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    /// All entries of a dialect in keyword-lexicographic order.
    pub fn elements_of(&self, dialect: Dialect) -> Vec<&SyntaxElementSpec> {
        let mut v: Vec<&SyntaxElementSpec> =
            self.entries.iter().filter(|e| e.dialect == dialect).collect();
        v.sort_by(|a, b| {
            a.keyword.cmp(&b.keyword).then_with(|| {
                format!("{:?}", a.element_class).cmp(&format!("{:?}", b.element_class))
            })
        });
        v
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[SyntaxElementSpec] {
        &self.entries
    }

    /// Function keywords per dialect, for grammar validation.
    pub fn function_registry(&self) -> FunctionRegistry {
        let mut registry = FunctionRegistry::new();
        for spec in &self.entries {
            if spec.element_class == ElementClass::Function {
                registry.insert(spec.dialect, &spec.keyword);
            }
        }
        registry
    }

    /// Keywords that drive snippet segmentation for a dialect: everything the
    /// knowledge base knows about, across all element classes.
    pub fn segmentation_keywords(&self, dialect: Dialect) -> Vec<String> {
        let mut v: Vec<String> = self
            .entries
            .iter()
            .filter(|e| e.dialect == dialect)
            .map(|e| e.keyword.clone())
            .collect();
        v.sort();
        v.dedup();
        v
    }
}
