//! Locations of the data files shipped with the repository (grammars,
//! knowledge base, rule store, pattern tables) and lazily loaded handles
//! shared by tests and CLI defaults.

use crate::syntax::SqlSyntax;
use std::path::PathBuf;
use std::sync::OnceLock;

/// Root of the bundled `data/` directory. Overridable with `SQLBRIDGE_DATA`.
pub fn data_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("SQLBRIDGE_DATA") {
        return PathBuf::from(dir);
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn grammars_dir() -> PathBuf {
    data_dir().join("grammars")
}

pub fn kb_path() -> PathBuf {
    data_dir().join("kb.jsonl")
}

pub fn rules_path() -> PathBuf {
    data_dir().join("rules.jsonl")
}

pub fn synonyms_path() -> PathBuf {
    data_dir().join("synonyms.txt")
}

pub fn error_patterns_path() -> PathBuf {
    data_dir().join("error_patterns.jsonl")
}

pub fn corpus_path() -> PathBuf {
    data_dir().join("corpus.jsonl")
}

/// Grammars for all three dialects, loaded once.
pub fn syntax() -> &'static SqlSyntax {
    static SYNTAX: OnceLock<SqlSyntax> = OnceLock::new();
    SYNTAX.get_or_init(|| {
        SqlSyntax::load_dir(&grammars_dir()).expect("bundled grammars must load")
    })
}

/// The shipped knowledge base, loaded once.
pub fn kb() -> &'static crate::kb::KnowledgeBase {
    static KB: OnceLock<crate::kb::KnowledgeBase> = OnceLock::new();
    KB.get_or_init(|| crate::kb::KnowledgeBase::load(&kb_path()).expect("bundled kb must load"))
}

/// The shipped rewrite-rule store, loaded once.
pub fn rules() -> &'static crate::engine::rules::RuleStore {
    static RULES: OnceLock<crate::engine::rules::RuleStore> = OnceLock::new();
    RULES.get_or_init(|| {
        crate::engine::rules::RuleStore::load(&rules_path()).expect("bundled rules must load")
    })
}

/// One corpus record.
#[derive(Debug, Clone, serde::Deserialize)]
pub struct CorpusEntry {
    pub dialect: crate::Dialect,
    pub sql: String,
}

/// The bundled 50-query corpus.
pub fn corpus() -> Vec<CorpusEntry> {
    let text = std::fs::read_to_string(corpus_path()).expect("bundled corpus must load");
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("corpus record"))
        .collect()
}
