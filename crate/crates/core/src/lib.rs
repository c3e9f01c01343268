//! Hybrid SQL dialect translation between PostgreSQL, MySQL and Oracle.
//!
//! The pipeline parses a query into a dialect-tagged syntax tree, segments it
//! into functional snippets (function calls, dialect-specific operators,
//! row-limit clauses, type expressions), and translates each snippet with
//! deterministic rewrite rules first and an LLM fallback enriched with
//! embedding-matched syntax specifications. Snippets that cannot be translated
//! at their own scope are widened to their parent node until the target
//! dialect's grammar accepts the result.
//!
//! Modules map onto the subsystems:
//! - [`syntax`]: BNF-grammar-driven parsing, validation and rendering
//! - [`segment`]: snippet extraction, normalization, abstraction, reassembly
//! - [`kb`]: the per-dialect syntax element knowledge base
//! - [`embed`]: the cross-dialect embedding model and its trainer
//! - [`engine`]: the hybrid rule/LLM translation orchestrator
//! - [`feedback`]: execution checking and error taxonomy classification

pub mod bnf;
pub mod bundled;
pub mod embed;
pub mod engine;
pub mod feedback;
pub mod kb;
pub mod lexer;
pub mod segment;
pub mod syntax;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// One of the three supported SQL dialects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Postgresql,
    Mysql,
    Oracle,
}

impl Dialect {
    pub const ALL: [Dialect; 3] = [Dialect::Postgresql, Dialect::Mysql, Dialect::Oracle];

    /// Canonical lowercase name, also used for grammar file names.
    pub fn name(&self) -> &'static str {
        match self {
            Dialect::Postgresql => "postgresql",
            Dialect::Mysql => "mysql",
            Dialect::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown dialect `{0}`; expected postgresql, mysql or oracle")]
pub struct DialectParseError(String);

impl FromStr for Dialect {
    type Err = DialectParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "postgresql" | "postgres" | "pg" => Ok(Dialect::Postgresql),
            "mysql" => Ok(Dialect::Mysql),
            "oracle" => Ok(Dialect::Oracle),
            other => Err(DialectParseError(other.to_string())),
        }
    }
}
