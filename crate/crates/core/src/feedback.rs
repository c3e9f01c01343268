//! Execution checking against a target database connector and classification
//! of failures into five error categories.
//!
//! The stub connector is parser-backed: a query passes when the target
//! grammar and function registry accept it, and never touches a network.
//! Classification is driven by an ordered pattern table shipped as data, so
//! new DBMS message formats are a data change, not a code change.

use crate::syntax::{FunctionRegistry, SqlSyntax, ValidationReport};
use crate::Dialect;
use regex::RegexBuilder;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    SyntaxRuleViolation,
    FunctionsAndOperators,
    KeywordMisuse,
    DataTypeMismatch,
    Other,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExecutionReport {
    pub ok: bool,
    pub error_message: Option<String>,
    pub category: Option<ErrorCategory>,
}

impl ExecutionReport {
    pub fn passed() -> ExecutionReport {
        ExecutionReport { ok: true, error_message: None, category: None }
    }

    pub fn failed(message: String, category: ErrorCategory) -> ExecutionReport {
        ExecutionReport { ok: false, error_message: Some(message), category: Some(category) }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConnectorError {
    #[error("connector unavailable: {0}")]
    Unavailable(String),
}

/// A database connector bound to one dialect.
pub trait DbConnector: Send + Sync {
    fn check(&self, sql: &str) -> Result<ExecutionReport, ConnectorError>;
}

/// Dialect-parameterized checking, the shape the engine consumes.
pub trait QueryChecker: Send + Sync {
    fn check(&self, sql: &str, dialect: Dialect) -> Result<ExecutionReport, ConnectorError>;
}

#[derive(Debug, thiserror::Error)]
pub enum PatternError {
    #[error("pattern record {record}: {reason}")]
    Schema { record: usize, reason: String },
    #[error("cannot read pattern table: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Deserialize)]
struct PatternRecord {
    pattern: String,
    category: ErrorCategory,
}

/// Ordered case-insensitive regex patterns mapping error messages to the
/// five categories; the first match wins and `other` is the catch-all.
#[derive(Clone)]
pub struct ErrorClassifier {
    patterns: Vec<(regex::Regex, ErrorCategory)>,
}

impl ErrorClassifier {
    pub fn load(path: &Path) -> Result<ErrorClassifier, PatternError> {
        let text = std::fs::read_to_string(path)?;
        let mut patterns = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let record: PatternRecord =
                serde_json::from_str(line).map_err(|e| PatternError::Schema {
                    record: lineno + 1,
                    reason: e.to_string(),
                })?;
            let regex = RegexBuilder::new(&record.pattern)
                .case_insensitive(true)
                .build()
                .map_err(|e| PatternError::Schema {
                    record: lineno + 1,
                    reason: format!("bad regex: {e}"),
                })?;
            patterns.push((regex, record.category));
        }
        Ok(ErrorClassifier { patterns })
    }

    pub fn empty() -> ErrorClassifier {
        ErrorClassifier { patterns: Vec::new() }
    }

    /// Total and deterministic: every message maps to exactly one category.
    pub fn classify(&self, message: &str, violations: Option<&ValidationReport>) -> ErrorCategory {
        let mut haystack = message.to_string();
        if let Some(report) = violations {
            for v in &report.violations {
                haystack.push('\n');
                haystack.push_str(&v.message);
            }
        }
        for (regex, category) in &self.patterns {
            if regex.is_match(&haystack) {
                return *category;
            }
        }
        ErrorCategory::Other
    }
}

/// Parser-backed connector: accepts exactly what parse+validate accept.
pub struct StubConnector<'a> {
    checker: &'a StubChecker<'a>,
    dialect: Dialect,
}

impl<'a> StubConnector<'a> {
    pub fn new(checker: &'a StubChecker<'a>, dialect: Dialect) -> StubConnector<'a> {
        StubConnector { checker, dialect }
    }
}

impl DbConnector for StubConnector<'_> {
    fn check(&self, sql: &str) -> Result<ExecutionReport, ConnectorError> {
        self.checker.check(sql, self.dialect)
    }
}

pub struct StubChecker<'a> {
    syntax: &'a SqlSyntax,
    registry: FunctionRegistry,
    classifier: ErrorClassifier,
}

impl<'a> StubChecker<'a> {
    pub fn new(
        syntax: &'a SqlSyntax,
        registry: FunctionRegistry,
        classifier: ErrorClassifier,
    ) -> StubChecker<'a> {
        StubChecker { syntax, registry, classifier }
    }

    pub fn classifier(&self) -> &ErrorClassifier {
        &self.classifier
    }
}

impl QueryChecker for StubChecker<'_> {
    fn check(&self, sql: &str, dialect: Dialect) -> Result<ExecutionReport, ConnectorError> {
        match self.syntax.parse(sql, dialect) {
            Err(e) => {
                let message = e.to_string();
                let category = self.classifier.classify(&message, None);
                Ok(ExecutionReport::failed(message, category))
            }
            Ok(tree) => {
                let report = self.syntax.validate(&tree, dialect, &self.registry);
                if report.ok {
                    Ok(ExecutionReport::passed())
                } else {
                    let message = report.summary();
                    let category = self.classifier.classify(&message, Some(&report));
                    Ok(ExecutionReport::failed(message, category))
                }
            }
        }
    }
}

/// Checks one statement through a connector.
pub fn check(sql: &str, connector: &dyn DbConnector) -> Result<ExecutionReport, ConnectorError> {
    connector.check(sql)
}
