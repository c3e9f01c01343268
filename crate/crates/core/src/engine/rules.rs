//! Rewrite-rule store: deterministic template rules that play the role of a
//! rule-based translation tool inside the hybrid engine.
//!
//! Patterns are snippet templates with `<arg_n>` placeholders. A placeholder
//! captures one balanced token run; everything else must match token-wise
//! (words case-insensitively). Literal tokens in a pattern therefore anchor
//! rules to concrete arguments, which is how the fixed TO_CHAR format subset
//! is expressed. Rules apply in store order and the first match wins.

use crate::lexer::{self, Token, TokenKind};
use crate::segment::BindingMap;
use crate::Dialect;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewriteRule {
    pub source_dialect: Dialect,
    pub target_dialect: Dialect,
    /// Keyword the rule is about, e.g. `NVL`.
    pub keyword: String,
    pub pattern: String,
    pub replacement: String,
    /// Keyword introduced on the target side, when the rule maps one element
    /// to another; used to derive training equivalences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_keyword: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("rule record {record}: {reason}")]
    Schema { record: usize, reason: String },
    #[error("cannot read rule store: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Default, Clone)]
pub struct RuleStore {
    rules: Vec<RewriteRule>,
}

impl RuleStore {
    pub fn new() -> RuleStore {
        RuleStore::default()
    }

    pub fn load(path: &Path) -> Result<RuleStore, RuleError> {
        let text = std::fs::read_to_string(path)?;
        let mut rules = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let rule: RewriteRule = serde_json::from_str(line).map_err(|e| RuleError::Schema {
                record: lineno + 1,
                reason: e.to_string(),
            })?;
            // reject patterns the source dialect cannot even tokenize
            if let Err(e) = lexer::tokenize(&rule.pattern, rule.source_dialect) {
                return Err(RuleError::Schema {
                    record: lineno + 1,
                    reason: format!("pattern does not tokenize: {e}"),
                });
            }
            rules.push(rule);
        }
        Ok(RuleStore { rules })
    }

    pub fn from_rules(rules: Vec<RewriteRule>) -> RuleStore {
        RuleStore { rules }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    /// Rules for a dialect pair, in store order.
    pub fn rules_for(&self, source: Dialect, target: Dialect) -> Vec<&RewriteRule> {
        self.rules
            .iter()
            .filter(|r| r.source_dialect == source && r.target_dialect == target)
            .collect()
    }

    /// First matching rule applied to the snippet text, if any.
    pub fn apply_first(&self, text: &str, source: Dialect, target: Dialect) -> Option<String> {
        self.apply_first_with_rule(text, source, target).map(|(t, _)| t)
    }

    pub fn apply_first_with_rule(
        &self,
        text: &str,
        source: Dialect,
        target: Dialect,
    ) -> Option<(String, &RewriteRule)> {
        let tokens = lexer::tokenize(text, source).ok()?;
        for rule in self.rules_for(source, target) {
            if let Some(bindings) = match_pattern(&rule.pattern, &tokens, text, source) {
                return Some((substitute(&rule.replacement, &bindings), rule));
            }
        }
        None
    }

    /// (source dialect, keyword, target dialect, keyword) pairs implied by
    /// rules that map one element onto another; feeds contrastive training.
    pub fn equivalence_pairs(&self) -> Vec<(Dialect, String, Dialect, String)> {
        self.rules
            .iter()
            .filter_map(|r| {
                r.target_keyword.as_ref().map(|tk| {
                    (
                        r.source_dialect,
                        r.keyword.to_ascii_uppercase(),
                        r.target_dialect,
                        tk.to_ascii_uppercase(),
                    )
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
enum PatternAtom {
    Placeholder(String),
    Token(Token),
}

fn pattern_atoms(pattern: &str, dialect: Dialect) -> Option<Vec<PatternAtom>> {
    let tokens = lexer::tokenize(pattern, dialect).ok()?;
    let mut atoms = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        // `<word_n>` lexes as three tokens: `<`, word, `>`
        if i + 2 < tokens.len()
            && tokens[i].text == "<"
            && tokens[i + 2].text == ">"
            && tokens[i + 1].kind == TokenKind::Word
            && is_placeholder_name(&tokens[i + 1].text)
        {
            atoms.push(PatternAtom::Placeholder(tokens[i + 1].text.to_lowercase()));
            i += 3;
        } else {
            atoms.push(PatternAtom::Token(tokens[i].clone()));
            i += 1;
        }
    }
    Some(atoms)
}

fn is_placeholder_name(s: &str) -> bool {
    match s.rsplit_once('_') {
        Some((stem, n)) => {
            !stem.is_empty()
                && stem.chars().all(|c| c.is_ascii_lowercase())
                && !n.is_empty()
                && n.chars().all(|c| c.is_ascii_digit())
        }
        None => false,
    }
}

fn token_eq(pattern: &Token, actual: &Token) -> bool {
    if pattern.kind != actual.kind {
        return false;
    }
    match pattern.kind {
        TokenKind::Word | TokenKind::String => pattern.text.eq_ignore_ascii_case(&actual.text),
        _ => pattern.text == actual.text,
    }
}

/// Matches the whole token sequence against the pattern, capturing balanced
/// token runs for placeholders. Shortest captures are tried first.
fn match_pattern(
    pattern: &str,
    tokens: &[Token],
    text: &str,
    dialect: Dialect,
) -> Option<BindingMap> {
    let atoms = pattern_atoms(pattern, dialect)?;
    let mut bindings = BindingMap::new();
    if match_at(&atoms, 0, tokens, 0, text, &mut bindings) {
        Some(bindings)
    } else {
        None
    }
}

fn match_at(
    atoms: &[PatternAtom],
    ai: usize,
    tokens: &[Token],
    ti: usize,
    text: &str,
    bindings: &mut BindingMap,
) -> bool {
    if ai == atoms.len() {
        return ti == tokens.len();
    }
    match &atoms[ai] {
        PatternAtom::Token(p) => {
            if ti < tokens.len() && token_eq(p, &tokens[ti]) {
                match_at(atoms, ai + 1, tokens, ti + 1, text, bindings)
            } else {
                false
            }
        }
        PatternAtom::Placeholder(name) => {
            let mut depth = 0i32;
            for end in (ti + 1)..=tokens.len() {
                match tokens[end - 1].text.as_str() {
                    "(" => depth += 1,
                    ")" => depth -= 1,
                    _ => {}
                }
                if depth < 0 {
                    return false;
                }
                if depth > 0 {
                    continue;
                }
                let capture = text[tokens[ti].start..tokens[end - 1].end].to_string();
                if let Some(existing) = bindings.get(name) {
                    if existing != &capture {
                        continue;
                    }
                    if match_at(atoms, ai + 1, tokens, end, text, bindings) {
                        return true;
                    }
                } else {
                    bindings.insert(name.clone(), capture);
                    if match_at(atoms, ai + 1, tokens, end, text, bindings) {
                        return true;
                    }
                    bindings.remove(name);
                }
            }
            false
        }
    }
}

/// Substitutes captured bindings into the replacement text. Unlike the
/// restore used for LLM output, rules are allowed to drop captures.
fn substitute(replacement: &str, bindings: &BindingMap) -> String {
    let mut out = replacement.to_string();
    for (name, lexeme) in bindings {
        out = out.replace(&format!("<{name}>"), lexeme);
    }
    out
}
