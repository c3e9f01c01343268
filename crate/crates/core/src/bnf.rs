//! BNF grammar files: one rule per line, `::=` between head and body,
//! alternatives separated by `|`, nonterminals in angle brackets.
//!
//! Conventions understood by the loader:
//! - Builtin lexical nonterminals `<identifier>`, `<quoted_identifier>`,
//!   `<number>` and `<string>` match token classes and need no definition.
//! - `<empty>` marks an epsilon alternative.
//! - Terminals are bare words (keywords, matched case-insensitively) or
//!   double-quoted spellings for punctuation and operators.
//! - A rule named `<reserved_word>` lists the words that plain identifiers
//!   must not shadow; it is collected into a set rather than parsed against.
//! - Rule names starting with `_` are structural helpers: their matches are
//!   spliced into the parent node instead of producing a tree node.

use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    /// Reference to another rule.
    Nonterminal(String),
    /// Literal keyword or symbol, matched case-insensitively.
    Terminal(String),
    /// Unquoted identifier token that is not a reserved word.
    Identifier,
    QuotedIdentifier,
    Number,
    StringLit,
}

impl Term {
    pub fn label(&self) -> String {
        match self {
            Term::Nonterminal(n) => format!("nt:{n}"),
            Term::Terminal(t) => format!("t:{}", t.to_ascii_uppercase()),
            Term::Identifier => "c:identifier".to_string(),
            Term::QuotedIdentifier => "c:quoted_identifier".to_string(),
            Term::Number => "c:number".to_string(),
            Term::StringLit => "c:string".to_string(),
        }
    }
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Term::Nonterminal(n) => write!(f, "<{n}>"),
            Term::Terminal(t) => write!(f, "{t}"),
            Term::Identifier => write!(f, "<identifier>"),
            Term::QuotedIdentifier => write!(f, "<quoted_identifier>"),
            Term::Number => write!(f, "<number>"),
            Term::StringLit => write!(f, "<string>"),
        }
    }
}

/// One alternative: a sequence of terms. Empty sequence is epsilon.
pub type Alternative = Vec<Term>;

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub alternatives: Vec<Alternative>,
}

impl Rule {
    /// Helper rules are spliced into their parent instead of forming nodes.
    pub fn is_hidden(&self) -> bool {
        self.name.starts_with('_')
    }
}

#[derive(Debug, Clone)]
pub struct Grammar {
    rules: Vec<Rule>,
    index: HashMap<String, usize>,
    reserved: HashSet<String>,
    start: String,
}

#[derive(Debug, thiserror::Error)]
pub enum BnfError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("rule <{rule}> references undefined nonterminal <{referenced}>")]
    Undefined { rule: String, referenced: String },
    #[error("duplicate rule <{0}>")]
    Duplicate(String),
    #[error("grammar has no <{0}> start rule")]
    MissingStart(String),
    #[error("cannot read grammar: {0}")]
    Io(#[from] std::io::Error),
}

pub const START_RULE: &str = "query";
const RESERVED_RULE: &str = "reserved_word";

impl Grammar {
    pub fn parse(text: &str) -> Result<Grammar, BnfError> {
        let mut rules: Vec<Rule> = Vec::new();
        let mut index = HashMap::new();
        let mut reserved = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (head, body) = line.split_once("::=").ok_or_else(|| BnfError::Syntax {
                line: lineno + 1,
                msg: "missing `::=`".to_string(),
            })?;
            let name = parse_rule_name(head.trim(), lineno + 1)?;
            let alternatives = parse_alternatives(body, lineno + 1)?;
            if name == RESERVED_RULE {
                for alt in &alternatives {
                    for term in alt {
                        if let Term::Terminal(word) = term {
                            reserved.insert(word.to_ascii_uppercase());
                        }
                    }
                }
                continue;
            }
            if index.contains_key(&name) {
                return Err(BnfError::Duplicate(name));
            }
            index.insert(name.clone(), rules.len());
            rules.push(Rule { name, alternatives });
        }
        let grammar = Grammar {
            rules,
            index,
            reserved,
            start: START_RULE.to_string(),
        };
        grammar.check_references()?;
        Ok(grammar)
    }

    pub fn load(path: &std::path::Path) -> Result<Grammar, BnfError> {
        Grammar::parse(&std::fs::read_to_string(path)?)
    }

    fn check_references(&self) -> Result<(), BnfError> {
        if !self.index.contains_key(&self.start) {
            return Err(BnfError::MissingStart(self.start.clone()));
        }
        for rule in &self.rules {
            for alt in &rule.alternatives {
                for term in alt {
                    if let Term::Nonterminal(n) = term {
                        if !self.index.contains_key(n) {
                            return Err(BnfError::Undefined {
                                rule: rule.name.clone(),
                                referenced: n.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.index.get(name).map(|&i| &self.rules[i])
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn is_reserved(&self, word: &str) -> bool {
        self.reserved.contains(&word.to_ascii_uppercase())
    }

    pub fn has_rule(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }
}

fn parse_rule_name(head: &str, line: usize) -> Result<String, BnfError> {
    let inner = head
        .strip_prefix('<')
        .and_then(|h| h.strip_suffix('>'))
        .ok_or_else(|| BnfError::Syntax {
            line,
            msg: format!("rule head `{head}` must be <name>"),
        })?;
    if inner.is_empty() {
        return Err(BnfError::Syntax { line, msg: "empty rule name".to_string() });
    }
    Ok(inner.to_string())
}

/// Parses a rule body (or a standalone signature fragment) into alternatives.
pub fn parse_alternatives(body: &str, line: usize) -> Result<Vec<Alternative>, BnfError> {
    let mut alternatives = Vec::new();
    for alt_text in split_alternatives(body) {
        let mut terms = Vec::new();
        let mut is_epsilon = false;
        for token in split_terms(&alt_text, line)? {
            match token {
                BodyToken::Angle(name) => match name.as_str() {
                    "empty" => is_epsilon = true,
                    "identifier" => terms.push(Term::Identifier),
                    "quoted_identifier" => terms.push(Term::QuotedIdentifier),
                    "number" => terms.push(Term::Number),
                    "string" => terms.push(Term::StringLit),
                    _ => terms.push(Term::Nonterminal(name)),
                },
                BodyToken::Quoted(t) | BodyToken::Bare(t) => terms.push(Term::Terminal(t)),
            }
        }
        if is_epsilon && !terms.is_empty() {
            return Err(BnfError::Syntax {
                line,
                msg: "<empty> cannot be combined with other terms".to_string(),
            });
        }
        alternatives.push(terms);
    }
    if alternatives.is_empty() {
        return Err(BnfError::Syntax { line, msg: "rule has no alternatives".to_string() });
    }
    Ok(alternatives)
}

/// Splits on `|` outside of double quotes.
fn split_alternatives(body: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    for c in body.chars() {
        match c {
            '"' => {
                in_quotes = !in_quotes;
                current.push(c);
            }
            '|' if !in_quotes => {
                parts.push(current.clone());
                current.clear();
            }
            _ => current.push(c),
        }
    }
    parts.push(current);
    parts
}

enum BodyToken {
    Angle(String),
    Quoted(String),
    Bare(String),
}

fn split_terms(alt: &str, line: usize) -> Result<Vec<BodyToken>, BnfError> {
    let mut out = Vec::new();
    let mut chars = alt.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        match c {
            '<' => {
                let mut name = String::new();
                let mut closed = false;
                for (_, ch) in chars.by_ref() {
                    if ch == '>' {
                        closed = true;
                        break;
                    }
                    name.push(ch);
                }
                if !closed {
                    return Err(BnfError::Syntax { line, msg: format!("unclosed `<` at column {i}") });
                }
                out.push(BodyToken::Angle(name));
            }
            '"' => {
                let mut text = String::new();
                let mut closed = false;
                for (_, ch) in chars.by_ref() {
                    if ch == '"' {
                        closed = true;
                        break;
                    }
                    text.push(ch);
                }
                if !closed {
                    return Err(BnfError::Syntax { line, msg: format!("unclosed `\"` at column {i}") });
                }
                out.push(BodyToken::Quoted(text));
            }
            _ => {
                let mut word = String::new();
                word.push(c);
                while let Some(&(_, ch)) = chars.peek() {
                    if ch.is_whitespace() || ch == '<' || ch == '"' || ch == '|' {
                        break;
                    }
                    word.push(ch);
                    chars.next();
                }
                out.push(BodyToken::Bare(word));
            }
        }
    }
    Ok(out)
}

/// Parses a KB signature fragment: a rule body without the `<name> ::=` head.
pub fn parse_signature(text: &str) -> Result<Vec<Alternative>, BnfError> {
    parse_alternatives(text, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rules_and_reserved_set() {
        let g = Grammar::parse(
            "# demo\n\
             <query> ::= SELECT <item>\n\
             <item> ::= <identifier> | <number> | <empty>\n\
             <reserved_word> ::= SELECT | FROM\n",
        )
        .unwrap();
        assert!(g.is_reserved("select"));
        assert!(!g.is_reserved("nvl"));
        let item = g.rule("item").unwrap();
        assert_eq!(item.alternatives.len(), 3);
        assert!(item.alternatives[2].is_empty());
    }

    #[test]
    fn quoted_terminals_keep_symbols() {
        let g = Grammar::parse(
            "<query> ::= <a> \"||\" <a>\n<a> ::= <identifier>\n",
        )
        .unwrap();
        assert_eq!(
            g.rule("query").unwrap().alternatives[0][1],
            Term::Terminal("||".to_string())
        );
    }

    #[test]
    fn undefined_reference_is_an_error() {
        let err = Grammar::parse("<query> ::= <nope>\n").unwrap_err();
        assert!(matches!(err, BnfError::Undefined { .. }));
    }

    #[test]
    fn missing_start_rule_is_an_error() {
        let err = Grammar::parse("<other> ::= X\n").unwrap_err();
        assert!(matches!(err, BnfError::MissingStart(_)));
    }

    #[test]
    fn signature_fragments_parse() {
        let alts = parse_signature("NVL \"(\" <expr> \",\" <expr> \")\"").unwrap();
        assert_eq!(alts.len(), 1);
        assert_eq!(alts[0].len(), 6);
        assert_eq!(alts[0][0], Term::Terminal("NVL".to_string()));
    }

    #[test]
    fn pipe_inside_quotes_is_literal() {
        let alts = parse_signature("<expr> \"||\" <expr>").unwrap();
        assert_eq!(alts.len(), 1);
    }
}
