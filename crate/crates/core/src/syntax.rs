//! Grammar-driven parsing, validation and rendering of SQL syntax trees.
//!
//! Each dialect is described by a BNF file (see `data/grammars/`). Parsing
//! interprets the grammar directly over the token stream with ordered-choice
//! backtracking, so adding or adjusting a construct is a data change. The
//! resulting tree keeps every token as a leaf, which makes rendering a
//! deterministic walk and lets subtree spans map back into the source text.
//!
//! Validation re-renders the tree and parses the result under the target
//! dialect's grammar, then checks every generic function call against that
//! dialect's function registry. This means a tree parsed as MySQL can be
//! checked against PostgreSQL: grammar-level mismatches (say `LIMIT` under
//! Oracle) and unknown functions both come back as violations with a path
//! into the original tree.

use crate::bnf::{Grammar, Term};
use crate::lexer::{self, LexError, Token, TokenKind};
use crate::Dialect;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

/// Sequence of child indices from the root; the empty path is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct NodePath(pub Vec<usize>);

impl NodePath {
    pub fn root() -> NodePath {
        NodePath(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, index: usize) -> NodePath {
        let mut v = self.0.clone();
        v.push(index);
        NodePath(v)
    }

    pub fn parent(&self) -> Option<NodePath> {
        if self.0.is_empty() {
            None
        } else {
            Some(NodePath(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// True when `self` is `other` or an ancestor of `other`.
    pub fn is_prefix_of(&self, other: &NodePath) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{idx}")?;
        }
        write!(f, "]")
    }
}

/// How a leaf token was matched by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafClass {
    /// Matched a terminal: rendered upper-case.
    Keyword,
    /// Matched `<identifier>`: rendered verbatim.
    Identifier,
    /// Matched `<quoted_identifier>`: kept byte-exact including quotes.
    QuotedIdentifier,
    Number,
    StringLit,
}

#[derive(Debug, Clone)]
pub struct SyntaxNode {
    /// Grammar symbol: rule name for interior nodes, terminal spelling or
    /// token class name for leaves.
    pub kind: String,
    pub children: Vec<SyntaxNode>,
    /// Original lexeme; present iff `children` is empty.
    pub token: Option<String>,
    pub path: NodePath,
    /// Byte span in the source text this node was parsed from.
    pub span: (usize, usize),
    pub leaf_class: Option<LeafClass>,
}

impl SyntaxNode {
    fn leaf(kind: String, token: &Token, class: LeafClass) -> SyntaxNode {
        SyntaxNode {
            kind,
            children: Vec::new(),
            token: Some(token.text.clone()),
            path: NodePath::root(),
            span: (token.start, token.end),
            leaf_class: Some(class),
        }
    }

    fn interior(kind: &str, children: Vec<SyntaxNode>) -> SyntaxNode {
        let span = (
            children.first().map(|c| c.span.0).unwrap_or(0),
            children.last().map(|c| c.span.1).unwrap_or(0),
        );
        SyntaxNode {
            kind: kind.to_string(),
            children,
            token: None,
            path: NodePath::root(),
            span,
            leaf_class: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Canonical text of a leaf: keywords upper-cased, everything else verbatim.
    pub fn canonical_token(&self) -> Option<String> {
        let tok = self.token.as_ref()?;
        Some(match self.leaf_class {
            Some(LeafClass::Keyword) => tok.to_ascii_uppercase(),
            _ => tok.clone(),
        })
    }

    /// Pre-order traversal over this node and all descendants.
    pub fn walk<'a>(&'a self, out: &mut Vec<&'a SyntaxNode>) {
        out.push(self);
        for child in &self.children {
            child.walk(out);
        }
    }

    fn assign_paths(&mut self, path: NodePath) {
        self.path = path;
        for (i, child) in self.children.iter_mut().enumerate() {
            child.assign_paths(self.path.child(i));
        }
    }

    fn same_shape(&self, other: &SyntaxNode) -> bool {
        if self.kind != other.kind || self.children.len() != other.children.len() {
            return false;
        }
        if self.is_leaf() != other.is_leaf() {
            return false;
        }
        if self.is_leaf() {
            match self.leaf_class {
                // keyword case is canonicalized by render
                Some(LeafClass::Keyword) => true,
                _ => self.token == other.token,
            }
        } else {
            self.children
                .iter()
                .zip(other.children.iter())
                .all(|(a, b)| a.same_shape(b))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntaxTree {
    pub root: SyntaxNode,
    pub dialect: Dialect,
    pub source_text: String,
}

impl SyntaxTree {
    /// Structural equality ignoring token spans and keyword case.
    pub fn isomorphic(&self, other: &SyntaxTree) -> bool {
        self.root.same_shape(&other.root)
    }

    pub fn nodes(&self) -> Vec<&SyntaxNode> {
        let mut out = Vec::new();
        self.root.walk(&mut out);
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SyntaxError {
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("syntax error at byte {offset}: found {found}, expected {}", expected.join(" | "))]
    Parse {
        offset: usize,
        found: String,
        expected: Vec<String>,
    },
    #[error("unsupported construct `{construct}` at byte {offset}: only single SELECT statements are covered")]
    UnsupportedConstruct { construct: String, offset: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("node {path} of kind `{kind}` has no rendering rule: {reason}")]
    MalformedNode {
        path: NodePath,
        kind: String,
        reason: &'static str,
    },
}

#[derive(Debug, thiserror::Error)]
#[error("path {path} does not resolve: index {index} out of range at depth {depth}")]
pub struct PathError {
    pub path: NodePath,
    pub index: usize,
    pub depth: usize,
}

/// One conformance failure found by [`SqlSyntax::validate`].
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub path: NodePath,
    pub expected: String,
    pub found: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passing() -> ValidationReport {
        ValidationReport { ok: true, violations: Vec::new() }
    }

    pub fn failing(violations: Vec<Violation>) -> ValidationReport {
        ValidationReport { ok: violations.is_empty(), violations }
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| v.message.clone())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Known function keywords per dialect, normally built from the knowledge
/// base so that extending a dialect never requires recompilation.
#[derive(Debug, Clone, Default)]
pub struct FunctionRegistry {
    functions: HashMap<Dialect, HashSet<String>>,
}

impl FunctionRegistry {
    pub fn new() -> FunctionRegistry {
        FunctionRegistry::default()
    }

    pub fn insert(&mut self, dialect: Dialect, keyword: &str) {
        self.functions
            .entry(dialect)
            .or_default()
            .insert(keyword.to_ascii_uppercase());
    }

    pub fn contains(&self, dialect: Dialect, keyword: &str) -> bool {
        self.functions
            .get(&dialect)
            .is_some_and(|s| s.contains(&keyword.to_ascii_uppercase()))
    }

    pub fn keywords(&self, dialect: Dialect) -> Vec<String> {
        let mut v: Vec<String> = self
            .functions
            .get(&dialect)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default();
        v.sort();
        v
    }
}

const MAX_DEPTH: usize = 200;

const UNSUPPORTED_STARTERS: [&str; 18] = [
    "INSERT", "UPDATE", "DELETE", "CREATE", "DROP", "ALTER", "MERGE", "TRUNCATE", "GRANT",
    "REVOKE", "WITH", "EXPLAIN", "SET", "SHOW", "DESCRIBE", "CALL", "COMMIT", "ROLLBACK",
];

/// The loaded grammars for all three dialects.
pub struct SqlSyntax {
    grammars: HashMap<Dialect, Grammar>,
}

impl SqlSyntax {
    /// Loads `postgresql.bnf`, `mysql.bnf` and `oracle.bnf` from a directory.
    pub fn load_dir(dir: &Path) -> Result<SqlSyntax, crate::bnf::BnfError> {
        let mut grammars = HashMap::new();
        for dialect in Dialect::ALL {
            let path = dir.join(format!("{}.bnf", dialect.name()));
            grammars.insert(dialect, Grammar::load(&path)?);
        }
        Ok(SqlSyntax { grammars })
    }

    pub fn grammar(&self, dialect: Dialect) -> &Grammar {
        &self.grammars[&dialect]
    }

    pub fn parse(&self, sql: &str, dialect: Dialect) -> Result<SyntaxTree, SyntaxError> {
        let tokens = lexer::tokenize(sql, dialect)?;
        if tokens.is_empty() {
            return Err(SyntaxError::EmptyInput);
        }
        if let Some(first) = tokens.first() {
            if first.kind == TokenKind::Word {
                let upper = first.text.to_ascii_uppercase();
                if UNSUPPORTED_STARTERS.contains(&upper.as_str()) {
                    return Err(SyntaxError::UnsupportedConstruct {
                        construct: upper,
                        offset: first.start,
                    });
                }
            }
        }
        let grammar = self.grammar(dialect);
        let mut parser = Peg {
            grammar,
            tokens: &tokens,
            furthest: 0,
            expected: BTreeSet::new(),
        };
        let result = parser.match_rule(grammar.start(), 0, 0);
        match result {
            Some((mut nodes, end)) if end == tokens.len() && nodes.len() == 1 => {
                let mut root = nodes.pop().unwrap();
                root.assign_paths(NodePath::root());
                Ok(SyntaxTree {
                    root,
                    dialect,
                    source_text: sql.to_string(),
                })
            }
            Some((_, end)) => {
                if end >= parser.furthest {
                    parser.furthest = end;
                    parser.expected = BTreeSet::from(["end of input".to_string()]);
                }
                Err(parser.error(sql))
            }
            None => Err(parser.error(sql)),
        }
    }

    /// Deterministic canonical rendering: keywords upper-cased, identifiers
    /// verbatim, single-space separation with punctuation glued.
    pub fn render(&self, tree: &SyntaxTree) -> Result<String, RenderError> {
        Ok(self.render_with_spans(tree)?.0)
    }

    /// Renders and also reports, for every node, its byte span in the output.
    pub fn render_with_spans(
        &self,
        tree: &SyntaxTree,
    ) -> Result<(String, HashMap<NodePath, (usize, usize)>), RenderError> {
        let mut leaves = Vec::new();
        collect_leaves(&tree.root, &tree.root.kind, 0, &mut leaves)?;
        let mut out = String::new();
        let mut leaf_spans: Vec<(NodePath, (usize, usize))> = Vec::new();
        for (i, leaf) in leaves.iter().enumerate() {
            if i > 0 && needs_space(&leaves[i - 1], leaf) {
                out.push(' ');
            }
            let start = out.len();
            out.push_str(&leaf.text);
            leaf_spans.push((leaf.path.clone(), (start, out.len())));
        }
        let by_leaf: HashMap<&NodePath, (usize, usize)> =
            leaf_spans.iter().map(|(p, s)| (p, *s)).collect();
        let mut spans = HashMap::new();
        fill_spans(&tree.root, &by_leaf, &mut spans);
        Ok((out, spans))
    }

    /// Checks a tree against a dialect's grammar and function registry. The
    /// dialect may differ from the one the tree was parsed with; that is how
    /// cross-dialect incompatibilities are detected.
    pub fn validate(
        &self,
        tree: &SyntaxTree,
        dialect: Dialect,
        registry: &FunctionRegistry,
    ) -> ValidationReport {
        let (rendered, spans) = match self.render_with_spans(tree) {
            Ok(r) => r,
            Err(e) => {
                return ValidationReport::failing(vec![Violation {
                    path: NodePath::root(),
                    expected: "renderable tree".to_string(),
                    found: "malformed node".to_string(),
                    message: e.to_string(),
                }])
            }
        };
        match self.parse(&rendered, dialect) {
            Err(err) => {
                let (offset, found, expected) = match &err {
                    SyntaxError::Parse { offset, found, expected } => {
                        (*offset, found.clone(), expected.join(" | "))
                    }
                    SyntaxError::UnsupportedConstruct { construct, offset } => {
                        (*offset, construct.clone(), "supported statement".to_string())
                    }
                    other => (0, other.to_string(), "parsable text".to_string()),
                };
                let path = deepest_at(&tree.root, &spans, offset);
                ValidationReport::failing(vec![Violation {
                    path,
                    expected,
                    found: found.clone(),
                    message: format!("syntax error in {dialect}: found {found} at byte {offset} of canonical form"),
                }])
            }
            Ok(reparsed) => {
                let mut violations = Vec::new();
                for node in reparsed.nodes() {
                    if node.kind == "func_call" {
                        let name = node
                            .children
                            .first()
                            .and_then(|c| c.token.as_ref())
                            .cloned()
                            .unwrap_or_default();
                        if !registry.contains(dialect, &name) {
                            let path = deepest_at(&tree.root, &spans, node.span.0);
                            violations.push(Violation {
                                path,
                                expected: format!("function known to {dialect}"),
                                found: name.to_ascii_uppercase(),
                                message: format!(
                                    "unknown function {} in {dialect}",
                                    name.to_ascii_uppercase()
                                ),
                            });
                        }
                    }
                }
                ValidationReport::failing(violations)
            }
        }
    }

    /// Validates a snippet of the given node kind by wrapping it into a
    /// minimal statement scaffold before parsing.
    pub fn validate_fragment(
        &self,
        text: &str,
        kind: &str,
        dialect: Dialect,
        registry: &FunctionRegistry,
    ) -> ValidationReport {
        match self.parse_fragment(text, kind, dialect) {
            Err(err) => {
                let (found, expected) = match &err {
                    SyntaxError::Parse { found, expected, .. } => {
                        (found.clone(), expected.join(" | "))
                    }
                    other => (other.to_string(), "parsable fragment".to_string()),
                };
                ValidationReport::failing(vec![Violation {
                    path: NodePath::root(),
                    expected,
                    found: found.clone(),
                    message: format!("syntax error in {dialect}: {err}"),
                }])
            }
            Ok(tree) => self.validate(&tree, dialect, registry),
        }
    }

    /// Parses a snippet wrapped in the scaffold appropriate for its kind.
    pub fn parse_fragment(
        &self,
        text: &str,
        kind: &str,
        dialect: Dialect,
    ) -> Result<SyntaxTree, SyntaxError> {
        let (prefix, suffix) = fragment_wrap(kind);
        let wrapped = format!("{prefix}{text}{suffix}");
        self.parse(&wrapped, dialect)
    }
}

/// Scaffold used to parse a bare snippet as part of a complete statement.
pub fn fragment_wrap(kind: &str) -> (&'static str, &'static str) {
    match kind {
        "query" => ("", ""),
        "select_list" | "star" | "qualified_star" => ("SELECT ", ""),
        "from_clause" | "where_clause" | "group_by_clause" | "having_clause"
        | "order_by_clause" | "limit_clause" | "offset_clause" | "fetch_clause" | "alias" => {
            ("SELECT 1 ", "")
        }
        "join_clause" => ("SELECT 1 FROM _t0 ", ""),
        "table_ref" | "derived_table" | "table_name" => ("SELECT 1 FROM ", ""),
        "when_clause" => ("SELECT CASE ", " END"),
        "else_clause" => ("SELECT CASE WHEN 1 THEN 2 ", " END"),
        "type_name" => ("SELECT CAST(c AS ", ")"),
        "in_list" => ("SELECT 1 IN ", ""),
        _ => ("SELECT ", ""),
    }
}

pub fn node_at<'t>(tree: &'t SyntaxTree, path: &NodePath) -> Result<&'t SyntaxNode, PathError> {
    let mut node = &tree.root;
    for (depth, &index) in path.0.iter().enumerate() {
        node = node.children.get(index).ok_or(PathError {
            path: path.clone(),
            index,
            depth,
        })?;
    }
    Ok(node)
}

fn fill_spans(
    node: &SyntaxNode,
    by_leaf: &HashMap<&NodePath, (usize, usize)>,
    out: &mut HashMap<NodePath, (usize, usize)>,
) -> Option<(usize, usize)> {
    let span = if node.is_leaf() {
        *by_leaf.get(&node.path)?
    } else {
        let mut lo = usize::MAX;
        let mut hi = 0;
        for child in &node.children {
            if let Some((s, e)) = fill_spans(child, by_leaf, out) {
                lo = lo.min(s);
                hi = hi.max(e);
            }
        }
        if lo == usize::MAX {
            return None;
        }
        (lo, hi)
    };
    out.insert(node.path.clone(), span);
    Some(span)
}

/// Deepest node whose rendered span contains `offset`.
fn deepest_at(
    root: &SyntaxNode,
    spans: &HashMap<NodePath, (usize, usize)>,
    offset: usize,
) -> NodePath {
    let mut best = NodePath::root();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if let Some(&(s, e)) = spans.get(&node.path) {
            if s <= offset && offset < e.max(s + 1) && node.path.depth() >= best.depth() {
                best = node.path.clone();
            }
        }
        for child in &node.children {
            stack.push(child);
        }
    }
    best
}

pub(crate) struct RenderLeaf {
    pub(crate) text: String,
    pub(crate) raw_is_keyword: bool,
    pub(crate) parent_kind: String,
    pub(crate) child_index: usize,
    pub(crate) path: NodePath,
}

impl RenderLeaf {
    /// Leaf carrying injected text (placeholders, replacements).
    pub(crate) fn synthetic(
        text: String,
        parent_kind: &str,
        child_index: usize,
        path: NodePath,
    ) -> RenderLeaf {
        RenderLeaf {
            text,
            raw_is_keyword: false,
            parent_kind: parent_kind.to_string(),
            child_index,
            path,
        }
    }

    /// Copy of a real tree leaf, preserving keyword-ness for spacing rules.
    pub(crate) fn from_node(
        node: &SyntaxNode,
        parent_kind: &str,
        child_index: usize,
    ) -> RenderLeaf {
        RenderLeaf {
            text: node.canonical_token().unwrap_or_default(),
            raw_is_keyword: node.leaf_class == Some(LeafClass::Keyword),
            parent_kind: parent_kind.to_string(),
            child_index,
            path: node.path.clone(),
        }
    }
}

/// Joins leaves using the canonical spacing rules.
pub(crate) fn join_leaves(leaves: &[RenderLeaf]) -> String {
    let mut out = String::new();
    for (i, leaf) in leaves.iter().enumerate() {
        if i > 0 && needs_space(&leaves[i - 1], leaf) {
            out.push(' ');
        }
        out.push_str(&leaf.text);
    }
    out
}

fn collect_leaves(
    node: &SyntaxNode,
    parent_kind: &str,
    child_index: usize,
    out: &mut Vec<RenderLeaf>,
) -> Result<(), RenderError> {
    if node.is_leaf() {
        let text = node.canonical_token().ok_or(RenderError::MalformedNode {
            path: node.path.clone(),
            kind: node.kind.clone(),
            reason: "leaf without token",
        })?;
        out.push(RenderLeaf {
            text,
            raw_is_keyword: node.leaf_class == Some(LeafClass::Keyword),
            parent_kind: parent_kind.to_string(),
            child_index,
            path: node.path.clone(),
        });
        return Ok(());
    }
    if node.token.is_some() {
        return Err(RenderError::MalformedNode {
            path: node.path.clone(),
            kind: node.kind.clone(),
            reason: "interior node carries a token",
        });
    }
    for (i, child) in node.children.iter().enumerate() {
        collect_leaves(child, &node.kind, i, out)?;
    }
    Ok(())
}

pub(crate) fn needs_space(prev: &RenderLeaf, next: &RenderLeaf) -> bool {
    if matches!(next.text.as_str(), "," | ")" | "." | ";") {
        return false;
    }
    if matches!(prev.text.as_str(), "(" | ".") {
        return false;
    }
    // glue call-style parens: `(` that is not the first child of its node
    if next.text == "(" && next.child_index > 0 {
        return false;
    }
    // unary sign binds to its operand
    if prev.parent_kind == "unary_expr"
        && prev.raw_is_keyword
        && matches!(prev.text.as_str(), "-" | "+")
    {
        return false;
    }
    true
}

struct Peg<'a> {
    grammar: &'a Grammar,
    tokens: &'a [Token],
    furthest: usize,
    expected: BTreeSet<String>,
}

impl<'a> Peg<'a> {
    fn error(&self, sql: &str) -> SyntaxError {
        let (offset, found) = match self.tokens.get(self.furthest) {
            Some(tok) => (tok.start, format!("`{}`", tok.text)),
            None => (sql.len(), "end of input".to_string()),
        };
        SyntaxError::Parse {
            offset,
            found,
            expected: self.expected.iter().cloned().collect(),
        }
    }

    fn fail(&mut self, pos: usize, expected: String) {
        if pos > self.furthest {
            self.furthest = pos;
            self.expected.clear();
        }
        if pos == self.furthest {
            self.expected.insert(expected);
        }
    }

    fn match_rule(
        &mut self,
        name: &str,
        pos: usize,
        depth: usize,
    ) -> Option<(Vec<SyntaxNode>, usize)> {
        if depth > MAX_DEPTH {
            return None;
        }
        let rule = self.grammar.rule(name)?;
        for alt in &rule.alternatives {
            if let Some((children, end)) = self.match_alt(alt, pos, depth) {
                if rule.is_hidden() || children.is_empty() {
                    return Some((children, end));
                }
                return Some((vec![SyntaxNode::interior(name, children)], end));
            }
        }
        None
    }

    fn match_alt(
        &mut self,
        alt: &[Term],
        pos: usize,
        depth: usize,
    ) -> Option<(Vec<SyntaxNode>, usize)> {
        let mut children = Vec::new();
        let mut cur = pos;
        for term in alt {
            match term {
                Term::Nonterminal(name) => {
                    let (mut nodes, end) = self.match_rule(name, cur, depth + 1)?;
                    children.append(&mut nodes);
                    cur = end;
                }
                _ => {
                    let node = self.match_token(term, cur)?;
                    children.push(node);
                    cur += 1;
                }
            }
        }
        Some((children, cur))
    }

    fn match_token(&mut self, term: &Term, pos: usize) -> Option<SyntaxNode> {
        let tok = match self.tokens.get(pos) {
            Some(t) => t,
            None => {
                self.fail(pos, term.to_string());
                return None;
            }
        };
        let matched = match term {
            Term::Terminal(s) => {
                let is_word = s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if is_word {
                    tok.kind == TokenKind::Word && tok.text.eq_ignore_ascii_case(s)
                } else {
                    tok.kind == TokenKind::Symbol && tok.text == *s
                }
            }
            Term::Identifier => tok.kind == TokenKind::Word && !self.grammar.is_reserved(&tok.text),
            Term::QuotedIdentifier => tok.kind == TokenKind::QuotedIdent,
            Term::Number => tok.kind == TokenKind::Number,
            Term::StringLit => tok.kind == TokenKind::String,
            Term::Nonterminal(_) => unreachable!("handled in match_alt"),
        };
        if !matched {
            self.fail(pos, term.to_string());
            return None;
        }
        let node = match term {
            Term::Terminal(s) => SyntaxNode::leaf(s.to_ascii_uppercase(), tok, LeafClass::Keyword),
            Term::Identifier => SyntaxNode::leaf("identifier".to_string(), tok, LeafClass::Identifier),
            Term::QuotedIdentifier => {
                SyntaxNode::leaf("quoted_identifier".to_string(), tok, LeafClass::QuotedIdentifier)
            }
            Term::Number => SyntaxNode::leaf("number".to_string(), tok, LeafClass::Number),
            Term::StringLit => SyntaxNode::leaf("string".to_string(), tok, LeafClass::StringLit),
            Term::Nonterminal(_) => unreachable!(),
        };
        Some(node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled::syntax;

    fn parse(sql: &str, d: Dialect) -> SyntaxTree {
        syntax().parse(sql, d).unwrap()
    }

    #[test]
    fn minimal_select_shape() {
        let tree = parse("SELECT 1", Dialect::Mysql);
        assert_eq!(tree.root.kind, "query");
        // query children: SELECT keyword, select_list
        assert_eq!(tree.root.children[0].kind, "SELECT");
        let list = &tree.root.children[1];
        assert_eq!(list.kind, "select_list");
        let lit = &list.children[0];
        assert_eq!(lit.kind, "literal");
        assert_eq!(lit.children[0].token.as_deref(), Some("1"));
    }

    #[test]
    fn cast_parses_to_cast_expr() {
        let tree = parse("SELECT CAST(a AS INT) FROM t", Dialect::Postgresql);
        let kinds: Vec<&str> = tree.nodes().iter().map(|n| n.kind.as_str()).collect();
        assert!(kinds.contains(&"cast_expr"));
        let cast = tree
            .nodes()
            .into_iter()
            .find(|n| n.kind == "cast_expr")
            .unwrap();
        // CAST ( <column a> AS <type INT> )
        assert_eq!(cast.children[2].kind, "column_ref");
        assert_eq!(cast.children[4].kind, "type_name");
        assert_eq!(cast.children[4].children[0].kind, "INT");
    }

    #[test]
    fn timestampdiff_has_three_arguments() {
        let tree = parse("SELECT TIMESTAMPDIFF(DAY, a, b) FROM t", Dialect::Mysql);
        let node = tree
            .nodes()
            .into_iter()
            .find(|n| n.kind == "timestampdiff_expr")
            .unwrap();
        let args: Vec<&SyntaxNode> = node
            .children
            .iter()
            .skip(1)
            .filter(|c| !matches!(c.kind.as_str(), "(" | ")" | ","))
            .collect();
        assert_eq!(args.len(), 3, "unit plus two operands");
        assert_eq!(args[0].kind, "DAY");
    }

    #[test]
    fn render_canonicalizes_case_and_spacing() {
        let tree = parse("select   1", Dialect::Mysql);
        assert_eq!(syntax().render(&tree).unwrap(), "SELECT 1");

        let tree = parse("select cast(a as int) from t", Dialect::Postgresql);
        assert_eq!(
            syntax().render(&tree).unwrap(),
            "SELECT CAST(a AS INT) FROM t"
        );
    }

    #[test]
    fn render_handles_operators_and_stars() {
        let tree = parse("SELECT COUNT(*), t.*, a||b FROM t WHERE x IN (1,2)", Dialect::Oracle);
        assert_eq!(
            syntax().render(&tree).unwrap(),
            "SELECT COUNT(*), t.*, a || b FROM t WHERE x IN (1, 2)"
        );
    }

    #[test]
    fn roundtrip_is_isomorphic() {
        let sqls = [
            ("SELECT DISTINCT a, b AS x FROM s.t WHERE a > 1 AND b IS NOT NULL ORDER BY a DESC NULLS LAST", Dialect::Postgresql),
            ("SELECT CASE WHEN a = 1 THEN 'x' ELSE 'y' END FROM t LIMIT 5 OFFSET 2", Dialect::Mysql),
            ("SELECT NVL(a, 0) FROM t FETCH FIRST 3 ROWS ONLY", Dialect::Oracle),
        ];
        for (sql, d) in sqls {
            let t1 = parse(sql, d);
            let rendered = syntax().render(&t1).unwrap();
            let t2 = parse(&rendered, d);
            assert!(t1.isomorphic(&t2), "{sql} not round-trip stable: {rendered}");
        }
    }

    #[test]
    fn parse_error_has_offset_and_expectations() {
        let err = syntax().parse("SELECT FROM t", Dialect::Mysql).unwrap_err();
        match err {
            SyntaxError::Parse { offset, expected, .. } => {
                assert_eq!(offset, 7);
                assert!(!expected.is_empty());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn statement_separator_is_rejected() {
        let err = syntax().parse("SELECT 1; SELECT 2", Dialect::Postgresql).unwrap_err();
        assert!(matches!(err, SyntaxError::Parse { .. }));
    }

    #[test]
    fn unsupported_statements_are_flagged() {
        let err = syntax()
            .parse("INSERT INTO t VALUES (1)", Dialect::Mysql)
            .unwrap_err();
        assert!(matches!(err, SyntaxError::UnsupportedConstruct { .. }));
        let err = syntax()
            .parse("WITH x AS (SELECT 1) SELECT * FROM x", Dialect::Postgresql)
            .unwrap_err();
        assert!(matches!(err, SyntaxError::UnsupportedConstruct { .. }));
    }

    #[test]
    fn limit_is_not_oracle() {
        assert!(syntax().parse("SELECT a FROM t LIMIT 5", Dialect::Oracle).is_err());
        assert!(syntax().parse("SELECT a FROM t LIMIT 5", Dialect::Postgresql).is_ok());
    }

    #[test]
    fn concat_is_not_mysql() {
        assert!(syntax().parse("SELECT a || b FROM t", Dialect::Mysql).is_err());
        assert!(syntax().parse("SELECT a || b FROM t", Dialect::Oracle).is_ok());
    }

    #[test]
    fn node_at_resolves_all_walked_paths() {
        let tree = parse("SELECT NVL(a, 0), b FROM t WHERE x = 1", Dialect::Oracle);
        for node in tree.nodes() {
            let found = node_at(&tree, &node.path).unwrap();
            assert_eq!(found.path, node.path);
            assert!(std::ptr::eq(found, node));
        }
        // empty path is the root
        assert_eq!(node_at(&tree, &NodePath::root()).unwrap().kind, "query");
        // out-of-range errors
        assert!(node_at(&tree, &NodePath(vec![99])).is_err());
    }

    #[test]
    fn validate_rejects_unknown_functions() {
        let mut registry = FunctionRegistry::new();
        registry.insert(Dialect::Postgresql, "COALESCE");
        let tree = parse("SELECT NVL(a, 0) FROM t", Dialect::Oracle);
        let report = syntax().validate(&tree, Dialect::Postgresql, &registry);
        assert!(!report.ok);
        assert!(report.violations[0].message.contains("NVL"));
        // the violation path resolves in the original tree
        assert!(node_at(&tree, &report.violations[0].path).is_ok());
    }

    #[test]
    fn validate_flags_foreign_special_forms_through_reparse() {
        // a MySQL special form re-parses under PostgreSQL as a generic call,
        // where the function registry rejects it
        let mut registry = FunctionRegistry::new();
        registry.insert(Dialect::Postgresql, "DATE_PART");
        let tree = parse("SELECT TIMESTAMPDIFF(DAY, a, b) FROM t", Dialect::Mysql);
        let report = syntax().validate(&tree, Dialect::Postgresql, &registry);
        assert!(!report.ok);
        assert!(report.violations[0].message.contains("TIMESTAMPDIFF"));
        assert!(report.violations[0].message.contains("unknown function"));
    }

    #[test]
    fn validate_rejects_foreign_grammar() {
        let registry = FunctionRegistry::new();
        let tree = parse("SELECT a FROM t LIMIT 5", Dialect::Mysql);
        let report = syntax().validate(&tree, Dialect::Oracle, &registry);
        assert!(!report.ok);
        assert!(report.violations[0].message.contains("syntax error"));
    }

    #[test]
    fn validate_self_accepts() {
        let mut registry = FunctionRegistry::new();
        registry.insert(Dialect::Mysql, "TIMESTAMPDIFF");
        let tree = parse("SELECT 1", Dialect::Mysql);
        assert!(syntax().validate(&tree, Dialect::Mysql, &registry).ok);
    }

    #[test]
    fn fragments_parse_with_kind_scaffolds() {
        assert!(syntax()
            .parse_fragment("NVL(a, 0)", "func_call", Dialect::Oracle)
            .is_ok());
        assert!(syntax()
            .parse_fragment("LIMIT 5", "limit_clause", Dialect::Mysql)
            .is_ok());
        assert!(syntax()
            .parse_fragment("FETCH FIRST 5 ROWS ONLY", "fetch_clause", Dialect::Oracle)
            .is_ok());
        assert!(syntax()
            .parse_fragment("LIMIT 5", "limit_clause", Dialect::Oracle)
            .is_err());
    }

    #[test]
    fn deterministic_parsing() {
        let a = parse("SELECT a, COUNT(*) FROM t GROUP BY a HAVING COUNT(*) > 2", Dialect::Postgresql);
        let b = parse("SELECT a, COUNT(*) FROM t GROUP BY a HAVING COUNT(*) > 2", Dialect::Postgresql);
        assert!(a.isomorphic(&b));
        assert_eq!(format!("{:?}", a.root), format!("{:?}", b.root));
    }
}
