//! Decomposition of a parsed query into functional-operation snippets, their
//! abstraction into placeholder templates, and reassembly of translated
//! snippet texts into the final query.
//!
//! A snippet is emitted for every maximal subtree whose keyword appears in
//! the knowledge base for the source dialect: function calls (including
//! bare niladic forms like `SYSDATE`), dialect-specific operators such as
//! `||`, row-limit clauses, and CAST/type expressions. Nodes inside an
//! emitted snippet are not emitted separately; scope widening happens later
//! through expansion, not through nested snippets.

use crate::kb::{ElementClass, KnowledgeBase};
use crate::syntax::{node_at, NodePath, SqlSyntax, SyntaxNode, SyntaxTree};
use crate::Dialect;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnippetKind {
    FunctionCall,
    Operator,
    Clause,
    TypeExpr,
}

impl fmt::Display for SnippetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnippetKind::FunctionCall => write!(f, "function-call"),
            SnippetKind::Operator => write!(f, "operator"),
            SnippetKind::Clause => write!(f, "clause"),
            SnippetKind::TypeExpr => write!(f, "type-expr"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnippetStatus {
    Pending,
    Translated,
    Incompatible,
    Insufficient,
}

#[derive(Debug, thiserror::Error)]
#[error("illegal snippet status transition {from:?} -> {to:?}")]
pub struct StatusError {
    pub from: SnippetStatus,
    pub to: SnippetStatus,
}

/// One functional operation cut out of the source query.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalSnippet {
    pub id: u32,
    pub tree_path: NodePath,
    pub kind: SnippetKind,
    /// Canonical text of the operation in the source dialect.
    pub text: String,
    pub status: SnippetStatus,
    /// How many times the scope of this operation has been widened.
    pub expansion_depth: u32,
    /// Grammar kind of the node the snippet covers; selects the scaffold
    /// used to parse the snippet stand-alone.
    pub node_kind: String,
    /// Knowledge-base keywords found inside the snippet, for spec retrieval.
    pub keywords: Vec<String>,
    pub dialect: Dialect,
}

impl FunctionalSnippet {
    /// Enforces pending -> {translated, incompatible, insufficient} and
    /// insufficient -> pending (after expansion).
    pub fn transition(&mut self, to: SnippetStatus) -> Result<(), StatusError> {
        let ok = matches!(
            (self.status, to),
            (SnippetStatus::Pending, SnippetStatus::Translated)
                | (SnippetStatus::Pending, SnippetStatus::Incompatible)
                | (SnippetStatus::Pending, SnippetStatus::Insufficient)
                | (SnippetStatus::Incompatible, SnippetStatus::Translated)
                | (SnippetStatus::Incompatible, SnippetStatus::Insufficient)
                | (SnippetStatus::Insufficient, SnippetStatus::Pending)
        );
        if !ok {
            return Err(StatusError { from: self.status, to });
        }
        self.status = to;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceholderKind {
    Column,
    Table,
    Literal,
    Alias,
}

impl PlaceholderKind {
    fn stem(&self) -> &'static str {
        match self {
            PlaceholderKind::Column => "column",
            PlaceholderKind::Table => "table",
            PlaceholderKind::Literal => "literal",
            PlaceholderKind::Alias => "alias",
        }
    }
}

/// Snippet text with translation-irrelevant lexemes replaced by `<kind_n>`
/// placeholders, numbered left-to-right per kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub text_with_placeholders: String,
    pub placeholder_kinds: BTreeMap<String, PlaceholderKind>,
}

/// Maps each placeholder back to the original lexeme.
pub type BindingMap = BTreeMap<String, String>;

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("snippet does not parse in {dialect}: {message}")]
    SnippetParse { dialect: Dialect, message: String },
    #[error("placeholder {placeholder} missing from translated text")]
    MissingPlaceholder { placeholder: String },
    #[error("replacement paths overlap: {outer} is a prefix of {inner}")]
    Overlap { outer: NodePath, inner: NodePath },
    #[error("replacement path {0} does not resolve in the tree")]
    BadPath(NodePath),
}

/// What made a node a snippet, if anything.
fn registry_hit(
    node: &SyntaxNode,
    kb: &KnowledgeBase,
    dialect: Dialect,
) -> Option<(SnippetKind, String)> {
    match node.kind.as_str() {
        "func_call" => {
            let name = node.children.first()?.token.as_ref()?.to_ascii_uppercase();
            if !kb.lookup(dialect, &name).is_empty() {
                Some((SnippetKind::FunctionCall, name))
            } else {
                None
            }
        }
        "cast_expr" => kb
            .lookup(dialect, "CAST")
            .first()
            .map(|_| (SnippetKind::TypeExpr, "CAST".to_string())),
        "extract_expr" | "timestampdiff_expr" | "timestampadd_expr" | "date_arith_expr"
        | "group_concat_expr" => {
            let name = node.children.first()?.kind.clone();
            if !kb.lookup(dialect, &name).is_empty() {
                Some((SnippetKind::FunctionCall, name))
            } else {
                None
            }
        }
        "concat_expr" => kb
            .lookup(dialect, "||")
            .first()
            .map(|_| (SnippetKind::Operator, "||".to_string())),
        "interval_expr" => kb
            .lookup(dialect, "INTERVAL")
            .first()
            .map(|_| (SnippetKind::Operator, "INTERVAL".to_string())),
        "limit_clause" => kb
            .lookup(dialect, "LIMIT")
            .first()
            .map(|_| (SnippetKind::Clause, "LIMIT".to_string())),
        "offset_clause" => kb
            .lookup(dialect, "OFFSET")
            .first()
            .map(|_| (SnippetKind::Clause, "OFFSET".to_string())),
        "fetch_clause" => kb
            .lookup(dialect, "FETCH")
            .first()
            .map(|_| (SnippetKind::Clause, "FETCH".to_string())),
        // bare niladic function keywords parse as single-name column refs
        "column_ref" if node.children.len() == 1 => {
            let name = node.children[0].token.as_ref()?.to_ascii_uppercase();
            let is_fn = kb
                .lookup(dialect, &name)
                .iter()
                .any(|s| s.element_class == ElementClass::Function);
            if is_fn {
                Some((SnippetKind::FunctionCall, name))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// All knowledge-base keywords mentioned inside a subtree, in pre-order.
pub fn keywords_in(node: &SyntaxNode, kb: &KnowledgeBase, dialect: Dialect) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        if let Some((_, kw)) = registry_hit(n, kb, dialect) {
            if !out.contains(&kw) {
                out.push(kw);
            }
        }
        for child in n.children.iter().rev() {
            stack.push(child);
        }
    }
    out
}

/// Depth-first pre-order segmentation. Snippets are maximal: once a node is
/// emitted the traversal does not descend into it.
pub fn segment(
    syntax: &SqlSyntax,
    tree: &SyntaxTree,
    kb: &KnowledgeBase,
) -> Vec<FunctionalSnippet> {
    let mut snippets = Vec::new();
    let mut next_id = 1u32;
    segment_node(syntax, tree, &tree.root, kb, &mut snippets, &mut next_id);
    snippets
}

fn segment_node(
    syntax: &SqlSyntax,
    tree: &SyntaxTree,
    node: &SyntaxNode,
    kb: &KnowledgeBase,
    out: &mut Vec<FunctionalSnippet>,
    next_id: &mut u32,
) {
    if let Some((kind, _)) = registry_hit(node, kb, tree.dialect) {
        out.push(make_snippet(syntax, tree, node, kind, kb, *next_id, 0));
        *next_id += 1;
        return;
    }
    for child in &node.children {
        segment_node(syntax, tree, child, kb, out, next_id);
    }
}

fn make_snippet(
    syntax: &SqlSyntax,
    tree: &SyntaxTree,
    node: &SyntaxNode,
    kind: SnippetKind,
    kb: &KnowledgeBase,
    id: u32,
    expansion_depth: u32,
) -> FunctionalSnippet {
    FunctionalSnippet {
        id,
        tree_path: node.path.clone(),
        kind,
        text: render_node(syntax, tree, node),
        status: SnippetStatus::Pending,
        expansion_depth,
        node_kind: node.kind.clone(),
        keywords: keywords_in(node, kb, tree.dialect),
        dialect: tree.dialect,
    }
}

/// Builds a snippet covering an arbitrary node, used by scope expansion.
pub fn snippet_for_node(
    syntax: &SqlSyntax,
    tree: &SyntaxTree,
    path: &NodePath,
    kb: &KnowledgeBase,
    id: u32,
    expansion_depth: u32,
) -> Result<FunctionalSnippet, SegmentError> {
    let node = node_at(tree, path).map_err(|_| SegmentError::BadPath(path.clone()))?;
    let kind = registry_hit(node, kb, tree.dialect)
        .map(|(k, _)| k)
        .unwrap_or(SnippetKind::Clause);
    Ok(make_snippet(syntax, tree, node, kind, kb, id, expansion_depth))
}

fn render_node(syntax: &SqlSyntax, tree: &SyntaxTree, node: &SyntaxNode) -> String {
    // render the whole tree once and slice the node's span out of it
    let (text, spans) = syntax
        .render_with_spans(tree)
        .expect("parser-produced trees always render");
    let (s, e) = spans[&node.path];
    text[s..e].to_string()
}

/// Replaces identifier and literal leaves with kind-tagged placeholders.
/// Qualified column and table names become a single placeholder each;
/// grammar keywords (time units, type names, NULL) are never abstracted.
pub fn abstract_snippet(
    syntax: &SqlSyntax,
    snippet: &FunctionalSnippet,
) -> Result<(Template, BindingMap), SegmentError> {
    let tree = syntax
        .parse_fragment(&snippet.text, &snippet.node_kind, snippet.dialect)
        .map_err(|e| SegmentError::SnippetParse {
            dialect: snippet.dialect,
            message: e.to_string(),
        })?;
    let (prefix, _) = crate::syntax::fragment_wrap(&snippet.node_kind);
    let region = (prefix.len(), prefix.len() + snippet.text.len());

    let mut counters: BTreeMap<PlaceholderKind, u32> = BTreeMap::new();
    let mut bindings = BindingMap::new();
    let mut kinds = BTreeMap::new();
    let mut parts: Vec<crate::syntax::RenderLeaf> = Vec::new();
    abstract_node(
        &tree.root,
        "",
        0,
        region,
        &mut counters,
        &mut bindings,
        &mut kinds,
        &mut parts,
        &tree,
        syntax,
    );
    let text = crate::syntax::join_leaves(&parts);
    Ok((
        Template {
            text_with_placeholders: text,
            placeholder_kinds: kinds,
        },
        bindings,
    ))
}

#[allow(clippy::too_many_arguments)]
fn abstract_node(
    node: &SyntaxNode,
    parent_kind: &str,
    child_index: usize,
    region: (usize, usize),
    counters: &mut BTreeMap<PlaceholderKind, u32>,
    bindings: &mut BindingMap,
    kinds: &mut BTreeMap<String, PlaceholderKind>,
    parts: &mut Vec<crate::syntax::RenderLeaf>,
    tree: &SyntaxTree,
    syntax: &SqlSyntax,
) {
    // ignore scaffold tokens outside the snippet region
    if node.span.1 <= region.0 || node.span.0 >= region.1 {
        return;
    }
    let placeholder = |kind: PlaceholderKind,
                           original: String,
                           parent_kind: &str,
                           child_index: usize,
                           path: &NodePath,
                           parts: &mut Vec<crate::syntax::RenderLeaf>,
                           counters: &mut BTreeMap<PlaceholderKind, u32>,
                           bindings: &mut BindingMap,
                           kinds: &mut BTreeMap<String, PlaceholderKind>| {
        let n = counters.entry(kind).or_insert(0);
        *n += 1;
        let name = format!("{}_{}", kind.stem(), n);
        bindings.insert(name.clone(), original);
        kinds.insert(name.clone(), kind);
        parts.push(crate::syntax::RenderLeaf::synthetic(
            format!("<{name}>"),
            parent_kind,
            child_index,
            path.clone(),
        ));
    };

    match node.kind.as_str() {
        // whole qualified name becomes one placeholder
        "column_ref" | "table_name" => {
            let original = render_subtree(syntax, tree, node);
            let kind = if node.kind == "table_name" {
                PlaceholderKind::Table
            } else {
                PlaceholderKind::Column
            };
            placeholder(
                kind, original, parent_kind, child_index, &node.path, parts, counters, bindings,
                kinds,
            );
            return;
        }
        _ => {}
    }

    if node.is_leaf() {
        let canonical = node.canonical_token().unwrap_or_default();
        match node.leaf_class {
            Some(crate::syntax::LeafClass::Number) | Some(crate::syntax::LeafClass::StringLit) => {
                placeholder(
                    PlaceholderKind::Literal,
                    canonical,
                    parent_kind,
                    child_index,
                    &node.path,
                    parts,
                    counters,
                    bindings,
                    kinds,
                );
            }
            Some(crate::syntax::LeafClass::Identifier)
            | Some(crate::syntax::LeafClass::QuotedIdentifier) => {
                let kind = match parent_kind {
                    "alias" => Some(PlaceholderKind::Alias),
                    "qualified_star" => Some(PlaceholderKind::Table),
                    // function name position stays literal text
                    "func_call" if child_index == 0 => None,
                    _ => Some(PlaceholderKind::Column),
                };
                match kind {
                    Some(kind) => placeholder(
                        kind, canonical, parent_kind, child_index, &node.path, parts, counters,
                        bindings, kinds,
                    ),
                    None => parts.push(crate::syntax::RenderLeaf::from_node(
                        node,
                        parent_kind,
                        child_index,
                    )),
                }
            }
            _ => parts.push(crate::syntax::RenderLeaf::from_node(
                node,
                parent_kind,
                child_index,
            )),
        }
        return;
    }

    for (i, child) in node.children.iter().enumerate() {
        abstract_node(
            child, &node.kind, i, region, counters, bindings, kinds, parts, tree, syntax,
        );
    }
}

fn render_subtree(syntax: &SqlSyntax, tree: &SyntaxTree, node: &SyntaxNode) -> String {
    let (text, spans) = syntax
        .render_with_spans(tree)
        .expect("parser-produced trees always render");
    let (s, e) = spans[&node.path];
    text[s..e].to_string()
}

/// Substitutes every bound placeholder into `translated_text`. Errors when a
/// placeholder was dropped by the translation, which signals an unfaithful
/// rewrite and triggers a retry upstream.
pub fn restore(bindings: &BindingMap, translated_text: &str) -> Result<String, SegmentError> {
    let mut out = translated_text.to_string();
    for (name, lexeme) in bindings {
        let marker = format!("<{name}>");
        if !out.contains(&marker) {
            return Err(SegmentError::MissingPlaceholder {
                placeholder: marker,
            });
        }
        out = out.replace(&marker, lexeme);
    }
    Ok(out)
}

/// Applies same-dialect canonicalization rules until a fixpoint. Snippets
/// with no matching rule pass through unchanged.
pub fn normalize(
    snippet: &FunctionalSnippet,
    rules: &crate::engine::rules::RuleStore,
    syntax: &SqlSyntax,
    kb: &KnowledgeBase,
) -> FunctionalSnippet {
    let mut current = snippet.clone();
    for _ in 0..8 {
        match rules.apply_first(&current.text, current.dialect, current.dialect) {
            Some(rewritten) if rewritten != current.text => {
                current.text = rewritten;
            }
            _ => break,
        }
    }
    if current.text != snippet.text {
        // keywords may have changed with the spelling
        if let Ok(tree) =
            syntax.parse_fragment(&current.text, &current.node_kind, current.dialect)
        {
            current.keywords = keywords_in(&tree.root, kb, current.dialect);
        }
    }
    current
}

/// Splices replacement texts over the given subtrees and renders the result.
/// Replacement paths must not nest.
pub fn reassemble(
    syntax: &SqlSyntax,
    tree: &SyntaxTree,
    replacements: &BTreeMap<NodePath, String>,
    _target: Dialect,
) -> Result<String, SegmentError> {
    let paths: Vec<&NodePath> = replacements.keys().collect();
    for (i, a) in paths.iter().enumerate() {
        for b in paths.iter().skip(i + 1) {
            if a.is_prefix_of(b) {
                return Err(SegmentError::Overlap {
                    outer: (*a).clone(),
                    inner: (*b).clone(),
                });
            }
            if b.is_prefix_of(a) {
                return Err(SegmentError::Overlap {
                    outer: (*b).clone(),
                    inner: (*a).clone(),
                });
            }
        }
    }
    for path in &paths {
        node_at(tree, path).map_err(|_| SegmentError::BadPath((*path).clone()))?;
    }
    let mut parts = Vec::new();
    splice_node(&tree.root, "", 0, replacements, &mut parts, syntax)?;
    Ok(crate::syntax::join_leaves(&parts))
}

fn splice_node(
    node: &SyntaxNode,
    parent_kind: &str,
    child_index: usize,
    replacements: &BTreeMap<NodePath, String>,
    parts: &mut Vec<crate::syntax::RenderLeaf>,
    _syntax: &SqlSyntax,
) -> Result<(), SegmentError> {
    if let Some(text) = replacements.get(&node.path) {
        parts.push(crate::syntax::RenderLeaf::synthetic(
            text.clone(),
            parent_kind,
            child_index,
            node.path.clone(),
        ));
        return Ok(());
    }
    if node.is_leaf() {
        parts.push(crate::syntax::RenderLeaf::from_node(
            node,
            parent_kind,
            child_index,
        ));
        return Ok(());
    }
    for (i, child) in node.children.iter().enumerate() {
        splice_node(child, &node.kind, i, replacements, parts, _syntax)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled::{kb, rules, syntax};
    use crate::syntax::SyntaxTree;

    fn parse(sql: &str, d: Dialect) -> SyntaxTree {
        syntax().parse(sql, d).unwrap()
    }

    fn seg(sql: &str, d: Dialect) -> Vec<FunctionalSnippet> {
        segment(syntax(), &parse(sql, d), kb())
    }

    #[test]
    fn timestampdiff_is_one_function_snippet() {
        let snippets = seg("SELECT TIMESTAMPDIFF(DAY, a, b) FROM t", Dialect::Mysql);
        assert_eq!(snippets.len(), 1);
        assert_eq!(snippets[0].kind, SnippetKind::FunctionCall);
        assert_eq!(snippets[0].text, "TIMESTAMPDIFF(DAY, a, b)");
        assert_eq!(snippets[0].keywords, vec!["TIMESTAMPDIFF".to_string()]);
    }

    #[test]
    fn plain_query_has_no_snippets() {
        assert!(seg("SELECT a FROM t", Dialect::Postgresql).is_empty());
    }

    #[test]
    fn preorder_snippets_for_nvl_and_sysdate() {
        let snippets = seg("SELECT NVL(a, 0), SYSDATE FROM t", Dialect::Oracle);
        let texts: Vec<&str> = snippets.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["NVL(a, 0)", "SYSDATE"]);
        assert!(snippets.iter().all(|s| s.status == SnippetStatus::Pending));
        // no snippet path is a prefix of another
        for a in &snippets {
            for b in &snippets {
                if a.id != b.id {
                    assert!(!a.tree_path.is_prefix_of(&b.tree_path));
                }
            }
        }
    }

    #[test]
    fn nested_registry_hits_stay_inside_the_outer_snippet() {
        let snippets = seg("SELECT NVL(TRUNC(a, 2), 0) FROM t", Dialect::Oracle);
        assert_eq!(snippets.len(), 1);
        assert_eq!(snippets[0].text, "NVL(TRUNC(a, 2), 0)");
        // the inner hit is still recorded as a keyword for spec retrieval
        assert!(snippets[0].keywords.contains(&"NVL".to_string()));
        assert!(snippets[0].keywords.contains(&"TRUNC".to_string()));
    }

    #[test]
    fn segmentation_is_deterministic() {
        let a = seg("SELECT NVL(a, 0), SYSDATE FROM t FETCH FIRST 3 ROWS ONLY", Dialect::Oracle);
        let b = seg("SELECT NVL(a, 0), SYSDATE FROM t FETCH FIRST 3 ROWS ONLY", Dialect::Oracle);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.tree_path, y.tree_path);
            assert_eq!(x.text, y.text);
        }
    }

    #[test]
    fn clause_snippets_cover_row_limits() {
        let snippets = seg("SELECT a FROM t FETCH FIRST 5 ROWS ONLY", Dialect::Oracle);
        assert_eq!(snippets.len(), 1);
        assert_eq!(snippets[0].kind, SnippetKind::Clause);
        assert_eq!(snippets[0].text, "FETCH FIRST 5 ROWS ONLY");
    }

    #[test]
    fn normalize_rewrites_substr_to_substring() {
        let snippets = seg("SELECT SUBSTR(s, 1, 3) FROM t", Dialect::Mysql);
        let normalized = normalize(&snippets[0], rules(), syntax(), kb());
        assert_eq!(normalized.text, "SUBSTRING(s, 1, 3)");
        // idempotent
        let again = normalize(&normalized, rules(), syntax(), kb());
        assert_eq!(again.text, normalized.text);
    }

    #[test]
    fn normalize_with_no_matching_rule_is_identity() {
        let snippets = seg("SELECT NVL(a, 0) FROM t", Dialect::Oracle);
        let empty = crate::engine::rules::RuleStore::new();
        let normalized = normalize(&snippets[0], &empty, syntax(), kb());
        assert_eq!(normalized.text, snippets[0].text);
    }

    #[test]
    fn abstract_keeps_grammar_significant_unit() {
        let snippets = seg(
            "SELECT TIMESTAMPDIFF(DAY, o.order_date, o.ship_date) FROM o",
            Dialect::Mysql,
        );
        let (template, bindings) = abstract_snippet(syntax(), &snippets[0]).unwrap();
        assert_eq!(
            template.text_with_placeholders,
            "TIMESTAMPDIFF(DAY, <column_1>, <column_2>)"
        );
        assert_eq!(bindings["column_1"], "o.order_date");
        assert_eq!(bindings["column_2"], "o.ship_date");
    }

    #[test]
    fn abstract_tags_literals() {
        let snippets = seg("SELECT NVL(a, 0) FROM t", Dialect::Oracle);
        let (template, bindings) = abstract_snippet(syntax(), &snippets[0]).unwrap();
        assert_eq!(template.text_with_placeholders, "NVL(<column_1>, <literal_1>)");
        assert_eq!(bindings["column_1"], "a");
        assert_eq!(bindings["literal_1"], "0");
        assert_eq!(
            template.placeholder_kinds["literal_1"],
            PlaceholderKind::Literal
        );
    }

    #[test]
    fn restore_is_inverse_of_abstract() {
        for (sql, d) in [
            ("SELECT NVL(a, 0) FROM t", Dialect::Oracle),
            ("SELECT TIMESTAMPDIFF(DAY, a, b) FROM t", Dialect::Mysql),
            ("SELECT first_name || ' ' || last_name FROM t", Dialect::Postgresql),
            ("SELECT a FROM t LIMIT 7", Dialect::Mysql),
        ] {
            for snippet in seg(sql, d) {
                let (template, bindings) = abstract_snippet(syntax(), &snippet).unwrap();
                let restored = restore(&bindings, &template.text_with_placeholders).unwrap();
                assert_eq!(restored, snippet.text, "{sql}");
            }
        }
    }

    #[test]
    fn restore_reports_dropped_placeholders() {
        let mut bindings = BindingMap::new();
        bindings.insert("column_1".to_string(), "a".to_string());
        let err = restore(&bindings, "COALESCE(b, 0)").unwrap_err();
        assert!(matches!(err, SegmentError::MissingPlaceholder { .. }));
    }

    #[test]
    fn reassemble_replaces_subtree_text() {
        let tree = parse("SELECT NVL(a, 0) FROM t", Dialect::Oracle);
        let snippets = segment(syntax(), &tree, kb());
        let mut replacements = BTreeMap::new();
        replacements.insert(snippets[0].tree_path.clone(), "COALESCE(a, 0)".to_string());
        let out = reassemble(syntax(), &tree, &replacements, Dialect::Postgresql).unwrap();
        assert_eq!(out, "SELECT COALESCE(a, 0) FROM t");
    }

    #[test]
    fn reassemble_empty_is_canonical_render() {
        let tree = parse("select   nvl(a,0)  from t", Dialect::Oracle);
        let out = reassemble(syntax(), &tree, &BTreeMap::new(), Dialect::Postgresql).unwrap();
        assert_eq!(out, syntax().render(&tree).unwrap());
    }

    #[test]
    fn reassemble_rejects_nested_paths() {
        let tree = parse("SELECT NVL(a, 0) FROM t", Dialect::Oracle);
        let snippets = segment(syntax(), &tree, kb());
        let mut replacements = BTreeMap::new();
        replacements.insert(snippets[0].tree_path.clone(), "X".to_string());
        replacements.insert(snippets[0].tree_path.child(0), "Y".to_string());
        assert!(matches!(
            reassemble(syntax(), &tree, &replacements, Dialect::Postgresql),
            Err(SegmentError::Overlap { .. })
        ));
    }

    #[test]
    fn sibling_replacements_commute() {
        let tree = parse("SELECT NVL(a, 0), SYSDATE FROM t", Dialect::Oracle);
        let snippets = segment(syntax(), &tree, kb());
        let mut both = BTreeMap::new();
        both.insert(snippets[0].tree_path.clone(), "COALESCE(a, 0)".to_string());
        both.insert(snippets[1].tree_path.clone(), "CURRENT_TIMESTAMP".to_string());
        let at_once = reassemble(syntax(), &tree, &both, Dialect::Postgresql).unwrap();
        assert_eq!(at_once, "SELECT COALESCE(a, 0), CURRENT_TIMESTAMP FROM t");
    }

    #[test]
    fn status_transitions_are_enforced() {
        let mut s = seg("SELECT NVL(a, 0) FROM t", Dialect::Oracle).remove(0);
        assert!(s.transition(SnippetStatus::Insufficient).is_ok());
        assert!(s.transition(SnippetStatus::Pending).is_ok());
        assert!(s.transition(SnippetStatus::Translated).is_ok());
        assert!(s.transition(SnippetStatus::Pending).is_err());
    }
}
