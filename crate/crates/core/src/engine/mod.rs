//! Hybrid rule/LLM translation orchestration with local-to-global scope
//! expansion.
//!
//! In the full pipeline a query is parsed, segmented into functional
//! snippets, and each snippet that the target dialect rejects is translated:
//! deterministic rewrite rules fire first, then the LLM is prompted with the
//! abstracted snippet template and embedding-matched target-dialect
//! specifications. Every response is checked by the target grammar; parser
//! violations are fed back through a reflection prompt. When the trial budget
//! at one scope is exhausted the snippet is widened to its parent node and
//! retried, up to the whole query.

pub mod llm;
pub mod rules;

use crate::embed::{Matcher, MatchedElement};
use crate::feedback::{ConnectorError, ExecutionReport, QueryChecker};
use crate::kb::KnowledgeBase;
use crate::segment::{self, FunctionalSnippet, SnippetStatus, Template};
use crate::syntax::{node_at, FunctionRegistry, NodePath, SqlSyntax, SyntaxTree};
use crate::Dialect;
use chrono::{DateTime, Utc};
use llm::LlmClient;
use rules::RuleStore;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationMode {
    RuleOnly,
    LlmDirect,
    RulePlusLlm,
}

impl fmt::Display for TranslationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranslationMode::RuleOnly => write!(f, "rule_only"),
            TranslationMode::LlmDirect => write!(f, "llm_direct"),
            TranslationMode::RulePlusLlm => write!(f, "rule_plus_llm"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown mode `{0}`; expected rule, llm or hybrid")]
pub struct ModeParseError(String);

impl FromStr for TranslationMode {
    type Err = ModeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rule" | "rule_only" => Ok(TranslationMode::RuleOnly),
            "llm" | "llm_direct" => Ok(TranslationMode::LlmDirect),
            "hybrid" | "rule_plus_llm" => Ok(TranslationMode::RulePlusLlm),
            other => Err(ModeParseError(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslationTask {
    pub id: String,
    pub source_sql: String,
    pub source_dialect: Dialect,
    pub target_dialect: Dialect,
    pub mode: TranslationMode,
    pub max_trials: u32,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("source and target dialect must differ")]
    SameDialect,
    #[error("max_trials must be at least 1")]
    NoTrials,
    #[error("source SQL must be non-empty")]
    EmptySql,
}

impl TranslationTask {
    pub fn new(
        id: impl Into<String>,
        source_sql: impl Into<String>,
        source_dialect: Dialect,
        target_dialect: Dialect,
        mode: TranslationMode,
        max_trials: u32,
    ) -> Result<TranslationTask, TaskError> {
        let source_sql = source_sql.into();
        if source_dialect == target_dialect {
            return Err(TaskError::SameDialect);
        }
        if max_trials == 0 {
            return Err(TaskError::NoTrials);
        }
        if source_sql.trim().is_empty() {
            return Err(TaskError::EmptySql);
        }
        Ok(TranslationTask {
            id: id.into(),
            source_sql,
            source_dialect,
            target_dialect,
            mode,
            max_trials,
            created_at: Utc::now(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceAction {
    RuleHit,
    LlmAttempt,
    ParserReject,
    Reflection,
    Expansion,
    Accepted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEvent {
    pub snippet_id: Option<u32>,
    pub action: TraceAction,
    pub detail: String,
    pub trial: u32,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TranslationTrace {
    pub events: Vec<TraceEvent>,
}

impl TranslationTrace {
    pub fn push(&mut self, snippet_id: Option<u32>, action: TraceAction, detail: impl Into<String>, trial: u32) {
        self.events.push(TraceEvent { snippet_id, action, detail: detail.into(), trial });
    }

    pub fn count(&self, action: TraceAction) -> usize {
        self.events.iter().filter(|e| e.action == action).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let id = e
                .snippet_id
                .map(|i| format!("snippet {i}"))
                .unwrap_or_else(|| "query".to_string());
            out.push_str(&format!("[{:?}] {} (trial {}): {}\n", e.action, id, e.trial, e.detail));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TranslationResult {
    pub task_id: String,
    pub translated_sql: Option<String>,
    pub status: TranslationStatus,
    pub trace: TranslationTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    Ok,
    Incompatible,
    Insufficient,
}

#[derive(Debug, thiserror::Error)]
pub enum ExpandError {
    #[error("snippet already covers the whole query (AlreadyGlobal)")]
    AlreadyGlobal,
    #[error("snippet path does not resolve")]
    BadPath,
}

#[derive(Debug, thiserror::Error)]
#[error("llm produced no valid snippet within {max_trials} trials")]
pub struct TrialsExhausted {
    pub max_trials: u32,
}

/// Dependencies of one translation run. The matcher and LLM client are
/// optional because rule-only mode needs neither.
pub struct Engine<'a> {
    pub syntax: &'a SqlSyntax,
    pub kb: &'a KnowledgeBase,
    pub registry: FunctionRegistry,
    pub rules: &'a RuleStore,
    pub matcher: Option<&'a Matcher>,
    pub llm: Option<&'a dyn LlmClient>,
    pub checker: &'a dyn QueryChecker,
    /// Matched target specifications per snippet keyword in LLM prompts.
    pub spec_match_k: usize,
}

impl<'a> Engine<'a> {
    pub fn new(
        syntax: &'a SqlSyntax,
        kb: &'a KnowledgeBase,
        rules: &'a RuleStore,
        checker: &'a dyn QueryChecker,
    ) -> Engine<'a> {
        Engine {
            syntax,
            kb,
            registry: kb.function_registry(),
            rules,
            matcher: None,
            llm: None,
            checker,
            spec_match_k: 3,
        }
    }

    pub fn with_matcher(mut self, matcher: &'a Matcher) -> Engine<'a> {
        self.matcher = Some(matcher);
        self
    }

    pub fn with_llm(mut self, llm: &'a dyn LlmClient) -> Engine<'a> {
        self.llm = Some(llm);
        self
    }

    pub fn translate(&self, task: &TranslationTask) -> Result<TranslationResult, TaskError> {
        if task.source_dialect == task.target_dialect {
            return Err(TaskError::SameDialect);
        }
        if task.max_trials == 0 {
            return Err(TaskError::NoTrials);
        }
        if task.source_sql.trim().is_empty() {
            return Err(TaskError::EmptySql);
        }
        Ok(match task.mode {
            TranslationMode::RuleOnly => self.run_rule_only(task),
            TranslationMode::LlmDirect => self.run_llm_direct(task),
            TranslationMode::RulePlusLlm => self.run_hybrid(task),
        })
    }

    fn failure(&self, task: &TranslationTask, trace: TranslationTrace) -> TranslationResult {
        TranslationResult {
            task_id: task.id.clone(),
            translated_sql: None,
            status: TranslationStatus::Failure,
            trace,
        }
    }

    fn parse_source(
        &self,
        task: &TranslationTask,
        trace: &mut TranslationTrace,
    ) -> Option<SyntaxTree> {
        match self.syntax.parse(&task.source_sql, task.source_dialect) {
            Ok(tree) => Some(tree),
            Err(e) => {
                trace.push(
                    None,
                    TraceAction::ParserReject,
                    format!("source query does not parse in {}: {e}", task.source_dialect),
                    0,
                );
                None
            }
        }
    }

    /// Final whole-query validation through the execution checker.
    fn finish(
        &self,
        task: &TranslationTask,
        candidate: String,
        mut trace: TranslationTrace,
    ) -> TranslationResult {
        match self.checker.check(&candidate, task.target_dialect) {
            Ok(ExecutionReport { ok: true, .. }) => TranslationResult {
                task_id: task.id.clone(),
                translated_sql: Some(candidate),
                status: TranslationStatus::Success,
                trace,
            },
            Ok(report) => {
                trace.push(
                    None,
                    TraceAction::ParserReject,
                    format!(
                        "final validation failed: {} (candidate: {candidate})",
                        report.error_message.unwrap_or_default()
                    ),
                    0,
                );
                self.failure(task, trace)
            }
            Err(ConnectorError::Unavailable(reason)) => {
                trace.push(None, TraceAction::ParserReject, format!("connector unavailable: {reason}"), 0);
                self.failure(task, trace)
            }
        }
    }

    fn run_rule_only(&self, task: &TranslationTask) -> TranslationResult {
        let mut trace = TranslationTrace::default();
        let Some(tree) = self.parse_source(task, &mut trace) else {
            return self.failure(task, trace);
        };
        let mut replacements: BTreeMap<NodePath, String> = BTreeMap::new();
        for snippet in self.segment_and_normalize(&tree) {
            let mut snippet = snippet;
            if self.snippet_ok_in_target(&snippet, task.target_dialect) {
                let _ = snippet.transition(SnippetStatus::Translated);
                continue;
            }
            let _ = snippet.transition(SnippetStatus::Incompatible);
            match self.rules.apply_first_with_rule(
                &snippet.text,
                task.source_dialect,
                task.target_dialect,
            ) {
                Some((text, rule)) => {
                    trace.push(
                        Some(snippet.id),
                        TraceAction::RuleHit,
                        format!("{}: {} -> {}", rule.keyword, snippet.text, text),
                        0,
                    );
                    let report = self.syntax.validate_fragment(
                        &text,
                        &snippet.node_kind,
                        task.target_dialect,
                        &self.registry,
                    );
                    if report.ok {
                        trace.push(Some(snippet.id), TraceAction::Accepted, text.clone(), 0);
                        replacements.insert(snippet.tree_path.clone(), text);
                        let _ = snippet.transition(SnippetStatus::Translated);
                    } else {
                        trace.push(
                            Some(snippet.id),
                            TraceAction::ParserReject,
                            format!("rule output rejected by {}: {}", task.target_dialect, report.summary()),
                            0,
                        );
                        return self.failure(task, trace);
                    }
                }
                None => {
                    trace.push(
                        Some(snippet.id),
                        TraceAction::ParserReject,
                        format!(
                            "no applicable rule for snippet {} `{}` ({} -> {})",
                            snippet.id, snippet.text, task.source_dialect, task.target_dialect
                        ),
                        0,
                    );
                    return self.failure(task, trace);
                }
            }
        }
        match segment::reassemble(self.syntax, &tree, &replacements, task.target_dialect) {
            Ok(candidate) => self.finish(task, candidate, trace),
            Err(e) => {
                trace.push(None, TraceAction::ParserReject, format!("reassembly failed: {e}"), 0);
                self.failure(task, trace)
            }
        }
    }

    fn run_llm_direct(&self, task: &TranslationTask) -> TranslationResult {
        let mut trace = TranslationTrace::default();
        let Some(client) = self.llm else {
            trace.push(None, TraceAction::ParserReject, "llm_direct mode requires an LLM client", 0);
            return self.failure(task, trace);
        };
        let prompt = whole_query_prompt(&task.source_sql, task.source_dialect, task.target_dialect);
        trace.push(None, TraceAction::LlmAttempt, "whole-query prompt", 1);
        match client.complete(&prompt, 0.0) {
            Ok(response) => self.finish(task, response, trace),
            Err(e) => {
                trace.push(None, TraceAction::ParserReject, format!("llm error: {e}"), 1);
                self.failure(task, trace)
            }
        }
    }

    fn run_hybrid(&self, task: &TranslationTask) -> TranslationResult {
        let mut trace = TranslationTrace::default();
        let Some(tree) = self.parse_source(task, &mut trace) else {
            return self.failure(task, trace);
        };
        let mut replacements: BTreeMap<NodePath, String> = BTreeMap::new();
        let snippets = self.segment_and_normalize(&tree);
        for snippet in snippets {
            // an earlier expansion may already cover this snippet's subtree
            if replacements.keys().any(|p| p.is_prefix_of(&snippet.tree_path)) {
                continue;
            }
            if let Err(fail) =
                self.translate_snippet_local_to_global(task, &tree, snippet, &mut replacements, &mut trace)
            {
                match fail {
                    SnippetFailure::Fatal => return self.failure(task, trace),
                }
            }
        }
        match segment::reassemble(self.syntax, &tree, &replacements, task.target_dialect) {
            Ok(candidate) => self.finish(task, candidate, trace),
            Err(e) => {
                trace.push(None, TraceAction::ParserReject, format!("reassembly failed: {e}"), 0);
                self.failure(task, trace)
            }
        }
    }

    fn segment_and_normalize(&self, tree: &SyntaxTree) -> Vec<FunctionalSnippet> {
        segment::segment(self.syntax, tree, self.kb)
            .into_iter()
            .map(|s| segment::normalize(&s, self.rules, self.syntax, self.kb))
            .collect()
    }

    fn translate_snippet_local_to_global(
        &self,
        task: &TranslationTask,
        tree: &SyntaxTree,
        snippet: FunctionalSnippet,
        replacements: &mut BTreeMap<NodePath, String>,
        trace: &mut TranslationTrace,
    ) -> Result<(), SnippetFailure> {
        let mut current = snippet;
        loop {
            if self.snippet_ok_in_target(&current, task.target_dialect) {
                let _ = current.transition(SnippetStatus::Translated);
                return Ok(());
            }
            let _ = current.transition(SnippetStatus::Incompatible);

            // rule first, unconditionally
            if let Some((text, rule)) = self.rules.apply_first_with_rule(
                &current.text,
                task.source_dialect,
                task.target_dialect,
            ) {
                trace.push(
                    Some(current.id),
                    TraceAction::RuleHit,
                    format!("{}: {} -> {}", rule.keyword, current.text, text),
                    0,
                );
                let report = self.syntax.validate_fragment(
                    &text,
                    &current.node_kind,
                    task.target_dialect,
                    &self.registry,
                );
                if report.ok {
                    trace.push(Some(current.id), TraceAction::Accepted, text.clone(), 0);
                    replacements.insert(current.tree_path.clone(), text);
                    let _ = current.transition(SnippetStatus::Translated);
                    return Ok(());
                }
                trace.push(
                    Some(current.id),
                    TraceAction::ParserReject,
                    format!("rule output rejected by {}: {}", task.target_dialect, report.summary()),
                    0,
                );
            }

            // LLM fallback with matched specifications
            let llm_outcome = match self.llm {
                Some(client) => {
                    let matched = self.matched_specs(&current, task.target_dialect);
                    match self.translate_snippet_llm(
                        &current,
                        task.target_dialect,
                        &matched,
                        client,
                        task.max_trials,
                        trace,
                    ) {
                        Ok((text, _trials)) => Some(text),
                        Err(LlmSnippetError::Exhausted(_)) => None,
                        Err(LlmSnippetError::Fatal(msg)) => {
                            trace.push(Some(current.id), TraceAction::ParserReject, msg, 0);
                            return Err(SnippetFailure::Fatal);
                        }
                    }
                }
                None => None,
            };
            if let Some(text) = llm_outcome {
                replacements.insert(current.tree_path.clone(), text);
                let _ = current.transition(SnippetStatus::Translated);
                return Ok(());
            }

            // insufficiency: widen the scope to the parent node
            let _ = current.transition(SnippetStatus::Insufficient);
            match self.expand_scope(tree, &current) {
                Ok(expanded) => {
                    trace.push(
                        Some(current.id),
                        TraceAction::Expansion,
                        format!(
                            "scope widened from {} to {} (depth {})",
                            current.tree_path, expanded.tree_path, expanded.expansion_depth
                        ),
                        0,
                    );
                    // inner translations are superseded by the wider scope
                    replacements.retain(|p, _| !expanded.tree_path.is_prefix_of(p));
                    current = expanded;
                }
                Err(e) => {
                    trace.push(
                        Some(current.id),
                        TraceAction::ParserReject,
                        format!("{e}"),
                        0,
                    );
                    return Err(SnippetFailure::Fatal);
                }
            }
        }
    }

    /// Threshold-first classification: a snippet over budget is insufficient
    /// regardless of its current text; otherwise target validation decides.
    pub fn classify_failure(
        &self,
        snippet: &FunctionalSnippet,
        target: Dialect,
        trials_used: u32,
        max_trials: u32,
    ) -> FailureClass {
        if trials_used >= max_trials {
            return FailureClass::Insufficient;
        }
        if self.snippet_ok_in_target(snippet, target) {
            FailureClass::Ok
        } else {
            FailureClass::Incompatible
        }
    }

    /// A snippet passes when the target grammar and function registry accept
    /// it. Bare niladic keywords (`SYSDATE`) additionally require a target
    /// knowledge-base entry whose signature allows the parenthesis-free form,
    /// since any bare word parses as a column reference.
    pub fn snippet_ok_in_target(&self, snippet: &FunctionalSnippet, target: Dialect) -> bool {
        self.snippet_text_ok_in_target(&snippet.text, &snippet.node_kind, snippet.dialect, target)
            .ok
    }

    fn snippet_text_ok_in_target(
        &self,
        text: &str,
        node_kind: &str,
        source: Dialect,
        target: Dialect,
    ) -> crate::syntax::ValidationReport {
        let report = self.syntax.validate_fragment(text, node_kind, target, &self.registry);
        if !report.ok {
            return report;
        }
        if let Some(keyword) = bare_word(text) {
            let is_source_fn = self
                .kb
                .lookup(source, &keyword)
                .iter()
                .any(|s| s.element_class == crate::kb::ElementClass::Function);
            if is_source_fn {
                let allowed = self
                    .kb
                    .lookup(target, &keyword)
                    .iter()
                    .any(|s| {
                        s.element_class == crate::kb::ElementClass::Function
                            && signature_allows_bare(&s.signature, &keyword)
                    });
                if !allowed {
                    return crate::syntax::ValidationReport::failing(vec![
                        crate::syntax::Violation {
                            path: NodePath::root(),
                            expected: format!("function known to {target}"),
                            found: keyword.clone(),
                            message: format!("unknown function {keyword} in {target}"),
                        },
                    ]);
                }
            }
        }
        report
    }

    /// Top-k matched target-dialect specifications for each snippet keyword.
    pub fn matched_specs(
        &self,
        snippet: &FunctionalSnippet,
        target: Dialect,
    ) -> Vec<(MatchedElement, f64)> {
        let Some(matcher) = self.matcher else {
            return Vec::new();
        };
        let mut merged: Vec<(MatchedElement, f64)> = Vec::new();
        for keyword in &snippet.keywords {
            let Some(spec) = self.kb.lookup(snippet.dialect, keyword).into_iter().next() else {
                continue;
            };
            if let Ok(matches) = matcher.rank(spec, target, self.spec_match_k) {
                for (el, score) in matches {
                    if let Some(existing) = merged
                        .iter_mut()
                        .find(|(e, _)| e.keyword == el.keyword && e.element_class == el.element_class)
                    {
                        existing.1 = existing.1.max(score);
                    } else {
                        merged.push((el, score));
                    }
                }
            }
        }
        merged.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.keyword.cmp(&b.0.keyword)));
        merged.truncate(9);
        merged
    }

    /// Prompts the LLM with the abstracted snippet, validating each response
    /// with the target grammar and reflecting parser violations back until a
    /// response passes or the budget runs out.
    pub fn translate_snippet_llm(
        &self,
        snippet: &FunctionalSnippet,
        target: Dialect,
        matched: &[(MatchedElement, f64)],
        client: &dyn LlmClient,
        max_trials: u32,
        trace: &mut TranslationTrace,
    ) -> Result<(String, u32), LlmSnippetError> {
        let (template, bindings) = match segment::abstract_snippet(self.syntax, snippet) {
            Ok(r) => r,
            Err(e) => return Err(LlmSnippetError::Fatal(format!("cannot abstract snippet: {e}"))),
        };
        let mut prior_errors: Vec<String> = Vec::new();
        for trial in 1..=max_trials {
            if trial > 1 {
                trace.push(
                    Some(snippet.id),
                    TraceAction::Reflection,
                    prior_errors.last().cloned().unwrap_or_default(),
                    trial,
                );
            }
            let prompt = snippet_prompt(&template, snippet.dialect, target, matched, &prior_errors);
            trace.push(Some(snippet.id), TraceAction::LlmAttempt, format!("trial {trial}"), trial);
            let response = match client.complete(&prompt, 0.0) {
                Ok(r) => r,
                Err(e) => return Err(LlmSnippetError::Fatal(format!("llm error: {e}"))),
            };
            match segment::restore(&bindings, &response) {
                Err(e) => {
                    let msg = e.to_string();
                    trace.push(Some(snippet.id), TraceAction::ParserReject, msg.clone(), trial);
                    prior_errors.push(msg);
                }
                Ok(candidate) => {
                    let report = self.snippet_text_ok_in_target(
                        &candidate,
                        &snippet.node_kind,
                        snippet.dialect,
                        target,
                    );
                    if report.ok {
                        trace.push(Some(snippet.id), TraceAction::Accepted, candidate.clone(), trial);
                        return Ok((candidate, trial));
                    }
                    let msg = report.summary();
                    trace.push(Some(snippet.id), TraceAction::ParserReject, msg.clone(), trial);
                    prior_errors.push(msg);
                }
            }
        }
        Err(LlmSnippetError::Exhausted(TrialsExhausted { max_trials }))
    }

    /// Widens a snippet to its parent node, resetting it to pending with an
    /// incremented expansion depth. Expanding the whole query fails.
    pub fn expand_scope(
        &self,
        tree: &SyntaxTree,
        snippet: &FunctionalSnippet,
    ) -> Result<FunctionalSnippet, ExpandError> {
        let parent = snippet.tree_path.parent().ok_or(ExpandError::AlreadyGlobal)?;
        node_at(tree, &parent).map_err(|_| ExpandError::BadPath)?;
        let mut expanded = segment::snippet_for_node(
            self.syntax,
            tree,
            &parent,
            self.kb,
            snippet.id,
            snippet.expansion_depth + 1,
        )
        .map_err(|_| ExpandError::BadPath)?;
        expanded.status = SnippetStatus::Pending;
        Ok(expanded)
    }

    /// Rule-path translation of a single snippet, if any rule matches.
    pub fn translate_snippet_rule(&self, snippet: &FunctionalSnippet, target: Dialect) -> Option<String> {
        self.rules.apply_first(&snippet.text, snippet.dialect, target)
    }
}

enum SnippetFailure {
    Fatal,
}

#[derive(Debug)]
pub enum LlmSnippetError {
    Exhausted(TrialsExhausted),
    Fatal(String),
}

/// The upper-cased word when the text is one single unquoted word token.
fn bare_word(text: &str) -> Option<String> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return None;
    }
    let word = trimmed
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_')
        .then(|| trimmed.to_ascii_uppercase())?;
    word.chars().next().filter(|c| c.is_ascii_alphabetic())?;
    Some(word)
}

/// True when the signature has an alternative consisting of just the keyword,
/// i.e. the element is usable without parentheses.
fn signature_allows_bare(signature: &str, keyword: &str) -> bool {
    match crate::bnf::parse_signature(signature) {
        Ok(alts) => alts.iter().any(|alt| {
            alt.len() == 1
                && matches!(&alt[0], crate::bnf::Term::Terminal(t) if t.eq_ignore_ascii_case(keyword))
        }),
        Err(_) => false,
    }
}

fn dialect_title(d: Dialect) -> &'static str {
    match d {
        Dialect::Postgresql => "PostgreSQL",
        Dialect::Mysql => "MySQL",
        Dialect::Oracle => "Oracle",
    }
}

/// Fixed prompt template with named sections; sampling runs at temperature 0.
fn snippet_prompt(
    template: &Template,
    source: Dialect,
    target: Dialect,
    matched: &[(MatchedElement, f64)],
    prior_errors: &[String],
) -> String {
    let mut out = String::new();
    out.push_str("Translate the SQL snippet between dialects.\n\n");
    out.push_str("SNIPPET:\n");
    out.push_str(&template.text_with_placeholders);
    out.push_str("\n\nSOURCE_DIALECT: ");
    out.push_str(dialect_title(source));
    out.push_str("\nTARGET_DIALECT: ");
    out.push_str(dialect_title(target));
    out.push_str("\n\nSPECIFICATIONS:\n");
    if matched.is_empty() {
        out.push_str("- none\n");
    }
    for (el, _) in matched {
        out.push_str(&format!(
            "- [{}] {}: {} -- {}\n",
            el.dialect, el.keyword, el.signature, el.description
        ));
    }
    out.push_str("\nPRIOR_ERRORS:\n");
    if prior_errors.is_empty() {
        out.push_str("- none\n");
    }
    for e in prior_errors {
        out.push_str(&format!("- {e}\n"));
    }
    out.push_str(
        "\nKeep placeholder tokens such as <column_1> exactly as written. \
         Reply with only the translated snippet text.\n",
    );
    out
}

fn whole_query_prompt(sql: &str, source: Dialect, target: Dialect) -> String {
    let mut out = String::new();
    out.push_str("Translate the SQL query between dialects.\n\n");
    out.push_str("SNIPPET:\n");
    out.push_str(sql);
    out.push_str("\n\nSOURCE_DIALECT: ");
    out.push_str(dialect_title(source));
    out.push_str("\nTARGET_DIALECT: ");
    out.push_str(dialect_title(target));
    out.push_str("\n\nSPECIFICATIONS:\n- none\n\nPRIOR_ERRORS:\n- none\n");
    out.push_str("\nReply with only the translated SQL query.\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled::{kb, rules, syntax};
    use crate::feedback::{ErrorClassifier, StubChecker};
    use llm::MockLlmClient;

    fn checker() -> StubChecker<'static> {
        StubChecker::new(
            syntax(),
            kb().function_registry(),
            ErrorClassifier::load(&crate::bundled::error_patterns_path()).unwrap(),
        )
    }

    fn task(sql: &str, from: Dialect, to: Dialect, mode: TranslationMode) -> TranslationTask {
        TranslationTask::new("t1", sql, from, to, mode, 3).unwrap()
    }

    #[test]
    fn task_invariants_are_enforced() {
        assert!(matches!(
            TranslationTask::new("x", "SELECT 1", Dialect::Oracle, Dialect::Oracle, TranslationMode::RuleOnly, 3),
            Err(TaskError::SameDialect)
        ));
        assert!(matches!(
            TranslationTask::new("x", "SELECT 1", Dialect::Oracle, Dialect::Mysql, TranslationMode::RuleOnly, 0),
            Err(TaskError::NoTrials)
        ));
        assert!(matches!(
            TranslationTask::new("x", "  ", Dialect::Oracle, Dialect::Mysql, TranslationMode::RuleOnly, 1),
            Err(TaskError::EmptySql)
        ));
    }

    #[test]
    fn hybrid_uses_rule_without_llm_attempts() {
        let chk = checker();
        let engine = Engine::new(syntax(), kb(), rules(), &chk);
        let result = engine
            .translate(&task(
                "SELECT NVL(a, 0) FROM t",
                Dialect::Oracle,
                Dialect::Postgresql,
                TranslationMode::RulePlusLlm,
            ))
            .unwrap();
        assert_eq!(result.status, TranslationStatus::Success);
        assert_eq!(result.translated_sql.as_deref(), Some("SELECT COALESCE(a, 0) FROM t"));
        assert_eq!(result.trace.count(TraceAction::RuleHit), 1);
        assert_eq!(result.trace.count(TraceAction::LlmAttempt), 0);
    }

    #[test]
    fn no_snippets_means_canonical_render() {
        let chk = checker();
        let engine = Engine::new(syntax(), kb(), rules(), &chk);
        let result = engine
            .translate(&task(
                "select  a , b from t where a > 1",
                Dialect::Oracle,
                Dialect::Postgresql,
                TranslationMode::RulePlusLlm,
            ))
            .unwrap();
        assert_eq!(result.status, TranslationStatus::Success);
        assert_eq!(
            result.translated_sql.as_deref(),
            Some("SELECT a, b FROM t WHERE a > 1")
        );
        assert!(result.trace.events.is_empty());
    }

    #[test]
    fn rule_only_fails_with_parser_reject_naming_the_snippet() {
        let chk = checker();
        let engine = Engine::new(syntax(), kb(), rules(), &chk);
        let result = engine
            .translate(&task(
                "SELECT DECODE(status, 1, 'a', 'b') FROM t",
                Dialect::Oracle,
                Dialect::Postgresql,
                TranslationMode::RuleOnly,
            ))
            .unwrap();
        assert_eq!(result.status, TranslationStatus::Failure);
        let last = result.trace.events.last().unwrap();
        assert_eq!(last.action, TraceAction::ParserReject);
        assert!(last.detail.contains("no applicable rule"));
        assert!(last.detail.contains("DECODE"));
    }

    #[test]
    fn classify_failure_matches_contract() {
        let chk = checker();
        let engine = Engine::new(syntax(), kb(), rules(), &chk);
        let tree = syntax().parse("SELECT NVL(a, 0) FROM t", Dialect::Oracle).unwrap();
        let snippet = crate::segment::segment(syntax(), &tree, kb()).remove(0);
        assert_eq!(
            engine.translate_snippet_rule(&snippet, Dialect::Postgresql).as_deref(),
            Some("COALESCE(a, 0)")
        );
        assert_eq!(
            engine.classify_failure(&snippet, Dialect::Postgresql, 0, 3),
            FailureClass::Incompatible
        );
        assert_eq!(
            engine.classify_failure(&snippet, Dialect::Postgresql, 3, 3),
            FailureClass::Insufficient
        );
        let mut ok = snippet.clone();
        ok.text = "COALESCE(a, 0)".to_string();
        assert_eq!(
            engine.classify_failure(&ok, Dialect::Postgresql, 0, 3),
            FailureClass::Ok
        );
    }

    #[test]
    fn bare_niladic_keywords_require_bare_target_form() {
        let chk = checker();
        let engine = Engine::new(syntax(), kb(), rules(), &chk);
        let tree = syntax().parse("SELECT SYSDATE FROM t", Dialect::Oracle).unwrap();
        let snippet = crate::segment::segment(syntax(), &tree, kb()).remove(0);
        assert_eq!(snippet.text, "SYSDATE");
        // SYSDATE exists in MySQL but only with parentheses
        assert!(!engine.snippet_ok_in_target(&snippet, Dialect::Mysql));
        assert!(!engine.snippet_ok_in_target(&snippet, Dialect::Postgresql));
    }

    #[test]
    fn llm_fixture_first_try() {
        let chk = checker();
        let mock = MockLlmClient::from_responses(vec![
            "COALESCE(<column_1>, <literal_1>)".to_string(),
        ]);
        let engine = Engine::new(syntax(), kb(), rules(), &chk).with_llm(&mock);
        let tree = syntax().parse("SELECT NVL(a, 0) FROM t", Dialect::Oracle).unwrap();
        let snippet = crate::segment::segment(syntax(), &tree, kb()).remove(0);
        let mut trace = TranslationTrace::default();
        let (text, trials) = engine
            .translate_snippet_llm(&snippet, Dialect::Postgresql, &[], &mock, 3, &mut trace)
            .unwrap();
        assert_eq!(text, "COALESCE(a, 0)");
        assert_eq!(trials, 1);
        assert_eq!(trace.count(TraceAction::Reflection), 0);
    }

    #[test]
    fn llm_fixture_invalid_then_valid_shows_one_reflection() {
        let chk = checker();
        let mock = MockLlmClient::from_responses(vec![
            "FROBNICATE(<column_1>, <literal_1>)".to_string(),
            "COALESCE(<column_1>, <literal_1>)".to_string(),
        ]);
        let engine = Engine::new(syntax(), kb(), rules(), &chk).with_llm(&mock);
        let tree = syntax().parse("SELECT NVL(a, 0) FROM t", Dialect::Oracle).unwrap();
        let snippet = crate::segment::segment(syntax(), &tree, kb()).remove(0);
        let mut trace = TranslationTrace::default();
        let (_, trials) = engine
            .translate_snippet_llm(&snippet, Dialect::Postgresql, &[], &mock, 3, &mut trace)
            .unwrap();
        assert_eq!(trials, 2);
        assert_eq!(trace.count(TraceAction::Reflection), 1);
        assert_eq!(trace.count(TraceAction::ParserReject), 1);
    }

    #[test]
    fn llm_hallucination_exhausts_trials() {
        let chk = checker();
        let mock = MockLlmClient::from_responses(vec![
            "NO_SUCH_FN(<column_1>, <literal_1>)".to_string(),
            "NO_SUCH_FN(<column_1>, <literal_1>)".to_string(),
            "NO_SUCH_FN(<column_1>, <literal_1>)".to_string(),
        ]);
        let engine = Engine::new(syntax(), kb(), rules(), &chk).with_llm(&mock);
        let tree = syntax().parse("SELECT NVL(a, 0) FROM t", Dialect::Oracle).unwrap();
        let snippet = crate::segment::segment(syntax(), &tree, kb()).remove(0);
        let mut trace = TranslationTrace::default();
        let err = engine
            .translate_snippet_llm(&snippet, Dialect::Postgresql, &[], &mock, 3, &mut trace)
            .unwrap_err();
        assert!(matches!(err, LlmSnippetError::Exhausted(TrialsExhausted { max_trials: 3 })));
        assert_eq!(trace.count(TraceAction::LlmAttempt), 3);
    }

    #[test]
    fn expand_scope_steps_to_parent_until_root() {
        let chk = checker();
        let engine = Engine::new(syntax(), kb(), rules(), &chk);
        let tree = syntax()
            .parse("SELECT NVL(a, 0) FROM t", Dialect::Oracle)
            .unwrap();
        let snippet = crate::segment::segment(syntax(), &tree, kb()).remove(0);
        let mut current = snippet;
        let mut steps = 0;
        while !current.tree_path.is_root() {
            current = engine.expand_scope(&tree, &current).unwrap();
            steps += 1;
            assert_eq!(current.expansion_depth as usize, steps);
            assert_eq!(current.status, crate::segment::SnippetStatus::Pending);
        }
        assert!(steps <= 20);
        assert!(matches!(
            engine.expand_scope(&tree, &current),
            Err(ExpandError::AlreadyGlobal)
        ));
    }

    #[test]
    fn llm_direct_is_single_shot_with_no_rules() {
        let chk = checker();
        let mock = MockLlmClient::from_responses(vec![
            "SELECT COALESCE(a, 0) FROM t".to_string(),
        ]);
        let engine = Engine::new(syntax(), kb(), rules(), &chk).with_llm(&mock);
        let result = engine
            .translate(&task(
                "SELECT NVL(a, 0) FROM t",
                Dialect::Oracle,
                Dialect::Postgresql,
                TranslationMode::LlmDirect,
            ))
            .unwrap();
        assert_eq!(result.status, TranslationStatus::Success);
        assert_eq!(result.translated_sql.as_deref(), Some("SELECT COALESCE(a, 0) FROM t"));
        assert_eq!(result.trace.count(TraceAction::RuleHit), 0);
        assert_eq!(result.trace.count(TraceAction::LlmAttempt), 1);
    }

    #[test]
    fn hybrid_expands_scope_after_exhausted_trials() {
        let chk = checker();
        // three bad snippet-scope responses, then a good parent-scope one
        let mock = MockLlmClient::from_responses(vec![
            "NO_SUCH_FN(<column_1>)".to_string(),
            "NO_SUCH_FN(<column_1>)".to_string(),
            "NO_SUCH_FN(<column_1>)".to_string(),
            "CASE WHEN <column_1> = <literal_1> THEN <literal_2> ELSE <literal_3> END".to_string(),
        ]);
        let engine = Engine::new(syntax(), kb(), rules(), &chk).with_llm(&mock);
        let result = engine
            .translate(&task(
                "SELECT DECODE(status, 1, 'a', 'b') FROM t",
                Dialect::Oracle,
                Dialect::Postgresql,
                TranslationMode::RulePlusLlm,
            ))
            .unwrap();
        assert_eq!(result.status, TranslationStatus::Success, "{}", result.trace.render());
        assert_eq!(result.trace.count(TraceAction::Expansion), 1);
        assert_eq!(
            result.translated_sql.as_deref(),
            Some("SELECT CASE WHEN status = 1 THEN 'a' ELSE 'b' END FROM t")
        );
    }

    #[test]
    fn hybrid_reports_already_global_when_every_scope_fails() {
        let chk = checker();
        let bad = "NO_SUCH_FN(<column_1>)".to_string();
        let mock = MockLlmClient::from_responses(vec![bad; 12]);
        let engine = Engine::new(syntax(), kb(), rules(), &chk).with_llm(&mock);
        let result = engine
            .translate(&task(
                "SELECT DECODE(status, 1, 'a', 'b') FROM t",
                Dialect::Oracle,
                Dialect::Postgresql,
                TranslationMode::RulePlusLlm,
            ))
            .unwrap();
        assert_eq!(result.status, TranslationStatus::Failure);
        assert!(result.trace.render().contains("AlreadyGlobal"), "{}", result.trace.render());
    }

    #[test]
    fn rule_first_discipline_in_trace() {
        let chk = checker();
        let mock = MockLlmClient::from_responses(vec!["unused".to_string()]);
        let engine = Engine::new(syntax(), kb(), rules(), &chk).with_llm(&mock);
        let result = engine
            .translate(&task(
                "SELECT NVL(a, 0), SYSDATE FROM t",
                Dialect::Oracle,
                Dialect::Mysql,
                TranslationMode::RulePlusLlm,
            ))
            .unwrap();
        assert_eq!(result.status, TranslationStatus::Success);
        assert_eq!(result.trace.count(TraceAction::LlmAttempt), 0);
        assert_eq!(result.trace.count(TraceAction::RuleHit), 2);
        assert_eq!(
            result.translated_sql.as_deref(),
            Some("SELECT IFNULL(a, 0), NOW() FROM t")
        );
    }

    #[test]
    fn expansion_supersedes_sibling_snippets() {
        let chk = checker();
        // DECODE fails locally, then the widened select_list scope succeeds;
        // the NVL sibling inside that scope must not be translated twice
        let mock = MockLlmClient::from_responses(vec![
            "NO_SUCH_FN(<column_1>)".to_string(),
            "NO_SUCH_FN(<column_1>)".to_string(),
            "NO_SUCH_FN(<column_1>)".to_string(),
            "CASE WHEN <column_1> = <literal_1> THEN <literal_2> ELSE <literal_3> END, COALESCE(<column_2>, <literal_4>)"
                .to_string(),
        ]);
        let engine = Engine::new(syntax(), kb(), rules(), &chk).with_llm(&mock);
        let result = engine
            .translate(&task(
                "SELECT DECODE(status, 1, 'a', 'b'), NVL(a, 0) FROM t",
                Dialect::Oracle,
                Dialect::Postgresql,
                TranslationMode::RulePlusLlm,
            ))
            .unwrap();
        assert_eq!(result.status, TranslationStatus::Success, "{}", result.trace.render());
        assert_eq!(
            result.translated_sql.as_deref(),
            Some("SELECT CASE WHEN status = 1 THEN 'a' ELSE 'b' END, COALESCE(a, 0) FROM t")
        );
        assert_eq!(result.trace.count(TraceAction::Expansion), 1);
    }

    #[test]
    fn unparseable_source_is_failure_not_panic() {
        let chk = checker();
        let engine = Engine::new(syntax(), kb(), rules(), &chk);
        let result = engine
            .translate(&task(
                "SELECT FROM WHERE",
                Dialect::Oracle,
                Dialect::Postgresql,
                TranslationMode::RuleOnly,
            ))
            .unwrap();
        assert_eq!(result.status, TranslationStatus::Failure);
        assert!(result.translated_sql.is_none());
    }
}
