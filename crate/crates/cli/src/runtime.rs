//! Loaded translation stack shared by the CLI and the HTTP service: grammars,
//! knowledge base, rule store, error patterns, optional embedding weights and
//! LLM client settings. A fresh LLM client is created per task so that mock
//! fixtures replay identically across tasks.

use crate::config::{Config, ConfigError};
use sqlbridge_core::embed::{Matcher, ModelWeights};
use sqlbridge_core::engine::llm::{HttpLlmClient, LlmClient, LlmError, MockLlmClient};
use sqlbridge_core::engine::rules::RuleStore;
use sqlbridge_core::engine::{Engine, TaskError, TranslationResult, TranslationTask};
use sqlbridge_core::feedback::{ErrorClassifier, StubChecker};
use sqlbridge_core::kb::KnowledgeBase;
use sqlbridge_core::syntax::{FunctionRegistry, SqlSyntax};

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load grammars: {0}")]
    Grammar(#[from] sqlbridge_core::bnf::BnfError),
    #[error("cannot load knowledge base: {0}")]
    Kb(#[from] sqlbridge_core::kb::KbError),
    #[error("cannot load rule store: {0}")]
    Rules(#[from] sqlbridge_core::engine::rules::RuleError),
    #[error("cannot load error patterns: {0}")]
    Patterns(#[from] sqlbridge_core::feedback::PatternError),
    #[error("cannot load weights: {0}")]
    Weights(#[from] sqlbridge_core::embed::WeightsError),
    #[error("cannot build matcher: {0}")]
    Matcher(#[from] sqlbridge_core::embed::MatchError),
    #[error("cannot build llm client: {0}")]
    Llm(#[from] LlmError),
}

pub struct Runtime {
    pub config: Config,
    pub syntax: SqlSyntax,
    pub kb: KnowledgeBase,
    pub rules: RuleStore,
    pub registry: FunctionRegistry,
    pub classifier: ErrorClassifier,
    pub matcher: Option<Matcher>,
}

impl Runtime {
    pub fn load(config: Config) -> Result<Runtime, RuntimeError> {
        let syntax = SqlSyntax::load_dir(&config.grammars_dir)?;
        let kb = KnowledgeBase::load(&config.kb_path)?;
        let rules = RuleStore::load(&config.rules_path)?;
        let classifier = ErrorClassifier::load(&config.error_patterns_path)?;
        let registry = kb.function_registry();
        let matcher = match &config.weights_path {
            Some(path) => {
                let weights = ModelWeights::load(path)?;
                Some(Matcher::new(&kb, weights)?)
            }
            None => None,
        };
        Ok(Runtime { config, syntax, kb, rules, registry, classifier, matcher })
    }

    /// Fresh client per task: ordered mock fixtures restart from the first
    /// response, and HTTP clients carry no cross-task state.
    pub fn make_llm(&self) -> Result<Option<Box<dyn LlmClient>>, RuntimeError> {
        let llm = &self.config.llm;
        if let (Some(endpoint), Some(model)) = (&llm.endpoint, &llm.model) {
            let client = HttpLlmClient::new(endpoint, model, llm.api_key.as_deref())?;
            return Ok(Some(Box::new(client)));
        }
        if let Some(fixture) = &llm.mock_fixture {
            let client = MockLlmClient::from_fixture_file(fixture)?;
            return Ok(Some(Box::new(client)));
        }
        Ok(None)
    }

    pub fn run(&self, task: &TranslationTask) -> Result<TranslationResult, RunError> {
        let llm = self.make_llm()?;
        let checker =
            StubChecker::new(&self.syntax, self.registry.clone(), self.classifier.clone());
        let mut engine = Engine::new(&self.syntax, &self.kb, &self.rules, &checker);
        if let Some(matcher) = &self.matcher {
            engine = engine.with_matcher(matcher);
        }
        if let Some(client) = &llm {
            engine = engine.with_llm(client.as_ref());
        }
        Ok(engine.translate(task)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}
