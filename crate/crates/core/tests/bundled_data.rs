//! Integrity checks over the shipped data files: the corpus validates in its
//! own dialects, the knowledge base is large enough and internally
//! consistent, and the training-pair construction honors its contracts.

use sqlbridge_core::bundled;
use sqlbridge_core::embed::features;
use sqlbridge_core::embed::train::{self, PairLabel, Provenance, SynonymTable};
use sqlbridge_core::kb::ElementClass;
use sqlbridge_core::Dialect;

#[test]
fn corpus_parses_and_validates_in_its_own_dialect() {
    let registry = bundled::kb().function_registry();
    for entry in bundled::corpus() {
        let tree = bundled::syntax()
            .parse(&entry.sql, entry.dialect)
            .unwrap_or_else(|e| panic!("{} `{}`: {e}", entry.dialect, entry.sql));
        let report = bundled::syntax().validate(&tree, entry.dialect, &registry);
        assert!(report.ok, "`{}`: {}", entry.sql, report.summary());
    }
}

#[test]
fn kb_has_desk_scale_coverage() {
    for dialect in Dialect::ALL {
        let n = bundled::kb().elements_of(dialect).len();
        assert!(n >= 40, "{dialect} has only {n} entries");
    }
    let labels: usize = bundled::kb()
        .entries()
        .iter()
        .map(|e| e.equivalences.len())
        .sum();
    assert!(labels >= 30, "only {labels} equivalence labels");
    // every hand label points at an existing entry
    for spec in bundled::kb().entries() {
        for eq in &spec.equivalences {
            assert!(
                !bundled::kb().lookup(eq.dialect, &eq.keyword).is_empty(),
                "{} {} labels missing {} {}",
                spec.dialect,
                spec.keyword,
                eq.dialect,
                eq.keyword
            );
        }
    }
}

#[test]
fn kb_lookup_examples() {
    let nvl = bundled::kb().lookup(Dialect::Oracle, "NVL");
    assert_eq!(nvl.len(), 1);
    assert_eq!(nvl[0].element_class, ElementClass::Function);
    assert!(bundled::kb().lookup(Dialect::Postgresql, "NVL").is_empty());
    // case-insensitive
    let lower = bundled::kb().lookup(Dialect::Mysql, "timestampdiff");
    let upper = bundled::kb().lookup(Dialect::Mysql, "TIMESTAMPDIFF");
    assert_eq!(lower.len(), 1);
    assert_eq!(lower[0].keyword, upper[0].keyword);
    // elements_of is sorted and contains every lookup hit
    let all = bundled::kb().elements_of(Dialect::Oracle);
    let mut sorted = all.iter().map(|e| e.keyword.clone()).collect::<Vec<_>>();
    sorted.sort();
    assert_eq!(
        all.iter().map(|e| e.keyword.clone()).collect::<Vec<_>>(),
        sorted
    );
}

#[test]
fn equivalent_functions_share_text_features() {
    let nvl = &bundled::kb().lookup(Dialect::Oracle, "NVL")[0];
    let ifnull = &bundled::kb().lookup(Dialect::Mysql, "IFNULL")[0];
    let fa = features::text_features(&nvl.description, 2048);
    let fb = features::text_features(&ifnull.description, 2048);
    let shared = fa.keys().filter(|k| fb.contains_key(k)).count();
    assert!(shared >= 1, "NVL and IFNULL descriptions share no features");
    let null_bucket = (features::fnv1a("null") % 2048) as u32;
    assert!(
        fa.contains_key(&null_bucket) && fb.contains_key(&null_bucket),
        "expected the null vocabulary to overlap"
    );
}

#[test]
fn build_pairs_honors_the_three_positive_sources() {
    let synonyms = SynonymTable::load(&bundled::synonyms_path()).unwrap();
    let pairs = train::build_pairs(bundled::kb(), bundled::rules(), &synonyms, 1);

    // one augmentation positive per knowledge-base entry
    let augment = pairs
        .iter()
        .filter(|p| p.provenance == Provenance::Augmentation)
        .count();
    assert_eq!(augment, bundled::kb().entries().len());

    // CAST exists in all three dialects: three cross-dialect pairs
    let cast_pairs = pairs
        .iter()
        .filter(|p| {
            p.provenance == Provenance::SameKeywordCrossDialect
                && p.anchor.keyword == "CAST"
                && p.other.keyword == "CAST"
        })
        .count();
    assert_eq!(cast_pairs, 3);

    // rule-tool equivalences exist and are cross-element
    assert!(pairs
        .iter()
        .any(|p| p.provenance == Provenance::RuleToolEquivalence
            && p.anchor.keyword == "NVL"
            && p.other.keyword == "COALESCE"));

    // hard negatives never pair an element with itself and labels stay
    // consistent with provenance
    for p in &pairs {
        assert_eq!(p.label == PairLabel::HardNegative, p.provenance == Provenance::MinedNegative);
        if p.label == PairLabel::HardNegative {
            assert!(
                p.anchor.keyword != p.other.keyword || p.anchor.dialect != p.other.dialect,
                "self negative {:?}",
                p.anchor.keyword
            );
        }
    }

    // determinism given the seed
    let again = train::build_pairs(bundled::kb(), bundled::rules(), &synonyms, 1);
    assert_eq!(pairs.len(), again.len());
    for (a, b) in pairs.iter().zip(&again) {
        assert_eq!(a.anchor.description, b.anchor.description);
        assert_eq!(a.other.description, b.other.description);
    }
}

#[test]
fn synonym_table_is_desk_scale() {
    let synonyms = SynonymTable::load(&bundled::synonyms_path()).unwrap();
    assert!(synonyms.len() >= 25, "only {} synonym entries", synonyms.len());
}

#[test]
fn rule_store_covers_the_documented_families() {
    let rules = bundled::rules();
    assert!(rules.len() >= 25);
    let keywords: std::collections::BTreeSet<&str> =
        rules.rules().iter().map(|r| r.keyword.as_str()).collect();
    for family in ["NVL", "SYSDATE", "||", "TIMESTAMPDIFF", "FETCH", "LIMIT", "TO_CHAR"] {
        assert!(keywords.contains(family), "missing rule family {family}");
    }
}

#[test]
fn trace_accept_events_follow_rule_or_llm_attempts() {
    use sqlbridge_core::engine::{Engine, TraceAction, TranslationMode, TranslationTask};
    use sqlbridge_core::feedback::{ErrorClassifier, StubChecker};
    let checker = StubChecker::new(
        bundled::syntax(),
        bundled::kb().function_registry(),
        ErrorClassifier::load(&bundled::error_patterns_path()).unwrap(),
    );
    let engine = Engine::new(bundled::syntax(), bundled::kb(), bundled::rules(), &checker);
    for entry in bundled::corpus() {
        for target in Dialect::ALL {
            if target == entry.dialect {
                continue;
            }
            let task = TranslationTask::new(
                "inv",
                &entry.sql,
                entry.dialect,
                target,
                TranslationMode::RulePlusLlm,
                3,
            )
            .unwrap();
            let result = engine.translate(&task).unwrap();
            for (i, event) in result.trace.events.iter().enumerate() {
                if event.action == TraceAction::Accepted {
                    let preceded = result.trace.events[..i].iter().any(|e| {
                        e.snippet_id == event.snippet_id
                            && matches!(e.action, TraceAction::RuleHit | TraceAction::LlmAttempt)
                    });
                    assert!(preceded, "accepted without attempt in `{}`", entry.sql);
                }
            }
        }
    }
}
