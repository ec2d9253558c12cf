mod common;

use common::{enumerate, five_attribute_doc, Instance};
use paco_core::attributes::{AttributeKind, AttributeTarget, Document, Providers, Targets};
use paco_core::policy::{rule_editor, ScriptFile, ScriptedDocument, ScriptedPolicy};
use paco_core::reward::ValueMode;
use paco_core::search::{run_search, NodeState, SearchConfig, SearchError, SearchResult};
use proptest::prelude::*;

fn config(inst: &Instance, simulations: usize) -> SearchConfig {
    SearchConfig {
        simulations,
        max_depth: inst.max_depth,
        reward: inst.reward.clone(),
        ..SearchConfig::default()
    }
}

fn check_statistics(res: &SearchResult) {
    let tree = &res.tree;
    let root_children: u64 = tree.node(0).children.iter().map(|&c| tree.node(c).visits).sum();
    assert_eq!(root_children as usize, res.simulations);
    for n in tree.nodes() {
        let below_value: f64 = n.children.iter().map(|&c| tree.node(c).total_value).sum();
        let below_visits: u64 = n.children.iter().map(|&c| tree.node(c).visits).sum();
        if n.id != 0 {
            let own = tree.evaluation(n.id).map_or(0.0, |e| e.value);
            let expected = below_value + (n.visits - below_visits) as f64 * own;
            assert!((n.total_value - expected).abs() <= 1e-9 * n.total_value.abs().max(1.0));
        }
        if let Some(p) = n.parent {
            assert_eq!(n.depth, tree.node(p).depth + 1);
            assert!(n.action.is_some());
        }
        assert!(n.depth <= tree.config().max_depth);
        if !n.children.is_empty() {
            let below: u64 = n.children.iter().map(|&c| tree.node(c).visits).sum();
            // a node's visits count passes through it plus visits that ended on it
            assert!(below <= n.visits);
        }
    }
}

#[test]
fn root_already_satisfied_runs_no_simulation() {
    let doc = Document::new(
        "d",
        "alpha beta gamma delta",
        None,
        None,
        Targets::new(vec![AttributeTarget::Length(4)]).unwrap(),
    )
    .unwrap();
    let mut d = ScriptedDocument::default();
    d.summaries.insert("".into(), "alpha beta gamma delta".into());
    let mut script = ScriptFile::default();
    script.documents.insert("d".into(), d);
    let policy = ScriptedPolicy::new(script);
    let res = run_search(&doc, &policy, &Providers::fallback(), &SearchConfig::default()).unwrap();
    assert_eq!(res.best, 0);
    assert!(res.path.is_empty());
    assert_eq!(res.simulations, 0);
    assert_eq!(policy.calls().adjust, 0);
}

#[test]
fn two_action_depth_two_matches_enumeration() {
    let doc = Document::new(
        "d",
        "one two three four five six seven eight nine ten",
        None,
        None,
        Targets::new(vec![AttributeTarget::Extractiveness(50.0), AttributeTarget::Length(6)]).unwrap(),
    )
    .unwrap();
    let mut d = ScriptedDocument::default();
    for (k, v) in [
        ("", "one two three"),
        ("ext", "one zz yy xx"),
        ("len", "one two three four five six"),
        ("ext/ext", "one xx"),
        ("ext/len", "one two three xx yy zz"),
        ("len/ext", "one two three four xx yy"),
        ("len/len", "one two three four five six seven"),
    ] {
        d.summaries.insert(k.into(), v.into());
    }
    let mut script = ScriptFile::default();
    script.documents.insert("d".into(), d);
    let policy = ScriptedPolicy::new(script);
    let cfg = SearchConfig {
        simulations: 64,
        max_depth: 2,
        ..SearchConfig::default()
    };
    let res = run_search(&doc, &policy, &Providers::fallback(), &cfg).unwrap();
    // "ext/len" has 50% extractiveness and 6 words: the unique exact match
    assert_eq!(res.summary, "one two three xx yy zz");
    assert_eq!(res.path, vec![AttributeKind::Extractiveness, AttributeKind::Length]);
    // the search keeps going until every reachable node exists
    assert_eq!(policy.calls().adjust, 6);
    assert_eq!(res.simulations, 6);
}

#[test]
fn every_materialized_node_generated_once() {
    let policy = ScriptedPolicy::from_generator(rule_editor());
    let doc = five_attribute_doc();
    let cfg = SearchConfig {
        simulations: 40,
        ..SearchConfig::default()
    };
    let res = run_search(&doc, &policy, &Providers::fallback(), &cfg).unwrap();
    let generated = res
        .tree
        .nodes()
        .iter()
        .filter(|n| !matches!(n.state, NodeState::Stub))
        .count();
    assert_eq!(res.policy_calls, generated);
    assert_eq!(policy.calls().initial + policy.calls().adjust, generated);
    check_statistics(&res);
}

#[test]
fn heuristic_mode_requires_capability() {
    let inst = Instance::random(3, 2, 2);
    let cfg = SearchConfig {
        reward: paco_core::reward::RewardConfig {
            value_mode: ValueMode::Heuristic,
            ..inst.reward.clone()
        },
        ..config(&inst, 4)
    };
    let err = run_search(&inst.doc, &inst.policy(), &Providers::fallback(), &cfg).unwrap_err();
    assert_eq!(err, SearchError::Reward(paco_core::RewardError::HeuristicUnavailable));
}

#[test]
fn heuristic_values_are_added_in_combined_mode() {
    let inst = Instance::random(5, 2, 2);
    let policy = inst.policy().with_default_heuristic(0.7);
    let mut cfg = config(&inst, 6);
    cfg.reward.value_mode = ValueMode::LocalPlusHeuristic;
    let res = run_search(&inst.doc, &policy, &Providers::fallback(), &cfg).unwrap();
    for n in res.tree.nodes().iter().skip(1) {
        if let NodeState::Ready(e) = &n.state {
            assert_eq!(e.heuristic, Some(0.7));
            assert!((e.value - (e.breakdown.degree + 0.7)).abs() < 1e-12);
        }
    }
    assert_eq!(res.heuristic_calls, res.policy_calls - 1);
}

#[test]
fn failed_generations_are_skipped() {
    let mut inst = Instance::random(11, 2, 2);
    let first = inst.doc.legal_actions()[0];
    inst.failing.push(first.short_name().to_string());
    let res = run_search(&inst.doc, &inst.policy(), &Providers::fallback(), &config(&inst, 10)).unwrap();
    assert!(res.failures >= 1);
    let failed: Vec<_> = res
        .tree
        .nodes()
        .iter()
        .filter(|n| matches!(n.state, NodeState::Failed(_)))
        .collect();
    assert_eq!(failed.len(), res.failures);
    assert!(failed.iter().all(|n| n.visits == 0));
    check_statistics(&res);
}

#[test]
fn trace_serialization_is_stable() {
    let inst = Instance::random(21, 3, 3);
    let run = || {
        let res = run_search(&inst.doc, &inst.policy(), &Providers::fallback(), &config(&inst, 12)).unwrap();
        serde_json::to_string(&res.trace()).unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    for key in ["best_id", "simulations", "policy_calls", "nodes"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    for key in [
        "id", "parent", "action", "depth", "summary", "measured", "degree", "N", "W", "Q", "terminal",
    ] {
        assert!(v["nodes"][0].get(key).is_some(), "{key}");
    }
}

#[test]
fn plain_descent_still_finds_small_optimum_with_budget() {
    // without exhausted-subtree skipping the search can stall on terminal
    // nodes, but a generous budget still covers tiny trees
    for seed in 0..20 {
        let inst = Instance::random(seed, 2, 2);
        let providers = Providers::fallback();
        let oracle = enumerate(&inst, &providers);
        let cfg = SearchConfig {
            skip_exhausted: false,
            ..config(&inst, 400)
        };
        let res = run_search(&inst.doc, &inst.policy(), &providers, &cfg).unwrap();
        assert!(res.breakdown.degree <= oracle.best_degree);
        check_statistics(&res);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_equivalence(seed in any::<u64>()) {
        let inst = Instance::random(seed, 3, 3);
        let providers = Providers::fallback();
        let oracle = enumerate(&inst, &providers);
        let res = run_search(&inst.doc, &inst.policy(), &providers, &config(&inst, oracle.node_count.max(1))).unwrap();
        prop_assert_eq!(res.breakdown.degree, oracle.best_degree);
    }

    #[test]
    fn conservation_and_dominance(seed in any::<u64>(), sims in 1usize..40, c_init in 0.0f64..3.0) {
        let inst = Instance::random(seed, 3, 4);
        let providers = Providers::fallback();
        let mut cfg = config(&inst, sims);
        cfg.c_init = c_init;
        let res = run_search(&inst.doc, &inst.policy(), &providers, &cfg).unwrap();
        check_statistics(&res);
        let root = res.tree.evaluation(0).unwrap().breakdown.degree;
        prop_assert!(res.breakdown.degree >= root);
        prop_assert!(res.policy_calls <= 1 + sims);
        let best = res.tree.nodes().iter().filter_map(|n| res.tree.evaluation(n.id)).map(|e| e.breakdown.degree).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(res.breakdown.degree, best);
    }
}
