use std::sync::Arc;

use super::*;
use crate::bench::synthetic::{self, Behavior};
use crate::ground::{stats_for, uncovered_events};
use crate::model::{validate_tree, Source};
use crate::oracle::mock::{FnProvider, HashEmbedder, PlantedProvider, ScriptedProvider};
use crate::oracle::ProviderError;

fn planted() -> Oracle {
    Oracle::with_provider(Arc::new(PlantedProvider::new(synthetic::planted_config())))
}

fn obs(i: usize, context: &str, decision: &str) -> Observation {
    Observation {
        id: EventId::new(format!("e{i:02}")),
        group: "Acme".into(),
        domain: "tech".into(),
        source: Source::Synthetic,
        order_key: i as i64,
        context: context.into(),
        decision: decision.into(),
        question: String::new(),
    }
}

fn pair(g: &str, s: &str) -> HypothesisPair {
    HypothesisPair {
        gate_hypothesis: g.into(),
        statement_hypothesis: s.into(),
        source_cluster: None,
    }
}

#[test]
fn composite_halves_are_unit_norm() {
    let o = Oracle::with_provider(Arc::new(HashEmbedder::new(8)));
    let evs = [obs(0, "tariff news", "lobby"), obs(1, "recall", "refund now")];
    let refs: Vec<&Observation> = evs.iter().collect();
    let v = composite_embed(&refs, 1, &o).unwrap();
    assert_eq!(v[0].len(), 16);
    for x in &v {
        let n1: f64 = x[..8].iter().map(|a| a * a).sum::<f64>().sqrt();
        let n2: f64 = x[8..].iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!((n1 - 1.0).abs() < 1e-9 && (n2 - 1.0).abs() < 1e-9);
        let n: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!((n - 2f64.sqrt()).abs() < 1e-9);
    }
    assert!(composite_embed(&refs, 5, &o).is_err());
    assert!(composite_embed(&refs, 0, &o).is_err());
}

#[test]
fn suffix_is_appended_to_context() {
    let seen = Arc::new(std::sync::Mutex::new(Vec::new()));
    let s2 = seen.clone();
    let p = FnProvider::new(|_| Ok(String::new())).with_embed(move |t| {
        s2.lock().unwrap().push(t.to_string());
        vec![1.0, 0.0]
    });
    let o = Oracle::with_provider(Arc::new(p));
    let e = obs(0, "ctx", "dec");
    composite_embed(&[&e], 3, &o).unwrap();
    let seen = seen.lock().unwrap();
    assert!(seen.contains(&"ctx As a result, Acme faces".to_string()));
    assert!(seen.contains(&"dec".to_string()));
}

#[test]
fn zero_embedding_is_degenerate() {
    let p = FnProvider::new(|_| Ok(String::new())).with_embed(|_| vec![0.0, 0.0]);
    let o = Oracle::with_provider(Arc::new(p));
    let e = obs(0, "ctx", "dec");
    assert!(matches!(composite_embed(&[&e], 1, &o), Err(Error::DegenerateEmbedding(_))));
}

#[test]
fn hypotheses_for_marker_cluster_name_the_rule() {
    let o = planted();
    let evs = synthetic::generate("Acme", &[(Behavior::Refund, 5)], 0, 1, 0);
    let refs: Vec<&Observation> = evs.iter().collect();
    let pairs = generate_hypotheses(&refs, Some("r1c0"), &[], &[], "Acme", 3, &o).unwrap();
    assert_eq!(pairs.len(), 3);
    assert_eq!(
        pairs[0].statement_hypothesis,
        "Acme tends to refund customers after quality failures."
    );
    assert_eq!(pairs[0].source_cluster.as_deref(), Some("r1c0"));
}

#[test]
fn short_hypothesis_reply_is_tolerated_after_reprompt() {
    let reply = "action_hypotheses = [\"a\", \"b\"]\nscene_check_hypotheses = [\"g1?\", \"g2?\"]";
    let p = Arc::new(ScriptedProvider::new().otherwise(reply));
    let o = Oracle::with_provider(p.clone());
    let e = obs(0, "c", "d");
    let pairs = generate_hypotheses(&[&e], None, &[], &[], "Acme", 3, &o).unwrap();
    assert_eq!(pairs.len(), 2);
    assert_eq!(p.calls(), 2);

    let o = Oracle::with_provider(Arc::new(ScriptedProvider::new().otherwise("no lists here")));
    assert!(generate_hypotheses(&[&e], None, &[], &[], "Acme", 3, &o).is_err());
}

#[test]
fn summarize_dedups_and_bounds() {
    let o = planted();
    let dup = vec![pair("g?", "s"), pair("g?", "s")];
    assert_eq!(summarize_hypotheses(&dup, "Acme", 4, 8, &o).unwrap(), vec![pair("g?", "s")]);

    let many: Vec<HypothesisPair> = (0..9).map(|i| pair(&format!("g{i}?"), &format!("s{i}"))).collect();
    let p = ScriptedProvider::new().otherwise(
        serde_json::json!({"pairs": (0..9).map(|i| serde_json::json!({"scene_check_hypothesis": format!("g{i}?"), "action_hypothesis": format!("s{i}")})).collect::<Vec<_>>()})
            .to_string(),
    );
    let o = Oracle::with_provider(Arc::new(p));
    let err = summarize_hypotheses(&many, "Acme", 4, 8, &o).unwrap_err();
    assert!(err.is_oracle(), "{err}");
}

#[test]
fn ungated_precision_is_yes_fraction() {
    let o = planted();
    let mut evs: Vec<Observation> = (0..7).map(|i| obs(i, "c", "Acme will refund buyers")).collect();
    evs.extend((7..10).map(|i| obs(i, "c", "Acme will wait")));
    let refs: Vec<&Observation> = evs.iter().collect();
    let r = validate_ungated("Acme tends to refund.", &refs, &o).unwrap();
    assert!((r.p_global - 0.7).abs() < 1e-12);
    let r = validate_ungated("Acme tends to negotiate.", &refs, &o).unwrap();
    assert_eq!(r.p_global, 0.0);
}

/// Ten events, a gate answered yes on the first `routed`; stage-1 yes on
/// the first `yes` events.
fn gated_case(routed: usize, yes: usize) -> GatedOutcome {
    let evs: Vec<Observation> = (0..10)
        .map(|i| obs(i, if i < routed { "tariff" } else { "recall" }, "d"))
        .collect();
    let refs: Vec<&Observation> = evs.iter().collect();
    let stage1 = UngatedResult {
        p_global: yes as f64 / 10.0,
        verdicts: evs
            .iter()
            .enumerate()
            .map(|(i, e)| StatVerdict {
                event: e.id.clone(),
                yes: i < yes,
            })
            .collect(),
    };
    let o = planted();
    validate_gated(
        &pair("Is Acme facing tariff pressure?", "s"),
        &refs,
        &stage1,
        &HyperParams::default(),
        &o,
    )
    .unwrap()
}

#[test]
fn stage_two_thresholds() {
    assert!(matches!(gated_case(9, 9), GatedOutcome::Discard { .. }));
    match gated_case(6, 5) {
        GatedOutcome::LeafChild { p_gated, broadness, routed, .. } => {
            assert!((p_gated - 5.0 / 6.0).abs() < 1e-12);
            assert!((broadness - 0.6).abs() < 1e-12);
            assert_eq!(routed.len(), 6);
        }
        o => panic!("{o:?}"),
    }
    match gated_case(6, 3) {
        GatedOutcome::RecurseChild { p_gated, routed, .. } => {
            assert_eq!(p_gated, 0.5);
            assert_eq!(routed.len(), 6);
        }
        o => panic!("{o:?}"),
    }
    assert!(matches!(gated_case(6, 1), GatedOutcome::Discard { .. }));
    assert!(matches!(gated_case(0, 0), GatedOutcome::Discard { .. }));
}

#[test]
fn small_or_deep_nodes_are_leaves() {
    let o = Oracle::with_provider(Arc::new(
        FnProvider::new(|_| Err(ProviderError::Rejected("no calls expected".into()))).with_embed(|_| vec![1.0]),
    ));
    let hp = HyperParams::default();
    let evs = synthetic::two_rule_corpus("Acme", 1, 0);
    let refs: Vec<&Observation> = evs.iter().collect();
    let mut b = Builder::new("Acme", &hp, &o);
    let n = b.build_node(&refs, 0, &[], &[], 0).unwrap();
    assert!(n.is_leaf() && n.statements.is_empty());

    let evs = synthetic::two_rule_corpus("Acme", 10, 0);
    let refs: Vec<&Observation> = evs.iter().collect();
    let n = b.build_node(&refs, hp.d_max, &[], &[], 0).unwrap();
    assert!(n.is_leaf());
    assert_eq!(o.requests(), 0);
}

#[test]
fn planted_rules_are_recovered() {
    let o = planted();
    let corpus = synthetic::two_rule_corpus("Acme", 30, 11);
    let tree = build_tree(&corpus, "Acme", &HyperParams::default(), &o, 5).unwrap();
    assert_eq!(validate_tree(&tree), vec![]);

    let p = PlantedProvider::new(synthetic::planted_config());
    let mut recovered = BTreeSet::new();
    let mut covered = BTreeSet::new();
    for node in tree.nodes() {
        let Some(m) = &node.grounding else { continue };
        for s in &node.statements {
            let rule = p.rule_of_statement(&s.text).expect("statement maps to a planted rule");
            recovered.insert(rule.action_marker.clone());
            assert_eq!(stats_for(m, &s.id).unwrap().precision, Some(1.0), "{}", s.text);
        }
        let ids: Vec<_> = node.statements.iter().map(|s| s.id.clone()).collect();
        let unc = uncovered_events(m, &ids);
        covered.extend(m.event_ids.iter().filter(|e| !unc.contains(e)).cloned());
    }
    assert_eq!(recovered, ["lobby".to_string(), "refund".to_string()].into());
    assert_eq!(covered.len(), 60);
}

#[test]
fn construction_is_deterministic() {
    let corpus = synthetic::two_rule_corpus("Acme", 12, 3);
    let a = build_tree(&corpus, "Acme", &HyperParams::default(), &planted(), 1).unwrap();
    let b = build_tree(&corpus, "Acme", &HyperParams::default(), &planted(), 1).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn bad_corpus_rejected() {
    let o = planted();
    let hp = HyperParams::default();
    assert!(build_tree(&[], "Acme", &hp, &o, 0).is_err());
    let mut c = synthetic::two_rule_corpus("Acme", 2, 0);
    c.push(c[0].clone());
    assert!(matches!(build_tree(&c, "Acme", &hp, &o, 0), Err(Error::Invalid(_))));
    let c = synthetic::two_rule_corpus("Other", 2, 0);
    assert!(matches!(build_tree(&c, "Acme", &hp, &o, 0), Err(Error::Invalid(_))));
}

#[test]
fn single_candidate_needs_no_votes() {
    let corpus = synthetic::two_rule_corpus("Acme", 5, 0);
    let hp = HyperParams::default();
    let solo = planted();
    build_tree(&corpus, "Acme", &hp, &solo, candidate_seeds(1, 1)[0]).unwrap();
    let o = planted();
    let sel = build_tree_with_selection(&corpus, "Acme", &hp, &o, &candidate_seeds(1, 1)).unwrap();
    assert_eq!(sel.winner, 0);
    assert_eq!(sel.votes, vec![0]);
    assert_eq!(o.requests(), solo.requests());
}

#[test]
fn vote_tie_goes_to_lower_index() {
    assert_eq!(select::winner(&[2, 2, 1], &[0, 1, 2]), 0);
    assert_eq!(select::winner(&[1, 2, 2], &[0, 1, 2]), 1);
    assert_eq!(select::winner(&[0, 0, 0], &[2]), 2);
}

#[test]
fn marker_candidate_wins_every_round() {
    let mut cfg = synthetic::planted_config();
    cfg.vote_marker = Some("MARK".into());
    let o = Oracle::with_provider(Arc::new(PlantedProvider::new(cfg)));
    let cands = ["- a\n- b".to_string(), "- MARK".to_string(), "- c".to_string()];
    assert_eq!(vote("Acme", &cands, 5, 9, &o).unwrap(), vec![0, 5, 0]);
}

#[test]
fn selection_logs_the_vote() {
    let o = planted();
    let corpus = synthetic::two_rule_corpus("Acme", 10, 2);
    let hp = HyperParams::default();
    let sel = build_tree_with_selection(&corpus, "Acme", &hp, &o, &candidate_seeds(7, 3)).unwrap();
    assert_eq!(sel.votes.iter().sum::<usize>(), hp.voting_rounds);
    assert_eq!(sel.winner, select::winner(&sel.votes, &[0, 1, 2]));
    match &sel.tree.provenance_log.last().unwrap().event {
        ProvenanceEvent::CandidateSelected { candidate, votes } => {
            assert_eq!((*candidate, votes), (sel.winner, &sel.votes));
        }
        e => panic!("{e:?}"),
    }
}

#[test]
fn all_candidates_failing_is_aggregate() {
    let o = Oracle::with_provider(Arc::new(ScriptedProvider::new().otherwise("garbage")));
    let corpus = synthetic::two_rule_corpus("Acme", 10, 2);
    let err = build_tree_with_selection(&corpus, "Acme", &HyperParams::default(), &o, &[1, 2]).unwrap_err();
    assert!(matches!(err, Error::Aggregate(ref v) if v.len() == 2), "{err}");
}
