//! Grounding matrices: per-node event x statement evidence, and the
//! statistics derived from them.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CdtNode, EventId, EventStore, EvidenceLabel, GroundingMatrix, NodeId, Observation, Statement, StatementId};
use crate::oracle::Oracle;

/// Column tallies for one statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementStats {
    pub statement_id: StatementId,
    pub n_sup: usize,
    pub n_con: usize,
    pub n_irr: usize,
    /// `None` when no supporting or contradicting evidence exists.
    pub precision: Option<f64>,
    pub effective_n: usize,
}

impl StatementStats {
    pub fn from_labels(statement_id: StatementId, labels: impl IntoIterator<Item = EvidenceLabel>) -> Self {
        let (mut n_sup, mut n_con, mut n_irr) = (0, 0, 0);
        for l in labels {
            match l {
                EvidenceLabel::Sup => n_sup += 1,
                EvidenceLabel::Con => n_con += 1,
                EvidenceLabel::Irr => n_irr += 1,
            }
        }
        StatementStats {
            statement_id,
            n_sup,
            n_con,
            n_irr,
            precision: precision(n_sup, n_con),
            effective_n: n_sup + n_con,
        }
    }
}

/// sup / (sup + con), undefined without evidence.
pub fn precision(sup: usize, con: usize) -> Option<f64> {
    if sup + con == 0 {
        None
    } else {
        Some(sup as f64 / (sup + con) as f64)
    }
}

/// Labels every (event, statement) cell, one relation call per event.
pub(crate) fn label_rows(
    node_id: &NodeId,
    group: &str,
    events: &[&Observation],
    statements: &[&Statement],
    oracle: &Oracle,
) -> Result<Vec<Vec<EvidenceLabel>>> {
    if statements.is_empty() || events.is_empty() {
        return Ok(vec![Vec::new(); events.len()]);
    }
    events
        .par_iter()
        .map(|e| {
            oracle
                .relate_statements(group, &e.decision, statements)
                .map_err(|err| Error::from(err).context(format!("labeling event {} at node {node_id}", e.id)))
        })
        .collect()
}

/// Full matrix for `node` over `events`.
pub fn compute_matrix(node: &CdtNode, events: &[&Observation], group: &str, oracle: &Oracle) -> Result<GroundingMatrix> {
    if node.statements.is_empty() {
        return Err(Error::invalid(format!("node {} has no statements to ground", node.id)));
    }
    if let Some(e) = events.iter().find(|e| !node.routed_event_ids.contains(&e.id)) {
        return Err(Error::invalid(format!("event {} is not routed to node {}", e.id, node.id)));
    }
    let stmts: Vec<&Statement> = node.statements.iter().collect();
    build(&node.id, group, events, &stmts, oracle)
}

pub(crate) fn build(
    node_id: &NodeId,
    group: &str,
    events: &[&Observation],
    statements: &[&Statement],
    oracle: &Oracle,
) -> Result<GroundingMatrix> {
    let rows = label_rows(node_id, group, events, statements, oracle)?;
    GroundingMatrix::new(
        node_id.clone(),
        events.iter().map(|e| e.id.clone()).collect(),
        statements.iter().map(|s| s.id.clone()).collect(),
        rows,
    )
}

/// Adds rows and columns, labeling only the new cells: old events against
/// new statements, and new events against every statement. `statements`
/// supplies the text of the existing columns, in column order.
#[allow(clippy::too_many_arguments)]
pub fn extend_matrix(
    m: &GroundingMatrix,
    store: &EventStore,
    statements: &[&Statement],
    new_events: &[&Observation],
    new_statements: &[&Statement],
    group: &str,
    oracle: &Oracle,
) -> Result<GroundingMatrix> {
    let given: Vec<&StatementId> = statements.iter().map(|s| &s.id).collect();
    if given != m.statement_ids.iter().collect::<Vec<_>>() {
        return Err(Error::invalid(format!(
            "statement texts do not match the columns of matrix {}",
            m.node_id
        )));
    }
    if let Some(e) = new_events.iter().find(|e| m.event_index(&e.id).is_some()) {
        return Err(Error::invalid(format!("event {} already in matrix {}", e.id, m.node_id)));
    }
    if let Some(s) = new_statements.iter().find(|s| m.statement_index(&s.id).is_some()) {
        return Err(Error::invalid(format!("statement {} already in matrix {}", s.id, m.node_id)));
    }
    let unique_e: BTreeSet<_> = new_events.iter().map(|e| &e.id).collect();
    let unique_s: BTreeSet<_> = new_statements.iter().map(|s| &s.id).collect();
    if unique_e.len() != new_events.len() || unique_s.len() != new_statements.len() {
        return Err(Error::invalid(format!("duplicate new ids for matrix {}", m.node_id)));
    }

    let old_events = store.resolve_all(&m.event_ids)?;
    let old_rows_new_cols = label_rows(&m.node_id, group, &old_events, new_statements, oracle)?;
    let all_statements: Vec<&Statement> = statements.iter().chain(new_statements).copied().collect();
    let new_rows = label_rows(&m.node_id, group, new_events, &all_statements, oracle)?;

    let mut out = m.clone();
    out.append(
        new_events.iter().map(|e| e.id.clone()).collect(),
        new_statements.iter().map(|s| s.id.clone()).collect(),
        old_rows_new_cols,
        new_rows,
    )?;
    Ok(out)
}

/// Tallies for one statement column.
pub fn stats_for(m: &GroundingMatrix, statement: &StatementId) -> Result<StatementStats> {
    let col = m
        .column(statement)
        .ok_or_else(|| Error::invalid(format!("statement {statement} not in matrix {}", m.node_id)))?;
    Ok(StatementStats::from_labels(statement.clone(), col.into_iter().map(|(_, l)| l)))
}

/// Events without a Sup cell among `surviving` statements.
pub fn uncovered_events(m: &GroundingMatrix, surviving: &[StatementId]) -> BTreeSet<EventId> {
    let cols: Vec<usize> = surviving.iter().filter_map(|s| m.statement_index(s)).collect();
    m.event_ids
        .iter()
        .zip(m.rows())
        .filter(|(_, row)| !cols.iter().any(|&j| row[j] == EvidenceLabel::Sup))
        .map(|(e, _)| e.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::model::{Source, StatementOrigin};
    use crate::oracle::mock::{PlantedConfig, PlantedProvider, PlantedRule, ScriptedProvider};
    use crate::oracle::{Transcript, TranscriptMode};
    use EvidenceLabel::*;

    fn obs(id: &str, decision: &str) -> Observation {
        Observation {
            id: EventId::new(id),
            group: "Acme".into(),
            domain: "tech".into(),
            source: Source::Synthetic,
            order_key: 0,
            context: format!("context of {id}"),
            decision: decision.into(),
            question: String::new(),
        }
    }

    fn stmt(id: &str, text: &str) -> Statement {
        Statement {
            id: StatementId::new(id),
            text: text.into(),
            origin: StatementOrigin::Constructed,
            created_at_phase: "train".into(),
        }
    }

    fn planted() -> PlantedProvider {
        let rule = |c: &str, a: &str| PlantedRule {
            context_marker: c.into(),
            action_marker: a.into(),
            action: format!("{a} now"),
            statement: format!("Acme tends to {a}."),
            gate: format!("Is there {c} pressure on Acme's next action?"),
            conflicts: vec![if a == "lobby" { "relocate".into() } else { "lobby".into() }],
        };
        PlantedProvider::new(PlantedConfig::new(vec![rule("tariff", "lobby"), rule("recall", "refund")]))
    }

    fn matrix(labels: Vec<Vec<EvidenceLabel>>) -> GroundingMatrix {
        let n_s = labels.first().map_or(0, |r| r.len());
        GroundingMatrix::new(
            NodeId::new("n0"),
            (0..labels.len()).map(|i| EventId::new(format!("e{i}"))).collect(),
            (0..n_s).map(|j| StatementId::new(format!("s{j}"))).collect(),
            labels,
        )
        .unwrap()
    }

    fn node_with(stmts: Vec<Statement>, events: &[&Observation]) -> CdtNode {
        let mut n = CdtNode::leaf(NodeId::new("n0"), 0, events.iter().map(|e| e.id.clone()).collect());
        n.statements = stmts;
        n
    }

    #[test]
    fn single_cell() {
        let o = Oracle::with_provider(Arc::new(ScriptedProvider::new().otherwise("[\"supports\"]")));
        let e = obs("e1", "anything");
        let n = node_with(vec![stmt("s1", "x")], &[&e]);
        let m = compute_matrix(&n, &[&e], "Acme", &o).unwrap();
        assert_eq!(m.rows(), &[vec![Sup]]);
    }

    #[test]
    fn grid_matches_rule_table() {
        let p = planted();
        let o = Oracle::with_provider(Arc::new(p.clone()));
        let (e1, e2) = (obs("e1", "Acme will lobby"), obs("e2", "Acme will refund buyers"));
        let s = [stmt("s1", "Acme tends to lobby."), stmt("s2", "Acme tends to refund.")];
        let n = node_with(s.to_vec(), &[&e1, &e2]);
        let m = compute_matrix(&n, &[&e1, &e2], "Acme", &o).unwrap();
        assert_eq!(m.rows(), &[vec![Sup, Con], vec![Irr, Sup]]);
        for (i, e) in [&e1, &e2].iter().enumerate() {
            for (j, st) in s.iter().enumerate() {
                assert_eq!(m.rows()[i][j], p.true_relation(&e.decision, &st.text));
            }
        }
    }

    #[test]
    fn empty_statements_rejected() {
        let o = Oracle::with_provider(Arc::new(ScriptedProvider::new()));
        let e = obs("e1", "d");
        assert!(matches!(
            compute_matrix(&node_with(vec![], &[&e]), &[&e], "Acme", &o),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn stats_examples() {
        let s = stats_for(&matrix(vec![vec![Sup], vec![Sup], vec![Con], vec![Irr]]), &"s0".into()).unwrap();
        assert_eq!((s.n_sup, s.n_con, s.n_irr, s.effective_n), (2, 1, 1, 3));
        assert!((s.precision.unwrap() - 2.0 / 3.0).abs() < 1e-12);

        let s = stats_for(&matrix(vec![vec![Irr], vec![Irr]]), &"s0".into()).unwrap();
        assert_eq!((s.precision, s.effective_n), (None, 0));

        let mut rows = vec![vec![Sup]; 7];
        rows.extend(vec![vec![Con]; 3]);
        let s = stats_for(&matrix(rows), &"s0".into()).unwrap();
        assert_eq!((s.precision, s.effective_n), (Some(0.7), 10));

        assert!(stats_for(&matrix(vec![vec![Sup]]), &"zz".into()).is_err());
    }

    #[test]
    fn uncovered_examples() {
        let m = matrix(vec![vec![Sup, Irr], vec![Irr, Irr]]);
        let both = [StatementId::new("s0"), StatementId::new("s1")];
        assert_eq!(uncovered_events(&m, &both), [EventId::new("e1")].into());
        let m2 = matrix(vec![vec![Sup, Irr], vec![Irr, Sup]]);
        assert!(uncovered_events(&m2, &both).is_empty());
        assert_eq!(uncovered_events(&m, &[]).len(), 2);
    }

    /// Only new cells are labeled: |E| old rows x 1 new column, plus one
    /// new row over |S| + 1 columns.
    #[test]
    fn extension_labels_only_new_cells() {
        let o_provider = Arc::new(planted());
        let evs: Vec<Observation> = (0..2).map(|i| obs(&format!("e{i}"), "Acme will lobby")).collect();
        let stmts = [stmt("s0", "Acme tends to lobby."), stmt("s1", "Acme tends to refund.")];
        let store = EventStore::from_observations(&evs).unwrap();
        let base = Oracle::with_provider(o_provider.clone());
        let refs: Vec<&Observation> = evs.iter().collect();
        let sref: Vec<&Statement> = stmts.iter().collect();
        let m = build(&NodeId::new("n0"), "Acme", &refs, &sref, &base).unwrap();

        let e_new = obs("e9", "Acme will refund");
        let s_new = stmt("s9", "Acme tends to lobby hard.");
        let mut store2 = store.clone();
        store2.extend([&e_new]).unwrap();
        let t = Arc::new(Transcript::in_memory(TranscriptMode::Passthrough));
        let counted = Oracle::builder()
            .all_roles(o_provider.clone())
            .transcript(t.clone())
            .build();
        let m2 = extend_matrix(&m, &store2, &sref, &[&e_new], &[&s_new], "Acme", &counted).unwrap();
        // Old rows x new statement, new row x old statements, and the new corner.
        assert_eq!(counted.relation_cells(), 5);
        assert_eq!(t.live_calls(), 2 + 1);
        assert_eq!(m2.n_events(), 3);
        assert_eq!(m2.n_statements(), 3);
        for i in 0..2 {
            assert_eq!(&m2.rows()[i][..2], &m.rows()[i][..]);
        }
        assert!(extend_matrix(&m, &store2, &sref, &[&evs[0]], &[], "Acme", &counted).is_err());
        assert!(extend_matrix(&m, &store2, &sref, &[], &[&stmts[0]], "Acme", &counted).is_err());
    }

    fn label() -> impl Strategy<Value = EvidenceLabel> {
        prop_oneof![Just(Sup), Just(Con), Just(Irr)]
    }

    proptest! {
        #[test]
        fn column_counts_partition_events(rows in prop::collection::vec(prop::collection::vec(label(), 3), 0..12)) {
            let m = matrix(if rows.is_empty() { vec![] } else { rows });
            for j in 0..m.n_statements() {
                let s = stats_for(&m, &m.statement_ids[j].clone()).unwrap();
                prop_assert_eq!(s.n_sup + s.n_con + s.n_irr, m.n_events());
                prop_assert_eq!(s.effective_n, s.n_sup + s.n_con);
            }
        }

        #[test]
        fn uncovered_shrinks_as_statements_grow(rows in prop::collection::vec(prop::collection::vec(label(), 4), 1..12), k in 0usize..4) {
            let m = matrix(rows);
            let ids = m.statement_ids.clone();
            let small = uncovered_events(&m, &ids[..k]);
            let large = uncovered_events(&m, &ids[..k + 1]);
            prop_assert!(large.is_subset(&small));
        }

        #[test]
        fn extension_equals_rebuild(decisions in prop::collection::vec(prop_oneof![Just("lobby"), Just("refund"), Just("relocate"), Just("wait")], 2..8), split in 1usize..7) {
            let split = split.min(decisions.len() - 1);
            let o = Oracle::with_provider(Arc::new(planted()));
            let evs: Vec<Observation> = decisions.iter().enumerate().map(|(i, d)| obs(&format!("e{i}"), &format!("Acme will {d}"))).collect();
            let stmts = [stmt("s0", "Acme tends to lobby."), stmt("s1", "Acme tends to refund.")];
            let store = EventStore::from_observations(&evs).unwrap();
            let all: Vec<&Observation> = evs.iter().collect();
            let n0 = NodeId::new("n0");
            let full = build(&n0, "Acme", &all, &[&stmts[0], &stmts[1]], &o).unwrap();
            let part = build(&n0, "Acme", &all[..split], &[&stmts[0]], &o).unwrap();
            let ext = extend_matrix(&part, &store, &[&stmts[0]], &all[split..], &[&stmts[1]], "Acme", &o).unwrap();
            for s in &full.statement_ids {
                prop_assert_eq!(stats_for(&ext, s).unwrap(), stats_for(&full, s).unwrap());
            }
        }
    }
}
