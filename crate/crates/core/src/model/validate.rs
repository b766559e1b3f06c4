use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{Cdt, CdtNode};

/// One broken structural invariant, attributed to a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node_id: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.node_id, self.message)
    }
}

/// Returns every structural problem in the tree; empty means valid.
pub fn validate_tree(t: &Cdt) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |node: &CdtNode, message: String| {
        out.push(Violation {
            node_id: node.id.to_string(),
            message,
        })
    };

    if t.root.depth != 0 {
        push(&t.root, format!("root depth is {}, expected 0", t.root.depth));
    }

    let mut node_ids = BTreeSet::new();
    let mut stmt_ids = BTreeSet::new();
    let mut gate_ids = BTreeSet::new();

    for node in t.nodes() {
        if !node_ids.insert(&node.id) {
            push(node, "duplicate node id".into());
        }
        if node.depth > t.hyperparams.d_max {
            push(node, format!("depth {} exceeds d_max {}", node.depth, t.hyperparams.d_max));
        }
        for s in &node.statements {
            if !stmt_ids.insert(&s.id) {
                push(node, format!("duplicate statement id {}", s.id));
            }
            if s.text.trim().is_empty() {
                push(node, format!("statement {} has empty text", s.id));
            }
        }
        for b in &node.children {
            if !gate_ids.insert(&b.gate.id) {
                push(node, format!("duplicate gate id {}", b.gate.id));
            }
            if b.gate.question.trim().is_empty() {
                push(node, format!("gate {} has empty question", b.gate.id));
            }
            if b.node.depth != node.depth + 1 {
                push(
                    &b.node,
                    format!("depth {} under parent depth {}", b.node.depth, node.depth),
                );
            }
            if !b.node.routed_event_ids.is_subset(&node.routed_event_ids) {
                push(&b.node, format!("routed events not a subset of parent {}", node.id));
            }
        }
        match &node.grounding {
            None if !node.statements.is_empty() => {
                push(node, "statements without grounding matrix".into());
            }
            None => {}
            Some(m) => {
                if let Err(e) = m.check_shape() {
                    push(node, e.to_string());
                }
                if m.node_id != node.id {
                    push(node, format!("matrix belongs to {}", m.node_id));
                }
                let ids: Vec<_> = node.statements.iter().map(|s| &s.id).collect();
                if m.statement_ids.iter().collect::<Vec<_>>() != ids {
                    push(node, "matrix statements differ from node statements".into());
                }
                if let Some(e) = m.event_ids.iter().find(|e| !node.routed_event_ids.contains(*e)) {
                    push(node, format!("matrix event {e} not routed to node"));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn tree(root: CdtNode) -> Cdt {
        Cdt {
            group: "Acme".into(),
            root,
            hyperparams: HyperParams::default(),
            provenance_log: vec![],
            ids: IdAllocator::default(),
        }
    }

    fn routed(ids: &[&str]) -> std::collections::BTreeSet<EventId> {
        ids.iter().map(|s| EventId::new(*s)).collect()
    }

    fn with_child(child_depth: u32, child_routed: &[&str]) -> Cdt {
        let mut root = CdtNode::leaf(NodeId::new("n0"), 0, routed(&["a", "b"]));
        root.children.push(Branch {
            gate: Gate {
                id: GateId::new("g1"),
                question: "Does it?".into(),
            },
            node: CdtNode::leaf(NodeId::new("n2"), child_depth, routed(child_routed)),
        });
        tree(root)
    }

    #[test]
    fn single_root_is_valid() {
        let t = tree(CdtNode::leaf(NodeId::new("n0"), 0, routed(&["a"])));
        assert!(validate_tree(&t).is_empty());
    }

    #[test]
    fn child_depth_equal_to_parent() {
        let v = validate_tree(&with_child(0, &["a"]));
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].node_id, "n2");
    }

    #[test]
    fn child_routed_not_subset() {
        let v = validate_tree(&with_child(1, &["a", "z"]));
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("subset"));
    }

    #[test]
    fn statements_need_matching_matrix() {
        let mut root = CdtNode::leaf(NodeId::new("n0"), 0, routed(&["a"]));
        root.statements.push(Statement {
            id: StatementId::new("s1"),
            text: "x".into(),
            origin: StatementOrigin::Constructed,
            created_at_phase: "p".into(),
        });
        assert_eq!(validate_tree(&tree(root.clone())).len(), 1);
        root.grounding = Some(
            GroundingMatrix::new(
                NodeId::new("n0"),
                vec!["a".into()],
                vec!["s1".into()],
                vec![vec![EvidenceLabel::Sup]],
            )
            .unwrap(),
        );
        assert!(validate_tree(&tree(root)).is_empty());
    }
}
