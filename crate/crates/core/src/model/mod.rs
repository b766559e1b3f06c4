//! Domain types shared by every pipeline stage.
//!
//! Trees are plain values: construction and adaptation produce new trees and
//! never mutate a tree they were handed.

mod hyper;
mod ids;
mod matrix;
mod provenance;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hyper::HyperParams;
pub use ids::{EventId, GateId, IdAllocator, NodeId, StatementId};
pub use matrix::{EvidenceLabel, GroundingMatrix};
pub use provenance::{
    AcceptanceBasis, DemotionTarget, GateVerdict, ProvenanceEntry, ProvenanceEvent, StatVerdict,
};
pub use validate::{validate_tree, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Wikipedia,
    Techcrunch,
    Synthetic,
}

/// One timestamped context/decision pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub id: EventId,
    pub group: String,
    pub domain: String,
    pub source: Source,
    /// Epoch day or record index; only the order matters.
    pub order_key: i64,
    pub context: String,
    pub decision: String,
    #[serde(default)]
    pub question: String,
}

impl Observation {
    pub fn check(&self) -> Result<()> {
        if self.id.as_str().is_empty() {
            return Err(Error::invalid("observation id is empty"));
        }
        if self.context.trim().is_empty() {
            return Err(Error::invalid(format!("observation {} has empty context", self.id)));
        }
        if self.decision.trim().is_empty() {
            return Err(Error::invalid(format!("observation {} has empty decision", self.id)));
        }
        Ok(())
    }
}

/// Sorts one group's observations by `order_key`, ties broken by id.
pub fn sort_chronologically(mut corpus: Vec<Observation>) -> Result<Vec<Observation>> {
    if let Some(first) = corpus.first() {
        let group = first.group.clone();
        if let Some(other) = corpus.iter().find(|o| o.group != group) {
            return Err(Error::invalid(format!(
                "mixed groups in chronological sort: {group:?} and {:?}",
                other.group
            )));
        }
    }
    corpus.sort_by(|a, b| a.order_key.cmp(&b.order_key).then_with(|| a.id.cmp(&b.id)));
    Ok(corpus)
}

/// Observations indexed by id. Every pipeline stage resolves event ids here.
#[derive(Debug, Clone, Default)]
pub struct EventStore {
    by_id: BTreeMap<EventId, Observation>,
}

impl EventStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_observations<'a>(obs: impl IntoIterator<Item = &'a Observation>) -> Result<Self> {
        let mut store = Self::new();
        store.extend(obs)?;
        Ok(store)
    }

    pub fn extend<'a>(&mut self, obs: impl IntoIterator<Item = &'a Observation>) -> Result<()> {
        for o in obs {
            if let Some(existing) = self.by_id.get(&o.id) {
                if existing != o {
                    return Err(Error::invalid(format!("conflicting observations share id {}", o.id)));
                }
                continue;
            }
            self.by_id.insert(o.id.clone(), o.clone());
        }
        Ok(())
    }

    pub fn get(&self, id: &EventId) -> Option<&Observation> {
        self.by_id.get(id)
    }

    pub fn resolve(&self, id: &EventId) -> Result<&Observation> {
        self.by_id
            .get(id)
            .ok_or_else(|| Error::invalid(format!("unknown event id {id}")))
    }

    pub fn resolve_all<'a>(
        &self,
        ids: impl IntoIterator<Item = &'a EventId>,
    ) -> Result<Vec<&Observation>> {
        ids.into_iter().map(|id| self.resolve(id)).collect()
    }

    pub fn contains(&self, id: &EventId) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementOrigin {
    Constructed,
    AdaptedAdd,
    Demoted,
    Transferred,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: StatementId,
    pub text: String,
    pub origin: StatementOrigin,
    /// Label of the data batch that produced the statement.
    pub created_at_phase: String,
}

/// Yes/no condition guarding a child subtree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub id: GateId,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub gate: Gate,
    pub node: CdtNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdtNode {
    pub id: NodeId,
    pub depth: u32,
    pub statements: Vec<Statement>,
    pub children: Vec<Branch>,
    /// Events routed to this node.
    pub routed_event_ids: BTreeSet<EventId>,
    /// Present iff the node holds statements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding: Option<GroundingMatrix>,
}

impl CdtNode {
    pub fn leaf(id: NodeId, depth: u32, routed: BTreeSet<EventId>) -> Self {
        CdtNode {
            id,
            depth,
            statements: Vec::new(),
            children: Vec::new(),
            routed_event_ids: routed,
            grounding: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn statement(&self, id: &StatementId) -> Option<&Statement> {
        self.statements.iter().find(|s| &s.id == id)
    }

    /// Pre-order walk over this node and its descendants.
    pub fn walk(&self) -> NodeWalk<'_> {
        NodeWalk { stack: vec![self] }
    }

    pub fn statement_count(&self) -> usize {
        self.walk().map(|n| n.statements.len()).sum()
    }
}

pub struct NodeWalk<'a> {
    stack: Vec<&'a CdtNode>,
}

impl<'a> Iterator for NodeWalk<'a> {
    type Item = &'a CdtNode;

    fn next(&mut self) -> Option<Self::Item> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev().map(|b| &b.node));
        Some(node)
    }
}

/// A codified decision tree for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cdt {
    pub group: String,
    pub root: CdtNode,
    pub hyperparams: HyperParams,
    pub provenance_log: Vec<ProvenanceEntry>,
    /// Id allocator state; keeps ids unique across adaptations.
    pub ids: IdAllocator,
}

impl Cdt {
    pub fn nodes(&self) -> NodeWalk<'_> {
        self.root.walk()
    }

    pub fn find_node(&self, id: &NodeId) -> Option<&CdtNode> {
        self.nodes().find(|n| &n.id == id)
    }

    /// Gate questions in pre-order.
    pub fn gates(&self) -> Vec<&Gate> {
        self.nodes()
            .flat_map(|n| n.children.iter().map(|b| &b.gate))
            .collect()
    }

    /// Statements in pre-order, each with the node holding it.
    pub fn statements(&self) -> Vec<(&CdtNode, &Statement)> {
        self.nodes()
            .flat_map(|n| n.statements.iter().map(move |s| (n, s)))
            .collect()
    }

    pub fn all_event_ids(&self) -> &BTreeSet<EventId> {
        &self.root.routed_event_ids
    }

    pub(crate) fn log(&mut self, phase: &str, event: ProvenanceEvent) {
        let seq = self.provenance_log.len() as u64;
        self.provenance_log.push(ProvenanceEntry {
            seq,
            phase: phase.to_string(),
            event,
        });
    }

    /// Plain-text rendering used in prompts and logs.
    pub fn verbalize(&self) -> String {
        fn rec(node: &CdtNode, indent: usize, out: &mut String) {
            let pad = "  ".repeat(indent);
            for s in &node.statements {
                out.push_str(&format!("{pad}- {}\n", s.text));
            }
            for b in &node.children {
                out.push_str(&format!("{pad}? {}\n", b.gate.question));
                rec(&b.node, indent + 1, out);
            }
        }
        let mut out = String::new();
        rec(&self.root, 0, &mut out);
        out
    }
}
