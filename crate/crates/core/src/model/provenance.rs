use serde::{Deserialize, Serialize};

use super::{EventId, GateId, NodeId, StatementId};
use crate::oracle::GateAnswer;

/// One entry of a tree's append-only operation log.
///
/// `seq` is a logical clock (position in the log) so logs stay
/// byte-reproducible; `phase` names the data batch being processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub seq: u64,
    pub phase: String,
    pub event: ProvenanceEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatVerdict {
    pub event: EventId,
    pub yes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub event: EventId,
    pub answer: GateAnswer,
}

/// Why a constructed statement was installed, with the verdicts behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcceptanceBasis {
    /// Ungated precision over all events at the node.
    Ungated { precision: f64, verdicts: Vec<StatVerdict> },
    /// Gated precision over the events the installing gate routed.
    Gated {
        gate_id: GateId,
        precision: f64,
        verdicts: Vec<StatVerdict>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemotionTarget {
    ExistingChild { node_id: NodeId },
    NewChild { node_id: NodeId, gate_id: GateId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ProvenanceEvent {
    StatementInstalled {
        node_id: NodeId,
        statement_id: StatementId,
        text: String,
        basis: AcceptanceBasis,
    },
    GateInstalled {
        parent_id: NodeId,
        child_id: NodeId,
        gate_id: GateId,
        question: String,
        broadness: f64,
        answers: Vec<GateVerdict>,
    },
    CandidateSelected {
        candidate: usize,
        votes: Vec<usize>,
    },
    StatementKept {
        node_id: NodeId,
        statement_id: StatementId,
        precision: Option<f64>,
        effective_n: usize,
        insufficient: bool,
    },
    /// Tombstone: the text and final stats survive deletion.
    StatementDeleted {
        node_id: NodeId,
        statement_id: StatementId,
        text: String,
        precision: Option<f64>,
        effective_n: usize,
    },
    StatementDemoted {
        from_node: NodeId,
        statement_id: StatementId,
        target: DemotionTarget,
        precision_before: Option<f64>,
        precision_after: f64,
    },
    StatementAdded {
        node_id: NodeId,
        statement_id: StatementId,
        text: String,
        precision: f64,
        effective_n: usize,
    },
    Transferred {
        source_group: String,
        target_group: String,
        dropped_source_events: usize,
    },
}
