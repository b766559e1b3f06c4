use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{EventId, NodeId, StatementId};
use crate::error::{Error, Result};

/// Relation between an event's decision and a behavioral statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvidenceLabel {
    Sup,
    Con,
    Irr,
}

impl EvidenceLabel {
    fn to_char(self) -> char {
        match self {
            EvidenceLabel::Sup => 'S',
            EvidenceLabel::Con => 'C',
            EvidenceLabel::Irr => 'I',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'S' => Some(EvidenceLabel::Sup),
            'C' => Some(EvidenceLabel::Con),
            'I' => Some(EvidenceLabel::Irr),
            _ => None,
        }
    }
}

/// Event x statement grid of evidence labels for one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingMatrix {
    pub node_id: NodeId,
    pub event_ids: Vec<EventId>,
    pub statement_ids: Vec<StatementId>,
    /// Row-major; serialized as one string per event (`S`, `C`, `I`).
    #[serde(serialize_with = "ser_rows", deserialize_with = "de_rows")]
    labels: Vec<Vec<EvidenceLabel>>,
}

fn ser_rows<S: Serializer>(rows: &[Vec<EvidenceLabel>], s: S) -> Result<S::Ok, S::Error> {
    let encoded: Vec<String> = rows
        .iter()
        .map(|r| r.iter().map(|l| l.to_char()).collect())
        .collect();
    encoded.serialize(s)
}

fn de_rows<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<EvidenceLabel>>, D::Error> {
    let encoded = Vec::<String>::deserialize(d)?;
    encoded
        .iter()
        .map(|row| {
            row.chars()
                .map(|c| {
                    EvidenceLabel::from_char(c)
                        .ok_or_else(|| serde::de::Error::custom(format!("bad evidence label {c:?}")))
                })
                .collect()
        })
        .collect()
}

impl GroundingMatrix {
    pub fn new(
        node_id: NodeId,
        event_ids: Vec<EventId>,
        statement_ids: Vec<StatementId>,
        labels: Vec<Vec<EvidenceLabel>>,
    ) -> Result<Self> {
        let m = GroundingMatrix {
            node_id,
            event_ids,
            statement_ids,
            labels,
        };
        m.check_shape()?;
        Ok(m)
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.labels.len() != self.event_ids.len() {
            return Err(Error::invalid(format!(
                "matrix for {} has {} rows but {} events",
                self.node_id,
                self.labels.len(),
                self.event_ids.len()
            )));
        }
        if let Some((i, row)) = self
            .labels
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != self.statement_ids.len())
        {
            return Err(Error::invalid(format!(
                "matrix for {} row {i} has {} cells but {} statements",
                self.node_id,
                row.len(),
                self.statement_ids.len()
            )));
        }
        let unique_events: BTreeSet<_> = self.event_ids.iter().collect();
        let unique_stmts: BTreeSet<_> = self.statement_ids.iter().collect();
        if unique_events.len() != self.event_ids.len() || unique_stmts.len() != self.statement_ids.len() {
            return Err(Error::invalid(format!("matrix for {} has duplicate ids", self.node_id)));
        }
        Ok(())
    }

    pub fn n_events(&self) -> usize {
        self.event_ids.len()
    }

    pub fn n_statements(&self) -> usize {
        self.statement_ids.len()
    }

    pub fn rows(&self) -> &[Vec<EvidenceLabel>] {
        &self.labels
    }

    pub fn event_index(&self, id: &EventId) -> Option<usize> {
        self.event_ids.iter().position(|e| e == id)
    }

    pub fn statement_index(&self, id: &StatementId) -> Option<usize> {
        self.statement_ids.iter().position(|s| s == id)
    }

    pub fn label(&self, event: &EventId, statement: &StatementId) -> Option<EvidenceLabel> {
        Some(self.labels[self.event_index(event)?][self.statement_index(statement)?])
    }

    /// (event, label) pairs down one statement column.
    pub fn column(&self, statement: &StatementId) -> Option<Vec<(&EventId, EvidenceLabel)>> {
        let j = self.statement_index(statement)?;
        Some(self.event_ids.iter().zip(&self.labels).map(|(e, row)| (e, row[j])).collect())
    }

    /// Appends rows and columns. The caller supplies the new cells; old cells are untouched.
    pub(crate) fn append(
        &mut self,
        new_events: Vec<EventId>,
        new_statements: Vec<StatementId>,
        old_rows_new_cols: Vec<Vec<EvidenceLabel>>,
        new_rows: Vec<Vec<EvidenceLabel>>,
    ) -> Result<()> {
        debug_assert_eq!(old_rows_new_cols.len(), self.labels.len());
        for (row, extra) in self.labels.iter_mut().zip(old_rows_new_cols) {
            row.extend(extra);
        }
        self.event_ids.extend(new_events);
        self.statement_ids.extend(new_statements);
        self.labels.extend(new_rows);
        self.check_shape()
    }

    /// Keeps only the listed statement columns, in the given order.
    pub fn select_statements(&self, keep: &[StatementId]) -> Result<GroundingMatrix> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|s| {
                self.statement_index(s)
                    .ok_or_else(|| Error::invalid(format!("statement {s} not in matrix {}", self.node_id)))
            })
            .collect::<Result<_>>()?;
        Ok(GroundingMatrix {
            node_id: self.node_id.clone(),
            event_ids: self.event_ids.clone(),
            statement_ids: keep.to_vec(),
            labels: self
                .labels
                .iter()
                .map(|row| idx.iter().map(|&j| row[j]).collect())
                .collect(),
        })
    }

    /// Column of `statement` restricted to `events`, in `events` order.
    /// Events absent from the matrix are an error.
    pub fn column_over(
        &self,
        statement: &StatementId,
        events: impl IntoIterator<Item = impl AsRef<EventId>>,
    ) -> Result<Vec<(EventId, EvidenceLabel)>> {
        let j = self
            .statement_index(statement)
            .ok_or_else(|| Error::invalid(format!("statement {statement} not in matrix {}", self.node_id)))?;
        events
            .into_iter()
            .map(|e| {
                let e = e.as_ref();
                let i = self
                    .event_index(e)
                    .ok_or_else(|| Error::invalid(format!("event {e} not in matrix {}", self.node_id)))?;
                Ok((e.clone(), self.labels[i][j]))
            })
            .collect()
    }
}

impl AsRef<EventId> for EventId {
    fn as_ref(&self) -> &EventId {
        self
    }
}
