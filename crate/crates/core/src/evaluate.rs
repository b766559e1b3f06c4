//! Judge-based scoring of predictions and per-group/domain/method tables.

use std::collections::BTreeMap;
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EventId, Observation};
use crate::oracle::parse::verdict_field;
use crate::oracle::prompts::{self, Dimension};
use crate::oracle::{Oracle, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Entails,
    Neutral,
    Contradicts,
}

impl Relation {
    pub fn score(self) -> u8 {
        match self {
            Relation::Entails => 100,
            Relation::Neutral => 50,
            Relation::Contradicts => 0,
        }
    }
}

/// A score with the judge's stated reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub score: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

pub fn parse_consistency(reply: &str) -> std::result::Result<Verdict, String> {
    let (v, reason) = verdict_field(reply, "relation").ok_or("no \"relation\" field")?;
    let rel = match v.as_str() {
        "entails" | "entailment" | "entailed" => Relation::Entails,
        "neutral" => Relation::Neutral,
        "contradicts" | "contradiction" | "contradicted" => Relation::Contradicts,
        other => return Err(format!("unknown relation {other:?}")),
    };
    Ok(Verdict {
        score: rel.score(),
        reason,
    })
}

pub fn parse_dimension(dim: Dimension, reply: &str) -> std::result::Result<Verdict, String> {
    let (v, reason) = verdict_field(reply, dim.key()).ok_or_else(|| format!("no {:?} field", dim.key()))?;
    let score = match v.as_str() {
        "match" => 100,
        "mismatch" => 0,
        other => return Err(format!("unknown verdict {other:?}")),
    };
    Ok(Verdict { score, reason })
}

/// Entails 100, neutral 50, contradicts 0.
pub fn score_consistency(context: &str, reference: &str, prediction: &str, oracle: &Oracle) -> Result<Verdict> {
    Ok(oracle.ask(
        Role::Judge,
        "judge_consistency",
        prompts::judge_consistency(context, reference, prediction),
        parse_consistency,
    )?)
}

/// Match 100, mismatch 0.
pub fn score_dimension(
    dim: Dimension,
    group: &str,
    context: &str,
    reference: &str,
    prediction: &str,
    oracle: &Oracle,
) -> Result<Verdict> {
    Ok(oracle.ask(
        Role::Judge,
        "judge_dimension",
        prompts::judge_dimension(dim, group, context, prediction, reference),
        |t| parse_dimension(dim, t),
    )?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub observation_id: EventId,
    pub group: String,
    pub domain: String,
    pub method: String,
    pub prediction: String,
    pub consistency: u8,
    pub initiative: u8,
    pub scope: u8,
    pub magnitude: u8,
    pub horizon: u8,
    /// Judge reasons keyed by metric name.
    pub rationales: BTreeMap<String, String>,
}

pub const METRICS: [&str; 5] = ["consistency", "initiative", "scope", "magnitude", "horizon"];

impl EvaluationRecord {
    pub fn scores(&self) -> [u8; 5] {
        [self.consistency, self.initiative, self.scope, self.magnitude, self.horizon]
    }

    pub fn is_legal(&self) -> bool {
        [0, 50, 100].contains(&self.consistency) && self.scores()[1..].iter().all(|s| *s == 0 || *s == 100)
    }
}

/// Scores one prediction on all five metrics.
pub fn evaluate(obs: &Observation, method: &str, prediction: &str, oracle: &Oracle) -> Result<EvaluationRecord> {
    let c = score_consistency(&obs.context, &obs.decision, prediction, oracle)?;
    let mut rationales = BTreeMap::new();
    if let Some(r) = c.reason {
        rationales.insert("consistency".to_string(), r);
    }
    let mut dims = [0u8; 4];
    for (slot, dim) in dims.iter_mut().zip(Dimension::ALL) {
        let v = score_dimension(dim, &obs.group, &obs.context, &obs.decision, prediction, oracle)?;
        *slot = v.score;
        if let Some(r) = v.reason {
            rationales.insert(dim.key().to_string(), r);
        }
    }
    Ok(EvaluationRecord {
        observation_id: obs.id.clone(),
        group: obs.group.clone(),
        domain: obs.domain.clone(),
        method: method.to_string(),
        prediction: prediction.to_string(),
        consistency: c.score,
        initiative: dims[0],
        scope: dims[1],
        magnitude: dims[2],
        horizon: dims[3],
        rationales,
    })
}

/// Scores `(observation, prediction)` pairs in parallel; output sorted by
/// observation id.
pub fn evaluate_all(items: &[(&Observation, String)], method: &str, oracle: &Oracle) -> Result<Vec<EvaluationRecord>> {
    let mut out: Vec<EvaluationRecord> = items
        .par_iter()
        .map(|(o, p)| evaluate(o, method, p, oracle).map_err(|e| e.context(format!("evaluating {}", o.id))))
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.observation_id.cmp(&b.observation_id));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Group,
    Domain,
    Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub key: String,
    pub n: usize,
    pub means: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub group_by: GroupBy,
    pub rows: Vec<TableRow>,
    /// Mean of the row means.
    pub avg_unweighted: [f64; 5],
    /// Mean over all records.
    pub avg_weighted: [f64; 5],
}

fn means<'a>(records: impl Iterator<Item = &'a EvaluationRecord>) -> (usize, [f64; 5]) {
    let mut sums = [0u64; 5];
    let mut n = 0;
    for r in records {
        n += 1;
        for (s, v) in sums.iter_mut().zip(r.scores()) {
            *s += u64::from(v);
        }
    }
    (n, sums.map(|s| s as f64 / n.max(1) as f64))
}

pub fn aggregate(records: &[EvaluationRecord], by: GroupBy) -> Result<ScoreTable> {
    if records.is_empty() {
        return Err(Error::invalid("nothing to aggregate"));
    }
    let mut cells: BTreeMap<&str, Vec<&EvaluationRecord>> = BTreeMap::new();
    for r in records {
        let key = match by {
            GroupBy::Group => &r.group,
            GroupBy::Domain => &r.domain,
            GroupBy::Method => &r.method,
        };
        cells.entry(key).or_default().push(r);
    }
    let rows: Vec<TableRow> = cells
        .into_iter()
        .map(|(k, rs)| {
            let (n, means) = means(rs.into_iter());
            TableRow {
                key: k.to_string(),
                n,
                means,
            }
        })
        .collect();
    let mut avg_unweighted = [0.0; 5];
    for (i, a) in avg_unweighted.iter_mut().enumerate() {
        *a = rows.iter().map(|r| r.means[i]).sum::<f64>() / rows.len() as f64;
    }
    Ok(ScoreTable {
        group_by: by,
        rows,
        avg_unweighted,
        avg_weighted: means(records.iter()).1,
    })
}

impl ScoreTable {
    pub fn to_csv(&self) -> String {
        let by = match self.group_by {
            GroupBy::Group => "group",
            GroupBy::Domain => "domain",
            GroupBy::Method => "method",
        };
        let mut out = format!("{by},n,{}\n", METRICS.join(","));
        let line = |out: &mut String, key: &str, n: usize, m: &[f64; 5]| {
            let vals: Vec<String> = m.iter().map(|v| format!("{v:.2}")).collect();
            let _ = writeln!(out, "{key},{n},{}", vals.join(","));
        };
        for r in &self.rows {
            line(&mut out, &r.key, r.n, &r.means);
        }
        let total = self.rows.iter().map(|r| r.n).sum();
        line(&mut out, "avg_unweighted", total, &self.avg_unweighted);
        line(&mut out, "avg_weighted", total, &self.avg_weighted);
        out
    }
}
