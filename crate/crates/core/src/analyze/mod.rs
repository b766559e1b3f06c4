//! Behavioral similarity between event sets and between trees, and the
//! phase drift test.

pub mod mann_whitney;
pub mod transport;

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use mann_whitney::{mann_whitney_u, MannWhitney};
pub use transport::{Solver, Transport};

use crate::error::{Error, Result};
use crate::model::{sort_chronologically, Cdt, EventId, Observation};
use crate::oracle::{EmbedLens, Oracle};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; zero vectors and length mismatches are errors.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("cosine of vectors with dims {} and {}", a.len(), b.len())));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(Error::DegenerateEmbedding("zero or non-finite vector in cosine".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(dot / (na * nb))
}

/// An event with plain embeddings of its context and decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedEvent {
    pub id: EventId,
    pub context: Vec<f64>,
    pub action: Vec<f64>,
}

pub fn embed_events(events: &[Observation], oracle: &Oracle) -> Result<Vec<EmbeddedEvent>> {
    if events.is_empty() {
        return Ok(Vec::new());
    }
    let ctx: Vec<String> = events.iter().map(|o| o.context.clone()).collect();
    let act: Vec<String> = events.iter().map(|o| o.decision.clone()).collect();
    let ce = oracle.embed(&ctx, &EmbedLens::Plain)?;
    let ae = oracle.embed(&act, &EmbedLens::Plain)?;
    Ok(events
        .iter()
        .zip(ce.into_iter().zip(ae))
        .map(|(o, (c, a))| EmbeddedEvent {
            id: o.id.clone(),
            context: c.values,
            action: a.values,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub a: EventId,
    pub b: EventId,
    pub context_cosine: f64,
    pub action_cosine: f64,
}

impl MatchedPair {
    /// Id pair with the smaller id first, so ordering ignores argument order.
    fn key(&self) -> (&EventId, &EventId) {
        if self.a <= self.b {
            (&self.a, &self.b)
        } else {
            (&self.b, &self.a)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BssResult {
    /// Mean action cosine over kept pairs; `None` when no pair qualifies.
    pub score: Option<f64>,
    pub pairs: Vec<MatchedPair>,
    /// Pairs that passed the context filter before the top-N cut.
    pub qualifying: usize,
}

/// Numeric order, so -0.0 and 0.0 tie and fall through to the id pair.
/// Cosines are finite here; `cosine` rejects degenerate inputs.
fn rank_pairs(x: &MatchedPair, y: &MatchedPair) -> Ordering {
    y.context_cosine
        .partial_cmp(&x.context_cosine)
        .unwrap_or(Ordering::Equal)
        .then_with(|| x.key().cmp(&y.key()))
}

/// Behavioral similarity: among cross pairs whose context cosine exceeds
/// `tau`, the `top_n` most similar contexts, scored by mean action cosine.
pub fn bss(a: &[EmbeddedEvent], b: &[EmbeddedEvent], top_n: usize, tau: f64) -> Result<BssResult> {
    bss_inner(a, b, top_n, tau, false)
}

/// `exclude_self` drops pairs of an event with itself and keeps one
/// orientation of each unordered pair, for within-set comparisons.
fn bss_inner(a: &[EmbeddedEvent], b: &[EmbeddedEvent], top_n: usize, tau: f64, exclude_self: bool) -> Result<BssResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("bss needs two non-empty event sets"));
    }
    let mut pairs = Vec::new();
    for x in a {
        for y in b {
            if exclude_self && x.id >= y.id {
                continue;
            }
            let c = cosine(&x.context, &y.context)?;
            if c > tau {
                pairs.push(MatchedPair {
                    a: x.id.clone(),
                    b: y.id.clone(),
                    context_cosine: c,
                    action_cosine: cosine(&x.action, &y.action)?,
                });
            }
        }
    }
    let qualifying = pairs.len();
    pairs.sort_by(rank_pairs);
    pairs.truncate(top_n);
    let score = (!pairs.is_empty()).then(|| pairs.iter().map(|p| p.action_cosine).sum::<f64>() / pairs.len() as f64);
    Ok(BssResult {
        score,
        pairs,
        qualifying,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Gate,
    Statement,
}

pub fn tree_elements(t: &Cdt, kind: ElementKind) -> Vec<String> {
    match kind {
        ElementKind::Gate => t.gates().iter().map(|g| g.question.clone()).collect(),
        ElementKind::Statement => t.statements().iter().map(|(_, s)| s.text.clone()).collect(),
    }
}

/// 1 - cosine between every pair of rows.
pub fn cosine_cost(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    a.iter()
        .map(|x| b.iter().map(|y| cosine(x, y).map(|c| 1.0 - c)).collect())
        .collect()
}

/// Earth mover's distance between the gate (or statement) sets of two
/// trees under uniform weights and cost 1 - cosine.
pub fn emd(a: &Cdt, b: &Cdt, kind: ElementKind, oracle: &Oracle) -> Result<Transport> {
    let (ea, eb) = (tree_elements(a, kind), tree_elements(b, kind));
    if ea.is_empty() || eb.is_empty() {
        return Err(Error::invalid(format!("a tree has no {kind:?} elements")));
    }
    let va: Vec<Vec<f64>> = oracle.embed(&ea, &EmbedLens::Plain)?.into_iter().map(|e| e.values).collect();
    let vb: Vec<Vec<f64>> = oracle.embed(&eb, &EmbedLens::Plain)?.into_iter().map(|e| e.values).collect();
    let mut t = transport::transport(&cosine_cost(&va, &vb)?)?;
    // Rounding can leave a tiny negative on identical inputs.
    t.distance = t.distance.max(0.0);
    Ok(t)
}

/// Chronological thirds (or any count): equal sizes, remainder to the
/// earlier phases.
pub fn phase_split<T>(items: &[T], phases: usize) -> Vec<&[T]> {
    let base = items.len() / phases;
    let extra = items.len() % phases;
    let mut out = Vec::with_capacity(phases);
    let mut start = 0;
    for i in 0..phases {
        let len = base + usize::from(i < extra);
        out.push(&items[start..start + len]);
        start += len;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftResult {
    pub group: String,
    pub phase_sizes: Vec<usize>,
    pub within: Vec<f64>,
    pub cross: Vec<f64>,
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
    pub significant: bool,
}

pub const DRIFT_ALPHA: f64 = 0.05;

/// Compares within-phase and cross-phase matched-pair action similarities.
pub fn drift_test(events: &[Observation], phases: usize, top_n: usize, tau: f64, oracle: &Oracle) -> Result<DriftResult> {
    if phases < 2 {
        return Err(Error::invalid("drift test needs at least two phases"));
    }
    let sorted = sort_chronologically(events.to_vec())?;
    let group = sorted.first().map(|o| o.group.clone()).unwrap_or_default();
    let parts = phase_split(&sorted, phases);
    if let Some((i, p)) = parts.iter().enumerate().find(|(_, p)| p.len() < 2) {
        return Err(Error::invalid(format!("phase {i} has {} events, need at least 2", p.len())));
    }
    let embedded: Vec<Vec<EmbeddedEvent>> = parts.iter().map(|p| embed_events(p, oracle)).collect::<Result<_>>()?;

    let within_runs: Vec<BssResult> = embedded
        .par_iter()
        .map(|p| bss_inner(p, p, top_n, tau, true))
        .collect::<Result<_>>()?;
    let cross_pairs: Vec<(usize, usize)> = (0..phases).flat_map(|i| (i + 1..phases).map(move |j| (i, j))).collect();
    let cross_runs: Vec<BssResult> = cross_pairs
        .par_iter()
        .map(|&(i, j)| bss(&embedded[i], &embedded[j], top_n, tau))
        .collect::<Result<_>>()?;
    let samples = |runs: &[BssResult]| -> Vec<f64> {
        runs.iter().flat_map(|r| r.pairs.iter().map(|p| p.action_cosine)).collect()
    };
    let (within, cross) = (samples(&within_runs), samples(&cross_runs));
    if within.is_empty() || cross.is_empty() {
        return Err(Error::invalid(format!(
            "no matched pairs above tau {tau} (within {}, cross {})",
            within.len(),
            cross.len()
        )));
    }
    let mw = mann_whitney_u(&within, &cross)?;
    Ok(DriftResult {
        group,
        phase_sizes: parts.iter().map(|p| p.len()).collect(),
        within,
        cross,
        u: mw.u,
        p_value: mw.p_value,
        exact: mw.exact,
        significant: mw.p_value < DRIFT_ALPHA,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    Bss,
    EmdGate,
    EmdStmt,
}

pub enum GroupData {
    Events(Vec<Observation>),
    Tree(Box<Cdt>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub mode: SimilarityMode,
    pub names: Vec<String>,
    /// `None` where the pair failed; see `errors`.
    pub cells: Vec<Vec<Option<f64>>>,
    pub errors: Vec<String>,
}

impl SimilarityMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group");
        for n in &self.names {
            out.push(',');
            out.push_str(&csv_field(n));
        }
        out.push('\n');
        for (n, row) in self.names.iter().zip(&self.cells) {
            out.push_str(&csv_field(n));
            for c in row {
                out.push(',');
                if let Some(v) = c {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Pairwise group similarity. Failed cells are recorded, not fatal.
pub fn similarity_matrix(
    groups: &[(String, GroupData)],
    mode: SimilarityMode,
    top_n: usize,
    tau: f64,
    oracle: &Oracle,
) -> Result<SimilarityMatrix> {
    if groups.len() < 2 {
        return Err(Error::invalid("similarity matrix needs at least two groups"));
    }
    let n = groups.len();
    let embedded: Vec<Option<Result<Vec<EmbeddedEvent>>>> = groups
        .iter()
        .map(|(_, g)| match (mode, g) {
            (SimilarityMode::Bss, GroupData::Events(ev)) => Some(embed_events(ev, oracle)),
            _ => None,
        })
        .collect();
    let cell = |i: usize, j: usize| -> Result<f64> {
        match mode {
            SimilarityMode::Bss => {
                let get = |k: usize| -> Result<&Vec<EmbeddedEvent>> {
                    match &embedded[k] {
                        Some(Ok(v)) => Ok(v),
                        Some(Err(e)) => Err(Error::invalid(format!("embedding {}: {e}", groups[k].0))),
                        None => Err(Error::invalid(format!("{} has no events", groups[k].0))),
                    }
                };
                bss(get(i)?, get(j)?, top_n, tau)?
                    .score
                    .ok_or_else(|| Error::invalid(format!("no pairs above tau {tau}")))
            }
            SimilarityMode::EmdGate | SimilarityMode::EmdStmt => {
                let tree = |k: usize| -> Result<&Cdt> {
                    match &groups[k].1 {
                        GroupData::Tree(t) => Ok(t),
                        GroupData::Events(_) => Err(Error::invalid(format!("{} has no tree", groups[k].0))),
                    }
                };
                let kind = if mode == SimilarityMode::EmdGate {
                    ElementKind::Gate
                } else {
                    ElementKind::Statement
                };
                Ok(emd(tree(i)?, tree(j)?, kind, oracle)?.distance)
            }
        }
    };
    let upper: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let results: Vec<Result<f64>> = upper.par_iter().map(|&(i, j)| cell(i, j)).collect();
    let mut cells = vec![vec![None; n]; n];
    let mut errors = Vec::new();
    for (&(i, j), r) in upper.iter().zip(results) {
        match r {
            Ok(v) => {
                cells[i][j] = Some(v);
                cells[j][i] = Some(v);
            }
            Err(e) => errors.push(format!("{} x {}: {e}", groups[i].0, groups[j].0)),
        }
    }
    Ok(SimilarityMatrix {
        mode,
        names: groups.iter().map(|(n, _)| n.clone()).collect(),
        cells,
        errors,
    })
}
