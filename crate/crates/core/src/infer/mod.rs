//! Gated top-down traversal and decision prediction, plus the comparison
//! predictors used by the benchmark harness.

use std::collections::HashSet;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analyze::cosine;
use crate::error::{Error, Result, ResultExt};
use crate::model::{sort_chronologically, Cdt, CdtNode, EventId, GateId, NodeId, Observation, StatementId};
use crate::oracle::prompts::{self, Pair};
use crate::oracle::{EmbedLens, GateAnswer, Oracle, Role};

pub const DEFAULT_BACKGROUND_CAP: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateJudgment {
    pub gate_id: GateId,
    /// Node the gate hangs from.
    pub parent: NodeId,
    pub question: String,
    pub answer: GateAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectedStatement {
    pub id: StatementId,
    pub node_id: NodeId,
    pub text: String,
}

/// Everything a prediction saw, in traversal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalTrace {
    /// Every gate that was asked, Yes or not.
    pub gates: Vec<GateJudgment>,
    pub reached: Vec<NodeId>,
    pub statements: Vec<CollectedStatement>,
    pub background: String,
    #[serde(default)]
    pub truncated: bool,
}

impl TraversalTrace {
    pub fn activated(&self) -> impl Iterator<Item = &GateJudgment> {
        self.gates.iter().filter(|g| g.answer == GateAnswer::Yes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferConfig {
    pub background_cap: usize,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            background_cap: DEFAULT_BACKGROUND_CAP,
        }
    }
}

struct Walk {
    gates: Vec<GateJudgment>,
    reached: Vec<NodeId>,
    statements: Vec<CollectedStatement>,
}

fn walk(node: &CdtNode, path: &str, context: &str, oracle: &Oracle) -> Result<Walk> {
    let mut out = Walk {
        gates: Vec::new(),
        reached: vec![node.id.clone()],
        statements: node
            .statements
            .iter()
            .map(|s| CollectedStatement {
                id: s.id.clone(),
                node_id: node.id.clone(),
                text: s.text.clone(),
            })
            .collect(),
    };
    let branches: Vec<(GateJudgment, Option<Walk>)> = node
        .children
        .par_iter()
        .map(|b| {
            let gate_path = format!("{path}/{}", b.gate.id);
            let answer = oracle
                .judge_gate(context, &b.gate)
                .map_err(Error::from)
                .context_with(|| format!("gate {gate_path}"))?;
            let judgment = GateJudgment {
                gate_id: b.gate.id.clone(),
                parent: node.id.clone(),
                question: b.gate.question.clone(),
                answer,
            };
            let sub = match answer {
                GateAnswer::Yes => Some(walk(&b.node, &gate_path, context, oracle)?),
                GateAnswer::No | GateAnswer::Unknown => None,
            };
            Ok((judgment, sub))
        })
        .collect::<Result<_>>()?;
    for (judgment, sub) in branches {
        out.gates.push(judgment);
        if let Some(sub) = sub {
            out.gates.extend(sub.gates);
            out.reached.extend(sub.reached);
            out.statements.extend(sub.statements);
        }
    }
    Ok(out)
}

/// Walks `t` for `context` and assembles the background at the default cap.
pub fn traverse(t: &Cdt, context: &str, oracle: &Oracle) -> Result<TraversalTrace> {
    traverse_with(t, context, oracle, &InferConfig::default())
}

pub fn traverse_with(t: &Cdt, context: &str, oracle: &Oracle, cfg: &InferConfig) -> Result<TraversalTrace> {
    let w = walk(&t.root, t.root.id.as_str(), context, oracle)?;
    let mut seen = HashSet::new();
    let statements: Vec<CollectedStatement> = w.statements.into_iter().filter(|s| seen.insert(s.id.clone())).collect();
    let mut trace = TraversalTrace {
        gates: w.gates,
        reached: w.reached,
        statements,
        background: String::new(),
        truncated: false,
    };
    let (bg, truncated) = assemble_background(&trace, cfg.background_cap);
    trace.background = bg;
    trace.truncated = truncated;
    Ok(trace)
}

/// Satisfied gate conditions, then statements, one per line, in trace
/// order. Whole lines are dropped from the end to fit `cap` characters.
pub fn assemble_background(trace: &TraversalTrace, cap: usize) -> (String, bool) {
    let lines: Vec<String> = trace
        .activated()
        .map(|g| format!("Condition met: {}", one_line(&g.question)))
        .chain(trace.statements.iter().map(|s| one_line(&s.text)))
        .collect();
    let mut out = String::new();
    let mut used = 0;
    let mut kept = 0;
    for l in &lines {
        let add = l.chars().count() + usize::from(kept > 0);
        if used + add > cap {
            break;
        }
        if kept > 0 {
            out.push('\n');
        }
        out.push_str(l);
        used += add;
        kept += 1;
    }
    let truncated = kept < lines.len();
    if truncated {
        log::warn!("background truncated to {kept} of {} lines ({cap} char cap)", lines.len());
    }
    (out, truncated)
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub text: String,
    pub trace: TraversalTrace,
    /// The tree contributed no statements and the vanilla prompt was used.
    pub fallback: bool,
}

pub fn predict(t: &Cdt, context: &str, question: &str, oracle: &Oracle, cfg: &InferConfig) -> Result<Prediction> {
    let trace = traverse_with(t, context, oracle, cfg)?;
    let fallback = trace.statements.is_empty();
    let prompt = if fallback {
        log::warn!("tree for {} yielded no statements; using the vanilla prompt", t.group);
        prompts::predict_vanilla(&t.group, context, question)
    } else {
        prompts::predict_with_background(&t.group, &trace.background, context, question)
    };
    let text = oracle.complete(Role::Predictor, prompt)?;
    Ok(Prediction { text, trace, fallback })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Vanilla,
    HumanProfile,
    Summarization,
    Rag,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::Vanilla,
        BaselineKind::HumanProfile,
        BaselineKind::Summarization,
        BaselineKind::Rag,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Hand-written profile for the human-profile baseline.
    pub profile: Option<String>,
    pub rag_k: usize,
    /// Chronological pairs per profile-extraction call.
    pub summary_block: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            profile: None,
            rag_k: 8,
            summary_block: 20,
        }
    }
}

/// Comparison predictors for one group. The summarized profile and corpus
/// embeddings are computed once and reused across predictions.
pub struct Baselines {
    group: String,
    corpus: Vec<Observation>,
    cfg: BaselineConfig,
    summary: Mutex<Option<String>>,
    index: Mutex<Option<Vec<Vec<f64>>>>,
}

impl Baselines {
    /// `corpus` is the training history; it may be empty when only the
    /// vanilla or human-profile predictors are used.
    pub fn new(group: impl Into<String>, corpus: Vec<Observation>, cfg: BaselineConfig) -> Result<Self> {
        if cfg.rag_k == 0 || cfg.summary_block == 0 {
            return Err(Error::invalid("rag_k and summary_block must be positive"));
        }
        Ok(Baselines {
            group: group.into(),
            corpus: sort_chronologically(corpus)?,
            cfg,
            summary: Mutex::new(None),
            index: Mutex::new(None),
        })
    }

    pub fn predict(&self, kind: BaselineKind, context: &str, question: &str, oracle: &Oracle) -> Result<String> {
        let prompt = match kind {
            BaselineKind::Vanilla => prompts::predict_vanilla(&self.group, context, question),
            BaselineKind::HumanProfile => {
                let profile = self
                    .cfg
                    .profile
                    .as_deref()
                    .filter(|p| !p.trim().is_empty())
                    .ok_or_else(|| Error::invalid(format!("no human profile configured for {}", self.group)))?;
                prompts::predict_with_profile(profile, context, question)
            }
            BaselineKind::Summarization => {
                let profile = self.summary(oracle)?;
                prompts::predict_with_background(&self.group, &profile, context, question)
            }
            BaselineKind::Rag => {
                let picked = self.retrieve(context, oracle)?;
                let pairs: Vec<Pair<'_>> = picked
                    .iter()
                    .map(|&i| Pair {
                        scene: &self.corpus[i].context,
                        action: &self.corpus[i].decision,
                    })
                    .collect();
                prompts::predict_rag(&self.group, &pairs, context, question)
            }
        };
        Ok(oracle.complete(Role::Predictor, prompt)?)
    }

    /// The profile built from the whole corpus, block by block.
    pub fn summary(&self, oracle: &Oracle) -> Result<String> {
        let mut slot = self.summary.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(p) = slot.as_ref() {
            return Ok(p.clone());
        }
        if self.corpus.is_empty() {
            return Err(Error::invalid(format!("summarization needs history for {}", self.group)));
        }
        let mut profile: Option<String> = None;
        for block in self.corpus.chunks(self.cfg.summary_block) {
            let pairs: Vec<Pair<'_>> = block
                .iter()
                .map(|o| Pair {
                    scene: &o.context,
                    action: &o.decision,
                })
                .collect();
            let fresh = strip_profile_marker(&oracle.complete(Role::Predictor, prompts::profile_extract(&self.group, &pairs))?);
            profile = Some(match profile {
                None => fresh,
                Some(main) => strip_profile_marker(&oracle.complete(Role::Predictor, prompts::profile_aggregate(&main, &fresh))?),
            });
        }
        let p = profile.unwrap_or_default();
        *slot = Some(p.clone());
        Ok(p)
    }

    /// Corpus indices of the `rag_k` nearest contexts, most similar first,
    /// ties by event id.
    pub fn retrieve(&self, context: &str, oracle: &Oracle) -> Result<Vec<usize>> {
        if self.corpus.is_empty() {
            return Err(Error::invalid(format!("retrieval corpus for {} is empty", self.group)));
        }
        let index = {
            let mut slot = self.index.lock().unwrap_or_else(|e| e.into_inner());
            if slot.is_none() {
                let texts: Vec<String> = self.corpus.iter().map(|o| o.context.clone()).collect();
                *slot = Some(oracle.embed(&texts, &EmbedLens::Plain)?.into_iter().map(|v| v.values).collect());
            }
            slot.clone().unwrap_or_default()
        };
        let q = oracle.embed(&[context.to_string()], &EmbedLens::Plain)?.remove(0).values;
        let mut scored: Vec<(f64, &EventId, usize)> = index
            .iter()
            .enumerate()
            .map(|(i, v)| Ok((cosine(&q, v)?, &self.corpus[i].id, i)))
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(scored.into_iter().take(self.cfg.rag_k).map(|(_, _, i)| i).collect())
    }
}

fn strip_profile_marker(text: &str) -> String {
    let t = text.trim();
    match t.find("===Profile===") {
        Some(i) => t[i + "===Profile===".len()..].trim().to_string(),
        None => t.to_string(),
    }
}
