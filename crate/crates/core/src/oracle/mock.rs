//! Deterministic providers for tests and offline runs.
//!
//! [`PlantedProvider`] answers every template from a table of planted
//! behavioral rules keyed on marker words, so algorithm outcomes can be
//! predicted exactly. [`ScriptedProvider`] maps prompt substrings to fixed
//! replies. [`HashEmbedder`] is a feature-hashing bag-of-words encoder.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::prompts::{self, section, Dimension, PromptKind};
use super::{EmbeddingRequest, GenerationRequest, GenerationResponse, Provider, ProviderError};
use crate::model::EvidenceLabel;

fn hash64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

pub(crate) fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// True when some word of `text` starts with `marker` (case-insensitive).
pub fn has_marker(text: &str, marker: &str) -> bool {
    let m = marker.to_lowercase();
    tokens(text).iter().any(|t| t.starts_with(&m))
}

/// Signed feature hashing over unigrams and bigrams, plus one feature for
/// the exact text so distinct strings get distinct vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: 256, seed: 0 }
    }
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        HashEmbedder { dim, seed: 0 }
    }

    fn bump(&self, v: &mut [f64], kind: &[u8], feature: &[u8], weight: f64) {
        let h = hash64(&[&self.seed.to_le_bytes(), kind, feature]);
        let idx = (h % self.dim as u64) as usize;
        let sign = if (h >> 63) == 1 { -1.0 } else { 1.0 };
        v[idx] += sign * weight;
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let toks = tokens(text);
        if toks.is_empty() {
            return v;
        }
        for t in &toks {
            self.bump(&mut v, b"u", t.as_bytes(), 1.0);
        }
        for w in toks.windows(2) {
            self.bump(&mut v, b"b", format!("{} {}", w[0], w[1]).as_bytes(), 0.5);
        }
        self.bump(&mut v, b"t", text.as_bytes(), 0.25);
        v
    }
}

impl Provider for HashEmbedder {
    fn tag(&self) -> String {
        format!("hash-embedder/{}/{}", self.dim, self.seed)
    }

    fn complete(&self, _req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        Err(ProviderError::Rejected("hash embedder cannot generate".into()))
    }

    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(req.texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Replies chosen by the first rule whose needles all occur in the prompt.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    rules: Vec<(Vec<String>, String)>,
    fallback: Option<String>,
    embedder: HashEmbedder,
    calls: AtomicU64,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        ScriptedProvider::default()
    }

    pub fn when(mut self, needles: &[&str], reply: impl Into<String>) -> Self {
        self.rules
            .push((needles.iter().map(|s| s.to_string()).collect(), reply.into()));
        self
    }

    pub fn otherwise(mut self, reply: impl Into<String>) -> Self {
        self.fallback = Some(reply.into());
        self
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Provider for ScriptedProvider {
    fn tag(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.rules
            .iter()
            .find(|(needles, _)| needles.iter().all(|n| req.prompt.contains(n.as_str())))
            .map(|(_, r)| r.clone())
            .or_else(|| self.fallback.clone())
            .map(GenerationResponse::stop)
            .ok_or_else(|| ProviderError::Rejected(format!("no scripted reply for prompt: {:.80}", req.prompt)))
    }

    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        self.embedder.embed(req)
    }
}

type CompleteFn = dyn Fn(&GenerationRequest) -> Result<String, ProviderError> + Send + Sync;
type EmbedFn = dyn Fn(&str) -> Vec<f64> + Send + Sync;

/// Closure-backed provider.
pub struct FnProvider {
    complete: Arc<CompleteFn>,
    embed: Arc<EmbedFn>,
}

impl FnProvider {
    pub fn new(f: impl Fn(&GenerationRequest) -> Result<String, ProviderError> + Send + Sync + 'static) -> Self {
        let e = HashEmbedder::default();
        FnProvider {
            complete: Arc::new(f),
            embed: Arc::new(move |t| e.embed_one(t)),
        }
    }

    pub fn with_embed(mut self, f: impl Fn(&str) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.embed = Arc::new(f);
        self
    }
}

impl Provider for FnProvider {
    fn tag(&self) -> String {
        "fn".into()
    }

    fn complete(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        (self.complete)(req).map(GenerationResponse::stop)
    }

    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(req.texts.iter().map(|t| (self.embed)(t)).collect())
    }
}

/// One planted behavior: scenes mentioning `context_marker` draw decisions
/// mentioning `action_marker`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedRule {
    pub context_marker: String,
    pub action_marker: String,
    /// Canonical decision phrase; must contain `action_marker`.
    pub action: String,
    /// Canonical statement; must contain `action_marker` and no other rule's.
    /// `{group}` is replaced by the group named in the prompt.
    pub statement: String,
    /// Canonical gate; must contain `context_marker` and no action marker.
    /// `{group}` is replaced as for `statement`.
    pub gate: String,
    /// Action markers of decisions that contradict this rule.
    #[serde(default)]
    pub conflicts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub rules: Vec<PlantedRule>,
    /// Extra scene markers usable as demotion gates.
    #[serde(default)]
    pub cues: Vec<String>,
    /// Probability of flipping a relation or gate verdict.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Candidate votes go to the first candidate containing this text.
    #[serde(default)]
    pub vote_marker: Option<String>,
}

fn default_dim() -> usize {
    256
}

impl PlantedConfig {
    pub fn new(rules: Vec<PlantedRule>) -> Self {
        PlantedConfig {
            rules,
            cues: vec![],
            noise: 0.0,
            seed: 0,
            dim: default_dim(),
            vote_marker: None,
        }
    }
}

/// Rule-table provider; a pure function of (prompt, config).
#[derive(Debug, Clone)]
pub struct PlantedProvider {
    cfg: PlantedConfig,
    embedder: HashEmbedder,
}

impl PlantedProvider {
    pub fn new(cfg: PlantedConfig) -> Self {
        let embedder = HashEmbedder {
            dim: cfg.dim,
            seed: cfg.seed,
        };
        PlantedProvider { cfg, embedder }
    }

    pub fn config(&self) -> &PlantedConfig {
        &self.cfg
    }

    /// Rule whose action marker appears in `text`.
    pub fn rule_of_action(&self, text: &str) -> Option<&PlantedRule> {
        self.cfg.rules.iter().find(|r| has_marker(text, &r.action_marker))
    }

    /// Rule that a statement describes: exact canonical text first, then marker.
    pub fn rule_of_statement(&self, statement: &str) -> Option<&PlantedRule> {
        let s = statement.trim();
        self.cfg
            .rules
            .iter()
            .find(|r| r.statement == s && !s.contains("{group}"))
            .or_else(|| self.rule_of_action(s))
    }

    fn scene_markers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for m in self
            .cfg
            .rules
            .iter()
            .map(|r| r.context_marker.as_str())
            .chain(self.cfg.cues.iter().map(String::as_str))
        {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }

    /// Ground-truth label of `decision` against `statement`.
    pub fn true_relation(&self, decision: &str, statement: &str) -> EvidenceLabel {
        let Some(r) = self.rule_of_statement(statement) else {
            return EvidenceLabel::Irr;
        };
        if has_marker(decision, &r.action_marker) {
            EvidenceLabel::Sup
        } else if r.conflicts.iter().any(|c| has_marker(decision, c)) {
            EvidenceLabel::Con
        } else {
            EvidenceLabel::Irr
        }
    }

    /// Ground-truth gate answer.
    pub fn true_gate(&self, scene: &str, question: &str) -> super::GateAnswer {
        use super::GateAnswer::*;
        let markers = self.scene_markers();
        match markers.iter().find(|m| has_marker(question, m)) {
            // Questions naming no scene marker apply to every scene.
            None => Yes,
            Some(m) if has_marker(scene, m) => Yes,
            Some(_) if markers.iter().any(|m| has_marker(scene, m)) => No,
            Some(_) => Unknown,
        }
    }

    fn flip(&self, prompt: &str, salt: usize) -> Option<u64> {
        if self.cfg.noise <= 0.0 {
            return None;
        }
        let h = hash64(&[&self.cfg.seed.to_le_bytes(), prompt.as_bytes(), &salt.to_le_bytes()]);
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        (u < self.cfg.noise).then_some(h)
    }

    fn distractor(group: &str) -> (String, String) {
        (
            format!("{group} generally weighs its options carefully before acting."),
            format!("Could the scene shape {group}'s next action?"),
        )
    }

    fn answer(&self, prompt: &str) -> Result<String, ProviderError> {
        let kind = prompts::classify(prompt)
            .ok_or_else(|| ProviderError::Rejected("planted provider: unrecognized prompt".into()))?;
        let reply = match kind {
            PromptKind::Hypotheses => self.hypotheses(prompt),
            PromptKind::Summarize => self.summarize(prompt),
            PromptKind::UngatedCheck => {
                let action = section(prompt, "Action:", &["\n\nStatement:"]).unwrap_or_default();
                let stmt = section(prompt, "Statement:", &["\n\nQuestion:"]).unwrap_or_default();
                let mut yes = self.true_relation(action, stmt) == EvidenceLabel::Sup;
                if self.flip(prompt, 0).is_some() {
                    yes = !yes;
                }
                if yes { "yes" } else { "no" }.to_string()
            }
            PromptKind::GateCheck => {
                let scene = section(prompt, "Scene:", &["\n\nQuestion:"]).unwrap_or_default();
                let q = section(prompt, "Question:", &["\n\nAnswer yes or no"]).unwrap_or_default();
                let mut a = self.true_gate(scene, q);
                if self.flip(prompt, 0).is_some() {
                    a = match a {
                        super::GateAnswer::Yes => super::GateAnswer::No,
                        _ => super::GateAnswer::Yes,
                    };
                }
                format!("{a:?}").to_lowercase()
            }
            PromptKind::SelectCandidate => self.select(prompt),
            PromptKind::RelationBatch => self.relations(prompt),
            PromptKind::DemotionGates => self.demotion_gates(prompt),
            PromptKind::GateSemantic => "yes".to_string(),
            PromptKind::AddStatements => self.add_statements(prompt),
            PromptKind::PredictWithBackground => {
                let bg = section(prompt, "# Background Knowledge", &["\n\n# Context"]).unwrap_or_default();
                let ctx = section(prompt, "# Context", &["\n\n# Question"]).unwrap_or_default();
                self.predict_from_lines(bg, ctx, &group_from_tail(prompt))
            }
            PromptKind::PredictWithProfile => {
                let bg = section(prompt, "# Background Knowledge", &["\n\n# Scene"]).unwrap_or_default();
                let ctx = section(prompt, "# Scene", &["\n\n# Question"]).unwrap_or_default();
                self.predict_from_lines(bg, ctx, "The group")
            }
            PromptKind::PredictVanilla => {
                format!("{} maintains its current course.", group_from_tail(prompt))
            }
            PromptKind::PredictRag => self.predict_rag(prompt),
            PromptKind::ProfileExtract => self.profile_extract(prompt),
            PromptKind::ProfileAggregate => {
                let main = section(prompt, "# Main Profile", &["\n\n# New Summarized Profile"]).unwrap_or_default();
                let new = section(prompt, "(From New Episodes)", &["\n\nDirectly update"]).unwrap_or_default();
                let mut lines: Vec<&str> = Vec::new();
                for l in main.lines().chain(new.lines()) {
                    let l = l.trim();
                    if !l.is_empty() && !l.starts_with("===") && !lines.contains(&l) {
                        lines.push(l);
                    }
                }
                lines.join("\n")
            }
            PromptKind::JudgeConsistency => {
                let premise = section(prompt, "Premise:", &["\nHypothesis:"]).unwrap_or_default();
                let hyp = section(prompt, "Hypothesis:", &["\n\nDetermine"]).unwrap_or_default();
                let rel = self.consistency(premise, hyp);
                json!({"relation": rel, "reason": "planted rule comparison"}).to_string()
            }
            PromptKind::JudgeDimension(d) => {
                let pred = section(prompt, "# Your Response:", &["\n# Ground Truth:"]).unwrap_or_default();
                let reference = section(prompt, "# Ground Truth:", &["\n\n"]).unwrap_or_default();
                let same = self.rule_of_action(pred).map(|r| &r.action_marker)
                    == self.rule_of_action(reference).map(|r| &r.action_marker);
                let mut obj = serde_json::Map::new();
                obj.insert(d.key().into(), json!(if same { "match" } else { "mismatch" }));
                obj.insert("reason".into(), json!(format!("{} compared by planted rule", dim_name(d))));
                serde_json::Value::Object(obj).to_string()
            }
        };
        Ok(reply)
    }

    fn hypotheses(&self, prompt: &str) -> String {
        let group = between(prompt, "understand the behavior of ", " (Current topic").unwrap_or("The group");
        let k: usize = between(prompt, "2. Summarize ", " potential")
            .and_then(|n| n.trim().parse().ok())
            .unwrap_or(3);
        let pairs = section(prompt, "# Scene-Action Pairs", &["\n\n# Established Statements"]).unwrap_or_default();
        let established = section(prompt, "# Established Statements", &["\n\n# Already Proposed"]).unwrap_or_default();
        let actions: Vec<&str> = pairs
            .lines()
            .filter_map(|l| l.trim().strip_prefix("Action:"))
            .collect();
        let ranked: Vec<&PlantedRule> = self
            .rank_rules(&actions)
            .into_iter()
            .filter(|r| !established.contains(fill(&r.statement, group).as_str()))
            .collect();
        let (d_stmt, d_gate) = Self::distractor(group);
        let mut stmts = Vec::new();
        let mut gates = Vec::new();
        if let Some(top) = ranked.first() {
            stmts.push(fill(&top.statement, group));
            gates.push(fill(&top.gate, group));
        }
        stmts.push(d_stmt.clone());
        gates.push(d_gate.clone());
        for r in ranked.iter().skip(1) {
            stmts.push(fill(&r.statement, group));
            gates.push(fill(&r.gate, group));
        }
        while stmts.len() < k {
            stmts.push(stmts[0].clone());
            gates.push(gates[0].clone());
        }
        stmts.truncate(k);
        gates.truncate(k);
        format!(
            "The scenes share a few recurring triggers.\naction_hypotheses = {}\nscene_check_hypotheses = {}",
            json!(stmts),
            json!(gates)
        )
    }

    /// Rules whose action marker occurs in `actions`, most frequent first.
    fn rank_rules(&self, actions: &[&str]) -> Vec<&PlantedRule> {
        let mut counted: Vec<(usize, usize, &PlantedRule)> = self
            .cfg
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| (actions.iter().filter(|a| has_marker(a, &r.action_marker)).count(), i, r))
            .filter(|(c, _, _)| *c > 0)
            .collect();
        counted.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        counted.into_iter().map(|(_, _, r)| r).collect()
    }

    fn summarize(&self, prompt: &str) -> String {
        let upper: usize = between(prompt, "output between ", " pairs")
            .and_then(|r| r.split(" and ").nth(1))
            .and_then(|n| n.trim().parse().ok())
            .unwrap_or(8);
        let input = section(prompt, "Input pairs:", &["\n\n## Goal"]).unwrap_or("[]");
        let pairs: Vec<serde_json::Value> = serde_json::from_str(input).unwrap_or_default();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for p in pairs {
            let key = (p["scene_check_hypothesis"].to_string(), p["action_hypothesis"].to_string());
            if seen.insert(key) {
                out.push(p);
            }
        }
        out.truncate(upper);
        json!({ "pairs": out }).to_string()
    }

    fn select(&self, prompt: &str) -> String {
        let body = section(prompt, "Here are the candidates:", &["\n\nTask:"]).unwrap_or_default();
        let cands: Vec<&str> = body.split("## Candidate ").skip(1).collect();
        let pick = self
            .cfg
            .vote_marker
            .as_ref()
            .and_then(|m| cands.iter().position(|c| c.contains(m.as_str())))
            .unwrap_or_else(|| {
                let counts: Vec<usize> = cands
                    .iter()
                    .map(|c| c.lines().filter(|l| l.trim_start().starts_with("- ")).count())
                    .collect();
                let best = counts.iter().copied().max().unwrap_or(0);
                counts.iter().position(|&c| c == best).unwrap_or(0)
            });
        json!({"best_candidate_index": pick + 1, "reasoning": "most complete coverage"}).to_string()
    }

    fn relations(&self, prompt: &str) -> String {
        let action = section(prompt, "Action:", &["\n\nClassify"]).unwrap_or_default();
        let listed = section(prompt, "Statements:", &["\n\nOutput JSON only"]).unwrap_or_default();
        let labels: Vec<&str> = listed
            .lines()
            .filter_map(|l| {
                let l = l.trim();
                let rest = l.strip_prefix('[')?;
                let close = rest.find(']')?;
                Some(rest[close + 1..].trim())
            })
            .enumerate()
            .map(|(i, s)| {
                let mut label = self.true_relation(action, s);
                if let Some(h) = self.flip(prompt, i) {
                    let others: Vec<EvidenceLabel> = [EvidenceLabel::Sup, EvidenceLabel::Con, EvidenceLabel::Irr]
                        .into_iter()
                        .filter(|l| *l != label)
                        .collect();
                    label = others[(h % 2) as usize];
                }
                match label {
                    EvidenceLabel::Sup => "supports",
                    EvidenceLabel::Con => "contradicts",
                    EvidenceLabel::Irr => "irrelevant",
                }
            })
            .collect();
        json!(labels).to_string()
    }

    fn demotion_gates(&self, prompt: &str) -> String {
        let group = between(prompt, "behavioral patterns of ", ".\n").unwrap_or("the group");
        let sup = section(prompt, "## Supporting events (action consistent with the statement):", &["\n\n## Contradicting"])
            .unwrap_or_default();
        let con = section(prompt, "## Contradicting events (action conflicts with the statement):", &["\n\n## Task"])
            .unwrap_or_default();
        let scenes = |block: &str| -> Vec<String> {
            block
                .lines()
                .filter_map(|l| between(l, "Scene: ", " | Action:").map(str::to_string))
                .collect()
        };
        let (sup, con) = (scenes(sup), scenes(con));
        let mut scored: Vec<(i64, usize, &str)> = self
            .scene_markers()
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                let s = sup.iter().filter(|c| has_marker(c, m)).count() as i64;
                let c = con.iter().filter(|c| has_marker(c, m)).count() as i64;
                (s - c, i, m)
            })
            .filter(|(score, _, _)| *score > 0)
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut qs: Vec<String> = scored
            .iter()
            .take(3)
            .map(|(_, _, m)| {
                self.cfg
                    .rules
                    .iter()
                    .find(|r| r.context_marker == *m)
                    .map(|r| fill(&r.gate, group))
                    .unwrap_or_else(|| format!("Does {m} pressure shape {group}'s next action?"))
            })
            .collect();
        while qs.len() < 3 {
            qs.push(Self::distractor(group).1);
        }
        json!(qs).to_string()
    }

    fn add_statements(&self, prompt: &str) -> String {
        let unc = section(prompt, "These events are not supported by any existing statement at this node.", &["\n\n## Existing"])
            .unwrap_or_default();
        let existing = section(prompt, "## Existing statements at this node (for reference, do not duplicate):", &["\n\n## Task"])
            .unwrap_or_default();
        let group = between(prompt, "behavioral patterns of ", ".\n").unwrap_or("The group");
        let actions: Vec<&str> = unc.lines().filter_map(|l| l.split(" | Action: ").nth(1)).collect();
        let stmts: Vec<String> = self
            .rank_rules(&actions)
            .into_iter()
            .map(|r| fill(&r.statement, group))
            .filter(|s| !existing.contains(s.as_str()))
            .take(2)
            .collect();
        json!({ "statements": stmts }).to_string()
    }

    /// Uses the last background statement whose rule fires on the scene.
    fn predict_from_lines(&self, background: &str, context: &str, group: &str) -> String {
        let fired = background
            .lines()
            .filter_map(|l| self.rule_of_action(l))
            .rfind(|r| has_marker(context, &r.context_marker));
        match fired {
            Some(r) => format!("{group} decides to {}.", r.action),
            None => format!("{group} maintains its current course."),
        }
    }

    fn predict_rag(&self, prompt: &str) -> String {
        let group = group_from_tail(prompt);
        let examples = section(prompt, "# In-Context Examples", &["\n\n# Context"]).unwrap_or_default();
        let ctx = section(prompt, "# Context", &["\n\n# Question"]).unwrap_or_default();
        let markers = self.scene_markers();
        let lines: Vec<&str> = examples.lines().map(str::trim).collect();
        for w in lines.windows(2) {
            let (Some(scene), Some(action)) = (
                w[0].split_once("Scene: ").map(|x| x.1),
                w[1].strip_prefix("Action: "),
            ) else {
                continue;
            };
            if markers.iter().any(|m| has_marker(scene, m) && has_marker(ctx, m)) {
                return action.to_string();
            }
        }
        format!("{group} maintains its current course.")
    }

    fn profile_extract(&self, prompt: &str) -> String {
        let block = section(prompt, "# Scene-Action Pairs", &["\n\nNow, based on"]).unwrap_or_default();
        let actions: Vec<&str> = block
            .lines()
            .filter_map(|l| l.trim().strip_prefix("Action:"))
            .collect();
        let character = between(prompt, "character profile for ", ".\n").unwrap_or("The group");
        let lines: Vec<String> = self.rank_rules(&actions).iter().map(|r| fill(&r.statement, character)).collect();
        format!("===Profile===\n{}", lines.join("\n"))
    }

    fn consistency(&self, premise: &str, hypothesis: &str) -> &'static str {
        match (self.rule_of_action(premise), self.rule_of_action(hypothesis)) {
            (Some(r), Some(p)) if r.action_marker == p.action_marker => "entails",
            (Some(r), Some(p))
                if r.conflicts.iter().any(|c| has_marker(&p.action, c))
                    || p.conflicts.iter().any(|c| has_marker(&r.action, c)) =>
            {
                "contradicts"
            }
            _ => "neutral",
        }
    }
}

fn dim_name(d: Dimension) -> &'static str {
    d.key()
}

fn fill(template: &str, group: &str) -> String {
    template.replace("{group}", group)
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let to = text[from..].find(end)? + from;
    Some(&text[from..to])
}

fn group_from_tail(prompt: &str) -> String {
    between(prompt, "Predict the specific action taken by ", ". State")
        .unwrap_or("The group")
        .to_string()
}

impl Provider for PlantedProvider {
    fn tag(&self) -> String {
        format!("planted/{}", self.embedder.tag())
    }

    fn complete(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        self.answer(&req.prompt).map(GenerationResponse::stop)
    }

    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        self.embedder.embed(req)
    }
}

/// Per-rule tallies, handy for checking recovered trees against the table.
pub fn label_table(p: &PlantedProvider, decisions: &[&str], statements: &[&str]) -> BTreeMap<(usize, usize), EvidenceLabel> {
    let mut out = BTreeMap::new();
    for (i, d) in decisions.iter().enumerate() {
        for (j, s) in statements.iter().enumerate() {
            out.insert((i, j), p.true_relation(d, s));
        }
    }
    out
}
