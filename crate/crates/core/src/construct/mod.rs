//! Building a tree from scratch: cluster, hypothesize, compress, validate,
//! recurse; then pick the best of several seeded candidates.

mod cluster;
mod select;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use cluster::{cluster_round, k_clusters, kmeans, Cluster, ClusterSet};
pub use select::{build_tree_with_selection, candidate_seeds, vote, Selection};

use crate::error::{Error, Result};
use crate::ground;
use crate::model::{
    AcceptanceBasis, Branch, Cdt, CdtNode, EventId, Gate, GateVerdict, HyperParams, IdAllocator, Observation,
    ProvenanceEvent, StatVerdict, Statement, StatementOrigin,
};
use crate::oracle::prompts::{self, Pair};
use crate::oracle::{parse, EmbedLens, GateAnswer, Oracle, OracleError, Role, FORMAT_REMINDER};

pub const CONSTRUCT_PHASE: &str = "construct";

/// Guide suffixes, one per clustering round; `{O}` is the group name.
pub const GUIDE_SUFFIXES: [&str; 4] = [
    "Thus, {O} will",
    "Thus, {O} prioritizes",
    "As a result, {O} faces",
    "This changes {O}'s",
];

pub fn guide_suffix(group: &str, round: usize) -> Result<String> {
    if !(1..=GUIDE_SUFFIXES.len()).contains(&round) {
        return Err(Error::invalid(format!("round {round} outside [1, {}]", GUIDE_SUFFIXES.len())));
    }
    Ok(GUIDE_SUFFIXES[round - 1].replace("{O}", group))
}

/// A proposed (gate, statement) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisPair {
    pub gate_hypothesis: String,
    pub statement_hypothesis: String,
    /// Cluster label such as `r2c1`; `None` after rewriting by compression.
    #[serde(default)]
    pub source_cluster: Option<String>,
}

/// Splitmix64 step; derives independent seeds from one base seed.
pub(crate) fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normalized(v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::DegenerateEmbedding(format!("{what} has zero norm")));
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}

fn decision_halves(obs: &[&Observation], oracle: &Oracle) -> Result<Vec<Vec<f64>>> {
    let texts: Vec<String> = obs.iter().map(|o| o.decision.clone()).collect();
    oracle
        .embed(&texts, &EmbedLens::SurfaceDecision)?
        .into_iter()
        .zip(obs)
        .map(|(v, o)| normalized(v.values, &format!("decision embedding of {}", o.id)))
        .collect()
}

fn composite_with(obs: &[&Observation], round: usize, decisions: &[Vec<f64>], oracle: &Oracle) -> Result<Vec<Vec<f64>>> {
    let group = &obs[0].group;
    let suffix = guide_suffix(group, round)?;
    let texts: Vec<String> = obs.iter().map(|o| o.context.clone()).collect();
    let ctx = oracle.embed(&texts, &EmbedLens::GeneralContext(suffix))?;
    ctx.into_iter()
        .zip(decisions)
        .zip(obs)
        .map(|((c, d), o)| {
            let mut v = normalized(c.values, &format!("context embedding of {}", o.id))?;
            v.extend_from_slice(d);
            Ok(v)
        })
        .collect()
}

/// Concatenation of the normalized suffixed-context embedding and the
/// normalized decision embedding.
pub fn composite_embed(obs: &[&Observation], round: usize, oracle: &Oracle) -> Result<Vec<Vec<f64>>> {
    if obs.is_empty() {
        return Err(Error::invalid("composite_embed needs at least one observation"));
    }
    guide_suffix(&obs[0].group, round)?;
    let decisions = decision_halves(obs, oracle)?;
    composite_with(obs, round, &decisions, oracle)
}

fn hypothesis_pairs(text: &str, cluster: Option<&str>) -> Vec<HypothesisPair> {
    let stmts = parse::assigned_list(text, "action_hypotheses").unwrap_or_default();
    let gates = parse::assigned_list(text, "scene_check_hypotheses").unwrap_or_default();
    stmts
        .into_iter()
        .zip(gates)
        .map(|(s, g)| HypothesisPair {
            gate_hypothesis: g.trim().to_string(),
            statement_hypothesis: s.trim().to_string(),
            source_cluster: cluster.map(str::to_string),
        })
        .filter(|p| !p.gate_hypothesis.is_empty() && !p.statement_hypothesis.is_empty())
        .collect()
}

/// Proposes `k` pairs for one cluster. A short first reply triggers one
/// reprompt; a short second reply is accepted with a warning.
#[allow(clippy::too_many_arguments)]
pub fn generate_hypotheses(
    cluster: &[&Observation],
    cluster_label: Option<&str>,
    established: &[&str],
    gate_path: &[&str],
    group: &str,
    k: usize,
    oracle: &Oracle,
) -> Result<Vec<HypothesisPair>> {
    if cluster.is_empty() {
        return Err(Error::invalid("generate_hypotheses on an empty cluster"));
    }
    let pairs: Vec<Pair<'_>> = cluster
        .iter()
        .map(|o| Pair {
            scene: &o.context,
            action: &o.decision,
        })
        .collect();
    let topic = gate_path.last().copied().unwrap_or("overall decision-making");
    let prompt = prompts::hypotheses(group, topic, &pairs, established, gate_path, k);
    let first = hypothesis_pairs(&oracle.complete(Role::Generator, prompt.clone())?, cluster_label);
    if first.len() >= k {
        return Ok(first.into_iter().take(k).collect());
    }
    let second = hypothesis_pairs(
        &oracle.complete(Role::Generator, format!("{prompt}\n\n{FORMAT_REMINDER}"))?,
        cluster_label,
    );
    if second.len() >= k {
        return Ok(second.into_iter().take(k).collect());
    }
    let best = if second.len() >= first.len() { second } else { first };
    if best.is_empty() {
        return Err(OracleError::Protocol {
            task: "hypotheses".into(),
            detail: "no (statement, gate) pairs in reply".into(),
        }
        .into());
    }
    log::warn!("hypotheses: provider returned {} of {k} pairs", best.len());
    Ok(best)
}

fn distinct_pairs(pairs: &[HypothesisPair]) -> usize {
    pairs
        .iter()
        .map(|p| (&p.gate_hypothesis, &p.statement_hypothesis))
        .collect::<BTreeSet<_>>()
        .len()
}

/// Compresses pooled pairs. The accepted output size is
/// `[min(n_target, distinct inputs), n_upper]`.
pub fn summarize_hypotheses(
    pairs: &[HypothesisPair],
    group: &str,
    n_target: usize,
    n_upper: usize,
    oracle: &Oracle,
) -> Result<Vec<HypothesisPair>> {
    if pairs.is_empty() {
        return Err(Error::invalid("summarize_hypotheses on no pairs"));
    }
    let lower = n_target.min(distinct_pairs(pairs)).max(1);
    let input: Vec<_> = pairs
        .iter()
        .map(|p| json!({"scene_check_hypothesis": p.gate_hypothesis, "action_hypothesis": p.statement_hypothesis}))
        .collect();
    let input_json = serde_json::to_string_pretty(&input)?;
    let prompt = prompts::summarize(group, &input_json, pairs.len(), n_target, n_upper);
    let out = oracle.ask(Role::Generator, "summarize", prompt, |text| {
        let obj = parse::json_object(text).ok_or("no JSON object")?;
        let items = obj.get("pairs").and_then(|v| v.as_array()).ok_or("no \"pairs\" array")?;
        let mut out = Vec::new();
        for it in items {
            let g = it["scene_check_hypothesis"].as_str().unwrap_or("").trim();
            let s = it["action_hypothesis"].as_str().unwrap_or("").trim();
            if g.is_empty() || s.is_empty() {
                return Err("pair with an empty field".to_string());
            }
            out.push((g.to_string(), s.to_string()));
        }
        if !(lower..=n_upper).contains(&out.len()) {
            return Err(format!("expected between {lower} and {n_upper} pairs, got {}", out.len()));
        }
        Ok(out)
    })?;
    Ok(out
        .into_iter()
        .map(|(g, s)| {
            let source_cluster = pairs
                .iter()
                .find(|p| p.gate_hypothesis == g && p.statement_hypothesis == s)
                .and_then(|p| p.source_cluster.clone());
            HypothesisPair {
                gate_hypothesis: g,
                statement_hypothesis: s,
                source_cluster,
            }
        })
        .collect())
}

/// Stage-1 result: consistency verdicts of one statement over a node's events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UngatedResult {
    pub p_global: f64,
    pub verdicts: Vec<StatVerdict>,
}

pub fn validate_ungated(statement: &str, events: &[&Observation], oracle: &Oracle) -> Result<UngatedResult> {
    if events.is_empty() {
        return Err(Error::invalid("validate_ungated on no events"));
    }
    let verdicts: Vec<StatVerdict> = events
        .par_iter()
        .map(|o| {
            oracle
                .check_consistency(&o.group, &o.decision, statement)
                .map(|yes| StatVerdict {
                    event: o.id.clone(),
                    yes,
                })
                .map_err(|e| Error::from(e).context(format!("event {}", o.id)))
        })
        .collect::<Result<_>>()?;
    let yes = verdicts.iter().filter(|v| v.yes).count();
    Ok(UngatedResult {
        p_global: yes as f64 / verdicts.len() as f64,
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum GatedOutcome {
    /// Statement holds under the gate; install it in a new leaf child.
    LeafChild {
        routed: Vec<EventId>,
        p_gated: f64,
        broadness: f64,
        answers: Vec<GateVerdict>,
    },
    /// Promising but mixed; build a subtree from the routed events.
    RecurseChild {
        routed: Vec<EventId>,
        p_gated: f64,
        broadness: f64,
        answers: Vec<GateVerdict>,
    },
    Discard { reason: String },
}

/// Stage 2. Routes every event through the gate and scores the statement
/// on the yes-routed subset, reusing the stage-1 verdicts for those events.
/// Broadness is the routed fraction; No and Unknown both count as not routed.
pub fn validate_gated(
    pair: &HypothesisPair,
    events: &[&Observation],
    stage1: &UngatedResult,
    hp: &HyperParams,
    oracle: &Oracle,
) -> Result<GatedOutcome> {
    if events.is_empty() {
        return Err(Error::invalid("validate_gated on no events"));
    }
    let answers: Vec<GateVerdict> = events
        .par_iter()
        .map(|o| {
            oracle
                .judge_gate_text(&o.context, &pair.gate_hypothesis)
                .map(|answer| GateVerdict {
                    event: o.id.clone(),
                    answer,
                })
                .map_err(|e| Error::from(e).context(format!("event {}", o.id)))
        })
        .collect::<Result<_>>()?;
    let routed: Vec<EventId> = answers
        .iter()
        .filter(|a| a.answer == GateAnswer::Yes)
        .map(|a| a.event.clone())
        .collect();
    let broadness = routed.len() as f64 / events.len() as f64;
    if routed.is_empty() {
        return Ok(GatedOutcome::Discard {
            reason: "gate routes no events".into(),
        });
    }
    if broadness > hp.tau_filter {
        return Ok(GatedOutcome::Discard {
            reason: format!("broadness {broadness:.3} > {}", hp.tau_filter),
        });
    }
    if routed.len() == events.len() {
        return Ok(GatedOutcome::Discard {
            reason: "gate routes every event".into(),
        });
    }
    let verdict: BTreeMap<&EventId, bool> = stage1.verdicts.iter().map(|v| (&v.event, v.yes)).collect();
    let mut yes = 0usize;
    for id in &routed {
        match verdict.get(id) {
            Some(true) => yes += 1,
            Some(false) => {}
            None => return Err(Error::invalid(format!("no stage-1 verdict for event {id}"))),
        }
    }
    let p_gated = yes as f64 / routed.len() as f64;
    Ok(if p_gated >= hp.tau_accept_keep {
        GatedOutcome::LeafChild {
            routed,
            p_gated,
            broadness,
            answers,
        }
    } else if p_gated >= hp.tau_reject_delete {
        GatedOutcome::RecurseChild {
            routed,
            p_gated,
            broadness,
            answers,
        }
    } else {
        GatedOutcome::Discard {
            reason: format!("gated precision {p_gated:.3} < {}", hp.tau_reject_delete),
        }
    })
}

/// Gate question, routed events, broadness, gate answers, and the
/// statements (text, gated precision, verdicts) destined for that child.
type LeafPlan = (String, Vec<EventId>, f64, Vec<GateVerdict>, Vec<(String, f64, Vec<StatVerdict>)>);

/// Per-tree construction state: id allocation and the pending log.
pub struct Builder<'a> {
    pub group: &'a str,
    pub hp: &'a HyperParams,
    pub oracle: &'a Oracle,
    pub ids: IdAllocator,
    pub log: Vec<ProvenanceEvent>,
}

struct Ctx<'p> {
    path: String,
    gate_path: Vec<&'p str>,
    established: Vec<&'p str>,
}

impl<'a> Builder<'a> {
    pub fn new(group: &'a str, hp: &'a HyperParams, oracle: &'a Oracle) -> Self {
        Builder {
            group,
            hp,
            oracle,
            ids: IdAllocator::default(),
            log: Vec::new(),
        }
    }

    /// Builds the subtree for `events`. A returned node may hold no
    /// statements anywhere; callers prune such subtrees.
    pub fn build_node(
        &mut self,
        events: &[&Observation],
        depth: u32,
        gate_path: &[&str],
        established: &[&str],
        seed: u64,
    ) -> Result<CdtNode> {
        let id = self.ids.node();
        let ctx = Ctx {
            path: id.to_string(),
            gate_path: gate_path.to_vec(),
            established: established.to_vec(),
        };
        self.build_at(id, events, depth, &ctx, seed)
    }

    fn build_at(
        &mut self,
        id: crate::model::NodeId,
        events: &[&Observation],
        depth: u32,
        ctx: &Ctx<'_>,
        seed: u64,
    ) -> Result<CdtNode> {
        if events.is_empty() {
            return Err(Error::invalid(format!("node {} has no events", ctx.path)));
        }
        let routed: BTreeSet<EventId> = events.iter().map(|o| o.id.clone()).collect();
        let mut node = CdtNode::leaf(id, depth, routed);
        if events.len() < self.hp.min_node_size || depth >= self.hp.d_max {
            return Ok(node);
        }
        self.expand(&mut node, events, ctx, seed)
            .map_err(|e| e.context(format!("node {}", ctx.path)))?;
        Ok(node)
    }

    fn propose(&self, events: &[&Observation], ctx: &Ctx<'_>, seed: u64) -> Result<Vec<HypothesisPair>> {
        let hp = self.hp;
        let oracle = self.oracle;
        let ids: Vec<EventId> = events.iter().map(|o| o.id.clone()).collect();
        let by_id: BTreeMap<&EventId, &Observation> = events.iter().map(|o| (&o.id, *o)).collect();
        let decisions = decision_halves(events, oracle)?;
        let k = k_clusters(events.len(), hp.per_centroid_m);
        let mut clusters = Vec::new();
        for round in 1..=hp.rounds_r {
            let vecs = composite_with(events, round, &decisions, oracle)?;
            let cs = cluster_round(&vecs, &ids, k, hp.per_centroid_m, derive_seed(seed, round as u64), round)?;
            clusters.extend(cs);
        }
        log::info!("node {}: {} clusters over {} events", ctx.path, clusters.len(), events.len());
        let per_cluster: Vec<Vec<HypothesisPair>> = clusters
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let members: Vec<&Observation> = c.members.iter().map(|m| by_id[m]).collect();
                let label = c.label(i % k);
                generate_hypotheses(
                    &members,
                    Some(&label),
                    &ctx.established,
                    &ctx.gate_path,
                    self.group,
                    hp.hypotheses_k,
                    oracle,
                )
                .map_err(|e| e.context(format!("cluster {label}")))
            })
            .collect::<Result<_>>()?;
        let pooled: Vec<HypothesisPair> = per_cluster.into_iter().flatten().collect();
        let out = summarize_hypotheses(&pooled, self.group, hp.dedup_target, hp.dedup_upper, oracle)?;
        log::info!(
            "node {}: {} raw pairs compressed to {} (oracle requests so far: {})",
            ctx.path,
            pooled.len(),
            out.len(),
            oracle.requests()
        );
        Ok(out)
    }

    fn expand(&mut self, node: &mut CdtNode, events: &[&Observation], ctx: &Ctx<'_>, seed: u64) -> Result<()> {
        let (hp, oracle) = (self.hp, self.oracle);
        let pairs = self.propose(events, ctx, seed)?;

        // Stage 1 for every pair, then stage 2 for those that fell short.
        let stage1: Vec<UngatedResult> = pairs
            .par_iter()
            .map(|p| validate_ungated(&p.statement_hypothesis, events, oracle))
            .collect::<Result<_>>()?;
        let stage2: Vec<Option<GatedOutcome>> = pairs
            .par_iter()
            .zip(&stage1)
            .map(|(p, s1)| {
                if s1.p_global >= hp.tau_accept_keep {
                    Ok(None)
                } else {
                    validate_gated(p, events, s1, hp, oracle).map(Some)
                }
            })
            .collect::<Result<_>>()?;

        let mut installed: Vec<(Statement, AcceptanceBasis)> = Vec::new();
        // Leaf children keyed by gate question, in first-seen order.
        let mut leaves: Vec<LeafPlan> = Vec::new();
        let mut recurse: Vec<(String, Vec<EventId>, f64, Vec<GateVerdict>)> = Vec::new();

        for ((pair, s1), s2) in pairs.iter().zip(&stage1).zip(stage2) {
            match s2 {
                None => {
                    if installed.iter().any(|(s, _)| s.text == pair.statement_hypothesis) {
                        continue;
                    }
                    let stmt = self.new_statement(&pair.statement_hypothesis);
                    installed.push((
                        stmt,
                        AcceptanceBasis::Ungated {
                            precision: s1.p_global,
                            verdicts: s1.verdicts.clone(),
                        },
                    ));
                }
                Some(GatedOutcome::LeafChild {
                    routed,
                    p_gated,
                    broadness,
                    answers,
                }) => {
                    let routed_set: BTreeSet<&EventId> = routed.iter().collect();
                    let verdicts: Vec<StatVerdict> = s1
                        .verdicts
                        .iter()
                        .filter(|v| routed_set.contains(&v.event))
                        .cloned()
                        .collect();
                    let entry = (pair.statement_hypothesis.clone(), p_gated, verdicts);
                    match leaves.iter_mut().find(|l| l.0 == pair.gate_hypothesis) {
                        Some(l) if !l.4.iter().any(|(t, _, _)| *t == entry.0) => l.4.push(entry),
                        Some(_) => {}
                        None => leaves.push((pair.gate_hypothesis.clone(), routed, broadness, answers, vec![entry])),
                    }
                }
                Some(GatedOutcome::RecurseChild {
                    routed,
                    broadness,
                    answers,
                    ..
                }) => {
                    if !recurse.iter().any(|r| r.0 == pair.gate_hypothesis) {
                        recurse.push((pair.gate_hypothesis.clone(), routed, broadness, answers));
                    }
                }
                Some(GatedOutcome::Discard { reason }) => {
                    log::debug!("node {}: discarded {:?}: {reason}", ctx.path, pair.statement_hypothesis);
                }
            }
        }

        if !installed.is_empty() {
            let stmts: Vec<Statement> = installed.iter().map(|(s, _)| s.clone()).collect();
            self.install(node, events, stmts, installed.into_iter().map(|(_, b)| b).collect())?;
        }

        let by_id: BTreeMap<&EventId, &Observation> = events.iter().map(|o| (&o.id, *o)).collect();
        for (question, routed, broadness, answers, entries) in leaves {
            let sub: Vec<&Observation> = routed.iter().map(|id| by_id[id]).collect();
            let gate = Gate {
                id: self.ids.gate(),
                question,
            };
            let child_id = self.ids.node();
            let mut child = CdtNode::leaf(child_id.clone(), node.depth + 1, routed.into_iter().collect());
            let mut stmts = Vec::new();
            let mut bases = Vec::new();
            for (text, p, verdicts) in entries {
                stmts.push(self.new_statement(&text));
                bases.push(AcceptanceBasis::Gated {
                    gate_id: gate.id.clone(),
                    precision: p,
                    verdicts,
                });
            }
            self.log_gate(node, &child_id, &gate, broadness, answers);
            self.install(&mut child, &sub, stmts, bases)?;
            node.children.push(Branch { gate, node: child });
        }

        let mut established = ctx.established.clone();
        let own: Vec<String> = node.statements.iter().map(|s| s.text.clone()).collect();
        established.extend(own.iter().map(String::as_str));
        for (i, (question, routed, broadness, answers)) in recurse.into_iter().enumerate() {
            let sub: Vec<&Observation> = routed.iter().map(|id| by_id[id]).collect();
            let child_id = self.ids.node();
            let mut gate_path = ctx.gate_path.clone();
            gate_path.push(&question);
            let child_ctx = Ctx {
                path: format!("{} > {}", ctx.path, child_id),
                gate_path,
                established: established.clone(),
            };
            let mark = self.log.len();
            let gate_id = self.ids.gate();
            let child = self.build_at(
                child_id.clone(),
                &sub,
                node.depth + 1,
                &child_ctx,
                derive_seed(seed, 1000 + i as u64),
            )?;
            if child.statement_count() == 0 {
                // Nothing survived below this gate: drop it and its log.
                self.log.truncate(mark);
                continue;
            }
            let gate = Gate { id: gate_id, question };
            let child_log = self.log.split_off(mark);
            self.log_gate(node, &child_id, &gate, broadness, answers);
            self.log.extend(child_log);
            node.children.push(Branch { gate, node: child });
        }
        Ok(())
    }

    fn new_statement(&mut self, text: &str) -> Statement {
        Statement {
            id: self.ids.statement(),
            text: text.to_string(),
            origin: StatementOrigin::Constructed,
            created_at_phase: CONSTRUCT_PHASE.to_string(),
        }
    }

    fn log_gate(&mut self, parent: &CdtNode, child_id: &crate::model::NodeId, gate: &Gate, broadness: f64, answers: Vec<GateVerdict>) {
        self.log.push(ProvenanceEvent::GateInstalled {
            parent_id: parent.id.clone(),
            child_id: child_id.clone(),
            gate_id: gate.id.clone(),
            question: gate.question.clone(),
            broadness,
            answers,
        });
    }

    /// Appends statements to `node` and recomputes its grounding matrix.
    fn install(
        &mut self,
        node: &mut CdtNode,
        events: &[&Observation],
        stmts: Vec<Statement>,
        bases: Vec<AcceptanceBasis>,
    ) -> Result<()> {
        for (s, basis) in stmts.iter().zip(bases) {
            self.log.push(ProvenanceEvent::StatementInstalled {
                node_id: node.id.clone(),
                statement_id: s.id.clone(),
                text: s.text.clone(),
                basis,
            });
        }
        node.statements.extend(stmts);
        node.grounding = Some(ground::compute_matrix(node, events, self.group, self.oracle)?);
        Ok(())
    }
}

fn check_corpus<'c>(corpus: &'c [Observation], group: &str) -> Result<Vec<&'c Observation>> {
    if corpus.is_empty() {
        return Err(Error::invalid("construction corpus is empty"));
    }
    let mut seen = BTreeSet::new();
    for o in corpus {
        o.check()?;
        if o.group != group {
            return Err(Error::invalid(format!("observation {} belongs to {:?}, not {group:?}", o.id, o.group)));
        }
        if !seen.insert(&o.id) {
            return Err(Error::invalid(format!("duplicate observation id {}", o.id)));
        }
    }
    let mut refs: Vec<&Observation> = corpus.iter().collect();
    refs.sort_by(|a, b| a.order_key.cmp(&b.order_key).then_with(|| a.id.cmp(&b.id)));
    Ok(refs)
}

/// Builds one candidate tree.
pub fn build_tree(corpus: &[Observation], group: &str, hp: &HyperParams, oracle: &Oracle, seed: u64) -> Result<Cdt> {
    hp.validate()?;
    let events = check_corpus(corpus, group)?;
    let mut b = Builder::new(group, hp, oracle);
    let root = b.build_node(&events, 0, &[], &[], seed)?;
    let mut tree = Cdt {
        group: group.to_string(),
        root,
        hyperparams: hp.clone(),
        provenance_log: Vec::new(),
        ids: b.ids,
    };
    for ev in b.log {
        tree.log(CONSTRUCT_PHASE, ev);
    }
    Ok(tree)
}

#[cfg(test)]
mod tests;
