//! Incremental adaptation of an existing tree to new observations.
//!
//! Nodes are processed top-down. At each node the grounding matrix is
//! extended with the new events, then every statement is kept, deleted or
//! demoted, and finally new statements are proposed for uncovered events.
//! Demoted statements travel down with their evidence column and join the
//! child's statements before the child is processed. Add runs after the
//! children, since an event counts as covered when any statement below the
//! node supports it.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::{extend_matrix, stats_for, uncovered_events, StatementStats};
use crate::model::{
    Branch, Cdt, CdtNode, DemotionTarget, EventId, EventStore, EvidenceLabel, Gate, GateId, GateVerdict,
    GroundingMatrix, HyperParams, IdAllocator, NodeId, Observation, ProvenanceEvent, Statement, StatementId,
    StatementOrigin,
};
use crate::oracle::{parse, prompts, GateAnswer, Oracle, Role};

/// Events quoted per list in demotion and add prompts.
const MAX_PROMPT_EVENTS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Keep,
    KeepInsufficient,
    Delete,
    Demote,
}

/// Threshold partition over (precision, effective n).
pub fn classify(precision: Option<f64>, n: usize, hp: &HyperParams) -> Classification {
    if n < hp.tau_min {
        return Classification::KeepInsufficient;
    }
    match precision {
        // Only reachable with n = 0, which the branch above already covers.
        None => Classification::KeepInsufficient,
        Some(p) if p >= hp.tau_accept_keep => Classification::Keep,
        Some(p) if p < hp.tau_reject_delete => Classification::Delete,
        Some(_) => Classification::Demote,
    }
}

pub fn classify_statement(stats: &StatementStats, hp: &HyperParams) -> Classification {
    classify(stats.precision, stats.effective_n, hp)
}

/// Shared inputs of one adaptation pass.
#[derive(Clone, Copy)]
pub struct AdaptCtx<'a> {
    pub group: &'a str,
    pub hp: &'a HyperParams,
    pub oracle: &'a Oracle,
    /// Every event the tree references, old and new.
    pub store: &'a EventStore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementRecord {
    pub statement_id: StatementId,
    pub precision: Option<f64>,
    pub effective_n: usize,
}

impl From<&StatementStats> for StatementRecord {
    fn from(s: &StatementStats) -> Self {
        StatementRecord {
            statement_id: s.statement_id.clone(),
            precision: s.precision,
            effective_n: s.effective_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DemotionOutcome {
    MovedToChild { child_id: NodeId, precision: f64 },
    NewChild { gate_id: GateId, question: String, child_id: NodeId, precision: f64 },
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemotionRecord {
    #[serde(flatten)]
    pub before: StatementRecord,
    pub outcome: DemotionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub node_id: NodeId,
    pub path: String,
    pub kept: Vec<StatementRecord>,
    /// Subset of `kept` retained only for lack of evidence.
    pub kept_insufficient: Vec<StatementId>,
    pub deleted: Vec<StatementRecord>,
    pub demoted: Vec<DemotionRecord>,
    pub added: Vec<StatementRecord>,
}

/// Audit record of one adaptation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptReport {
    pub phase: String,
    pub group: String,
    pub new_events: usize,
    pub nodes: Vec<NodeReport>,
    pub new_children: Vec<NodeId>,
    pub oracle_calls: u64,
}

impl AdaptReport {
    pub fn count(&self, f: impl Fn(&NodeReport) -> usize) -> usize {
        self.nodes.iter().map(f).sum()
    }
}

/// Where a demoted statement should go. Pure: the tree is not touched.
#[derive(Debug, Clone, PartialEq)]
pub enum DemotionPlan {
    /// Index into the node's children.
    MoveToChild { child: usize, precision: f64 },
    NewChild {
        question: String,
        routed: BTreeSet<EventId>,
        answers: Vec<GateVerdict>,
        precision: f64,
    },
    Delete,
}

/// Gate candidates and routings reused across the statements demoted at
/// one node.
#[derive(Debug, Default)]
pub struct DemotionCache {
    /// Support set of the statement that triggered generation, with the
    /// candidate questions it got.
    proposals: Vec<(BTreeSet<EventId>, Vec<String>)>,
    routings: BTreeMap<String, Vec<GateVerdict>>,
    pub gate_generation_calls: usize,
}

fn jaccard(a: &BTreeSet<EventId>, b: &BTreeSet<EventId>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn precision_over(m: &GroundingMatrix, stmt: &StatementId, events: &BTreeSet<EventId>) -> Result<Option<f64>> {
    let col = m.column_over(stmt, events.iter())?;
    Ok(StatementStats::from_labels(stmt.clone(), col.into_iter().map(|(_, l)| l)).precision)
}

fn label_set(m: &GroundingMatrix, stmt: &StatementId, label: EvidenceLabel) -> Result<BTreeSet<EventId>> {
    let col = m
        .column(stmt)
        .ok_or_else(|| Error::invalid(format!("statement {stmt} not in matrix {}", m.node_id)))?;
    Ok(col.into_iter().filter(|(_, l)| *l == label).map(|(e, _)| e.clone()).collect())
}

fn pairs<'s>(store: &'s EventStore, ids: impl IntoIterator<Item = &'s EventId>) -> Result<Vec<prompts::Pair<'s>>> {
    ids.into_iter()
        .take(MAX_PROMPT_EVENTS)
        .map(|id| {
            let o = store.resolve(id)?;
            Ok(prompts::Pair {
                scene: &o.context,
                action: &o.decision,
            })
        })
        .collect()
}

fn route(ctx: &AdaptCtx<'_>, question: &str, events: &[&Observation]) -> Result<Vec<GateVerdict>> {
    events
        .par_iter()
        .map(|o| {
            ctx.oracle
                .judge_gate_text(&o.context, question)
                .map(|answer| GateVerdict {
                    event: o.id.clone(),
                    answer,
                })
                .map_err(|e| Error::from(e).context(format!("routing event {}", o.id)))
        })
        .collect()
}

fn yes_set(answers: &[GateVerdict]) -> BTreeSet<EventId> {
    answers
        .iter()
        .filter(|a| a.answer == GateAnswer::Yes)
        .map(|a| a.event.clone())
        .collect()
}

/// Three-step demotion: an existing child, then a generated gate, else delete.
/// `matrix` must cover every event routed to `node`.
pub fn demote_statement(
    stmt: &Statement,
    node: &CdtNode,
    matrix: &GroundingMatrix,
    ctx: &AdaptCtx<'_>,
    cache: &mut DemotionCache,
) -> Result<DemotionPlan> {
    let hp = ctx.hp;
    let sup = label_set(matrix, &stmt.id, EvidenceLabel::Sup)?;
    let con = label_set(matrix, &stmt.id, EvidenceLabel::Con)?;
    if sup.is_empty() {
        return Ok(DemotionPlan::Delete);
    }
    let captures = |routed: &BTreeSet<EventId>| 2 * sup.intersection(routed).count() >= sup.len();

    // Step 1: existing children. Higher precision wins, then lower index.
    let mut best: Option<(usize, f64)> = None;
    for (i, b) in node.children.iter().enumerate() {
        if !captures(&b.node.routed_event_ids) {
            continue;
        }
        let Some(p) = precision_over(matrix, &stmt.id, &b.node.routed_event_ids)? else {
            continue;
        };
        if p >= hp.tau_accept_keep && best.is_none_or(|(_, bp)| p > bp) {
            best = Some((i, p));
        }
    }
    if let Some((child, precision)) = best {
        return Ok(DemotionPlan::MoveToChild { child, precision });
    }

    // Step 2: a new gate, unless the child would exceed the depth limit.
    if node.depth >= hp.d_max {
        return Ok(DemotionPlan::Delete);
    }
    let candidates = match cache.proposals.iter().find(|(s, _)| jaccard(s, &sup) >= 0.5) {
        Some((_, qs)) => qs.clone(),
        None => {
            let p_now = precision_over(matrix, &stmt.id, &node.routed_event_ids)?.unwrap_or(0.0);
            let prompt = prompts::demotion_gates(
                ctx.group,
                &stmt.text,
                p_now,
                &pairs(ctx.store, &sup)?,
                &pairs(ctx.store, &con)?,
            );
            let qs = ctx.oracle.ask(Role::Generator, "demotion_gates", prompt, |t| {
                parse::string_list(t)
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| "expected a JSON list of questions".to_string())
            })?;
            let qs: Vec<String> = qs.into_iter().filter(|q| !q.trim().is_empty()).take(3).collect();
            cache.gate_generation_calls += 1;
            cache.proposals.push((sup.clone(), qs.clone()));
            qs
        }
    };
    let existing: BTreeSet<&str> = node.children.iter().map(|b| b.gate.question.as_str()).collect();
    let events = ctx.store.resolve_all(&node.routed_event_ids)?;
    for q in candidates {
        if existing.contains(q.as_str()) {
            continue;
        }
        let fits = ctx.oracle.ask(
            Role::Discriminator,
            "gate_semantic",
            prompts::gate_semantic(ctx.group, &stmt.text, &q),
            |t| parse::yes_no(t).ok_or_else(|| format!("not yes/no: {t:?}")),
        )?;
        if !fits {
            continue;
        }
        let answers = match cache.routings.get(&q) {
            Some(a) => a.clone(),
            None => {
                let a = route(ctx, &q, &events)?;
                cache.routings.insert(q.clone(), a.clone());
                a
            }
        };
        let routed = yes_set(&answers);
        if !captures(&routed) {
            continue;
        }
        if let Some(p) = precision_over(matrix, &stmt.id, &routed)? {
            if p >= hp.tau_accept_keep {
                return Ok(DemotionPlan::NewChild {
                    question: q,
                    routed,
                    answers,
                    precision: p,
                });
            }
        }
    }
    Ok(DemotionPlan::Delete)
}

/// Proposes statements for the node's uncovered events and keeps those that
/// validate over all of its events. An event is uncovered when no statement
/// at the node supports it and it is not in `covered_below`, the events
/// supported somewhere in the node's subtree. Returns accepted statements
/// with their stats, and the matrix extended by their columns.
/// `node.statements` must match the matrix columns.
pub fn add_statements(
    node: &CdtNode,
    matrix: &GroundingMatrix,
    covered_below: &BTreeSet<EventId>,
    gate_path: &[String],
    ctx: &AdaptCtx<'_>,
    ids: &mut IdAllocator,
    phase: &str,
) -> Result<(Vec<(Statement, StatementStats)>, GroundingMatrix)> {
    let hp = ctx.hp;
    let surviving: Vec<StatementId> = node.statements.iter().map(|s| s.id.clone()).collect();
    let uncovered: BTreeSet<EventId> = uncovered_events(matrix, &surviving)
        .difference(covered_below)
        .cloned()
        .collect();
    if uncovered.len() < hp.tau_min {
        return Ok((Vec::new(), matrix.clone()));
    }
    let existing: Vec<&str> = node.statements.iter().map(|s| s.text.as_str()).collect();
    let path: Vec<&str> = gate_path.iter().map(String::as_str).collect();
    let prompt = prompts::add_statements(ctx.group, &path, &pairs(ctx.store, &uncovered)?, &existing);
    let proposed = ctx.oracle.ask(Role::Generator, "add_statements", prompt, |t| {
        let obj = parse::json_object(t).ok_or("no JSON object")?;
        let list = obj.get("statements").and_then(|v| v.as_array()).ok_or("missing statements list")?;
        Ok(list
            .iter()
            .filter_map(|v| v.as_str())
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect::<Vec<String>>())
    })?;

    let mut cols: Vec<Statement> = node.statements.clone();
    let mut m = matrix.clone();
    let mut accepted = Vec::new();
    for text in proposed {
        if cols.iter().any(|s| s.text == text) {
            continue;
        }
        let cand = Statement {
            id: ids.statement(),
            text,
            origin: StatementOrigin::AdaptedAdd,
            created_at_phase: phase.to_string(),
        };
        let col_refs: Vec<&Statement> = cols.iter().collect();
        let extended = extend_matrix(&m, ctx.store, &col_refs, &[], &[&cand], ctx.group, ctx.oracle)?;
        let stats = stats_for(&extended, &cand.id)?;
        let ok = stats.effective_n >= hp.tau_min && stats.precision.is_some_and(|p| p >= hp.tau_accept_keep);
        if ok {
            m = extended;
            cols.push(cand.clone());
            accepted.push((cand, stats));
        } else {
            log::debug!("add candidate {:?} rejected: {:?}", cand.text, stats.precision);
        }
    }
    Ok((accepted, m))
}

/// A demoted statement in transit, with its labels over the parent's events.
struct Incoming {
    stmt: Statement,
    labels: BTreeMap<EventId, EvidenceLabel>,
}

struct Adapter<'a> {
    ctx: AdaptCtx<'a>,
    phase: &'a str,
    ids: IdAllocator,
    log: Vec<ProvenanceEvent>,
    nodes: Vec<NodeReport>,
    new_children: Vec<NodeId>,
    errors: Vec<String>,
}

impl Adapter<'_> {
    fn process(
        &mut self,
        node: &mut CdtNode,
        new_here: &BTreeSet<EventId>,
        incoming: Vec<Incoming>,
        gate_path: &[String],
        path: &str,
    ) -> Result<BTreeSet<EventId>> {
        let ctx = self.ctx;
        let mut report = NodeReport {
            node_id: node.id.clone(),
            path: path.to_string(),
            kept: vec![],
            kept_insufficient: vec![],
            deleted: vec![],
            demoted: vec![],
            added: vec![],
        };

        // Bring the matrix up to date with the node's routed events.
        let mut m = match node.grounding.take() {
            Some(m) => m,
            None if node.statements.is_empty() => GroundingMatrix::new(node.id.clone(), vec![], vec![], vec![])?,
            None => return Err(Error::invalid(format!("node {} has statements but no matrix", node.id))),
        };
        let missing: Vec<&Observation> = node
            .routed_event_ids
            .iter()
            .filter(|e| m.event_index(e).is_none())
            .map(|e| ctx.store.resolve(e))
            .collect::<Result<_>>()?;
        if !missing.is_empty() {
            if node.statements.is_empty() {
                let rows = vec![vec![]; missing.len()];
                m.append(missing.iter().map(|o| o.id.clone()).collect(), vec![], vec![vec![]; m.n_events()], rows)?;
            } else {
                let cols: Vec<&Statement> = m
                    .statement_ids
                    .iter()
                    .map(|id| {
                        node.statement(id)
                            .ok_or_else(|| Error::invalid(format!("matrix column {id} has no statement")))
                    })
                    .collect::<Result<_>>()?;
                m = extend_matrix(&m, ctx.store, &cols, &missing, &[], ctx.group, ctx.oracle)?;
            }
        }

        // Statements demoted from the parent bring their column along.
        for inc in incoming {
            let col: Vec<Vec<EvidenceLabel>> = m
                .event_ids
                .iter()
                .map(|e| {
                    inc.labels
                        .get(e)
                        .map(|l| vec![*l])
                        .ok_or_else(|| Error::invalid(format!("no label for {e} on demoted {}", inc.stmt.id)))
                })
                .collect::<Result<_>>()?;
            m.append(vec![], vec![inc.stmt.id.clone()], col, vec![])?;
            node.statements.push(inc.stmt);
        }

        // Route the node's new events into existing children.
        let new_obs = ctx.store.resolve_all(new_here)?;
        let mut child_new: Vec<BTreeSet<EventId>> = Vec::with_capacity(node.children.len());
        for b in &mut node.children {
            let routed = if new_obs.is_empty() {
                BTreeSet::new()
            } else {
                yes_set(&route(&ctx, &b.gate.question, &new_obs)?)
            };
            b.node.routed_event_ids.extend(routed.iter().cloned());
            child_new.push(routed);
        }

        // Keep / delete / demote.
        let mut to_demote: Vec<(Statement, StatementStats)> = Vec::new();
        let mut surviving: Vec<Statement> = Vec::new();
        for s in std::mem::take(&mut node.statements) {
            let stats = stats_for(&m, &s.id)?;
            match classify_statement(&stats, ctx.hp) {
                c @ (Classification::Keep | Classification::KeepInsufficient) => {
                    let insufficient = c == Classification::KeepInsufficient;
                    self.log.push(ProvenanceEvent::StatementKept {
                        node_id: node.id.clone(),
                        statement_id: s.id.clone(),
                        precision: stats.precision,
                        effective_n: stats.effective_n,
                        insufficient,
                    });
                    if insufficient {
                        report.kept_insufficient.push(s.id.clone());
                    }
                    report.kept.push((&stats).into());
                    surviving.push(s);
                }
                Classification::Delete => {
                    self.tombstone(&node.id, &s, &stats);
                    report.deleted.push((&stats).into());
                }
                Classification::Demote => to_demote.push((s, stats)),
            }
        }
        node.statements = surviving;

        let mut pending: Vec<Vec<Incoming>> = node.children.iter().map(|_| Vec::new()).collect();
        let mut cache = DemotionCache::default();
        for (s, stats) in to_demote {
            let plan = demote_statement(&s, node, &m, &ctx, &mut cache)?;
            let (target, outcome, after) = match plan {
                DemotionPlan::Delete => {
                    self.tombstone(&node.id, &s, &stats);
                    (None, DemotionOutcome::Deleted, None)
                }
                DemotionPlan::MoveToChild { child, precision } => {
                    let child_id = node.children[child].node.id.clone();
                    pending[child].push(self.carry(&s, &m, &node.children[child].node.routed_event_ids)?);
                    (
                        Some(DemotionTarget::ExistingChild {
                            node_id: child_id.clone(),
                        }),
                        DemotionOutcome::MovedToChild { child_id, precision },
                        Some(precision),
                    )
                }
                DemotionPlan::NewChild {
                    question,
                    routed,
                    answers,
                    precision,
                } => {
                    let i = self.new_child(node, &question, routed, answers);
                    if i == pending.len() {
                        pending.push(Vec::new());
                        child_new.push(BTreeSet::new());
                    }
                    let b = &node.children[i];
                    pending[i].push(self.carry(&s, &m, &b.node.routed_event_ids)?);
                    (
                        Some(DemotionTarget::NewChild {
                            node_id: b.node.id.clone(),
                            gate_id: b.gate.id.clone(),
                        }),
                        DemotionOutcome::NewChild {
                            gate_id: b.gate.id.clone(),
                            question,
                            child_id: b.node.id.clone(),
                            precision,
                        },
                        Some(precision),
                    )
                }
            };
            if let (Some(target), Some(precision_after)) = (target, after) {
                self.log.push(ProvenanceEvent::StatementDemoted {
                    from_node: node.id.clone(),
                    statement_id: s.id.clone(),
                    target,
                    precision_before: stats.precision,
                    precision_after,
                });
            }
            report.demoted.push(DemotionRecord {
                before: (&stats).into(),
                outcome,
            });
        }

        let keep_ids: Vec<StatementId> = node.statements.iter().map(|s| s.id.clone()).collect();
        let m = m.select_statements(&keep_ids)?;
        let idx = self.nodes.len();
        self.nodes.push(report);

        // Children go before Add so coverage from the subtree is known.
        let mut covered_below = BTreeSet::new();
        for (i, (b, (inc, new_i))) in node
            .children
            .iter_mut()
            .zip(pending.into_iter().zip(child_new))
            .enumerate()
        {
            let mut sub_path = gate_path.to_vec();
            sub_path.push(b.gate.question.clone());
            let child_path = format!("{path}/{i}");
            let mut child = b.node.clone();
            match self.process(&mut child, &new_i, inc, &sub_path, &child_path) {
                Ok(cov) => {
                    covered_below.extend(cov);
                    b.node = child;
                }
                Err(e) => self.errors.push(format!("node {} ({child_path}): {e}", b.node.id)),
            }
        }

        let (added, m) = add_statements(node, &m, &covered_below, gate_path, &ctx, &mut self.ids, self.phase)?;
        for (s, stats) in added {
            let precision = stats.precision.expect("accepted statements have evidence");
            self.log.push(ProvenanceEvent::StatementAdded {
                node_id: node.id.clone(),
                statement_id: s.id.clone(),
                text: s.text.clone(),
                precision,
                effective_n: stats.effective_n,
            });
            self.nodes[idx].added.push((&stats).into());
            node.statements.push(s);
        }
        let ids: Vec<StatementId> = node.statements.iter().map(|s| s.id.clone()).collect();
        let unsupported = uncovered_events(&m, &ids);
        let mut covered = covered_below;
        covered.extend(m.event_ids.iter().filter(|e| !unsupported.contains(*e)).cloned());
        node.grounding = (!node.statements.is_empty()).then_some(m);
        Ok(covered)
    }

    fn tombstone(&mut self, node_id: &NodeId, s: &Statement, stats: &StatementStats) {
        self.log.push(ProvenanceEvent::StatementDeleted {
            node_id: node_id.clone(),
            statement_id: s.id.clone(),
            text: s.text.clone(),
            precision: stats.precision,
            effective_n: stats.effective_n,
        });
    }

    fn carry(&self, s: &Statement, m: &GroundingMatrix, events: &BTreeSet<EventId>) -> Result<Incoming> {
        let labels = m.column_over(&s.id, events.iter())?.into_iter().collect();
        Ok(Incoming {
            stmt: Statement {
                origin: StatementOrigin::Demoted,
                ..s.clone()
            },
            labels,
        })
    }

    /// Index of the child behind `question`, creating it if this pass has not.
    fn new_child(
        &mut self,
        node: &mut CdtNode,
        question: &str,
        routed: BTreeSet<EventId>,
        answers: Vec<GateVerdict>,
    ) -> usize {
        if let Some(i) = node.children.iter().position(|b| b.gate.question == question) {
            return i;
        }
        let gate = Gate {
            id: self.ids.gate(),
            question: question.to_string(),
        };
        let child_id = self.ids.node();
        let broadness = routed.len() as f64 / node.routed_event_ids.len().max(1) as f64;
        self.log.push(ProvenanceEvent::GateInstalled {
            parent_id: node.id.clone(),
            child_id: child_id.clone(),
            gate_id: gate.id.clone(),
            question: gate.question.clone(),
            broadness,
            answers,
        });
        self.new_children.push(child_id.clone());
        node.children.push(Branch {
            gate,
            node: CdtNode::leaf(child_id, node.depth + 1, routed),
        });
        node.children.len() - 1
    }
}

fn check_new(t: &Cdt, d_new: &[Observation]) -> Result<()> {
    if d_new.is_empty() {
        return Err(Error::invalid("no new observations to adapt with"));
    }
    let mut seen = BTreeSet::new();
    for o in d_new {
        o.check()?;
        if o.group != t.group {
            return Err(Error::invalid(format!(
                "event {} belongs to {:?}, tree is for {:?}",
                o.id, o.group, t.group
            )));
        }
        if !seen.insert(&o.id) {
            return Err(Error::invalid(format!("duplicate new event id {}", o.id)));
        }
        if t.all_event_ids().contains(&o.id) {
            return Err(Error::invalid(format!("event {} is already in the tree", o.id)));
        }
    }
    Ok(())
}

/// Adapts `t` to `d_new`, returning a new tree and the audit report.
/// `history` must hold every event already routed in `t`.
pub fn adapt_tree(
    t: &Cdt,
    history: &EventStore,
    d_new: &[Observation],
    oracle: &Oracle,
    hp: &HyperParams,
    phase: &str,
) -> Result<(Cdt, AdaptReport)> {
    hp.validate()?;
    check_new(t, d_new)?;
    if let Some(e) = t.all_event_ids().iter().find(|e| !history.contains(e)) {
        return Err(Error::invalid(format!("history is missing tree event {e}")));
    }
    let mut store = history.clone();
    store.extend(d_new)?;
    let calls_before = oracle.requests();

    let mut out = t.clone();
    let new_ids: BTreeSet<EventId> = d_new.iter().map(|o| o.id.clone()).collect();
    out.root.routed_event_ids.extend(new_ids.iter().cloned());

    let mut ad = Adapter {
        ctx: AdaptCtx {
            group: &t.group,
            hp,
            oracle,
            store: &store,
        },
        phase,
        ids: t.ids.clone(),
        log: vec![],
        nodes: vec![],
        new_children: vec![],
        errors: vec![],
    };
    if let Err(e) = ad.process(&mut out.root, &new_ids, vec![], &[], "root") {
        ad.errors.insert(0, format!("node {} (root): {e}", t.root.id));
    }
    if !ad.errors.is_empty() {
        return Err(Error::Aggregate(ad.errors));
    }

    out.ids = ad.ids;
    out.hyperparams = hp.clone();
    for ev in ad.log {
        out.log(phase, ev);
    }
    let report = AdaptReport {
        phase: phase.to_string(),
        group: t.group.clone(),
        new_events: d_new.len(),
        nodes: ad.nodes,
        new_children: ad.new_children,
        oracle_calls: oracle.requests() - calls_before,
    };
    Ok((out, report))
}

/// Re-targets a tree at another group. Source evidence is dropped, so every
/// statement is re-judged on the target's events alone.
pub fn transfer(
    source: &Cdt,
    target_corpus: &[Observation],
    target_group: &str,
    oracle: &Oracle,
    hp: &HyperParams,
    phase: &str,
) -> Result<(Cdt, AdaptReport)> {
    if target_corpus.is_empty() {
        return Err(Error::invalid("transfer needs a non-empty target corpus"));
    }
    if target_group.trim().is_empty() {
        return Err(Error::invalid("target group is empty"));
    }
    fn strip(node: &mut CdtNode) -> Result<()> {
        node.routed_event_ids.clear();
        for s in &mut node.statements {
            s.origin = StatementOrigin::Transferred;
        }
        node.grounding = if node.statements.is_empty() {
            None
        } else {
            let ids = node.statements.iter().map(|s| s.id.clone()).collect();
            Some(GroundingMatrix::new(node.id.clone(), vec![], ids, vec![])?)
        };
        for b in &mut node.children {
            strip(&mut b.node)?;
        }
        Ok(())
    }
    let mut t = source.clone();
    let dropped = t.all_event_ids().len();
    t.group = target_group.to_string();
    strip(&mut t.root)?;
    t.log(
        phase,
        ProvenanceEvent::Transferred {
            source_group: source.group.clone(),
            target_group: target_group.to_string(),
            dropped_source_events: dropped,
        },
    );
    adapt_tree(&t, &EventStore::new(), target_corpus, oracle, hp, phase)
}
