//! Experiment plans, run configuration and run directories.
//!
//! A run directory holds `config.toml` and `seeds.json` (written first),
//! one directory per (plan, group, method) cell under `cells/`, and the
//! summary `report.json` plus `evaluation_by_*.csv`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::data::{chronological_split, phases, Corpus};
use crate::adapt::{adapt_tree, transfer};
use crate::construct::{build_tree, build_tree_with_selection, candidate_seeds, derive_seed};
use crate::document::{load_tree, save_tree, write_file, write_json, write_jsonl};
use crate::error::{Error, Result};
use crate::evaluate::{aggregate, evaluate_all, EvaluationRecord, GroupBy, ScoreTable};
use crate::infer::{predict, BaselineConfig, BaselineKind, Baselines, InferConfig, TraversalTrace};
use crate::model::{Cdt, EventId, EventStore, HyperParams, Observation};
use crate::oracle::{Oracle, OracleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plan {
    Main,
    Temporal,
    Transfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cdt,
    Vanilla,
    HumanProfile,
    Summarization,
    Rag,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Cdt,
        Method::Vanilla,
        Method::HumanProfile,
        Method::Summarization,
        Method::Rag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cdt => "cdt",
            Method::Vanilla => "vanilla",
            Method::HumanProfile => "human_profile",
            Method::Summarization => "summarization",
            Method::Rag => "rag",
        }
    }

    fn baseline(self) -> Option<BaselineKind> {
        match self {
            Method::Cdt => None,
            Method::Vanilla => Some(BaselineKind::Vanilla),
            Method::HumanProfile => Some(BaselineKind::HumanProfile),
            Method::Summarization => Some(BaselineKind::Summarization),
            Method::Rag => Some(BaselineKind::Rag),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferPair {
    pub source: String,
    pub target: String,
    /// Prebuilt source tree; otherwise one is built on the source's
    /// training split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_tree: Option<PathBuf>,
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_fraction() -> f64 {
    0.7
}

fn default_phases() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// JSONL corpus; relative paths are resolved by the caller.
    pub data: PathBuf,
    pub plan: Plan,
    /// Groups to run; empty means every group in the corpus.
    #[serde(default)]
    pub groups: Vec<String>,
    /// Methods for the main plan.
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_phases")]
    pub phases: usize,
    #[serde(default)]
    pub transfers: Vec<TransferPair>,
    /// Hand-written profiles by group for the human-profile baseline.
    #[serde(default)]
    pub profiles: BTreeMap<String, String>,
    #[serde(default)]
    pub hyperparams: HyperParams,
    #[serde(default)]
    pub infer: InferConfig,
    #[serde(default)]
    pub baselines: BaselineConfig,
    pub oracle: OracleConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("run config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("run config: {e}")))
    }

    /// Every problem with the config itself (oracle credentials aside).
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.hyperparams.validate() {
            out.push(e.to_string());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            out.push(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        if self.phases < 2 {
            out.push(format!("phases must be at least 2, got {}", self.phases));
        }
        if self.infer.background_cap == 0 {
            out.push("infer.background_cap must be positive".into());
        }
        if self.baselines.rag_k == 0 || self.baselines.summary_block == 0 {
            out.push("baselines.rag_k and baselines.summary_block must be positive".into());
        }
        match self.plan {
            Plan::Main if self.methods.is_empty() => out.push("main plan needs at least one method".into()),
            Plan::Transfer if self.transfers.is_empty() => out.push("transfer plan needs at least one [[transfers]] entry".into()),
            _ => {}
        }
        out
    }

    /// Problems that only show once the corpus is known.
    pub fn problems_with(&self, corpus: &Corpus) -> Vec<String> {
        let mut out = Vec::new();
        for g in &self.groups {
            if !corpus.groups.contains_key(g) {
                out.push(format!("group {g:?} is not in the corpus"));
            }
        }
        for t in &self.transfers {
            if !corpus.groups.contains_key(&t.target) {
                out.push(format!("transfer target {:?} is not in the corpus", t.target));
            }
        }
        if corpus.is_empty() {
            out.push("corpus has no valid observations".into());
        }
        out
    }

    fn selected_groups(&self, corpus: &Corpus) -> Vec<String> {
        if self.groups.is_empty() {
            corpus.groups.keys().cloned().collect()
        } else {
            self.groups.clone()
        }
    }
}

/// Seed for one group, stable across runs and independent of group order.
pub fn group_seed(base: u64, group: &str) -> u64 {
    let h = Sha256::digest(group.as_bytes());
    derive_seed(base, u64::from_le_bytes(h[..8].try_into().expect("8 bytes")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub observation_id: EventId,
    pub group: String,
    pub method: String,
    pub prediction: String,
    /// Tree file, relative to the record's cell directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraversalTrace>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    /// Cell directory relative to the run directory.
    pub cell: String,
    pub group: String,
    pub method: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub predictions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub plan: Plan,
    pub cells: Vec<CellSummary>,
    pub tables: Vec<ScoreTable>,
}

impl RunReport {
    pub fn cell(&self, group: &str, method: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.group == group && c.method == method)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CellSummary> {
        self.cells.iter().filter(|c| !c.ok)
    }
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

enum Predictor<'a> {
    Tree(&'a Cdt),
    Baseline(&'a Baselines, BaselineKind),
}

struct Cell<'a> {
    rel: String,
    group: String,
    method: String,
    run: &'a Path,
}

impl Cell<'_> {
    fn dir(&self) -> PathBuf {
        self.run.join(&self.rel)
    }

    fn finish(self, outcome: Result<Vec<EvaluationRecord>>) -> (CellSummary, Vec<EvaluationRecord>) {
        match outcome {
            Ok(records) => {
                let means = aggregate(&records, GroupBy::Method).ok().map(|t| t.avg_weighted);
                let summary = CellSummary {
                    cell: self.rel,
                    group: self.group,
                    method: self.method,
                    ok: true,
                    error: None,
                    predictions: records.len(),
                    means,
                };
                (summary, records)
            }
            Err(e) => {
                log::error!("cell {} failed: {e}", self.rel);
                let summary = CellSummary {
                    cell: self.rel,
                    group: self.group,
                    method: self.method,
                    ok: false,
                    error: Some(e.to_string()),
                    predictions: 0,
                    means: None,
                };
                (summary, Vec::new())
            }
        }
    }
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    oracle: &'a Oracle,
    out: &'a Path,
}

fn question_for(o: &Observation) -> String {
    if o.question.trim().is_empty() {
        format!("What will {} do next?", o.group)
    } else {
        o.question.clone()
    }
}

impl Runner<'_> {
    fn build(&self, corpus: &[Observation], group: &str, seed: u64, oracle: &Oracle) -> Result<Cdt> {
        let hp = &self.cfg.hyperparams;
        if hp.candidates_c <= 1 {
            build_tree(corpus, group, hp, oracle, seed)
        } else {
            Ok(build_tree_with_selection(corpus, group, hp, oracle, &candidate_seeds(seed, hp.candidates_c))?.tree)
        }
    }

    /// Predicts and scores `test`, writing predictions and evaluations.
    fn score(&self, cell: &Cell<'_>, pred: Predictor<'_>, test: &[Observation], oracle: &Oracle) -> Result<Vec<EvaluationRecord>> {
        if let Predictor::Tree(t) = pred {
            save_tree(cell.dir().join("tree.json"), t)?;
        }
        let records: Vec<PredictionRecord> = test
            .par_iter()
            .map(|o| {
                let q = question_for(o);
                let mut rec = PredictionRecord {
                    observation_id: o.id.clone(),
                    group: o.group.clone(),
                    method: cell.method.clone(),
                    prediction: String::new(),
                    tree: None,
                    trace: None,
                    fallback: false,
                };
                match pred {
                    Predictor::Tree(t) => {
                        let p = predict(t, &o.context, &q, oracle, &self.cfg.infer)?;
                        rec.prediction = p.text;
                        rec.trace = Some(p.trace);
                        rec.fallback = p.fallback;
                        rec.tree = Some("tree.json".into());
                    }
                    Predictor::Baseline(b, kind) => rec.prediction = b.predict(kind, &o.context, &q, oracle)?,
                }
                Ok(rec)
            })
            .collect::<Result<_>>()
            .map_err(|e: Error| e.context("prediction"))?;
        write_jsonl(cell.dir().join("predictions.jsonl"), &records)?;
        let items: Vec<(&Observation, String)> = test.iter().zip(&records).map(|(o, r)| (o, r.prediction.clone())).collect();
        let evals = evaluate_all(&items, &cell.method, oracle).map_err(|e| e.context("evaluation"))?;
        write_jsonl(cell.dir().join("evaluations.jsonl"), &evals)?;
        Ok(evals)
    }

    fn cell(&self, plan: &str, unit: &str, group: &str, method: &str) -> Cell<'_> {
        Cell {
            rel: format!("cells/{plan}/{}/{method}", slug(unit)),
            group: group.to_string(),
            method: method.to_string(),
            run: self.out,
        }
    }

    fn baselines(&self, group: &str, train: &[Observation]) -> Result<Baselines> {
        let mut cfg = self.cfg.baselines.clone();
        if let Some(p) = self.cfg.profiles.get(group) {
            cfg.profile = Some(p.clone());
        }
        Baselines::new(group, train.to_vec(), cfg)
    }

    fn main_group(&self, group: &str, obs: &[Observation]) -> Vec<(CellSummary, Vec<EvaluationRecord>)> {
        let seed = group_seed(self.cfg.seed, group);
        let split = chronological_split(obs, self.cfg.train_fraction);
        let baselines = split.as_ref().map_err(|e| e.to_string()).and_then(|s| self.baselines(group, &s.train).map_err(|e| e.to_string()));
        self.cfg
            .methods
            .par_iter()
            .map(|&m| {
                let cell = self.cell("main", group, group, m.name());
                let oracle = self.oracle.fork();
                let outcome = (|| {
                    let split = split.as_ref().map_err(|e| Error::invalid(e.to_string()))?;
                    match m.baseline() {
                        None => {
                            let tree = self.build(&split.train, group, seed, &oracle).map_err(|e| e.context("build"))?;
                            self.score(&cell, Predictor::Tree(&tree), &split.test, &oracle)
                        }
                        Some(kind) => {
                            let b = baselines.as_ref().map_err(|e| Error::invalid(e.clone()))?;
                            self.score(&cell, Predictor::Baseline(b, kind), &split.test, &oracle)
                        }
                    }
                })();
                cell.finish(outcome)
            })
            .collect()
    }

    fn temporal_group(&self, group: &str, obs: &[Observation]) -> Vec<(CellSummary, Vec<EvaluationRecord>)> {
        let seed = group_seed(self.cfg.seed, group);
        let base_oracle = self.oracle.fork();
        let parts = phases(obs, self.cfg.phases);
        let p1_tree = parts
            .as_ref()
            .map_err(|e| e.to_string())
            .and_then(|p| self.build(&p[0], group, seed, &base_oracle).map_err(|e| format!("P1 build: {e}")));
        ["fixed", "retrained", "adapted"]
            .par_iter()
            .map(|&setting| {
                let cell = self.cell("temporal", group, group, setting);
                let oracle = self.oracle.fork();
                let outcome = (|| {
                    let parts = parts.as_ref().map_err(|e| Error::invalid(e.to_string()))?;
                    let eval: Vec<Observation> = parts[1..].iter().flatten().cloned().collect();
                    let p1 = || p1_tree.as_ref().map_err(|e| Error::invalid(e.clone()));
                    let tree = match setting {
                        "fixed" => p1()?.clone(),
                        "retrained" => {
                            let both: Vec<Observation> = parts[..2].iter().flatten().cloned().collect();
                            self.build(&both, group, derive_seed(seed, 1), &oracle).map_err(|e| e.context("retrain"))?
                        }
                        _ => {
                            let history = EventStore::from_observations(&parts[0])?;
                            let (t, report) = adapt_tree(p1()?, &history, &parts[1], &oracle, &self.cfg.hyperparams, "P2")
                                .map_err(|e| e.context("adapt"))?;
                            write_json(cell.dir().join("adapt_report.json"), &report)?;
                            t
                        }
                    };
                    self.score(&cell, Predictor::Tree(&tree), &eval, &oracle)
                })();
                cell.finish(outcome)
            })
            .collect()
    }

    fn source_tree(&self, pair: &TransferPair, corpus: &Corpus, oracle: &Oracle) -> Result<Cdt> {
        if let Some(path) = &pair.source_tree {
            return load_tree(path);
        }
        let obs = corpus
            .groups
            .get(&pair.source)
            .ok_or_else(|| Error::invalid(format!("no source tree for {:?}: group absent and no source_tree given", pair.source)))?;
        let split = chronological_split(obs, self.cfg.train_fraction)?;
        self.build(&split.train, &pair.source, group_seed(self.cfg.seed, &pair.source), oracle)
    }

    fn transfer_pair(&self, pair: &TransferPair, corpus: &Corpus) -> Vec<(CellSummary, Vec<EvaluationRecord>)> {
        let target = &pair.target;
        let unit = format!("{}__{}", pair.source, pair.target);
        let split = corpus
            .groups
            .get(target)
            .ok_or_else(|| format!("target {target:?} missing"))
            .and_then(|o| chronological_split(o, self.cfg.train_fraction).map_err(|e| e.to_string()));
        ["vanilla", "target_cdt", "transfer"]
            .par_iter()
            .map(|&setting| {
                let cell = self.cell("transfer", &unit, target, setting);
                let oracle = self.oracle.fork();
                let outcome = (|| {
                    let split = split.as_ref().map_err(|e| Error::invalid(e.clone()))?;
                    match setting {
                        "vanilla" => {
                            let b = self.baselines(target, &split.train)?;
                            self.score(&cell, Predictor::Baseline(&b, BaselineKind::Vanilla), &split.test, &oracle)
                        }
                        "target_cdt" => {
                            let t = self.build(&split.train, target, group_seed(self.cfg.seed, target), &oracle)?;
                            self.score(&cell, Predictor::Tree(&t), &split.test, &oracle)
                        }
                        _ => {
                            let source = self.source_tree(pair, corpus, &oracle).map_err(|e| e.context("source tree"))?;
                            let (t, report) = transfer(&source, &split.train, target, &oracle, &self.cfg.hyperparams, "transfer")
                                .map_err(|e| e.context("transfer"))?;
                            write_json(cell.dir().join("adapt_report.json"), &report)?;
                            self.score(&cell, Predictor::Tree(&t), &split.test, &oracle)
                        }
                    }
                })();
                cell.finish(outcome)
            })
            .collect()
    }
}

/// Runs `cfg.plan` over `corpus`, writing everything under `out`. A failing
/// cell is recorded in the report and never stops the others.
pub fn run_experiment(cfg: &RunConfig, corpus: &Corpus, oracle: &Oracle, out: &Path) -> Result<RunReport> {
    let mut problems = cfg.problems();
    problems.extend(cfg.problems_with(corpus));
    if !problems.is_empty() {
        return Err(Error::invalid(problems.join("; ")));
    }
    let groups = cfg.selected_groups(corpus);
    write_file(out.join("config.toml"), cfg.to_toml()?)?;
    let seeds: BTreeMap<&str, u64> = groups.iter().map(|g| (g.as_str(), group_seed(cfg.seed, g))).collect();
    write_json(out.join("seeds.json"), &serde_json::json!({ "base": cfg.seed, "groups": seeds }))?;

    let runner = Runner { cfg, oracle, out };
    let results: Vec<(CellSummary, Vec<EvaluationRecord>)> = match cfg.plan {
        Plan::Main => groups
            .par_iter()
            .flat_map(|g| runner.main_group(g, &corpus.groups[g]))
            .collect(),
        Plan::Temporal => groups
            .par_iter()
            .flat_map(|g| runner.temporal_group(g, &corpus.groups[g]))
            .collect(),
        Plan::Transfer => cfg.transfers.par_iter().flat_map(|p| runner.transfer_pair(p, corpus)).collect(),
    };
    let mut cells = Vec::new();
    let mut records = Vec::new();
    for (c, r) in results {
        cells.push(c);
        records.extend(r);
    }
    cells.sort_by(|a, b| a.cell.cmp(&b.cell));

    let mut tables = Vec::new();
    if !records.is_empty() {
        for (by, name) in [(GroupBy::Method, "method"), (GroupBy::Group, "group"), (GroupBy::Domain, "domain")] {
            let t = aggregate(&records, by)?;
            write_file(out.join(format!("evaluation_by_{name}.csv")), t.to_csv())?;
            tables.push(t);
        }
    }
    let report = RunReport {
        plan: cfg.plan,
        cells,
        tables,
    };
    write_json(out.join("report.json"), &report)?;
    Ok(report)
}
