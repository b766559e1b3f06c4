//! End-to-end check that every traced prediction resolves to evidence:
//! trace → statements → grounding rows → observations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::PredictionRecord;
use crate::document::{load_tree, read_jsonl};
use crate::error::{Error, Result};
use crate::model::{Cdt, EventStore};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceCheck {
    pub predictions: usize,
    pub traced: usize,
    pub statements: usize,
    pub evidence_rows: usize,
    pub dangling: Vec<String>,
}

fn prediction_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            prediction_files(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "predictions.jsonl") {
            out.push(p);
        }
    }
    Ok(())
}

/// Walks every `predictions.jsonl` under `run_dir`.
pub fn verify_provenance(run_dir: &Path, store: &EventStore) -> Result<ProvenanceCheck> {
    let mut files = Vec::new();
    prediction_files(run_dir, &mut files)?;
    let mut check = ProvenanceCheck::default();
    let mut trees: BTreeMap<PathBuf, Option<Cdt>> = BTreeMap::new();
    for file in files {
        let cell = file.parent().expect("file has a parent");
        let records: Vec<PredictionRecord> = read_jsonl(&file)?;
        for rec in records {
            check.predictions += 1;
            let at = format!("{} {}", file.display(), rec.observation_id);
            if !store.contains(&rec.observation_id) {
                check.dangling.push(format!("{at}: observation not in corpus"));
            }
            let Some(trace) = &rec.trace else { continue };
            check.traced += 1;
            let Some(rel) = &rec.tree else {
                check.dangling.push(format!("{at}: trace without a tree reference"));
                continue;
            };
            let path = cell.join(rel);
            let tree = trees.entry(path.clone()).or_insert_with(|| load_tree(&path).ok());
            let Some(tree) = tree.as_ref() else {
                check.dangling.push(format!("{at}: tree {} unreadable", path.display()));
                continue;
            };
            let gate_ids: Vec<_> = tree.gates().into_iter().map(|g| &g.id).collect();
            for g in &trace.gates {
                if !gate_ids.contains(&&g.gate_id) {
                    check.dangling.push(format!("{at}: gate {} not in tree", g.gate_id));
                }
            }
            for s in &trace.statements {
                check.statements += 1;
                let Some(node) = tree.find_node(&s.node_id) else {
                    check.dangling.push(format!("{at}: node {} not in tree", s.node_id));
                    continue;
                };
                if node.statement(&s.id).is_none() {
                    check.dangling.push(format!("{at}: statement {} not at node {}", s.id, s.node_id));
                    continue;
                }
                let Some(column) = node.grounding.as_ref().and_then(|m| m.column(&s.id)) else {
                    check.dangling.push(format!("{at}: statement {} has no grounding column", s.id));
                    continue;
                };
                for (event, _) in column {
                    check.evidence_rows += 1;
                    if !store.contains(event) {
                        check.dangling.push(format!("{at}: evidence event {event} not in corpus"));
                    }
                }
            }
        }
    }
    Ok(check)
}
