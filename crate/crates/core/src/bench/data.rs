//! Corpus ingestion and chronological splits.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analyze::phase_split;
use crate::error::{Error, Result};
use crate::model::{sort_chronologically, Observation};

/// Groups with at most this many pairs draw a warning.
pub const GROUP_FLOOR: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    /// Each group's observations in chronological order.
    pub groups: BTreeMap<String, Vec<Observation>>,
    pub errors: Vec<LineError>,
    pub warnings: Vec<String>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> impl Iterator<Item = &Observation> {
        self.groups.values().flatten()
    }
}

pub fn ingest(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

/// Parses JSONL. Malformed lines are reported and skipped; a duplicate id is
/// fatal.
pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    let mut by_group: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Observation>(line)
            .map_err(|e| e.to_string())
            .and_then(|o| o.check().map(|_| o).map_err(|e| e.to_string()));
        let o = match parsed {
            Ok(o) => o,
            Err(message) => {
                corpus.errors.push(LineError { line: n, message });
                continue;
            }
        };
        if let Some(prev) = first_seen.insert(o.id.to_string(), n) {
            return Err(Error::invalid(format!("duplicate observation id {} on lines {prev} and {n}", o.id)));
        }
        by_group.entry(o.group.clone()).or_default().push(o);
    }
    for (g, obs) in by_group {
        if obs.len() <= GROUP_FLOOR {
            corpus
                .warnings
                .push(format!("group {g:?} has {} pairs; at least {} are recommended", obs.len(), GROUP_FLOOR + 1));
        }
        corpus.groups.insert(g, sort_chronologically(obs)?);
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<Observation>,
    pub test: Vec<Observation>,
    /// Set when the fraction had to be clamped to keep both sides non-empty.
    pub warning: Option<String>,
}

/// The first ⌈f·n⌉ events by order go to training, clamped to `[1, n-1]`.
pub fn chronological_split(corpus: &[Observation], train_fraction: f64) -> Result<Split> {
    let n = corpus.len();
    if n < 2 {
        return Err(Error::invalid(format!("a split needs at least 2 observations, got {n}")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction must be in (0, 1), got {train_fraction}")));
    }
    let sorted = sort_chronologically(corpus.to_vec())?;
    // The epsilon keeps 0.7 * 10 from rounding up to 8.
    let want = (train_fraction * n as f64 - 1e-9).ceil() as usize;
    let k = want.clamp(1, n - 1);
    let warning = (k != want).then(|| {
        let msg = format!("train size {want} of {n} clamped to {k} so both sides are non-empty");
        log::warn!("{msg}");
        msg
    });
    let mut train = sorted;
    let test = train.split_off(k);
    Ok(Split { train, test, warning })
}

/// Chronological phases; earlier phases take the remainder.
pub fn phases(corpus: &[Observation], k: usize) -> Result<Vec<Vec<Observation>>> {
    if k == 0 || corpus.len() < k {
        return Err(Error::invalid(format!("cannot split {} observations into {k} phases", corpus.len())));
    }
    let sorted = sort_chronologically(corpus.to_vec())?;
    Ok(phase_split(&sorted, k).into_iter().map(<[Observation]>::to_vec).collect())
}
