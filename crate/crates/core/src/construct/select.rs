use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_tree, derive_seed, CONSTRUCT_PHASE};
use crate::error::{Error, Result};
use crate::model::{Cdt, HyperParams, Observation, ProvenanceEvent};
use crate::oracle::{parse, prompts, Oracle, Role};

/// Outcome of multi-candidate construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    pub tree: Cdt,
    pub winner: usize,
    /// Votes per candidate index; failed candidates have zero.
    pub votes: Vec<usize>,
    pub failed: Vec<String>,
}

pub fn candidate_seeds(base: u64, c: usize) -> Vec<u64> {
    (0..c as u64).map(|i| derive_seed(base, i)).collect()
}

fn parse_choice(text: &str, n: usize) -> std::result::Result<usize, String> {
    let obj = parse::json_object(text).ok_or("no JSON object")?;
    let idx = obj
        .get("best_candidate_index")
        .and_then(|v| v.as_u64().or_else(|| v.as_str().and_then(|s| s.trim().parse().ok())))
        .ok_or("missing best_candidate_index")? as usize;
    if idx == 0 || idx > n {
        return Err(format!("best_candidate_index {idx} outside 1..={n}"));
    }
    Ok(idx - 1)
}

/// Eligible index with the most votes; ties go to the lowest index.
pub(crate) fn winner(votes: &[usize], eligible: &[usize]) -> usize {
    let mut best = eligible[0];
    for &i in eligible {
        if votes[i] > votes[best] || (votes[i] == votes[best] && i < best) {
            best = i;
        }
    }
    best
}

/// Runs `rounds` votes, each over a seeded shuffle of the candidates.
/// Returns votes per candidate in the given order.
pub fn vote(group: &str, verbalized: &[String], rounds: usize, seed: u64, oracle: &Oracle) -> Result<Vec<usize>> {
    let mut votes = vec![0usize; verbalized.len()];
    for round in 0..rounds {
        let mut order: Vec<usize> = (0..verbalized.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x766f_7465 + round as u64));
        order.shuffle(&mut rng);
        let shown: Vec<String> = order.iter().map(|&i| verbalized[i].clone()).collect();
        let n = shown.len();
        let pick = oracle
            .ask(Role::Generator, "select_candidate", prompts::select_candidate(group, &shown), |t| {
                parse_choice(t, n)
            })
            .map_err(|e| Error::from(e).context(format!("voting round {round}")))?;
        votes[order[pick]] += 1;
    }
    Ok(votes)
}

/// Builds one candidate per seed, then lets the generator vote over
/// seeded shuffles of the verbalized candidates.
pub fn build_tree_with_selection(
    corpus: &[Observation],
    group: &str,
    hp: &HyperParams,
    oracle: &Oracle,
    seeds: &[u64],
) -> Result<Selection> {
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one candidate seed"));
    }
    let built: Vec<Result<Cdt>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| build_tree(corpus, group, hp, oracle, s).map_err(|e| e.context(format!("candidate {i}"))))
        .collect();
    let mut failed = Vec::new();
    let mut ok: Vec<(usize, Cdt)> = Vec::new();
    for (i, r) in built.into_iter().enumerate() {
        match r {
            Ok(t) => ok.push((i, t)),
            Err(e) => {
                // Invalid input fails every candidate identically.
                if matches!(e.root(), Error::Invalid(_)) {
                    return Err(e);
                }
                log::warn!("{e}");
                failed.push(e.to_string());
            }
        }
    }
    if ok.is_empty() {
        return Err(Error::Aggregate(failed));
    }
    let mut votes = vec![0usize; seeds.len()];
    if ok.len() > 1 {
        let verbal: Vec<String> = ok.iter().map(|(_, t)| t.verbalize()).collect();
        let tally = vote(group, &verbal, hp.voting_rounds, seeds[0], oracle)?;
        for ((i, _), v) in ok.iter().zip(tally) {
            votes[*i] = v;
        }
    }
    let eligible: Vec<usize> = ok.iter().map(|(i, _)| *i).collect();
    let win = winner(&votes, &eligible);
    let mut tree = ok
        .into_iter()
        .find(|(i, _)| *i == win)
        .map(|(_, t)| t)
        .expect("winner is a built candidate");
    tree.log(
        CONSTRUCT_PHASE,
        ProvenanceEvent::CandidateSelected {
            candidate: win,
            votes: votes.clone(),
        },
    );
    Ok(Selection {
        tree,
        winner: win,
        votes,
        failed,
    })
}
