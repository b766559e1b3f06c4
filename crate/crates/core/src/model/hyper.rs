use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Construction, adaptation and analysis knobs.
///
/// `tau_accept_keep` and `tau_reject_delete` each serve two roles: the same
/// value accepts/rejects hypotheses during construction and keeps/deletes
/// statements during adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub d_max: u32,
    pub rounds_r: usize,
    pub per_centroid_m: usize,
    pub hypotheses_k: usize,
    pub tau_accept_keep: f64,
    pub tau_reject_delete: f64,
    pub tau_filter: f64,
    pub tau_min: usize,
    pub min_node_size: usize,
    pub candidates_c: usize,
    pub voting_rounds: usize,
    pub bss_top_n: usize,
    pub bss_context_tau: f64,
    /// Lower target for the hypothesis compression step.
    pub dedup_target: usize,
    /// Upper bound for the hypothesis compression step.
    pub dedup_upper: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            d_max: 3,
            rounds_r: 4,
            per_centroid_m: 8,
            hypotheses_k: 3,
            tau_accept_keep: 0.65,
            tau_reject_delete: 0.35,
            tau_filter: 0.8,
            tau_min: 3,
            min_node_size: 8,
            candidates_c: 3,
            voting_rounds: 5,
            bss_top_n: 20,
            bss_context_tau: 0.7,
            dedup_target: 4,
            dedup_upper: 8,
        }
    }
}

impl HyperParams {
    /// Checks every invariant at once; all problems are reported together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0 <= self.tau_reject_delete
            && self.tau_reject_delete < self.tau_accept_keep
            && self.tau_accept_keep <= 1.0)
        {
            problems.push(format!(
                "need 0 <= tau_reject_delete ({}) < tau_accept_keep ({}) <= 1",
                self.tau_reject_delete, self.tau_accept_keep
            ));
        }
        if !(self.tau_filter > 0.0 && self.tau_filter <= 1.0) {
            problems.push(format!("tau_filter must be in (0, 1], got {}", self.tau_filter));
        }
        if self.tau_min < 1 {
            problems.push("tau_min must be >= 1".to_string());
        }
        if self.d_max < 1 {
            problems.push("d_max must be >= 1".to_string());
        }
        if !(1..=4).contains(&self.rounds_r) {
            problems.push(format!("rounds_r must be in [1, 4], got {}", self.rounds_r));
        }
        if self.per_centroid_m < 1 {
            problems.push("per_centroid_m must be >= 1".to_string());
        }
        if self.hypotheses_k < 1 {
            problems.push("hypotheses_k must be >= 1".to_string());
        }
        if self.candidates_c < 1 {
            problems.push("candidates_c must be >= 1".to_string());
        }
        if self.dedup_target < 1 || self.dedup_target > self.dedup_upper {
            problems.push(format!(
                "need 1 <= dedup_target ({}) <= dedup_upper ({})",
                self.dedup_target, self.dedup_upper
            ));
        }
        if !(-1.0..=1.0).contains(&self.bss_context_tau) {
            problems.push(format!("bss_context_tau must be in [-1, 1], got {}", self.bss_context_tau));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!("hyperparameters: {}", problems.join("; "))))
        }
    }
}
