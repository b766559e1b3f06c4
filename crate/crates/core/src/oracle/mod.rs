//! External model capabilities behind one replayable interface.
//!
//! Every generation, judgment, relation label and embedding goes through
//! [`Oracle`]. Providers only move text and vectors; prompt rendering,
//! tolerant parsing, the single reprompt, bounded retries and the
//! record/replay transcript all live here so pipelines stay deterministic
//! under replay.

mod config;
mod http;
pub mod mock;
pub mod parse;
pub mod prompts;
mod transcript;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EvidenceLabel, Gate, Statement};

pub use config::{OracleConfig, ProviderSpec};
pub use http::HttpProvider;
pub use transcript::{Transcript, TranscriptMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("prompt of {len} chars exceeds budget of {budget}")]
    BudgetExceeded { len: usize, budget: usize },
    #[error("protocol error in {task}: {detail}")]
    Protocol { task: String, detail: String },
    #[error("no transcript entry for request {digest}")]
    MissingTranscript { digest: String },
    #[error("no provider configured for role {0:?}")]
    NoProvider(Role),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("transcript io: {0}")]
    TranscriptIo(String),
}

/// Failure reported by a single provider call.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    /// Worth retrying (network, 5xx, rate limit).
    #[error("transport: {0}")]
    Transport(String),
    #[error("rejected: {0}")]
    Rejected(String),
}

/// Which configured provider serves a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Heavy generation: hypotheses, compression, votes, new gates and statements.
    Generator,
    /// Light classification: gate checks, consistency checks, relation labels.
    Discriminator,
    /// Decision prediction and baseline profile building.
    Predictor,
    /// Evaluation judge.
    Judge,
    /// Encoder for suffix-augmented contexts.
    ContextEncoder,
    /// Encoder for decisions.
    DecisionEncoder,
    /// Encoder for similarity analysis and retrieval.
    Embedder,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Generator,
        Role::Discriminator,
        Role::Predictor,
        Role::Judge,
        Role::ContextEncoder,
        Role::DecisionEncoder,
        Role::Embedder,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub role: Role,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub finish_reason: FinishReason,
}

impl GenerationResponse {
    pub fn stop(text: impl Into<String>) -> Self {
        GenerationResponse {
            text: text.into(),
            finish_reason: FinishReason::Stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub role: Role,
    pub texts: Vec<String>,
}

/// How texts are framed before encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "lens", content = "suffix")]
pub enum EmbedLens {
    /// Context with a guide suffix appended, general encoder.
    GeneralContext(String),
    /// Decision text, surface encoder.
    SurfaceDecision,
    /// Text as-is, analysis encoder.
    Plain,
}

impl EmbedLens {
    fn role(&self) -> Role {
        match self {
            EmbedLens::GeneralContext(_) => Role::ContextEncoder,
            EmbedLens::SurfaceDecision => Role::DecisionEncoder,
            EmbedLens::Plain => Role::Embedder,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider: String,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateAnswer {
    Yes,
    No,
    Unknown,
}

/// A model endpoint. Implementations must be pure functions of the request
/// (plus any fixed configuration) and safe to call from many threads.
pub trait Provider: Send + Sync {
    /// Stable tag identifying the provider/model, stamped on embeddings.
    fn tag(&self) -> String;
    fn complete(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError>;
    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay_ms: 0,
        }
    }
}

/// What a transcript stores for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordedResponse {
    Generation(GenerationResponse),
    Embedding { vectors: Vec<Vec<f64>>, provider: String },
}

pub(crate) const FORMAT_REMINDER: &str =
    "Your previous reply could not be parsed. Reply again following the required output format exactly.";

/// Facade over role-specific providers.
pub struct Oracle {
    providers: BTreeMap<Role, Arc<dyn Provider>>,
    transcript: Option<Arc<Transcript>>,
    retry: RetryPolicy,
    prompt_budget: usize,
    temperature: f64,
    max_tokens: u32,
    requests: AtomicU64,
    relation_cells: AtomicU64,
}

impl std::fmt::Debug for Oracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Oracle")
            .field("roles", &self.providers.keys().collect::<Vec<_>>())
            .field("transcript", &self.transcript.as_ref().map(|t| t.mode()))
            .finish()
    }
}

pub struct OracleBuilder {
    providers: BTreeMap<Role, Arc<dyn Provider>>,
    transcript: Option<Arc<Transcript>>,
    retry: RetryPolicy,
    prompt_budget: usize,
    temperature: f64,
    max_tokens: u32,
}

impl Default for OracleBuilder {
    fn default() -> Self {
        OracleBuilder {
            providers: BTreeMap::new(),
            transcript: None,
            retry: RetryPolicy::default(),
            prompt_budget: 400_000,
            temperature: 0.0,
            max_tokens: 2048,
        }
    }
}

impl OracleBuilder {
    /// Uses `p` for every role not set explicitly.
    pub fn all_roles(mut self, p: Arc<dyn Provider>) -> Self {
        for r in Role::ALL {
            self.providers.entry(r).or_insert_with(|| p.clone());
        }
        self
    }

    pub fn role(mut self, role: Role, p: Arc<dyn Provider>) -> Self {
        self.providers.insert(role, p);
        self
    }

    pub fn transcript(mut self, t: Arc<Transcript>) -> Self {
        self.transcript = Some(t);
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn prompt_budget(mut self, chars: usize) -> Self {
        self.prompt_budget = chars;
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn build(self) -> Oracle {
        Oracle {
            providers: self.providers,
            transcript: self.transcript,
            retry: self.retry,
            prompt_budget: self.prompt_budget,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            requests: AtomicU64::new(0),
            relation_cells: AtomicU64::new(0),
        }
    }
}

/// Request digest: SHA-256 over canonical JSON (object keys sorted), so
/// field order in the encoding never changes the key.
pub fn digest<T: Serialize>(kind: &str, req: &T) -> String {
    use sha2::{Digest, Sha256};
    let value = serde_json::json!({ "kind": kind, "request": req });
    // serde_json's default map is ordered, so this is canonical.
    let canonical = serde_json::to_string(&value).expect("request serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

impl Oracle {
    pub fn builder() -> OracleBuilder {
        OracleBuilder::default()
    }

    /// Oracle using one provider for every role, without a transcript.
    pub fn with_provider(p: Arc<dyn Provider>) -> Oracle {
        Oracle::builder().all_roles(p).retry(RetryPolicy::immediate()).build()
    }

    /// Same providers, transcript and settings with fresh counters, so
    /// concurrent jobs can each count their own requests.
    pub fn fork(&self) -> Oracle {
        Oracle {
            providers: self.providers.clone(),
            transcript: self.transcript.clone(),
            retry: self.retry,
            prompt_budget: self.prompt_budget,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            requests: AtomicU64::new(0),
            relation_cells: AtomicU64::new(0),
        }
    }

    /// Logical requests issued (transcript hits included).
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    /// Evidence cells labeled through `relate_batch` (sum of batch sizes).
    pub fn relation_cells(&self) -> u64 {
        self.relation_cells.load(Ordering::Relaxed)
    }

    pub fn transcript(&self) -> Option<&Arc<Transcript>> {
        self.transcript.as_ref()
    }

    fn provider(&self, role: Role) -> Result<&Arc<dyn Provider>, OracleError> {
        self.providers.get(&role).ok_or(OracleError::NoProvider(role))
    }

    fn with_retry<T>(&self, mut call: impl FnMut() -> Result<T, ProviderError>) -> Result<T, OracleError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match call() {
                Ok(v) => return Ok(v),
                Err(ProviderError::Rejected(m)) => return Err(OracleError::Rejected(m)),
                Err(ProviderError::Transport(m)) => {
                    if attempt >= self.retry.attempts {
                        return Err(OracleError::Transport {
                            attempts: attempt,
                            message: m,
                        });
                    }
                    log::warn!("transport error (attempt {attempt}): {m}");
                    let delay = self.retry.base_delay_ms.saturating_mul(1 << (attempt - 1));
                    if delay > 0 {
                        std::thread::sleep(Duration::from_millis(delay));
                    }
                }
            }
        }
    }

    /// Raw generation with transcript lookup and bounded retries.
    pub fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, OracleError> {
        if req.prompt.trim().is_empty() {
            return Err(OracleError::EmptyInput("prompt".into()));
        }
        if req.prompt.chars().count() > self.prompt_budget {
            return Err(OracleError::BudgetExceeded {
                len: req.prompt.chars().count(),
                budget: self.prompt_budget,
            });
        }
        self.requests.fetch_add(1, Ordering::Relaxed);
        let key = digest("complete", req);
        let live = || -> Result<RecordedResponse, OracleError> {
            let p = self.provider(req.role)?;
            self.with_retry(|| p.complete(req)).map(RecordedResponse::Generation)
        };
        let recorded = match &self.transcript {
            Some(t) => t.fetch(&key, req, live)?,
            None => live()?,
        };
        let resp = match recorded {
            RecordedResponse::Generation(g) => g,
            RecordedResponse::Embedding { .. } => {
                return Err(OracleError::TranscriptIo(format!("entry {key} is not a generation")))
            }
        };
        if resp.text.trim().is_empty() && resp.finish_reason == FinishReason::Stop {
            return Err(OracleError::Protocol {
                task: "generate".into(),
                detail: "empty response".into(),
            });
        }
        Ok(resp)
    }

    pub fn complete(&self, role: Role, prompt: String) -> Result<String, OracleError> {
        let req = GenerationRequest {
            role,
            prompt,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        };
        Ok(self.generate(&req)?.text.trim().to_string())
    }

    /// Generates and parses; on a parse failure reprompts exactly once.
    pub fn ask<T>(
        &self,
        role: Role,
        task: &str,
        prompt: String,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, OracleError> {
        let first = self.complete(role, prompt.clone())?;
        match parse(&first) {
            Ok(v) => Ok(v),
            Err(e1) => {
                log::debug!("{task}: unparseable reply ({e1}), reprompting");
                let second = self.complete(role, format!("{prompt}\n\n{FORMAT_REMINDER}"))?;
                parse(&second).map_err(|e2| OracleError::Protocol {
                    task: task.to_string(),
                    detail: e2,
                })
            }
        }
    }

    /// Does `scene` satisfy `gate`? Unknown is returned as-is; callers decide
    /// how it routes.
    pub fn judge_gate(&self, scene: &str, gate: &Gate) -> Result<GateAnswer, OracleError> {
        self.judge_gate_text(scene, &gate.question)
    }

    pub fn judge_gate_text(&self, scene: &str, question: &str) -> Result<GateAnswer, OracleError> {
        self.ask(
            Role::Discriminator,
            "judge_gate",
            prompts::gate_check(scene, question),
            |t| parse::gate_answer(t).ok_or_else(|| format!("not yes/no/unknown: {t:?}")),
        )
    }

    /// One evidence label per statement, in order.
    pub fn relate_batch(
        &self,
        group: &str,
        decision: &str,
        statements: &[&str],
    ) -> Result<Vec<EvidenceLabel>, OracleError> {
        if statements.is_empty() {
            return Err(OracleError::EmptyInput("relate_batch statements".into()));
        }
        let labels = self.ask(
            Role::Discriminator,
            "relate_batch",
            prompts::relation_batch(group, decision, statements),
            |t| parse::evidence_labels(t, statements.len()),
        )?;
        self.relation_cells
            .fetch_add(statements.len() as u64, Ordering::Relaxed);
        Ok(labels)
    }

    pub fn relate_statements(
        &self,
        group: &str,
        decision: &str,
        statements: &[&Statement],
    ) -> Result<Vec<EvidenceLabel>, OracleError> {
        let texts: Vec<&str> = statements.iter().map(|s| s.text.as_str()).collect();
        self.relate_batch(group, decision, &texts)
    }

    /// Yes/no consistency of one action with one statement (no gate).
    pub fn check_consistency(&self, group: &str, action: &str, statement: &str) -> Result<bool, OracleError> {
        self.ask(
            Role::Discriminator,
            "consistency_check",
            prompts::ungated_check(group, action, statement),
            |t| parse::yes_no(t).ok_or_else(|| format!("not yes/no: {t:?}")),
        )
    }

    /// Pre-normalization embeddings, one per text.
    pub fn embed(&self, texts: &[String], lens: &EmbedLens) -> Result<Vec<EmbeddingVector>, OracleError> {
        if texts.is_empty() {
            return Err(OracleError::EmptyInput("embed texts".into()));
        }
        let framed: Vec<String> = match lens {
            EmbedLens::GeneralContext(suffix) => texts.iter().map(|t| format!("{t} {suffix}")).collect(),
            _ => texts.to_vec(),
        };
        let req = EmbeddingRequest {
            role: lens.role(),
            texts: framed,
        };
        self.requests.fetch_add(1, Ordering::Relaxed);
        let key = digest("embed", &req);
        let live = || -> Result<RecordedResponse, OracleError> {
            let p = self.provider(req.role)?;
            let vectors = self.with_retry(|| p.embed(&req))?;
            Ok(RecordedResponse::Embedding {
                vectors,
                provider: p.tag(),
            })
        };
        let recorded = match &self.transcript {
            Some(t) => t.fetch(&key, &req, live)?,
            None => live()?,
        };
        let (vectors, provider) = match recorded {
            RecordedResponse::Embedding { vectors, provider } => (vectors, provider),
            RecordedResponse::Generation(_) => {
                return Err(OracleError::TranscriptIo(format!("entry {key} is not an embedding")))
            }
        };
        if vectors.len() != texts.len() {
            return Err(OracleError::Protocol {
                task: "embed".into(),
                detail: format!("{} vectors for {} texts", vectors.len(), texts.len()),
            });
        }
        let dim = vectors[0].len();
        if vectors.iter().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
            return Err(OracleError::Protocol {
                task: "embed".into(),
                detail: "ragged or non-finite vectors".into(),
            });
        }
        Ok(vectors
            .into_iter()
            .map(|values| EmbeddingVector {
                values,
                provider: provider.clone(),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests;
