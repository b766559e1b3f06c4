use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mock::{HashEmbedder, PlantedConfig, PlantedProvider};
use super::{HttpProvider, Oracle, Provider, RetryPolicy, Role, Transcript, TranscriptMode};

/// Declarative provider choice for one role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSpec {
    /// OpenAI-compatible chat-completion and embedding endpoints.
    Http {
        base_url: String,
        model: String,
        #[serde(default)]
        embedding_model: Option<String>,
        /// Name of the environment variable holding the API key.
        api_key_env: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
    Planted(PlantedConfig),
    Hash {
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

fn default_timeout() -> u64 {
    120
}

fn default_dim() -> usize {
    256
}

fn default_budget() -> usize {
    400_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Provider for every role without an explicit entry.
    #[serde(default)]
    pub default: Option<ProviderSpec>,
    #[serde(default)]
    pub roles: BTreeMap<Role, ProviderSpec>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_budget")]
    pub prompt_budget: usize,
    #[serde(default)]
    pub temperature: f64,
}

impl Default for OracleConfig {
    /// No providers: usable only in replay mode.
    fn default() -> Self {
        OracleConfig {
            default: None,
            roles: BTreeMap::new(),
            retry: RetryPolicy::default(),
            prompt_budget: default_budget(),
            temperature: 0.0,
        }
    }
}

impl OracleConfig {
    pub fn planted(cfg: PlantedConfig) -> Self {
        OracleConfig {
            default: Some(ProviderSpec::Planted(cfg)),
            roles: BTreeMap::new(),
            retry: RetryPolicy::immediate(),
            prompt_budget: default_budget(),
            temperature: 0.0,
        }
    }

    fn spec(&self, role: Role) -> Option<&ProviderSpec> {
        self.roles.get(&role).or(self.default.as_ref())
    }

    /// Every problem that would stop the oracle from being built. In replay
    /// mode credentials are not needed.
    pub fn problems(&self, replay: bool) -> Vec<String> {
        let mut out = Vec::new();
        for role in Role::ALL {
            match self.spec(role) {
                None if !replay => out.push(format!("no provider for role {role:?}")),
                Some(ProviderSpec::Http { api_key_env, base_url, .. }) if !replay => {
                    if std::env::var(api_key_env).map(|v| v.is_empty()).unwrap_or(true) {
                        out.push(format!("role {role:?}: environment variable {api_key_env} is not set"));
                    }
                    if !(base_url.starts_with("http://") || base_url.starts_with("https://")) {
                        out.push(format!("role {role:?}: base_url must be http(s), got {base_url:?}"));
                    }
                }
                Some(ProviderSpec::Hash { dim }) if *dim == 0 => out.push(format!("role {role:?}: dim must be > 0")),
                Some(ProviderSpec::Planted(p)) if !(0.0..=1.0).contains(&p.noise) => {
                    out.push(format!("role {role:?}: noise must be in [0, 1]"))
                }
                _ => {}
            }
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            out.push(format!("temperature must be in [0, 2], got {}", self.temperature));
        }
        if self.retry.attempts == 0 {
            out.push("retry.attempts must be >= 1".into());
        }
        out
    }

    pub fn build(&self, transcript: Option<Arc<Transcript>>) -> Result<Oracle, String> {
        let replay = transcript.as_ref().map(|t| t.mode() == TranscriptMode::Replay).unwrap_or(false);
        let problems = self.problems(replay);
        if !problems.is_empty() {
            return Err(problems.join("; "));
        }
        let mut b = Oracle::builder()
            .retry(self.retry)
            .prompt_budget(self.prompt_budget)
            .temperature(self.temperature);
        // Identical specs share one provider instance.
        let mut made: Vec<(&ProviderSpec, Arc<dyn Provider>)> = Vec::new();
        for role in Role::ALL {
            let Some(spec) = self.spec(role) else { continue };
            let p = match made.iter().find(|(s, _)| *s == spec) {
                Some((_, p)) => p.clone(),
                None => {
                    let p = make(spec);
                    made.push((spec, p.clone()));
                    p
                }
            };
            b = b.role(role, p);
        }
        if let Some(t) = transcript {
            b = b.transcript(t);
        }
        Ok(b.build())
    }
}

fn make(spec: &ProviderSpec) -> Arc<dyn Provider> {
    match spec {
        ProviderSpec::Http {
            base_url,
            model,
            embedding_model,
            api_key_env,
            timeout_secs,
        } => Arc::new(HttpProvider::new(
            base_url.clone(),
            model.clone(),
            embedding_model.clone(),
            api_key_env.clone(),
            *timeout_secs,
        )),
        ProviderSpec::Planted(cfg) => Arc::new(PlantedProvider::new(cfg.clone())),
        ProviderSpec::Hash { dim } => Arc::new(HashEmbedder::new(*dim)),
    }
}
