//! OpenAI-compatible HTTP provider.
//!
//! Requests go through the system `curl` binary: the body is written to a
//! temporary file and the authorization header is passed on stdin, so the
//! key never appears in the process list.

use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};

use serde_json::{json, Value};

use super::{EmbeddingRequest, FinishReason, GenerationRequest, GenerationResponse, Provider, ProviderError};

#[derive(Debug)]
pub struct HttpProvider {
    base_url: String,
    model: String,
    embedding_model: Option<String>,
    api_key_env: String,
    timeout_secs: u64,
}

static BODY_SEQ: AtomicU64 = AtomicU64::new(0);

impl HttpProvider {
    pub fn new(
        base_url: String,
        model: String,
        embedding_model: Option<String>,
        api_key_env: String,
        timeout_secs: u64,
    ) -> Self {
        HttpProvider {
            base_url: base_url.trim_end_matches('/').to_string(),
            model,
            embedding_model,
            api_key_env,
            timeout_secs,
        }
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let key = std::env::var(&self.api_key_env)
            .map_err(|_| ProviderError::Rejected(format!("{} is not set", self.api_key_env)))?;
        let body_path = std::env::temp_dir().join(format!(
            "cdt-body-{}-{}.json",
            std::process::id(),
            BODY_SEQ.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&body_path, body.to_string()).map_err(|e| ProviderError::Transport(e.to_string()))?;
        let result = self.run_curl(path, &key, &body_path);
        let _ = std::fs::remove_file(&body_path);
        result
    }

    fn run_curl(&self, path: &str, key: &str, body_path: &std::path::Path) -> Result<Value, ProviderError> {
        let url = format!("{}{}", self.base_url, path);
        let mut child = Command::new("curl")
            .args(["-sS", "-X", "POST", "--max-time"])
            .arg(self.timeout_secs.to_string())
            .args(["-H", "Content-Type: application/json", "-H", "@-", "--data-binary"])
            .arg(format!("@{}", body_path.display()))
            .args(["-w", "\n%{http_code}"])
            .arg(&url)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ProviderError::Transport(format!("cannot run curl: {e}")))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(format!("Authorization: Bearer {key}\n").as_bytes())
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let out = child
            .wait_with_output()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !out.status.success() {
            return Err(ProviderError::Transport(format!(
                "curl exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let (payload, code) = text.rsplit_once('\n').unwrap_or(("", text.as_ref()));
        let code: u16 = code
            .trim()
            .parse()
            .map_err(|_| ProviderError::Transport(format!("no status code in response from {url}")))?;
        match code {
            200..=299 => serde_json::from_str(payload)
                .map_err(|e| ProviderError::Transport(format!("invalid JSON from {url}: {e}"))),
            408 | 429 | 500..=599 => Err(ProviderError::Transport(format!("HTTP {code} from {url}"))),
            _ => Err(ProviderError::Rejected(format!("HTTP {code} from {url}: {}", payload.trim()))),
        }
    }
}

impl Provider for HttpProvider {
    fn tag(&self) -> String {
        format!(
            "http/{}/{}",
            self.model,
            self.embedding_model.as_deref().unwrap_or(&self.model)
        )
    }

    fn complete(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let v = self.post("/chat/completions", &body)?;
        let choice = &v["choices"][0];
        let text = choice["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::Transport("response without choices[0].message.content".into()))?;
        let finish_reason = match choice["finish_reason"].as_str() {
            Some("stop") | None => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            Some(other) => FinishReason::Other(other.to_string()),
        };
        Ok(GenerationResponse {
            text: text.to_string(),
            finish_reason,
        })
    }

    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = json!({
            "model": self.embedding_model.as_deref().unwrap_or(&self.model),
            "input": req.texts,
        });
        let v = self.post("/embeddings", &body)?;
        let data = v["data"]
            .as_array()
            .ok_or_else(|| ProviderError::Transport("response without data[]".into()))?;
        let mut rows: Vec<(u64, Vec<f64>)> = data
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let idx = d["index"].as_u64().unwrap_or(i as u64);
                let vec = d["embedding"]
                    .as_array()
                    .ok_or_else(|| ProviderError::Transport("embedding is not an array".into()))?
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| ProviderError::Transport("non-numeric embedding".into())))
                    .collect::<Result<Vec<f64>, _>>()?;
                Ok((idx, vec))
            })
            .collect::<Result<_, ProviderError>>()?;
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read};
    use std::net::TcpListener;

    fn curl_available() -> bool {
        Command::new("curl").arg("--version").output().is_ok()
    }

    /// Serves one canned response and returns the raw request it received.
    fn serve_once(status: &str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let status = status.to_string();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut body_in = vec![0u8; len];
            reader.read_exact(&mut body_in).unwrap();
            let resp = format!(
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
            head + &String::from_utf8_lossy(&body_in)
        });
        (format!("http://{addr}"), handle)
    }

    #[test]
    fn chat_completion_roundtrip() {
        if !curl_available() {
            eprintln!("curl not available; skipping");
            return;
        }
        std::env::set_var("CDT_HTTP_TEST_KEY", "secret-token");
        let (url, handle) = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"content":"yes"},"finish_reason":"stop"}]}"#,
        );
        let p = HttpProvider::new(url, "m1".into(), None, "CDT_HTTP_TEST_KEY".into(), 10);
        let resp = p
            .complete(&GenerationRequest {
                role: super::super::Role::Discriminator,
                prompt: "Scene: x".into(),
                temperature: 0.0,
                max_tokens: 5,
            })
            .unwrap();
        assert_eq!(resp, GenerationResponse::stop("yes"));
        let seen = handle.join().unwrap();
        assert!(seen.starts_with("POST /chat/completions"));
        assert!(seen.contains("Bearer secret-token"));
        assert!(seen.contains("\"model\":\"m1\""));
    }

    #[test]
    fn server_errors_are_retryable_and_client_errors_are_not() {
        if !curl_available() {
            return;
        }
        std::env::set_var("CDT_HTTP_TEST_KEY2", "k");
        let req = EmbeddingRequest {
            role: super::super::Role::Embedder,
            texts: vec!["a".into()],
        };
        let (url, h) = serve_once("503 Service Unavailable", "{}");
        let p = HttpProvider::new(url, "m".into(), None, "CDT_HTTP_TEST_KEY2".into(), 10);
        assert!(matches!(p.embed(&req), Err(ProviderError::Transport(_))));
        h.join().unwrap();
        let (url, h) = serve_once("400 Bad Request", r#"{"error":"bad"}"#);
        let p = HttpProvider::new(url, "m".into(), None, "CDT_HTTP_TEST_KEY2".into(), 10);
        assert!(matches!(p.embed(&req), Err(ProviderError::Rejected(_))));
        h.join().unwrap();
    }
}
