use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use url::Url;

use super::{truncate_at_stop, BackendError, CompletionBackend, CompletionRequest};

pub const DEFAULT_API_KEY_ENV: &str = "AUDIT_AGENT_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendConfig {
    /// Full URL the chat-completion request is POSTed to.
    pub endpoint_url: String,
    pub model_id: String,
    pub timeout_seconds: u64,
    pub max_retries: u32,
    pub api_key_env_var: String,
}

impl BackendConfig {
    pub fn new(endpoint_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_id: model_id.into(),
            timeout_seconds: 60,
            max_retries: 2,
            api_key_env_var: DEFAULT_API_KEY_ENV.to_string(),
        }
    }

    pub fn validate(&self) -> Result<Url, BackendError> {
        let url = Url::parse(&self.endpoint_url).map_err(|e| {
            BackendError::InvalidConfig(format!("endpoint_url {:?}: {e}", self.endpoint_url))
        })?;
        if url.cannot_be_a_base() {
            return Err(BackendError::InvalidConfig(format!(
                "endpoint_url {:?} is not an absolute URL",
                self.endpoint_url
            )));
        }
        if self.timeout_seconds == 0 {
            return Err(BackendError::InvalidConfig("timeout_seconds must be positive".into()));
        }
        Ok(url)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Connection-level failure: refused, DNS, timeout, broken body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError(pub String);

/// The network edge of [`HttpBackend`]; swapped out in tests to count
/// attempts and fake server replies.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &Url,
        bearer: &str,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BackendError::InvalidConfig(format!("http client: {e}")))?;
        Ok(Self { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &Url,
        bearer: &str,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        let resp = self
            .client
            .post(url.clone())
            .bearer_auth(bearer)
            .timeout(timeout)
            .json(body)
            .send()
            .map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

/// Client for OpenAI-compatible chat-completion endpoints.
pub struct HttpBackend {
    config: BackendConfig,
    url: Url,
    api_key: String,
    transport: Arc<dyn Transport>,
    backoff: Duration,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("config", &self.config)
            .field("backoff", &self.backoff)
            .finish_non_exhaustive()
    }
}

impl HttpBackend {
    /// Builds a backend reading the API key from `config.api_key_env_var`.
    pub fn from_env(config: BackendConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&config.api_key_env_var)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::MissingApiKey(config.api_key_env_var.clone()))?;
        Self::with_transport(config, key, Arc::new(ReqwestTransport::new()?))
    }

    pub fn with_transport(
        config: BackendConfig,
        api_key: impl Into<String>,
        transport: Arc<dyn Transport>,
    ) -> Result<Self, BackendError> {
        let url = config.validate()?;
        Ok(Self {
            config,
            url,
            api_key: api_key.into(),
            transport,
            backoff: Duration::from_millis(500),
        })
    }

    /// Base delay between attempts; grows linearly with the attempt number.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn request_body(&self, request: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": request.model_id,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if !request.stop_sequences.is_empty() {
            body["stop"] = json!(request.stop_sequences);
        }
        body
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

fn extract_completion(body: &str) -> Result<String, BackendError> {
    let parsed: ChatResponse = serde_json::from_str(body)
        .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| BackendError::MalformedResponse("no completion content".into()))
}

impl CompletionBackend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        request.validate()?;
        let body = self.request_body(request);
        let timeout = Duration::from_secs(self.config.timeout_seconds);
        let attempts = 1 + self.config.max_retries;
        let mut last_err = BackendError::Network("no attempt made".into());

        for attempt in 1..=attempts {
            if attempt > 1 && !self.backoff.is_zero() {
                std::thread::sleep(self.backoff * (attempt - 1));
            }
            match self.transport.post_json(&self.url, &self.api_key, &body, timeout) {
                Err(TransportError(msg)) => {
                    last_err = BackendError::Network(msg);
                }
                Ok(resp) => match resp.status {
                    200..=299 => {
                        let text = extract_completion(&resp.body)?;
                        return Ok(truncate_at_stop(&text, &request.stop_sequences));
                    }
                    401 | 403 => return Err(BackendError::Auth { status: resp.status }),
                    429 => last_err = BackendError::RateLimited { attempts: attempt },
                    500..=599 => {
                        last_err = BackendError::Network(format!(
                            "server error HTTP {}: {}",
                            resp.status, resp.body
                        ))
                    }
                    other => {
                        return Err(BackendError::MalformedResponse(format!(
                            "unexpected HTTP {other}: {}",
                            resp.body
                        )))
                    }
                },
            }
        }
        Err(last_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ChatMessage;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    struct FakeTransport {
        calls: AtomicUsize,
        replies: Mutex<Vec<Result<HttpResponse, TransportError>>>,
        last_body: Mutex<Option<Value>>,
    }

    impl FakeTransport {
        fn new(mut replies: Vec<Result<HttpResponse, TransportError>>) -> Arc<Self> {
            replies.reverse();
            Arc::new(Self {
                calls: AtomicUsize::new(0),
                replies: Mutex::new(replies),
                last_body: Mutex::new(None),
            })
        }
    }

    impl Transport for FakeTransport {
        fn post_json(
            &self,
            _url: &Url,
            _bearer: &str,
            body: &Value,
            _timeout: Duration,
        ) -> Result<HttpResponse, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            *self.last_body.lock().unwrap() = Some(body.clone());
            self.replies
                .lock()
                .unwrap()
                .pop()
                .unwrap_or_else(|| Err(TransportError("connection refused".into())))
        }
    }

    fn ok(content: &str) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse {
            status: 200,
            body: json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
                .to_string(),
        })
    }

    fn status(code: u16) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse {
            status: code,
            body: "{}".into(),
        })
    }

    fn backend(transport: Arc<FakeTransport>, retries: u32) -> HttpBackend {
        let mut cfg = BackendConfig::new("http://127.0.0.1:9/v1/chat/completions", "gpt-4");
        cfg.max_retries = retries;
        HttpBackend::with_transport(cfg, "k", transport)
            .unwrap()
            .with_backoff(Duration::ZERO)
    }

    fn request() -> CompletionRequest {
        CompletionRequest::new(
            vec![ChatMessage::system("s"), ChatMessage::user("q")],
            "gpt-4",
        )
        .with_stop("Observation:")
    }

    #[test]
    fn server_text_is_truncated_at_stop() {
        let t = FakeTransport::new(vec![ok("Action: WindowsTask\nAction Input: net accounts\nObservation: fake")]);
        let out = backend(t.clone(), 0).complete(&request()).unwrap();
        assert_eq!(out, "Action: WindowsTask\nAction Input: net accounts\n");
        let body = t.last_body.lock().unwrap().clone().unwrap();
        assert_eq!(body["stop"], json!(["Observation:"]));
        assert_eq!(body["temperature"], json!(0.0));
        assert_eq!(body["messages"][0]["role"], json!("system"));
    }

    #[test]
    fn network_errors_retry_up_to_bound() {
        let t = FakeTransport::new(vec![]);
        let err = backend(t.clone(), 2).complete(&request()).unwrap_err();
        assert!(matches!(err, BackendError::Network(_)));
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn rate_limit_then_success() {
        let t = FakeTransport::new(vec![status(429), ok("Final Answer: done")]);
        let out = backend(t.clone(), 2).complete(&request()).unwrap();
        assert_eq!(out, "Final Answer: done");
        assert_eq!(t.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn persistent_rate_limit_reports_attempts() {
        let t = FakeTransport::new(vec![status(429), status(429)]);
        let err = backend(t.clone(), 1).complete(&request()).unwrap_err();
        assert!(matches!(err, BackendError::RateLimited { attempts: 2 }));
    }

    #[test]
    fn auth_failures_are_not_retried() {
        for code in [401, 403] {
            let t = FakeTransport::new(vec![status(code), ok("x")]);
            let err = backend(t.clone(), 3).complete(&request()).unwrap_err();
            assert!(matches!(err, BackendError::Auth { status } if status == code));
            assert_eq!(t.calls.load(Ordering::SeqCst), 1);
        }
    }

    #[test]
    fn missing_content_is_malformed() {
        let t = FakeTransport::new(vec![Ok(HttpResponse {
            status: 200,
            body: r#"{"choices": []}"#.into(),
        })]);
        let err = backend(t, 0).complete(&request()).unwrap_err();
        assert!(matches!(err, BackendError::MalformedResponse(_)));
    }

    #[test]
    fn relative_endpoint_is_rejected() {
        let cfg = BackendConfig::new("/v1/chat/completions", "m");
        assert!(matches!(cfg.validate(), Err(BackendError::InvalidConfig(_))));
    }

    #[test]
    fn missing_api_key_env() {
        let mut cfg = BackendConfig::new("http://localhost/v1/chat/completions", "m");
        cfg.api_key_env_var = "AUDIT_AGENT_TEST_KEY_THAT_IS_NEVER_SET".into();
        assert!(matches!(
            HttpBackend::from_env(cfg),
            Err(BackendError::MissingApiKey(_))
        ));
    }
}
