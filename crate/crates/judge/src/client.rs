//! OpenAI-compatible chat-completions client with retry and bounded
//! concurrency.

use std::time::Duration;

use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};

use crate::config::JudgeConfig;
use crate::error::JudgeError;

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    n: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// Client for sampling critiques from the judge endpoint.
pub struct GenPrmClient {
    config: JudgeConfig,
    api_key: String,
    http: reqwest::Client,
    retry_delay: Duration,
}

impl GenPrmClient {
    /// Builds a client, reading the API key from the configured
    /// environment variable.
    pub fn new(config: JudgeConfig) -> Result<Self, JudgeError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env_var).map_err(|_| {
            JudgeError::Auth(format!(
                "environment variable {} is not set",
                config.api_key_env_var
            ))
        })?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| JudgeError::Endpoint(format!("building HTTP client: {e}")))?;
        Ok(Self {
            config,
            api_key,
            http,
            retry_delay: Duration::from_millis(100),
        })
    }

    /// Shortens the retry backoff; used by tests against a local stub.
    pub fn with_retry_delay(mut self, delay: Duration) -> Self {
        self.retry_delay = delay;
        self
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.config
    }

    /// Issues the configured number of independent sampled completions for
    /// one prompt, or a single temperature-zero completion in greedy mode.
    /// Requests run concurrently up to the configured limit and results
    /// keep request-index order.
    pub async fn request_critiques(
        &self,
        prompt: &str,
        greedy: bool,
    ) -> Result<Vec<String>, JudgeError> {
        let k = if greedy { 1 } else { self.config.num_critiques };
        let temperature = if greedy { 0.0 } else { self.config.temperature };
        stream::iter((0..k).map(|_| self.request_one(prompt, temperature)))
            .buffered(self.config.max_concurrent_requests)
            .try_collect()
            .await
    }

    /// Single completion for one sample index, applied when the cache
    /// already holds the other samples.
    pub async fn request_single(&self, prompt: &str, greedy: bool) -> Result<String, JudgeError> {
        let temperature = if greedy { 0.0 } else { self.config.temperature };
        self.request_one(prompt, temperature).await
    }

    async fn request_one(&self, prompt: &str, temperature: f64) -> Result<String, JudgeError> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let body = ChatRequest {
            model: &self.config.model_name,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature,
            top_p: self.config.top_p,
            max_tokens: self.config.max_tokens,
            n: 1,
        };

        let mut last_error = String::new();
        for attempt in 0..=self.config.retry_limit {
            if attempt > 0 {
                tokio::time::sleep(self.retry_delay * attempt as u32).await;
            }
            let sent = self
                .http
                .post(&url)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send()
                .await;
            match sent {
                Ok(response) => {
                    let status = response.status();
                    if status.as_u16() == 401 || status.as_u16() == 403 {
                        return Err(JudgeError::Auth(format!(
                            "endpoint rejected the API key ({status})"
                        )));
                    }
                    if status.is_success() {
                        let parsed: ChatResponse = response.json().await.map_err(|e| {
                            JudgeError::Endpoint(format!("malformed completion body: {e}"))
                        })?;
                        return parsed
                            .choices
                            .into_iter()
                            .next()
                            .map(|c| c.message.content)
                            .ok_or_else(|| {
                                JudgeError::Endpoint("completion has no choices".into())
                            });
                    }
                    // 429 and server errors are worth retrying; other
                    // client errors are not.
                    if status.as_u16() == 429 || status.is_server_error() {
                        last_error = format!("status {status}");
                        continue;
                    }
                    return Err(JudgeError::Endpoint(format!("status {status}")));
                }
                Err(e) => {
                    last_error = e.to_string();
                    continue;
                }
            }
        }
        Err(JudgeError::Endpoint(format!(
            "gave up after {} attempts: {last_error}",
            self.config.retry_limit + 1
        )))
    }
}
