//! Language-model client over HTTP: `POST {template, caption}` answered by
//! `{candidates: [string]}`.

use std::time::Duration;

use segbench_core::prompt::LanguageClient;
use segbench_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanguageConfig {
    pub url: String,
    pub timeout_ms: u64,
    /// Additional attempts after a failed request.
    pub retries: u32,
}

impl Default for LanguageConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8080/edit".to_string(),
            timeout_ms: 30_000,
            retries: 2,
        }
    }
}

#[derive(Serialize)]
struct EditQuery<'a> {
    template: &'a str,
    caption: &'a str,
}

#[derive(Deserialize)]
struct EditReply {
    candidates: Vec<String>,
}

pub struct HttpLanguageClient {
    config: LanguageConfig,
    agent: ureq::Agent,
}

impl HttpLanguageClient {
    pub fn new(config: LanguageConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Self { config, agent }
    }

    fn request(&self, template: &str, caption: &str) -> Result<Vec<String>, String> {
        let mut resp = self
            .agent
            .post(&self.config.url)
            .send_json(EditQuery { template, caption })
            .map_err(|e| e.to_string())?;
        let reply: EditReply = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        Ok(reply.candidates)
    }
}

impl LanguageClient for HttpLanguageClient {
    fn candidates(&self, template: &str, caption: &str) -> segbench_core::Result<Vec<String>> {
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            match self.request(template, caption) {
                Ok(c) => return Ok(c),
                Err(e) => {
                    log::warn!(
                        "language request {} of {} failed: {e}",
                        attempt + 1,
                        self.config.retries + 1
                    );
                    last = e;
                }
            }
        }
        Err(Error::Backend(format!(
            "language client at {}: {last}",
            self.config.url
        )))
    }
}
