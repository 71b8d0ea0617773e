use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::ProcessorError;

pub const INPUT_PLACEHOLDER: &str = "{input}";
pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

/// Request body sent to the model endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub prompt: String,
}

/// Response body expected from the model endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextResponse {
    pub text: String,
}

/// Substitutes every `{input}` in the template.
pub fn build_prompt(template: &str, input: &str) -> Result<String, ProcessorError> {
    if !template.contains(INPUT_PLACEHOLDER) {
        return Err(ProcessorError::Template(format!(
            "prompt template must contain the `{INPUT_PLACEHOLDER}` placeholder"
        )));
    }
    Ok(template.replace(INPUT_PLACEHOLDER, input))
}

/// POSTs `{"prompt": ...}` and returns the `text` of a 200 response.
pub fn call_model(
    endpoint: &str,
    prompt: &str,
    timeout: Duration,
) -> Result<String, ProcessorError> {
    let started = Instant::now();
    let upstream = |reason: String| ProcessorError::Upstream {
        endpoint: endpoint.to_string(),
        elapsed_ms: started.elapsed().as_millis() as u64,
        reason,
    };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent
        .post(endpoint)
        .send_json(PromptRequest {
            prompt: prompt.to_string(),
        })
        .map_err(|e| upstream(e.to_string()))?;
    let status = resp.status();
    if status != 200 {
        let body = resp.body_mut().read_to_string().unwrap_or_default();
        return Err(upstream(format!("status {status}: {body}")));
    }
    resp.body_mut()
        .read_json::<TextResponse>()
        .map(|r| r.text)
        .map_err(|e| upstream(format!("bad response body: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_substitution() {
        assert_eq!(
            build_prompt("Describe: {input}.", "[R] [C] x").unwrap(),
            "Describe: [R] [C] x."
        );
        assert!(matches!(
            build_prompt("no placeholder", "x"),
            Err(ProcessorError::Template(_))
        ));
    }

    #[test]
    fn unreachable_endpoint_is_upstream_error() {
        // port 9 on localhost: nothing listens there in test environments
        let err = call_model(
            "http://127.0.0.1:9/generate",
            "p",
            Duration::from_millis(500),
        )
        .unwrap_err();
        match err {
            ProcessorError::Upstream { endpoint, .. } => {
                assert_eq!(endpoint, "http://127.0.0.1:9/generate")
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
