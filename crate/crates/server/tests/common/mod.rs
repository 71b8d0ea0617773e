#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::Value;
use tabgenie_server::mock_model::{self, MockModel};
use tabgenie_server::{serve_on, PipelineConfig, ServerHandle, ServiceConfig};
use tokio::runtime::Runtime;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub struct Harness {
    pub rt: Runtime,
    pub handle: Option<ServerHandle>,
    pub mock: Option<MockModel>,
    pub base: String,
    pub agent: ureq::Agent,
    pub config: ServiceConfig,
    pub tmp: tempfile::TempDir,
}

/// Fixture datasets and outputs, a private session file, and pipelines
/// pointing at a fresh echo model.
pub fn fixture_config(tmp: &Path, mock: &MockModel) -> ServiceConfig {
    let fx = fixtures();
    let mut cfg = ServiceConfig::load(&fx.join("tabgenie.yaml")).unwrap();
    cfg.session_file = tmp.join("session.json");
    for p in &mut cfg.pipelines {
        if p.params.contains_key("endpoint") {
            p.params.insert("endpoint".into(), mock.endpoint().into());
        }
    }
    cfg.pipelines.push(PipelineConfig {
        id: "failing".into(),
        processors: vec!["model_api".into()],
        params: [(
            "endpoint".to_string(),
            format!("http://{}/fail", mock.addr).into(),
        )]
        .into(),
    });
    cfg
}

impl Harness {
    pub fn start() -> Self {
        Self::start_with(|_| {})
    }

    pub fn start_with(edit: impl FnOnce(&mut ServiceConfig)) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let rt = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .unwrap();
        let mock = rt
            .block_on(mock_model::spawn("127.0.0.1:0".parse().unwrap()))
            .unwrap();
        let mut config = fixture_config(tmp.path(), &mock);
        edit(&mut config);
        let handle = Self::boot(&rt, &config);
        let base = format!("http://{}", handle.addr);
        Self {
            rt,
            handle: Some(handle),
            mock: Some(mock),
            base,
            agent: agent(),
            config,
            tmp,
        }
    }

    fn boot(rt: &Runtime, config: &ServiceConfig) -> ServerHandle {
        rt.block_on(async {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            serve_on(listener, config.clone()).await.unwrap()
        })
    }

    pub fn restart(&mut self) {
        let h = self.handle.take().unwrap();
        self.rt.block_on(h.shutdown()).unwrap();
        let h = Self::boot(&self.rt, &self.config);
        self.base = format!("http://{}", h.addr);
        self.handle = Some(h);
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.agent.get(&self.url(path)).call().unwrap();
        (r.status().as_u16(), read_json(&mut r))
    }

    pub fn get_raw(&self, path: &str) -> ureq::http::Response<ureq::Body> {
        self.agent.get(&self.url(path)).call().unwrap()
    }

    pub fn post(&self, path: &str, body: &str) -> (u16, Value) {
        let mut r = self
            .agent
            .post(&self.url(path))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        (r.status().as_u16(), read_json(&mut r))
    }

    pub fn put(&self, path: &str, body: Option<&str>) -> (u16, Value) {
        let req = self.agent.put(&self.url(path));
        let mut r = match body {
            Some(b) => req.header("content-type", "application/json").send(b),
            None => req.send_empty(),
        }
        .unwrap();
        (r.status().as_u16(), read_json(&mut r))
    }

    pub fn delete(&self, path: &str) -> (u16, Value) {
        let mut r = self.agent.delete(&self.url(path)).call().unwrap();
        (r.status().as_u16(), read_json(&mut r))
    }

    pub fn session_path(&self) -> PathBuf {
        self.config.session_file.clone()
    }
}

impl Drop for Harness {
    fn drop(&mut self) {
        if let Some(h) = self.handle.take() {
            let _ = self.rt.block_on(h.shutdown());
        }
        if let Some(m) = self.mock.take() {
            m.stop();
        }
    }
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .max_redirects(0)
        .build()
        .into()
}

/// Empty bodies read as `null`.
pub fn read_json(r: &mut ureq::http::Response<ureq::Body>) -> Value {
    let text = r.body_mut().read_to_string().unwrap();
    if text.is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or(Value::String(text))
    }
}

/// Asserts the `{"error", "detail"}` shape.
pub fn assert_error_shape(status: u16, body: &Value) {
    assert!(status >= 400, "status {status}");
    let obj = body
        .as_object()
        .unwrap_or_else(|| panic!("not an object: {body}"));
    assert_eq!(obj.len(), 2, "{body}");
    assert!(
        obj["error"].is_string() && obj["detail"].is_string(),
        "{body}"
    );
}
