#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use heritage_core::corpus::Corpus;
use heritage_core::imaging::{ImageBackendPort, ImagePipeline, ImageStore, PipelineConfig, StubBackend};
use heritage_core::scaffold::{FallbackPort, LanguageModelPort};
use heritage_core::store::SessionStore;
use heritage_studio::{serve_state, AppState, ServiceHandle, Settings, Shared};
use serde_json::{json, Value};
use tempfile::TempDir;

pub const API: &str = "/api/v1";

pub fn corpus() -> Arc<Corpus> {
    Arc::new(Corpus::bundled().expect("bundled corpus loads"))
}

pub fn schema_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

pub struct Schemas(BTreeMap<String, jsonschema::Validator>);

impl Schemas {
    pub fn load() -> Schemas {
        let mut out = BTreeMap::new();
        for entry in std::fs::read_dir(schema_dir()).expect("schemas dir") {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "json") {
                let doc: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
                let v = jsonschema::options()
                    .should_validate_formats(true)
                    .build(&doc)
                    .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                out.insert(path.file_stem().unwrap().to_string_lossy().into_owned(), v);
            }
        }
        Schemas(out)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn check(&self, name: &str, v: &Value) {
        let s = self.0.get(name).unwrap_or_else(|| panic!("no schema {name}"));
        let errors: Vec<String> = s
            .iter_errors(v)
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect();
        assert!(errors.is_empty(), "{name} schema: {errors:#?}\n{v:#}");
    }
}

pub struct Harness {
    pub handle: Option<ServiceHandle>,
    pub state: Shared,
    pub base: String,
    pub http: reqwest::Client,
    pub data: TempDir,
}

pub struct Options {
    pub port: Arc<dyn LanguageModelPort>,
    pub backend: Arc<dyn ImageBackendPort>,
    pub settings: Settings,
    pub pipeline: PipelineConfig,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            port: Arc::new(FallbackPort),
            backend: Arc::new(StubBackend),
            settings: Settings {
                generate_per_minute: 10_000,
                ..Settings::default()
            },
            pipeline: PipelineConfig::default(),
        }
    }
}

impl Harness {
    pub async fn start() -> Harness {
        Harness::with(Options::default()).await
    }

    pub async fn with(opts: Options) -> Harness {
        let data = tempfile::tempdir().unwrap();
        Harness::in_dir(opts, data).await
    }

    pub async fn in_dir(opts: Options, data: TempDir) -> Harness {
        let corpus = corpus();
        let sessions = SessionStore::open(data.path()).unwrap();
        let images = ImageStore::open(data.path().join("images")).unwrap();
        let pipeline = ImagePipeline::new(corpus.clone(), opts.backend, Arc::new(images), opts.pipeline);
        let state = AppState::new(corpus, opts.port, Arc::new(pipeline), Arc::new(sessions), opts.settings);
        let handle = serve_state(state.clone(), "127.0.0.1:0".parse().unwrap())
            .await
            .unwrap();
        Harness {
            base: handle.base_url(),
            handle: Some(handle),
            state,
            http: reqwest::Client::new(),
            data,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.http.get(self.url(path)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub async fn raw(&self, path: &str) -> reqwest::Response {
        self.http.get(self.url(path)).send().await.unwrap()
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        self.post_bytes(path, serde_json::to_vec(body).unwrap()).await
    }

    pub async fn post_bytes(&self, path: &str, body: Vec<u8>) -> (u16, Value) {
        let r = self
            .http
            .post(self.url(path))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await
            .unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub async fn session(&self, label: &str) -> String {
        let (s, v) = self
            .post(
                &format!("{API}/sessions"),
                &json!({"language": "en", "participant_label": label}),
            )
            .await;
        assert_eq!(s, 201, "{v}");
        v["session_id"].as_str().unwrap().to_string()
    }

    /// Polls a job until it leaves the queue.
    pub async fn wait_job(&self, job_id: &str) -> Value {
        for _ in 0..400 {
            let (s, v) = self.get(&format!("{API}/jobs/{job_id}")).await;
            assert_eq!(s, 200, "{v}");
            if v["status"] == "done" || v["status"] == "failed" {
                return v;
            }
            tokio::time::sleep(std::time::Duration::from_millis(25)).await;
        }
        panic!("job {job_id} did not finish");
    }

    pub async fn stop(mut self) -> TempDir {
        if let Some(h) = self.handle.take() {
            h.shutdown().await.unwrap();
        }
        self.data
    }
}

pub fn tags() -> Value {
    json!({"tags": {
        "viewpoint": "viewpoint.medium",
        "time-of-day": "time-of-day.evening",
        "people": "people.none",
        "rendering-style": "rendering-style.photorealistic",
    }})
}
