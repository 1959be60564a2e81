//! Fixture loading and helpers shared by the integration tests.

#![allow(dead_code)]

pub mod criteria;
pub mod oracle;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use uxeval::corpus::{load_corpus, load_metrics, Corpus, CorpusPaths, MetricRepository};
use uxeval::embed::{Embedder, HashedBagOfWords};
use uxeval::graph::EdgeWeightConfig;
use uxeval::llm::{ChatClient, ChatRequest, Llm, LlmError, MockClient, MockScript};
use uxeval::recommend::{Engine, ProjectInputs, RiskConfig};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn corpus_dir() -> PathBuf {
    fixtures().join("corpus")
}

pub fn fixture_corpus() -> Arc<Corpus> {
    Arc::new(load_corpus(&CorpusPaths::in_dir(corpus_dir())).expect("fixture corpus loads"))
}

pub fn fixture_repo() -> MetricRepository {
    load_metrics(&corpus_dir().join("metrics.json")).expect("fixture metrics load")
}

pub fn read_json<T: serde::de::DeserializeOwned>(rel: &str) -> T {
    let path = fixtures().join(rel);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn script(rel: &str) -> MockScript {
    let text = std::fs::read_to_string(fixtures().join(rel)).unwrap();
    MockScript::from_json(&text).unwrap()
}

pub fn mock_llm(script: MockScript) -> (Llm, Arc<MockClient>) {
    let client = Arc::new(MockClient::new(script));
    (Llm::new(client.clone()), client)
}

pub fn engine_with(corpus: Arc<Corpus>, llm: Llm) -> Engine {
    let embedder: Arc<dyn Embedder> = Arc::new(HashedBagOfWords::default());
    Engine::build(corpus, &EdgeWeightConfig::default(), embedder, llm, RiskConfig::default()).unwrap()
}

/// Fixture corpus, bag-of-words embeddings and the given mock script.
pub fn fixture_engine(script_rel: &str) -> (Engine, Arc<MockClient>) {
    let (llm, client) = mock_llm(script(script_rel));
    (engine_with(fixture_corpus(), llm), client)
}

pub fn sarah_inputs() -> ProjectInputs {
    read_json("sarah_inputs.json")
}

/// A mock that starts failing every call once its switch is flipped.
pub struct Switchable {
    pub inner: MockClient,
    pub failing: AtomicBool,
}

impl Switchable {
    pub fn new(script: MockScript) -> Arc<Self> {
        Arc::new(Switchable {
            inner: MockClient::new(script),
            failing: AtomicBool::new(false),
        })
    }

    pub fn fail(&self, on: bool) {
        self.failing.store(on, Ordering::SeqCst);
    }
}

impl ChatClient for Switchable {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        if self.failing.load(Ordering::SeqCst) {
            return Err(LlmError::Unavailable(format!("injected failure at {}", request.stage)));
        }
        self.inner.complete(request)
    }
}

/// Annotation responses keyed by full-text file name.
pub fn annotate_responses() -> BTreeMap<String, serde_json::Value> {
    read_json("annotate/responses.json")
}

pub fn annotate_papers() -> Vec<(String, String)> {
    let dir = fixtures().join("annotate/papers");
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect()
}

/// Builds the exact-key annotation script by asking an empty mock for each
/// paper's key and pairing it with the recorded response.
pub fn build_annotate_script() -> MockScript {
    let repo = fixture_repo();
    let responses = annotate_responses();
    let mut script = MockScript::new();
    for (name, text) in annotate_papers() {
        let (probe, _) = mock_llm(MockScript::new());
        let key = match uxeval::corpus::annotate_paper(&probe, &text, &repo) {
            Err(LlmError::UnknownMockKey { key, .. }) => key,
            other => panic!("expected an unknown-key probe for {name}, got {other:?}"),
        };
        script.insert_raw(key, responses[&name].to_string());
    }
    script
}
