//! One check per acceptance criterion. Each returns a short summary on
//! success and a reason on failure; the per-area test files and the
//! acceptance report both call these.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::Duration;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::{json, Value};

use super::oracle::{edges_match, library_edges, modularity_ref, reference_edges, set_partitions, symmetry_violations};
use super::*;
use uxeval::corpus::{
    AuditReport, Corpus, IncidentRecord, IndexSet, MetricRecord, PaperMetadata, PaperRecord,
};
use uxeval::embed::{cosine_similarity, EmbedError, Embedding, VectorIndex};
use uxeval::evalharness::{paired_t_test, run_benchmark, score, EvalSample, RecordedPredictions, ScoreTriple};
use uxeval::graph::{build_graph, graph_modularity, KnowledgeGraph};
use uxeval::llm::{self, Stage};
use uxeval::recommend::{recommend_metrics, risk_candidates, risks_for};
use uxeval::service::{CartPolicy, ProjectService};

pub type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bare_paper(id: &str, metrics: &[&str], cites: &[&str], indexes: IndexSet) -> PaperRecord {
    PaperRecord {
        id: id.into(),
        title: format!("Paper {id}"),
        narrative: format!("narrative of {id}"),
        indexes,
        metrics: metrics.iter().map(|s| s.to_string()).collect(),
        outcomes: vec![],
        cites: cites.iter().map(|s| s.to_string()).collect(),
        metadata: PaperMetadata::default(),
    }
}

fn metric_records(names: &[&str]) -> Vec<MetricRecord> {
    names
        .iter()
        .map(|n| MetricRecord {
            name: n.to_string(),
            category: "test".into(),
            definition: format!("definition of {n}"),
            aliases: vec![],
        })
        .collect()
}

// ---------------------------------------------------------------- Louvain

/// Two 5-cliques joined by one bridge, as a corpus: clique members share
/// one metric, the bridge papers share a third, and empty indexes keep
/// every weight at exactly 1.
pub fn planted_graph() -> KnowledgeGraph {
    let mut papers = Vec::new();
    for i in 0..10 {
        let mut metrics = vec![if i < 5 { "left" } else { "right" }];
        if i == 4 || i == 5 {
            metrics.push("bridge");
        }
        papers.push(bare_paper(&format!("q{i}"), &metrics, &[], IndexSet::default()));
    }
    let corpus = Corpus::from_records(papers, metric_records(&["left", "right", "bridge"]), vec![]).unwrap();
    build_graph(Arc::new(corpus), &Default::default(), &uxeval::embed::HashedBagOfWords::default()).unwrap()
}

pub fn louvain_planted() -> Outcome {
    let graph = planted_graph();
    let index: BTreeMap<&str, usize> = graph.paper_ids().iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let edges: Vec<(usize, usize, f64)> = graph
        .paper_edges()
        .iter()
        .map(|e| (index[e.a.as_str()], index[e.b.as_str()], e.weight))
        .collect();
    ensure(edges.len() == 21 && edges.iter().all(|e| e.2 == 1.0), || {
        format!("planted graph has {} edges: {edges:?}", edges.len())
    })?;

    let partitions = set_partitions(10);
    ensure(partitions.len() == 115_975, || format!("Bell(10) enumeration gave {}", partitions.len()))?;
    let (best, best_q) = partitions
        .iter()
        .map(|p| (p, modularity_ref(10, &edges, p)))
        .fold((None, f64::NEG_INFINITY), |(bp, bq), (p, q)| if q > bq { (Some(p), q) } else { (bp, bq) });
    let best = best.unwrap();
    let planted: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
    ensure(best == &planted, || format!("oracle optimum {best:?} is not the planted split"))?;

    let found = graph.detect_communities();
    let labels: Vec<usize> = graph.paper_ids().iter().map(|p| found.community_of[p]).collect();
    ensure(labels == planted, || format!("detected {labels:?}"))?;
    ensure((found.modularity - best_q).abs() < 1e-9, || {
        format!("Q = {} but oracle optimum is {best_q}", found.modularity)
    })?;
    ensure((best_q - 19.0 / 42.0).abs() < 1e-12, || format!("oracle optimum {best_q} != 19/42"))?;
    let all_in_one = graph_modularity(&graph.weighted_view(), &[0; 10]);
    ensure(all_in_one == 0.0, || format!("all-in-one Q = {all_in_one:e}"))?;
    Ok(format!("planted split recovered, Q = {:.12} (oracle {:.12}), all-in-one Q = 0", found.modularity, best_q))
}

// ---------------------------------------------------------------- graph

/// Edge weights may differ from the pairwise reference by summation order only.
pub const EDGE_WEIGHT_TOL: f64 = 1e-12;
pub const RANDOM_CORPORA: u32 = 128;

fn check_graph(corpus: Arc<Corpus>) -> Result<f64, String> {
    let embedder = uxeval::embed::HashedBagOfWords::default();
    let graph = build_graph(corpus.clone(), &Default::default(), &embedder).map_err(|e| e.to_string())?;
    let lib = library_edges(&graph);
    let worst = edges_match(&lib, &reference_edges(&corpus, &embedder), EDGE_WEIGHT_TOL)?;
    let problems = symmetry_violations(&corpus, &lib);
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(worst)
}

const VOCAB: [&str; 8] = ["chat", "voice", "health", "finance", "text", "coach", "tutor", "visual"];
const POOL: [&str; 5] = ["m0", "m1", "m2", "m3", "m4"];

prop_compose! {
    fn arb_paper(n: usize)(
        metrics in proptest::collection::btree_set(0..POOL.len(), 0..4),
        cites in proptest::collection::btree_set(0..n + 2, 0..4),
        values in proptest::collection::vec(proptest::collection::vec(0..VOCAB.len(), 0..3), 10),
        dyadic in any::<bool>(),
    ) -> (BTreeSet<usize>, BTreeSet<usize>, Vec<Vec<usize>>, bool) {
        (metrics, cites, values, dyadic)
    }
}

fn arb_corpus() -> impl Strategy<Value = Corpus> {
    (2usize..9).prop_flat_map(|n| proptest::collection::vec(arb_paper(n), n)).prop_map(|raw| {
        let papers = raw
            .into_iter()
            .enumerate()
            .map(|(i, (metrics, cites, values, dyadic))| {
                let mut indexes = IndexSet::default();
                for (c, vals) in uxeval::corpus::IndexCategory::ALL.iter().zip(&values).skip(1) {
                    for v in vals {
                        indexes.insert(*c, VOCAB[*v]);
                    }
                }
                indexes.paradigms = vec![if dyadic { "Dyadic" } else { "Polyadic" }.to_string()];
                let ms: Vec<&str> = metrics.iter().map(|m| POOL[*m]).collect();
                // Ids past `n` dangle; self-citations are removed.
                let cs: Vec<String> = cites.iter().filter(|c| **c != i).map(|c| format!("r{c}")).collect();
                let cs: Vec<&str> = cs.iter().map(String::as_str).collect();
                bare_paper(&format!("r{i}"), &ms, &cs, indexes)
            })
            .collect();
        Corpus::from_records(papers, metric_records(&POOL), vec![]).unwrap()
    })
}

pub fn graph_construction() -> Outcome {
    let corpus = fixture_corpus();
    ensure(corpus.papers().len() == 20, || "fixture corpus must have 20 papers".into())?;
    let worst = check_graph(corpus.clone())?;
    let graph = build_graph(corpus, &Default::default(), &uxeval::embed::HashedBagOfWords::default()).unwrap();
    let kinds = library_edges(&graph).iter().fold(BTreeMap::<String, usize>::new(), |mut m, e| {
        *m.entry(e.2.clone()).or_default() += 1;
        m
    });

    let mut runner = TestRunner::new(Config {
        cases: RANDOM_CORPORA,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&arb_corpus(), |c| {
            check_graph(Arc::new(c)).map_err(TestCaseError::fail)?;
            Ok(())
        })
        .map_err(|e| format!("random corpus: {e}"))?;
    Ok(format!(
        "fixture edges {kinds:?} match the pairwise reference (max weight diff {worst:e}); {RANDOM_CORPORA} random corpora pass"
    ))
}

// ---------------------------------------------------------------- retrieval

/// Places texts `at <d>` at Euclidean distance `d` from the query text
/// `query`; everything else far away.
pub struct PlacedEmbedder;

impl uxeval::embed::Embedder for PlacedEmbedder {
    fn dim(&self) -> usize {
        2
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        if text == "query" {
            return Embedding::new(vec![1.0, 0.0]);
        }
        if let Some(d) = text.strip_prefix("at ").and_then(|d| d.parse::<f64>().ok()) {
            return Embedding::new(vec![1.0, d]);
        }
        Embedding::new(vec![0.0, 5.0])
    }
}

pub fn placed_engine(distances: &[&str], script: MockScript) -> (uxeval::recommend::Engine, Arc<MockClient>) {
    let incidents = distances
        .iter()
        .enumerate()
        .map(|(i, d)| IncidentRecord {
            id: format!("i{i}"),
            system_description: format!("at {d}"),
            risks: vec![format!("risk of incident {i}")],
            source_url: format!("https://example.org/incidents/i{i}"),
        })
        .collect();
    let papers = vec![bare_paper("p", &["m0"], &[], IndexSet::default())];
    let corpus = Corpus::from_records(papers, metric_records(&["m0"]), incidents).unwrap();
    let (llm, client) = mock_llm(script);
    let engine = uxeval::recommend::Engine::build(
        Arc::new(corpus),
        &Default::default(),
        Arc::new(PlacedEmbedder),
        llm,
        Default::default(),
    )
    .unwrap();
    (engine, client)
}

fn gated(distances: &[&str]) -> Vec<String> {
    let (engine, _) = placed_engine(distances, MockScript::new());
    risk_candidates(&engine, "query")
        .unwrap()
        .into_iter()
        .map(|c| c.risk_ref.incident_id)
        .collect()
}

pub fn retrieval_gates() -> Outcome {
    let corpus = fixture_corpus();
    let embedder = uxeval::embed::HashedBagOfWords::default();
    let index = VectorIndex::build(&embedder, corpus.papers().iter().map(|p| (p.id.as_str(), p.retrieval_text()))).unwrap();
    let mut worst: f64 = 0.0;
    for p in corpus.papers() {
        let q = uxeval::embed::Embedder::embed(&embedder, &p.retrieval_text()).unwrap();
        let (id, cos) = index.nearest(&q, 1).unwrap().remove(0);
        ensure(id == p.id, || format!("nearest to {} is {id}", p.id))?;
        ensure(cos == cosine_similarity(&q, index.get(&p.id).unwrap()).unwrap(), || "score is not the cosine".into())?;
        worst = worst.max((cos - 1.0).abs());
    }
    ensure(worst <= 1e-12, || format!("self cosine off by {worst:e}"))?;

    let hits = gated(&["0.45", "0.50", "0.55"]);
    ensure(hits == ["i0"], || format!("gate over 0.45/0.50/0.55 kept {hits:?}"))?;
    let hits = gated(&["0.3", "0.1", "0.45", "0.2", "0.5"]);
    ensure(hits == ["i1", "i3", "i0"], || format!("top-3 gate kept {hits:?}"))?;

    let (engine, client) = placed_engine(&["0.50", "0.55"], MockScript::new());
    let (risks, _) = risks_for(&engine, "query").map_err(|e| e.to_string())?;
    ensure(risks.is_empty() && client.call_count() == 0, || {
        format!("empty gate returned {} risks after {} calls", risks.len(), client.call_count())
    })?;
    Ok(format!(
        "20/20 papers retrieve themselves (|cos - 1| <= {worst:e}); 0.45 in, 0.50 and 0.55 out; top 3 of 4; 0 calls on an empty gate"
    ))
}

// ---------------------------------------------------------------- hallucination guard

pub fn hallucination_guard() -> Outcome {
    let (engine, _) = fixture_engine("mock/adversarial.json");
    let samples = uxeval::evalharness::load_samples(&fixtures().join("eval/samples.json")).unwrap();
    let mut outputs = 0usize;
    for s in &samples {
        let (rec, warnings) = recommend_metrics(&engine, &s.description, &s.indexes).map_err(|e| e.to_string())?;
        outputs += rec.metrics.len();
        ensure(rec.metrics.iter().all(|m| rec.candidates.contains(&m.name)), || {
            format!("{}: output outside candidates", s.id)
        })?;
        ensure(warnings.iter().any(|w| w.code == "hallucination_guard"), || format!("{}: no guard warning", s.id))?;
    }
    let (risks, _) = risks_for(&engine, &sarah_inputs().description).map_err(|e| e.to_string())?;
    ensure(risks.is_empty(), || format!("invented risks survived: {risks:?}"))?;

    // Mixed outputs: random picks from candidates plus invented names.
    let repo = fixture_repo();
    let all: Vec<String> = repo.records().iter().map(|r| r.name.clone()).collect();
    let mut runner = TestRunner::new(Config {
        cases: 64,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(
            &(
                proptest::collection::btree_set(0..all.len(), 1..8),
                proptest::collection::vec(prop_oneof![0..all.len(), Just(usize::MAX)], 0..12),
            ),
            |(cands, picks)| {
                let candidates: BTreeSet<String> = cands.iter().map(|i| all[*i].clone()).collect();
                let emitted: Vec<String> = picks
                    .iter()
                    .map(|i| all.get(*i).cloned().unwrap_or_else(|| "invented metric".into()))
                    .collect();
                let mut script = MockScript::new();
                script.respond_any(Stage::FilterMetrics, json!({ "metrics": emitted }).to_string());
                let (llm, _) = mock_llm(script);
                let (kept, _) = llm::filter_metrics(&llm, &candidates, "d", &IndexSet::default(), &repo)
                    .map_err(|e| TestCaseError::fail(e.to_string()))?;
                prop_assert!(kept.iter().all(|k| candidates.contains(k)));
                Ok(())
            },
        )
        .map_err(|e| format!("mixed outputs: {e}"))?;

    let (report, extracted_in_repo) = audit_fixture();
    let truth: Value = read_json("annotate/truth.json");
    let got = serde_json::to_value(&report).unwrap();
    for (k, v) in truth.as_object().unwrap() {
        if k == "accurate" {
            continue;
        }
        ensure(&got[k] == v, || format!("audit {k}: got {} want {v}", got[k]))?;
    }
    ensure(json!(report.accurate()) == truth["accurate"], || format!("accurate = {}", report.accurate()))?;
    ensure(extracted_in_repo, || "an extracted metric is not in the repository".into())?;
    Ok(format!(
        "{outputs} adversarial outputs, all in candidates; 64 mixed scripts pass; audit {}/{} accurate (not measured {}, out of list {}, both {})",
        report.accurate(),
        report.identified,
        report.not_measured,
        report.out_of_candidate_list,
        report.overlapping
    ))
}

/// Annotates the seeded fixture papers with the committed script.
pub fn audit_fixture() -> (AuditReport, bool) {
    let repo = fixture_repo();
    let (llm, _) = mock_llm(script("annotate/script.json"));
    let mut annotations = Vec::new();
    for (name, text) in annotate_papers() {
        let (a, _) = uxeval::corpus::annotate_paper(&llm, &text, &repo).unwrap_or_else(|e| panic!("{name}: {e}"));
        annotations.push(a);
    }
    let in_repo = annotations
        .iter()
        .flat_map(|a| &a.extracted)
        .all(|e| repo.get(&e.metric).is_some_and(|r| r.name == e.metric));
    (AuditReport::from_annotations(&annotations), in_repo)
}

// ---------------------------------------------------------------- scoring

pub const TTEST_TOL: f64 = 1e-6;
pub const MEAN_TOL: f64 = 1e-12;

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn scoring_oracle() -> Outcome {
    let repo = Arc::new(
        uxeval::corpus::MetricRepository::new(
            ["a", "b", "c", "d", "e"]
                .iter()
                .map(|n| MetricRecord {
                    name: n.to_string(),
                    category: "t".into(),
                    definition: "t".into(),
                    aliases: vec![format!("alias of {n}")],
                })
                .collect(),
        )
        .unwrap(),
    );
    let s = score(&set(&["a", "b", "c", "d"]), &set(&["a", "b", "e"]), &repo).map_err(|e| e.to_string())?;
    ensure(s == ScoreTriple { precision: 0.5, recall: 2.0 / 3.0, f1: 4.0 / 7.0 }, || format!("{s:?}"))?;

    // Alias substitution over every subset of a fixed prediction.
    let truth = set(&["a", "c", "e"]);
    let names = ["a", "b", "c", "d", "e"];
    for mask in 0u32..32 {
        let plain: BTreeSet<String> = names.iter().map(|n| n.to_string()).collect();
        let swapped: BTreeSet<String> = names
            .iter()
            .enumerate()
            .map(|(i, n)| if mask & (1 << i) != 0 { format!("alias of {n}") } else { n.to_string() })
            .collect();
        let (x, y) = (score(&plain, &truth, &repo).unwrap(), score(&swapped, &truth, &repo).unwrap());
        ensure(x == y, || format!("alias mask {mask:05b}: {x:?} vs {y:?}"))?;
    }

    // Mixed benchmark: recorded predictions with known per-run scores.
    let samples = vec![
        EvalSample { id: "x".into(), description: "x".into(), indexes: IndexSet::default(), truth_metrics: set(&["a", "b"]) },
        EvalSample { id: "y".into(), description: "y".into(), indexes: IndexSet::default(), truth_metrics: set(&["c"]) },
    ];
    let recorded = RecordedPredictions {
        name: "recorded".into(),
        predictions: [
            ("x".to_string(), vec![set(&["a", "b"]), set(&["a"]), set(&["a", "d", "e"])]),
            ("y".to_string(), vec![set(&[]), set(&["c"]), set(&["c", "d"])]),
        ]
        .into(),
    };
    let result = run_benchmark(&samples, &recorded, 3, &repo).map_err(|e| e.to_string())?;
    // Per run (P, R, F1): x = (1,1,1), (1,1/2,2/3), (1/3,1/2,2/5); y = (0,0,0), (1,1,1), (1/2,1,2/3).
    let hand = ScoreTriple {
        precision: (1.0 + 1.0 + 1.0 / 3.0 + 0.0 + 1.0 + 0.5) / 6.0,
        recall: (1.0 + 0.5 + 0.5 + 0.0 + 1.0 + 1.0) / 6.0,
        f1: (1.0 + 2.0 / 3.0 + 0.4 + 0.0 + 1.0 + 2.0 / 3.0) / 6.0,
    };
    for (label, got, want) in [
        ("precision", result.mean.precision, hand.precision),
        ("recall", result.mean.recall, hand.recall),
        ("f1", result.mean.f1, hand.f1),
    ] {
        ensure((got - want).abs() <= MEAN_TOL, || format!("mean {label} {got} vs hand {want}"))?;
    }

    let oracle: Value = read_json("ttest_oracle.json");
    let mut worst: f64 = 0.0;
    for case in oracle["cases"].as_array().unwrap() {
        let a: Vec<f64> = serde_json::from_value(case["a"].clone()).unwrap();
        let b: Vec<f64> = serde_json::from_value(case["b"].clone()).unwrap();
        let t = paired_t_test(&a, &b).map_err(|e| e.to_string())?;
        let back = paired_t_test(&b, &a).map_err(|e| e.to_string())?;
        let (want_t, want_p) = (case["t"].as_f64().unwrap(), case["p"].as_f64().unwrap());
        let name = case["name"].as_str().unwrap();
        ensure(t.df as u64 == case["df"].as_u64().unwrap(), || format!("{name}: df {}", t.df))?;
        ensure((t.t - want_t).abs() <= TTEST_TOL * want_t.abs().max(1.0), || format!("{name}: t {} vs {want_t}", t.t))?;
        ensure((t.p - want_p).abs() <= TTEST_TOL, || format!("{name}: p {} vs {want_p}", t.p))?;
        ensure(back.t == -t.t && back.p == t.p, || format!("{name}: not antisymmetric"))?;
        worst = worst.max((t.p - want_p).abs());
    }
    Ok(format!(
        "(0.5, 2/3, 4/7) exact; alias invariance over 32 substitutions; benchmark mean within {MEAN_TOL:e}; t-test p within {worst:e} of the 50-digit oracle"
    ))
}

// ---------------------------------------------------------------- end to end

pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(session_dir: &Path) -> Server {
        let mut child = Command::new(env!("CARGO_BIN_EXE_uxeval"))
            .args(["serve", "--config"])
            .arg(fixtures().join("serve.toml"))
            .env("UXEVAL_BIND", "127.0.0.1:0")
            .env("RUST_LOG", "error")
            .env("UXEVAL_SESSION_DIR", session_dir)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("serve starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected first line {line:?}"))
            .to_string();
        Server {
            child,
            base: format!("http://{addr}/api/v1"),
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct Api {
    agent: ureq::Agent,
    pub base: String,
}

impl Api {
    pub fn new(base: &str) -> Api {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(20)))
            .build()
            .into();
        Api { agent, base: base.to_string() }
    }

    pub fn call(&self, method: &str, path: &str, body: Option<Value>) -> (u16, String) {
        let url = format!("{}{path}", self.base);
        let result = match (method, body) {
            ("GET", _) => self.agent.get(&url).call(),
            ("DELETE", _) => self.agent.delete(&url).call(),
            ("POST", Some(b)) => self.agent.post(&url).send_json(&b),
            ("POST", None) => self.agent.post(&url).send_empty(),
            ("PUT", Some(b)) => self.agent.put(&url).send_json(&b),
            other => panic!("unsupported request {other:?}"),
        };
        let mut resp = result.unwrap_or_else(|e| panic!("{method} {url}: {e}"));
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_to_string().unwrap())
    }

    pub fn json(&self, method: &str, path: &str, body: Option<Value>) -> Value {
        let (status, text) = self.call(method, path, body);
        assert!((200..300).contains(&status), "{method} {path}: {status} {text}");
        serde_json::from_str(&text).unwrap()
    }
}

pub const SARAH_CART: [&str; 2] = ["family involvement", "goal attainment"];

/// The scripted Sarah walk-through. Returns the session id and the JSON export.
pub fn sarah_flow(api: &Api) -> Result<(String, String), String> {
    let session = api.json("POST", "/projects", Some(serde_json::to_value(sarah_inputs()).unwrap()));
    let id = session["id"].as_str().unwrap().to_string();
    let p = format!("/projects/{id}");
    ensure(session["revision"] == 1, || format!("created at revision {}", session["revision"]))?;
    let first: BTreeSet<String> = names(&session["current_recommendation"]["metrics"]);
    ensure(!first.is_empty(), || "empty first recommendation".into())?;

    let mut indexes = session["current_indexes"].clone();
    indexes["application_domain"].as_array_mut().unwrap().push(json!("Addiction recovery"));
    indexes["stakeholders"].as_array_mut().unwrap().push(json!("Family members"));
    let regen = api.json("PUT", &format!("{p}/indexes"), Some(indexes));
    let diff = &regen["diff"];
    let second = names(&regen["recommendation"]["metrics"]);
    ensure(!diff["added"].as_array().unwrap().is_empty(), || format!("nothing added: {diff}"))?;
    ensure(!diff["removed"].as_array().unwrap().is_empty(), || format!("nothing removed: {diff}"))?;
    let added: BTreeSet<String> = serde_json::from_value(diff["added"].clone()).unwrap();
    ensure(added == second.difference(&first).cloned().collect(), || "diff does not match recommendations".into())?;

    let metrics = api.json("GET", &format!("{p}/metrics"), None);
    ensure(names(&metrics["recommendation"]["metrics"]) == second, || "metrics endpoint disagrees".into())?;
    api.json("GET", &format!("{p}/metrics/graphview"), None);

    api.json("POST", &format!("{p}/cart/goal%20attainment"), None);
    api.json("POST", &format!("{p}/cart/family%20involvement"), None);
    api.json("POST", &format!("{p}/cart/utterance%20length"), None);
    let s = api.json("DELETE", &format!("{p}/cart/length%20of%20utterance"), None);
    ensure(s["cart"] == json!(SARAH_CART), || format!("cart {}", s["cart"]))?;

    let outcomes = api.json("GET", &format!("{p}/outcomes"), None);
    let outcomes = outcomes.as_array().unwrap();
    ensure(outcomes.len() >= 2, || format!("{} outcomes", outcomes.len()))?;
    for o in &outcomes[..2] {
        api.json("POST", &format!("{p}/outcomes/select"), Some(json!({ "outcome": o["outcome_ref"] })));
    }
    let risks = api.json("GET", &format!("{p}/risks"), None);
    ensure(!risks.as_array().unwrap().is_empty(), || "no risks".into())?;
    for r in risks.as_array().unwrap() {
        api.json("POST", &format!("{p}/risks/accept"), Some(json!({ "risk": r["risk_ref"] })));
    }
    let generated = api.json("POST", &format!("{p}/generate"), None);
    let plan = generated["plan"].as_str().unwrap().to_lowercase();
    for m in SARAH_CART {
        ensure(plan.contains(m), || format!("plan lacks {m}"))?;
    }
    let (status, export) = api.call("GET", &format!("{p}/export?format=json"), None);
    ensure(status == 200, || format!("export status {status}"))?;
    Ok((id, export))
}

fn names(metrics: &Value) -> BTreeSet<String> {
    metrics
        .as_array()
        .map(|a| a.iter().map(|m| m["name"].as_str().unwrap().to_string()).collect())
        .unwrap_or_default()
}

pub fn golden_path() -> PathBuf {
    fixtures().join("golden/sarah_export.json")
}

pub fn end_to_end_golden() -> Outcome {
    let first_dir = tempfile::tempdir().unwrap();
    let (id, first) = {
        let server = Server::start(first_dir.path());
        sarah_flow(&Api::new(&server.base))?
    };
    let after_restart = {
        let server = Server::start(first_dir.path());
        let (status, text) = Api::new(&server.base).call("GET", &format!("/projects/{id}/export?format=json"), None);
        ensure(status == 200, || format!("export after restart: {status} {text}"))?;
        text
    };
    ensure(after_restart == first, || "export changed across a restart".into())?;

    let second_dir = tempfile::tempdir().unwrap();
    let (_, second) = {
        let server = Server::start(second_dir.path());
        sarah_flow(&Api::new(&server.base))?
    };
    ensure(second == first, || "a second run exported different bytes".into())?;

    if std::env::var_os("UXEVAL_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_path().parent().unwrap()).unwrap();
        std::fs::write(golden_path(), &first).unwrap();
    }
    let golden = std::fs::read_to_string(golden_path()).map_err(|e| format!("golden file: {e}"))?;
    ensure(golden == first, || "export differs from the committed golden file".into())?;
    Ok(format!("{} byte export identical across 2 runs, a restart and the golden file", first.len()))
}

// ---------------------------------------------------------------- atomicity

pub fn service_atomicity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let client = Switchable::new(script("mock/sarah.json"));
    let llm = uxeval::llm::Llm::new(client.clone());
    let engine = Arc::new(engine_with(fixture_corpus(), llm));
    let svc = Arc::new(ProjectService::new(engine, dir.path(), CartPolicy::Corpus).map_err(|e| e.to_string())?);
    let s = svc.create(sarah_inputs()).map_err(|e| e.to_string())?;
    let file = dir.path().join("sessions").join(format!("{}.json", s.id));
    let before = std::fs::read(&file).unwrap();

    client.fail(true);
    let mut edited = s.current_indexes.clone();
    edited.application_domain.push("Addiction recovery".into());
    ensure(svc.regenerate(&s.id, Some(edited)).is_err(), || "regenerate succeeded with a failing model".into())?;
    ensure(std::fs::read(&file).unwrap() == before, || "stored session changed after a failed regenerate".into())?;
    client.fail(false);
    svc.cart_add(&s.id, "goal attainment").map_err(|e| e.to_string())?;
    let before = std::fs::read(&file).unwrap();
    client.fail(true);
    ensure(svc.generate(&s.id).is_err(), || "generate succeeded with a failing model".into())?;
    ensure(std::fs::read(&file).unwrap() == before, || "stored session changed after a failed generate".into())?;
    client.fail(false);

    let start = svc.get(&s.id).unwrap().revision;
    let metrics: Vec<String> = [
        "trust in AI", "enjoyment", "relapse rate", "reliance", "wellbeing score", "output quality", "self-efficacy", "turn count",
    ]
    .map(String::from)
    .to_vec();
    let threads: Vec<_> = metrics
        .iter()
        .cloned()
        .map(|m| {
            let svc = svc.clone();
            let id = s.id.clone();
            std::thread::spawn(move || {
                let a = svc.cart_add(&id, &m).unwrap().revision;
                let r = svc.cart_remove(&id, &m).unwrap().revision;
                (a, r)
            })
        })
        .collect();
    let mut revisions = Vec::new();
    for t in threads {
        let (a, r) = t.join().unwrap();
        ensure(a < r, || format!("remove at {r} not after add at {a}"))?;
        revisions.extend([a, r]);
    }
    revisions.sort();
    let expected: Vec<u64> = (start + 1..=start + 2 * metrics.len() as u64).collect();
    ensure(revisions == expected, || format!("revisions {revisions:?}, expected {expected:?}"))?;
    let end = svc.get(&s.id).unwrap();
    ensure(end.revision == start + 16 && end.cart == ["goal attainment".to_string()].into(), || {
        format!("final revision {} cart {:?}", end.revision, end.cart)
    })?;
    Ok(format!(
        "failed regenerate and generate leave the stored bytes unchanged; 16 concurrent mutations got revisions {}..={}",
        start + 1,
        start + 16
    ))
}
