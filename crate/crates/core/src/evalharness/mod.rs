//! Precision/recall/F1 benchmarking of metric recommenders over labelled
//! samples, with repeated runs and a paired t-test between two recommenders.

mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_name, IndexSet, MetricRepository, SCHEMA_VERSION};
use crate::recommend::{recommend_metrics, Engine};

pub use stats::{ln_gamma, paired_t_test, regularized_incomplete_beta, student_t_cdf, two_sided_p, TTest};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("ground truth must not be empty")]
    EmptyTruth,
    #[error("samples differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("need at least 2 paired samples, got {0}")]
    TooFewSamples(usize),
    #[error("all paired differences are zero")]
    DegenerateSample,
    #[error("paired differences have zero variance")]
    DegenerateVariance,
    #[error("runs must be >= 1")]
    InvalidRuns,
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSample {
    pub id: String,
    pub description: String,
    #[serde(default)]
    pub indexes: IndexSet,
    pub truth_metrics: BTreeSet<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SamplesFile {
    schema: u32,
    samples: Vec<EvalSample>,
}

/// Reads `{"schema": 1, "samples": [...]}`.
pub fn load_samples(path: &Path) -> Result<Vec<EvalSample>, EvalError> {
    let input_err = |message: String| EvalError::Input {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| input_err(e.to_string()))?;
    let file: SamplesFile = serde_json::from_str(&text).map_err(|e| input_err(e.to_string()))?;
    if file.schema != SCHEMA_VERSION {
        return Err(input_err(format!("unsupported schema {}", file.schema)));
    }
    if let Some(s) = file.samples.iter().find(|s| s.truth_metrics.is_empty()) {
        return Err(input_err(format!("sample `{}` has no truth metrics", s.id)));
    }
    Ok(file.samples)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScoreTriple {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ScoreTriple { precision, recall, f1 }
    }

    /// Component-wise arithmetic mean; zero for an empty input.
    pub fn mean<'a>(triples: impl IntoIterator<Item = &'a ScoreTriple>) -> ScoreTriple {
        let (mut p, mut r, mut f, mut n) = (0.0, 0.0, 0.0, 0usize);
        for t in triples {
            p += t.precision;
            r += t.recall;
            f += t.f1;
            n += 1;
        }
        if n == 0 {
            return ScoreTriple::default();
        }
        let n = n as f64;
        ScoreTriple {
            precision: p / n,
            recall: r / n,
            f1: f / n,
        }
    }
}

fn canonical_set(names: &BTreeSet<String>, repo: &MetricRepository) -> BTreeSet<String> {
    names
        .iter()
        .map(|n| repo.canonicalize(n).map_or_else(|| normalize_name(n), str::to_string))
        .collect()
}

/// Scores `predicted` against `truth` after mapping both through the alias
/// table. Names outside the repository are compared in normalized form.
pub fn score(
    predicted: &BTreeSet<String>,
    truth: &BTreeSet<String>,
    repo: &MetricRepository,
) -> Result<ScoreTriple, EvalError> {
    let truth = canonical_set(truth, repo);
    if truth.is_empty() {
        return Err(EvalError::EmptyTruth);
    }
    let predicted = canonical_set(predicted, repo);
    let hits = predicted.intersection(&truth).count() as f64;
    let precision = if predicted.is_empty() {
        0.0
    } else {
        hits / predicted.len() as f64
    };
    // 2PR/(P+R) rewritten over counts, which rounds once.
    let f1 = 2.0 * hits / (predicted.len() + truth.len()) as f64;
    Ok(ScoreTriple {
        precision,
        recall: hits / truth.len() as f64,
        f1,
    })
}

/// Anything that predicts a metric set for a sample.
pub trait Recommender {
    fn name(&self) -> &str;
    fn recommend(&self, sample: &EvalSample, run: usize) -> Result<BTreeSet<String>, String>;
}

/// The full recommendation pipeline.
pub struct PipelineRecommender<'a> {
    pub engine: &'a Engine,
    pub label: String,
}

impl Recommender for PipelineRecommender<'_> {
    fn name(&self) -> &str {
        &self.label
    }

    fn recommend(&self, sample: &EvalSample, _run: usize) -> Result<BTreeSet<String>, String> {
        recommend_metrics(self.engine, &sample.description, &sample.indexes)
            .map(|(rec, _)| rec.names())
            .map_err(|e| e.to_string())
    }
}

/// Predictions recorded ahead of time: sample id to one list per run.
/// Runs past the recorded ones reuse the last list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedPredictions {
    pub name: String,
    pub predictions: BTreeMap<String, Vec<BTreeSet<String>>>,
}

impl RecordedPredictions {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| EvalError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

impl Recommender for RecordedPredictions {
    fn name(&self) -> &str {
        &self.name
    }

    fn recommend(&self, sample: &EvalSample, run: usize) -> Result<BTreeSet<String>, String> {
        let runs = self
            .predictions
            .get(&sample.id)
            .ok_or_else(|| format!("no predictions for sample `{}`", sample.id))?;
        runs.get(run)
            .or_else(|| runs.last())
            .cloned()
            .ok_or_else(|| format!("empty prediction list for sample `{}`", sample.id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub sample_id: String,
    pub run: usize,
    pub score: ScoreTriple,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub sample_id: String,
    pub run: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub recommender: String,
    pub runs: usize,
    pub per_run: Vec<RunScore>,
    pub failures: Vec<RunFailure>,
    /// Unweighted mean over every scored (sample, run) pair.
    pub mean: ScoreTriple,
}

impl BenchmarkResult {
    /// Mean triple per sample over its scored runs, keyed by sample id.
    pub fn per_sample_means(&self) -> BTreeMap<String, ScoreTriple> {
        let mut grouped: BTreeMap<String, Vec<ScoreTriple>> = BTreeMap::new();
        for r in &self.per_run {
            grouped.entry(r.sample_id.clone()).or_default().push(r.score);
        }
        grouped
            .into_iter()
            .map(|(id, scores)| (id, ScoreTriple::mean(&scores)))
            .collect()
    }
}

/// Runs `recommender` `runs` times on every sample. Failing runs are
/// recorded and left out of the mean.
pub fn run_benchmark(
    samples: &[EvalSample],
    recommender: &dyn Recommender,
    runs: usize,
    repo: &MetricRepository,
) -> Result<BenchmarkResult, EvalError> {
    if runs == 0 {
        return Err(EvalError::InvalidRuns);
    }
    let mut per_run = Vec::new();
    let mut failures = Vec::new();
    for sample in samples {
        for run in 0..runs {
            let outcome = recommender
                .recommend(sample, run)
                .and_then(|p| score(&p, &sample.truth_metrics, repo).map_err(|e| e.to_string()));
            match outcome {
                Ok(score) => per_run.push(RunScore {
                    sample_id: sample.id.clone(),
                    run,
                    score,
                }),
                Err(error) => {
                    log::warn!("{}: sample {} run {run}: {error}", recommender.name(), sample.id);
                    failures.push(RunFailure {
                        sample_id: sample.id.clone(),
                        run,
                        error,
                    })
                }
            }
        }
    }
    let mean = ScoreTriple::mean(per_run.iter().map(|r| &r.score));
    Ok(BenchmarkResult {
        recommender: recommender.name().to_string(),
        runs,
        per_run,
        failures,
        mean,
    })
}

/// Published reference means (precision, recall, F1) of an LLM-only
/// baseline and of the knowledge-graph recommender. Shown next to local
/// results for orientation; they cannot be reproduced without the original
/// hosted model and labelled sample set.
pub const PUBLISHED_BASELINE_MEANS: ScoreTriple = ScoreTriple {
    precision: 0.096,
    recall: 0.203,
    f1: 0.121,
};
pub const PUBLISHED_SYSTEM_MEANS: ScoreTriple = ScoreTriple {
    precision: 0.156,
    recall: 0.304,
    f1: 0.195,
};

/// Paired t-tests of per-sample means, one per score component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub samples: usize,
    pub precision: Option<TTest>,
    pub recall: Option<TTest>,
    pub f1: Option<TTest>,
    pub sidedness: String,
    /// Components whose test was undefined, with the reason.
    pub undefined: BTreeMap<String, String>,
}

/// Compares two results on the samples both scored.
pub fn compare(system: &BenchmarkResult, baseline: &BenchmarkResult) -> Comparison {
    let a = system.per_sample_means();
    let b = baseline.per_sample_means();
    let common: Vec<&String> = a.keys().filter(|k| b.contains_key(*k)).collect();
    let mut undefined = BTreeMap::new();
    let mut test = |label: &str, pick: fn(&ScoreTriple) -> f64| {
        let xs: Vec<f64> = common.iter().map(|k| pick(&a[*k])).collect();
        let ys: Vec<f64> = common.iter().map(|k| pick(&b[*k])).collect();
        match paired_t_test(&xs, &ys) {
            Ok(t) => Some(t),
            Err(e) => {
                undefined.insert(label.to_string(), e.to_string());
                None
            }
        }
    };
    let precision = test("precision", |t| t.precision);
    let recall = test("recall", |t| t.recall);
    let f1 = test("f1", |t| t.f1);
    Comparison {
        samples: common.len(),
        precision,
        recall,
        f1,
        sidedness: "two-sided".into(),
        undefined,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub system: BenchmarkResult,
    pub baseline: Option<BenchmarkResult>,
    pub comparison: Option<Comparison>,
    pub published_baseline_means: ScoreTriple,
    pub published_system_means: ScoreTriple,
}

impl BenchReport {
    pub fn new(system: BenchmarkResult, baseline: Option<BenchmarkResult>) -> Self {
        let comparison = baseline.as_ref().map(|b| compare(&system, b));
        BenchReport {
            system,
            baseline,
            comparison,
            published_baseline_means: PUBLISHED_BASELINE_MEANS,
            published_system_means: PUBLISHED_SYSTEM_MEANS,
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Model | Mean Precision | Mean Recall | Mean F-1 Score |\n|---|---|---|---|\n");
        let mut row = |name: &str, t: &ScoreTriple| {
            let _ = writeln!(s, "| {name} | {:.3} | {:.3} | {:.3} |", t.precision, t.recall, t.f1);
        };
        if let Some(b) = &self.baseline {
            row(&b.recommender, &b.mean);
        }
        row(&self.system.recommender, &self.system.mean);
        row("published baseline (reference)", &self.published_baseline_means);
        row("published system (reference)", &self.published_system_means);
        let _ = writeln!(
            s,
            "\n{} run(s) per sample; {} scored, {} failed.",
            self.system.runs,
            self.system.per_run.len(),
            self.system.failures.len()
        );
        if let Some(c) = &self.comparison {
            let _ = writeln!(s, "\nPaired t-test on {} per-sample means ({}):\n", c.samples, c.sidedness);
            for (label, t) in [("precision", &c.precision), ("recall", &c.recall), ("f1", &c.f1)] {
                match t {
                    Some(t) => {
                        let _ = writeln!(s, "- {label}: t = {:.4}, df = {}, p = {:.4}", t.t, t.df, t.p);
                    }
                    None => {
                        let _ = writeln!(s, "- {label}: undefined ({})", c.undefined[label]);
                    }
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::MetricRecord;

    fn repo() -> MetricRepository {
        let rec = |n: &str, aliases: &[&str]| MetricRecord {
            name: n.into(),
            category: "c".into(),
            definition: "d".into(),
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
        };
        MetricRepository::new(vec![rec("a", &["alpha"]), rec("b", &[]), rec("c", &[]), rec("d", &[]), rec("e", &[])])
            .unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn score_examples() {
        let r = repo();
        let t = score(&set(&["a", "b", "c", "d"]), &set(&["a", "b", "e"]), &r).unwrap();
        assert_eq!(t, ScoreTriple { precision: 0.5, recall: 2.0 / 3.0, f1: 4.0 / 7.0 });
        assert_eq!(score(&set(&["a"]), &set(&["a"]), &r).unwrap(), ScoreTriple::from_pr(1.0, 1.0));
        assert_eq!(score(&set(&[]), &set(&["a"]), &r).unwrap(), ScoreTriple::default());
        assert!(matches!(score(&set(&["a"]), &set(&[]), &r), Err(EvalError::EmptyTruth)));
    }

    #[test]
    fn alias_invariance() {
        let r = repo();
        let truth = set(&["a", "b"]);
        assert_eq!(
            score(&set(&["alpha", "c"]), &truth, &r).unwrap(),
            score(&set(&["a", "c"]), &truth, &r).unwrap()
        );
    }

    #[test]
    fn benchmark_means() {
        let samples = vec![
            EvalSample {
                id: "s1".into(),
                description: "d".into(),
                indexes: IndexSet::default(),
                truth_metrics: set(&["a"]),
            },
            EvalSample {
                id: "s2".into(),
                description: "d".into(),
                indexes: IndexSet::default(),
                truth_metrics: set(&["b"]),
            },
        ];
        let rec = RecordedPredictions {
            name: "fixed".into(),
            predictions: [("s1".to_string(), vec![set(&["a"])]), ("s2".to_string(), vec![set(&["c"])])].into(),
        };
        let res = run_benchmark(&samples, &rec, 3, &repo()).unwrap();
        assert_eq!(res.per_run.len(), 6);
        assert_eq!(res.mean, ScoreTriple { precision: 0.5, recall: 0.5, f1: 0.5 });
        assert!(matches!(run_benchmark(&samples, &rec, 0, &repo()), Err(EvalError::InvalidRuns)));
    }
}
