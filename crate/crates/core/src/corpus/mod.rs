//! Data model for papers, metrics, outcomes, incidents and indexes, plus
//! loading and validation of the JSON corpus files.

mod annotate;
mod index;
mod repo;
mod usage;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use annotate::{
    annotate_paper, Annotation, AuditEntry, AuditIssue, AuditReport, EvidenceKind, ExtractedMetric,
    OutOfListCase,
};
pub use index::{canonical_paradigm, IndexCategory, IndexSet, PARADIGM_VALUES};
pub use repo::{normalize_name, MetricRecord, MetricRepository};
pub use usage::{format_metric_usage, parse_metric_usage, MetricUsageParts};

/// Version tag every corpus file carries in its top-level `schema` field.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {field}: {message}")]
    Schema {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("paper `{paper}` references unknown metric `{metric}`")]
    DanglingMetric { paper: String, metric: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("field `{0}` must not be empty")]
    EmptyField(&'static str),
    #[error("field `{0}` contains a usage-template marker")]
    AmbiguousField(&'static str),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// How a metric was collected in a prior study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricMethod {
    Survey,
    Interview,
    SystemLog,
}

impl MetricMethod {
    pub const ALL: [MetricMethod; 3] =
        [MetricMethod::Survey, MetricMethod::Interview, MetricMethod::SystemLog];

    /// Lenient parse for model output: accepts "survey", "System Log", "system_log", ...
    pub fn parse_loose(s: &str) -> Option<MetricMethod> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "survey" | "surveys" | "questionnaire" => Some(MetricMethod::Survey),
            "interview" | "interviews" => Some(MetricMethod::Interview),
            "systemlog" | "systemlogs" | "log" | "logs" => Some(MetricMethod::SystemLog),
            _ => None,
        }
    }
}

impl fmt::Display for MetricMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricMethod::Survey => "Survey",
            MetricMethod::Interview => "Interview",
            MetricMethod::SystemLog => "SystemLog",
        })
    }
}

/// What one paper found with one metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeRecord {
    /// Canonical name of the metric this outcome belongs to.
    pub metric: String,
    pub outcome_achieved: String,
    pub paper_id: String,
    pub citation_reason: String,
    pub metric_method: MetricMethod,
    pub metric_usage: String,
    #[serde(default)]
    pub metric_challenges: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaperMetadata {
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub abstract_text: String,
    #[serde(default)]
    pub publication_date: String,
    #[serde(default)]
    pub cited_by: Vec<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub venue: String,
    #[serde(default)]
    pub publisher: String,
    #[serde(default)]
    pub affiliations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaperRecord {
    pub id: String,
    pub title: String,
    pub narrative: String,
    pub indexes: IndexSet,
    pub metrics: BTreeSet<String>,
    #[serde(default)]
    pub outcomes: Vec<OutcomeRecord>,
    #[serde(default)]
    pub cites: BTreeSet<String>,
    #[serde(default)]
    pub metadata: PaperMetadata,
}

impl PaperRecord {
    /// Text embedded for nearest-paper retrieval: narrative followed by the
    /// canonical index serialization, mirroring how queries are built.
    pub fn retrieval_text(&self) -> String {
        format!("{}\n{}", self.narrative, self.indexes.canonical_text())
    }
}

/// Points at one outcome of one paper.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutcomeRef {
    pub paper_id: String,
    pub outcome_index: usize,
}

impl fmt::Display for OutcomeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.paper_id, self.outcome_index)
    }
}

/// Points at one risk of one incident.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RiskRef {
    pub incident_id: String,
    pub risk_index: usize,
}

impl fmt::Display for RiskRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.incident_id, self.risk_index)
    }
}

/// A real-world AI incident with the risks it exposed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentRecord {
    pub id: String,
    pub system_description: String,
    pub risks: Vec<String>,
    pub source_url: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PapersFile {
    schema: u32,
    papers: Vec<PaperRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetricsFile {
    schema: u32,
    metrics: Vec<MetricRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IncidentsFile {
    schema: u32,
    incidents: Vec<IncidentRecord>,
}

/// Locations of the three corpus files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPaths {
    pub papers: PathBuf,
    pub metrics: PathBuf,
    pub incidents: PathBuf,
}

impl CorpusPaths {
    /// The conventional `papers.json` / `metrics.json` / `incidents.json` layout.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        CorpusPaths {
            papers: dir.join("papers.json"),
            metrics: dir.join("metrics.json"),
            incidents: dir.join("incidents.json"),
        }
    }
}

/// Non-fatal findings from [`load_corpus`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    /// `(citing paper, cited id)` pairs whose target is not in the corpus.
    pub dangling_citations: Vec<(String, String)>,
    /// `(paper, name as written, canonical name)` for metric names rewritten through aliases.
    pub canonicalized_metrics: Vec<(String, String, String)>,
}

/// A validated corpus. Immutable after load.
#[derive(Debug, Clone)]
pub struct Corpus {
    papers: Vec<PaperRecord>,
    by_id: BTreeMap<String, usize>,
    metrics: MetricRepository,
    incidents: Vec<IncidentRecord>,
    report: LoadReport,
}

impl Corpus {
    /// Validates and canonicalizes in-memory records.
    pub fn from_records(
        mut papers: Vec<PaperRecord>,
        metrics: Vec<MetricRecord>,
        incidents: Vec<IncidentRecord>,
    ) -> Result<Self, CorpusError> {
        let metrics = MetricRepository::new(metrics)?;
        let mut report = LoadReport::default();
        let mut by_id = BTreeMap::new();

        for (i, paper) in papers.iter().enumerate() {
            if paper.id.trim().is_empty() {
                return Err(CorpusError::InvalidRecord(format!("paper #{i} has an empty id")));
            }
            if by_id.insert(paper.id.clone(), i).is_some() {
                return Err(CorpusError::InvalidRecord(format!("duplicate paper id `{}`", paper.id)));
            }
        }

        for paper in &mut papers {
            validate_paper(paper, &metrics, &mut report)?;
        }
        for paper in &papers {
            for cited in &paper.cites {
                if !by_id.contains_key(cited) {
                    report.dangling_citations.push((paper.id.clone(), cited.clone()));
                }
            }
        }

        let mut seen = BTreeSet::new();
        for incident in &incidents {
            if !seen.insert(incident.id.clone()) {
                return Err(CorpusError::InvalidRecord(format!(
                    "duplicate incident id `{}`",
                    incident.id
                )));
            }
            if incident.source_url.trim().is_empty() {
                return Err(CorpusError::InvalidRecord(format!(
                    "incident `{}` has an empty source_url",
                    incident.id
                )));
            }
        }

        Ok(Corpus {
            papers,
            by_id,
            metrics,
            incidents,
            report,
        })
    }

    pub fn papers(&self) -> &[PaperRecord] {
        &self.papers
    }

    pub fn paper(&self, id: &str) -> Option<&PaperRecord> {
        self.by_id.get(id).map(|&i| &self.papers[i])
    }

    pub fn metrics(&self) -> &MetricRepository {
        &self.metrics
    }

    pub fn incidents(&self) -> &[IncidentRecord] {
        &self.incidents
    }

    pub fn incident(&self, id: &str) -> Option<&IncidentRecord> {
        self.incidents.iter().find(|i| i.id == id)
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    /// Every metric name measured by at least one paper.
    pub fn measured_metrics(&self) -> BTreeSet<String> {
        self.papers.iter().flat_map(|p| p.metrics.iter().cloned()).collect()
    }
}

fn validate_paper(
    paper: &mut PaperRecord,
    repo: &MetricRepository,
    report: &mut LoadReport,
) -> Result<(), CorpusError> {
    let invalid = paper.indexes.invalid_paradigms();
    if !invalid.is_empty() {
        return Err(CorpusError::InvalidRecord(format!(
            "paper `{}` has paradigm values outside {{Dyadic, Polyadic}}: {invalid:?}",
            paper.id
        )));
    }
    if paper.cites.contains(&paper.id) {
        return Err(CorpusError::InvalidRecord(format!("paper `{}` cites itself", paper.id)));
    }

    let mut canonical = BTreeSet::new();
    for name in &paper.metrics {
        let resolved = repo.canonicalize(name).ok_or_else(|| CorpusError::DanglingMetric {
            paper: paper.id.clone(),
            metric: name.clone(),
        })?;
        if resolved != name {
            report
                .canonicalized_metrics
                .push((paper.id.clone(), name.clone(), resolved.to_string()));
        }
        canonical.insert(resolved.to_string());
    }
    paper.metrics = canonical;

    for outcome in &mut paper.outcomes {
        let resolved = repo
            .canonicalize(&outcome.metric)
            .ok_or_else(|| CorpusError::DanglingMetric {
                paper: paper.id.clone(),
                metric: outcome.metric.clone(),
            })?
            .to_string();
        if !paper.metrics.contains(&resolved) {
            return Err(CorpusError::InvalidRecord(format!(
                "outcome of paper `{}` uses metric `{}` which the paper does not list",
                paper.id, outcome.metric
            )));
        }
        if outcome.paper_id != paper.id {
            return Err(CorpusError::InvalidRecord(format!(
                "outcome listed under paper `{}` names paper `{}`",
                paper.id, outcome.paper_id
            )));
        }
        if let Some(parts) = parse_metric_usage(&outcome.metric_usage) {
            if repo.canonicalize(&parts.metric) != Some(resolved.as_str()) {
                return Err(CorpusError::InvalidRecord(format!(
                    "usage sentence of paper `{}` names `{}` but the outcome is for `{resolved}`",
                    paper.id, parts.metric
                )));
            }
        }
        outcome.metric = resolved;
    }
    Ok(())
}

fn read_versioned<T: DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CorpusError::Schema {
            path: path.to_path_buf(),
            field: "<root>".into(),
            message: e.to_string(),
        })?;
    match value.get("schema").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        other => {
            return Err(CorpusError::Schema {
                path: path.to_path_buf(),
                field: "schema".into(),
                message: format!("expected {SCHEMA_VERSION}, found {other:?}"),
            })
        }
    }
    serde_path_to_error::deserialize(value).map_err(|e| CorpusError::Schema {
        path: path.to_path_buf(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Loads and validates the three corpus files.
pub fn load_corpus(paths: &CorpusPaths) -> Result<Corpus, CorpusError> {
    let papers: PapersFile = read_versioned(&paths.papers)?;
    let metrics: MetricsFile = read_versioned(&paths.metrics)?;
    let incidents: IncidentsFile = read_versioned(&paths.incidents)?;
    Corpus::from_records(papers.papers, metrics.metrics, incidents.incidents)
}

/// Loads only the metric repository file.
pub fn load_metrics(path: &Path) -> Result<MetricRepository, CorpusError> {
    let metrics: MetricsFile = read_versioned(path)?;
    MetricRepository::new(metrics.metrics)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CorpusError> {
    let mut text = serde_json::to_string_pretty(value).expect("corpus records serialize");
    text.push('\n');
    crate::util::atomic_write(path, text.as_bytes()).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a validated corpus back to `dir` using the conventional file names.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<CorpusPaths, CorpusError> {
    fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let paths = CorpusPaths::in_dir(dir);
    write_json(
        &paths.papers,
        &PapersFile {
            schema: SCHEMA_VERSION,
            papers: corpus.papers.clone(),
        },
    )?;
    write_json(
        &paths.metrics,
        &MetricsFile {
            schema: SCHEMA_VERSION,
            metrics: corpus.metrics.records().to_vec(),
        },
    )?;
    write_json(
        &paths.incidents,
        &IncidentsFile {
            schema: SCHEMA_VERSION,
            incidents: corpus.incidents.clone(),
        },
    )?;
    Ok(paths)
}
