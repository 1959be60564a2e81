//! LLM-assisted annotation of a paper's full text, with an audit of every
//! metric the model identified.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{normalize_name, IndexSet, MetricMethod, MetricRepository};
use crate::llm::{Llm, LlmError, Stage, StageWarning};

/// Where the model says a metric came from in the paper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    /// Explicitly measured in the evaluation.
    Measured,
    /// Inferred from how the system or study is described.
    InferredFromDescription,
    /// Synthesized from qualitative results (interview or survey quotes).
    SynthesizedFromResults,
    /// Recommended from context although the study did not use it.
    RecommendedNotUsed,
}

impl EvidenceKind {
    fn parse(s: &str) -> Option<EvidenceKind> {
        match normalize_name(s).replace([' ', '-'], "_").as_str() {
            "measured" => Some(EvidenceKind::Measured),
            "inferred_from_description" | "inferred" => Some(EvidenceKind::InferredFromDescription),
            "synthesized_from_results" | "synthesized" => Some(EvidenceKind::SynthesizedFromResults),
            "recommended_not_used" | "recommended" => Some(EvidenceKind::RecommendedNotUsed),
            _ => None,
        }
    }
}

/// Why an identified metric is inaccurate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditIssue {
    /// Identified but not measured in the evaluation.
    NotMeasured { evidence: EvidenceKind },
    /// Not worded as in the candidate list.
    OutOfCandidateList { case: OutOfListCase },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum OutOfListCase {
    /// A rewording of a candidate, resolved through the alias table.
    Reworded { canonical: String },
    /// Not in the repository at all.
    Invented,
}

/// One identified metric that failed at least one accuracy requirement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// The name as the model wrote it.
    pub identified: String,
    pub issues: Vec<AuditIssue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedMetric {
    /// Canonical repository name.
    pub metric: String,
    pub method: Option<MetricMethod>,
    pub usage: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub narrative: String,
    pub challenges: String,
    pub indexes: IndexSet,
    /// Measured metrics that canonicalize into the repository.
    pub extracted: Vec<ExtractedMetric>,
    /// Number of metrics the model identified, before any filtering.
    pub identified: usize,
    pub audit: Vec<AuditEntry>,
}

struct RawMetric {
    name: String,
    method: Option<String>,
    usage: String,
    evidence: EvidenceKind,
}

struct RawAnnotation {
    narrative: String,
    challenges: String,
    indexes: serde_json::Map<String, Value>,
    metrics: Vec<RawMetric>,
}

fn parse_raw(v: &Value) -> Result<RawAnnotation, String> {
    let text = |field: &str| v.get(field).and_then(Value::as_str).unwrap_or("").trim().to_string();
    let narrative = text("narrative");
    if narrative.is_empty() {
        return Err("missing `narrative`".into());
    }
    let list = v
        .get("metrics")
        .and_then(Value::as_array)
        .ok_or("missing `metrics` array")?;
    let mut metrics = Vec::new();
    for item in list {
        let name = item
            .get("metric")
            .or_else(|| item.get("name"))
            .and_then(Value::as_str)
            .ok_or("metric entry without a `metric` name")?;
        let evidence = match item.get("evidence").and_then(Value::as_str) {
            None => EvidenceKind::Measured,
            Some(e) => EvidenceKind::parse(e).ok_or_else(|| format!("unknown evidence kind `{e}`"))?,
        };
        metrics.push(RawMetric {
            name: name.trim().to_string(),
            method: item.get("method").and_then(Value::as_str).map(str::to_string),
            usage: item.get("usage").and_then(Value::as_str).unwrap_or("").to_string(),
            evidence,
        });
    }
    Ok(RawAnnotation {
        narrative,
        challenges: text("challenges"),
        indexes: v
            .get("indexes")
            .and_then(Value::as_object)
            .cloned()
            .unwrap_or_default(),
        metrics,
    })
}

/// Annotates one paper. Only measured metrics that canonicalize into `repo`
/// are extracted; everything else is reported in the audit.
pub fn annotate_paper(
    llm: &Llm,
    fulltext: &str,
    repo: &MetricRepository,
) -> Result<(Annotation, Vec<StageWarning>), LlmError> {
    if fulltext.trim().is_empty() {
        return Err(LlmError::Precondition("full text must not be empty".into()));
    }
    let stage = Stage::AnnotatePaper;
    let candidates = repo
        .records()
        .iter()
        .map(|r| format!("- {}: {}", r.name, r.definition))
        .collect::<Vec<_>>()
        .join("\n");
    let vars: BTreeMap<String, String> = [
        ("candidates", candidates),
        ("definitions", crate::llm::stages::definitions_text()),
        ("fulltext", fulltext.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let raw = llm.session().call_with(stage, vars, parse_raw)?;

    let mut warnings = Vec::new();
    let indexes = crate::llm::stages::index_set_from_value(stage, &raw.indexes, &mut warnings);

    let mut extracted: Vec<ExtractedMetric> = Vec::new();
    let mut audit = Vec::new();
    for m in &raw.metrics {
        let mut issues = Vec::new();
        if m.evidence != EvidenceKind::Measured {
            issues.push(AuditIssue::NotMeasured { evidence: m.evidence });
        }
        let in_list = repo.records().iter().any(|r| normalize_name(&r.name) == normalize_name(&m.name));
        let canonical = repo.canonicalize(&m.name);
        if !in_list {
            issues.push(AuditIssue::OutOfCandidateList {
                case: match canonical {
                    Some(c) => OutOfListCase::Reworded { canonical: c.to_string() },
                    None => OutOfListCase::Invented,
                },
            });
        }
        if !issues.is_empty() {
            audit.push(AuditEntry {
                identified: m.name.clone(),
                issues,
            });
        }
        let Some(canonical) = canonical else { continue };
        if m.evidence != EvidenceKind::Measured || extracted.iter().any(|e| e.metric == canonical) {
            continue;
        }
        let method = m.method.as_deref().and_then(|s| {
            let parsed = MetricMethod::parse_loose(s);
            if parsed.is_none() {
                warnings.push(StageWarning::new(
                    stage,
                    "unknown_method",
                    format!("{canonical}: ignored collection method `{s}`"),
                ));
            }
            parsed
        });
        extracted.push(ExtractedMetric {
            metric: canonical.to_string(),
            method,
            usage: m.usage.clone(),
        });
    }

    Ok((
        Annotation {
            narrative: raw.narrative,
            challenges: raw.challenges,
            indexes,
            extracted,
            identified: raw.metrics.len(),
            audit,
        },
        warnings,
    ))
}

/// Accuracy tallies over a batch of annotated papers. A metric is accurate
/// when it was measured and worded as in the candidate list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub papers: usize,
    pub identified: usize,
    pub not_measured: usize,
    pub out_of_candidate_list: usize,
    /// Metrics failing both requirements.
    pub overlapping: usize,
    pub inferred_from_description: usize,
    pub synthesized_from_results: usize,
    pub recommended_not_used: usize,
    pub reworded: usize,
    pub invented: usize,
}

impl AuditReport {
    pub fn add(&mut self, annotation: &Annotation) {
        self.papers += 1;
        self.identified += annotation.identified;
        for entry in &annotation.audit {
            let mut measured = true;
            let mut listed = true;
            for issue in &entry.issues {
                match issue {
                    AuditIssue::NotMeasured { evidence } => {
                        measured = false;
                        match evidence {
                            EvidenceKind::InferredFromDescription => self.inferred_from_description += 1,
                            EvidenceKind::SynthesizedFromResults => self.synthesized_from_results += 1,
                            EvidenceKind::RecommendedNotUsed => self.recommended_not_used += 1,
                            EvidenceKind::Measured => {}
                        }
                    }
                    AuditIssue::OutOfCandidateList { case } => {
                        listed = false;
                        match case {
                            OutOfListCase::Reworded { .. } => self.reworded += 1,
                            OutOfListCase::Invented => self.invented += 1,
                        }
                    }
                }
            }
            self.not_measured += usize::from(!measured);
            self.out_of_candidate_list += usize::from(!listed);
            self.overlapping += usize::from(!measured && !listed);
        }
    }

    pub fn from_annotations<'a>(annotations: impl IntoIterator<Item = &'a Annotation>) -> Self {
        let mut report = AuditReport::default();
        for a in annotations {
            report.add(a);
        }
        report
    }

    pub fn measured(&self) -> usize {
        self.identified - self.not_measured
    }

    pub fn in_candidate_list(&self) -> usize {
        self.identified - self.out_of_candidate_list
    }

    pub fn accurate(&self) -> usize {
        self.identified + self.overlapping - self.not_measured - self.out_of_candidate_list
    }

    fn rate(&self, n: usize) -> f64 {
        if self.identified == 0 {
            0.0
        } else {
            n as f64 / self.identified as f64
        }
    }

    pub fn measured_rate(&self) -> f64 {
        self.rate(self.measured())
    }

    pub fn in_candidate_list_rate(&self) -> f64 {
        self.rate(self.in_candidate_list())
    }

    pub fn accurate_rate(&self) -> f64 {
        self.rate(self.accurate())
    }
}
