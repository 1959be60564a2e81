//! The fixed metric-usage sentence template.

use serde::{Deserialize, Serialize};

use super::CorpusError;

const PREFIX: &str = "This paper uses the ";
const METRIC_MARK: &str = " metric to evaluate users' ";
const TOWARDS_MARK: &str = " towards ";
const FINDING_MARK: &str = ". It was found that ";
const SUFFIX: &str = ".";

/// The four slots of a usage sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricUsageParts {
    pub metric: String,
    pub aspect: String,
    pub technology: String,
    pub finding: String,
}

/// Fills the usage template:
/// `This paper uses the <metric> metric to evaluate users' <aspect> towards <technology>. It was found that <finding>.`
///
/// Fields that contain a later template marker are rejected because the
/// sentence could not be split back into the same parts.
pub fn format_metric_usage(
    metric: &str,
    aspect: &str,
    technology: &str,
    finding: &str,
) -> Result<String, CorpusError> {
    for (field, value) in [
        ("metric", metric),
        ("aspect", aspect),
        ("technology", technology),
        ("finding", finding),
    ] {
        if value.trim().is_empty() {
            return Err(CorpusError::EmptyField(field));
        }
    }
    let sentence = format!(
        "{PREFIX}{metric}{METRIC_MARK}{aspect}{TOWARDS_MARK}{technology}{FINDING_MARK}{finding}{SUFFIX}"
    );
    // A marker inside a field (or straddling a field boundary) shifts the split points.
    match parse_metric_usage(&sentence) {
        Some(p) if p.metric == metric && p.aspect == aspect && p.technology == technology => {
            Ok(sentence)
        }
        Some(p) if p.metric != metric => Err(CorpusError::AmbiguousField("metric")),
        Some(p) if p.aspect != aspect => Err(CorpusError::AmbiguousField("aspect")),
        _ => Err(CorpusError::AmbiguousField("technology")),
    }
}

/// Splits a usage sentence on the template markers (never on bare periods).
/// Returns `None` for free-form text that does not follow the template.
pub fn parse_metric_usage(text: &str) -> Option<MetricUsageParts> {
    let body = text.strip_prefix(PREFIX)?.strip_suffix(SUFFIX)?;
    let (metric, rest) = body.split_once(METRIC_MARK)?;
    let (aspect, rest) = rest.split_once(TOWARDS_MARK)?;
    let (technology, finding) = rest.split_once(FINDING_MARK)?;
    if [metric, aspect, technology, finding].iter().any(|s| s.is_empty()) {
        return None;
    }
    Some(MetricUsageParts {
        metric: metric.to_string(),
        aspect: aspect.to_string(),
        technology: technology.to_string(),
        finding: finding.to_string(),
    })
}
