use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Llm, LlmError, Stage, StageWarning};
use crate::corpus::{
    canonical_paradigm, normalize_name, IndexCategory, IndexSet, MetricMethod, MetricRepository,
    OutcomeRef, RiskRef,
};

/// Upper bound on new values suggested per index category.
pub const MAX_SUGGESTIONS_PER_CATEGORY: usize = 3;

pub(crate) fn definitions_text() -> String {
    IndexCategory::ALL
        .into_iter()
        .map(|c| format!("- {}: {}", c.key(), c.definition()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn input(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn bullet_list(items: impl IntoIterator<Item = String>) -> String {
    let lines: Vec<String> = items.into_iter().map(|s| format!("- {s}")).collect();
    if lines.is_empty() {
        "(none)".into()
    } else {
        lines.join("\n")
    }
}

fn string_values(v: &Value) -> Vec<String> {
    match v {
        Value::String(s) => vec![s.trim().to_string()],
        Value::Array(items) => items
            .iter()
            .filter_map(|i| i.as_str().map(|s| s.trim().to_string()))
            .collect(),
        _ => Vec::new(),
    }
    .into_iter()
    .filter(|s| !s.is_empty())
    .collect()
}

/// Reads a category-keyed object into an [`IndexSet`], dropping unknown
/// categories and invalid paradigm values with warnings.
pub(crate) fn index_set_from_value(
    stage: Stage,
    obj: &serde_json::Map<String, Value>,
    warnings: &mut Vec<StageWarning>,
) -> IndexSet {
    let mut set = IndexSet::default();
    for (key, values) in obj {
        let Ok(category) = key.parse::<IndexCategory>() else {
            warnings.push(StageWarning::new(
                stage,
                "unknown_category",
                format!("dropped unknown index category `{key}`"),
            ));
            continue;
        };
        for value in string_values(values) {
            if category == IndexCategory::Paradigms {
                match canonical_paradigm(&value) {
                    Some(p) => {
                        set.insert(category, p);
                    }
                    None => warnings.push(StageWarning::new(
                        stage,
                        "invalid_paradigm",
                        format!("rejected paradigm value `{value}`; allowed: Dyadic, Polyadic"),
                    )),
                }
            } else {
                set.insert(category, &value);
            }
        }
    }
    set
}

fn parse_index_object(stage: Stage, v: &Value) -> Result<(IndexSet, Vec<StageWarning>), String> {
    let obj = v
        .get("indexes")
        .unwrap_or(v)
        .as_object()
        .ok_or("expected a JSON object keyed by index category")?;
    let mut warnings = Vec::new();
    let set = index_set_from_value(stage, obj, &mut warnings);
    Ok((set, warnings))
}

fn examples_text(examples: &[IndexSet]) -> String {
    if examples.is_empty() {
        return "(none)".into();
    }
    examples
        .iter()
        .enumerate()
        .map(|(i, e)| format!("Example {}:\n{}", i + 1, e.canonical_text()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Characterizes a project description along the ten index categories.
pub fn generate_indexes(
    llm: &Llm,
    description: &str,
    examples: &[IndexSet],
) -> Result<(IndexSet, Vec<StageWarning>), LlmError> {
    if description.trim().is_empty() {
        return Err(LlmError::Precondition("description must not be empty".into()));
    }
    let stage = Stage::GenerateIndexes;
    let vars = input(&[
        ("description", description.to_string()),
        ("definitions", definitions_text()),
        ("examples", examples_text(examples)),
    ]);
    llm.session().call_with(stage, vars, |v| parse_index_object(stage, v))
}

/// Up to three new values per category that are not already selected.
pub fn suggest_index_values(
    llm: &Llm,
    current: &IndexSet,
    description: &str,
) -> Result<(IndexSet, Vec<StageWarning>), LlmError> {
    let stage = Stage::SuggestIndexValues;
    let vars = input(&[
        ("description", description.to_string()),
        ("current_indexes", current.canonical_text()),
        ("definitions", definitions_text()),
    ]);
    let (raw, mut warnings) = llm.session().call_with(stage, vars, |v| parse_index_object(stage, v))?;
    let mut out = IndexSet::default();
    for (category, values) in raw.iter() {
        let existing = current.get(category);
        let fresh: Vec<&String> = values
            .iter()
            .filter(|v| !existing.iter().any(|e| e.eq_ignore_ascii_case(v)))
            .collect();
        if fresh.len() > MAX_SUGGESTIONS_PER_CATEGORY {
            warnings.push(StageWarning::new(
                stage,
                "truncated",
                format!(
                    "{category}: kept {MAX_SUGGESTIONS_PER_CATEGORY} of {} suggestions",
                    fresh.len()
                ),
            ));
        }
        for v in fresh.into_iter().take(MAX_SUGGESTIONS_PER_CATEGORY) {
            out.insert(category, v);
        }
    }
    Ok((out, warnings))
}

fn named_items(v: &Value, field: &str) -> Result<Vec<Value>, String> {
    let list = match v {
        Value::Array(items) => items,
        Value::Object(obj) => obj
            .get(field)
            .and_then(Value::as_array)
            .ok_or_else(|| format!("expected `{field}` array"))?,
        _ => return Err(format!("expected an object with a `{field}` array")),
    };
    Ok(list.clone())
}

/// Narrows `candidates` to the model's selection, in the model's order.
/// Names that do not canonicalize into `candidates` are dropped.
pub fn filter_metrics(
    llm: &Llm,
    candidates: &BTreeSet<String>,
    description: &str,
    indexes: &IndexSet,
    repo: &MetricRepository,
) -> Result<(Vec<String>, Vec<StageWarning>), LlmError> {
    if candidates.is_empty() {
        return Err(LlmError::Precondition("candidate metric set is empty".into()));
    }
    let stage = Stage::FilterMetrics;
    let candidate_text = candidates
        .iter()
        .map(|name| {
            let def = repo.get(name).map(|r| r.definition.as_str()).unwrap_or("");
            format!("- {name}: {def}")
        })
        .collect::<Vec<_>>()
        .join("\n");
    let vars = input(&[
        ("description", description.to_string()),
        ("indexes", indexes.canonical_text()),
        ("candidates", candidate_text),
    ]);
    let names = llm.session().call_with(stage, vars, |v| {
        Ok(named_items(v, "metrics")?
            .iter()
            .filter_map(|item| match item {
                Value::String(s) => Some(s.clone()),
                Value::Object(o) => o
                    .get("name")
                    .or_else(|| o.get("metric"))
                    .and_then(Value::as_str)
                    .map(str::to_string),
                _ => None,
            })
            .collect::<Vec<String>>())
    })?;

    let mut kept = Vec::new();
    let mut warnings = Vec::new();
    for name in names {
        match repo.canonicalize(&name).filter(|c| candidates.contains(*c)) {
            Some(c) if !kept.iter().any(|k: &String| k == c) => kept.push(c.to_string()),
            Some(_) => {}
            None => warnings.push(StageWarning::new(
                stage,
                "hallucination_guard",
                format!("dropped `{name}`: not in the candidate list"),
            )),
        }
    }
    Ok((kept, warnings))
}

/// A risk offered to the model, with where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskCandidate {
    pub risk_ref: RiskRef,
    pub risk: String,
    pub source_url: String,
}

/// A risk the model kept, with its one-line rationale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilteredRisk {
    pub risk_ref: RiskRef,
    pub risk: String,
    pub rationale: String,
    pub source_url: String,
}

/// Keeps the candidate risks relevant to the described system. Issues no
/// call when there are no candidates.
pub fn filter_risks(
    llm: &Llm,
    candidates: &[RiskCandidate],
    description: &str,
) -> Result<(Vec<FilteredRisk>, Vec<StageWarning>), LlmError> {
    if candidates.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let stage = Stage::FilterRisks;
    let listing = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| format!("- R{}: {}", i + 1, c.risk))
        .collect::<Vec<_>>()
        .join("\n");
    let vars = input(&[("description", description.to_string()), ("risks", listing)]);
    let picks = llm.session().call_with(stage, vars, |v| {
        Ok(named_items(v, "risks")?
            .iter()
            .map(|item| match item {
                Value::String(s) => (None, Some(s.clone()), String::new()),
                other => (
                    other.get("id").and_then(Value::as_str).map(str::to_string),
                    other.get("risk").and_then(Value::as_str).map(str::to_string),
                    other
                        .get("rationale")
                        .and_then(Value::as_str)
                        .unwrap_or("")
                        .to_string(),
                ),
            })
            .collect::<Vec<_>>())
    })?;

    let mut kept: Vec<FilteredRisk> = Vec::new();
    let mut warnings = Vec::new();
    for (id, text, rationale) in picks {
        let by_id = id
            .as_deref()
            .and_then(|s| s.trim().trim_start_matches(['R', 'r']).parse::<usize>().ok())
            .and_then(|n| n.checked_sub(1))
            .and_then(|i| candidates.get(i));
        let by_text = text.as_deref().and_then(|t| {
            let key = normalize_name(t);
            candidates.iter().find(|c| normalize_name(&c.risk) == key)
        });
        let Some(candidate) = by_id.or(by_text) else {
            warnings.push(StageWarning::new(
                stage,
                "hallucination_guard",
                format!(
                    "dropped risk {}: not among the candidate risks",
                    text.or(id).unwrap_or_default()
                ),
            ));
            continue;
        };
        if kept.iter().any(|k| k.risk_ref == candidate.risk_ref) {
            continue;
        }
        kept.push(FilteredRisk {
            risk_ref: candidate.risk_ref.clone(),
            risk: candidate.risk.clone(),
            rationale: rationale.lines().next().unwrap_or("").trim().to_string(),
            source_url: candidate.source_url.clone(),
        });
    }
    Ok((kept, warnings))
}

/// A selected metric as presented to the plan prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanMetric {
    pub name: String,
    pub definition: String,
    pub methods: Vec<MetricMethod>,
    pub usages: Vec<String>,
}

fn plan_metrics_text(metrics: &[PlanMetric]) -> String {
    metrics
        .iter()
        .map(|m| {
            let methods: Vec<String> = m.methods.iter().map(|x| x.to_string()).collect();
            let mut s = format!(
                "- {}: {}\n  methods: {}",
                m.name,
                m.definition,
                if methods.is_empty() { "(none)".into() } else { methods.join(", ") }
            );
            for u in &m.usages {
                s.push_str(&format!("\n  usage: {u}"));
            }
            s
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn missing_metrics<'a>(plan: &str, metrics: &'a [PlanMetric]) -> Vec<&'a str> {
    let lower = plan.to_lowercase();
    metrics
        .iter()
        .map(|m| m.name.as_str())
        .filter(|name| !lower.contains(&name.to_lowercase()))
        .collect()
}

fn text_field(v: &Value, field: &str) -> Result<String, String> {
    let text = match v {
        Value::String(s) => s.clone(),
        other => other
            .get(field)
            .and_then(Value::as_str)
            .ok_or_else(|| format!("expected `{field}` string"))?
            .to_string(),
    };
    if text.trim().is_empty() {
        return Err(format!("`{field}` is empty"));
    }
    Ok(text)
}

/// Writes the evaluation plan. Every selected metric must be named in the
/// plan; otherwise one corrective re-prompt is issued, then a warning.
pub fn generate_plan(
    llm: &Llm,
    description: &str,
    initial_plan: &str,
    metrics: &[PlanMetric],
    outcomes: &[String],
) -> Result<(String, Vec<StageWarning>), LlmError> {
    if metrics.is_empty() {
        return Err(LlmError::Precondition("at least one metric must be selected".into()));
    }
    let stage = Stage::GeneratePlan;
    let mut vars = input(&[
        ("description", description.to_string()),
        ("initial_plan", initial_plan.to_string()),
        ("metrics", plan_metrics_text(metrics)),
        ("outcomes", bullet_list(outcomes.iter().cloned())),
        ("correction", String::new()),
    ]);
    let mut budget = llm.session();
    let mut plan = budget.call_with(stage, vars.clone(), |v| text_field(v, "plan"))?;
    let mut missing = missing_metrics(&plan, metrics);
    if !missing.is_empty() && budget.remaining() > 0 {
        vars.insert(
            "correction".into(),
            format!(
                "The previous plan did not mention these selected metrics: {}. Include every one of them by name.",
                missing.join(", ")
            ),
        );
        plan = budget.call_with(stage, vars, |v| text_field(v, "plan"))?;
        missing = missing_metrics(&plan, metrics);
    }
    let mut warnings = Vec::new();
    if !missing.is_empty() {
        warnings.push(StageWarning::new(
            stage,
            "plan_missing_metrics",
            format!("plan does not mention: {}", missing.join(", ")),
        ));
    }
    Ok((plan, warnings))
}

/// Which selected outcomes and accepted risks fed a generated statement.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub outcomes: Vec<OutcomeRef>,
    pub risks: Vec<RiskRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UxOutcome {
    pub text: String,
    pub provenance: Provenance,
}

/// Writes the expected UX outcome from metrics, chosen prior outcomes and risks.
pub fn generate_ux_outcome(
    llm: &Llm,
    description: &str,
    initial_outcome: &str,
    metrics: &[String],
    outcomes: &[(OutcomeRef, String)],
    risks: &[(RiskRef, String)],
) -> Result<UxOutcome, LlmError> {
    if metrics.is_empty() {
        return Err(LlmError::Precondition("at least one metric must be selected".into()));
    }
    let vars = input(&[
        ("description", description.to_string()),
        ("initial_outcome", initial_outcome.to_string()),
        ("metrics", bullet_list(metrics.iter().cloned())),
        ("outcomes", bullet_list(outcomes.iter().map(|(r, t)| format!("[{r}] {t}")))),
        ("risks", bullet_list(risks.iter().map(|(r, t)| format!("[{r}] {t}")))),
    ]);
    let text = llm
        .session()
        .call_with(Stage::GenerateUxOutcome, vars, |v| text_field(v, "ux_outcome"))?;
    Ok(UxOutcome {
        text,
        provenance: Provenance {
            outcomes: outcomes.iter().map(|(r, _)| r.clone()).collect(),
            risks: risks.iter().map(|(r, _)| r.clone()).collect(),
        },
    })
}
