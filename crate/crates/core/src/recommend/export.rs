use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Generated, MetricDiff, OutcomeView, RecommendedMetric};
use crate::corpus::{IndexSet, SCHEMA_VERSION};
use crate::llm::{FilteredRisk, PROMPT_VERSION};

pub const EXPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectStatus {
    Brainstorming,
    DesigningTheStudy,
    Implementing,
    Evaluating,
}

/// What the user typed on the landing page.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectInputs {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub statuses: BTreeSet<ProjectStatus>,
    pub description: String,
    #[serde(default)]
    pub initial_plan: String,
    #[serde(default)]
    pub initial_outcome: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentVersions {
    pub uxeval: String,
    pub prompts: String,
    pub corpus_schema: u32,
    pub export_schema: u32,
}

impl Default for ComponentVersions {
    fn default() -> Self {
        ComponentVersions {
            uxeval: env!("CARGO_PKG_VERSION").to_string(),
            prompts: PROMPT_VERSION.to_string(),
            corpus_schema: SCHEMA_VERSION,
            export_schema: EXPORT_SCHEMA,
        }
    }
}

/// The exported evaluation-planning record. Carries no ids or timestamps,
/// so identical sessions export identical bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportArtifact {
    pub project: ProjectInputs,
    pub indexes: IndexSet,
    pub metrics: Vec<RecommendedMetric>,
    pub outcomes: Vec<OutcomeView>,
    pub risks: Vec<FilteredRisk>,
    pub generated: Option<Generated>,
    pub diff_history: Vec<MetricDiff>,
    pub versions: ComponentVersions,
}

impl ExportArtifact {
    pub fn new(
        project: ProjectInputs,
        indexes: IndexSet,
        metrics: Vec<RecommendedMetric>,
        outcomes: Vec<OutcomeView>,
        risks: Vec<FilteredRisk>,
        generated: Option<Generated>,
        diff_history: Vec<MetricDiff>,
    ) -> Self {
        ExportArtifact {
            project,
            indexes,
            metrics,
            outcomes,
            risks,
            generated,
            diff_history,
            versions: ComponentVersions::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifact serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let title = if self.project.name.is_empty() {
            "UX evaluation plan"
        } else {
            self.project.name.as_str()
        };
        let _ = writeln!(s, "# {title}\n");
        let _ = writeln!(s, "## Project\n\n{}\n", self.project.description);
        if !self.project.initial_plan.is_empty() {
            let _ = writeln!(s, "**Initial plan:** {}\n", self.project.initial_plan);
        }
        if !self.project.initial_outcome.is_empty() {
            let _ = writeln!(s, "**Expected outcome:** {}\n", self.project.initial_outcome);
        }

        s.push_str("## Indexes\n\n");
        for (category, values) in self.indexes.iter() {
            if !values.is_empty() {
                let _ = writeln!(s, "- **{category}:** {}", values.join(", "));
            }
        }
        s.push('\n');

        s.push_str("## Metrics\n\n");
        for m in &self.metrics {
            let methods: Vec<String> = m.methods.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "### {}\n\n{}\n", m.name, m.definition);
            if !methods.is_empty() {
                let _ = writeln!(s, "Methods: {}\n", methods.join(", "));
            }
            for u in &m.usages {
                let _ = writeln!(s, "- {} ({})", u.metric_usage, u.paper_title);
            }
            if !m.usages.is_empty() {
                s.push('\n');
            }
        }

        if !self.outcomes.is_empty() {
            s.push_str("## Prior outcomes\n\n");
            for o in &self.outcomes {
                let _ = writeln!(
                    s,
                    "- {} ({}; {})",
                    o.outcome_achieved,
                    o.paper_title,
                    o.associated_metrics.join(", ")
                );
            }
            s.push('\n');
        }

        if !self.risks.is_empty() {
            s.push_str("## Risks\n\n");
            for r in &self.risks {
                let _ = writeln!(s, "- {} ([source]({})): {}", r.risk, r.source_url, r.rationale);
            }
            s.push('\n');
        }

        if let Some(g) = &self.generated {
            let _ = writeln!(s, "## Evaluation plan\n\n{}\n", g.plan);
            let _ = writeln!(s, "## Expected UX outcome\n\n{}\n", g.ux_outcome.text);
        }

        if !self.diff_history.is_empty() {
            s.push_str("## Metric changes\n\n");
            for (i, d) in self.diff_history.iter().enumerate() {
                let list = |set: &BTreeSet<String>| {
                    if set.is_empty() {
                        "-".to_string()
                    } else {
                        set.iter().cloned().collect::<Vec<_>>().join(", ")
                    }
                };
                let _ = writeln!(
                    s,
                    "{}. added: {}; retained: {}; removed: {}",
                    i + 1,
                    list(&d.added),
                    list(&d.retained),
                    list(&d.removed)
                );
            }
            s.push('\n');
        }

        let v = &self.versions;
        let _ = writeln!(
            s,
            "---\nuxeval {}, prompts v{}, corpus schema {}, export schema {}",
            v.uxeval, v.prompts, v.corpus_schema, v.export_schema
        );
        s
    }
}
