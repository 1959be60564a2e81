use std::collections::BTreeMap;
use std::path::Path;

use super::{LlmError, Stage};

/// Version of the bundled prompt templates, recorded in exported artifacts.
pub const PROMPT_VERSION: &str = "1";

fn bundled(stage: Stage) -> &'static str {
    match stage {
        Stage::GenerateIndexes => include_str!("../../prompts/generate_indexes.txt"),
        Stage::SuggestIndexValues => include_str!("../../prompts/suggest_index_values.txt"),
        Stage::FilterMetrics => include_str!("../../prompts/filter_metrics.txt"),
        Stage::FilterRisks => include_str!("../../prompts/filter_risks.txt"),
        Stage::GeneratePlan => include_str!("../../prompts/generate_plan.txt"),
        Stage::GenerateUxOutcome => include_str!("../../prompts/generate_ux_outcome.txt"),
        Stage::AnnotatePaper => include_str!("../../prompts/annotate_paper.txt"),
    }
}

/// Templates with `{{name}}` placeholders, one per stage.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<Stage, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            templates: Stage::ALL.into_iter().map(|s| (s, bundled(s).to_string())).collect(),
        }
    }
}

impl PromptSet {
    /// Bundled templates, replaced by any `<stage>.txt` found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, LlmError> {
        let mut set = PromptSet::default();
        for stage in Stage::ALL {
            let path = dir.join(format!("{stage}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))?;
                set.templates.insert(stage, text);
            }
        }
        Ok(set)
    }

    pub fn template(&self, stage: Stage) -> &str {
        &self.templates[&stage]
    }

    pub fn placeholders(&self, stage: Stage) -> Vec<String> {
        let mut out = Vec::new();
        let mut rest = self.template(stage);
        while let Some(start) = rest.find("{{") {
            let after = &rest[start + 2..];
            match after.find("}}") {
                Some(end) => {
                    let name = after[..end].trim().to_string();
                    if !out.contains(&name) {
                        out.push(name);
                    }
                    rest = &after[end + 2..];
                }
                None => break,
            }
        }
        out
    }

    /// Fills every placeholder; a placeholder without a value is an error.
    /// A `format_error` input not referenced by the template is appended.
    pub fn render(&self, stage: Stage, input: &BTreeMap<String, String>) -> Result<String, LlmError> {
        let mut text = self.template(stage).to_string();
        let names = self.placeholders(stage);
        for name in &names {
            let value = input.get(name).ok_or_else(|| {
                LlmError::Template(format!("{stage}: placeholder `{name}` has no value"))
            })?;
            text = text.replace(&format!("{{{{{name}}}}}"), value);
        }
        if let Some(note) = input.get("format_error") {
            if !names.iter().any(|n| n == "format_error") {
                text.push('\n');
                text.push_str(note);
            }
        }
        Ok(text)
    }
}
