//! The ten descriptive index categories used to characterize a project or a paper.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the ten descriptive index categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexCategory {
    Paradigms,
    ApplicationDomain,
    Modality,
    SystemFeatures,
    DesignNovelty,
    DesignMethods,
    HumanAiRelationshipTypes,
    Stakeholders,
    SocialScale,
    TheoreticalFrameworks,
}

impl IndexCategory {
    pub const ALL: [IndexCategory; 10] = [
        IndexCategory::Paradigms,
        IndexCategory::ApplicationDomain,
        IndexCategory::Modality,
        IndexCategory::SystemFeatures,
        IndexCategory::DesignNovelty,
        IndexCategory::DesignMethods,
        IndexCategory::HumanAiRelationshipTypes,
        IndexCategory::Stakeholders,
        IndexCategory::SocialScale,
        IndexCategory::TheoreticalFrameworks,
    ];

    pub fn key(self) -> &'static str {
        match self {
            IndexCategory::Paradigms => "paradigms",
            IndexCategory::ApplicationDomain => "application_domain",
            IndexCategory::Modality => "modality",
            IndexCategory::SystemFeatures => "system_features",
            IndexCategory::DesignNovelty => "design_novelty",
            IndexCategory::DesignMethods => "design_methods",
            IndexCategory::HumanAiRelationshipTypes => "human_ai_relationship_types",
            IndexCategory::Stakeholders => "stakeholders",
            IndexCategory::SocialScale => "social_scale",
            IndexCategory::TheoreticalFrameworks => "theoretical_frameworks",
        }
    }

    /// Short definition handed to the model when it generates index values.
    pub fn definition(self) -> &'static str {
        match self {
            IndexCategory::Paradigms => {
                "Dyadic (one-on-one interaction between a human end user and AI) or \
                 Polyadic (AI mediating interaction among multiple end users)."
            }
            IndexCategory::ApplicationDomain => {
                "The field or sector the system is applied in, e.g. education, healthcare, finance."
            }
            IndexCategory::Modality => {
                "The channel of interaction: text-based, voice-based, multi-modal, visual, \
                 sensor-based or haptic."
            }
            IndexCategory::SystemFeatures => {
                "Characteristics of the system such as embodiment, level of intelligence, \
                 autonomy, adaptability and learning capabilities."
            }
            IndexCategory::DesignNovelty => {
                "What is unique or innovative about the design compared with existing technology."
            }
            IndexCategory::DesignMethods => {
                "Systematic design approaches used, e.g. participatory design, user-centered \
                 design, Wizard of Oz, research through design."
            }
            IndexCategory::HumanAiRelationshipTypes => {
                "The relationship between people and the system: assistant, collaborator, tool, advisor."
            }
            IndexCategory::Stakeholders => {
                "People with an interest in or affected by the system: primary, secondary and \
                 tertiary users, designers, organizations, policymakers, support teams, researchers."
            }
            IndexCategory::SocialScale => {
                "The scale the system operates at: individual, group, organizational, societal."
            }
            IndexCategory::TheoreticalFrameworks => {
                "Theories and concepts underpinning the system, from cognitive science, social \
                 science, computer science and so on."
            }
        }
    }
}

impl fmt::Display for IndexCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for IndexCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        IndexCategory::ALL
            .into_iter()
            .find(|c| c.key() == wanted)
            .ok_or_else(|| format!("unknown index category `{s}`"))
    }
}

/// Allowed values of the `paradigms` category.
pub const PARADIGM_VALUES: [&str; 2] = ["Dyadic", "Polyadic"];

/// Values for each of the ten index categories. Every category is always
/// present in the serialized form, possibly as an empty list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSet {
    #[serde(default)]
    pub paradigms: Vec<String>,
    #[serde(default)]
    pub application_domain: Vec<String>,
    #[serde(default)]
    pub modality: Vec<String>,
    #[serde(default)]
    pub system_features: Vec<String>,
    #[serde(default)]
    pub design_novelty: Vec<String>,
    #[serde(default)]
    pub design_methods: Vec<String>,
    #[serde(default)]
    pub human_ai_relationship_types: Vec<String>,
    #[serde(default)]
    pub stakeholders: Vec<String>,
    #[serde(default)]
    pub social_scale: Vec<String>,
    #[serde(default)]
    pub theoretical_frameworks: Vec<String>,
}

impl IndexSet {
    pub fn get(&self, category: IndexCategory) -> &[String] {
        match category {
            IndexCategory::Paradigms => &self.paradigms,
            IndexCategory::ApplicationDomain => &self.application_domain,
            IndexCategory::Modality => &self.modality,
            IndexCategory::SystemFeatures => &self.system_features,
            IndexCategory::DesignNovelty => &self.design_novelty,
            IndexCategory::DesignMethods => &self.design_methods,
            IndexCategory::HumanAiRelationshipTypes => &self.human_ai_relationship_types,
            IndexCategory::Stakeholders => &self.stakeholders,
            IndexCategory::SocialScale => &self.social_scale,
            IndexCategory::TheoreticalFrameworks => &self.theoretical_frameworks,
        }
    }

    pub fn get_mut(&mut self, category: IndexCategory) -> &mut Vec<String> {
        match category {
            IndexCategory::Paradigms => &mut self.paradigms,
            IndexCategory::ApplicationDomain => &mut self.application_domain,
            IndexCategory::Modality => &mut self.modality,
            IndexCategory::SystemFeatures => &mut self.system_features,
            IndexCategory::DesignNovelty => &mut self.design_novelty,
            IndexCategory::DesignMethods => &mut self.design_methods,
            IndexCategory::HumanAiRelationshipTypes => &mut self.human_ai_relationship_types,
            IndexCategory::Stakeholders => &mut self.stakeholders,
            IndexCategory::SocialScale => &mut self.social_scale,
            IndexCategory::TheoreticalFrameworks => &mut self.theoretical_frameworks,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (IndexCategory, &[String])> {
        IndexCategory::ALL.into_iter().map(move |c| (c, self.get(c)))
    }

    pub fn is_empty(&self) -> bool {
        self.iter().all(|(_, v)| v.is_empty())
    }

    /// Paradigm values outside {Dyadic, Polyadic}.
    pub fn invalid_paradigms(&self) -> Vec<&str> {
        self.paradigms
            .iter()
            .filter(|v| canonical_paradigm(v).is_none())
            .map(String::as_str)
            .collect()
    }

    /// Adds `value` to `category` unless an equal value (case-insensitive) is present.
    /// Returns whether the set changed.
    pub fn insert(&mut self, category: IndexCategory, value: &str) -> bool {
        let slot = self.get_mut(category);
        let value = value.trim();
        if value.is_empty() || slot.iter().any(|v| v.eq_ignore_ascii_case(value)) {
            return false;
        }
        slot.push(value.to_string());
        true
    }

    /// Deterministic text form used for embedding and prompting:
    /// one `category: v1, v2` line per category, in fixed category order.
    pub fn canonical_text(&self) -> String {
        self.iter()
            .map(|(c, values)| format!("{}: {}", c.key(), values.join(", ")))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Maps a paradigm value onto its canonical spelling, case-insensitively.
pub fn canonical_paradigm(value: &str) -> Option<&'static str> {
    PARADIGM_VALUES
        .into_iter()
        .find(|p| p.eq_ignore_ascii_case(value.trim()))
}
