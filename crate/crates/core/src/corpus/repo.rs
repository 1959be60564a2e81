//! Metric repository and name canonicalization.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// A UX metric as stored in the repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRecord {
    pub name: String,
    pub category: String,
    pub definition: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

/// Lowercases and collapses runs of whitespace. Used for every
/// case/whitespace-insensitive comparison of metric names.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// The set of candidate metrics, with an explicit alias table.
#[derive(Debug, Clone, Default)]
pub struct MetricRepository {
    records: Vec<MetricRecord>,
    exact: HashMap<String, usize>,
    by_name: HashMap<String, usize>,
    by_alias: HashMap<String, usize>,
}

impl MetricRepository {
    /// Builds the lookup tables, rejecting duplicate names and aliases that
    /// would map to more than one metric.
    pub fn new(records: Vec<MetricRecord>) -> Result<Self, CorpusError> {
        let mut repo = MetricRepository::default();
        for (i, rec) in records.iter().enumerate() {
            let key = normalize_name(&rec.name);
            if key.is_empty() {
                return Err(CorpusError::InvalidRecord(format!("metric #{i} has an empty name")));
            }
            if repo.by_name.insert(key, i).is_some() {
                return Err(CorpusError::InvalidRecord(format!(
                    "duplicate metric name `{}` (names are case-insensitive)",
                    rec.name
                )));
            }
            repo.exact.insert(rec.name.clone(), i);
        }
        for (i, rec) in records.iter().enumerate() {
            for alias in &rec.aliases {
                let key = normalize_name(alias);
                if let Some(&owner) = repo.by_name.get(&key) {
                    if owner != i {
                        return Err(CorpusError::InvalidRecord(format!(
                            "alias `{alias}` of `{}` collides with metric `{}`",
                            rec.name, records[owner].name
                        )));
                    }
                    continue;
                }
                match repo.by_alias.insert(key, i) {
                    Some(other) if other != i => {
                        return Err(CorpusError::InvalidRecord(format!(
                            "alias `{alias}` maps to both `{}` and `{}`",
                            records[other].name, rec.name
                        )));
                    }
                    _ => {}
                }
            }
        }
        repo.records = records;
        Ok(repo)
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Canonical name for `name`: exact match first, then a
    /// case/whitespace-insensitive match on names, then on aliases.
    pub fn canonicalize(&self, name: &str) -> Option<&str> {
        if let Some(&i) = self.exact.get(name) {
            return Some(&self.records[i].name);
        }
        let key = normalize_name(name);
        self.by_name
            .get(&key)
            .or_else(|| self.by_alias.get(&key))
            .map(|&i| self.records[i].name.as_str())
    }

    /// Whether `name` resolved through the alias table rather than a name match.
    pub fn is_alias(&self, name: &str) -> bool {
        let key = normalize_name(name);
        !self.by_name.contains_key(&key) && self.by_alias.contains_key(&key)
    }

    pub fn get(&self, name: &str) -> Option<&MetricRecord> {
        let canonical = self.canonicalize(name)?;
        self.exact.get(canonical).map(|&i| &self.records[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(name: &str, aliases: &[&str]) -> MetricRecord {
        MetricRecord {
            name: name.into(),
            category: "test".into(),
            definition: format!("{name} definition"),
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn repo() -> MetricRepository {
        MetricRepository::new(vec![
            metric("length of utterance", &["utterance length"]),
            metric("trust", &[]),
        ])
        .unwrap()
    }

    #[test]
    fn alias_resolves_to_canonical() {
        assert_eq!(repo().canonicalize("utterance length"), Some("length of utterance"));
        assert_eq!(repo().canonicalize("  Utterance   LENGTH "), Some("length of utterance"));
        assert!(repo().is_alias("utterance length"));
    }

    #[test]
    fn case_fold() {
        assert_eq!(repo().canonicalize("Trust"), Some("trust"));
        assert!(!repo().is_alias("Trust"));
    }

    #[test]
    fn unknown_is_none() {
        assert_eq!(repo().canonicalize("transparency"), None);
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = MetricRepository::new(vec![metric("Trust", &[]), metric("trust", &[])]);
        assert!(err.is_err());
    }

    #[test]
    fn alias_shared_by_two_metrics_rejected() {
        let err = MetricRepository::new(vec![metric("a", &["x"]), metric("b", &["x"])]);
        assert!(err.is_err());
        let err = MetricRepository::new(vec![metric("a", &["b"]), metric("b", &[])]);
        assert!(err.is_err());
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let r = repo();
        for probe in ["utterance length", "TRUST", "length of utterance"] {
            let once = r.canonicalize(probe).unwrap();
            assert_eq!(r.canonicalize(once), Some(once));
        }
    }
}
