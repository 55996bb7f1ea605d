//! Known-vulnerability matching over an installed module tree.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::package::{parse_range, DependencyTree, SemVer, VersionRange};

#[derive(Debug, Error)]
pub enum AdvisoryError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed advisory database at {path}: {reason}")]
    MalformedDb { path: String, reason: String },
    #[error("duplicate advisory id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Advisory {
    pub id: String,
    pub module_name: String,
    pub title: String,
    pub vulnerable_versions: String,
    /// Range text, or `"none"` when no fix exists.
    pub patched_versions: String,
    pub cvss_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvss_vector: Option<String>,
    #[serde(default)]
    pub overview: String,
    #[serde(default)]
    pub recommendation: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
    #[serde(skip)]
    vulnerable: Option<VersionRange>,
}

impl Advisory {
    pub fn new(id: &str, module_name: &str, vulnerable_versions: &str, cvss_score: f64) -> Result<Self, AdvisoryError> {
        let mut a = Advisory {
            id: id.to_owned(),
            module_name: module_name.to_owned(),
            title: String::new(),
            vulnerable_versions: vulnerable_versions.to_owned(),
            patched_versions: "none".to_owned(),
            cvss_score,
            cvss_vector: None,
            overview: String::new(),
            recommendation: String::new(),
            extra: Map::new(),
            vulnerable: None,
        };
        a.validate(&a.id.clone())?;
        Ok(a)
    }

    fn validate(&mut self, at: &str) -> Result<(), AdvisoryError> {
        if !(0.0..=10.0).contains(&self.cvss_score) {
            return Err(AdvisoryError::MalformedDb {
                path: format!("{at}.cvss_score"),
                reason: format!("{} is outside 0.0..=10.0", self.cvss_score),
            });
        }
        let range = parse_range(&self.vulnerable_versions).map_err(|e| AdvisoryError::MalformedDb {
            path: format!("{at}.vulnerable_versions"),
            reason: e.to_string(),
        })?;
        self.vulnerable = Some(range);
        Ok(())
    }

    pub fn affects(&self, version: &SemVer) -> bool {
        self.vulnerable.as_ref().is_some_and(|r| r.satisfies(version))
    }
}

/// Immutable advisory set indexed by module name.
#[derive(Debug, Clone, Default)]
pub struct AdvisoryDb {
    advisories: Vec<Advisory>,
    by_name: HashMap<String, Vec<usize>>,
}

impl AdvisoryDb {
    pub fn from_advisories(advisories: Vec<Advisory>) -> Result<Self, AdvisoryError> {
        let mut ids = BTreeSet::new();
        let mut by_name: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, a) in advisories.iter().enumerate() {
            if !ids.insert(a.id.as_str()) {
                return Err(AdvisoryError::DuplicateId(a.id.clone()));
            }
            by_name.entry(a.module_name.clone()).or_default().push(i);
        }
        Ok(AdvisoryDb { advisories, by_name })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, AdvisoryError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let mut advisories: Vec<Advisory> =
            serde_path_to_error::deserialize(de).map_err(|e| AdvisoryError::MalformedDb {
                path: e.path().to_string(),
                reason: e.inner().to_string(),
            })?;
        for (i, a) in advisories.iter_mut().enumerate() {
            a.validate(&format!("[{i}]"))?;
        }
        Self::from_advisories(advisories)
    }

    pub fn len(&self) -> usize {
        self.advisories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advisories.is_empty()
    }

    pub fn advisories(&self) -> &[Advisory] {
        &self.advisories
    }

    pub fn candidates(&self, name: &str) -> impl Iterator<Item = &Advisory> {
        self.by_name
            .get(name)
            .into_iter()
            .flatten()
            .map(|&i| &self.advisories[i])
    }
}

pub fn load_db(source: &Path) -> Result<AdvisoryDb, AdvisoryError> {
    let bytes = fs::read(source).map_err(|e| AdvisoryError::Io {
        path: source.to_path_buf(),
        source: e,
    })?;
    AdvisoryDb::from_json(&bytes)
}

/// Advisories for `name` whose vulnerable range contains `version`, highest
/// CVSS first, ties broken by id.
pub fn match_module<'a>(db: &'a AdvisoryDb, name: &str, version: &SemVer) -> Vec<&'a Advisory> {
    let mut hits: Vec<&Advisory> = db.candidates(name).filter(|a| a.affects(version)).collect();
    hits.sort_by(|a, b| b.cvss_score.total_cmp(&a.cvss_score).then_with(|| a.id.cmp(&b.id)));
    hits
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdvisoryMatch {
    pub advisory_id: String,
    pub module_name: String,
    pub install_path: String,
    pub version: String,
    pub cvss_score: f64,
    pub title: String,
    pub patched_versions: String,
    /// Install paths from the application down to the matched module.
    pub via: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdvisoryReport {
    pub application_name: String,
    /// Counts every (instance, advisory) hit, so a module installed twice
    /// contributes twice.
    pub total_advisories: usize,
    pub unique_advisories: usize,
    pub highest_cvss: Option<f64>,
    pub matches: Vec<AdvisoryMatch>,
    pub warnings: Vec<String>,
}

/// Match every installed instance independently against the database.
pub fn audit_tree(db: &AdvisoryDb, tree: &DependencyTree, app_name: &str) -> AdvisoryReport {
    let mut matches = Vec::new();
    let mut warnings = Vec::new();
    for module in &tree.modules {
        let Some(version) = &module.manifest.version else {
            warnings.push(format!(
                "{}: skipped, version {:?} is not a valid semantic version",
                module.install_path, module.manifest.version_text
            ));
            continue;
        };
        for adv in match_module(db, module.name(), version) {
            matches.push(AdvisoryMatch {
                advisory_id: adv.id.clone(),
                module_name: module.name().to_owned(),
                install_path: module.install_path.clone(),
                version: module.manifest.version_text.clone(),
                cvss_score: adv.cvss_score,
                title: adv.title.clone(),
                patched_versions: adv.patched_versions.clone(),
                via: tree.chain_to(&module.install_path),
            });
        }
    }
    let unique: BTreeSet<&str> = matches.iter().map(|m| m.advisory_id.as_str()).collect();
    AdvisoryReport {
        application_name: app_name.to_owned(),
        total_advisories: matches.len(),
        unique_advisories: unique.len(),
        highest_cvss: matches.iter().map(|m| m.cvss_score).max_by(f64::total_cmp),
        matches,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::package::parse_version;

    const GROWL: &str = r#"[{"id":"146","module_name":"growl","title":"Command Injection",
        "vulnerable_versions":"<1.10.0","patched_versions":">=1.10.0","cvss_score":9.8,
        "overview":"","recommendation":"Update","references":["x"]}]"#;

    #[test]
    fn empty_db() {
        assert!(AdvisoryDb::from_json(b"[]").unwrap().is_empty());
    }

    #[test]
    fn growl_boundary() {
        let db = AdvisoryDb::from_json(GROWL.as_bytes()).unwrap();
        assert_eq!(db.candidates("growl").count(), 1);
        assert_eq!(match_module(&db, "growl", &parse_version("1.9.2").unwrap()).len(), 1);
        assert!(match_module(&db, "growl", &parse_version("1.10.0").unwrap()).is_empty());
        assert!(match_module(&db, "Growl", &parse_version("1.9.2").unwrap()).is_empty());
        assert!(db.advisories()[0].extra.contains_key("references"));
    }

    #[test]
    fn duplicate_ids() {
        let a = Advisory::new("1", "x", "*", 1.0).unwrap();
        let b = Advisory::new("1", "y", "*", 1.0).unwrap();
        assert!(matches!(
            AdvisoryDb::from_advisories(vec![a, b]),
            Err(AdvisoryError::DuplicateId(_))
        ));
    }

    #[test]
    fn schema_errors_carry_paths() {
        let err = AdvisoryDb::from_json(br#"[{"id":"1"}]"#).unwrap_err();
        assert!(matches!(err, AdvisoryError::MalformedDb { .. }));
        let err = AdvisoryDb::from_json(
            br#"[{"id":"1","module_name":"x","title":"","vulnerable_versions":"<1","patched_versions":"none","cvss_score":11}]"#,
        )
        .unwrap_err();
        match err {
            AdvisoryError::MalformedDb { path, .. } => assert_eq!(path, "[0].cvss_score"),
            other => panic!("{other:?}"),
        }
        let err = AdvisoryDb::from_json(
            br#"[{"id":"1","module_name":"x","title":"","vulnerable_versions":"<<1","patched_versions":"none","cvss_score":1}]"#,
        )
        .unwrap_err();
        assert!(matches!(err, AdvisoryError::MalformedDb { path, .. } if path == "[0].vulnerable_versions"));
    }

    #[test]
    fn ordering_by_score_then_id() {
        let db = AdvisoryDb::from_advisories(vec![
            Advisory::new("b", "m", "*", 5.0).unwrap(),
            Advisory::new("a", "m", "*", 5.0).unwrap(),
            Advisory::new("c", "m", "*", 9.0).unwrap(),
        ])
        .unwrap();
        let ids: Vec<_> = match_module(&db, "m", &SemVer::new(1, 0, 0))
            .iter()
            .map(|a| a.id.as_str())
            .collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }
}
