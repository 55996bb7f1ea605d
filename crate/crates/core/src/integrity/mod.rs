//! Tamper detection for application bundles: digest baselines, heuristics
//! for the prepended-require injection pattern, and a test harness that
//! performs that injection on fixture bundles.

mod heuristics;
mod inject;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use heuristics::{detect_injection_heuristics, leading_requires};
pub use inject::{inject_fixture, InjectionRecord, InjectionStep};

use crate::asar::AsarError;
use crate::bundle::{BundleError, BundleSource};
use crate::package::{walk_source, PackageManifest, TreeError, WalkOptions};

#[derive(Debug, Error)]
pub enum IntegrityError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Asar(#[from] AsarError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("entry point {0:?} does not exist in the bundle")]
    MissingEntryPoint(String),
    #[error("bundle is not marked as a test fixture; refusing to inject")]
    NotAFixture,
    #[error("payload package.json is named {found:?}, expected {expected:?}")]
    PayloadMismatch { expected: String, found: String },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("bundle already carries payload {0:?}")]
    AlreadyInjected(String),
    #[error("invalid baseline: {0}")]
    InvalidBaseline(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Lowercase hex SHA-256.
    pub sha256: String,
    pub size: u64,
}

impl FileDigest {
    pub fn of(bytes: &[u8]) -> Self {
        FileDigest {
            sha256: hex::encode(Sha256::digest(bytes)),
            size: bytes.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub created_at: DateTime<Utc>,
    pub app_name: String,
    pub entries: BTreeMap<String, FileDigest>,
    pub entry_point: String,
    pub declared_modules: BTreeSet<String>,
}

impl Baseline {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("baseline serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, IntegrityError> {
        let b: Baseline = serde_json::from_slice(bytes).map_err(|e| IntegrityError::InvalidBaseline(e.to_string()))?;
        for (path, d) in &b.entries {
            let hex_ok = d.sha256.len() == 64 && d.sha256.bytes().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f'));
            if !hex_ok {
                return Err(IntegrityError::InvalidBaseline(format!(
                    "{path}: digest is not lowercase hex SHA-256"
                )));
            }
            if path.is_empty()
                || path.starts_with('/')
                || path.split('/').any(|s| s.is_empty() || s == "." || s == "..")
            {
                return Err(IntegrityError::InvalidBaseline(format!(
                    "{path:?} is not a normalized path"
                )));
            }
        }
        if !b.entries.contains_key(&b.entry_point) {
            return Err(IntegrityError::InvalidBaseline(format!(
                "entry point {:?} has no digest",
                b.entry_point
            )));
        }
        Ok(b)
    }
}

/// The file Node would load for the manifest's `main` (default `index.js`):
/// the path itself, then with `.js`, then `<path>/index.js`.
pub(crate) fn resolve_entry_point(
    source: &dyn BundleSource,
    manifest: &PackageManifest,
) -> Result<String, IntegrityError> {
    let main = manifest.main.as_deref().unwrap_or("index.js");
    let main = main.trim_start_matches("./").trim_end_matches('/');
    let main = if main.is_empty() { "index.js" } else { main };
    for candidate in [main.to_owned(), format!("{main}.js"), format!("{main}/index.js")] {
        if source.read(&candidate)?.is_some() {
            return Ok(candidate);
        }
    }
    Err(IntegrityError::MissingEntryPoint(main.to_owned()))
}

pub(crate) fn root_manifest(source: &dyn BundleSource) -> Result<PackageManifest, IntegrityError> {
    let bytes = source
        .read("package.json")?
        .ok_or(IntegrityError::Tree(TreeError::MissingRootManifest))?;
    PackageManifest::parse(&bytes, "app").map_err(|e| IntegrityError::Tree(TreeError::InvalidRootManifest(e)))
}

/// Digest every file in the bundle.
pub fn build_baseline(source: &dyn BundleSource) -> Result<Baseline, IntegrityError> {
    let manifest = root_manifest(source)?;
    let entry_point = resolve_entry_point(source, &manifest)?;
    let mut entries = BTreeMap::new();
    for path in source.files()? {
        let bytes = source.read(&path)?.unwrap_or_default();
        entries.insert(path, FileDigest::of(&bytes));
    }
    let tree = walk_source(source, WalkOptions::default())?;
    Ok(Baseline {
        created_at: Utc::now(),
        app_name: manifest.name,
        entries,
        entry_point,
        declared_modules: tree.reachable_names().into_iter().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperKind {
    ModifiedFile,
    AddedFile,
    RemovedFile,
    PrependedRequire,
    UndeclaredModule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TamperFinding {
    pub kind: TamperKind,
    pub path: String,
    pub detail: String,
}

/// Compare the bundle with a baseline. Findings are sorted by path.
pub fn check_baseline(source: &dyn BundleSource, baseline: &Baseline) -> Result<Vec<TamperFinding>, IntegrityError> {
    let mut findings = Vec::new();
    let mut present = BTreeSet::new();
    for path in source.files()? {
        let bytes = source.read(&path)?.unwrap_or_default();
        let now = FileDigest::of(&bytes);
        match baseline.entries.get(&path) {
            None => findings.push(TamperFinding {
                kind: TamperKind::AddedFile,
                detail: format!("{} bytes, not in baseline", now.size),
                path: path.clone(),
            }),
            Some(then) if *then != now => findings.push(TamperFinding {
                kind: TamperKind::ModifiedFile,
                detail: format!(
                    "size {} -> {}, sha256 {} -> {}",
                    then.size, now.size, then.sha256, now.sha256
                ),
                path: path.clone(),
            }),
            Some(_) => {}
        }
        present.insert(path);
    }
    for path in baseline.entries.keys().filter(|p| !present.contains(*p)) {
        findings.push(TamperFinding {
            kind: TamperKind::RemovedFile,
            path: path.clone(),
            detail: "missing from bundle".into(),
        });
    }
    findings.sort_by(|a, b| a.path.cmp(&b.path).then(a.kind.cmp(&b.kind)));
    Ok(findings)
}
