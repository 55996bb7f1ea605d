//! How far each installed module trails its upstream repository.
//!
//! For every module the release tag matching its installed version is looked
//! up, and the number of commits on the default branch head that are not
//! reachable from that tag is counted. Modules at or above the threshold are
//! flagged as suspect.

mod cassette;
mod github;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cassette::{CassetteError, CassetteProvider};
pub use github::{GitHubProvider, TOKEN_ENV};

pub use crate::package::RepoCoordinates;
use crate::package::{DependencyTree, SemVer};

pub const DEFAULT_THRESHOLD: u64 = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderErrorKind {
    Transport,
    Auth,
    RateLimited,
    NotFound,
    Unsupported,
    Protocol,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?}: {message}")]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub message: String,
    /// How long the provider asked us to wait, when it said.
    pub retry_after: Option<Duration>,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, message: impl Into<String>) -> Self {
        ProviderError {
            kind,
            message: message.into(),
            retry_after: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Comparison {
    /// Commits reachable from head but not from base.
    pub ahead_by: u64,
    /// Commits reachable from base but not from head.
    pub behind_by: u64,
}

/// Read access to hosted-git metadata.
pub trait RepoMetadataProvider: Sync {
    fn default_branch(&self, repo: &RepoCoordinates) -> Result<String, ProviderError>;
    fn tag_exists(&self, repo: &RepoCoordinates, tag: &str) -> Result<bool, ProviderError>;
    fn compare(&self, repo: &RepoCoordinates, base: &str, head: &str) -> Result<Comparison, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DivergenceError {
    #[error("no tag for version {version} (tried {tried:?})")]
    TagNotFound { version: String, tried: Vec<String> },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolvedTag {
    pub name: String,
    /// Set when the tag was found through a non-standard naming scheme.
    pub note: Option<String>,
}

/// Find the tag for `version`: the plain version text, then `v`-prefixed,
/// then the monorepo form `<module>@<version>`.
pub fn resolve_tag(
    provider: &dyn RepoMetadataProvider,
    coords: &RepoCoordinates,
    version: &SemVer,
    module_name: Option<&str>,
) -> Result<ResolvedTag, DivergenceError> {
    let text = version.to_string();
    let mut candidates = vec![(text.clone(), None), (format!("v{text}"), None)];
    if let Some(name) = module_name {
        candidates.push((format!("{name}@{text}"), Some("monorepo tag".to_owned())));
    }
    for (tag, note) in &candidates {
        if provider.tag_exists(coords, tag)? {
            return Ok(ResolvedTag {
                name: tag.clone(),
                note: note.clone(),
            });
        }
    }
    Err(DivergenceError::TagNotFound {
        version: text,
        tried: candidates.into_iter().map(|(t, _)| t).collect(),
    })
}

/// Commits on the default branch head that the tag does not contain.
pub fn commits_behind(
    provider: &dyn RepoMetadataProvider,
    coords: &RepoCoordinates,
    tag: &str,
) -> Result<u64, ProviderError> {
    let branch = provider.default_branch(coords)?;
    Ok(provider.compare(coords, tag, &branch)?.ahead_by)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceStatus {
    Ok,
    NoRepo,
    TagNotFound,
    ProviderError,
    /// The installed version text is not a semantic version.
    UnparseableVersion,
}

impl fmt::Display for DivergenceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceStatus::Ok => "ok",
            DivergenceStatus::NoRepo => "no_repo",
            DivergenceStatus::TagNotFound => "tag_not_found",
            DivergenceStatus::ProviderError => "provider_error",
            DivergenceStatus::UnparseableVersion => "unparseable_version",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivergenceRecord {
    pub install_path: String,
    pub module_name: String,
    pub version: String,
    pub coordinates: Option<RepoCoordinates>,
    pub resolved_tag: Option<String>,
    pub tag_note: Option<String>,
    pub commits_behind: Option<u64>,
    pub status: DivergenceStatus,
    pub suspect: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivergenceReport {
    pub threshold: u64,
    /// One per module instance, sorted by install path.
    pub records: Vec<DivergenceRecord>,
    pub total_commits_behind: u64,
    /// Records with a commit count; the denominator of the average.
    pub measured_modules: usize,
    #[serde(serialize_with = "ratio_str")]
    pub average_commits_behind: Option<Ratio<u64>>,
    /// The same total divided over every module instance instead.
    #[serde(serialize_with = "ratio_str")]
    pub average_over_all_modules: Option<Ratio<u64>>,
}

fn ratio_str<S: serde::Serializer>(r: &Option<Ratio<u64>>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.collect_str(r),
        None => s.serialize_none(),
    }
}

impl DivergenceReport {
    pub fn suspects(&self) -> impl Iterator<Item = &DivergenceRecord> {
        self.records.iter().filter(|r| r.suspect)
    }

    /// Build the totals from a record list, applying `threshold`.
    pub fn from_records(mut records: Vec<DivergenceRecord>, threshold: u64) -> Self {
        for r in &mut records {
            r.suspect = r.commits_behind.is_some_and(|c| c >= threshold);
        }
        let counts: Vec<u64> = records.iter().filter_map(|r| r.commits_behind).collect();
        let total: u64 = counts.iter().sum();
        let average = |n: usize| (n > 0).then(|| Ratio::new(total, n as u64));
        DivergenceReport {
            threshold,
            total_commits_behind: total,
            measured_modules: counts.len(),
            average_commits_behind: average(counts.len()),
            average_over_all_modules: average(records.len()),
            records,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    pub threshold: u64,
    /// Upper bound on concurrent provider lookups.
    pub parallelism: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            threshold: DEFAULT_THRESHOLD,
            parallelism: 4,
        }
    }
}

type Lookup = Result<(ResolvedTag, u64), DivergenceError>;

/// Measure every module instance in `tree`. Lookups are shared between
/// instances with the same repository and version, so each such pair costs
/// at most one tag resolution and one comparison.
pub fn scan_divergence(
    tree: &DependencyTree,
    provider: &dyn RepoMetadataProvider,
    opts: ScanOptions,
) -> DivergenceReport {
    let mut jobs: Vec<(RepoCoordinates, SemVer, String)> = Vec::new();
    let mut seen: HashMap<(RepoCoordinates, SemVer), usize> = HashMap::new();
    for m in &tree.modules {
        if let (Some(c), Some(v)) = (&m.manifest.repository, &m.manifest.version) {
            seen.entry((c.clone(), v.clone())).or_insert_with(|| {
                jobs.push((c.clone(), v.clone(), m.name().to_owned()));
                jobs.len() - 1
            });
        }
    }

    let results: Vec<Mutex<Option<Lookup>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = opts.parallelism.max(1).min(jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((coords, version, name)) = jobs.get(i) else {
                    break;
                };
                let outcome = resolve_tag(provider, coords, version, Some(name)).and_then(|tag| {
                    let behind = commits_behind(provider, coords, &tag.name)?;
                    Ok((tag, behind))
                });
                *results[i].lock().expect("result slot") = Some(outcome);
            });
        }
    });
    let results: Vec<Lookup> = results
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every job ran"))
        .collect();

    let records = tree
        .modules
        .iter()
        .map(|m| {
            let mut rec = DivergenceRecord {
                install_path: m.install_path.clone(),
                module_name: m.name().to_owned(),
                version: m.manifest.version_text.clone(),
                coordinates: m.manifest.repository.clone(),
                resolved_tag: None,
                tag_note: None,
                commits_behind: None,
                status: DivergenceStatus::Ok,
                suspect: false,
                detail: None,
            };
            let (Some(c), Some(v)) = (&m.manifest.repository, &m.manifest.version) else {
                rec.status = if m.manifest.repository.is_none() {
                    DivergenceStatus::NoRepo
                } else {
                    DivergenceStatus::UnparseableVersion
                };
                return rec;
            };
            match &results[seen[&(c.clone(), v.clone())]] {
                Ok((tag, behind)) => {
                    rec.resolved_tag = Some(tag.name.clone());
                    rec.tag_note = tag.note.clone();
                    rec.commits_behind = Some(*behind);
                }
                Err(e @ DivergenceError::TagNotFound { .. }) => {
                    rec.status = DivergenceStatus::TagNotFound;
                    rec.detail = Some(e.to_string());
                }
                Err(DivergenceError::Provider(e)) => {
                    rec.status = DivergenceStatus::ProviderError;
                    rec.detail = Some(e.to_string());
                }
            }
            rec
        })
        .collect();
    DivergenceReport::from_records(records, opts.threshold)
}
