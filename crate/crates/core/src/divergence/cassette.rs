//! Recorded provider responses, loaded from a JSON cassette.
//!
//! ```json
//! {
//!   "interactions": {
//!     "owner/repo repo": {"default_branch": "main"},
//!     "owner/repo tag v1.2.3": {"exists": true},
//!     "owner/repo compare v1.2.3...main": {"ahead_by": 3, "behind_by": 0},
//!     "owner/other repo": {"error": {"kind": "rate_limited", "message": "slow down", "retry_after_secs": 60}}
//!   },
//!   "histories": {
//!     "owner/graph": {
//!       "default_branch": "main",
//!       "branches": {"main": "c3"},
//!       "tags": {"v1.0.0": "c1"},
//!       "commits": {"c1": [], "c2": ["c1"], "c3": ["c2"]}
//!     }
//!   }
//! }
//! ```
//!
//! A repository listed under `histories` is answered from its commit graph;
//! anything else comes from `interactions`. An unrecorded tag lookup means
//! the tag does not exist; any other unrecorded request is a `NotFound`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use super::{Comparison, ProviderError, ProviderErrorKind, RepoCoordinates, RepoMetadataProvider};

#[derive(Debug, Error)]
pub enum CassetteError {
    #[error("reading cassette: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed cassette at {path}: {reason}")]
    Malformed { path: String, reason: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CassetteFile {
    #[serde(default)]
    interactions: BTreeMap<String, Recorded>,
    #[serde(default)]
    histories: BTreeMap<String, History>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Recorded {
    Error { error: RecordedError },
    Branch { default_branch: String },
    Tag { exists: bool },
    Compare { ahead_by: u64, behind_by: u64 },
}

#[derive(Debug, Clone, Deserialize)]
struct RecordedError {
    kind: ProviderErrorKind,
    #[serde(default)]
    message: String,
    retry_after_secs: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct History {
    default_branch: String,
    #[serde(default)]
    branches: BTreeMap<String, String>,
    #[serde(default)]
    tags: BTreeMap<String, String>,
    /// Commit id to parent ids.
    commits: BTreeMap<String, Vec<String>>,
}

impl History {
    fn check(&self, repo: &str) -> Result<(), CassetteError> {
        let bad = |reason: String| CassetteError::Malformed {
            path: format!("histories.{repo}"),
            reason,
        };
        if !self.branches.contains_key(&self.default_branch) {
            return Err(bad(format!("default branch {:?} has no head", self.default_branch)));
        }
        for (name, id) in self.branches.iter().chain(&self.tags) {
            if !self.commits.contains_key(id) {
                return Err(bad(format!("ref {name:?} points at unknown commit {id:?}")));
            }
        }
        for (id, parents) in &self.commits {
            if let Some(p) = parents.iter().find(|p| !self.commits.contains_key(*p)) {
                return Err(bad(format!("commit {id:?} has unknown parent {p:?}")));
            }
        }
        Ok(())
    }

    fn commit_for(&self, rev: &str) -> Option<&str> {
        self.branches
            .get(rev)
            .or_else(|| self.tags.get(rev))
            .map(String::as_str)
            .or_else(|| self.commits.get_key_value(rev).map(|(k, _)| k.as_str()))
    }

    fn reachable<'a>(&'a self, from: &'a str) -> HashSet<&'a str> {
        let mut seen = HashSet::new();
        let mut stack = vec![from];
        while let Some(c) = stack.pop() {
            if seen.insert(c) {
                stack.extend(self.commits[c].iter().map(String::as_str));
            }
        }
        seen
    }
}

/// Fixture-backed provider. Immutable after loading, so it can be shared
/// freely between scan workers.
#[derive(Debug)]
pub struct CassetteProvider {
    interactions: BTreeMap<String, Recorded>,
    histories: BTreeMap<String, History>,
    calls: AtomicUsize,
}

impl CassetteProvider {
    pub fn from_json(bytes: &[u8]) -> Result<Self, CassetteError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let file: CassetteFile = serde_path_to_error::deserialize(de).map_err(|e| CassetteError::Malformed {
            path: e.path().to_string(),
            reason: e.inner().to_string(),
        })?;
        for (repo, h) in &file.histories {
            h.check(repo)?;
        }
        Ok(CassetteProvider {
            interactions: file.interactions,
            histories: file.histories,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CassetteError> {
        Self::from_json(&std::fs::read(path)?)
    }

    /// Number of provider requests answered so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn lookup(
        &self,
        repo: &RepoCoordinates,
        kind: &str,
        arg: Option<&str>,
    ) -> Result<Option<&Recorded>, ProviderError> {
        let key = match arg {
            Some(a) => format!("{} {kind} {a}", repo.slug()),
            None => format!("{} {kind}", repo.slug()),
        };
        let repo_key = format!("{} repo", repo.slug());
        for k in [&key, &repo_key] {
            if let Some(Recorded::Error { error }) = self.interactions.get(k) {
                return Err(ProviderError {
                    kind: error.kind,
                    message: error.message.clone(),
                    retry_after: error.retry_after_secs.map(Duration::from_secs),
                });
            }
        }
        Ok(self.interactions.get(&key))
    }

    fn history(&self, repo: &RepoCoordinates) -> Option<&History> {
        self.histories.get(&repo.slug())
    }
}

fn not_recorded(what: String) -> ProviderError {
    ProviderError::new(ProviderErrorKind::NotFound, format!("not recorded: {what}"))
}

fn unexpected(what: String) -> ProviderError {
    ProviderError::new(
        ProviderErrorKind::Protocol,
        format!("recorded response has the wrong shape: {what}"),
    )
}

impl RepoMetadataProvider for CassetteProvider {
    fn default_branch(&self, repo: &RepoCoordinates) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if let Some(h) = self.history(repo) {
            return Ok(h.default_branch.clone());
        }
        match self.lookup(repo, "repo", None)? {
            Some(Recorded::Branch { default_branch }) => Ok(default_branch.clone()),
            Some(_) => Err(unexpected(format!("{} repo", repo.slug()))),
            None => Err(not_recorded(format!("{} repo", repo.slug()))),
        }
    }

    fn tag_exists(&self, repo: &RepoCoordinates, tag: &str) -> Result<bool, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if let Some(h) = self.history(repo) {
            return Ok(h.tags.contains_key(tag));
        }
        match self.lookup(repo, "tag", Some(tag))? {
            Some(Recorded::Tag { exists }) => Ok(*exists),
            Some(_) => Err(unexpected(format!("{} tag {tag}", repo.slug()))),
            None => Ok(false),
        }
    }

    fn compare(&self, repo: &RepoCoordinates, base: &str, head: &str) -> Result<Comparison, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if let Some(h) = self.history(repo) {
            let resolve = |rev: &str| {
                h.commit_for(rev)
                    .ok_or_else(|| ProviderError::new(ProviderErrorKind::NotFound, format!("unknown revision {rev}")))
            };
            let from_base = h.reachable(resolve(base)?);
            let from_head = h.reachable(resolve(head)?);
            return Ok(Comparison {
                ahead_by: from_head.difference(&from_base).count() as u64,
                behind_by: from_base.difference(&from_head).count() as u64,
            });
        }
        let arg = format!("{base}...{head}");
        match self.lookup(repo, "compare", Some(&arg))? {
            Some(Recorded::Compare { ahead_by, behind_by }) => Ok(Comparison {
                ahead_by: *ahead_by,
                behind_by: *behind_by,
            }),
            Some(_) => Err(unexpected(format!("{} compare {arg}", repo.slug()))),
            None => Err(not_recorded(format!("{} compare {arg}", repo.slug()))),
        }
    }
}
