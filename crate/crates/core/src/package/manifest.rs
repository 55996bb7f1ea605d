use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use super::semver::{parse_version, SemVer};

/// Root manifest field that marks a bundle as a synthetic test fixture.
pub const FIXTURE_MARKER: &str = "x-audit-fixture";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("package.json is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("package.json is not a JSON object")]
    NotAnObject,
}

/// Normalized location of a module's source repository.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, serde::Deserialize)]
pub struct RepoCoordinates {
    pub host: String,
    pub owner: String,
    pub repo: String,
}

impl RepoCoordinates {
    /// `owner/repo`, the form hosted-git APIs address repositories by.
    pub fn slug(&self) -> String {
        format!("{}/{}", self.owner, self.repo)
    }
}

impl fmt::Display for RepoCoordinates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.host, self.owner, self.repo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackageManifest {
    pub name: String,
    /// Version text exactly as written.
    pub version_text: String,
    /// `None` when `version_text` is not a valid semantic version.
    #[serde(skip)]
    pub version: Option<SemVer>,
    pub main: Option<String>,
    pub dependencies: BTreeMap<String, String>,
    pub dev_dependencies: BTreeMap<String, String>,
    pub optional_dependencies: BTreeMap<String, String>,
    pub peer_dependencies: BTreeMap<String, String>,
    pub repository: Option<RepoCoordinates>,
    pub has_install_scripts: bool,
    pub fixture_marker: bool,
}

impl PackageManifest {
    /// Parse a `package.json`. A missing or empty `name` falls back to
    /// `fallback_name` (usually the directory name).
    pub fn parse(bytes: &[u8], fallback_name: &str) -> Result<Self, ManifestError> {
        let value: Value = serde_json::from_slice(bytes)?;
        let obj = value.as_object().ok_or(ManifestError::NotAnObject)?;

        let name = match obj.get("name").and_then(Value::as_str) {
            Some(n) if !n.is_empty() => n.to_owned(),
            _ => {
                log::warn!("manifest without a name, using {fallback_name:?}");
                fallback_name.to_owned()
            }
        };
        let version_text = obj
            .get("version")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_owned();
        let version = parse_version(&version_text).ok();
        let scripts = obj.get("scripts").and_then(Value::as_object);
        let has_install_scripts = scripts.is_some_and(|s| {
            ["preinstall", "install", "postinstall"]
                .iter()
                .any(|k| s.contains_key(*k))
        });

        Ok(PackageManifest {
            main: obj.get("main").and_then(Value::as_str).map(str::to_owned),
            dependencies: dep_map(obj.get("dependencies"), &name),
            dev_dependencies: dep_map(obj.get("devDependencies"), &name),
            optional_dependencies: dep_map(obj.get("optionalDependencies"), &name),
            peer_dependencies: dep_map(obj.get("peerDependencies"), &name),
            repository: obj.get("repository").and_then(normalize_repository),
            has_install_scripts,
            fixture_marker: obj.get(FIXTURE_MARKER) == Some(&Value::Bool(true)),
            name,
            version_text,
            version,
        })
    }

    /// Names declared in any dependency section.
    pub fn declares(&self, name: &str) -> bool {
        self.dependencies.contains_key(name)
            || self.dev_dependencies.contains_key(name)
            || self.optional_dependencies.contains_key(name)
            || self.peer_dependencies.contains_key(name)
    }
}

fn dep_map(value: Option<&Value>, owner: &str) -> BTreeMap<String, String> {
    let Some(obj) = value.and_then(Value::as_object) else {
        return BTreeMap::new();
    };
    obj.iter()
        .filter_map(|(k, v)| match v.as_str() {
            Some(s) => Some((k.clone(), s.to_owned())),
            None => {
                log::warn!("{owner}: dependency {k} has a non-string range, ignored");
                None
            }
        })
        .collect()
}

/// Normalize the `repository` field. Accepts `owner/repo` shorthand,
/// `github:`/`gitlab:`/`bitbucket:` prefixes, scp-style `git@host:o/r`,
/// URLs of any scheme, and the `{ "type": ..., "url": ... }` object form.
pub fn normalize_repository(value: &Value) -> Option<RepoCoordinates> {
    let text = match value {
        Value::String(s) => s.as_str(),
        Value::Object(o) => o.get("url")?.as_str()?,
        _ => return None,
    };
    normalize_repository_text(text)
}

pub fn normalize_repository_text(text: &str) -> Option<RepoCoordinates> {
    let text = text.trim();
    let text = text.strip_prefix("git+").unwrap_or(text);

    for (prefix, host) in [
        ("github:", "github.com"),
        ("gitlab:", "gitlab.com"),
        ("bitbucket:", "bitbucket.org"),
    ] {
        if let Some(rest) = text.strip_prefix(prefix) {
            return coords(host, rest);
        }
    }
    if text.contains("://") {
        let url = url::Url::parse(text).ok()?;
        return coords(url.host_str()?, url.path());
    }
    // scp-like: git@github.com:owner/repo.git
    if let Some((userhost, path)) = text.split_once(':') {
        let host = userhost.rsplit('@').next()?;
        if host.contains('.') && !path.starts_with("//") {
            return coords(host, path);
        }
        return None;
    }
    if text.split('/').count() == 2 {
        return coords("github.com", text);
    }
    None
}

fn coords(host: &str, path: &str) -> Option<RepoCoordinates> {
    let path = path.split(['#', '?']).next().unwrap_or_default();
    let mut segs = path.split('/').filter(|s| !s.is_empty());
    let owner = segs.next()?;
    let repo = segs.next()?;
    let repo = repo.strip_suffix(".git").unwrap_or(repo);
    if owner.is_empty() || repo.is_empty() || host.is_empty() {
        return None;
    }
    Some(RepoCoordinates {
        host: host.to_ascii_lowercase(),
        owner: owner.to_owned(),
        repo: repo.to_owned(),
    })
}
