use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};
use url::Url;

use super::package::{check_signature_manifest, open_package, SIGNATURE_SUFFIX};
use super::releases::{parse_releases, verify_entry, Flavor, ReleaseEntry, ReleasesFile};
use crate::net::http_agent;
use crate::package::SemVer;

const MAX_RELEASES_BYTES: u64 = 1 << 20;
const MAX_PACKAGE_BYTES: u64 = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignaturePolicy {
    Require,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportPolicy {
    RequireTls,
    AllowPlain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClientState {
    pub current_version: SemVer,
    /// Never decreases. Updates are only taken above this, which is what
    /// makes a client that once applied a huge version refuse genuine ones.
    pub highest_seen_version: SemVer,
    pub signature_policy: SignaturePolicy,
    pub transport_policy: TransportPolicy,
}

impl ClientState {
    pub fn new(current: SemVer, signature_policy: SignaturePolicy, transport_policy: TransportPolicy) -> Self {
        ClientState {
            highest_seen_version: current.clone(),
            current_version: current,
            signature_policy,
            transport_policy,
        }
    }
}

/// The highest full package strictly above `state.highest_seen_version`.
pub fn select_update<'a>(feed: &'a ReleasesFile, state: &ClientState) -> Option<&'a ReleaseEntry> {
    feed.entries
        .iter()
        .filter(|e| {
            e.parsed
                .as_ref()
                .is_some_and(|p| p.flavor == Flavor::Full && p.version > state.highest_seen_version)
        })
        .max_by(|a, b| {
            let (a, b) = (a.parsed.as_ref().unwrap(), b.parsed.as_ref().unwrap());
            a.version.cmp(&b.version)
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefusalReason {
    /// Plaintext refused by policy, or the network failed.
    Transport,
    /// The RELEASES document could not be read.
    Feed,
    /// Package bytes do not match the RELEASES digest or size.
    Integrity,
    /// No valid signature manifest while one is required.
    Signature,
    /// The package is not a usable update.
    Package,
    /// Writing the update to disk failed.
    Install,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum UpdateOutcome {
    Applied {
        version: SemVer,
        filename: String,
        package_sha256: String,
        install_path: PathBuf,
    },
    NoUpdate,
    Refused {
        reason: RefusalReason,
        detail: String,
    },
}

fn refuse(reason: RefusalReason, detail: impl Into<String>) -> UpdateOutcome {
    UpdateOutcome::Refused {
        reason,
        detail: detail.into(),
    }
}

/// Where `RELEASES` lives and what package names are resolved against.
/// Accepts either the directory URL or the RELEASES URL itself.
pub(crate) fn feed_urls(feed_url: &str) -> Result<(Url, Url), String> {
    let mut base = Url::parse(feed_url).map_err(|e| format!("invalid feed URL {feed_url:?}: {e}"))?;
    if !matches!(base.scheme(), "http" | "https") {
        return Err(format!("unsupported scheme {:?}", base.scheme()));
    }
    if base.path().ends_with("/RELEASES") {
        let releases = base.clone();
        base = base.join("./").map_err(|e| e.to_string())?;
        return Ok((base, releases));
    }
    if !base.path().ends_with('/') {
        let path = format!("{}/", base.path());
        base.set_path(&path);
    }
    let releases = base.join("RELEASES").map_err(|e| e.to_string())?;
    Ok((base, releases))
}

/// GET `url`; `Ok(None)` on 404, `Err` on anything else unexpected.
pub(crate) fn fetch(agent: &ureq::Agent, url: &Url, limit: u64) -> Result<Option<Vec<u8>>, String> {
    let mut resp = agent.get(url.as_str()).call().map_err(|e| format!("{url}: {e}"))?;
    match resp.status().as_u16() {
        200 => resp
            .body_mut()
            .with_config()
            .limit(limit)
            .read_to_vec()
            .map(Some)
            .map_err(|e| format!("{url}: {e}")),
        404 => Ok(None),
        s => Err(format!("{url}: HTTP {s}")),
    }
}

/// One pass of the auto-updater loop: fetch RELEASES, select, download,
/// verify, apply the policies, then unpack into `install_dir/app-<version>`.
/// `state` changes only when an update is applied.
pub fn mock_client_cycle(
    feed_url: &str,
    state: &mut ClientState,
    install_dir: &Path,
    extra_root_pem: Option<&[u8]>,
) -> UpdateOutcome {
    let (base, releases_url) = match feed_urls(feed_url) {
        Ok(u) => u,
        Err(e) => return refuse(RefusalReason::Transport, e),
    };
    let transport_ok = |u: &Url| u.scheme() == "https" || state.transport_policy == TransportPolicy::AllowPlain;
    if !transport_ok(&releases_url) {
        return refuse(
            RefusalReason::Transport,
            format!("plaintext feed {releases_url} refused by policy"),
        );
    }
    let agent = match http_agent(extra_root_pem, Duration::from_secs(30)) {
        Ok(a) => a,
        Err(e) => return refuse(RefusalReason::Transport, e.to_string()),
    };

    let text = match fetch(&agent, &releases_url, MAX_RELEASES_BYTES) {
        Ok(Some(b)) => b,
        Ok(None) => return refuse(RefusalReason::Transport, format!("{releases_url}: HTTP 404")),
        Err(e) => return refuse(RefusalReason::Transport, e),
    };
    let feed = match std::str::from_utf8(&text)
        .map_err(|e| e.to_string())
        .and_then(|t| parse_releases(t).map_err(|e| e.to_string()))
    {
        Ok(f) => f,
        Err(e) => return refuse(RefusalReason::Feed, e),
    };
    let Some(entry) = select_update(&feed, state) else {
        return UpdateOutcome::NoUpdate;
    };
    let version = entry
        .parsed
        .as_ref()
        .expect("selected entries are parsed")
        .version
        .clone();

    let pkg_url = match base.join(&entry.filename) {
        Ok(u) => u,
        Err(e) => {
            return refuse(
                RefusalReason::Feed,
                format!("bad package name {:?}: {e}", entry.filename),
            )
        }
    };
    if !transport_ok(&pkg_url) {
        return refuse(
            RefusalReason::Transport,
            format!("plaintext package {pkg_url} refused by policy"),
        );
    }
    let bytes = match fetch(&agent, &pkg_url, MAX_PACKAGE_BYTES) {
        Ok(Some(b)) => b,
        Ok(None) => return refuse(RefusalReason::Transport, format!("{pkg_url}: HTTP 404")),
        Err(e) => return refuse(RefusalReason::Transport, e),
    };
    if !verify_entry(entry, &bytes) {
        return refuse(
            RefusalReason::Integrity,
            format!("{} does not match its RELEASES digest and size", entry.filename),
        );
    }
    if state.signature_policy == SignaturePolicy::Require {
        let manifest_url = match base.join(&format!("{}{SIGNATURE_SUFFIX}", entry.filename)) {
            Ok(u) => u,
            Err(e) => return refuse(RefusalReason::Signature, e.to_string()),
        };
        match fetch(&agent, &manifest_url, MAX_RELEASES_BYTES) {
            Ok(Some(m)) if check_signature_manifest(&m, &entry.filename, &bytes) => {}
            Ok(Some(_)) => {
                return refuse(
                    RefusalReason::Signature,
                    format!("{manifest_url} does not match the package"),
                )
            }
            Ok(None) => return refuse(RefusalReason::Signature, format!("{} is unsigned", entry.filename)),
            Err(e) => return refuse(RefusalReason::Transport, e),
        }
    }
    let opened = match open_package(&bytes) {
        Ok(p) => p,
        Err(e) => return refuse(RefusalReason::Package, e.to_string()),
    };
    if opened.metadata.version != version {
        return refuse(
            RefusalReason::Package,
            format!(
                "package metadata says {}, RELEASES says {version}",
                opened.metadata.version
            ),
        );
    }

    let target = install_dir.join(format!("app-{version}"));
    if let Err(e) = install(&target, &opened.payload, &opened.executable) {
        return refuse(RefusalReason::Install, e);
    }
    state.current_version = version.clone();
    if version > state.highest_seen_version {
        state.highest_seen_version = version.clone();
    }
    log::info!("applied {} into {}", entry.filename, target.display());
    UpdateOutcome::Applied {
        version,
        filename: entry.filename.clone(),
        package_sha256: hex::encode(Sha256::digest(&bytes)),
        install_path: target,
    }
}

fn install(target: &Path, payload: &BTreeMap<String, Vec<u8>>, executable: &BTreeSet<String>) -> Result<(), String> {
    let err = |p: &Path, e: std::io::Error| format!("{}: {e}", p.display());
    if target.exists() {
        fs::remove_dir_all(target).map_err(|e| err(target, e))?;
    }
    fs::create_dir_all(target).map_err(|e| err(target, e))?;
    for (rel, data) in payload {
        let rel_path = Path::new(rel);
        if !rel_path.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(format!("payload path {rel:?} is not confined"));
        }
        let path = target.join(rel_path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| err(parent, e))?;
        }
        fs::write(&path, data).map_err(|e| err(&path, e))?;
        #[cfg(unix)]
        if executable.contains(rel) {
            use std::os::unix::fs::PermissionsExt;
            fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).map_err(|e| err(&path, e))?;
        }
    }
    #[cfg(not(unix))]
    let _ = executable;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::package::parse_version;
    use crate::update::releases::ReleaseEntry;

    fn feed(names: &[&str]) -> ReleasesFile {
        ReleasesFile {
            entries: names.iter().map(|n| ReleaseEntry::for_package(n, b"x")).collect(),
        }
    }

    fn state(current: &str) -> ClientState {
        ClientState::new(
            parse_version(current).unwrap(),
            SignaturePolicy::Ignore,
            TransportPolicy::AllowPlain,
        )
    }

    #[test]
    fn picks_highest_full_above_seen() {
        let f = feed(&[
            "app-1.0.0-full.nupkg",
            "app-50.0.0-full.nupkg",
            "app-60.0.0-delta.nupkg",
            "app-x-full.nupkg",
        ]);
        assert_eq!(
            select_update(&f, &state("0.8.1")).unwrap().filename,
            "app-50.0.0-full.nupkg"
        );
        let mut s = state("0.8.1");
        s.highest_seen_version = parse_version("50.0.0").unwrap();
        assert!(select_update(&feed(&["app-1.0.0-full.nupkg"]), &s).is_none());
        assert!(select_update(&feed(&["app-0.8.1-full.nupkg"]), &state("0.8.1")).is_none());
    }

    #[test]
    fn url_forms() {
        let (base, rel) = feed_urls("http://h:1/win32").unwrap();
        assert_eq!(
            (base.as_str(), rel.as_str()),
            ("http://h:1/win32/", "http://h:1/win32/RELEASES")
        );
        let (base, rel) = feed_urls("https://h/win32/RELEASES").unwrap();
        assert_eq!(
            (base.as_str(), rel.as_str()),
            ("https://h/win32/", "https://h/win32/RELEASES")
        );
        assert!(feed_urls("ftp://h/").is_err());
    }

    #[test]
    fn plaintext_refused_before_network() {
        let mut s = state("1.0.0");
        s.transport_policy = TransportPolicy::RequireTls;
        let out = mock_client_cycle("http://127.0.0.1:9/win32/", &mut s, Path::new("/nonexistent"), None);
        assert!(matches!(
            out,
            UpdateOutcome::Refused {
                reason: RefusalReason::Transport,
                ..
            }
        ));
        assert_eq!(s, {
            let mut t = state("1.0.0");
            t.transport_policy = TransportPolicy::RequireTls;
            t
        });
    }
}
