use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use super::client::{feed_urls, fetch};
use super::package::SIGNATURE_SUFFIX;
use super::releases::parse_releases;
use super::UpdateError;
use crate::bundle::{BundleSource, DirBundle};
use crate::net::{http_agent, Request, Response, Server};

/// Serve every file below `root_dir` (laid out as `<platform>/RELEASES` and
/// `<platform>/<package>`) at its relative path. The tree is read once at
/// startup; later changes on disk are not visible until restart.
pub fn serve_feed(
    root_dir: &Path,
    bind: SocketAddr,
    tls: Option<Arc<rustls::ServerConfig>>,
) -> Result<Server, UpdateError> {
    let source = DirBundle::new(root_dir);
    let mut files: HashMap<String, Vec<u8>> = HashMap::new();
    for rel in source.files().map_err(|e| UpdateError::InvalidFeed(e.to_string()))? {
        let bytes = source
            .read(&rel)
            .map_err(|e| UpdateError::InvalidFeed(e.to_string()))?
            .unwrap_or_default();
        files.insert(format!("/{rel}"), bytes);
    }
    log::info!("serving {} files from {}", files.len(), root_dir.display());
    let handler = move |req: &Request| match files.get(&req.path) {
        Some(bytes) => Response::ok(bytes.clone(), content_type(&req.path)),
        None => Response::status(404),
    };
    Server::start(bind, tls, Arc::new(handler)).map_err(UpdateError::Bind)
}

fn content_type(path: &str) -> &'static str {
    if path.ends_with("/RELEASES") {
        "text/plain; charset=utf-8"
    } else if path.ends_with(".json") {
        "application/json"
    } else {
        "application/octet-stream"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingCode {
    InsecureTransport,
    UnsignedPackages,
    /// Nothing but a version comparison stands between the feed and the
    /// client: plaintext transport and no signature manifests.
    VersionCheckOnly,
    FetchFailed,
    InvalidUrl,
    Ok,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub code: FindingCode,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeFindings {
    pub feed_url: String,
    pub findings: Vec<Finding>,
}

impl ProbeFindings {
    pub fn has(&self, code: FindingCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    /// Whether the probe found anything other than `ok`.
    pub fn is_clean(&self) -> bool {
        self.findings.iter().all(|f| f.code == FindingCode::Ok)
    }
}

fn finding(code: FindingCode, detail: impl Into<String>) -> Finding {
    Finding {
        code,
        detail: detail.into(),
    }
}

/// Inspect an update feed. Without `fetch` only the URL is judged; with it
/// the RELEASES file is downloaded and each listed package is checked for a
/// signature manifest. Failures become findings.
pub fn probe_feed(feed_url: &str, fetch_feed: bool, extra_root_pem: Option<&[u8]>) -> ProbeFindings {
    let mut findings = Vec::new();
    let (base, releases_url) = match feed_urls(feed_url) {
        Ok(u) => u,
        Err(e) => {
            findings.push(finding(FindingCode::InvalidUrl, e));
            return ProbeFindings {
                feed_url: feed_url.to_owned(),
                findings,
            };
        }
    };
    let plaintext = releases_url.scheme() == "http";
    if plaintext {
        findings.push(finding(
            FindingCode::InsecureTransport,
            "feed is served over plain HTTP; RELEASES and packages can be replaced in transit",
        ));
    }

    if fetch_feed {
        match probe_signatures(&base, &releases_url, extra_root_pem) {
            Err(e) => findings.push(finding(FindingCode::FetchFailed, e)),
            Ok(unsigned) if !unsigned.is_empty() => {
                findings.push(finding(
                    FindingCode::UnsignedPackages,
                    format!("no signature manifest for: {}", unsigned.join(", ")),
                ));
                if plaintext {
                    findings.push(finding(
                        FindingCode::VersionCheckOnly,
                        "clients can only compare version numbers; any higher version offered is taken",
                    ));
                }
            }
            Ok(_) => {}
        }
    }
    if findings.is_empty() {
        findings.push(finding(FindingCode::Ok, "no weaknesses found"));
    }
    ProbeFindings {
        feed_url: feed_url.to_owned(),
        findings,
    }
}

/// Names of listed packages that have no signature manifest beside them.
fn probe_signatures(
    base: &url::Url,
    releases_url: &url::Url,
    extra_root_pem: Option<&[u8]>,
) -> Result<Vec<String>, String> {
    let agent = http_agent(extra_root_pem, Duration::from_secs(30)).map_err(|e| e.to_string())?;
    let body = fetch(&agent, releases_url, 1 << 20)?.ok_or_else(|| format!("{releases_url}: HTTP 404"))?;
    let text = String::from_utf8(body).map_err(|_| "RELEASES is not UTF-8".to_owned())?;
    let feed = parse_releases(&text).map_err(|e| e.to_string())?;
    let mut unsigned = Vec::new();
    for entry in &feed.entries {
        let url = base
            .join(&format!("{}{SIGNATURE_SUFFIX}", entry.filename))
            .map_err(|e| e.to_string())?;
        if fetch(&agent, &url, 1 << 20)?.is_none() {
            unsigned.push(entry.filename.clone());
        }
    }
    Ok(unsigned)
}
