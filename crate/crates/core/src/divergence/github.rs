//! Live provider backed by the GitHub REST API.

use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::Deserialize;

use super::{Comparison, ProviderError, ProviderErrorKind, RepoCoordinates, RepoMetadataProvider};
use crate::net::http_agent;

/// Environment variable holding the API token.
pub const TOKEN_ENV: &str = "AUDIT_GITHUB_TOKEN";

pub struct GitHubProvider {
    agent: ureq::Agent,
    base_url: String,
    token: Option<String>,
    /// Waits up to this long for a rate-limit window to reopen before
    /// giving up with `RateLimited`.
    pub max_backoff: Duration,
    not_before: Mutex<Option<Instant>>,
}

impl GitHubProvider {
    /// Provider for `https://api.github.com`, token from [`TOKEN_ENV`].
    pub fn from_env() -> Result<Self, ProviderError> {
        Self::new("https://api.github.com", std::env::var(TOKEN_ENV).ok(), None)
    }

    pub fn new(base_url: &str, token: Option<String>, extra_root_pem: Option<&[u8]>) -> Result<Self, ProviderError> {
        let agent = http_agent(extra_root_pem, Duration::from_secs(30))
            .map_err(|e| ProviderError::new(ProviderErrorKind::Transport, e.to_string()))?;
        Ok(GitHubProvider {
            agent,
            base_url: base_url.trim_end_matches('/').to_owned(),
            token: token.filter(|t| !t.is_empty()),
            max_backoff: Duration::from_secs(60),
            not_before: Mutex::new(None),
        })
    }

    fn wait_for_window(&self) -> Result<(), ProviderError> {
        let until = *self.not_before.lock().expect("backoff state");
        if let Some(until) = until {
            let now = Instant::now();
            if until > now {
                let wait = until - now;
                if wait > self.max_backoff {
                    return Err(ProviderError {
                        kind: ProviderErrorKind::RateLimited,
                        message: "rate limit window still closed".into(),
                        retry_after: Some(wait),
                    });
                }
                std::thread::sleep(wait);
            }
        }
        Ok(())
    }

    /// Push the shared window forward; never moves it backwards, so
    /// concurrent updates cannot lose each other.
    fn back_off(&self, wait: Duration) {
        let mut slot = self.not_before.lock().expect("backoff state");
        let until = Instant::now() + wait;
        if slot.is_none_or(|cur| cur < until) {
            *slot = Some(until);
        }
    }

    /// GET `path`; `Ok(None)` on 404.
    fn get(&self, path: &str) -> Result<Option<Vec<u8>>, ProviderError> {
        let url = format!("{}{path}", self.base_url);
        for attempt in 0..2 {
            self.wait_for_window()?;
            let mut req = self
                .agent
                .get(&url)
                .header("Accept", "application/vnd.github+json")
                .header("X-GitHub-Api-Version", "2022-11-28");
            if let Some(t) = &self.token {
                req = req.header("Authorization", format!("Bearer {t}"));
            }
            let mut resp = req
                .call()
                .map_err(|e| ProviderError::new(ProviderErrorKind::Transport, format!("{url}: {e}")))?;
            let status = resp.status().as_u16();
            let header = |name: &str| {
                resp.headers()
                    .get(name)
                    .and_then(|v| v.to_str().ok())
                    .map(str::to_owned)
            };
            let limited = status == 429
                || (status == 403
                    && (header("retry-after").is_some() || header("x-ratelimit-remaining").as_deref() == Some("0")));
            if limited {
                let wait = rate_limit_wait(header("retry-after"), header("x-ratelimit-reset"));
                self.back_off(wait);
                if attempt == 0 && wait <= self.max_backoff {
                    log::info!("rate limited, retrying in {}s", wait.as_secs());
                    continue;
                }
                return Err(ProviderError {
                    kind: ProviderErrorKind::RateLimited,
                    message: format!("{url}: HTTP {status}"),
                    retry_after: Some(wait),
                });
            }
            return match status {
                200..=299 => resp
                    .body_mut()
                    .read_to_vec()
                    .map(Some)
                    .map_err(|e| ProviderError::new(ProviderErrorKind::Transport, e.to_string())),
                404 => Ok(None),
                401 | 403 => Err(ProviderError::new(
                    ProviderErrorKind::Auth,
                    format!("{url}: HTTP {status}"),
                )),
                _ => Err(ProviderError::new(
                    ProviderErrorKind::Protocol,
                    format!("{url}: HTTP {status}"),
                )),
            };
        }
        unreachable!("second attempt always returns")
    }

    fn get_json<T: for<'de> Deserialize<'de>>(&self, path: &str) -> Result<T, ProviderError> {
        let body = self
            .get(path)?
            .ok_or_else(|| ProviderError::new(ProviderErrorKind::NotFound, format!("{path}: HTTP 404")))?;
        serde_json::from_slice(&body)
            .map_err(|e| ProviderError::new(ProviderErrorKind::Protocol, format!("{path}: {e}")))
    }

    fn check_host(repo: &RepoCoordinates) -> Result<(), ProviderError> {
        if repo.host == "github.com" {
            Ok(())
        } else {
            Err(ProviderError::new(
                ProviderErrorKind::Unsupported,
                format!("{} is not hosted on github.com", repo),
            ))
        }
    }
}

/// `retry-after` seconds win; otherwise wait until the `x-ratelimit-reset`
/// epoch; otherwise a minute.
fn rate_limit_wait(retry_after: Option<String>, reset: Option<String>) -> Duration {
    if let Some(secs) = retry_after.and_then(|s| s.trim().parse::<u64>().ok()) {
        return Duration::from_secs(secs);
    }
    if let Some(reset) = reset.and_then(|s| s.trim().parse::<u64>().ok()) {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
            .as_secs();
        return Duration::from_secs(reset.saturating_sub(now));
    }
    Duration::from_secs(60)
}

fn escape(segment: &str) -> String {
    url::form_urlencoded::byte_serialize(segment.as_bytes())
        .collect::<String>()
        .replace('+', "%20")
}

#[derive(Deserialize)]
struct RepoInfo {
    default_branch: String,
}

#[derive(Deserialize)]
struct CompareInfo {
    ahead_by: u64,
    behind_by: u64,
}

impl RepoMetadataProvider for GitHubProvider {
    fn default_branch(&self, repo: &RepoCoordinates) -> Result<String, ProviderError> {
        Self::check_host(repo)?;
        let info: RepoInfo = self.get_json(&format!("/repos/{}/{}", escape(&repo.owner), escape(&repo.repo)))?;
        Ok(info.default_branch)
    }

    fn tag_exists(&self, repo: &RepoCoordinates, tag: &str) -> Result<bool, ProviderError> {
        Self::check_host(repo)?;
        let path = format!(
            "/repos/{}/{}/git/ref/tags/{}",
            escape(&repo.owner),
            escape(&repo.repo),
            escape(tag)
        );
        Ok(self.get(&path)?.is_some())
    }

    fn compare(&self, repo: &RepoCoordinates, base: &str, head: &str) -> Result<Comparison, ProviderError> {
        Self::check_host(repo)?;
        let info: CompareInfo = self.get_json(&format!(
            "/repos/{}/{}/compare/{}...{}",
            escape(&repo.owner),
            escape(&repo.repo),
            escape(base),
            escape(head)
        ))?;
        Ok(Comparison {
            ahead_by: info.ahead_by,
            behind_by: info.behind_by,
        })
    }
}
