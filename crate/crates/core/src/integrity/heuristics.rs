use std::sync::LazyLock;

use regex::Regex;

use super::{resolve_entry_point, root_manifest, IntegrityError, TamperFinding, TamperKind};
use crate::bundle::BundleSource;
use crate::package::{walk_source, WalkOptions};

const BUILTINS: &[&str] = &[
    "assert",
    "async_hooks",
    "buffer",
    "child_process",
    "cluster",
    "console",
    "constants",
    "crypto",
    "dgram",
    "diagnostics_channel",
    "dns",
    "domain",
    "electron",
    "events",
    "fs",
    "http",
    "http2",
    "https",
    "inspector",
    "module",
    "net",
    "original-fs",
    "os",
    "path",
    "perf_hooks",
    "process",
    "punycode",
    "querystring",
    "readline",
    "repl",
    "stream",
    "string_decoder",
    "sys",
    "timers",
    "tls",
    "trace_events",
    "tty",
    "url",
    "util",
    "v8",
    "vm",
    "wasi",
    "worker_threads",
    "zlib",
];

static REQUIRE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"^(?:(?:const|let|var)\s+[\w$\s{},:]+?\s*=\s*)?require\s*\(\s*(?:'([^'\\]+)'|"([^"\\]+)")\s*\)$"#)
        .expect("valid pattern")
});

/// Module specifiers of the require statements at the very top of a
/// script, before any other code. Shebang, blank lines, comments and the
/// `'use strict'` directive are skipped; scanning stops at the first
/// statement that is not a require.
pub fn leading_requires(source: &str) -> Vec<String> {
    let source = source.strip_prefix('\u{feff}').unwrap_or(source);
    let mut found = Vec::new();
    let mut in_comment = false;
    for (n, line) in source.lines().enumerate() {
        let mut rest = line.trim();
        if n == 0 && rest.starts_with("#!") {
            continue;
        }
        loop {
            if in_comment {
                match rest.find("*/") {
                    Some(i) => {
                        rest = rest[i + 2..].trim_start();
                        in_comment = false;
                    }
                    None => break,
                }
            }
            if rest.is_empty() || rest.starts_with("//") {
                break;
            }
            if let Some(after) = rest.strip_prefix("/*") {
                in_comment = true;
                rest = after;
                continue;
            }
            let (stmt, tail) = match rest.find(';') {
                Some(i) => (&rest[..i], rest[i + 1..].trim_start()),
                None => (rest, ""),
            };
            let stmt = stmt.trim();
            if matches!(stmt, "'use strict'" | "\"use strict\"") {
                rest = tail;
                continue;
            }
            let Some(caps) = REQUIRE.captures(stmt) else {
                return found;
            };
            let spec = caps.get(1).or_else(|| caps.get(2)).expect("one quote style matched");
            found.push(spec.as_str().to_owned());
            rest = tail;
        }
    }
    found
}

/// `@scope/name/sub` -> `@scope/name`, `name/sub` -> `name`; `None` for
/// relative, absolute and builtin specifiers.
fn package_of(spec: &str) -> Option<&str> {
    if spec.starts_with('.') || spec.starts_with('/') || spec.starts_with("node:") {
        return None;
    }
    let end = if spec.starts_with('@') {
        spec.match_indices('/').nth(1).map_or(spec.len(), |(i, _)| i)
    } else {
        spec.find('/').unwrap_or(spec.len())
    };
    let name = &spec[..end];
    (!BUILTINS.contains(&name)).then_some(name)
}

/// Baseline-free checks: leading requires of undeclared packages in the
/// entry file, and top-level modules nothing asks for.
pub fn detect_injection_heuristics(source: &dyn BundleSource) -> Result<Vec<TamperFinding>, IntegrityError> {
    let manifest = root_manifest(source)?;
    let mut findings = Vec::new();
    let entry = resolve_entry_point(source, &manifest)?;
    let bytes = source.read(&entry)?.unwrap_or_default();
    for spec in leading_requires(&String::from_utf8_lossy(&bytes)) {
        if let Some(name) = package_of(&spec) {
            if !manifest.declares(name) {
                findings.push(TamperFinding {
                    kind: TamperKind::PrependedRequire,
                    path: entry.clone(),
                    detail: format!("entry file starts by requiring undeclared module {name:?}"),
                });
            }
        }
    }
    let tree = walk_source(source, WalkOptions::default())?;
    for m in tree.modules.iter().filter(|m| m.depth == 1 && m.orphan) {
        findings.push(TamperFinding {
            kind: TamperKind::UndeclaredModule,
            path: m.install_path.clone(),
            detail: format!("module {:?} is installed but no manifest depends on it", m.name()),
        });
    }
    Ok(findings)
}
