use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use bundle_audit::advisory::{audit_tree, load_db};
use bundle_audit::asar;
use bundle_audit::bundle::{ArchiveBundle, Bundle};
use bundle_audit::divergence::{scan_divergence, CassetteProvider, GitHubProvider, ScanOptions, TOKEN_ENV};
use bundle_audit::integrity::{build_baseline, check_baseline, detect_injection_heuristics, inject_fixture, Baseline};
use bundle_audit::net::tls_server_config;
use bundle_audit::package::{parse_version, tree_stats, walk_source, DependencyTree, SemVer, TreeStats, WalkOptions};
use bundle_audit::report::{self, DivergenceRow};
use bundle_audit::update::{
    build_full_package, mock_client_cycle, probe_feed, publish_package, serve_feed, ClientState, PackageMetadata,
    SignaturePolicy, TransportPolicy, UpdateOutcome,
};
use serde::Serialize;

use crate::output::Out;
use crate::{AsarCmd, FixtureCmd, IntegrityCmd, ScanCmd, UpdateCmd, WalkArgs};

pub enum Status {
    Clean,
    Findings,
}

impl Status {
    fn from_findings(any: bool) -> Self {
        if any {
            Status::Findings
        } else {
            Status::Clean
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_opt(path: Option<&PathBuf>) -> Result<Option<Vec<u8>>> {
    path.map(|p| read(p)).transpose()
}

fn version(text: &str) -> Result<SemVer> {
    parse_version(text).with_context(|| format!("version {text:?}"))
}

fn open(path: &Path) -> Result<Bundle> {
    Bundle::open(path).with_context(|| format!("opening bundle {}", path.display()))
}

fn walk(path: &Path, w: &WalkArgs) -> Result<DependencyTree> {
    let opts = WalkOptions {
        include_dev: w.dev,
        include_optional: w.optional,
        include_peer: w.peer,
    };
    walk_source(&open(path)?, opts).with_context(|| format!("walking {}", path.display()))
}

/// Display name: the manifest name, else the bundle's file name.
fn app_name(tree: &DependencyTree, path: &Path) -> String {
    if !tree.root_manifest.name.is_empty() {
        return tree.root_manifest.name.clone();
    }
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn asar(cmd: AsarCmd, out: &Out) -> Result<Status> {
    match cmd {
        AsarCmd::Extract { archive, dest } => {
            let bytes = read(&archive)?;
            let r = asar::extract(&bytes, &dest).with_context(|| format!("extracting {}", archive.display()))?;
            if out.json() {
                out.envelope("asar_extract", &r);
            } else {
                out.text(&format!(
                    "extracted {} files ({} bytes) to {}\n",
                    r.files_written,
                    r.bytes_written,
                    dest.display()
                ));
            }
        }
        AsarCmd::Pack { dir, out: path } => {
            let bytes = asar::pack(&dir, true).with_context(|| format!("packing {}", dir.display()))?;
            let entries = asar::list_entries(&bytes)?.iter().filter(|e| e.is_file()).count();
            write(&path, &bytes)?;
            #[derive(Serialize)]
            struct Packed<'a> {
                output: &'a Path,
                files: usize,
                bytes: usize,
            }
            if out.json() {
                out.envelope(
                    "asar_pack",
                    &Packed {
                        output: &path,
                        files: entries,
                        bytes: bytes.len(),
                    },
                );
            } else {
                out.text(&format!(
                    "packed {entries} files into {} ({} bytes)\n",
                    path.display(),
                    bytes.len()
                ));
            }
        }
        AsarCmd::List { archive } => {
            let entries =
                asar::list_entries(&read(&archive)?).with_context(|| format!("reading {}", archive.display()))?;
            if out.json() {
                out.envelope("asar_list", &entries);
            } else {
                let mut t = String::from("Path  Kind  Size  Flags\n");
                for e in &entries {
                    let size = e.size.map_or_else(|| "---".to_owned(), |s| s.to_string());
                    let mut flags = Vec::new();
                    if e.executable {
                        flags.push("executable");
                    }
                    if e.unpacked {
                        flags.push("unpacked");
                    }
                    let kind = if e.is_file() { "file" } else { "dir" };
                    t += &format!("{}  {kind}  {size}  {}\n", e.path, flags.join(","));
                }
                out.table(&t);
            }
        }
    }
    Ok(Status::Clean)
}

pub fn scan(cmd: ScanCmd, out: &Out) -> Result<Status> {
    match cmd {
        ScanCmd::Deps { bundle, walk: w } => {
            let tree = walk(&bundle, &w)?;
            let stats = tree_stats(&tree);
            #[derive(Serialize)]
            struct Deps<'a> {
                application: String,
                stats: &'a TreeStats,
                tree: &'a DependencyTree,
            }
            if out.json() {
                out.envelope(
                    "deps",
                    &Deps {
                        application: app_name(&tree, &bundle),
                        stats: &stats,
                        tree: &tree,
                    },
                );
            } else {
                out.table(&report::render_tree(&tree, &stats));
            }
            Ok(Status::Clean)
        }
        ScanCmd::Advisories { db, bundles, walk: w } => {
            let db = load_db(&db).with_context(|| format!("loading advisories {}", db.display()))?;
            let mut reports = Vec::new();
            for path in &bundles {
                let tree = walk(path, &w)?;
                let r = audit_tree(&db, &tree, &app_name(&tree, path));
                for warning in &r.warnings {
                    log::warn!("{}: {warning}", r.application_name);
                }
                reports.push(r);
            }
            if out.json() {
                out.envelope("advisories", &reports);
            } else {
                let mut text = report::render_advisory_table(&reports);
                for r in reports.iter().filter(|r| !r.matches.is_empty()) {
                    text += &format!("\n{}\n", r.application_name);
                    text += &report::render_advisory_matches(r);
                }
                out.table(&text);
            }
            Ok(Status::from_findings(reports.iter().any(|r| !r.matches.is_empty())))
        }
        ScanCmd::Divergence {
            bundles,
            cassette,
            github_api,
            ca_cert,
            threshold,
            parallelism,
        } => {
            let provider: Box<dyn bundle_audit::divergence::RepoMetadataProvider> = match &cassette {
                Some(path) => Box::new(
                    CassetteProvider::load(path).with_context(|| format!("loading cassette {}", path.display()))?,
                ),
                None => {
                    let token = std::env::var(TOKEN_ENV).ok();
                    if token.is_none() {
                        log::warn!("{TOKEN_ENV} is not set; unauthenticated API requests are heavily rate limited");
                    }
                    let pem = read_opt(ca_cert.as_ref())?;
                    Box::new(
                        GitHubProvider::new(&github_api, token, pem.as_deref()).map_err(|e| anyhow::anyhow!("{e}"))?,
                    )
                }
            };
            let opts = ScanOptions {
                threshold,
                parallelism: usize::from(parallelism),
            };
            let mut rows = Vec::new();
            for path in &bundles {
                let tree = walk(
                    path,
                    &WalkArgs {
                        dev: false,
                        optional: false,
                        peer: false,
                    },
                )?;
                rows.push(DivergenceRow {
                    application: app_name(&tree, path),
                    stats: tree_stats(&tree),
                    report: scan_divergence(&tree, provider.as_ref(), opts),
                });
            }
            if out.json() {
                out.envelope("divergence", &rows);
            } else {
                let mut text = report::render_divergence_table(&rows);
                for r in &rows {
                    text += &format!("\n{}\n", r.application);
                    text += &report::render_divergence_records(&r.report);
                }
                out.table(&text);
            }
            Ok(Status::from_findings(
                rows.iter().any(|r| r.report.suspects().next().is_some()),
            ))
        }
    }
}

pub fn update(cmd: UpdateCmd, out: &Out) -> Result<Status> {
    match cmd {
        UpdateCmd::Serve {
            root,
            bind,
            tls_cert,
            tls_key,
            duration,
        } => {
            let tls = match (tls_cert, tls_key) {
                (Some(c), Some(k)) => Some(tls_server_config(&read(&c)?, &read(&k)?).context("loading TLS identity")?),
                _ => None,
            };
            let server = serve_feed(&root, bind, tls).with_context(|| format!("serving {}", root.display()))?;
            out.text(&format!("serving {} at {}\n", root.display(), server.base_url()));
            let deadline = duration.map(|s| Instant::now() + Duration::from_secs(s));
            let mut logged = 0;
            while deadline.is_none_or(|d| Instant::now() < d) {
                std::thread::sleep(Duration::from_millis(100));
                let requests = server.requests();
                for r in &requests[logged..] {
                    out.text(&format!("{} {} {}\n", r.method, r.path, r.status));
                }
                logged = requests.len();
            }
            server.shutdown();
            Ok(Status::Clean)
        }
        UpdateCmd::Probe { url, fetch, ca_cert } => {
            let pem = read_opt(ca_cert.as_ref())?;
            let p = probe_feed(&url, fetch, pem.as_deref());
            if out.json() {
                out.envelope("probe", &p);
            } else {
                out.text(&report::render_probe(&p));
            }
            Ok(Status::from_findings(!p.is_clean()))
        }
        UpdateCmd::MakePackage {
            app_dir,
            id,
            version: v,
            title,
            authors,
            feed_dir,
            sign,
        } => {
            let metadata = PackageMetadata {
                title: title.unwrap_or_else(|| id.clone()),
                id,
                version: version(&v)?,
                authors,
            };
            let pkg =
                build_full_package(&app_dir, &metadata).with_context(|| format!("packaging {}", app_dir.display()))?;
            let path = publish_package(&feed_dir, &pkg, sign)
                .with_context(|| format!("publishing to {}", feed_dir.display()))?;
            let entry = pkg.release_entry();
            #[derive(Serialize)]
            struct Published<'a> {
                path: &'a Path,
                filename: &'a str,
                sha1: String,
                size: u64,
                signed: bool,
            }
            if out.json() {
                out.envelope(
                    "package",
                    &Published {
                        path: &path,
                        filename: &pkg.filename,
                        sha1: entry.sha1_hex(),
                        size: entry.size,
                        signed: sign,
                    },
                );
            } else {
                out.text(&format!(
                    "wrote {}{}\n",
                    path.display(),
                    if sign { " (signed)" } else { "" }
                ));
                out.text(&format!("{} {} {}\n", entry.sha1_hex(), pkg.filename, entry.size));
            }
            Ok(Status::Clean)
        }
        UpdateCmd::SimulateClient {
            feed_url,
            current,
            highest_seen,
            install_dir,
            require_signature,
            require_tls,
            ca_cert,
        } => {
            let sig = if require_signature {
                SignaturePolicy::Require
            } else {
                SignaturePolicy::Ignore
            };
            let transport = if require_tls {
                TransportPolicy::RequireTls
            } else {
                TransportPolicy::AllowPlain
            };
            let mut state = ClientState::new(version(&current)?, sig, transport);
            if let Some(h) = highest_seen {
                let h = version(&h)?;
                if h < state.current_version {
                    bail!("--highest-seen {h} is below --current {}", state.current_version);
                }
                state.highest_seen_version = h;
            }
            let pem = read_opt(ca_cert.as_ref())?;
            let outcome = mock_client_cycle(&feed_url, &mut state, &install_dir, pem.as_deref());
            #[derive(Serialize)]
            struct Cycle<'a> {
                outcome: &'a UpdateOutcome,
                state: &'a ClientState,
            }
            if out.json() {
                out.envelope(
                    "update_cycle",
                    &Cycle {
                        outcome: &outcome,
                        state: &state,
                    },
                );
            } else {
                out.text(&report::render_update_outcome(&outcome));
                out.text(&format!(
                    "state: current {}, highest seen {}\n",
                    state.current_version, state.highest_seen_version
                ));
            }
            Ok(Status::from_findings(matches!(outcome, UpdateOutcome::Refused { .. })))
        }
    }
}

pub fn integrity(cmd: IntegrityCmd, out: &Out) -> Result<Status> {
    let findings = match cmd {
        IntegrityCmd::Baseline { bundle, out: path } => {
            let b = build_baseline(&open(&bundle)?).with_context(|| format!("baseline of {}", bundle.display()))?;
            match path {
                Some(path) => {
                    write(&path, format!("{}\n", b.to_json()).as_bytes())?;
                    if out.json() {
                        out.envelope("baseline", &b);
                    } else {
                        out.text(&format!(
                            "baseline of {} files for {} (entry point {}) written to {}\n",
                            b.entries.len(),
                            b.app_name,
                            b.entry_point,
                            path.display()
                        ));
                    }
                }
                None => out.text(&format!("{}\n", b.to_json())),
            }
            return Ok(Status::Clean);
        }
        IntegrityCmd::Check { bundle, baseline } => {
            let b =
                Baseline::from_json(&read(&baseline)?).with_context(|| format!("loading {}", baseline.display()))?;
            check_baseline(&open(&bundle)?, &b).with_context(|| format!("checking {}", bundle.display()))?
        }
        IntegrityCmd::Heuristics { bundle } => {
            detect_injection_heuristics(&open(&bundle)?).with_context(|| format!("inspecting {}", bundle.display()))?
        }
    };
    if out.json() {
        out.envelope("tamper_findings", &findings);
    } else {
        out.table(&report::render_tamper_findings(&findings));
    }
    Ok(Status::from_findings(!findings.is_empty()))
}

pub fn fixture(cmd: FixtureCmd, out: &Out) -> Result<Status> {
    let FixtureCmd::Inject {
        archive,
        payload,
        name,
        out: path,
    } = cmd;
    let bytes = read(&archive)?;
    // Parse first so a directory or non-archive fails with a clear message.
    ArchiveBundle::new(bytes.clone()).with_context(|| format!("{} is not an asar archive", archive.display()))?;
    let (modified, record) = inject_fixture(&bytes, &payload, &name).context("injecting fixture payload")?;
    write(&path, &modified)?;
    if out.json() {
        out.envelope("injection", &record);
    } else {
        let steps: Vec<String> = record
            .steps
            .iter()
            .map(|s| {
                serde_json::to_value(s)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default()
            })
            .collect();
        out.text(&format!(
            "injected {} into {} ({}), {:+} bytes, written to {}\nsteps: {}\n",
            record.payload_name,
            record.app_name,
            record.entry_point,
            record.bytes_added,
            path.display(),
            steps.join(", ")
        ));
    }
    Ok(Status::Clean)
}
