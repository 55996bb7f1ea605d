use std::path::Path;
use std::sync::Arc;

use bundle_audit::net::Server;
use bundle_audit::package::parse_version;
use bundle_audit::update::{
    build_full_package, mock_client_cycle, publish_package, serve_feed, ClientState, PackageMetadata, RefusalReason,
    SignaturePolicy, TransportPolicy, UpdateOutcome, UpdatePackage,
};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

use super::{fixture, read_tree};

/// A feed root on disk with one platform directory, served locally.
pub struct FeedSite {
    pub root: TempDir,
    pub server: Server,
    pub package: UpdatePackage,
}

impl FeedSite {
    pub fn url(&self) -> String {
        format!("{}/win32/", self.server.base_url())
    }
}

pub fn package(app_rel: &str, version: &str) -> UpdatePackage {
    let meta = PackageMetadata {
        id: "app".into(),
        version: parse_version(version).unwrap(),
        title: "Fixture App".into(),
        authors: "fixture".into(),
    };
    build_full_package(&fixture(app_rel), &meta).unwrap()
}

pub fn start(app_rel: &str, version: &str, signed: bool, tls: Option<Arc<rustls::ServerConfig>>) -> FeedSite {
    let root = tempfile::tempdir().unwrap();
    let package = package(app_rel, version);
    publish_package(&root.path().join("win32"), &package, signed).unwrap();
    let server = serve_feed(root.path(), "127.0.0.1:0".parse().unwrap(), tls).unwrap();
    FeedSite { root, server, package }
}

pub fn client(version: &str, sig: SignaturePolicy, transport: TransportPolicy) -> ClientState {
    ClientState::new(parse_version(version).unwrap(), sig, transport)
}

fn refused_for(outcome: &UpdateOutcome, want: RefusalReason) -> Result<(), String> {
    match outcome {
        UpdateOutcome::Refused { reason, .. } if *reason == want => Ok(()),
        other => Err(format!("expected refusal ({want:?}), got {other:?}")),
    }
}

/// The hijack chain against a plaintext rogue feed: the permissive client
/// takes the 50.0.0 package and then ignores a genuine 1.0.0; either strict
/// policy alone stops the attack.
pub fn hijack_scenario(install_root: &Path) -> Result<(), String> {
    let rogue = start("update/rogue-app", "50.0.0", false, None);
    let genuine = start("update/genuine-app", "1.0.0", false, None);

    let mut victim = client("0.8.1", SignaturePolicy::Ignore, TransportPolicy::AllowPlain);
    let install = install_root.join("victim");
    match mock_client_cycle(&rogue.url(), &mut victim, &install, None) {
        UpdateOutcome::Applied {
            version,
            package_sha256,
            install_path,
            ..
        } => {
            if version.to_string() != "50.0.0" {
                return Err(format!("applied {version}"));
            }
            if package_sha256 != hex::encode(Sha256::digest(&rogue.package.bytes)) {
                return Err("applied package hash differs from the rogue package".into());
            }
            if read_tree(&install_path) != read_tree(&fixture("update/rogue-app")) {
                return Err("installed payload differs from the rogue tree".into());
            }
        }
        other => return Err(format!("permissive client: {other:?}")),
    }
    if victim.highest_seen_version.to_string() != "50.0.0" {
        return Err(format!("highest seen is {}", victim.highest_seen_version));
    }
    let after = mock_client_cycle(&genuine.url(), &mut victim, &install, None);
    if after != UpdateOutcome::NoUpdate {
        return Err(format!("genuine 1.0.0 after the hijack: {after:?}"));
    }

    let mut tls_only = client("0.8.1", SignaturePolicy::Ignore, TransportPolicy::RequireTls);
    let before = tls_only.clone();
    refused_for(
        &mock_client_cycle(&rogue.url(), &mut tls_only, &install_root.join("tls"), None),
        RefusalReason::Transport,
    )?;
    if tls_only != before {
        return Err("refused cycle changed client state".into());
    }

    let mut signed_only = client("0.8.1", SignaturePolicy::Require, TransportPolicy::AllowPlain);
    let target = install_root.join("sig");
    refused_for(
        &mock_client_cycle(&rogue.url(), &mut signed_only, &target, None),
        RefusalReason::Signature,
    )?;
    if target.exists() {
        return Err("refused cycle wrote into the install directory".into());
    }
    Ok(())
}
