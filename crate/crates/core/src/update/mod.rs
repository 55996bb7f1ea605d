//! Squirrel-compatible update machinery: the RELEASES feed grammar, full
//! package construction, the client's update selection, a local feed server,
//! a mock auto-updater and a feed security probe.
//!
//! Signatures are modeled as a detached JSON manifest published next to each
//! package (`<file>.manifest.json`) carrying the package's SHA-256 and size.
//! A client that requires signatures refuses any package without a matching
//! manifest.

mod client;
mod feed;
mod package;
mod releases;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use client::{
    mock_client_cycle, select_update, ClientState, RefusalReason, SignaturePolicy, TransportPolicy, UpdateOutcome,
};
pub use feed::{probe_feed, serve_feed, Finding, FindingCode, ProbeFindings};
pub use package::{
    build_full_package, check_signature_manifest, open_package, publish_package, signature_manifest, OpenedPackage,
    PackageMetadata, UpdatePackage, PAYLOAD_DIR, SIGNATURE_SUFFIX,
};
pub use releases::{
    emit_releases, parse_package_filename, parse_releases, verify_entry, Flavor, MalformedLine, PackageName,
    ReleaseEntry, ReleasesFile,
};

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("zip: {0}")]
    Zip(String),
    #[error("invalid package: {0}")]
    InvalidPackage(String),
    #[error("invalid feed: {0}")]
    InvalidFeed(String),
    #[error(transparent)]
    Releases(#[from] MalformedLine),
    #[error("cannot bind feed server: {0}")]
    Bind(#[source] std::io::Error),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> UpdateError + '_ {
    move |source| UpdateError::Io {
        path: path.to_path_buf(),
        source,
    }
}
