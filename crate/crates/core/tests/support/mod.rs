//! Helpers shared by the integration tests.
#![allow(dead_code)]

pub mod asar_cases;
pub mod feeds;
pub mod oracle;
pub mod tls;

use std::fs;
use std::path::{Path, PathBuf};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(rel: &str) -> PathBuf {
    fixtures().join(rel)
}

/// Fixture application directories that carry no injected code.
pub const CLEAN_APPS: &[&str] = &[
    "apps/pinned",
    "apps/scoped",
    "apps/minimal",
    "apps/ghost",
    "apps/discord",
    "apps/steelseries",
    "apps/threshold",
];

/// Hand-assembled archive: the 16-byte prefix, `json` padded to a multiple
/// of four, then `data`. Written from the format description, not the crate.
pub fn raw_archive(json: &str, data: &[u8]) -> Vec<u8> {
    let l = json.len() as u32;
    let padded = (l + 3) & !3;
    let h = 8 + padded;
    let mut out = Vec::new();
    for v in [4u32, h, h - 4, l] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(json.as_bytes());
    out.resize(16 + padded as usize, 0);
    out.extend_from_slice(data);
    out
}

/// Every file below `root` as (relative slash path, bytes), sorted.
pub fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    for item in fs::read_dir(dir).unwrap() {
        let path = item.unwrap().path();
        if path.is_dir() {
            walk(root, &path, out);
        } else {
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            out.push((rel, fs::read(&path).unwrap()));
        }
    }
}

/// Count of files plus directories below `root`, excluding `root` itself.
pub fn count_nodes(root: &Path) -> usize {
    fs::read_dir(root)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() {
                1 + count_nodes(&p)
            } else {
                1
            }
        })
        .sum()
}

pub fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for item in fs::read_dir(from).unwrap() {
        let item = item.unwrap();
        let dst = to.join(item.file_name());
        if item.file_type().unwrap().is_dir() {
            copy_tree(&item.path(), &dst);
        } else {
            fs::copy(item.path(), dst).unwrap();
        }
    }
}

/// Pack a fixture application directory.
pub fn pack_fixture(rel: &str) -> Vec<u8> {
    bundle_audit::asar::pack(&fixture(rel), true).unwrap()
}
