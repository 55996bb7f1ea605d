use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::{align4, io_err, AsarError, Result};

/// Block size the stock asar tool uses for per-file integrity hashes.
const INTEGRITY_BLOCK_SIZE: usize = 4 * 1024 * 1024;

enum Node {
    Dir(Vec<(String, Node)>),
    File { path: PathBuf, executable: bool },
}

/// Pack `source_dir` into an archive.
///
/// With `deterministic` set, children are visited in byte-wise name order, so
/// the output depends only on the tree's paths, contents and executable bits.
/// Otherwise children follow the order the filesystem returns them in.
pub fn pack(source_dir: &Path, deterministic: bool) -> Result<Vec<u8>> {
    let meta = fs::symlink_metadata(source_dir).map_err(io_err(source_dir))?;
    if !meta.is_dir() {
        return Err(AsarError::Io {
            path: source_dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "not a directory"),
        });
    }
    let root = scan_dir(source_dir, deterministic)?;

    let mut data = Vec::new();
    let files = emit_dir(&root, &mut data)?;
    let header = json!({ "files": files });
    Ok(assemble(
        &serde_json::to_string(&header).expect("header serializes"),
        &data,
    ))
}

fn scan_dir(dir: &Path, deterministic: bool) -> Result<Vec<(String, Node)>> {
    let mut children = Vec::new();
    for item in fs::read_dir(dir).map_err(io_err(dir))? {
        let item = item.map_err(io_err(dir))?;
        let path = item.path();
        let name = item
            .file_name()
            .into_string()
            .map_err(|_| AsarError::UnencodablePath(path.clone()))?;
        let ft = item.file_type().map_err(io_err(&path))?;
        if ft.is_symlink() {
            return Err(AsarError::SymlinkRefused(path));
        } else if ft.is_dir() {
            let sub = scan_dir(&path, deterministic)?;
            children.push((name, Node::Dir(sub)));
        } else if ft.is_file() {
            let executable = is_executable(&item.metadata().map_err(io_err(&path))?);
            children.push((name, Node::File { path, executable }));
        } else {
            log::warn!("skipping special file {}", path.display());
        }
    }
    if deterministic {
        children.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
    }
    Ok(children)
}

#[cfg(unix)]
fn is_executable(meta: &fs::Metadata) -> bool {
    use std::os::unix::fs::PermissionsExt;
    meta.permissions().mode() & 0o100 != 0
}

#[cfg(not(unix))]
fn is_executable(_meta: &fs::Metadata) -> bool {
    false
}

fn emit_dir(children: &[(String, Node)], data: &mut Vec<u8>) -> Result<Map<String, Value>> {
    let mut files = Map::new();
    for (name, node) in children {
        let value = match node {
            Node::Dir(sub) => json!({ "files": emit_dir(sub, data)? }),
            Node::File { path, executable } => {
                let bytes = fs::read(path).map_err(io_err(path))?;
                let mut entry = Map::new();
                entry.insert("size".into(), json!(bytes.len()));
                entry.insert("offset".into(), json!(data.len().to_string()));
                entry.insert("integrity".into(), integrity(&bytes));
                if *executable {
                    entry.insert("executable".into(), json!(true));
                }
                data.extend_from_slice(&bytes);
                Value::Object(entry)
            }
        };
        files.insert(name.clone(), value);
    }
    Ok(files)
}

/// Per-file integrity record in the stock tool's layout: a hash over the
/// whole file plus one hash per block, where the trailing (possibly empty)
/// partial block is always included.
fn integrity(bytes: &[u8]) -> Value {
    let mut blocks: Vec<String> = Vec::new();
    let mut rest = bytes;
    while rest.len() >= INTEGRITY_BLOCK_SIZE {
        let (block, tail) = rest.split_at(INTEGRITY_BLOCK_SIZE);
        blocks.push(hex::encode(Sha256::digest(block)));
        rest = tail;
    }
    blocks.push(hex::encode(Sha256::digest(rest)));
    json!({
        "algorithm": "SHA256",
        "hash": hex::encode(Sha256::digest(bytes)),
        "blockSize": INTEGRITY_BLOCK_SIZE,
        "blocks": blocks,
    })
}

pub(crate) fn assemble(header_json: &str, data: &[u8]) -> Vec<u8> {
    let json_len = header_json.len();
    let padded = align4(json_len);
    let header_size = (8 + padded) as u32;
    let mut out = Vec::with_capacity(16 + padded + data.len());
    out.extend_from_slice(&4u32.to_le_bytes());
    out.extend_from_slice(&header_size.to_le_bytes());
    out.extend_from_slice(&(header_size - 4).to_le_bytes());
    out.extend_from_slice(&(json_len as u32).to_le_bytes());
    out.extend_from_slice(header_json.as_bytes());
    out.resize(16 + padded, 0);
    out.extend_from_slice(data);
    out
}
