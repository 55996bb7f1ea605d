//! Reader and writer for Electron `asar` archives.
//!
//! An archive is a Chromium pickle holding the header size, a second pickle
//! holding the JSON header string, and then the concatenated file contents:
//!
//! ```text
//! 0..4    u32 LE = 4            size of the first pickle's payload
//! 4..8    u32 LE = H            size of the header pickle
//! 8..12   u32 LE = H - 4        header pickle payload size
//! 12..16  u32 LE = L            JSON string length
//! 16..    L bytes of JSON, zero padded to a multiple of 4
//! 8 + H.. file data
//! ```

mod extract;
mod pack;

use std::cmp::Ordering;
use std::io;
use std::path::PathBuf;

use serde_json::{Map, Value};
use thiserror::Error;

pub use extract::{extract, ExtractReport};
pub use pack::pack;

/// Headers larger than this are refused outright.
pub const MAX_HEADER_SIZE: u32 = 256 * 1024 * 1024;

const SIZE_PICKLE_PAYLOAD: u32 = 4;
const PREFIX_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum AsarError {
    #[error("archive truncated: {0}")]
    Truncated(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsafe entry path {0:?}")]
    UnsafePath(String),
    #[error("{path}: {reason}")]
    NotFound { path: String, reason: NotFoundReason },
    #[error("symbolic link refused: {}", .0.display())]
    SymlinkRefused(PathBuf),
    #[error("file name is not valid UTF-8: {}", .0.display())]
    UnencodablePath(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Sub-code distinguishing why a lookup produced no bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotFoundReason {
    /// No entry with that path.
    Missing,
    /// The entry is a directory.
    NotAFile,
    /// The file lives in the `.unpacked` sidecar, outside the archive.
    Unpacked,
}

impl std::fmt::Display for NotFoundReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NotFoundReason::Missing => "no such entry",
            NotFoundReason::NotAFile => "entry is a directory",
            NotFoundReason::Unpacked => "entry is stored unpacked outside the archive",
        })
    }
}

pub type Result<T, E = AsarError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> AsarError {
    let path = path.into();
    move |source| AsarError::Io { path, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    File,
    Directory,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct EntryMeta {
    /// Slash separated path relative to the archive root.
    pub path: String,
    pub kind: EntryKind,
    /// Offset relative to the start of the data region. Absent for
    /// directories and unpacked files.
    pub offset: Option<u64>,
    pub size: Option<u64>,
    pub executable: bool,
    pub unpacked: bool,
}

impl EntryMeta {
    pub fn is_file(&self) -> bool {
        self.kind == EntryKind::File
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveIndex {
    /// Depth-first, sorted by path segment; a directory precedes its children.
    pub entries: Vec<EntryMeta>,
    pub header_json_length: u32,
    /// `H`, the size of the header pickle.
    pub header_size: u32,
    pub data_start_offset: u64,
}

impl ArchiveIndex {
    pub fn get(&self, path: &str) -> Option<&EntryMeta> {
        let wanted = normalize_lookup(path);
        self.entries
            .binary_search_by(|e| compare_paths(&e.path, &wanted))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn files(&self) -> impl Iterator<Item = &EntryMeta> {
        self.entries.iter().filter(|e| e.is_file())
    }

    /// Slice the bytes of `path` out of `archive`, which must be the buffer
    /// this index was parsed from.
    pub fn read<'a>(&self, archive: &'a [u8], path: &str) -> Result<&'a [u8]> {
        let entry = self.get(path).ok_or_else(|| AsarError::NotFound {
            path: path.to_owned(),
            reason: NotFoundReason::Missing,
        })?;
        if !entry.is_file() {
            return Err(AsarError::NotFound {
                path: path.to_owned(),
                reason: NotFoundReason::NotAFile,
            });
        }
        if entry.unpacked {
            return Err(AsarError::NotFound {
                path: path.to_owned(),
                reason: NotFoundReason::Unpacked,
            });
        }
        let (start, end) = extent(self.data_start_offset, entry)
            .ok_or_else(|| AsarError::Truncated(format!("{path}: extent overflows")))?;
        if end > archive.len() as u64 {
            return Err(AsarError::Truncated(format!(
                "{path}: needs {end} bytes, archive has {}",
                archive.len()
            )));
        }
        Ok(&archive[start as usize..end as usize])
    }
}

fn extent(data_start: u64, entry: &EntryMeta) -> Option<(u64, u64)> {
    let start = data_start.checked_add(entry.offset?)?;
    let end = start.checked_add(entry.size?)?;
    Some((start, end))
}

/// Orders paths segment by segment so that a directory sorts immediately
/// before its own children (`sub` < `sub/b` < `sub-x`).
pub(crate) fn compare_paths(a: &str, b: &str) -> Ordering {
    a.split('/').cmp(b.split('/'))
}

fn normalize_lookup(path: &str) -> String {
    path.split(['/', '\\'])
        .filter(|s| !s.is_empty() && *s != ".")
        .collect::<Vec<_>>()
        .join("/")
}

/// Validate a single header key as a path segment.
pub(crate) fn check_segment(name: &str) -> bool {
    let bytes = name.as_bytes();
    let drive_prefix = bytes.len() >= 2 && bytes[0].is_ascii_alphabetic() && bytes[1] == b':';
    !(name.is_empty() || name == "." || name == ".." || name.contains(['/', '\\', '\0']) || drive_prefix)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub(crate) fn align4(n: usize) -> usize {
    (n + 3) & !3
}

/// Parse and validate the header of an archive held in memory.
pub fn parse_header(archive: &[u8]) -> Result<ArchiveIndex> {
    if archive.len() < PREFIX_LEN {
        return Err(AsarError::Truncated(format!(
            "{} bytes is shorter than the 16-byte prefix",
            archive.len()
        )));
    }
    let sentinel = read_u32(archive, 0);
    if sentinel != SIZE_PICKLE_PAYLOAD {
        return Err(AsarError::MalformedHeader(format!(
            "expected size pickle payload 4, found {sentinel}"
        )));
    }
    let header_size = read_u32(archive, 4);
    if header_size > MAX_HEADER_SIZE {
        return Err(AsarError::MalformedHeader(format!(
            "header size {header_size} exceeds the {MAX_HEADER_SIZE} byte limit"
        )));
    }
    if header_size < 8 {
        return Err(AsarError::MalformedHeader(format!(
            "header size {header_size} is too small"
        )));
    }
    let payload = read_u32(archive, 8);
    if payload != header_size - 4 {
        return Err(AsarError::MalformedHeader(format!(
            "header payload size {payload} does not match header size {header_size}"
        )));
    }
    let json_len = read_u32(archive, 12) as u64;
    let h = header_size as u64;
    if !(json_len + 8 <= h && h < json_len + 8 + 4) {
        return Err(AsarError::MalformedHeader(format!(
            "JSON length {json_len} is inconsistent with header size {header_size}"
        )));
    }
    let data_start = 8 + h;
    if data_start > archive.len() as u64 {
        return Err(AsarError::Truncated(format!(
            "header ends at {data_start}, archive has {} bytes",
            archive.len()
        )));
    }
    let json = &archive[PREFIX_LEN..PREFIX_LEN + json_len as usize];
    let root: Value =
        serde_json::from_slice(json).map_err(|e| AsarError::MalformedHeader(format!("header JSON: {e}")))?;
    let files = root
        .as_object()
        .and_then(|o| o.get("files"))
        .and_then(Value::as_object)
        .ok_or_else(|| AsarError::MalformedHeader("root has no \"files\" object".into()))?;

    let mut entries = Vec::new();
    collect_entries(files, "", &mut entries)?;

    let archive_len = archive.len() as u64;
    let mut extents = Vec::new();
    for entry in entries.iter().filter(|e| e.is_file() && !e.unpacked) {
        let (start, end) = extent(data_start, entry)
            .ok_or_else(|| AsarError::Truncated(format!("{}: extent overflows", entry.path)))?;
        if end > archive_len {
            return Err(AsarError::Truncated(format!(
                "{}: extent ends at {end}, archive has {archive_len} bytes",
                entry.path
            )));
        }
        if end > start {
            extents.push((start, end, entry.path.as_str()));
        }
    }
    extents.sort_unstable();
    for pair in extents.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(AsarError::MalformedHeader(format!(
                "file extents of {} and {} overlap",
                pair[0].2, pair[1].2
            )));
        }
    }

    Ok(ArchiveIndex {
        entries,
        header_json_length: json_len as u32,
        header_size,
        data_start_offset: data_start,
    })
}

fn collect_entries(files: &Map<String, Value>, prefix: &str, out: &mut Vec<EntryMeta>) -> Result<()> {
    let mut names: Vec<&String> = files.keys().collect();
    names.sort_unstable_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
    for name in names {
        let path = if prefix.is_empty() {
            name.clone()
        } else {
            format!("{prefix}/{name}")
        };
        if !check_segment(name) {
            return Err(AsarError::UnsafePath(path));
        }
        let node = files[name]
            .as_object()
            .ok_or_else(|| AsarError::MalformedHeader(format!("{path}: node is not an object")))?;
        if let Some(children) = node.get("files") {
            let children = children
                .as_object()
                .ok_or_else(|| AsarError::MalformedHeader(format!("{path}: \"files\" is not an object")))?;
            out.push(EntryMeta {
                path: path.clone(),
                kind: EntryKind::Directory,
                offset: None,
                size: None,
                executable: false,
                unpacked: flag(node, "unpacked", &path)?,
            });
            collect_entries(children, &path, out)?;
        } else if node.contains_key("link") {
            return Err(AsarError::MalformedHeader(format!(
                "{path}: symbolic link entries are not supported"
            )));
        } else {
            out.push(parse_file_node(node, path)?);
        }
    }
    Ok(())
}

fn parse_file_node(node: &Map<String, Value>, path: String) -> Result<EntryMeta> {
    let unpacked = flag(node, "unpacked", &path)?;
    let executable = flag(node, "executable", &path)?;
    let size = node
        .get("size")
        .and_then(Value::as_u64)
        .ok_or_else(|| AsarError::MalformedHeader(format!("{path}: missing or invalid \"size\"")))?;
    let offset = match node.get("offset") {
        Some(Value::String(s)) => Some(
            s.parse::<u64>()
                .map_err(|_| AsarError::MalformedHeader(format!("{path}: offset {s:?} is not a decimal integer")))?,
        ),
        Some(Value::Number(n)) => {
            Some(n.as_u64().ok_or_else(|| {
                AsarError::MalformedHeader(format!("{path}: offset {n} is not a non-negative integer"))
            })?)
        }
        Some(_) => {
            return Err(AsarError::MalformedHeader(format!("{path}: invalid \"offset\"")));
        }
        None if unpacked => None,
        None => return Err(AsarError::MalformedHeader(format!("{path}: missing \"offset\""))),
    };
    Ok(EntryMeta {
        path,
        kind: EntryKind::File,
        offset,
        size: Some(size),
        executable,
        unpacked,
    })
}

fn flag(node: &Map<String, Value>, key: &str, path: &str) -> Result<bool> {
    match node.get(key) {
        None => Ok(false),
        Some(Value::Bool(b)) => Ok(*b),
        Some(_) => Err(AsarError::MalformedHeader(format!(
            "{path}: \"{key}\" is not a boolean"
        ))),
    }
}

/// Return the bytes of a single file.
pub fn read_file<'a>(archive: &'a [u8], path: &str) -> Result<&'a [u8]> {
    parse_header(archive)?.read(archive, path)
}

pub fn list_entries(archive: &[u8]) -> Result<Vec<EntryMeta>> {
    Ok(parse_header(archive)?.entries)
}


#[cfg(test)]
mod tests {
    use super::testutil::raw_archive;
    use super::*;

    #[test]
    fn bad_sentinel() {
        let mut a = raw_archive(r#"{"files":{}}"#, b"");
        a[0] = 7;
        assert!(matches!(parse_header(&a), Err(AsarError::MalformedHeader(_))));
    }

    #[test]
    fn short_input_is_truncated() {
        assert!(matches!(parse_header(&[4, 0, 0, 0]), Err(AsarError::Truncated(_))));
    }

    #[test]
    fn json_length_must_fit_header() {
        let mut a = raw_archive(r#"{"files":{}}"#, b"");
        a[12] = 200;
        assert!(matches!(parse_header(&a), Err(AsarError::MalformedHeader(_))));
    }

    #[test]
    fn oversized_header_refused() {
        let mut a = raw_archive(r#"{"files":{}}"#, b"");
        let big = MAX_HEADER_SIZE + 4;
        a[4..8].copy_from_slice(&big.to_le_bytes());
        a[8..12].copy_from_slice(&(big - 4).to_le_bytes());
        assert!(matches!(parse_header(&a), Err(AsarError::MalformedHeader(_))));
    }

    #[test]
    fn empty_tree() {
        let a = raw_archive(r#"{"files":{}}"#, b"");
        let index = parse_header(&a).unwrap();
        assert!(index.entries.is_empty());
        assert_eq!(index.data_start_offset, 8 + index.header_size as u64);
    }

    #[test]
    fn integer_offsets_accepted() {
        let a = raw_archive(r#"{"files":{"a":{"size":2,"offset":1}}}"#, b"xyz");
        assert_eq!(read_file(&a, "a").unwrap(), b"yz");
    }

    #[test]
    fn unsafe_names() {
        for name in ["..", ".", "", "a/b", "/etc", "C:evil", "a\\b"] {
            let json = format!(
                r#"{{"files":{{{}:{{"size":0,"offset":"0"}}}}}}"#,
                serde_json::to_string(name).unwrap()
            );
            let a = raw_archive(&json, b"");
            assert!(matches!(parse_header(&a), Err(AsarError::UnsafePath(_))), "{name:?}");
        }
    }

    #[test]
    fn oversized_extent_is_truncated() {
        let a = raw_archive(r#"{"files":{"a":{"size":99,"offset":"0"}}}"#, b"x");
        assert!(matches!(parse_header(&a), Err(AsarError::Truncated(_))));
    }

    #[test]
    fn overlapping_extents() {
        let a = raw_archive(
            r#"{"files":{"a":{"size":3,"offset":"0"},"b":{"size":2,"offset":"2"}}}"#,
            b"abcd",
        );
        assert!(matches!(parse_header(&a), Err(AsarError::MalformedHeader(_))));
    }

    #[test]
    fn read_file_errors() {
        let a = raw_archive(
            r#"{"files":{"d":{"files":{}},"u":{"size":3,"unpacked":true},"f":{"size":1,"offset":"0"}}}"#,
            b"x",
        );
        let reason = |p| match read_file(&a, p) {
            Err(AsarError::NotFound { reason, .. }) => reason,
            other => panic!("{other:?}"),
        };
        assert_eq!(reason("missing"), NotFoundReason::Missing);
        assert_eq!(reason("d"), NotFoundReason::NotAFile);
        assert_eq!(reason("u"), NotFoundReason::Unpacked);
        assert_eq!(read_file(&a, "./f").unwrap(), b"x");
    }

    #[test]
    fn links_refused() {
        let a = raw_archive(r#"{"files":{"l":{"link":"x"}}}"#, b"");
        assert!(matches!(parse_header(&a), Err(AsarError::MalformedHeader(_))));
    }

    #[test]
    fn listing_order() {
        let a = raw_archive(
            r#"{"files":{"sub-x":{"size":0,"offset":"0"},"sub":{"files":{"b":{"size":0,"offset":"0"}}},"a":{"size":0,"offset":"0"}}}"#,
            b"",
        );
        let paths: Vec<_> = list_entries(&a).unwrap().into_iter().map(|e| e.path).collect();
        assert_eq!(paths, ["a", "sub", "sub/b", "sub-x"]);
    }
}
