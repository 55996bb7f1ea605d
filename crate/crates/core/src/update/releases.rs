use std::fmt;

use serde::Serialize;
use sha1::{Digest, Sha1};
use thiserror::Error;

use crate::package::{parse_version, SemVer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("RELEASES line {line}: {reason}")]
pub struct MalformedLine {
    /// 1-based.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Full,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackageName {
    pub package_name: String,
    pub version: SemVer,
    pub flavor: Flavor,
}

/// Split `<name>-<version>-<full|delta>.nupkg`. The name may itself contain
/// dashes, so the first split whose remainder is a valid version wins.
pub fn parse_package_filename(filename: &str) -> Option<PackageName> {
    let stem = filename.strip_suffix(".nupkg")?;
    let (rest, flavor) = stem.rsplit_once('-')?;
    let flavor = match flavor {
        "full" => Flavor::Full,
        "delta" => Flavor::Delta,
        _ => return None,
    };
    rest.match_indices('-').find_map(|(i, _)| {
        let name = &rest[..i];
        let version = parse_version(&rest[i + 1..]).ok()?;
        (!name.is_empty()).then(|| PackageName {
            package_name: name.to_owned(),
            version,
            flavor,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReleaseEntry {
    #[serde(serialize_with = "hex_upper")]
    pub sha1: [u8; 20],
    pub filename: String,
    pub size: u64,
    pub parsed: Option<PackageName>,
}

fn hex_upper<S: serde::Serializer>(d: &[u8; 20], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode_upper(d))
}

impl ReleaseEntry {
    /// Entry describing `bytes` published as `filename`.
    pub fn for_package(filename: &str, bytes: &[u8]) -> Self {
        ReleaseEntry {
            sha1: Sha1::digest(bytes).into(),
            filename: filename.to_owned(),
            size: bytes.len() as u64,
            parsed: parse_package_filename(filename),
        }
    }

    pub fn sha1_hex(&self) -> String {
        hex::encode_upper(self.sha1)
    }
}

impl fmt::Display for ReleaseEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.sha1_hex(), self.filename, self.size)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReleasesFile {
    pub entries: Vec<ReleaseEntry>,
}

pub fn parse_releases(text: &str) -> Result<ReleasesFile, MalformedLine> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut entries = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| MalformedLine { line: i + 1, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [digest, filename, size] = fields[..] else {
            return Err(bad(format!("expected 3 fields, found {}", fields.len())));
        };
        let mut sha1 = [0u8; 20];
        hex::decode_to_slice(digest, &mut sha1).map_err(|_| bad(format!("{digest:?} is not a 40-digit hex SHA-1")))?;
        let size = size
            .parse::<u64>()
            .map_err(|_| bad(format!("size {size:?} is not a number")))?;
        let parsed = parse_package_filename(filename);
        if parsed.is_none() && filename.ends_with(".nupkg") {
            log::warn!("RELEASES line {}: cannot read a version from {filename:?}", i + 1);
        }
        entries.push(ReleaseEntry {
            sha1,
            filename: filename.to_owned(),
            size,
            parsed,
        });
    }
    Ok(ReleasesFile { entries })
}

/// LF-terminated lines, uppercase hex, single spaces.
pub fn emit_releases(file: &ReleasesFile) -> String {
    file.entries.iter().map(|e| format!("{e}\n")).collect()
}

/// Whether `bytes` has the digest and length `entry` promises.
pub fn verify_entry(entry: &ReleaseEntry, bytes: &[u8]) -> bool {
    bytes.len() as u64 == entry.size && Sha1::digest(bytes).as_slice() == entry.sha1
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABC: &str = "A9993E364706816ABA3E25717850C26C9CD0D89D";

    #[test]
    fn single_line() {
        let f = parse_releases(&format!("{ABC} app-1.0.0-full.nupkg 1024")).unwrap();
        let e = &f.entries[0];
        assert_eq!(e.size, 1024);
        let p = e.parsed.as_ref().unwrap();
        assert_eq!(
            (p.package_name.as_str(), p.version.to_string(), p.flavor),
            ("app", "1.0.0".into(), Flavor::Full)
        );
    }

    #[test]
    fn empty_and_blank() {
        assert!(parse_releases("").unwrap().entries.is_empty());
        assert!(parse_releases("\r\n\n  \n").unwrap().entries.is_empty());
    }

    #[test]
    fn malformed_lines() {
        assert_eq!(parse_releases("xyz app.nupkg 10").unwrap_err().line, 1);
        let text = format!("{ABC} a-1.0.0-full.nupkg 1\n\n{ABC} a.nupkg\n");
        assert_eq!(parse_releases(&text).unwrap_err().line, 3);
        assert!(parse_releases(&format!("{ABC} a.nupkg ten")).is_err());
        assert!(parse_releases(&format!("{}G a.nupkg 1", &ABC[..39])).is_err());
        assert!(parse_releases(&format!("{ABC}0 a.nupkg 1")).is_err());
    }

    #[test]
    fn normalizes_case_and_crlf() {
        let lower = ABC.to_lowercase();
        let f = parse_releases(&format!("{lower} my-app-2.0.0-beta.1-delta.nupkg 7\r\n")).unwrap();
        assert_eq!(emit_releases(&f), format!("{ABC} my-app-2.0.0-beta.1-delta.nupkg 7\n"));
        let p = f.entries[0].parsed.as_ref().unwrap();
        assert_eq!(
            (p.package_name.as_str(), p.version.to_string(), p.flavor),
            ("my-app", "2.0.0-beta.1".into(), Flavor::Delta)
        );
    }

    #[test]
    fn filenames_best_effort() {
        assert!(parse_package_filename("app-latest-full.nupkg").is_none());
        assert!(parse_package_filename("app-1.0.0-half.nupkg").is_none());
        assert!(parse_package_filename("app-1.0.0-full.zip").is_none());
        assert!(parse_package_filename("-1.0.0-full.nupkg").is_none());
    }

    #[test]
    fn verification() {
        let mut e = parse_releases(&format!("{ABC} a 3")).unwrap().entries.remove(0);
        assert!(verify_entry(&e, b"abc"));
        assert!(!verify_entry(&e, b"abd"));
        e.size = 4;
        assert!(!verify_entry(&e, b"abc"));
        assert_eq!(ReleaseEntry::for_package("a", b"abc").sha1_hex(), ABC);
    }
}
