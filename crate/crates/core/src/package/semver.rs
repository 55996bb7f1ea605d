use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid version {text:?} at byte {offset}: {reason}")]
pub struct InvalidVersion {
    pub text: String,
    pub offset: usize,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Identifier {
    Numeric(u64),
    Alpha(String),
}

impl Ord for Identifier {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Identifier::Numeric(a), Identifier::Numeric(b)) => a.cmp(b),
            (Identifier::Numeric(_), Identifier::Alpha(_)) => Ordering::Less,
            (Identifier::Alpha(_), Identifier::Numeric(_)) => Ordering::Greater,
            (Identifier::Alpha(a), Identifier::Alpha(b)) => a.as_bytes().cmp(b.as_bytes()),
        }
    }
}

impl PartialOrd for Identifier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identifier::Numeric(n) => write!(f, "{n}"),
            Identifier::Alpha(s) => f.write_str(s),
        }
    }
}

/// A semantic version. Equality, ordering and hashing ignore build metadata.
#[derive(Debug, Clone)]
pub struct SemVer {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    pub prerelease: Vec<Identifier>,
    pub build: String,
}

impl SemVer {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        SemVer {
            major,
            minor,
            patch,
            prerelease: Vec::new(),
            build: String::new(),
        }
    }

    pub fn is_prerelease(&self) -> bool {
        !self.prerelease.is_empty()
    }

    pub fn core(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.patch)
    }

    /// `major.minor.patch-0`, the lowest version with this core.
    pub(crate) fn floor(major: u64, minor: u64, patch: u64) -> Self {
        SemVer {
            prerelease: vec![Identifier::Numeric(0)],
            ..SemVer::new(major, minor, patch)
        }
    }
}

impl PartialEq for SemVer {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SemVer {}

impl Hash for SemVer {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.core().hash(state);
        self.prerelease.hash(state);
    }
}

impl Ord for SemVer {
    fn cmp(&self, other: &Self) -> Ordering {
        self.core().cmp(&other.core()).then_with(|| {
            match (self.prerelease.is_empty(), other.prerelease.is_empty()) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                // Vec's lexicographic order already ranks a strict prefix first.
                (false, false) => self.prerelease.cmp(&other.prerelease),
            }
        })
    }
}

impl PartialOrd for SemVer {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SemVer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)?;
        if !self.prerelease.is_empty() {
            f.write_str("-")?;
            for (i, id) in self.prerelease.iter().enumerate() {
                if i > 0 {
                    f.write_str(".")?;
                }
                write!(f, "{id}")?;
            }
        }
        if !self.build.is_empty() {
            write!(f, "+{}", self.build)?;
        }
        Ok(())
    }
}

impl FromStr for SemVer {
    type Err = InvalidVersion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

impl serde::Serialize for SemVer {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for SemVer {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_version(&text).map_err(serde::de::Error::custom)
    }
}

/// Strict semver 2.0.0 parse; one leading `v` is tolerated.
pub fn parse_version(text: &str) -> Result<SemVer, InvalidVersion> {
    let mut cursor = Cursor { text, pos: 0 };
    if text.starts_with('v') {
        cursor.pos = 1;
    }
    let major = cursor.numeric()?;
    cursor.expect(b'.', "expected '.' after major version")?;
    let minor = cursor.numeric()?;
    cursor.expect(b'.', "expected '.' after minor version")?;
    let patch = cursor.numeric()?;
    let mut version = SemVer::new(major, minor, patch);
    if cursor.peek() == Some(b'-') {
        cursor.pos += 1;
        loop {
            version.prerelease.push(cursor.prerelease_identifier()?);
            if cursor.peek() != Some(b'.') {
                break;
            }
            cursor.pos += 1;
        }
    }
    if cursor.peek() == Some(b'+') {
        cursor.pos += 1;
        let start = cursor.pos;
        loop {
            cursor.build_identifier()?;
            if cursor.peek() != Some(b'.') {
                break;
            }
            cursor.pos += 1;
        }
        version.build = text[start..cursor.pos].to_owned();
    }
    if cursor.pos != text.len() {
        return Err(cursor.error("unexpected character"));
    }
    Ok(version)
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn error(&self, reason: &'static str) -> InvalidVersion {
        InvalidVersion {
            text: self.text.to_owned(),
            offset: self.pos,
            reason,
        }
    }

    fn expect(&mut self, byte: u8, reason: &'static str) -> Result<(), InvalidVersion> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(reason))
        }
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> &str {
        let start = self.pos;
        while self.peek().is_some_and(&pred) {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn numeric(&mut self) -> Result<u64, InvalidVersion> {
        let start = self.pos;
        let digits = self.take_while(|b| b.is_ascii_digit());
        if digits.is_empty() {
            return Err(self.error("expected a number"));
        }
        if digits.len() > 1 && digits.starts_with('0') {
            self.pos = start;
            return Err(self.error("numeric component has a leading zero"));
        }
        digits.parse().map_err(|_| {
            let mut e = self.error("numeric component overflows");
            e.offset = start;
            e
        })
    }

    fn prerelease_identifier(&mut self) -> Result<Identifier, InvalidVersion> {
        let start = self.pos;
        let ident = self.take_while(|b| b.is_ascii_alphanumeric() || b == b'-');
        if ident.is_empty() {
            return Err(self.error("empty pre-release identifier"));
        }
        if ident.bytes().all(|b| b.is_ascii_digit()) {
            if ident.len() > 1 && ident.starts_with('0') {
                self.pos = start;
                return Err(self.error("numeric pre-release identifier has a leading zero"));
            }
            let n = ident.parse().map_err(|_| {
                let mut e = self.error("numeric pre-release identifier overflows");
                e.offset = start;
                e
            })?;
            Ok(Identifier::Numeric(n))
        } else {
            Ok(Identifier::Alpha(ident.to_owned()))
        }
    }

    fn build_identifier(&mut self) -> Result<(), InvalidVersion> {
        if self.take_while(|b| b.is_ascii_alphanumeric() || b == b'-').is_empty() {
            return Err(self.error("empty build identifier"));
        }
        Ok(())
    }
}
