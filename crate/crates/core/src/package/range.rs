//! npm-style version ranges.
//!
//! Supported forms: exact versions, primitive comparators (`=`, `<`, `<=`,
//! `>`, `>=`), caret, tilde, `x`/`X`/`*` wildcards and partial versions,
//! hyphen ranges between two full versions, whitespace separated
//! conjunctions and `||` disjunctions. Every form is desugared to primitive
//! comparators at parse time.

use std::fmt;

use thiserror::Error;

use super::semver::{parse_version, SemVer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid range {expression:?}: {reason}")]
pub struct InvalidRange {
    pub expression: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Op {
    fn as_str(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparator {
    pub op: Op,
    pub version: SemVer,
}

impl Comparator {
    pub fn new(op: Op, version: SemVer) -> Self {
        Comparator { op, version }
    }

    pub fn matches(&self, v: &SemVer) -> bool {
        match self.op {
            Op::Eq => v == &self.version,
            Op::Lt => v < &self.version,
            Op::Le => v <= &self.version,
            Op::Gt => v > &self.version,
            Op::Ge => v >= &self.version,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.op.as_str(), self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionRange {
    pub expression: String,
    /// Disjunction of conjunctions.
    pub clauses: Vec<Vec<Comparator>>,
}

impl VersionRange {
    pub fn satisfies(&self, v: &SemVer) -> bool {
        range_satisfies(self, v)
    }

    /// Render the desugared comparators, `||`-separated.
    pub fn desugared(&self) -> String {
        self.clauses
            .iter()
            .map(|c| c.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(" || ")
    }
}

impl fmt::Display for VersionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.expression)
    }
}

impl std::str::FromStr for VersionRange {
    type Err = InvalidRange;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_range(s)
    }
}

/// A version where any trailing component may be a wildcard.
#[derive(Debug, Clone)]
struct Partial {
    major: Option<u64>,
    minor: Option<u64>,
    full: Option<SemVer>,
}

pub fn parse_range(text: &str) -> Result<VersionRange, InvalidRange> {
    let fail = |reason: String| InvalidRange {
        expression: text.to_owned(),
        reason,
    };
    let mut clauses = Vec::new();
    for part in text.split("||") {
        clauses.push(parse_clause(part.trim()).map_err(fail)?);
    }
    Ok(VersionRange {
        expression: text.to_owned(),
        clauses,
    })
}

fn any() -> Vec<Comparator> {
    vec![Comparator::new(Op::Ge, SemVer::new(0, 0, 0))]
}

fn nothing() -> Vec<Comparator> {
    vec![Comparator::new(Op::Lt, SemVer::floor(0, 0, 0))]
}

fn parse_clause(clause: &str) -> Result<Vec<Comparator>, String> {
    if clause.is_empty() {
        return Ok(any());
    }
    let raw: Vec<&str> = clause.split_whitespace().collect();
    if let Some(dash) = raw.iter().position(|t| *t == "-") {
        if raw.len() != 3 || dash != 1 {
            return Err("a hyphen range needs exactly one version on each side".into());
        }
        let lo = full_version(raw[0])?;
        let hi = full_version(raw[2])?;
        return Ok(vec![Comparator::new(Op::Ge, lo), Comparator::new(Op::Le, hi)]);
    }

    // Glue a bare operator to the version that follows it (">= 1.2.3").
    let mut tokens: Vec<String> = Vec::new();
    let mut pending: Option<&str> = None;
    for tok in raw {
        if let Some(op) = pending.take() {
            tokens.push(format!("{op}{tok}"));
        } else if matches!(tok, "<" | "<=" | ">" | ">=" | "=" | "~" | "^" | "~>") {
            pending = Some(tok);
        } else {
            tokens.push(tok.to_owned());
        }
    }
    if let Some(op) = pending {
        return Err(format!("operator {op:?} has no version"));
    }

    let mut out = Vec::new();
    for tok in &tokens {
        out.extend(desugar_token(tok)?);
    }
    Ok(out)
}

fn full_version(tok: &str) -> Result<SemVer, String> {
    let p = parse_partial(tok)?;
    p.full
        .ok_or_else(|| format!("hyphen range bound {tok:?} must be a full version"))
}

fn desugar_token(tok: &str) -> Result<Vec<Comparator>, String> {
    if let Some(rest) = tok.strip_prefix("~>").or_else(|| tok.strip_prefix('~')) {
        return Ok(tilde(&parse_partial(rest)?));
    }
    if let Some(rest) = tok.strip_prefix('^') {
        return Ok(caret(&parse_partial(rest)?));
    }
    let (op, rest) = if let Some(r) = tok.strip_prefix(">=") {
        (Some(Op::Ge), r)
    } else if let Some(r) = tok.strip_prefix("<=") {
        (Some(Op::Le), r)
    } else if let Some(r) = tok.strip_prefix('>') {
        (Some(Op::Gt), r)
    } else if let Some(r) = tok.strip_prefix('<') {
        (Some(Op::Lt), r)
    } else if let Some(r) = tok.strip_prefix('=') {
        (Some(Op::Eq), r)
    } else {
        (None, tok)
    };
    let p = parse_partial(rest)?;
    Ok(primitive(op, &p))
}

fn parse_partial(tok: &str) -> Result<Partial, String> {
    let body = tok.strip_prefix('v').unwrap_or(tok);
    if body.is_empty() {
        return Err("missing version".into());
    }
    // Anything carrying pre-release or build data must be a full version.
    if body.contains(['-', '+']) {
        let full = parse_version(body).map_err(|e| e.to_string())?;
        return Ok(Partial {
            major: Some(full.major),
            minor: Some(full.minor),
            full: Some(full),
        });
    }
    let parts: Vec<&str> = body.split('.').collect();
    if parts.len() > 3 {
        return Err(format!("too many components in {tok:?}"));
    }
    let mut nums = [None; 3];
    let mut seen_wild = false;
    for (slot, part) in nums.iter_mut().zip(&parts) {
        if matches!(*part, "x" | "X" | "*") {
            seen_wild = true;
            continue;
        }
        if seen_wild {
            return Err(format!("{tok:?}: number after a wildcard"));
        }
        if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) || (part.len() > 1 && part.starts_with('0')) {
            return Err(format!("{tok:?}: bad version component {part:?}"));
        }
        *slot = Some(
            part.parse::<u64>()
                .map_err(|_| format!("{tok:?}: component overflows"))?,
        );
    }
    let full = match nums {
        [Some(a), Some(b), Some(c)] => Some(SemVer::new(a, b, c)),
        _ => None,
    };
    Ok(Partial {
        major: nums[0],
        minor: nums[1],
        full,
    })
}

fn ge(v: SemVer) -> Comparator {
    Comparator::new(Op::Ge, v)
}

/// `< major.minor.patch-0`: strictly below every version with that core.
fn below(major: u64, minor: u64, patch: u64) -> Comparator {
    Comparator::new(Op::Lt, SemVer::floor(major, minor, patch))
}

fn caret(p: &Partial) -> Vec<Comparator> {
    let Some(major) = p.major else { return any() };
    let Some(minor) = p.minor else {
        return vec![ge(SemVer::new(major, 0, 0)), below(major + 1, 0, 0)];
    };
    let Some(full) = &p.full else {
        let upper = if major == 0 {
            below(0, minor + 1, 0)
        } else {
            below(major + 1, 0, 0)
        };
        return vec![ge(SemVer::new(major, minor, 0)), upper];
    };
    let upper = if major > 0 {
        below(major + 1, 0, 0)
    } else if minor > 0 {
        below(0, minor + 1, 0)
    } else {
        below(0, 0, full.patch + 1)
    };
    vec![ge(full.clone()), upper]
}

fn tilde(p: &Partial) -> Vec<Comparator> {
    let Some(major) = p.major else { return any() };
    let Some(minor) = p.minor else {
        return vec![ge(SemVer::new(major, 0, 0)), below(major + 1, 0, 0)];
    };
    let lower = p.full.clone().unwrap_or_else(|| SemVer::new(major, minor, 0));
    vec![ge(lower), below(major, minor + 1, 0)]
}

fn primitive(op: Option<Op>, p: &Partial) -> Vec<Comparator> {
    if let Some(full) = &p.full {
        return vec![Comparator::new(op.unwrap_or(Op::Eq), full.clone())];
    }
    let Some(major) = p.major else {
        return match op {
            Some(Op::Gt) | Some(Op::Lt) => nothing(),
            _ => any(),
        };
    };
    match (op, p.minor) {
        (None | Some(Op::Eq), None) => vec![ge(SemVer::new(major, 0, 0)), below(major + 1, 0, 0)],
        (None | Some(Op::Eq), Some(minor)) => {
            vec![ge(SemVer::new(major, minor, 0)), below(major, minor + 1, 0)]
        }
        (Some(Op::Gt), None) => vec![ge(SemVer::new(major + 1, 0, 0))],
        (Some(Op::Gt), Some(minor)) => vec![ge(SemVer::new(major, minor + 1, 0))],
        (Some(Op::Ge), minor) => vec![ge(SemVer::new(major, minor.unwrap_or(0), 0))],
        (Some(Op::Lt), minor) => vec![below(major, minor.unwrap_or(0), 0)],
        (Some(Op::Le), None) => vec![below(major + 1, 0, 0)],
        (Some(Op::Le), Some(minor)) => vec![below(major, minor + 1, 0)],
    }
}

/// Evaluate a range. A pre-release version only matches a clause that
/// contains a comparator with a pre-release on the same `major.minor.patch`.
pub fn range_satisfies(range: &VersionRange, v: &SemVer) -> bool {
    range.clauses.iter().any(|clause| {
        clause.iter().all(|c| c.matches(v))
            && (!v.is_prerelease()
                || clause
                    .iter()
                    .any(|c| c.version.is_prerelease() && c.version.core() == v.core()))
    })
}

/// True when the range text is a single exact version, i.e. a pin.
pub fn is_pinned(text: &str) -> bool {
    match parse_range(text) {
        Ok(r) => r.clauses.len() == 1 && r.clauses[0].len() == 1 && r.clauses[0][0].op == Op::Eq,
        Err(_) => false,
    }
}
