//! Independent semver model for differential testing. Versions, precedence
//! and range desugaring are written from the node-semver documentation and
//! share no code with the crate. Ranges are generated as syntax trees, so
//! the oracle never parses range text.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pre {
    Num(u64),
    Alpha(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct V {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    pub pre: Vec<Pre>,
}

impl V {
    pub fn new(major: u64, minor: u64, patch: u64) -> V {
        V {
            major,
            minor,
            patch,
            pre: Vec::new(),
        }
    }

    /// `M.m.p-0`, the lowest version with that core.
    fn floor(major: u64, minor: u64, patch: u64) -> V {
        V {
            major,
            minor,
            patch,
            pre: vec![Pre::Num(0)],
        }
    }

    fn triple(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.patch)
    }

    pub fn text(&self) -> String {
        let mut s = format!("{}.{}.{}", self.major, self.minor, self.patch);
        if !self.pre.is_empty() {
            let ids: Vec<String> = self
                .pre
                .iter()
                .map(|p| match p {
                    Pre::Num(n) => n.to_string(),
                    Pre::Alpha(a) => (*a).to_owned(),
                })
                .collect();
            s.push('-');
            s.push_str(&ids.join("."));
        }
        s
    }
}

fn cmp_pre(a: &Pre, b: &Pre) -> Ordering {
    match (a, b) {
        (Pre::Num(x), Pre::Num(y)) => x.cmp(y),
        (Pre::Num(_), Pre::Alpha(_)) => Ordering::Less,
        (Pre::Alpha(_), Pre::Num(_)) => Ordering::Greater,
        (Pre::Alpha(x), Pre::Alpha(y)) => x.as_bytes().cmp(y.as_bytes()),
    }
}

/// Semver 2.0.0 precedence.
pub fn precedence(a: &V, b: &V) -> Ordering {
    a.triple()
        .cmp(&b.triple())
        .then_with(|| match (a.pre.is_empty(), b.pre.is_empty()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => {
                for (x, y) in a.pre.iter().zip(&b.pre) {
                    let o = cmp_pre(x, y);
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                a.pre.len().cmp(&b.pre.len())
            }
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub enum Partial {
    Star,
    Major(u64),
    Minor(u64, u64),
    Full(V),
}

#[derive(Debug, Clone)]
pub enum Term {
    Bare(Partial),
    Cmp(Op, Partial),
    Caret(Partial),
    Tilde(Partial),
    Hyphen(V, V),
}

#[derive(Debug, Clone)]
pub struct RangeTree {
    pub sets: Vec<Vec<Term>>,
    pub text: String,
}

type Comparators = Vec<(Op, V)>;

fn exact_or_span(p: &Partial) -> Comparators {
    match p {
        Partial::Star => vec![],
        Partial::Major(m) => vec![(Op::Ge, V::new(*m, 0, 0)), (Op::Lt, V::floor(m + 1, 0, 0))],
        Partial::Minor(m, n) => vec![(Op::Ge, V::new(*m, *n, 0)), (Op::Lt, V::floor(*m, n + 1, 0))],
        Partial::Full(v) => vec![(Op::Eq, v.clone())],
    }
}

fn desugar(term: &Term) -> Comparators {
    match term {
        Term::Bare(p) | Term::Cmp(Op::Eq, p) => exact_or_span(p),
        Term::Cmp(op, p) => match (op, p) {
            (_, Partial::Star) => unreachable!("generator never emits comparators on *"),
            (Op::Gt, Partial::Major(m)) => vec![(Op::Ge, V::new(m + 1, 0, 0))],
            (Op::Gt, Partial::Minor(m, n)) => vec![(Op::Ge, V::new(*m, n + 1, 0))],
            (Op::Ge, Partial::Major(m)) => vec![(Op::Ge, V::new(*m, 0, 0))],
            (Op::Ge, Partial::Minor(m, n)) => vec![(Op::Ge, V::new(*m, *n, 0))],
            (Op::Lt, Partial::Major(m)) => vec![(Op::Lt, V::floor(*m, 0, 0))],
            (Op::Lt, Partial::Minor(m, n)) => vec![(Op::Lt, V::floor(*m, *n, 0))],
            (Op::Le, Partial::Major(m)) => vec![(Op::Lt, V::floor(m + 1, 0, 0))],
            (Op::Le, Partial::Minor(m, n)) => vec![(Op::Lt, V::floor(*m, n + 1, 0))],
            (op, Partial::Full(v)) => vec![(*op, v.clone())],
            (Op::Eq, _) => unreachable!(),
        },
        Term::Tilde(p) => match p {
            Partial::Full(v) => vec![(Op::Ge, v.clone()), (Op::Lt, V::floor(v.major, v.minor + 1, 0))],
            other => exact_or_span(other),
        },
        Term::Caret(p) => match p {
            Partial::Star => vec![],
            Partial::Major(m) => vec![(Op::Ge, V::new(*m, 0, 0)), (Op::Lt, V::floor(m + 1, 0, 0))],
            Partial::Minor(0, n) => vec![(Op::Ge, V::new(0, *n, 0)), (Op::Lt, V::floor(0, n + 1, 0))],
            Partial::Minor(m, n) => vec![(Op::Ge, V::new(*m, *n, 0)), (Op::Lt, V::floor(m + 1, 0, 0))],
            Partial::Full(v) => {
                let hi = if v.major > 0 {
                    V::floor(v.major + 1, 0, 0)
                } else if v.minor > 0 {
                    V::floor(0, v.minor + 1, 0)
                } else {
                    V::floor(0, 0, v.patch + 1)
                };
                vec![(Op::Ge, v.clone()), (Op::Lt, hi)]
            }
        },
        Term::Hyphen(lo, hi) => vec![(Op::Ge, lo.clone()), (Op::Le, hi.clone())],
    }
}

fn holds(op: Op, v: &V, bound: &V) -> bool {
    let o = precedence(v, bound);
    match op {
        Op::Lt => o == Ordering::Less,
        Op::Le => o != Ordering::Greater,
        Op::Gt => o == Ordering::Greater,
        Op::Ge => o != Ordering::Less,
        Op::Eq => o == Ordering::Equal,
    }
}

fn set_satisfied(comparators: &Comparators, v: &V) -> bool {
    if !comparators.iter().all(|(op, b)| holds(*op, v, b)) {
        return false;
    }
    // A prerelease only matches when some comparator names a prerelease of
    // the same core version.
    v.pre.is_empty()
        || comparators
            .iter()
            .any(|(_, b)| !b.pre.is_empty() && b.triple() == v.triple())
}

impl RangeTree {
    pub fn satisfied_by(&self, v: &V) -> bool {
        self.sets.iter().any(|set| {
            let comparators: Comparators = set.iter().flat_map(desugar).collect();
            set_satisfied(&comparators, v)
        })
    }
}

const PRE_TAGS: &[&[Pre]] = &[
    &[Pre::Alpha("alpha")],
    &[Pre::Alpha("alpha"), Pre::Num(1)],
    &[Pre::Alpha("beta")],
    &[Pre::Alpha("rc"), Pre::Num(1)],
    &[Pre::Num(0)],
    &[Pre::Num(2)],
];

pub fn gen_version<R: Rng>(rng: &mut R, pre_chance: f64) -> V {
    let mut v = V::new(rng.gen_range(0..4), rng.gen_range(0..4), rng.gen_range(0..4));
    if rng.gen_bool(pre_chance) {
        v.pre = PRE_TAGS.choose(rng).unwrap().to_vec();
    }
    v
}

fn gen_partial<R: Rng>(rng: &mut R, allow_star: bool) -> (Partial, String) {
    let (m, n) = (rng.gen_range(0..4), rng.gen_range(0..4));
    match rng.gen_range(if allow_star { 0 } else { 1 }..6) {
        0 => (Partial::Star, ["*", "x", "X"].choose(rng).unwrap().to_string()),
        1 => (
            Partial::Major(m),
            [format!("{m}"), format!("{m}.x"), format!("{m}.*")]
                .choose(rng)
                .unwrap()
                .clone(),
        ),
        2 => (
            Partial::Minor(m, n),
            [format!("{m}.{n}"), format!("{m}.{n}.x"), format!("{m}.{n}.X")]
                .choose(rng)
                .unwrap()
                .clone(),
        ),
        _ => {
            let v = gen_version(rng, 0.25);
            let t = v.text();
            (Partial::Full(v), t)
        }
    }
}

fn gen_term<R: Rng>(rng: &mut R) -> (Term, String) {
    match rng.gen_range(0..10) {
        0 | 1 => {
            let (p, t) = gen_partial(rng, true);
            (Term::Bare(p), t)
        }
        2..=4 => {
            let (op, sym) = *[
                (Op::Lt, "<"),
                (Op::Le, "<="),
                (Op::Gt, ">"),
                (Op::Ge, ">="),
                (Op::Eq, "="),
            ]
            .choose(rng)
            .unwrap();
            let (p, t) = gen_partial(rng, false);
            let sep = if rng.gen_bool(0.2) { " " } else { "" };
            (Term::Cmp(op, p), format!("{sym}{sep}{t}"))
        }
        5 | 6 => {
            let (p, t) = gen_partial(rng, true);
            (Term::Caret(p), format!("^{t}"))
        }
        7 | 8 => {
            let (p, t) = gen_partial(rng, false);
            (Term::Tilde(p), format!("~{t}"))
        }
        _ => {
            let mut a = gen_version(rng, 0.2);
            let mut b = gen_version(rng, 0.2);
            if precedence(&a, &b) == Ordering::Greater {
                std::mem::swap(&mut a, &mut b);
            }
            let t = format!("{} - {}", a.text(), b.text());
            (Term::Hyphen(a, b), t)
        }
    }
}

pub fn gen_range<R: Rng>(rng: &mut R) -> RangeTree {
    let set_count = if rng.gen_bool(0.25) { 2 } else { 1 };
    let mut sets = Vec::new();
    let mut texts = Vec::new();
    for _ in 0..set_count {
        let term_count = if rng.gen_bool(0.3) { 2 } else { 1 };
        let mut terms = Vec::new();
        let mut parts = Vec::new();
        for _ in 0..term_count {
            let (term, text) = gen_term(rng);
            // Hyphen ranges cannot be combined with other terms in one set.
            if matches!(term, Term::Hyphen(..)) && (term_count > 1) {
                continue;
            }
            terms.push(term);
            parts.push(text);
        }
        if terms.is_empty() {
            let (p, t) = gen_partial(rng, false);
            terms.push(Term::Caret(p));
            parts.push(format!("^{t}"));
        }
        sets.push(terms);
        texts.push(parts.join(" "));
    }
    RangeTree {
        sets,
        text: texts.join(" || "),
    }
}
