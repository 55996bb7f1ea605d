use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bundle_audit::asar::{self, AsarError};
use proptest::collection::{btree_map, vec};
use proptest::prelude::*;

use super::{count_nodes, raw_archive, read_tree};

/// Relative file paths of at most four segments mapped to contents. Names
/// that would collide with a directory of the same tree are discarded.
pub fn tree_strategy() -> impl Strategy<Value = BTreeMap<String, Vec<u8>>> {
    let segment = "[a-zA-Z0-9_.-]{1,8}".prop_filter("dot segments", |s| s != "." && s != "..");
    let path = vec(segment, 1..=4).prop_map(|segs| segs.join("/"));
    btree_map(path, vec(any::<u8>(), 0..256), 0..=20).prop_map(|mut files| {
        let keys: Vec<String> = files.keys().cloned().collect();
        for k in &keys {
            let as_dir = format!("{k}/");
            if keys.iter().any(|other| other.starts_with(&as_dir)) {
                files.remove(k);
            }
        }
        files
    })
}

fn write_tree(root: &Path, files: &BTreeMap<String, Vec<u8>>) {
    fs::create_dir_all(root).unwrap();
    for (rel, bytes) in files {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, bytes).unwrap();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expect {
    Unsafe,
    Malformed,
    Truncated,
}

/// Hostile headers and the error each must produce.
pub fn adversarial_corpus() -> Vec<(&'static str, Vec<u8>, Expect)> {
    let file = |name: &str| {
        format!(
            r#"{{"files":{{{}:{{"size":1,"offset":"0"}}}}}}"#,
            serde_json::to_string(name).unwrap()
        )
    };
    let nested = |dir: &str, name: &str| {
        format!(
            r#"{{"files":{{{}:{{"files":{{{}:{{"size":1,"offset":"0"}}}}}}}}}}"#,
            serde_json::to_string(dir).unwrap(),
            serde_json::to_string(name).unwrap()
        )
    };
    let mut corpus = vec![
        ("parent segment", raw_archive(&file(".."), b"x"), Expect::Unsafe),
        (
            "parent dir then file",
            raw_archive(&nested("..", "evil"), b"x"),
            Expect::Unsafe,
        ),
        ("dot dir", raw_archive(&nested(".", "evil"), b"x"), Expect::Unsafe),
        (
            "embedded traversal",
            raw_archive(&file("../evil"), b"x"),
            Expect::Unsafe,
        ),
        (
            "deep traversal",
            raw_archive(&nested("a", "../../evil"), b"x"),
            Expect::Unsafe,
        ),
        ("absolute", raw_archive(&file("/tmp/evil"), b"x"), Expect::Unsafe),
        ("absolute dir", raw_archive(&nested("/", "evil"), b"x"), Expect::Unsafe),
        (
            "backslash traversal",
            raw_archive(&file("..\\evil"), b"x"),
            Expect::Unsafe,
        ),
        ("drive prefix", raw_archive(&file("C:\\evil"), b"x"), Expect::Unsafe),
        ("empty name", raw_archive(&file(""), b"x"), Expect::Unsafe),
        ("nul byte", raw_archive(&file("a\0b"), b"x"), Expect::Unsafe),
        (
            "overlapping extents",
            raw_archive(
                r#"{"files":{"a":{"size":3,"offset":"0"},"b":{"size":3,"offset":"1"}}}"#,
                b"abcd",
            ),
            Expect::Malformed,
        ),
        (
            "identical extents",
            raw_archive(
                r#"{"files":{"a":{"size":2,"offset":"0"},"b":{"size":2,"offset":"0"}}}"#,
                b"ab",
            ),
            Expect::Malformed,
        ),
        (
            "extent past end",
            raw_archive(r#"{"files":{"a":{"size":4096,"offset":"0"}}}"#, b"x"),
            Expect::Truncated,
        ),
        (
            "offset past end",
            raw_archive(r#"{"files":{"a":{"size":1,"offset":"99"}}}"#, b"x"),
            Expect::Truncated,
        ),
        (
            "offset overflow",
            raw_archive(r#"{"files":{"a":{"size":1,"offset":"18446744073709551615"}}}"#, b"x"),
            Expect::Truncated,
        ),
        (
            "symlink entry",
            raw_archive(r#"{"files":{"l":{"link":"../../etc"}}}"#, b""),
            Expect::Malformed,
        ),
        (
            "negative offset",
            raw_archive(r#"{"files":{"a":{"size":1,"offset":"-1"}}}"#, b"x"),
            Expect::Malformed,
        ),
        ("not json", raw_archive("{files", b""), Expect::Malformed),
        ("no files key", raw_archive(r#"{"x":{}}"#, b""), Expect::Malformed),
    ];
    let mut bad_sentinel = raw_archive(r#"{"files":{}}"#, b"");
    bad_sentinel[0] = 7;
    corpus.push(("sentinel", bad_sentinel, Expect::Malformed));
    let mut huge = raw_archive(r#"{"files":{}}"#, b"");
    let h = 512u32 * 1024 * 1024;
    huge[4..8].copy_from_slice(&h.to_le_bytes());
    huge[8..12].copy_from_slice(&(h - 4).to_le_bytes());
    corpus.push(("header over limit", huge, Expect::Malformed));
    let mut short = raw_archive(r#"{"files":{}}"#, b"");
    short.truncate(18);
    corpus.push(("cut inside header", short, Expect::Truncated));
    corpus.push(("prefix only", vec![4, 0, 0, 0, 8], Expect::Truncated));
    corpus
}

/// Refusal with the expected error and no node created anywhere below the
/// sandbox, for every corpus member.
pub fn run_adversarial_corpus() -> Result<usize, String> {
    let corpus = adversarial_corpus();
    for (name, bytes, expect) in &corpus {
        let sandbox = tempfile::tempdir().unwrap();
        let dest = sandbox.path().join("dest");
        let err = asar::extract(bytes, &dest).err().ok_or(format!("{name}: accepted"))?;
        let got = match err {
            AsarError::UnsafePath(_) => Expect::Unsafe,
            AsarError::MalformedHeader(_) => Expect::Malformed,
            AsarError::Truncated(_) => Expect::Truncated,
            other => return Err(format!("{name}: unexpected error {other}")),
        };
        if got != *expect {
            return Err(format!("{name}: expected {expect:?}, got {got:?}"));
        }
        let written = count_nodes(sandbox.path());
        if written > 1 || (written == 1 && count_nodes(&dest) > 0) {
            return Err(format!("{name}: {written} filesystem nodes written"));
        }
    }
    Ok(corpus.len())
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// pack, extract, repack and read back one tree.
pub fn round_trip(files: &BTreeMap<String, Vec<u8>>) -> Result<(), String> {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    write_tree(&src, files);
    let archive = asar::pack(&src, true).map_err(|e| e.to_string())?;
    check(asar::pack(&src, true).unwrap() == archive, || {
        "pack is not deterministic".into()
    })?;

    let out = tmp.path().join("out");
    let report = asar::extract(&archive, &out).map_err(|e| e.to_string())?;
    check(report.files_written as usize == files.len(), || {
        format!("{} files written", report.files_written)
    })?;
    let got: BTreeMap<String, Vec<u8>> = read_tree(&out).into_iter().collect();
    check(&got == files, || "extracted tree differs".into())?;
    check(asar::pack(&out, true).unwrap() == archive, || "repack differs".into())?;

    let index = asar::parse_header(&archive).map_err(|e| e.to_string())?;
    let h = u32::from_le_bytes(archive[4..8].try_into().unwrap());
    check(index.data_start_offset == 8 + u64::from(h), || {
        "data start is not 8 + H".into()
    })?;
    for (rel, bytes) in files {
        check(asar::read_file(&archive, rel).ok() == Some(bytes.as_slice()), || {
            format!("read_file({rel})")
        })?;
    }
    Ok(())
}
