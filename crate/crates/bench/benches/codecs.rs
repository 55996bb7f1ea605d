use std::fs;
use std::path::Path;

use bundle_audit::asar;
use bundle_audit::package::{parse_range, parse_version};
use bundle_audit::update::{build_full_package, emit_releases, open_package, parse_releases, PackageMetadata};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

/// `files` files of `size` bytes spread over a few nested directories.
fn synthetic_tree(root: &Path, files: usize, size: usize) {
    for i in 0..files {
        let dir = root.join(format!("node_modules/m{}/lib", i % 16));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join(format!("f{i}.js")), vec![b'x'; size]).unwrap();
    }
    fs::write(root.join("package.json"), r#"{"name":"bench","version":"1.0.0"}"#).unwrap();
}

fn asar_codec(c: &mut Criterion) {
    let mut group = c.benchmark_group("asar");
    for files in [16, 256, 2048] {
        let dir = tempfile::tempdir().unwrap();
        synthetic_tree(dir.path(), files, 512);
        let archive = asar::pack(dir.path(), true).unwrap();
        group.throughput(Throughput::Elements(files as u64));
        group.bench_with_input(BenchmarkId::new("pack", files), dir.path(), |b, p| {
            b.iter(|| asar::pack(black_box(p), true).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parse_header", files), &archive, |b, a| {
            b.iter(|| asar::parse_header(black_box(a)).unwrap())
        });
    }
    group.finish();
}

fn semver(c: &mut Criterion) {
    let ranges = [
        "^1.2.3",
        "~0.3.x",
        ">=1.0.0 <1.0.4 || 2.x",
        "1.2.3 - 2.3.4",
        ">=1.0.0-alpha.1 <2.0.0-0",
    ];
    c.bench_function("semver/parse_range", |b| {
        b.iter(|| {
            for r in &ranges {
                black_box(parse_range(black_box(r)).unwrap());
            }
        })
    });
    let parsed: Vec<_> = ranges.iter().map(|r| parse_range(r).unwrap()).collect();
    let versions: Vec<_> = ["0.3.9", "1.0.3", "1.2.3-beta.2", "2.3.4", "2.9.0"]
        .iter()
        .map(|v| parse_version(v).unwrap())
        .collect();
    c.bench_function("semver/satisfies", |b| {
        b.iter(|| {
            let mut n = 0;
            for r in &parsed {
                for v in &versions {
                    n += usize::from(r.satisfies(black_box(v)));
                }
            }
            n
        })
    });
}

fn releases(c: &mut Criterion) {
    let text: String = (0..1000)
        .map(|i| format!("{:040X} app-1.{i}.0-full.nupkg {}\n", i * 7919, 1000 + i))
        .collect();
    let file = parse_releases(&text).unwrap();
    let mut group = c.benchmark_group("releases");
    group.throughput(Throughput::Bytes(text.len() as u64));
    group.bench_function("parse_1000", |b| b.iter(|| parse_releases(black_box(&text)).unwrap()));
    group.bench_function("emit_1000", |b| b.iter(|| emit_releases(black_box(&file))));
    group.finish();
}

fn nupkg(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    synthetic_tree(dir.path(), 128, 4096);
    let metadata = PackageMetadata {
        id: "bench".into(),
        version: parse_version("1.0.0").unwrap(),
        title: "bench".into(),
        authors: String::new(),
    };
    let pkg = build_full_package(dir.path(), &metadata).unwrap();
    let mut group = c.benchmark_group("nupkg");
    group.sample_size(20);
    group.bench_function("build_128", |b| {
        b.iter(|| build_full_package(black_box(dir.path()), &metadata).unwrap())
    });
    group.bench_function("open_128", |b| b.iter(|| open_package(black_box(&pkg.bytes)).unwrap()));
    group.finish();
}

criterion_group!(benches, asar_codec, semver, releases, nupkg);
criterion_main!(benches);
