mod support;

use std::cmp::Ordering;

use bundle_audit::package::{parse_range, parse_version, SemVer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::oracle::{gen_range, gen_version, precedence, Pre, V};

fn crate_version(v: &V) -> SemVer {
    parse_version(&v.text()).unwrap()
}

#[test]
fn oracle_precedence_follows_the_published_chain() {
    let alpha = |rest: &[Pre]| V {
        pre: [&[Pre::Alpha("alpha")], rest].concat(),
        ..V::new(1, 0, 0)
    };
    let chain = [
        alpha(&[]),
        alpha(&[Pre::Num(1)]),
        alpha(&[Pre::Alpha("beta")]),
        V {
            pre: vec![Pre::Alpha("beta")],
            ..V::new(1, 0, 0)
        },
        V {
            pre: vec![Pre::Alpha("beta"), Pre::Num(2)],
            ..V::new(1, 0, 0)
        },
        V {
            pre: vec![Pre::Alpha("beta"), Pre::Num(11)],
            ..V::new(1, 0, 0)
        },
        V {
            pre: vec![Pre::Alpha("rc"), Pre::Num(1)],
            ..V::new(1, 0, 0)
        },
        V::new(1, 0, 0),
    ];
    for w in chain.windows(2) {
        assert_eq!(
            precedence(&w[0], &w[1]),
            Ordering::Less,
            "{} < {}",
            w[0].text(),
            w[1].text()
        );
        assert!(crate_version(&w[0]) < crate_version(&w[1]));
    }
}

#[test]
fn ranges_agree_with_the_interval_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_11e7);
    let mut positives = 0;
    for i in 0..500 {
        let range = gen_range(&mut rng);
        let v = gen_version(&mut rng, 0.3);
        let parsed = parse_range(&range.text).unwrap_or_else(|e| panic!("case {i}: {:?}: {e}", range.text));
        let got = parsed.satisfies(&crate_version(&v));
        let want = range.satisfied_by(&v);
        assert_eq!(got, want, "case {i}: {:?} against {}", range.text, v.text());
        positives += usize::from(want);
    }
    // The generator must exercise both outcomes.
    assert!((50..450).contains(&positives), "{positives} of 500 satisfied");
}

#[test]
fn ordering_is_a_total_order_matching_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let (a, b, c) = (
            gen_version(&mut rng, 0.4),
            gen_version(&mut rng, 0.4),
            gen_version(&mut rng, 0.4),
        );
        let (x, y, z) = (crate_version(&a), crate_version(&b), crate_version(&c));
        assert_eq!(x.cmp(&y), precedence(&a, &b), "{} vs {}", a.text(), b.text());
        assert_eq!(x.cmp(&y), y.cmp(&x).reverse());
        assert_eq!(x.cmp(&x), Ordering::Equal);
        if x <= y && y <= z {
            assert!(x <= z, "{} {} {}", a.text(), b.text(), c.text());
        }
        assert_eq!(x.to_string(), a.text());
    }
}
