use fmm2d::oracle::{generate, Distribution};
use fmm2d::tree::{level_count, select_median, select_median_by, Axis};
use fmm2d::{Pyramid, Source, SplitPolicy};
use proptest::prelude::*;
use proptest::test_runner::Config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}

fn check_median(values: &[f64]) {
    let mut v = values.to_vec();
    let k = select_median_by(&mut v, |x| *x);
    assert_eq!(k, values.len().div_ceil(2));
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lmax = v[..k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rmin = v[k..].iter().copied().fold(f64::INFINITY, f64::min);
    assert!(lmax <= rmin);
    assert_eq!(lmax, sorted[k - 1]);
    let mut back = v.clone();
    back.sort_by(f64::total_cmp);
    assert_eq!(back, sorted, "selection must permute, not alter");
}

#[test]
fn select_median_matches_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let values: Vec<f64> = (0..100_000).map(|_| rng.gen()).collect();
    check_median(&values);
    let coarse: Vec<f64> = (0..100_001).map(|_| rng.gen_range(0..17) as f64).collect();
    check_median(&coarse);
    let sorted: Vec<f64> = (0..50_000).map(f64::from).collect();
    check_median(&sorted);
    let reversed: Vec<f64> = sorted.iter().rev().copied().collect();
    check_median(&reversed);
}

#[test]
fn select_median_on_sources() {
    let mut pts = vec![
        Source::new(3.0, 0.0, 1.0),
        Source::new(1.0, 5.0, 1.0),
        Source::new(2.0, -1.0, 1.0),
    ];
    assert_eq!(select_median(&mut pts, Axis::X), 2);
    assert!(pts[..2].iter().all(|s| s.position.re <= 2.0));
    assert_eq!(pts[2].position.re, 3.0);
    assert_eq!(select_median(&mut pts, Axis::Y), 2);
    assert_eq!(pts[2].position.im, 5.0);
}

#[test]
fn uniform_square_leaves_are_exactly_balanced() {
    let n = 10_000;
    let src = generate(Distribution::UniformSquare, n, 1.0, 3).unwrap();
    let pyr = Pyramid::build(&src, 20, SplitPolicy::MedianAsymmetric).unwrap();
    let leaf = pyr.leaf_level();
    assert_eq!(pyr.n_levels(), level_count(n, 20));
    let boxes = 4usize.pow(leaf as u32);
    let (lo, hi) = (n / boxes, n.div_ceil(boxes));
    for b in pyr.level(leaf) {
        assert!(
            b.len() >= lo && b.len() <= hi,
            "leaf {} holds {}",
            b.index,
            b.len()
        );
    }
}

#[test]
fn anisotropic_data_keeps_boxes_compact() {
    let src = generate(Distribution::LayerSquare { sigma: 0.01 }, 20_000, 1.0, 3).unwrap();
    let pyr = Pyramid::build(&src, 20, SplitPolicy::MedianAsymmetric).unwrap();
    let leaves = pyr.level(pyr.leaf_level());
    let mut aspects: Vec<f64> = leaves
        .iter()
        .map(|b| {
            let pts = pyr.sources_of(b);
            let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for s in pts {
                x0 = x0.min(s.position.re);
                x1 = x1.max(s.position.re);
                y0 = y0.min(s.position.im);
                y1 = y1.max(s.position.im);
            }
            let (w, h) = (x1 - x0, y1 - y0);
            w.max(h) / w.min(h).max(1e-300)
        })
        .collect();
    aspects.sort_by(f64::total_cmp);
    let median = aspects[aspects.len() / 2];
    assert!(median < 4.0, "median leaf aspect ratio {median}");
}

fn instance() -> impl Strategy<Value = (Vec<Source>, usize, SplitPolicy)> {
    (
        1usize..2500,
        1usize..40,
        any::<u64>(),
        0usize..6,
        any::<bool>(),
    )
        .prop_map(|(n, leaf, seed, d, median)| {
            let dist = [
                Distribution::UniformDisc,
                Distribution::InverseRadialDisc,
                Distribution::NormalSquare { sigma: 0.05 },
                Distribution::LayerSquare { sigma: 0.01 },
                Distribution::UniformSquare,
                Distribution::UniformSquare,
            ][d];
            let mut src = generate(dist, n, 1.0, seed).unwrap();
            if d == 5 {
                // coarse lattice forces many duplicate coordinates
                for s in &mut src {
                    s.position.re = (s.position.re * 8.0).floor();
                    s.position.im = (s.position.im * 8.0).floor();
                }
            }
            let policy = if median {
                SplitPolicy::MedianAsymmetric
            } else {
                SplitPolicy::MidpointUniform
            };
            (src, leaf, policy)
        })
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn pyramid_invariants((src, leaf, policy) in instance()) {
        let pyr = Pyramid::build(&src, leaf, policy).unwrap();
        let n = src.len();
        prop_assert_eq!(pyr.n_levels(), level_count(n, leaf));
        for (level, boxes) in pyr.levels().iter().enumerate() {
            prop_assert_eq!(boxes.len(), 1usize << (2 * level));
            let mut next = 0;
            for (i, b) in boxes.iter().enumerate() {
                prop_assert_eq!(b.index, i);
                prop_assert_eq!(b.level, level);
                prop_assert_eq!(b.start, next);
                next = b.end;
                for s in pyr.sources_of(b) {
                    prop_assert!(b.rect.contains(s.position), "point outside rect at level {}", level);
                    let dist = (s.position - b.disc.center).norm();
                    prop_assert!(dist <= b.disc.radius * (1.0 + 1e-12) + 1e-300);
                }
                if level > 0 {
                    let parent = pyr.node(level - 1, i / 4);
                    prop_assert!(parent.rect.contains_rect(&b.rect));
                    prop_assert!(b.start >= parent.start && b.end <= parent.end);
                }
            }
            prop_assert_eq!(next, n);
        }
        if policy == SplitPolicy::MedianAsymmetric {
            let counts: Vec<usize> = pyr.level(pyr.leaf_level()).iter().map(|b| b.len()).collect();
            let (lo, hi) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
            prop_assert!(hi <= lo + 4, "leaf counts {}..{}", lo, hi);
        }

        let idx: Vec<usize> = (0..n).collect();
        let permuted: Vec<usize> = pyr.order().to_vec();
        prop_assert_eq!(pyr.unpermute(&permuted), idx);
        for (k, &orig) in pyr.order().iter().enumerate() {
            prop_assert_eq!(pyr.sources()[k], src[orig]);
            prop_assert_eq!(pyr.permutation()[orig], k);
        }

        let again = Pyramid::build(&src, leaf, policy).unwrap();
        prop_assert!(again == pyr, "rebuild differs");
    }
}

#[test]
fn rejects_bad_input() {
    assert!(Pyramid::build(&[], 20, SplitPolicy::MedianAsymmetric).is_err());
    assert!(Pyramid::build(
        &[Source::new(0.0, 0.0, 1.0)],
        0,
        SplitPolicy::MedianAsymmetric
    )
    .is_err());
    let bad = [
        Source::new(0.0, 0.0, 1.0),
        Source::new(f64::INFINITY, 0.0, 1.0),
    ];
    assert!(Pyramid::build(&bad, 1, SplitPolicy::MedianAsymmetric).is_err());
}

#[test]
fn identical_points_collapse_to_zero_radius() {
    let src = vec![Source::new(0.25, 0.5, 1.0); 64];
    let pyr = Pyramid::build(&src, 4, SplitPolicy::MedianAsymmetric).unwrap();
    for b in pyr.level(pyr.leaf_level()) {
        assert_eq!(b.disc.radius, 0.0);
        assert_eq!(b.len(), 4);
    }
}
