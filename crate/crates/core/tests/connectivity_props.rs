mod common;

use fmm2d::connectivity::Connectivity;
use fmm2d::oracle::{generate, Distribution};
use fmm2d::{OptimizationFlags, Pyramid, Source, SplitPolicy, Theta};
use proptest::prelude::*;
use proptest::test_runner::Config;

fn grid_coords(pyr: &Pyramid, level: usize, side: usize) -> Vec<(i64, i64)> {
    let root = pyr.node(0, 0).rect;
    let h = (root.xmax - root.xmin) / side as f64;
    pyr.level(level)
        .iter()
        .map(|b| {
            let c = b.rect.center();
            (
                ((c.re - root.xmin) / h).floor() as i64,
                ((c.im - root.ymin) / h).floor() as i64,
            )
        })
        .collect()
}

fn chebyshev(a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// On a regular mesh at θ = 1/√2 the weak list must equal the classical
/// interaction list: children of the parent's neighbours that are not
/// neighbours themselves.
#[test]
fn regular_mesh_reproduces_classical_interaction_lists() {
    for side in [4usize, 8] {
        let src: Vec<Source> = (0..side * side)
            .map(|k| Source::new((k % side) as f64 + 0.5, (k / side) as f64 + 0.5, 1.0))
            .collect();
        let pyr = Pyramid::build(&src, 1, SplitPolicy::MidpointUniform).unwrap();
        let leaf = pyr.leaf_level();
        assert_eq!(1 << leaf, side);
        assert!(pyr.level(leaf).iter().all(|b| b.len() == 1));

        let theta = Theta::new(0.5f64.sqrt()).unwrap();
        let conn = Connectivity::build(&pyr, theta, OptimizationFlags::default());
        for level in 1..=leaf {
            let cells = 1usize << level;
            let coords = grid_coords(&pyr, level, cells);
            let parents = grid_coords(&pyr, level - 1, cells / 2);
            for b in 0..coords.len() {
                let mut expected_weak = Vec::new();
                let mut expected_strong = Vec::new();
                for c in 0..coords.len() {
                    if chebyshev(parents[b / 4], parents[c / 4]) > 1 {
                        continue;
                    }
                    if chebyshev(coords[b], coords[c]) >= 2 {
                        expected_weak.push(c);
                    } else {
                        expected_strong.push(c);
                    }
                }
                assert_eq!(
                    conn.levels[level].weak.row(b),
                    &expected_weak[..],
                    "level {level} box {b}"
                );
                assert_eq!(
                    conn.levels[level].strong.row(b),
                    &expected_strong[..],
                    "level {level} box {b}"
                );
            }
        }
        if side == 4 {
            assert_eq!(conn.levels[1].weak.nnz(), 0);
            // every box outside the 3x3 neighbourhood, which has 4, 6 or 9 boxes at corners, edges, interior
            assert_eq!(conn.levels[2].weak.nnz(), 16 * 16 - (4 * 4 + 8 * 6 + 4 * 9));
        }
    }
}

fn config(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}

fn instance() -> impl Strategy<Value = (Vec<Source>, usize, SplitPolicy, Theta, OptimizationFlags)>
{
    (
        2usize..2000,
        2usize..30,
        any::<u64>(),
        0usize..5,
        any::<bool>(),
        0usize..3,
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(n, leaf, seed, d, median, t, parent_merge, rr_exchange)| {
            let dist = [
                Distribution::UniformDisc,
                Distribution::InverseRadialDisc,
                Distribution::NormalSquare { sigma: 0.05 },
                Distribution::LayerSquare { sigma: 0.02 },
                Distribution::UniformSquare,
            ][d];
            let policy = if median {
                SplitPolicy::MedianAsymmetric
            } else {
                SplitPolicy::MidpointUniform
            };
            let theta = Theta::new([0.25, 0.5, 0.5f64.sqrt()][t]).unwrap();
            let flags = OptimizationFlags {
                parent_merge,
                rr_exchange,
            };
            (
                generate(dist, n, 1.0, seed).unwrap(),
                leaf,
                policy,
                theta,
                flags,
            )
        })
}

proptest! {
    #![proptest_config(config(60))]

    #[test]
    fn every_leaf_pair_is_accounted_once((src, leaf, policy, theta, flags) in instance()) {
        let pyr = Pyramid::build(&src, leaf, policy).unwrap();
        let conn = Connectivity::build(&pyr, theta, flags);
        let bad = common::coverage_violations(&pyr, &conn);
        prop_assert!(bad.is_empty(), "first violations {:?}", &bad[..bad.len().min(5)]);
        if let Some(v) = common::separation_violation(&pyr, &conn, theta) {
            prop_assert!(false, "{}", v);
        }
        if let Some(v) = common::structure_violation(&pyr, &conn) {
            prop_assert!(false, "{}", v);
        }
        if !flags.parent_merge {
            for lc in &conn.levels {
                for (b, row) in lc.weak.iter() {
                    for &c in row {
                        prop_assert!(lc.weak.contains(c, b), "weak ({}, {}) not symmetric", b, c);
                    }
                }
                prop_assert_eq!(lc.weak_parent.nnz(), 0);
            }
        }
        if !flags.rr_exchange {
            prop_assert!(conn.conversions.is_empty());
        }
    }
}

#[test]
fn parent_merge_reduces_translations_without_losing_pairs() {
    let src = generate(Distribution::InverseRadialDisc, 4000, 1.0, 17).unwrap();
    let pyr = Pyramid::build(&src, 10, SplitPolicy::MedianAsymmetric).unwrap();
    let theta = Theta::new(0.5).unwrap();
    let plain = Connectivity::build(&pyr, theta, OptimizationFlags::default());
    let merged = Connectivity::build(
        &pyr,
        theta,
        OptimizationFlags {
            parent_merge: true,
            rr_exchange: false,
        },
    );
    let count = |c: &Connectivity| {
        c.levels
            .iter()
            .map(|l| l.weak.nnz() + l.weak_parent.nnz())
            .sum::<usize>()
    };
    let merged_pairs: usize = merged.levels.iter().map(|l| l.weak_parent.nnz()).sum();
    assert!(merged_pairs > 0);
    assert!(count(&merged) < count(&plain));
    assert!(common::coverage_violations(&pyr, &merged).is_empty());
}

#[test]
fn radius_exchange_finds_conversions_on_clustered_data() {
    let theta = Theta::new(0.5).unwrap();
    let flags = OptimizationFlags {
        parent_merge: false,
        rr_exchange: true,
    };
    let mut total = 0;
    for seed in 0..5 {
        let src = generate(Distribution::InverseRadialDisc, 2000, 1.0, seed).unwrap();
        let pyr = Pyramid::build(&src, 20, SplitPolicy::MedianAsymmetric).unwrap();
        let conn = Connectivity::build(&pyr, theta, flags);
        assert!(common::separation_violation(&pyr, &conn, theta).is_none());
        assert!(common::coverage_violations(&pyr, &conn).is_empty());
        let leaves = pyr.level(pyr.leaf_level());
        for pair in &conn.conversions {
            assert!(leaves[pair.small].disc.radius < leaves[pair.large].disc.radius);
            assert!(conn.leaf().strong.contains(pair.small, pair.large));
            assert!(!conn.leaf.direct.contains(pair.small, pair.large));
            assert!(!conn.leaf.direct.contains(pair.large, pair.small));
        }
        total += conn.conversions.len();
    }
    assert!(total > 0, "no conversion pairs on 1/r data");
}

#[test]
fn single_level_pyramid_is_all_direct() {
    let src = generate(Distribution::UniformDisc, 15, 1.0, 1).unwrap();
    let pyr = Pyramid::build(&src, 20, SplitPolicy::MedianAsymmetric).unwrap();
    let conn = Connectivity::build(&pyr, Theta::new(0.5).unwrap(), OptimizationFlags::default());
    assert_eq!(conn.levels.len(), 1);
    assert_eq!(conn.leaf.direct.row(0), &[0]);
}
