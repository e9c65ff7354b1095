#![allow(dead_code)]

use fmm2d::connectivity::Connectivity;
use fmm2d::kernel::{exchanged_well_separated, well_separated, Theta};
use fmm2d::tree::Pyramid;

/// Counts, for every ordered pair of nonempty leaves, how many mechanisms
/// account for the interaction (direct, conversion, same-level weak pair at
/// some ancestor level, merged cross-level pair). Returns the offending
/// pairs whose count is not exactly one.
pub fn coverage_violations(pyramid: &Pyramid, conn: &Connectivity) -> Vec<(usize, usize, usize)> {
    let leaf = pyramid.leaf_level();
    let leaves = pyramid.level(leaf);
    let mut bad = Vec::new();
    for (t, lt) in leaves.iter().enumerate() {
        if lt.is_empty() {
            continue;
        }
        for (s, ls) in leaves.iter().enumerate() {
            if ls.is_empty() {
                continue;
            }
            let mut count = 0;
            if conn.leaf.direct.row(t).contains(&s) {
                count += 1;
            }
            if conn.leaf.p2l.row(t).contains(&s) || conn.leaf.m2p.row(t).contains(&s) {
                count += 1;
            }
            for level in 1..=leaf {
                let shift = 2 * (leaf - level);
                let (at, as_) = (t >> shift, s >> shift);
                if conn.levels[level].weak.row(at).contains(&as_) {
                    count += 1;
                }
                if level >= 2 && conn.levels[level].weak_parent.row(at).contains(&(as_ >> 2)) {
                    count += 1;
                }
            }
            if count != 1 {
                bad.push((t, s, count));
            }
        }
    }
    bad
}

/// Checks the separation invariants of every list. Returns a description of
/// the first violation.
pub fn separation_violation(
    pyramid: &Pyramid,
    conn: &Connectivity,
    theta: Theta,
) -> Option<String> {
    for (level, lc) in conn.levels.iter().enumerate() {
        let boxes = pyramid.level(level);
        for (b, row) in lc.weak.iter() {
            for &c in row {
                if !well_separated(&boxes[b].disc, &boxes[c].disc, theta) {
                    return Some(format!(
                        "weak pair ({b},{c}) at level {level} not separated"
                    ));
                }
            }
        }
        if level > 0 {
            let parents = pyramid.level(level - 1);
            for (b, row) in lc.weak_parent.iter() {
                for &q in row {
                    if !well_separated(&boxes[b].disc, &parents[q].disc, theta) {
                        return Some(format!(
                            "merged pair ({b},{q}) at level {level} not separated"
                        ));
                    }
                }
            }
        }
        for (b, row) in lc.strong.iter() {
            for &c in row {
                if c != b && well_separated(&boxes[b].disc, &boxes[c].disc, theta) {
                    return Some(format!(
                        "strong pair ({b},{c}) at level {level} is separated"
                    ));
                }
            }
        }
    }
    let leaves = pyramid.level(pyramid.leaf_level());
    for pair in &conn.conversions {
        let (s, l) = (&leaves[pair.small].disc, &leaves[pair.large].disc);
        if !(s.radius < l.radius
            && exchanged_well_separated(s, l, theta)
            && !well_separated(s, l, theta))
        {
            return Some(format!("conversion {pair:?} invalid"));
        }
    }
    None
}

/// Strong lists are reflexive and symmetric; weak lists are disjoint from
/// strong and drawn from the children of the parent's strong list.
pub fn structure_violation(pyramid: &Pyramid, conn: &Connectivity) -> Option<String> {
    for (level, lc) in conn.levels.iter().enumerate() {
        let n = pyramid.level(level).len();
        for b in 0..n {
            if !lc.strong.contains(b, b) {
                return Some(format!("box {b} at level {level} not self-coupled"));
            }
            for &c in lc.strong.row(b) {
                if !lc.strong.contains(c, b) {
                    return Some(format!("strong ({b},{c}) at level {level} not symmetric"));
                }
            }
            for &c in lc.weak.row(b) {
                if lc.strong.contains(b, c) {
                    return Some(format!("({b},{c}) both weak and strong at level {level}"));
                }
            }
            if level > 0 {
                let ps = &conn.levels[level - 1].strong;
                for &c in lc.strong.row(b).iter().chain(lc.weak.row(b)) {
                    if !ps.contains(b / 4, c / 4) {
                        return Some(format!("({b},{c}) at level {level} not a candidate"));
                    }
                }
            }
        }
    }
    None
}
