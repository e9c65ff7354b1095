//! Level-by-level strong/weak coupling of pyramid boxes.
//!
//! For a box `b` with parent `P`, the candidates are all children of the
//! boxes strongly coupled to `P`. Candidates that are well separated from
//! `b` become weakly coupled (interact through expansions), the rest stay
//! strongly coupled. The root is strongly coupled to itself only.

use crate::kernel::{exchanged_well_separated, well_separated, Theta};
use crate::tree::{BoxNode, Pyramid};

/// Optional structural optimizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OptimizationFlags {
    /// Replace weak couplings to all children of a box by one coupling to
    /// that box, when it is itself well separated.
    pub parent_merge: bool,
    /// Route strongly coupled leaf pairs of unequal radii through P2L/M2P
    /// when the criterion holds with the radii exchanged.
    pub rr_exchange: bool,
}

/// Compressed sparse rows of box indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Adjacency {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Adjacency {
    fn with_capacity(rows: usize, nnz: usize) -> Self {
        let mut offsets = Vec::with_capacity(rows + 1);
        offsets.push(0);
        Self {
            offsets,
            indices: Vec::with_capacity(nnz),
        }
    }

    fn push_row(&mut self, row: impl IntoIterator<Item = usize>) {
        self.indices.extend(row);
        self.offsets.push(self.indices.len());
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of stored entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[usize])> + '_ {
        (0..self.rows()).map(move |i| (i, self.row(i)))
    }
}

/// Coupling lists for one level. Rows are target boxes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelConnectivity {
    pub level: usize,
    /// Same-level boxes that are not well separated, including the box itself.
    pub strong: Adjacency,
    /// Same-level boxes whose outgoing expansions translate into this box.
    pub weak: Adjacency,
    /// Boxes one level up whose outgoing expansions translate into this box
    /// (parent-merge pairs).
    pub weak_parent: Adjacency,
}

/// A strongly coupled leaf pair handled by P2L into `small` and M2P from
/// `small` into `large`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConversionPair {
    pub small: usize,
    pub large: usize,
}

/// Per-leaf near-field work lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafPlan {
    /// Boxes evaluated directly (P2P), the box itself included.
    pub direct: Adjacency,
    /// Larger boxes whose sources are converted into this box's local expansion.
    pub p2l: Adjacency,
    /// Smaller boxes whose outgoing expansion is evaluated at this box's points.
    pub m2p: Adjacency,
}

/// All connectivity needed by the evaluator.
#[derive(Debug, Clone)]
pub struct Connectivity {
    pub levels: Vec<LevelConnectivity>,
    pub conversions: Vec<ConversionPair>,
    pub leaf: LeafPlan,
}

impl Connectivity {
    pub fn build(pyramid: &Pyramid, theta: Theta, flags: OptimizationFlags) -> Self {
        let levels = build_connectivity(pyramid, theta, flags);
        let leaf_conn = levels.last().expect("at least the root level");
        let conversions = if flags.rr_exchange {
            near_field_conversions(leaf_conn, pyramid, theta)
        } else {
            Vec::new()
        };
        let leaf = leaf_plan(&leaf_conn.strong, &conversions);
        Self {
            levels,
            conversions,
            leaf,
        }
    }

    pub fn leaf(&self) -> &LevelConnectivity {
        self.levels.last().expect("at least the root level")
    }
}

/// Builds strong/weak lists for every level of the pyramid.
pub fn build_connectivity(
    pyramid: &Pyramid,
    theta: Theta,
    flags: OptimizationFlags,
) -> Vec<LevelConnectivity> {
    let mut root_strong = Adjacency::with_capacity(1, 1);
    root_strong.push_row([0]);
    let mut empty = Adjacency::with_capacity(1, 0);
    empty.push_row([]);
    let mut out = vec![LevelConnectivity {
        level: 0,
        strong: root_strong,
        weak: empty.clone(),
        weak_parent: empty,
    }];

    for level in 1..pyramid.n_levels() {
        let boxes = pyramid.level(level);
        let parents = pyramid.level(level - 1);
        let parent_strong = &out[level - 1].strong;

        // sparsity is bounded by 4 children per strong parent entry
        let nnz: usize = (0..parents.len())
            .map(|p| 4 * 4 * parent_strong.row(p).len())
            .sum();
        let mut strong = Adjacency::with_capacity(boxes.len(), nnz);
        let mut weak = Adjacency::with_capacity(boxes.len(), nnz);
        let mut weak_parent = Adjacency::with_capacity(boxes.len(), 0);

        let mut s_row = Vec::new();
        let mut w_row = Vec::new();
        let mut wp_row = Vec::new();
        for (bi, b) in boxes.iter().enumerate() {
            s_row.clear();
            w_row.clear();
            wp_row.clear();
            if b.is_empty() {
                s_row.push(bi);
            } else {
                for &q in parent_strong.row(bi / 4) {
                    for (ci, c) in (4 * q..).zip(&boxes[4 * q..4 * q + 4]) {
                        if ci == bi {
                            s_row.push(ci);
                        } else if c.is_empty() {
                            continue;
                        } else if well_separated(&b.disc, &c.disc, theta) {
                            w_row.push(ci);
                        } else {
                            s_row.push(ci);
                        }
                    }
                }
                if flags.parent_merge && level >= 2 {
                    merge_parents(
                        b,
                        bi / 4,
                        parent_strong,
                        parents,
                        boxes,
                        theta,
                        &mut w_row,
                        &mut wp_row,
                    );
                }
            }
            strong.push_row(s_row.iter().copied());
            weak.push_row(w_row.iter().copied());
            weak_parent.push_row(wp_row.iter().copied());
        }
        out.push(LevelConnectivity {
            level,
            strong,
            weak,
            weak_parent,
        });
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn merge_parents(
    b: &BoxNode,
    parent: usize,
    parent_strong: &Adjacency,
    parents: &[BoxNode],
    boxes: &[BoxNode],
    theta: Theta,
    weak_row: &mut Vec<usize>,
    merged: &mut Vec<usize>,
) {
    for &q in parent_strong.row(parent) {
        let children = (4 * q..4 * q + 4).filter(|&c| !boxes[c].is_empty());
        let mut any = false;
        let mut all_weak = true;
        for c in children {
            any = true;
            if weak_row.binary_search(&c).is_err() {
                all_weak = false;
                break;
            }
        }
        if any && all_weak && well_separated(&b.disc, &parents[q].disc, theta) {
            weak_row.retain(|&c| c / 4 != q);
            merged.push(q);
        }
    }
}

/// Strongly coupled leaf pairs of unequal radii that satisfy the criterion
/// with the radii exchanged. Each unordered pair is reported once.
pub fn near_field_conversions(
    leaf: &LevelConnectivity,
    pyramid: &Pyramid,
    theta: Theta,
) -> Vec<ConversionPair> {
    let boxes = pyramid.level(leaf.level);
    let mut out = Vec::new();
    for (bi, row) in leaf.strong.iter() {
        let b = &boxes[bi];
        for &ci in row.iter().filter(|&&ci| ci > bi) {
            let c = &boxes[ci];
            if b.is_empty() || c.is_empty() || b.disc.radius == c.disc.radius {
                continue;
            }
            if exchanged_well_separated(&b.disc, &c.disc, theta)
                && !well_separated(&b.disc, &c.disc, theta)
            {
                let (small, large) = if b.disc.radius < c.disc.radius {
                    (bi, ci)
                } else {
                    (ci, bi)
                };
                out.push(ConversionPair { small, large });
            }
        }
    }
    out
}

fn leaf_plan(strong: &Adjacency, conversions: &[ConversionPair]) -> LeafPlan {
    let rows = strong.rows();
    let mut p2l_rows = vec![Vec::new(); rows];
    let mut m2p_rows = vec![Vec::new(); rows];
    for pair in conversions {
        p2l_rows[pair.small].push(pair.large);
        m2p_rows[pair.large].push(pair.small);
    }
    let mut direct = Adjacency::with_capacity(rows, strong.nnz());
    let mut p2l = Adjacency::with_capacity(rows, conversions.len());
    let mut m2p = Adjacency::with_capacity(rows, conversions.len());
    for i in 0..rows {
        p2l_rows[i].sort_unstable();
        m2p_rows[i].sort_unstable();
        let (pr, mr) = (&p2l_rows[i], &m2p_rows[i]);
        direct.push_row(
            strong
                .row(i)
                .iter()
                .copied()
                .filter(|c| pr.binary_search(c).is_err() && mr.binary_search(c).is_err()),
        );
        p2l.push_row(pr.iter().copied());
        m2p.push_row(mr.iter().copied());
    }
    LeafPlan { direct, p2l, m2p }
}
