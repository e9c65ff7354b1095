//! Balanced quad pyramid built by recursive median splitting of the sources.
//!
//! Every level step splits each box into four children by two rounds of
//! halving. With [`SplitPolicy::MedianAsymmetric`] each halving falls at the
//! source median along the direction in which the points are most spread
//! out, so all leaves hold nearly the same number of sources, every leaf
//! sits at the same depth and boxes stay roughly square even on strongly
//! anisotropic data. On isotropic data this is an `x` split followed by `y`
//! splits. [`SplitPolicy::MidpointUniform`] always splits at geometric
//! midpoints, `x` first, and serves as the uniform baseline.
//!
//! Children of box `k` at level `l` are boxes `4k..4k+4` at level `l + 1`,
//! ordered `(first low, second low), (first low, second high), (first high,
//! second low), (first high, second high)`.

use std::ops::Range;

use num_complex::Complex64;

use crate::error::{FmmError, Result};
use crate::kernel::Disc;

/// A point source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub position: Complex64,
    pub strength: f64,
}

impl Source {
    pub fn new(x: f64, y: f64, strength: f64) -> Self {
        Self {
            position: Complex64::new(x, y),
            strength,
        }
    }

    fn is_finite(&self) -> bool {
        self.position.re.is_finite() && self.position.im.is_finite() && self.strength.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitPolicy {
    /// Split at the source median along the wider direction, twice per
    /// level (balanced counts).
    #[default]
    MedianAsymmetric,
    /// Split at the geometric midpoint of the box regardless of counts.
    MidpointUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    #[inline]
    fn coord(self, z: Complex64) -> f64 {
        match self {
            Axis::X => z.re,
            Axis::Y => z.im,
        }
    }
}

/// Closed axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * (self.xmax - self.xmin).hypot(self.ymax - self.ymin)
    }

    /// Smallest disc containing the rectangle.
    pub fn enclosing_disc(&self) -> Disc {
        Disc::new(self.center(), self.half_diagonal())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.xmin && z.re <= self.xmax && z.im >= self.ymin && z.im <= self.ymax
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.xmin >= self.xmin
            && other.xmax <= self.xmax
            && other.ymin >= self.ymin
            && other.ymax <= self.ymax
    }

    fn bounding<'a>(points: impl Iterator<Item = &'a Complex64>) -> Option<Rect> {
        let mut it = points.peekable();
        let first = **it.peek()?;
        let mut r = Rect {
            xmin: first.re,
            xmax: first.re,
            ymin: first.im,
            ymax: first.im,
        };
        for z in it {
            r.xmin = r.xmin.min(z.re);
            r.xmax = r.xmax.max(z.re);
            r.ymin = r.ymin.min(z.im);
            r.ymax = r.ymax.max(z.im);
        }
        Some(r)
    }

    fn squared(self) -> Rect {
        let c = self.center();
        let h = 0.5 * (self.xmax - self.xmin).max(self.ymax - self.ymin);
        Rect {
            xmin: (c.re - h).min(self.xmin),
            xmax: (c.re + h).max(self.xmax),
            ymin: (c.im - h).min(self.ymin),
            ymax: (c.im + h).max(self.ymax),
        }
    }
}

/// One cell of the pyramid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxNode {
    pub level: usize,
    pub index: usize,
    /// Cell obtained by cutting the parent at the split lines.
    pub rect: Rect,
    /// Disc used by the θ-criterion and as expansion center. Median boxes
    /// use the center of their points' bounding box and the distance to the
    /// farthest point; midpoint boxes use the circumcircle of `rect`.
    pub disc: Disc,
    pub start: usize,
    pub end: usize,
}

impl BoxNode {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Length scale used to non-dimensionalize expansions about this box.
    pub fn scale(&self) -> f64 {
        if self.disc.radius > 0.0 {
            self.disc.radius
        } else {
            let h = self.rect.half_diagonal();
            if h > 0.0 {
                h
            } else {
                1.0
            }
        }
    }
}

/// Level-indexed complete 4-ary tree over a permuted copy of the sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    levels: Vec<Vec<BoxNode>>,
    sources: Vec<Source>,
    /// `order[k]` is the original index of permuted source `k`.
    order: Vec<usize>,
    /// `permutation[i]` is the permuted position of original source `i`.
    permutation: Vec<usize>,
    policy: SplitPolicy,
}

/// Number of levels (root included) for `n` sources and a leaf target:
/// `ceil(log4(n / leaf_target)) + 1`, with at least the root.
pub fn level_count(n: usize, leaf_target: usize) -> usize {
    let mut depth = 0;
    let mut capacity = leaf_target as u128;
    while capacity < n as u128 {
        capacity *= 4;
        depth += 1;
    }
    depth + 1
}

#[derive(Clone, Copy)]
struct Tagged {
    source: Source,
    orig: usize,
}

impl Pyramid {
    pub fn build(sources: &[Source], leaf_target: usize, policy: SplitPolicy) -> Result<Self> {
        if sources.is_empty() {
            return Err(FmmError::EmptySources);
        }
        if leaf_target == 0 {
            return Err(FmmError::InvalidLeafTarget);
        }
        if let Some(index) = sources.iter().position(|s| !s.is_finite()) {
            return Err(FmmError::NonFiniteSource { index });
        }

        let n = sources.len();
        let n_levels = level_count(n, leaf_target);
        let mut items: Vec<Tagged> = sources
            .iter()
            .enumerate()
            .map(|(orig, &source)| Tagged { source, orig })
            .collect();

        let bbox = Rect::bounding(sources.iter().map(|s| &s.position)).expect("nonempty");
        let root_rect = match policy {
            SplitPolicy::MedianAsymmetric => bbox,
            SplitPolicy::MidpointUniform => bbox.squared(),
        };
        let root = BoxNode {
            level: 0,
            index: 0,
            rect: root_rect,
            disc: match policy {
                SplitPolicy::MedianAsymmetric => {
                    cluster_disc(sources.iter().map(|s| s.position)).expect("nonempty")
                }
                SplitPolicy::MidpointUniform => root_rect.enclosing_disc(),
            },
            start: 0,
            end: n,
        };

        let mut levels = vec![vec![root]];
        for level in 1..n_levels {
            let parents = &levels[level - 1];
            let mut boxes = Vec::with_capacity(parents.len() * 4);
            for parent in parents {
                let children = split_box(&mut items[parent.range()], parent, level, policy);
                boxes.extend(children);
            }
            levels.push(boxes);
        }

        let order: Vec<usize> = items.iter().map(|t| t.orig).collect();
        let mut permutation = vec![0; n];
        for (k, &orig) in order.iter().enumerate() {
            permutation[orig] = k;
        }
        Ok(Self {
            levels,
            sources: items.into_iter().map(|t| t.source).collect(),
            order,
            permutation,
            policy,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn leaf_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, level: usize) -> &[BoxNode] {
        &self.levels[level]
    }

    pub fn levels(&self) -> &[Vec<BoxNode>] {
        &self.levels
    }

    pub fn node(&self, level: usize, index: usize) -> &BoxNode {
        &self.levels[level][index]
    }

    pub fn policy(&self) -> SplitPolicy {
        self.policy
    }

    /// Sources in pyramid order.
    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn sources_of(&self, node: &BoxNode) -> &[Source] {
        &self.sources[node.range()]
    }

    /// Original index → permuted index.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Permuted index → original index.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Reorders values given in pyramid order back to input order.
    pub fn unpermute<T: Copy>(&self, permuted: &[T]) -> Vec<T> {
        self.permutation.iter().map(|&k| permuted[k]).collect()
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

/// Partially sorts `points` so the first `ceil(n/2)` have `key` no larger
/// than any of the rest, and returns `ceil(n/2)`.
///
/// Quickselect with a median-of-three pivot and three-way partitioning, so
/// runs of equal keys do not degrade it.
pub fn select_median_by<T, F>(points: &mut [T], key: F) -> usize
where
    F: Fn(&T) -> f64,
{
    let n = points.len();
    let k = n.div_ceil(2);
    if n < 2 {
        return k;
    }
    let (mut lo, mut hi) = (0, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let pivot = median_of_three(key(&points[lo]), key(&points[mid]), key(&points[hi - 1]));
        let (mut lt, mut i, mut gt) = (lo, lo, hi);
        while i < gt {
            let v = key(&points[i]);
            if v < pivot {
                points.swap(lt, i);
                lt += 1;
                i += 1;
            } else if v > pivot {
                gt -= 1;
                points.swap(i, gt);
            } else {
                i += 1;
            }
        }
        if k < lt {
            hi = lt;
        } else if k >= gt {
            lo = gt;
        } else {
            break;
        }
    }
    k
}

/// [`select_median_by`] on one coordinate of a source slice.
pub fn select_median(points: &mut [Source], axis: Axis) -> usize {
    select_median_by(points, |s| axis.coord(s.position))
}

fn median_of_three(a: f64, b: f64, c: f64) -> f64 {
    if a < b {
        if b < c {
            b
        } else if a < c {
            c
        } else {
            a
        }
    } else if a < c {
        a
    } else if b < c {
        c
    } else {
        b
    }
}

/// Splits `items` at a median (or midpoint) along `axis`. Returns the split
/// index and the coordinate of the dividing line.
fn split_axis(
    items: &mut [Tagged],
    axis: Axis,
    lo: f64,
    hi: f64,
    policy: SplitPolicy,
) -> (usize, f64) {
    let coord = |t: &Tagged| axis.coord(t.source.position);
    match policy {
        SplitPolicy::MedianAsymmetric => {
            let k = select_median_by(items, coord);
            let line = match (k, items.len() - k) {
                (0, _) => lo,
                (_, 0) => hi,
                _ => {
                    let left = items[..k]
                        .iter()
                        .map(coord)
                        .fold(f64::NEG_INFINITY, f64::max);
                    let right = items[k..].iter().map(coord).fold(f64::INFINITY, f64::min);
                    0.5 * (left + right)
                }
            };
            (k, line)
        }
        SplitPolicy::MidpointUniform => {
            let line = 0.5 * (lo + hi);
            let mut k = 0;
            for i in 0..items.len() {
                if coord(&items[i]) < line {
                    items.swap(k, i);
                    k += 1;
                }
            }
            (k, line)
        }
    }
}

impl Rect {
    fn cut(self, axis: Axis, line: f64) -> (Rect, Rect) {
        match axis {
            Axis::X => (Rect { xmax: line, ..self }, Rect { xmin: line, ..self }),
            Axis::Y => (Rect { ymax: line, ..self }, Rect { ymin: line, ..self }),
        }
    }

    fn extent(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.xmax - self.xmin,
            Axis::Y => self.ymax - self.ymin,
        }
    }
}

impl Axis {
    fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

/// Disc about the center of the points' bounding box, with radius reaching
/// the farthest point.
fn cluster_disc(points: impl Iterator<Item = Complex64> + Clone) -> Option<Disc> {
    let bbox = Rect::bounding(points.clone().collect::<Vec<_>>().iter())?;
    let c = bbox.center();
    let r = points.map(|z| (z - c).norm()).fold(0.0, f64::max);
    Some(Disc::new(c, r))
}

/// Axis along which the points of `items` are most spread out; `tie` wins
/// when both extents are equal.
fn longest_axis(items: &[Tagged], tie: Axis) -> Axis {
    match Rect::bounding(items.iter().map(|t| &t.source.position)) {
        Some(r) if r.extent(tie.other()) > r.extent(tie) => tie.other(),
        _ => tie,
    }
}

fn split_box(
    items: &mut [Tagged],
    parent: &BoxNode,
    level: usize,
    policy: SplitPolicy,
) -> [BoxNode; 4] {
    let pr = parent.rect;
    let first = match policy {
        SplitPolicy::MedianAsymmetric => longest_axis(items, Axis::X),
        SplitPolicy::MidpointUniform => Axis::X,
    };
    let (lo, hi) = match first {
        Axis::X => (pr.xmin, pr.xmax),
        Axis::Y => (pr.ymin, pr.ymax),
    };
    let (k, line) = split_axis(items, first, lo, hi, policy);
    let (low_rect, high_rect) = pr.cut(first, line);
    let (low, high) = items.split_at_mut(k);
    let halve = |part: &mut [Tagged], rect: Rect| {
        let axis = match policy {
            SplitPolicy::MedianAsymmetric => longest_axis(part, first.other()),
            SplitPolicy::MidpointUniform => first.other(),
        };
        let (lo, hi) = match axis {
            Axis::X => (rect.xmin, rect.xmax),
            Axis::Y => (rect.ymin, rect.ymax),
        };
        let (k, line) = split_axis(part, axis, lo, hi, policy);
        let (a, b) = rect.cut(axis, line);
        (k, a, b)
    };
    let (kl, r0, r1) = halve(low, low_rect);
    let (kh, r2, r3) = halve(high, high_rect);

    let s = parent.start;
    let bounds = [s, s + kl, s + k, s + k + kh, parent.end];
    let rects = [r0, r1, r2, r3];

    std::array::from_fn(|q| {
        let (start, end) = (bounds[q], bounds[q + 1]);
        let rect = rects[q];
        let disc = match policy {
            SplitPolicy::MidpointUniform => rect.enclosing_disc(),
            SplitPolicy::MedianAsymmetric => {
                let local = &items[start - s..end - s];
                cluster_disc(local.iter().map(|t| t.source.position))
                    .unwrap_or(Disc::new(rect.center(), 0.0))
            }
        };
        BoxNode {
            level,
            index: parent.index * 4 + q,
            rect,
            disc,
            start,
            end,
        }
    })
}
