//! The full multipole evaluation: tree, connectivity, upward pass,
//! translations, downward pass and near field.
//!
//! Every phase is written as a gather: each output box is produced by
//! exactly one task, reading immutable data from the previous phase. The
//! result is therefore bitwise reproducible for any thread count.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::connectivity::{Connectivity, OptimizationFlags};
use crate::error::{FmmError, Result};
use crate::expansion::{self, Binomials};
use crate::kernel::{Kernel, Theta};
use crate::oracle;
use crate::tree::{level_count, BoxNode, Pyramid, Source, SplitPolicy};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default cap on `N` for [`evaluate_direct`].
pub const DIRECT_GUARD: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmmConfig {
    pub theta: Theta,
    /// Number of expansion coefficients.
    pub p: usize,
    /// Desired number of sources per finest-level box.
    pub leaf_target: usize,
    pub split_policy: SplitPolicy,
    pub flags: OptimizationFlags,
    pub kernel: Kernel,
    /// Worker threads; 0 uses the global rayon pool.
    pub threads: usize,
}

impl Default for FmmConfig {
    fn default() -> Self {
        Self {
            theta: Theta::default(),
            p: 20,
            leaf_target: 20,
            split_policy: SplitPolicy::MedianAsymmetric,
            flags: OptimizationFlags::default(),
            kernel: Kernel::InverseForce,
            threads: 0,
        }
    }
}

impl FmmConfig {
    pub fn validate(&self) -> Result<()> {
        Theta::new(self.theta.value())?;
        if self.p == 0 {
            return Err(FmmError::InvalidOrder(self.p));
        }
        if self.leaf_target == 0 {
            return Err(FmmError::InvalidLeafTarget);
        }
        Ok(())
    }
}

/// Wall time spent in each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub tree: Duration,
    pub connect: Duration,
    pub upward: Duration,
    pub m2l: Duration,
    pub downward: Duration,
    pub near: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.tree + self.connect + self.upward + self.m2l + self.downward + self.near
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldStats {
    pub n_levels: usize,
    /// Nonempty boxes per level.
    pub boxes_per_level: Vec<usize>,
    /// Same-level weak entries per level (directed).
    pub weak_pairs_per_level: Vec<usize>,
    /// Cross-level entries created by parent merging.
    pub merged_pairs: usize,
    /// Directed leaf pairs evaluated by P2P, self pairs included.
    pub direct_leaf_pairs: usize,
    /// Unordered leaf pairs routed through P2L/M2P.
    pub conversion_pairs: usize,
    pub timings: PhaseTimings,
}

impl FieldStats {
    pub fn weak_pairs(&self) -> usize {
        self.weak_pairs_per_level.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldResult {
    /// `Φ(x_i) = Σ_{j≠i} G(x_i, x_j)` in input order.
    pub potentials: Vec<Complex64>,
    pub stats: FieldStats,
}

/// Runs the fast multipole method for all sources.
pub fn evaluate(sources: &[Source], config: &FmmConfig) -> Result<FieldResult> {
    config.validate()?;
    if config.threads == 0 {
        evaluate_inner(sources, config)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| FmmError::ThreadPool(e.to_string()))?;
        pool.install(|| evaluate_inner(sources, config))
    }
}

fn evaluate_inner(sources: &[Source], config: &FmmConfig) -> Result<FieldResult> {
    let mut timings = PhaseTimings::default();

    let clock = Instant::now();
    let pyramid = Pyramid::build(sources, config.leaf_target, config.split_policy)?;
    timings.tree = clock.elapsed();

    let clock = Instant::now();
    let conn = Connectivity::build(&pyramid, config.theta, config.flags);
    timings.connect = clock.elapsed();

    let mut engine = Engine::new(&pyramid, &conn, config);

    let clock = Instant::now();
    engine.upward();
    timings.upward = clock.elapsed();

    let clock = Instant::now();
    engine.translate();
    timings.m2l = clock.elapsed();

    let clock = Instant::now();
    engine.downward();
    timings.downward = clock.elapsed();

    let clock = Instant::now();
    let permuted = engine.near_field();
    timings.near = clock.elapsed();

    let kernel = config.kernel;
    let potentials = pyramid
        .unpermute(&permuted)
        .into_iter()
        .map(|v| kernel.report(v))
        .collect();

    let stats = FieldStats {
        n_levels: pyramid.n_levels(),
        boxes_per_level: pyramid
            .levels()
            .iter()
            .map(|l| l.iter().filter(|b| !b.is_empty()).count())
            .collect(),
        weak_pairs_per_level: conn.levels.iter().map(|l| l.weak.nnz()).collect(),
        merged_pairs: conn.levels.iter().map(|l| l.weak_parent.nnz()).sum(),
        direct_leaf_pairs: conn.leaf.direct.nnz(),
        conversion_pairs: conn.conversions.len(),
        timings,
    };
    Ok(FieldResult { potentials, stats })
}

/// Per-level expansion storage, `p` coefficients per box.
struct LevelExpansions {
    coeffs: Vec<Complex64>,
    log_strength: Vec<f64>,
}

impl LevelExpansions {
    fn zeros(boxes: usize, p: usize) -> Self {
        Self {
            coeffs: vec![ZERO; boxes * p],
            log_strength: vec![0.0; boxes],
        }
    }
}

struct Engine<'a> {
    pyramid: &'a Pyramid,
    conn: &'a Connectivity,
    kernel: Kernel,
    p: usize,
    binom: Binomials,
    outgoing: Vec<LevelExpansions>,
    incoming: Vec<LevelExpansions>,
}

impl<'a> Engine<'a> {
    fn new(pyramid: &'a Pyramid, conn: &'a Connectivity, config: &FmmConfig) -> Self {
        let p = config.p;
        let alloc = || -> Vec<LevelExpansions> {
            pyramid
                .levels()
                .iter()
                .enumerate()
                .map(|(l, boxes)| LevelExpansions::zeros(if l == 0 { 0 } else { boxes.len() }, p))
                .collect()
        };
        Self {
            pyramid,
            conn,
            kernel: config.kernel,
            p,
            binom: Binomials::new(2 * p),
            outgoing: alloc(),
            incoming: alloc(),
        }
    }

    fn upward(&mut self) {
        let leaf = self.pyramid.leaf_level();
        if leaf == 0 {
            return;
        }
        let (p, kernel, pyramid) = (self.p, self.kernel, self.pyramid);
        let boxes = pyramid.level(leaf);
        let out = &mut self.outgoing[leaf];
        out.coeffs
            .par_chunks_mut(p)
            .zip(out.log_strength.par_iter_mut())
            .zip(boxes.par_iter())
            .for_each(|((coeffs, q), b)| {
                if !b.is_empty() {
                    *q = expansion::p2m_into(
                        kernel,
                        pyramid.sources_of(b),
                        b.disc.center,
                        b.scale(),
                        coeffs,
                    );
                }
            });

        for level in (1..leaf).rev() {
            let (upper, lower) = self.outgoing.split_at_mut(level + 1);
            let dst = &mut upper[level];
            let src = &lower[0];
            let parents = pyramid.level(level);
            let children = pyramid.level(level + 1);
            let binom = &self.binom;
            dst.coeffs
                .par_chunks_mut(p)
                .zip(dst.log_strength.par_iter_mut())
                .zip(parents.par_iter())
                .for_each(|((coeffs, q), b)| {
                    if b.is_empty() {
                        return;
                    }
                    for (ci, c) in (4 * b.index..).zip(&children[4 * b.index..4 * b.index + 4]) {
                        if c.is_empty() {
                            continue;
                        }
                        let cq = src.log_strength[ci];
                        expansion::m2m_acc(
                            &src.coeffs[ci * p..(ci + 1) * p],
                            cq,
                            c.disc.center,
                            c.scale(),
                            coeffs,
                            b.disc.center,
                            b.scale(),
                            binom,
                        );
                        *q += cq;
                    }
                });
        }
    }

    fn translate(&mut self) {
        let p = self.p;
        for level in 1..self.pyramid.n_levels() {
            let conn = &self.conn.levels[level];
            let boxes = self.pyramid.level(level);
            let parents = self.pyramid.level(level - 1);
            let same = &self.outgoing[level];
            let upper = &self.outgoing[level - 1];
            let binom = &self.binom;
            self.incoming[level]
                .coeffs
                .par_chunks_mut(p)
                .zip(boxes.par_iter())
                .enumerate()
                .for_each(|(bi, (dst, b))| {
                    let (center, scale) = (b.disc.center, b.scale());
                    for &ci in conn.weak.row(bi) {
                        let c = &boxes[ci];
                        expansion::m2l_acc(
                            &same.coeffs[ci * p..(ci + 1) * p],
                            same.log_strength[ci],
                            c.disc.center,
                            c.scale(),
                            dst,
                            center,
                            scale,
                            binom,
                        );
                    }
                    for &qi in conn.weak_parent.row(bi) {
                        let q = &parents[qi];
                        expansion::m2l_acc(
                            &upper.coeffs[qi * p..(qi + 1) * p],
                            upper.log_strength[qi],
                            q.disc.center,
                            q.scale(),
                            dst,
                            center,
                            scale,
                            binom,
                        );
                    }
                });
        }
    }

    fn downward(&mut self) {
        let p = self.p;
        for level in 1..self.pyramid.leaf_level() {
            let (upper, lower) = self.incoming.split_at_mut(level + 1);
            let src = &upper[level];
            let dst = &mut lower[0];
            let parents = self.pyramid.level(level);
            let children = self.pyramid.level(level + 1);
            dst.coeffs
                .par_chunks_mut(p)
                .zip(children.par_iter())
                .for_each(|(coeffs, c)| {
                    if c.is_empty() {
                        return;
                    }
                    let pi = c.index / 4;
                    let parent = &parents[pi];
                    let local = &src.coeffs[pi * p..(pi + 1) * p];
                    if local.iter().all(|v| *v == ZERO) {
                        return;
                    }
                    expansion::l2l_acc(
                        local,
                        parent.disc.center,
                        parent.scale(),
                        coeffs,
                        c.disc.center,
                        c.scale(),
                    );
                });
        }
    }

    /// Potentials in pyramid order.
    fn near_field(&self) -> Vec<Complex64> {
        let pyramid = self.pyramid;
        let leaf_level = pyramid.leaf_level();
        let leaves = pyramid.level(leaf_level);
        let mut out = vec![ZERO; pyramid.len()];

        let mut chunks: Vec<(usize, &mut [Complex64])> = Vec::with_capacity(leaves.len());
        let mut rest: &mut [Complex64] = &mut out;
        for (i, b) in leaves.iter().enumerate() {
            let (head, tail) = rest.split_at_mut(b.len());
            chunks.push((i, head));
            rest = tail;
        }

        chunks.into_par_iter().for_each(|(ti, values)| {
            let t = &leaves[ti];
            if t.is_empty() {
                return;
            }
            self.leaf_work(ti, t, values);
        });
        out
    }

    fn leaf_work(&self, ti: usize, t: &BoxNode, values: &mut [Complex64]) {
        let (p, kernel, pyramid) = (self.p, self.kernel, self.pyramid);
        let leaf_level = pyramid.leaf_level();
        let leaves = pyramid.level(leaf_level);
        let plan = &self.conn.leaf;
        let targets = pyramid.sources_of(t);

        if leaf_level > 0 {
            let stored = &self.incoming[leaf_level].coeffs[ti * p..(ti + 1) * p];
            let mut local = expansion::Buf::from_slice(stored);
            for &ci in plan.p2l.row(ti) {
                expansion::p2l_acc(
                    kernel,
                    pyramid.sources_of(&leaves[ci]),
                    t.disc.center,
                    t.scale(),
                    &mut local,
                );
            }
            if local.iter().any(|v| *v != ZERO) {
                for (v, s) in values.iter_mut().zip(targets) {
                    *v += expansion::l2p(&local, t.disc.center, t.scale(), s.position);
                }
            }
            let outgoing = &self.outgoing[leaf_level];
            for &si in plan.m2p.row(ti) {
                let s = &leaves[si];
                let coeffs = &outgoing.coeffs[si * p..(si + 1) * p];
                let q = outgoing.log_strength[si];
                for (v, x) in values.iter_mut().zip(targets) {
                    *v += expansion::m2p(coeffs, q, s.disc.center, s.scale(), x.position);
                }
            }
        }

        for &ci in plan.direct.row(ti) {
            expansion::p2p(
                targets,
                pyramid.sources_of(&leaves[ci]),
                ci == ti,
                kernel,
                values,
            );
        }
    }
}

/// O(N²) reference sum over all sources, capped at [`DIRECT_GUARD`].
pub fn evaluate_direct(sources: &[Source], kernel: Kernel) -> Result<FieldResult> {
    evaluate_direct_with_guard(sources, kernel, DIRECT_GUARD)
}

pub fn evaluate_direct_with_guard(
    sources: &[Source],
    kernel: Kernel,
    guard: usize,
) -> Result<FieldResult> {
    if sources.is_empty() {
        return Err(FmmError::EmptySources);
    }
    if sources.len() > guard {
        return Err(FmmError::DirectGuardExceeded {
            n: sources.len(),
            guard,
        });
    }
    let clock = Instant::now();
    let indices: Vec<usize> = (0..sources.len()).collect();
    let potentials = oracle::direct_at(sources, &indices, kernel)?;
    let stats = FieldStats {
        n_levels: 1,
        boxes_per_level: vec![1],
        weak_pairs_per_level: vec![0],
        direct_leaf_pairs: 1,
        timings: PhaseTimings {
            near: clock.elapsed(),
            ..Default::default()
        },
        ..Default::default()
    };
    Ok(FieldResult { potentials, stats })
}

/// Predicted work in units of `θ^-2 p^2 N` together with the box layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkEstimate {
    pub units: f64,
    pub boxes_per_level: Vec<usize>,
}

pub fn estimate_work(config: &FmmConfig, n: usize) -> WorkEstimate {
    let t = config.theta.value();
    let p = config.p as f64;
    let levels = level_count(n.max(1), config.leaf_target.max(1));
    WorkEstimate {
        units: p * p * n as f64 / (t * t),
        boxes_per_level: (0..levels).map(|l| 1usize << (2 * l)).collect(),
    }
}
