//! Point distributions, direct-sum references, error metrics and the three
//! experiment procedures (error decay, adaptive vs uniform, scaling).
//!
//! Random streams come from ChaCha8 seeded with a `u64`, so a given seed
//! reproduces the same points bit for bit.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;

use crate::driver::{evaluate, FieldStats, FmmConfig, PhaseTimings};
use crate::error::{FmmError, Result};
use crate::kernel::{Kernel, Theta};
use crate::tree::{Source, SplitPolicy};

/// Inner cutoff of the `1/r` radial law.
pub const INVERSE_RADIAL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// Uniform in the unit disc.
    UniformDisc,
    /// Unit disc, radius density `∝ 1/r` on `[1e-8, 1]`, uniform angle.
    InverseRadialDisc,
    /// Both coordinates `N(0, σ²)`, rejected to `[0,1]²`.
    NormalSquare { sigma: f64 },
    /// `x` uniform on `[0,1]`, `y ~ N(0, σ²)`, rejected to `[0,1]²`.
    LayerSquare { sigma: f64 },
    /// Uniform in `[0,1]²`.
    UniformSquare,
}

impl Distribution {
    pub fn name(&self) -> &'static str {
        match self {
            Distribution::UniformDisc => "uniform_disc",
            Distribution::InverseRadialDisc => "inverse_radial_disc",
            Distribution::NormalSquare { .. } => "normal_square",
            Distribution::LayerSquare { .. } => "layer_square",
            Distribution::UniformSquare => "uniform_square",
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match *self {
            Distribution::NormalSquare { sigma } | Distribution::LayerSquare { sigma } => {
                Some(sigma)
            }
            _ => None,
        }
    }

    /// Same family with a different width; no-op for the fixed families.
    pub fn with_sigma(self, sigma: f64) -> Self {
        match self {
            Distribution::NormalSquare { .. } => Distribution::NormalSquare { sigma },
            Distribution::LayerSquare { .. } => Distribution::LayerSquare { sigma },
            other => other,
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Distribution {
    type Err = String;

    /// Accepts the CSV names; the Gaussian families take an optional
    /// `:sigma` suffix (default 0.1).
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (name, sigma) = match s.split_once(':') {
            Some((n, v)) => (
                n,
                Some(
                    v.parse::<f64>()
                        .map_err(|e| format!("bad sigma in {s:?}: {e}"))?,
                ),
            ),
            None => (s, None),
        };
        let sigma = sigma.unwrap_or(0.1);
        match name {
            "uniform_disc" => Ok(Distribution::UniformDisc),
            "inverse_radial_disc" => Ok(Distribution::InverseRadialDisc),
            "normal_square" => Ok(Distribution::NormalSquare { sigma }),
            "layer_square" => Ok(Distribution::LayerSquare { sigma }),
            "uniform_square" => Ok(Distribution::UniformSquare),
            _ => Err(format!("unknown distribution {name:?}")),
        }
    }
}

/// `n` sources of equal strength `total_mass / n` drawn from `dist`.
pub fn generate(dist: Distribution, n: usize, total_mass: f64, seed: u64) -> Result<Vec<Source>> {
    if n == 0 {
        return Err(FmmError::InvalidCount);
    }
    if let Some(sigma) = dist.sigma() {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FmmError::InvalidSigma(sigma));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = total_mass / n as f64;
    let tau = std::f64::consts::TAU;
    let in_unit = |v: f64| (0.0..=1.0).contains(&v);
    let points = (0..n)
        .map(|_| {
            let (x, y) = match dist {
                Distribution::UniformDisc => {
                    let r = rng.gen::<f64>().sqrt();
                    let a = tau * rng.gen::<f64>();
                    (r * a.cos(), r * a.sin())
                }
                Distribution::InverseRadialDisc => {
                    let u: f64 = rng.gen();
                    let r = (INVERSE_RADIAL_FLOOR.ln() * (1.0 - u)).exp();
                    let a = tau * rng.gen::<f64>();
                    (r * a.cos(), r * a.sin())
                }
                Distribution::NormalSquare { sigma } => {
                    let normal = Normal::new(0.0, sigma).expect("sigma validated");
                    loop {
                        let x = normal.sample(&mut rng);
                        let y = normal.sample(&mut rng);
                        if in_unit(x) && in_unit(y) {
                            break (x, y);
                        }
                    }
                }
                Distribution::LayerSquare { sigma } => {
                    let normal = Normal::new(0.0, sigma).expect("sigma validated");
                    let x = rng.gen::<f64>();
                    let y = loop {
                        let y = normal.sample(&mut rng);
                        if in_unit(y) {
                            break y;
                        }
                    };
                    (x, y)
                }
                Distribution::UniformSquare => (rng.gen(), rng.gen()),
            };
            Source::new(x, y, m)
        })
        .collect();
    Ok(points)
}

/// `m` distinct indices out of `n`, sorted; all of them when `m >= n`.
pub fn sample_indices(n: usize, m: usize, seed: u64) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Direct sums `Σ_{j≠i} G(x_i, x_j)` at the given source indices, reported
/// the same way the evaluator reports them.
pub fn direct_at(sources: &[Source], indices: &[usize], kernel: Kernel) -> Result<Vec<Complex64>> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= sources.len()) {
        return Err(FmmError::SampleIndexOutOfRange(bad));
    }
    Ok(indices
        .par_iter()
        .map(|&i| {
            let z = sources[i].position;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, s) in sources.iter().enumerate() {
                if j != i {
                    acc += kernel.pair(z, s.position, s.strength);
                }
            }
            kernel.report(acc)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub sample_indices: Vec<usize>,
    pub max_rel: f64,
    pub rms_rel: f64,
    /// Relative error per sampled point (NaN where excluded).
    pub per_point: Vec<f64>,
    /// Sampled points with a zero reference value.
    pub excluded: usize,
}

/// Pointwise relative errors `|Φ_fmm(i) - Φ_dir(i)| / |Φ_dir(i)|` over a
/// sample. `fmm` holds all potentials; `direct` is parallel to `sample`.
pub fn measure_error(
    fmm: &[Complex64],
    direct: &[Complex64],
    sample: &[usize],
) -> Result<ErrorReport> {
    if direct.len() != sample.len() {
        return Err(FmmError::LengthMismatch(direct.len(), sample.len()));
    }
    let mut per_point = Vec::with_capacity(sample.len());
    let (mut max_rel, mut sum_sq, mut counted, mut excluded) = (0.0f64, 0.0, 0usize, 0usize);
    for (&i, &reference) in sample.iter().zip(direct) {
        let value = *fmm.get(i).ok_or(FmmError::SampleIndexOutOfRange(i))?;
        let denom = reference.norm();
        if denom == 0.0 {
            excluded += 1;
            per_point.push(f64::NAN);
            continue;
        }
        let rel = (value - reference).norm() / denom;
        max_rel = max_rel.max(rel);
        sum_sq += rel * rel;
        counted += 1;
        per_point.push(rel);
    }
    let rms_rel = if counted > 0 {
        (sum_sq / counted as f64).sqrt()
    } else {
        0.0
    };
    Ok(ErrorReport {
        sample_indices: sample.to_vec(),
        max_rel,
        rms_rel,
        per_point,
        excluded,
    })
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Runs `f` once to warm up, then `reps` times, and returns the median wall
/// time with the stats of that run.
pub fn time_median<F>(reps: usize, mut f: F) -> Result<(Duration, FieldStats)>
where
    F: FnMut() -> Result<FieldStats>,
{
    f()?;
    let mut runs = Vec::with_capacity(reps.max(1));
    for _ in 0..reps.max(1) {
        let clock = Instant::now();
        let stats = f()?;
        runs.push((clock.elapsed(), stats));
    }
    runs.sort_by_key(|r| r.0);
    Ok(runs.swap_remove(runs.len() / 2))
}

#[derive(Debug, Clone)]
pub struct ErrorStudy {
    pub n: usize,
    pub p_values: Vec<usize>,
    pub thetas: Vec<f64>,
    pub dists: Vec<Distribution>,
    /// Sample size for the direct reference.
    pub m: usize,
    pub seed: u64,
    pub base: FmmConfig,
}

impl Default for ErrorStudy {
    fn default() -> Self {
        Self {
            n: 10_000,
            p_values: (4..=20).step_by(2).collect(),
            thetas: vec![0.25, 0.5, 0.5f64.sqrt()],
            dists: vec![Distribution::UniformDisc, Distribution::InverseRadialDisc],
            m: 200,
            seed: 1,
            base: FmmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub dist: String,
    pub theta: f64,
    pub p: usize,
    pub max_rel: f64,
    pub rms_rel: f64,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

pub const ERROR_HEADER: &str = "dist,theta,p,max_rel,rms_rel,n,m,seed";

/// Relative error against sampled direct sums for every `(dist, θ, p)`.
pub fn experiment_error_study(study: &ErrorStudy) -> Result<Vec<ErrorRow>> {
    let mut rows = Vec::new();
    for dist in &study.dists {
        let sources = generate(*dist, study.n, 1.0, study.seed)?;
        let sample = sample_indices(study.n, study.m, study.seed.wrapping_add(1));
        let reference = direct_at(&sources, &sample, study.base.kernel)?;
        for &theta in &study.thetas {
            for &p in &study.p_values {
                let config = FmmConfig {
                    theta: Theta::new(theta)?,
                    p,
                    ..study.base
                };
                let result = evaluate(&sources, &config)?;
                let report = measure_error(&result.potentials, &reference, &sample)?;
                rows.push(ErrorRow {
                    dist: dist.name().to_string(),
                    theta,
                    p,
                    max_rel: report.max_rel,
                    rms_rel: report.rms_rel,
                    n: study.n,
                    m: sample.len(),
                    seed: study.seed,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct SpeedupStudy {
    pub n: usize,
    pub sigmas: Vec<f64>,
    pub dists: Vec<Distribution>,
    pub seed: u64,
    pub reps: usize,
    pub base: FmmConfig,
}

impl Default for SpeedupStudy {
    fn default() -> Self {
        Self {
            n: 200_000,
            sigmas: vec![1.0, 0.3, 0.1, 0.03, 0.01],
            dists: vec![
                Distribution::NormalSquare { sigma: 1.0 },
                Distribution::LayerSquare { sigma: 1.0 },
            ],
            seed: 1,
            reps: 5,
            base: FmmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub dist: String,
    pub sigma: f64,
    pub n: usize,
    pub t_adaptive_s: f64,
    pub t_uniform_s: f64,
    pub speedup: f64,
}

pub const SPEEDUP_HEADER: &str = "dist,sigma,n,t_adaptive_s,t_uniform_s,speedup";

/// Median-split vs midpoint-split timings on increasingly clustered data.
pub fn experiment_speedup(study: &SpeedupStudy) -> Result<Vec<SpeedupRow>> {
    let mut rows = Vec::new();
    for dist in &study.dists {
        for &sigma in &study.sigmas {
            let d = dist.with_sigma(sigma);
            let sources = generate(d, study.n, 1.0, study.seed)?;
            let time = |policy: SplitPolicy| {
                let config = FmmConfig {
                    split_policy: policy,
                    ..study.base
                };
                time_median(study.reps, || evaluate(&sources, &config).map(|r| r.stats))
                    .map(|(t, _)| t)
            };
            let adaptive = time(SplitPolicy::MedianAsymmetric)?.as_secs_f64();
            let uniform = time(SplitPolicy::MidpointUniform)?.as_secs_f64();
            rows.push(SpeedupRow {
                dist: d.name().to_string(),
                sigma,
                n: study.n,
                t_adaptive_s: adaptive,
                t_uniform_s: uniform,
                speedup: uniform / adaptive,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct ScalingStudy {
    pub n_list: Vec<usize>,
    pub dists: Vec<Distribution>,
    pub seed: u64,
    pub reps: usize,
    pub base: FmmConfig,
}

impl Default for ScalingStudy {
    fn default() -> Self {
        Self {
            n_list: vec![100_000, 200_000, 400_000],
            dists: vec![
                Distribution::UniformSquare,
                Distribution::NormalSquare { sigma: 0.1 },
                Distribution::LayerSquare { sigma: 0.1 },
            ],
            seed: 1,
            reps: 5,
            base: FmmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub dist: String,
    pub n: usize,
    pub t_total_s: f64,
    pub phases: PhaseTimings,
}

pub const SCALING_HEADER: &str =
    "dist,n,t_total_s,t_tree_s,t_connect_s,t_upward_s,t_m2l_s,t_downward_s,t_near_s";

/// Wall time against `N` for each distribution.
pub fn experiment_scaling(study: &ScalingStudy) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    for dist in &study.dists {
        for &n in &study.n_list {
            let sources = generate(*dist, n, 1.0, study.seed)?;
            let (t, stats) = time_median(study.reps, || {
                evaluate(&sources, &study.base).map(|r| r.stats)
            })?;
            rows.push(ScalingRow {
                dist: dist.name().to_string(),
                n,
                t_total_s: t.as_secs_f64(),
                phases: stats.timings,
            });
        }
    }
    Ok(rows)
}

pub fn write_error_csv<W: Write>(mut w: W, rows: &[ErrorRow]) -> io::Result<()> {
    writeln!(w, "{ERROR_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:e},{:e},{},{},{}",
            r.dist, r.theta, r.p, r.max_rel, r.rms_rel, r.n, r.m, r.seed
        )?;
    }
    Ok(())
}

pub fn write_speedup_csv<W: Write>(mut w: W, rows: &[SpeedupRow]) -> io::Result<()> {
    writeln!(w, "{SPEEDUP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.4}",
            r.dist, r.sigma, r.n, r.t_adaptive_s, r.t_uniform_s, r.speedup
        )?;
    }
    Ok(())
}

pub fn write_scaling_csv<W: Write>(mut w: W, rows: &[ScalingRow]) -> io::Result<()> {
    writeln!(w, "{SCALING_HEADER}")?;
    for r in rows {
        let ph = &r.phases;
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.dist,
            r.n,
            r.t_total_s,
            ph.tree.as_secs_f64(),
            ph.connect.as_secs_f64(),
            ph.upward.as_secs_f64(),
            ph.m2l.as_secs_f64(),
            ph.downward.as_secs_f64(),
            ph.near.as_secs_f64()
        )?;
    }
    Ok(())
}
