//! Truncated complex expansions and their translation operators.
//!
//! Outgoing expansions about `c` with scale `ρ` represent
//!
//! ```text
//! Q log(z - c) + Σ_{i<p} â_i (ρ / (z - c))^(i+1)
//! ```
//!
//! and incoming expansions represent `Σ_{l<p} ĉ_l ((z - c) / ρ)^l`. The
//! stored coefficients are non-dimensional, so a box of any size yields
//! coefficients of order one. `Q` is nonzero only for the log kernel.
//!
//! The slice-level functions accumulate into caller-owned buffers and are
//! what the evaluator uses; [`Expansion`] wraps them for standalone use.

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{FmmError, Result};
use crate::kernel::Kernel;
use crate::tree::Source;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) type Buf = SmallVec<[Complex64; 64]>;

/// Pascal triangle `binom(n, k)` for `n <= max` in `f64`.
#[derive(Debug, Clone)]
pub struct Binomials {
    max: usize,
    table: Vec<f64>,
}

impl Binomials {
    pub fn new(max: usize) -> Self {
        let w = max + 1;
        let mut table = vec![0.0; w * w];
        for n in 0..w {
            table[n * w] = 1.0;
            for k in 1..=n {
                table[n * w + k] = table[(n - 1) * w + k - 1] + table[(n - 1) * w + k];
            }
        }
        Self { max, table }
    }

    #[inline]
    pub fn get(&self, n: usize, k: usize) -> f64 {
        debug_assert!(n <= self.max && k <= n);
        self.table[n * (self.max + 1) + k]
    }

    pub fn max(&self) -> usize {
        self.max
    }
}

/// Accumulates the outgoing expansion of `sources` about `center` into
/// `coeffs` and returns the log strength `Q` to add.
pub fn p2m_into(
    kernel: Kernel,
    sources: &[Source],
    center: Complex64,
    scale: f64,
    coeffs: &mut [Complex64],
) -> f64 {
    let inv = 1.0 / scale;
    match kernel {
        Kernel::InverseForce => {
            for s in sources {
                let rel = (s.position - center) * inv;
                let mut term = Complex64::new(-s.strength * inv, 0.0);
                for a in coeffs.iter_mut() {
                    *a += term;
                    term *= rel;
                }
            }
            0.0
        }
        Kernel::LogPotential => {
            let mut q = 0.0;
            for s in sources {
                q += s.strength;
                let rel = (s.position - center) * inv;
                let mut pw = rel * -s.strength;
                for (i, a) in coeffs.iter_mut().enumerate() {
                    *a += pw / (i + 1) as f64;
                    pw *= rel;
                }
            }
            q
        }
    }
}

/// Shifts an outgoing expansion to a new center, accumulating into `dst`.
/// Exact: the result equals the expansion built directly about the new
/// center, up to rounding.
#[allow(clippy::too_many_arguments)]
pub fn m2m_acc(
    src: &[Complex64],
    q: f64,
    src_center: Complex64,
    src_scale: f64,
    dst: &mut [Complex64],
    dst_center: Complex64,
    dst_scale: f64,
    binom: &Binomials,
) {
    let p = dst.len();
    let shift = (src_center - dst_center) / dst_scale;
    let ratio = src_scale / dst_scale;

    let mut scaled: Buf = SmallVec::with_capacity(src.len());
    let mut rp = ratio;
    for a in src {
        scaled.push(a * rp);
        rp *= ratio;
    }
    let mut powers: Buf = SmallVec::with_capacity(p + 1);
    powers.push(ONE);
    for k in 1..=p {
        let prev = powers[k - 1];
        powers.push(prev * shift);
    }
    for (j, d) in dst.iter_mut().enumerate() {
        let mut acc = ZERO;
        for (i, s) in scaled.iter().enumerate().take(j + 1) {
            acc += s * (powers[j - i] * binom.get(j, i));
        }
        if q != 0.0 {
            acc -= powers[j + 1] * (q / (j + 1) as f64);
        }
        *d += acc;
    }
}

/// Converts an outgoing expansion into an incoming expansion about
/// `dst_center`, accumulating into `dst`. This is the only translation that
/// truncates.
#[allow(clippy::too_many_arguments)]
pub fn m2l_acc(
    src: &[Complex64],
    q: f64,
    src_center: Complex64,
    src_scale: f64,
    dst: &mut [Complex64],
    dst_center: Complex64,
    dst_scale: f64,
    binom: &Binomials,
) {
    let dist = dst_center - src_center;
    let inv_d = dist.inv();
    let u_src = inv_d * src_scale;
    let u_dst = -inv_d * dst_scale;

    let mut alpha: Buf = SmallVec::with_capacity(src.len());
    let mut pw = u_src;
    for a in src {
        alpha.push(a * pw);
        pw *= u_src;
    }

    // ĉ_l += (-ρ2/D)^l Σ_i binom(i+l, i) â_i (ρ1/D)^(i+1)
    let mut beta = ONE;
    for (l, c) in dst.iter_mut().enumerate() {
        let mut acc = ZERO;
        for (i, a) in alpha.iter().enumerate() {
            acc += a * binom.get(i + l, i);
        }
        if q != 0.0 {
            if l == 0 {
                acc += dist.ln() * q;
            } else {
                acc -= q / l as f64;
            }
        }
        *c += acc * beta;
        beta *= u_dst;
    }
}

/// Recenters an incoming expansion, accumulating into `dst`. Exact.
pub fn l2l_acc(
    src: &[Complex64],
    src_center: Complex64,
    src_scale: f64,
    dst: &mut [Complex64],
    dst_center: Complex64,
    dst_scale: f64,
) {
    let n = src.len();
    if n == 0 {
        return;
    }
    let shift = (dst_center - src_center) / src_scale;
    let mut a: Buf = SmallVec::from_slice(src);
    // Taylor shift by repeated synthetic division
    if shift != ZERO {
        for i in 0..n - 1 {
            for j in (i..n - 1).rev() {
                let next = a[j + 1];
                a[j] += shift * next;
            }
        }
    }
    let ratio = dst_scale / src_scale;
    let mut rp = 1.0;
    for (d, v) in dst.iter_mut().zip(a.iter()) {
        *d += v * rp;
        rp *= ratio;
    }
}

/// Evaluates an incoming expansion at `z` (Horner).
#[inline]
pub fn l2p(coeffs: &[Complex64], center: Complex64, scale: f64, z: Complex64) -> Complex64 {
    let s = (z - center) / scale;
    coeffs.iter().rev().fold(ZERO, |acc, c| acc * s + c)
}

/// Evaluates an outgoing expansion at `z`.
#[inline]
pub fn m2p(coeffs: &[Complex64], q: f64, center: Complex64, scale: f64, z: Complex64) -> Complex64 {
    let rel = z - center;
    let u = rel.inv() * scale;
    let series = coeffs.iter().rev().fold(ZERO, |acc, a| (acc + a) * u);
    if q != 0.0 {
        series + rel.ln() * q
    } else {
        series
    }
}

/// Accumulates the Taylor expansion about `center` of the field of
/// `sources` into `coeffs`.
pub fn p2l_acc(
    kernel: Kernel,
    sources: &[Source],
    center: Complex64,
    scale: f64,
    coeffs: &mut [Complex64],
) {
    for s in sources {
        let rel = s.position - center;
        let inv = rel.inv();
        let u = inv * scale;
        match kernel {
            Kernel::InverseForce => {
                let mut term = inv * s.strength;
                for c in coeffs.iter_mut() {
                    *c += term;
                    term *= u;
                }
            }
            Kernel::LogPotential => {
                // log(z - w) = log(c - w) - Σ_l (t / (w - c))^l / l
                let mut pw = u;
                for (l, c) in coeffs.iter_mut().enumerate() {
                    if l == 0 {
                        *c += (-rel).ln() * s.strength;
                    } else {
                        *c -= pw * (s.strength / l as f64);
                        pw *= u;
                    }
                }
            }
        }
    }
}

/// Direct pairwise sum, accumulating `Σ_j G(z_i, z_j)` into `out[i]`.
///
/// When `same_box` is set, `targets` and `sources` are the same slice and
/// the `j == i` term is skipped by index. Distinct sources at identical
/// positions produce non-finite values.
pub fn p2p(
    targets: &[Source],
    sources: &[Source],
    same_box: bool,
    kernel: Kernel,
    out: &mut [Complex64],
) {
    debug_assert_eq!(targets.len(), out.len());
    for (i, (t, o)) in targets.iter().zip(out.iter_mut()).enumerate() {
        let mut acc = ZERO;
        for (j, s) in sources.iter().enumerate() {
            if same_box && i == j {
                continue;
            }
            acc += kernel.pair(t.position, s.position, s.strength);
        }
        *o += acc;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionKind {
    /// Multipole (far-field) expansion about a source cluster.
    Outgoing,
    /// Local (near-field) polynomial valid inside a target cluster.
    Incoming,
}

/// A standalone truncated expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub kind: ExpansionKind,
    pub kernel: Kernel,
    pub center: Complex64,
    /// Length used to non-dimensionalize the coefficients.
    pub scale: f64,
    /// For outgoing expansions, radius of the disc holding the sources.
    pub radius: f64,
    /// Log strength `Q` (log kernel, outgoing only).
    pub log_strength: f64,
    coeffs: Vec<Complex64>,
}

impl Expansion {
    pub fn zero(
        kind: ExpansionKind,
        kernel: Kernel,
        center: Complex64,
        scale: f64,
        p: usize,
    ) -> Self {
        Self {
            kind,
            kernel,
            center,
            scale,
            radius: 0.0,
            log_strength: 0.0,
            coeffs: vec![ZERO; p],
        }
    }

    /// Outgoing expansion of `sources` about `center`.
    pub fn p2m(sources: &[Source], center: Complex64, p: usize, kernel: Kernel) -> Result<Self> {
        if p == 0 {
            return Err(FmmError::InvalidOrder(p));
        }
        let radius = sources
            .iter()
            .map(|s| (s.position - center).norm())
            .fold(0.0, f64::max);
        let scale = if radius > 0.0 { radius } else { 1.0 };
        let mut e = Self::zero(ExpansionKind::Outgoing, kernel, center, scale, p);
        e.radius = radius;
        e.log_strength = p2m_into(kernel, sources, center, scale, &mut e.coeffs);
        Ok(e)
    }

    /// Incoming expansion about `center` of the field of `sources`.
    pub fn p2l(sources: &[Source], center: Complex64, p: usize, kernel: Kernel) -> Result<Self> {
        if p == 0 {
            return Err(FmmError::InvalidOrder(p));
        }
        if sources.iter().any(|s| s.position == center) {
            return Err(FmmError::CoincidentCenters);
        }
        let scale = sources
            .iter()
            .map(|s| (s.position - center).norm())
            .fold(f64::INFINITY, f64::min);
        let scale = if scale.is_finite() { scale } else { 1.0 };
        let mut e = Self::zero(ExpansionKind::Incoming, kernel, center, scale, p);
        p2l_acc(kernel, sources, center, scale, &mut e.coeffs);
        Ok(e)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Scaled coefficients as stored.
    pub fn scaled_coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient `k` in physical units: the multiplier of
    /// `(z - c)^-(k+1)` (outgoing) or `(z - c)^k` (incoming).
    pub fn coefficient(&self, k: usize) -> Complex64 {
        match self.kind {
            ExpansionKind::Outgoing => self.coeffs[k] * self.scale.powi(k as i32 + 1),
            ExpansionKind::Incoming => self.coeffs[k] / self.scale.powi(k as i32),
        }
    }

    fn expect(&self, kind: ExpansionKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(FmmError::KindMismatch)
        }
    }

    /// Outgoing expansion about `new_center` with the same order.
    pub fn m2m(&self, new_center: Complex64) -> Result<Self> {
        self.expect(ExpansionKind::Outgoing)?;
        let radius = self.radius + (self.center - new_center).norm();
        let scale = if radius > 0.0 { radius } else { self.scale };
        let mut e = Self::zero(
            ExpansionKind::Outgoing,
            self.kernel,
            new_center,
            scale,
            self.order(),
        );
        e.radius = radius;
        e.log_strength = self.log_strength;
        let binom = Binomials::new(self.order());
        m2m_acc(
            &self.coeffs,
            self.log_strength,
            self.center,
            self.scale,
            &mut e.coeffs,
            new_center,
            scale,
            &binom,
        );
        Ok(e)
    }

    /// Incoming expansion of order `p` about `local_center`.
    pub fn m2l(&self, local_center: Complex64, p: usize) -> Result<Self> {
        self.expect(ExpansionKind::Outgoing)?;
        if p == 0 {
            return Err(FmmError::InvalidOrder(p));
        }
        if local_center == self.center {
            return Err(FmmError::CoincidentCenters);
        }
        let mut e = Self::zero(
            ExpansionKind::Incoming,
            self.kernel,
            local_center,
            self.scale,
            p,
        );
        let binom = Binomials::new(self.order() + p);
        m2l_acc(
            &self.coeffs,
            self.log_strength,
            self.center,
            self.scale,
            &mut e.coeffs,
            local_center,
            e.scale,
            &binom,
        );
        Ok(e)
    }

    pub fn l2l(&self, new_center: Complex64) -> Result<Self> {
        self.expect(ExpansionKind::Incoming)?;
        let mut e = Self::zero(
            ExpansionKind::Incoming,
            self.kernel,
            new_center,
            self.scale,
            self.order(),
        );
        l2l_acc(
            &self.coeffs,
            self.center,
            self.scale,
            &mut e.coeffs,
            new_center,
            self.scale,
        );
        Ok(e)
    }

    /// Evaluates the expansion at `z`. Outgoing expansions must be evaluated
    /// outside their source disc.
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        match self.kind {
            ExpansionKind::Incoming => self.l2p(z),
            ExpansionKind::Outgoing => self.m2p(z),
        }
    }

    pub fn l2p(&self, z: Complex64) -> Complex64 {
        debug_assert_eq!(self.kind, ExpansionKind::Incoming);
        l2p(&self.coeffs, self.center, self.scale, z)
    }

    pub fn m2p(&self, z: Complex64) -> Complex64 {
        debug_assert_eq!(self.kind, ExpansionKind::Outgoing);
        debug_assert!(
            (z - self.center).norm() > self.radius,
            "evaluation point inside the expansion disc"
        );
        m2p(&self.coeffs, self.log_strength, self.center, self.scale, z)
    }

    /// In-place sum with an expansion of the same kind, kernel, center and scale.
    pub fn add_assign(&mut self, other: &Expansion) -> Result<()> {
        if self.kind != other.kind || self.kernel != other.kernel {
            return Err(FmmError::KindMismatch);
        }
        if self.order() != other.order() {
            return Err(FmmError::OrderMismatch {
                left: self.order(),
                right: other.order(),
            });
        }
        if self.center != other.center || self.scale != other.scale {
            return Err(FmmError::KindMismatch);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        self.log_strength += other.log_strength;
        self.radius = self.radius.max(other.radius);
        Ok(())
    }
}
