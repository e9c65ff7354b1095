//! Interaction kernels, the θ-criterion for well-separated discs and the
//! error-law predictor that goes with it.

use num_complex::Complex64;

use crate::error::{FmmError, Result};

/// A disc enclosing a cluster of points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Complex64,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Complex64, radius: f64) -> Self {
        debug_assert!(radius >= 0.0, "negative disc radius {radius}");
        Self { center, radius }
    }

    pub fn distance(&self, other: &Disc) -> f64 {
        (self.center - other.center).norm()
    }
}

/// Acceptance parameter of the θ-criterion, guaranteed to lie in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Theta(f64);

impl Theta {
    /// Validates `value`; values outside (0, 1) are rejected, never clamped.
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(FmmError::InvalidTheta(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Theta {
    fn default() -> Self {
        Self(0.5)
    }
}

/// Pairwise interaction kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `G(z, w) = -m / (z - w)`, the complex force field.
    #[default]
    InverseForce,
    /// `G(z, w) = m log(z - w)`; only the real part (the harmonic potential)
    /// is reported by the engine.
    LogPotential,
}

impl Kernel {
    /// Contribution of a source of strength `strength` at `source` to the
    /// field at `target`.
    #[inline]
    pub fn pair(self, target: Complex64, source: Complex64, strength: f64) -> Complex64 {
        match self {
            Kernel::InverseForce => -strength / (target - source),
            Kernel::LogPotential => strength * (target - source).ln(),
        }
    }

    /// Maps a raw accumulated value to the reported value. The log kernel
    /// keeps only the branch-independent real part.
    #[inline]
    pub fn report(self, value: Complex64) -> Complex64 {
        match self {
            Kernel::InverseForce => value,
            Kernel::LogPotential => Complex64::new(value.re, 0.0),
        }
    }

    /// Magnitude of the `n`-th complex derivative of `1 / (z - w)`, which is
    /// exactly `n! / |z - w|^(n + 1)`.
    pub fn derivative_magnitude(n: u32, z: Complex64, w: Complex64) -> f64 {
        let fact: f64 = (1..=n).map(f64::from).product();
        fact / (z - w).norm().powi(n as i32 + 1)
    }
}

/// The θ-criterion: `max(r_a, r_b) + θ min(r_a, r_b) <= θ d`.
#[inline]
pub fn well_separated(a: &Disc, b: &Disc, theta: Theta) -> bool {
    let (r, big_r) = if a.radius <= b.radius {
        (a.radius, b.radius)
    } else {
        (b.radius, a.radius)
    };
    big_r + theta.0 * r <= theta.0 * a.distance(b)
}

/// The θ-criterion with the roles of the small and large radius exchanged:
/// `min(r_a, r_b) + θ max(r_a, r_b) <= θ d`. Weaker than [`well_separated`]
/// whenever the radii differ.
#[inline]
pub fn exchanged_well_separated(a: &Disc, b: &Disc, theta: Theta) -> bool {
    let (r, big_r) = if a.radius <= b.radius {
        (a.radius, b.radius)
    } else {
        (b.radius, a.radius)
    };
    r + theta.0 * big_r <= theta.0 * a.distance(b)
}

/// Ratios appearing in the consequences of the θ-criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationRatios {
    /// `r / (d - R)`
    pub ratio_small: f64,
    /// `R / (d - r)`
    pub ratio_large: f64,
    /// `(d + r + R) / (d - R)`
    pub ratio_sum: f64,
}

/// Computes `r/(d-R)`, `R/(d-r)` and `(d+r+R)/(d-R)` for two discs.
///
/// For well-separated discs the first two are bounded by θ and the last by
/// `2 / (1 - θ)`.
pub fn separation_ratios(a: &Disc, b: &Disc) -> Result<SeparationRatios> {
    let d = a.distance(b);
    let r = a.radius.min(b.radius);
    let big_r = a.radius.max(b.radius);
    if d <= big_r {
        return Err(FmmError::SeparationDomain {
            distance: d,
            radius: big_r,
        });
    }
    Ok(SeparationRatios {
        ratio_small: r / (d - big_r),
        ratio_large: big_r / (d - r),
        ratio_sum: (d + r + big_r) / (d - big_r),
    })
}

/// Shape of the relative error bound, `θ^(p+1) / (1-θ)^2`, with the
/// kernel-dependent constant normalized to one.
pub fn predicted_error_bound(theta: Theta, p: usize) -> f64 {
    let t = theta.0;
    t.powi(p as i32 + 1) / ((1.0 - t) * (1.0 - t))
}

/// Work model `θ^-2 log^-2 θ` for a fixed tolerance, up to constants.
pub fn complexity_objective(theta: f64) -> f64 {
    let l = theta.ln();
    1.0 / (theta * theta * l * l)
}

/// Minimizer of [`complexity_objective`] on (0, 1): `exp(-1)`.
pub fn optimal_theta() -> f64 {
    (-1.0f64).exp()
}
