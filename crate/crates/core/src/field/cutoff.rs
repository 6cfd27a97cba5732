//! Smooth radial cut-off functions and their derivatives.
//!
//! The transition profile is the standard `C^∞` smoothstep built from
//! `B(s) = exp(-1/s)`: `S(s) = B(s) / (B(s) + B(1-s))`, which is 0 for
//! `s ≤ 0`, 1 for `s ≥ 1` and strictly monotone in between. All cut-offs
//! here are radial, so gradient and Laplacian come from the 1D profile.

use super::{Grid, ScalarField, VectorField};
use crate::error::{Error, Result};

fn bump_b(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// Smoothstep value and first two derivatives at `s`.
///
/// Outside a small guard band around `[0, 1]` the exponentials underflow;
/// values there are clamped to the exact limits with zero derivatives.
pub fn smoothstep(s: f64) -> (f64, f64, f64) {
    const GUARD: f64 = 0.015;
    if s <= GUARD {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 - GUARD {
        return (1.0, 0.0, 0.0);
    }
    let a = bump_b(s);
    let b = bump_b(1.0 - s);
    let ap = a / (s * s);
    let bp = b / ((1.0 - s) * (1.0 - s)); // B'(1-s)
    let app = a * (1.0 - 2.0 * s) / s.powi(4);
    let bpp = b * (1.0 - 2.0 * (1.0 - s)) / (1.0 - s).powi(4); // B''(1-s)
    let d = a + b;
    let nval = a / d;
    let num = ap * b + a * bp;
    let sp = num / (d * d);
    let nump = app * b - a * bpp;
    let dprime = ap - bp;
    let spp = (nump * d - 2.0 * num * dprime) / (d * d * d);
    (nval, sp, spp)
}

/// Radial cut-off equal to 1 for `|x| ≤ r_inner`, 0 for `|x| ≥ r_outer`.
#[derive(Debug, Clone, Copy)]
pub struct RadialCutoff {
    pub r_inner: f64,
    pub r_outer: f64,
}

impl RadialCutoff {
    pub fn new(r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(r_outer > r_inner && r_inner >= 0.0) {
            return Err(Error::invalid(format!(
                "cutoff radii must satisfy 0 <= r_inner < r_outer, got {r_inner}, {r_outer}"
            )));
        }
        Ok(RadialCutoff { r_inner, r_outer })
    }

    /// Profile value at radius `r`.
    pub fn value(&self, r: f64) -> f64 {
        let w = self.r_outer - self.r_inner;
        1.0 - smoothstep((r - self.r_inner) / w).0
    }

    /// Radial derivative `φ'(r)`.
    pub fn dvalue(&self, r: f64) -> f64 {
        let w = self.r_outer - self.r_inner;
        -smoothstep((r - self.r_inner) / w).1 / w
    }

    /// Second radial derivative `φ''(r)`.
    pub fn ddvalue(&self, r: f64) -> f64 {
        let w = self.r_outer - self.r_inner;
        -smoothstep((r - self.r_inner) / w).2 / (w * w)
    }

    /// Value at a point.
    pub fn at(&self, p: [f64; 3]) -> f64 {
        self.value((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
    }

    /// Gradient at a point (radial direction times `φ'`).
    pub fn grad_at(&self, p: [f64; 3]) -> [f64; 3] {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r < 1e-14 {
            return [0.0; 3];
        }
        let d = self.dvalue(r) / r;
        [p[0] * d, p[1] * d, p[2] * d]
    }

    /// Laplacian at a point: `φ'' + 2 φ'/r`.
    pub fn laplacian_at(&self, p: [f64; 3]) -> f64 {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r < 1e-14 {
            return 0.0;
        }
        self.ddvalue(r) + 2.0 * self.dvalue(r) / r
    }
}

/// Cut-off family `φ_R(x) = ζ(|x|/R)` with a fixed profile `ζ` that is 1 on
/// `[0, 1]` and 0 on `[2, ∞)`.
#[derive(Debug, Clone, Copy)]
pub struct CutoffSpec {
    /// Smallest admissible radius (covers the obstacle).
    pub r0: f64,
}

/// Sampled cut-off with its gradient and Laplacian.
pub struct CutoffField {
    pub phi: ScalarField,
    pub grad: VectorField,
    pub laplacian: ScalarField,
    pub cutoff: RadialCutoff,
}

impl CutoffSpec {
    pub fn new(r0: f64) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::invalid("cutoff R0 must be positive and finite"));
        }
        Ok(CutoffSpec { r0 })
    }

    /// Profile `ζ(ρ)`: 1 on `[0,1]`, 0 on `[2,∞)`, monotone `C^∞`.
    pub fn zeta(&self, rho: f64) -> f64 {
        1.0 - smoothstep(rho - 1.0).0
    }

    /// Samples `φ_R = ζ(|x|/R)` with gradient and Laplacian on `grid`.
    ///
    /// Requires `R ≥ R0` and support `2R` strictly inside the half-box.
    pub fn cutoff_field(&self, r: f64, grid: Grid) -> Result<CutoffField> {
        if r < self.r0 {
            return Err(Error::invalid(format!("cutoff radius {r} below R0 = {}", self.r0)));
        }
        sample_cutoff(RadialCutoff::new(r, 2.0 * r)?, grid)
    }
}

/// Samples an arbitrary radial cut-off (value, gradient, Laplacian).
///
/// The support must fit strictly inside the half-box so the sampled field is
/// smooth and periodic.
pub fn sample_cutoff(cut: RadialCutoff, grid: Grid) -> Result<CutoffField> {
    if 2.0 * cut.r_outer >= grid.len {
        return Err(Error::invalid(format!(
            "cutoff support (outer radius {}) exceeds half-box {}",
            cut.r_outer,
            grid.len / 2.0
        )));
    }
    let phi = ScalarField::from_fn(grid, |p| cut.at(p));
    let grad = VectorField::from_fn(grid, |p| cut.grad_at(p));
    let laplacian = ScalarField::from_fn(grid, |p| cut.laplacian_at(p));
    Ok(CutoffField {
        phi,
        grad,
        laplacian,
        cutoff: cut,
    })
}

/// Smooth taper `ρ(|x|)` equal to 1 inside `radius` and 0 beyond
/// `radius + width`, used to switch off the rigid drift near the box faces.
pub fn taper_profile(radius: f64, width: f64) -> Result<RadialCutoff> {
    RadialCutoff::new(radius, radius + width)
}
