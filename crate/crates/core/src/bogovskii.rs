//! Right inverse of the divergence on the annulus `R0 < |x| < 3 R0`, with
//! zero boundary values.
//!
//! The classical integral formula
//!
//! ```text
//! w(x) = ∫ f(y) (x-y)/|x-y|³ [ ∫_{|x-y|}^∞ θ(y + r (x-y)/|x-y|) r² dr ] dy
//! ```
//!
//! produces `div w = f` (for zero-mean `f`) with support contained in the
//! union of segments from `supp f` to `supp θ`. On a domain star-shaped
//! with respect to the ball carrying `θ` those segments stay inside; an
//! annulus is not star-shaped with respect to any ball, so a single bump
//! leaks an O(1) part of `w` into the inner hole. The operator therefore
//! splits `f` over angular caps, each star-shaped with respect to its own
//! weight ball, and restores the per-piece zero-mean condition by moving
//! mass along a spanning tree of transfer bumps in cap overlaps.
//!
//! Fourteen caps (six axes and eight diagonals, support radius ≈ 41°) are
//! used rather than the minimal six: wider caps admit weight balls of
//! radius `0.6 R0`, and the kernel's weight sinks must be resolved by the
//! grid for `div w = f` to hold discretely — sharp bumps have `1/volume`
//! amplitude and dominate the quadrature error.
//!
//! The kernel is applied matrix-free with an early ray/ball rejection; an
//! optional dense assembly (cached on disk) serves small grids.

use rayon::prelude::*;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::cutoff::smoothstep;
use crate::field::spectral::SpectralBox;
use crate::field::{Grid, ScalarField, VectorField};
use crate::util::pairwise_sum;

/// Cap support edge: a point belongs to cap `α` iff `x̂·ê_α > EDGE_COS`.
const EDGE_COS: f64 = 0.77;
/// Partition weights saturate at `x̂·ê_α ≥ EDGE_COS + EDGE_WIDTH`.
const EDGE_WIDTH: f64 = 0.2;
/// Weight wedges: angular support half-width (degrees) and flat core.
const CAP_ANGLE_EDGE: f64 = 22.0;
const CAP_ANGLE_FLAT: f64 = 10.0;
/// Weight wedges: radial profile knots in units of `R0` (no flat core; the
/// transitions must stay several cells wide or the weight's response is
/// unresolved and `div w = f` degrades).
const CAP_R: [f64; 4] = [2.2, 2.625, 2.625, 2.95];
/// Transfer wedges: narrower cones in the cap overlaps.
const TRANSFER_ANGLE_EDGE: f64 = 12.0;
const TRANSFER_ANGLE_FLAT: f64 = 4.0;
const TRANSFER_R: [f64; 4] = [2.25, 2.57, 2.57, 2.9];

const NUM_CAPS: usize = 14;
const NUM_EDGES: usize = 13;

/// 10-point Gauss-Legendre nodes/weights on [-1, 1].
const GL_NODES: [f64; 10] = [
    -0.973906528517172,
    -0.865063366688985,
    -0.679409568299024,
    -0.433395394129247,
    -0.148874338981631,
    0.148874338981631,
    0.433395394129247,
    0.679409568299024,
    0.865063366688985,
    0.973906528517172,
];
const GL_WEIGHTS: [f64; 10] = [
    0.066671344308688,
    0.149451349150581,
    0.219086362515982,
    0.269266719309996,
    0.295524224714753,
    0.295524224714753,
    0.269266719309996,
    0.219086362515982,
    0.149451349150581,
    0.066671344308688,
];

/// Cap directions: axes first, then diagonals indexed by sign bits.
fn cap_directions() -> [[f64; 3]; NUM_CAPS] {
    let mut dirs = [[0.0; 3]; NUM_CAPS];
    dirs[0] = [1.0, 0.0, 0.0];
    dirs[1] = [0.0, 1.0, 0.0];
    dirs[2] = [0.0, 0.0, 1.0];
    dirs[3] = [-1.0, 0.0, 0.0];
    dirs[4] = [0.0, -1.0, 0.0];
    dirs[5] = [0.0, 0.0, -1.0];
    let s = 1.0 / 3.0f64.sqrt();
    for bits in 0..8usize {
        let sx = if bits & 4 == 0 { s } else { -s };
        let sy = if bits & 2 == 0 { s } else { -s };
        let sz = if bits & 1 == 0 { s } else { -s };
        dirs[6 + bits] = [sx, sy, sz];
    }
    dirs
}

/// Spanning tree `(parent, child)` over the caps; every non-root cap
/// appears exactly once as a child, and every edge joins an axis cap to an
/// adjacent diagonal cap (separation `arccos(1/√3)`).
const TREE_EDGES: [(usize, usize); NUM_EDGES] = [
    (0, 6),  // +x — (+,+,+)
    (0, 8),  // +x — (+,-,+)
    (0, 7),  // +x — (+,+,-)
    (0, 9),  // +x — (+,-,-)
    (6, 1),  // (+,+,+) — +y
    (6, 2),  // (+,+,+) — +z
    (8, 4),  // (+,-,+) — -y
    (7, 5),  // (+,+,-) — -z
    (1, 10), // +y — (-,+,+)
    (1, 11), // +y — (-,+,-)
    (10, 3), // (-,+,+) — -x
    (4, 12), // -y — (-,-,+)
    (5, 13), // -z — (-,-,-)
];

/// Smooth weight supported on a wedge: a radial bump times an angular cap
/// profile around `axis`, normalized to unit integral.
///
/// Wide flat weights matter: the kernel routes the transported mass through
/// the weight's support, so a small concentrated weight produces `w`
/// structures of amplitude `1/volume` that the quadrature and the grid
/// must resolve. The wedge keeps the response at the amplitude of the data.
#[derive(Debug, Clone, Copy)]
pub struct Weight {
    pub axis: [f64; 3],
    /// Angular profile: 0 outside `m_edge`, 1 inside `m_flat` (cosines).
    m_edge: f64,
    m_flat: f64,
    /// Radial profile knots: zero, flat start, flat end, zero.
    r: [f64; 4],
    amp: f64,
}

impl Weight {
    fn profile_ang(&self, m: f64) -> f64 {
        smoothstep((m - self.m_edge) / (self.m_flat - self.m_edge)).0
    }

    fn profile_rad(&self, r: f64) -> f64 {
        let rise = smoothstep((r - self.r[0]) / (self.r[1] - self.r[0])).0;
        let fall = 1.0 - smoothstep((r - self.r[2]) / (self.r[3] - self.r[2])).0;
        rise * fall
    }

    fn new(axis: [f64; 3], ang_edge_deg: f64, ang_flat_deg: f64, r: [f64; 4]) -> Self {
        let mut w = Weight {
            axis,
            m_edge: ang_edge_deg.to_radians().cos(),
            m_flat: ang_flat_deg.to_radians().cos(),
            r,
            amp: 1.0,
        };
        // Separable normalization: ∫θ = 2π ∫ A(m) dm · ∫ R(r) r² dr.
        let nq = 4000;
        let mut ang = 0.0;
        for i in 0..nq {
            let m = w.m_edge + (1.0 - w.m_edge) * (i as f64 + 0.5) / nq as f64;
            ang += w.profile_ang(m);
        }
        ang *= (1.0 - w.m_edge) / nq as f64;
        let mut rad = 0.0;
        for i in 0..nq {
            let rr = r[0] + (r[3] - r[0]) * (i as f64 + 0.5) / nq as f64;
            rad += w.profile_rad(rr) * rr * rr;
        }
        rad *= (r[3] - r[0]) / nq as f64;
        w.amp = 1.0 / (std::f64::consts::TAU * ang * rad);
        w
    }

    /// Full-sphere variant (radial bump only), used by validation tests.
    fn new_radial(r: [f64; 4]) -> Self {
        let mut w = Weight {
            axis: [0.0, 0.0, 1.0],
            m_edge: -1.0 - 1e-9,
            m_flat: -1.0 - 1e-10,
            r,
            amp: 1.0,
        };
        let nq = 4000;
        let mut rad = 0.0;
        for i in 0..nq {
            let rr = r[0] + (r[3] - r[0]) * (i as f64 + 0.5) / nq as f64;
            rad += w.profile_rad(rr) * rr * rr;
        }
        rad *= (r[3] - r[0]) / nq as f64;
        w.amp = 1.0 / (2.0 * std::f64::consts::TAU * rad);
        w
    }

    pub fn eval(&self, p: [f64; 3]) -> f64 {
        let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let r = r2.sqrt();
        if r < self.r[0] || r > self.r[3] || r < 1e-14 {
            return 0.0;
        }
        let m = (p[0] * self.axis[0] + p[1] * self.axis[1] + p[2] * self.axis[2]) / r;
        if m <= self.m_edge {
            return 0.0;
        }
        self.amp * self.profile_rad(r) * self.profile_ang(m)
    }

    /// Continuum integral (unit by construction, re-derived for checks).
    pub fn integral(&self) -> f64 {
        let nq = 8000;
        let lo = if self.m_edge < -1.0 { -1.0 } else { self.m_edge };
        let mut ang = 0.0;
        for i in 0..nq {
            let m = lo + (1.0 - lo) * (i as f64 + 0.5) / nq as f64;
            ang += self.profile_ang(m).min(1.0);
        }
        ang *= (1.0 - lo) / nq as f64;
        let mut rad = 0.0;
        for i in 0..nq {
            let rr = self.r[0] + (self.r[3] - self.r[0]) * (i as f64 + 0.5) / nq as f64;
            rad += self.profile_rad(rr) * rr * rr;
        }
        rad *= (self.r[3] - self.r[0]) / nq as f64;
        self.amp * std::f64::consts::TAU * ang * rad
    }

    /// Radial support bounds (for clearance checks).
    pub fn radial_support(&self) -> (f64, f64) {
        (self.r[0], self.r[3])
    }

    /// Bounding ball of the support, for cone-adapted direction grids.
    fn bounding_ball(&self) -> ([f64; 3], f64) {
        if self.m_edge < -1.0 {
            return ([0.0; 3], self.r[3]);
        }
        let rm = 0.5 * (self.r[0] + self.r[3]);
        let c = [self.axis[0] * rm, self.axis[1] * rm, self.axis[2] * rm];
        let mut radius: f64 = 0.0;
        for &rr in &[self.r[0], self.r[3]] {
            // farthest support point at the angular edge
            let d2 = rr * rr + rm * rm - 2.0 * rr * rm * self.m_edge;
            radius = radius.max(d2.sqrt());
        }
        (c, radius * 1.02)
    }
}

/// Forward-ray intersections with the radial shell `r ∈ [lo, hi]` of a
/// weight: up to two `u`-intervals on `{x + u e, u ≥ 0}`.
#[inline]
fn shell_intervals(x: [f64; 3], e: [f64; 3], lo: f64, hi: f64) -> ([(f64, f64); 2], usize) {
    let xe = x[0] * e[0] + x[1] * e[1] + x[2] * e[2];
    let x2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let hit = |rad: f64| -> Option<(f64, f64)> {
        let disc = xe * xe + rad * rad - x2;
        if disc <= 0.0 {
            return None;
        }
        let h = disc.sqrt();
        Some((-xe - h, -xe + h))
    };
    let mut out = [(0.0, 0.0); 2];
    let mut count = 0;
    match hit(hi) {
        None => (out, 0),
        Some((o0, o1)) => {
            if o1 <= 0.0 {
                return (out, 0);
            }
            match hit(lo) {
                Some((i0, i1)) if i1 > 0.0 => {
                    if i0 > o0.max(0.0) {
                        out[count] = (o0.max(0.0), i0);
                        count += 1;
                    }
                    if o1 > i1.max(0.0) {
                        out[count] = (i1.max(0.0), o1);
                        count += 1;
                    }
                }
                _ => {
                    out[count] = (o0.max(0.0), o1);
                    count += 1;
                }
            }
            (out, count)
        }
    }
}

/// Moments `J_k = ∫ θ(x + u e) u^k du`, k = 0, 1, 2, over `u ≥ 0`.
#[inline]
fn ray_moments(x: [f64; 3], e: [f64; 3], theta: &Weight) -> [f64; 3] {
    let (lo, hi) = (theta.r[0], theta.r[3]);
    let (ivs, n) = shell_intervals(x, e, lo, hi);
    let mut m = [0.0f64; 3];
    for (a, b) in ivs.iter().take(n) {
        let mid = 0.5 * (a + b);
        let rad = 0.5 * (b - a);
        for (node, wgt) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let u = mid + rad * node;
            let p = [x[0] + u * e[0], x[1] + u * e[1], x[2] + u * e[2]];
            let tv = wgt * rad * theta.eval(p);
            if tv != 0.0 {
                m[0] += tv;
                m[1] += tv * u;
                m[2] += tv * u * u;
            }
        }
    }
    m
}

/// Periodic cubic B-spline interpolant with exact FFT prefilter.
///
/// C² smoothness matters here: the radial quadrature samples the source
/// between grid nodes, and any interpolation kinks turn into grid-frequency
/// noise in `w` that differentiation amplifies.
struct CubicInterp {
    grid: Grid,
    coef: Vec<f64>,
}

impl CubicInterp {
    fn build(sb: &SpectralBox, data: &[f64]) -> Self {
        let grid = sb.grid;
        let mut spec = sb.forward(data);
        let bhat = |m: i64, n: usize| -> f64 {
            (4.0 + 2.0 * (std::f64::consts::TAU * m as f64 / n as f64).cos()) / 6.0
        };
        let [nx, ny, _] = grid.n;
        for (idx, v) in spec.iter_mut().enumerate() {
            let i = idx % nx;
            let j = (idx / nx) % ny;
            let k = idx / (nx * ny);
            let sgn = |i: usize, n: usize| -> i64 {
                if i <= n / 2 {
                    i as i64
                } else {
                    i as i64 - n as i64
                }
            };
            let d = bhat(sgn(i, grid.n[0]), grid.n[0])
                * bhat(sgn(j, grid.n[1]), grid.n[1])
                * bhat(sgn(k, grid.n[2]), grid.n[2]);
            *v /= d;
        }
        CubicInterp {
            grid,
            coef: sb.inverse(&spec),
        }
    }

    #[inline]
    fn eval(&self, p: [f64; 3]) -> f64 {
        use crate::field::interp::bspline_weights;
        let grid = &self.grid;
        let mut w = [[0.0f64; 4]; 3];
        let mut base = [0i64; 3];
        for a in 0..3 {
            let u = (p[a] + 0.5 * grid.len) / grid.h(a);
            let b = u.floor();
            let mut wa = [0.0f64; 12];
            bspline_weights(3, u - b, &mut wa);
            w[a][..4].copy_from_slice(&wa[..4]);
            base[a] = (b as i64 - 1).rem_euclid(grid.n[a] as i64);
        }
        let nx = grid.n[0];
        let ny = grid.n[1];
        let (nxi, nyi, nzi) = (grid.n[0] as i64, grid.n[1] as i64, grid.n[2] as i64);
        let wrap = |v: i64, n: i64| if v >= n { v - n } else { v };
        let mut acc = 0.0;
        for dz in 0..4 {
            let kz = wrap(base[2] + dz as i64, nzi) as usize;
            let wz = w[2][dz];
            for dy in 0..4 {
                let ky = wrap(base[1] + dy as i64, nyi) as usize;
                let wyz = wz * w[1][dy];
                let row = nx * (ky + ny * kz);
                for dx in 0..4 {
                    let kx = wrap(base[0] + dx as i64, nxi) as usize;
                    acc += wyz * w[0][dx] * self.coef[kx + row];
                }
            }
        }
        acc
    }
}

/// How to treat a nonzero mean of the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanPolicy {
    /// Reject inputs whose integral exceeds the tolerance.
    Strict,
    /// Subtract the mean (as a multiple of the root cap's weight bump)
    /// before applying the operator; the caller opts in explicitly.
    Subtract,
}

pub struct BogovskiiOperator {
    pub grid: Grid,
    pub r0: f64,
    /// Relative tolerance on `∫f` in `Strict` mode.
    pub tol_mean: f64,
    dirs: [[f64; 3]; NUM_CAPS],
    thetas: [Weight; NUM_CAPS],
    transfers: [Weight; NUM_EDGES],
    /// Flat grid indices of annulus points (sources and targets).
    annulus: Vec<usize>,
    /// Per annulus point: active caps with partition weights.
    active: Vec<Vec<(u8, f64)>>,
    /// Full partition weights per annulus point (for mass functionals).
    chi: Vec<[f64; NUM_CAPS]>,
    /// Transfer responses `(K_parent - K_child) b_e` at annulus points.
    transfer_fields: Vec<[[f64; 3]; NUM_EDGES]>,
    quad: ConeQuad,
    assembled: Option<Assembled>,
}

/// Cone-adapted spherical quadrature.
///
/// In spherical coordinates around the target `x` the Bogovskii integral is
///
/// ```text
/// w(x) = ∫ dΩ ê ∫ dd [J₂ + 2 d J₁ + d² J₀](x, ê) g(x - d ê),
/// J_k(x, ê) = ∫_0^∞ θ(x + u ê) u^k du,
/// ```
///
/// with no singularity: the 1/d² kernel factor cancels against the volume
/// element, and the inner ray integral at distance `d` expands exactly in
/// the moments `J_k` along the ray from `x`. The direction integrand is
/// supported on the cone subtending the weight ball, so directions are
/// taken from a Gauss grid adapted to each cone; all quadrature nodes move
/// smoothly with `x`, which keeps the error low-frequency — a lattice pair
/// sum instead produces grid-coherent noise that spectral differentiation
/// amplifies to O(1).
struct ConeQuad {
    /// Gauss nodes/weights on [0, 1] (mapped onto cone polar extent).
    mu: Vec<(f64, f64)>,
    n_beta: usize,
    /// Gauss nodes/weights on [0, 1] for radial panels.
    radial: Vec<(f64, f64)>,
    /// Radial panel length in units of R0.
    panel: f64,
}

impl ConeQuad {
    fn build() -> Self {
        let unit = |nodes: &[f64], wts: &[f64]| -> Vec<(f64, f64)> {
            nodes
                .iter()
                .zip(wts)
                .map(|(n, w)| (0.5 * (n + 1.0), 0.5 * w))
                .collect()
        };
        // 6-point Gauss for polar and radial directions.
        let n6 = [
            -0.932469514203152,
            -0.661209386466265,
            -0.238619186083197,
            0.238619186083197,
            0.661209386466265,
            0.932469514203152,
        ];
        let w6 = [
            0.171324492379170,
            0.360761573048139,
            0.467913934572691,
            0.467913934572691,
            0.360761573048139,
            0.171324492379170,
        ];
        ConeQuad {
            mu: unit(&n6, &w6),
            n_beta: 10,
            radial: unit(&n6, &w6),
            panel: 1.2,
        }
    }
}


/// Orthonormal frame completing a unit vector.
#[inline]
fn frame_of(u: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let a = if u[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let mut p = [
        u[1] * a[2] - u[2] * a[1],
        u[2] * a[0] - u[0] * a[2],
        u[0] * a[1] - u[1] * a[0],
    ];
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    p = [p[0] / n, p[1] / n, p[2] / n];
    let q = [
        u[1] * p[2] - u[2] * p[1],
        u[2] * p[0] - u[0] * p[2],
        u[0] * p[1] - u[1] * p[0],
    ];
    (p, q)
}

/// Periodic trilinear interpolation of grid samples.
#[inline]
fn trilerp(data: &[f64], grid: &Grid, p: [f64; 3]) -> f64 {
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let u = (p[a] + 0.5 * grid.len) / grid.h(a);
        let b = u.floor();
        frac[a] = u - b;
        base[a] = (b as i64).rem_euclid(grid.n[a] as i64) as usize;
    }
    let nx = grid.n[0];
    let ny = grid.n[1];
    let mut acc = 0.0;
    for dz in 0..2 {
        let kz = (base[2] + dz) % grid.n[2];
        let wz = if dz == 0 { 1.0 - frac[2] } else { frac[2] };
        for dy in 0..2 {
            let ky = (base[1] + dy) % grid.n[1];
            let wy = if dy == 0 { 1.0 - frac[1] } else { frac[1] };
            for dx in 0..2 {
                let kx = (base[0] + dx) % grid.n[0];
                let wx = if dx == 0 { 1.0 - frac[0] } else { frac[0] };
                acc += wz * wy * wx * data[kx + nx * (ky + ny * kz)];
            }
        }
    }
    acc
}

struct Assembled {
    /// `columns[src][target][component]`: response to a unit sample.
    columns: Vec<Vec<[f64; 3]>>,
}

impl BogovskiiOperator {
    pub fn new(grid: Grid, r0: f64) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::invalid("annulus inner radius must be positive"));
        }
        if 2.0 * 3.0 * r0 > grid.len {
            return Err(Error::invalid("annulus does not fit inside the box"));
        }
        let dirs = cap_directions();
        let scale_r = |r: [f64; 4]| r.map(|v| v * r0);
        let thetas = dirs.map(|a| Weight::new(a, CAP_ANGLE_EDGE, CAP_ANGLE_FLAT, scale_r(CAP_R)));
        let transfers = TREE_EDGES.map(|(p, c)| {
            let a = dirs[p];
            let b = dirs[c];
            let m = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
            let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
            Weight::new(
                [m[0] / n, m[1] / n, m[2] / n],
                TRANSFER_ANGLE_EDGE,
                TRANSFER_ANGLE_FLAT,
                scale_r(TRANSFER_R),
            )
        });
        let mut annulus = Vec::new();
        for flat in 0..grid.num_points() {
            let p = grid.point(flat);
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if r >= r0 && r <= 3.0 * r0 {
                annulus.push(flat);
            }
        }
        let chi: Vec<[f64; NUM_CAPS]> = annulus
            .iter()
            .map(|&flat| {
                let p = grid.point(flat);
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let mut raw = [0.0; NUM_CAPS];
                for (a, axis) in dirs.iter().enumerate() {
                    let m = (p[0] * axis[0] + p[1] * axis[1] + p[2] * axis[2]) / r;
                    raw[a] = smoothstep((m - EDGE_COS) / EDGE_WIDTH).0;
                }
                let sum: f64 = raw.iter().sum();
                raw.map(|v| v / sum)
            })
            .collect();
        let active: Vec<Vec<(u8, f64)>> = chi
            .iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .filter(|(_, v)| **v > 0.0)
                    .map(|(a, v)| (a as u8, *v))
                    .collect()
            })
            .collect();
        let mut op = BogovskiiOperator {
            grid,
            r0,
            tol_mean: 1e-10,
            dirs,
            thetas,
            transfers,
            annulus,
            active,
            chi,
            transfer_fields: Vec::new(),
            quad: ConeQuad::build(),
            assembled: None,
        };
        op.transfer_fields = op.build_transfer_fields();
        Ok(op)
    }

    pub fn annulus_points(&self) -> usize {
        self.annulus.len()
    }

    pub fn num_caps(&self) -> usize {
        NUM_CAPS
    }

    pub fn theta(&self, cap: usize) -> &Weight {
        &self.thetas[cap]
    }

    pub fn cap_direction(&self, cap: usize) -> [f64; 3] {
        self.dirs[cap]
    }

    /// Support edge of the caps (cosine of the maximal source angle).
    pub fn edge_cos(&self) -> f64 {
        EDGE_COS
    }

    /// Distance of all weight/transfer supports to the annulus boundaries
    /// (positive means strictly inside).
    pub fn bump_clearance(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for b in self.thetas.iter().chain(self.transfers.iter()) {
            let (lo, hi) = b.radial_support();
            worst = worst.min(lo - self.r0);
            worst = worst.min(3.0 * self.r0 - hi);
        }
        worst
    }

    /// Cone integral of one weight for a target `x`: accumulates
    /// `∫ dΩ ê ∫ dd (J₂ + 2dJ₁ + d²J₀) g(x - d ê)`, with directions adapted
    /// to the cone subtending the weight's bounding ball from `x`. `g` is
    /// the source evaluated at a point; `radial_weight` optionally restricts
    /// the radial support to another weight's shell (for analytic wedge
    /// sources). All quadrature nodes move smoothly with `x`, so the error
    /// is low-frequency and survives spectral differentiation.
    fn cone_integral(
        &self,
        x: [f64; 3],
        theta: &Weight,
        g: &dyn Fn([f64; 3]) -> f64,
        radial_weight: Option<&Weight>,
        out: &mut [f64; 3],
    ) {
        let (bc, br) = theta.bounding_ball();
        let cvec = [bc[0] - x[0], bc[1] - x[1], bc[2] - x[2]];
        let dist = (cvec[0] * cvec[0] + cvec[1] * cvec[1] + cvec[2] * cvec[2]).sqrt();
        let r0 = self.r0;
        let inside = dist <= br * 1.02;
        let mu_min = if inside {
            -1.0
        } else {
            let sn = (br / dist).min(1.0);
            (1.0 - sn * sn).sqrt() * 0.999
        };
        let axis = if inside {
            [0.0, 0.0, 1.0]
        } else {
            [cvec[0] / dist, cvec[1] / dist, cvec[2] / dist]
        };
        let (pv, qv) = frame_of(axis);
        for (mn, mw) in &self.quad.mu {
            let mu = mu_min + (1.0 - mu_min) * mn;
            let wmu = mw * (1.0 - mu_min);
            let smu = (1.0 - mu * mu).max(0.0).sqrt();
            for ib in 0..self.quad.n_beta {
                let beta = std::f64::consts::TAU * (ib as f64 + 0.5) / self.quad.n_beta as f64;
                let wbeta = std::f64::consts::TAU / self.quad.n_beta as f64;
                let e = [
                    mu * axis[0] + smu * (beta.cos() * pv[0] + beta.sin() * qv[0]),
                    mu * axis[1] + smu * (beta.cos() * pv[1] + beta.sin() * qv[1]),
                    mu * axis[2] + smu * (beta.cos() * pv[2] + beta.sin() * qv[2]),
                ];
                let m = ray_moments(x, e, theta);
                if m[0] == 0.0 && m[1] == 0.0 && m[2] == 0.0 {
                    continue;
                }
                // Radial integration along y = x - d e (backward ray).
                let eb = [-e[0], -e[1], -e[2]];
                let mut along = 0.0;
                match radial_weight {
                    Some(bw) => {
                        let (lo, hi) = bw.radial_support();
                        let (ivs, cnt) = shell_intervals(x, eb, lo, hi);
                        for (a, b) in ivs.iter().take(cnt) {
                            let mid = 0.5 * (a + b);
                            let rad = 0.5 * (b - a);
                            for (node, wgt) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                                let d = mid + rad * node;
                                let y = [x[0] - d * e[0], x[1] - d * e[1], x[2] - d * e[2]];
                                let gv = g(y);
                                if gv != 0.0 {
                                    along += wgt
                                        * rad
                                        * (m[2] + 2.0 * d * m[1] + d * d * m[0])
                                        * gv;
                                }
                            }
                        }
                    }
                    None => {
                        // Annulus-supported source: panels up to the exit of
                        // the outer sphere along the backward ray.
                        let xe = x[0] * eb[0] + x[1] * eb[1] + x[2] * eb[2];
                        let disc = xe * xe + 9.0 * r0 * r0
                            - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
                        let d_exit = -xe + disc.max(0.0).sqrt();
                        if d_exit <= 0.0 {
                            continue;
                        }
                        let n_panels =
                            ((d_exit / (self.quad.panel * r0)).ceil() as usize).max(1);
                        let plen = d_exit / n_panels as f64;
                        for ip in 0..n_panels {
                            let base = ip as f64 * plen;
                            for (rn, rw) in &self.quad.radial {
                                let d = base + plen * rn;
                                let y = [x[0] - d * e[0], x[1] - d * e[1], x[2] - d * e[2]];
                                let gv = g(y);
                                if gv != 0.0 {
                                    along += rw
                                        * plen
                                        * (m[2] + 2.0 * d * m[1] + d * d * m[0])
                                        * gv;
                                }
                            }
                        }
                    }
                }
                let wtot = wmu * wbeta * along;
                out[0] += wtot * e[0];
                out[1] += wtot * e[1];
                out[2] += wtot * e[2];
            }
        }
    }

    /// `(K_parent - K_child) b_e` sampled on the annulus.
    fn build_transfer_fields(&self) -> Vec<[[f64; 3]; NUM_EDGES]> {
        let grid = self.grid;
        let mut per_edge: Vec<Vec<[f64; 3]>> = Vec::new();
        for (e, b) in self.transfers.iter().enumerate() {
            let (parent, child) = TREE_EDGES[e];
            let field: Vec<[f64; 3]> = self
                .annulus
                .par_iter()
                .map(|&tflat| {
                    let x = grid.point(tflat);
                    let geval = |p: [f64; 3]| b.eval(p);
                    let mut plus = [0.0f64; 3];
                    self.cone_integral(x, &self.thetas[parent], &geval, Some(b), &mut plus);
                    let mut minus = [0.0f64; 3];
                    self.cone_integral(x, &self.thetas[child], &geval, Some(b), &mut minus);
                    [plus[0] - minus[0], plus[1] - minus[1], plus[2] - minus[2]]
                })
                .collect();
            per_edge.push(field);
        }
        (0..self.annulus.len())
            .map(|i| {
                let mut row = [[0.0; 3]; NUM_EDGES];
                for (e, field) in per_edge.iter().enumerate() {
                    row[e] = field[i];
                }
                row
            })
            .collect()
    }

    fn check_support(&self, f: &ScalarField) -> Result<()> {
        self.grid.ensure_same(&f.grid)?;
        let peak = f.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return Ok(());
        }
        let guard = 1.05 * self.grid.h(0).max(self.grid.h(1)).max(self.grid.h(2));
        for flat in 0..self.grid.num_points() {
            let p = self.grid.point(flat);
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if (r < self.r0 - guard || r > 3.0 * self.r0 + guard)
                && f.data[flat].abs() > 1e-5 * peak
            {
                return Err(Error::compat(format!(
                    "input leaks outside the annulus at radius {r:.4} (value {:.3e})",
                    f.data[flat]
                )));
            }
        }
        Ok(())
    }

    /// Applies the operator. `div (out) = f` discretely for zero-mean `f`
    /// supported in the annulus; the output vanishes outside the annulus.
    pub fn apply(&self, f: &ScalarField, mean: MeanPolicy) -> Result<VectorField> {
        self.check_support(f)?;
        f.check_finite()?;
        let vol = self.grid.cell_volume();
        let integral = f.integral();
        let scale: f64 =
            pairwise_sum(0, self.annulus.len(), |i| f.data[self.annulus[i]].abs()) * vol;
        let mut fvals: Vec<f64> = self.annulus.iter().map(|&i| f.data[i]).collect();
        if integral.abs() > self.tol_mean * scale.max(1e-300) {
            match mean {
                MeanPolicy::Strict => {
                    return Err(Error::compat(format!(
                        "∫f = {integral:.6e} exceeds tolerance {:.1e} (relative to ∫|f| = {scale:.6e}); \
                         request mean subtraction explicitly if this is intended",
                        self.tol_mean
                    )));
                }
                MeanPolicy::Subtract => {
                    let b = &self.thetas[0];
                    for (i, &flat) in self.annulus.iter().enumerate() {
                        fvals[i] -= integral * b.eval(self.grid.point(flat));
                    }
                }
            }
        }
        Ok(self.apply_values(&fvals))
    }

    /// Subtree mass below each tree edge (coefficient of its transfer).
    fn edge_coefficients(&self, fvals: &[f64]) -> [f64; NUM_EDGES] {
        let vol = self.grid.cell_volume();
        let mut mass = [0.0f64; NUM_CAPS];
        for (a, m) in mass.iter_mut().enumerate() {
            *m = pairwise_sum(0, fvals.len(), |i| fvals[i] * self.chi[i][a]) * vol;
        }
        // Accumulate children into parents; TREE_EDGES is topologically
        // ordered (parents appear before their children's edges).
        let mut subtree = mass;
        let mut coeff = [0.0f64; NUM_EDGES];
        for (e, (parent, child)) in TREE_EDGES.iter().enumerate().rev() {
            coeff[e] = subtree[*child];
            subtree[*parent] += subtree[*child];
        }
        coeff
    }

    /// Core apply on annulus sample values (quadrature weights included).
    fn apply_values(&self, fvals: &[f64]) -> VectorField {
        if let Some(asm) = &self.assembled {
            return self.apply_dense(asm, fvals);
        }
        let grid = self.grid;
        let coeff = self.edge_coefficients(fvals);
        // Cap-weighted sources as C² interpolants.
        let sb = SpectralBox::new(grid);
        let mut gcaps: Vec<Vec<f64>> = vec![vec![0.0; grid.num_points()]; NUM_CAPS];
        for (i, &flat) in self.annulus.iter().enumerate() {
            for (a, cw) in &self.active[i] {
                gcaps[*a as usize][flat] = fvals[i] * cw;
            }
        }
        let interps: Vec<CubicInterp> = gcaps
            .iter()
            .map(|g| CubicInterp::build(&sb, g))
            .collect();

        let out_annulus: Vec<[f64; 3]> = self
            .annulus
            .par_iter()
            .enumerate()
            .map(|(ti, &tflat)| {
                let x = grid.point(tflat);
                let mut w = [0.0f64; 3];
                for (cap, interp) in interps.iter().enumerate() {
                    let geval = |p: [f64; 3]| interp.eval(p);
                    self.cone_integral(x, &self.thetas[cap], &geval, None, &mut w);
                }
                let tf = &self.transfer_fields[ti];
                for e in 0..NUM_EDGES {
                    w[0] += coeff[e] * tf[e][0];
                    w[1] += coeff[e] * tf[e][1];
                    w[2] += coeff[e] * tf[e][2];
                }
                w
            })
            .collect();
        let mut out = VectorField::zeros(grid);
        for (i, &flat) in self.annulus.iter().enumerate() {
            out.comp[0][flat] = out_annulus[i][0];
            out.comp[1][flat] = out_annulus[i][1];
            out.comp[2][flat] = out_annulus[i][2];
        }
        out
    }

    fn apply_dense(&self, asm: &Assembled, fvals: &[f64]) -> VectorField {
        let mut out = VectorField::zeros(self.grid);
        let acc: Vec<[f64; 3]> = (0..self.annulus.len())
            .into_par_iter()
            .map(|ti| {
                let mut w = [0.0f64; 3];
                for (si, fv) in fvals.iter().enumerate() {
                    if *fv == 0.0 {
                        continue;
                    }
                    let col = &asm.columns[si][ti];
                    w[0] += fv * col[0];
                    w[1] += fv * col[1];
                    w[2] += fv * col[2];
                }
                w
            })
            .collect();
        for (i, &flat) in self.annulus.iter().enumerate() {
            out.comp[0][flat] = acc[i][0];
            out.comp[1][flat] = acc[i][1];
            out.comp[2][flat] = acc[i][2];
        }
        out
    }

    /// Assembles the dense operator (responses to unit samples); refuses
    /// grids with more than 2500 annulus points.
    pub fn assemble(&mut self) -> Result<()> {
        if self.assembled.is_some() {
            return Ok(());
        }
        let m = self.annulus.len();
        if m > 2500 {
            return Err(Error::invalid(format!(
                "dense assembly capped at 2500 annulus points, grid has {m}"
            )));
        }
        let mut columns = Vec::with_capacity(m);
        for src in 0..m {
            let mut unit = vec![0.0; m];
            unit[src] = 1.0;
            let w = self.apply_values(&unit);
            let col: Vec<[f64; 3]> = self
                .annulus
                .iter()
                .map(|&flat| [w.comp[0][flat], w.comp[1][flat], w.comp[2][flat]])
                .collect();
            columns.push(col);
        }
        self.assembled = Some(Assembled { columns });
        Ok(())
    }

    /// Cache file path for this operator under `dir` (or `OSEEN_CACHE_DIR`).
    pub fn cache_path(&self, dir: Option<&Path>) -> Option<PathBuf> {
        let base = dir
            .map(|p| p.to_path_buf())
            .or_else(|| std::env::var_os("OSEEN_CACHE_DIR").map(PathBuf::from))?;
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(format!(
            "BOGV1|n={:?}|L={:.12e}|r0={:.12e}|caps={NUM_CAPS}|edge={EDGE_COS}|capw={CAP_ANGLE_EDGE}-{CAP_ANGLE_FLAT}|capr={CAP_R:?}|trw={TRANSFER_ANGLE_EDGE}|trr={TRANSFER_R:?}",
            self.grid.n, self.grid.len, self.r0
        ));
        let digest = hasher.finalize();
        Some(base.join(format!("bogovskii-{:x}.bogv", digest)))
    }

    /// Assembles with a disk cache: loads when present, else assembles and
    /// writes. Layout: magic `BOGV1`, u32 n1,n2,n3, f64 L, f64 r0, u32 M,
    /// M u32 flat indices, then M columns of 3M little-endian f64.
    pub fn assemble_cached(&mut self, dir: Option<&Path>) -> Result<()> {
        let Some(path) = self.cache_path(dir) else {
            return self.assemble();
        };
        if path.exists() && self.load_cache(&path).is_ok() {
            return Ok(());
        }
        self.assemble()?;
        self.write_cache(&path)?;
        Ok(())
    }

    fn write_cache(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let Some(asm) = &self.assembled else {
            return Err(Error::invalid("nothing assembled to cache"));
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"BOGV1")?;
        for a in 0..3 {
            w.write_all(&(self.grid.n[a] as u32).to_le_bytes())?;
        }
        w.write_all(&self.grid.len.to_le_bytes())?;
        w.write_all(&self.r0.to_le_bytes())?;
        w.write_all(&(self.annulus.len() as u32).to_le_bytes())?;
        for &i in &self.annulus {
            w.write_all(&(i as u32).to_le_bytes())?;
        }
        for col in &asm.columns {
            for t in col {
                for c in t {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    fn load_cache(&mut self, path: &Path) -> Result<()> {
        use std::io::Read;
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != b"BOGV1" {
            return Err(Error::Format("bad Bogovskii cache magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        let mut n = [0usize; 3];
        for a in &mut n {
            r.read_exact(&mut b4)?;
            *a = u32::from_le_bytes(b4) as usize;
        }
        r.read_exact(&mut b8)?;
        let len = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let r0 = f64::from_le_bytes(b8);
        if n != self.grid.n || (len - self.grid.len).abs() > 1e-12 || (r0 - self.r0).abs() > 1e-12 {
            return Err(Error::Format("Bogovskii cache does not match grid".into()));
        }
        r.read_exact(&mut b4)?;
        let m = u32::from_le_bytes(b4) as usize;
        if m != self.annulus.len() {
            return Err(Error::Format("Bogovskii cache point count mismatch".into()));
        }
        for &expect in &self.annulus {
            r.read_exact(&mut b4)?;
            if u32::from_le_bytes(b4) as usize != expect {
                return Err(Error::Format("Bogovskii cache index mismatch".into()));
            }
        }
        let mut columns = Vec::with_capacity(m);
        for _ in 0..m {
            let mut col = Vec::with_capacity(m);
            for _ in 0..m {
                let mut t = [0.0; 3];
                for c in &mut t {
                    r.read_exact(&mut b8)?;
                    *c = f64::from_le_bytes(b8);
                }
                col.push(t);
            }
            columns.push(col);
        }
        self.assembled = Some(Assembled { columns });
        Ok(())
    }

    /// Swaps in a refined cone quadrature (test support).
    #[doc(hidden)]
    pub fn refine_quadrature(&mut self) {
        let unit10: Vec<(f64, f64)> = GL_NODES
            .iter()
            .zip(GL_WEIGHTS.iter())
            .map(|(n, w)| (0.5 * (n + 1.0), 0.5 * w))
            .collect();
        self.quad.mu = unit10.clone();
        self.quad.radial = unit10;
        self.quad.n_beta = 20;
        self.quad.panel = 0.6;
        self.transfer_fields = self.build_transfer_fields();
    }

    /// Raw single-weight kernel integral with a spherically symmetric
    /// radial weight, for validation against closed forms (test support).
    #[doc(hidden)]
    pub fn raw_kernel_integral(
        &self,
        x: [f64; 3],
        r_knots: [f64; 4],
        g: &dyn Fn([f64; 3]) -> f64,
    ) -> [f64; 3] {
        let th = Weight::new_radial(r_knots);
        let mut out = [0.0; 3];
        self.cone_integral(x, &th, g, None, &mut out);
        out
    }

    /// Measured boundedness diagnostic `‖∇^{k+1} B f‖_q / ‖∇^k f‖_q`.
    pub fn norm_ratio(&self, sb: &SpectralBox, f: &ScalarField, k: usize, q: f64) -> Result<f64> {
        if k > 1 {
            return Err(Error::invalid("norm_ratio supports k = 0 or 1"));
        }
        let w = self.apply(f, MeanPolicy::Strict)?;
        let denom = match k {
            0 => f.lq_norm(q)?,
            _ => sb.scalar_gradient(f).lq_norm(q)?,
        };
        if denom < 1e-300 {
            return Err(Error::invalid("norm_ratio denominator vanishes"));
        }
        let numer = match k {
            0 => sb.gradient(&w).lq_norm(q)?,
            _ => {
                // Frobenius norm over all 27 second derivatives.
                let g = sb.gradient(&w);
                let mut total_pts = vec![0.0f64; self.grid.num_points()];
                for row in &g.comp {
                    for comp in row {
                        let s = ScalarField {
                            grid: self.grid,
                            data: comp.clone(),
                        };
                        let gg = sb.scalar_gradient(&s);
                        for axis in 0..3 {
                            for (t, v) in total_pts.iter_mut().zip(&gg.comp[axis]) {
                                *t += v * v;
                            }
                        }
                    }
                }
                let mag = ScalarField {
                    grid: self.grid,
                    data: total_pts.iter().map(|v| v.sqrt()).collect(),
                };
                mag.lq_norm(q)?
            }
        };
        Ok(numer / denom)
    }
}
