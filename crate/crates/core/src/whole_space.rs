//! Explicit evolution operator for the drift-rotation heat system on the
//! whole space (proxied by the periodic box).
//!
//! The solution with initial datum `f` at time `s` is
//!
//! ```text
//! U(t,s) f (x) = Φ(t,s) (e^{(t-s)Δ} f)( Φ(t,s)ᵀ (x + ∫ₛᵗ Φ(t,τ) η(τ) dτ) )
//! ```
//!
//! with `Φ(t,s) = Q(t) Q(s)ᵀ`. The heat flow is a Fourier multiplier; the
//! rigid-motion composition is applied by resampling. A pure translation is
//! a phase shift (exact); a rotation goes through the spline interpolant of
//! [`crate::field::interp`]. Because orthogonal maps and translations
//! preserve every `L^r` norm, measured norms must agree with the motion-off
//! run — that identity is what the isometry diagnostics check.

use crate::error::{Error, Result};
use crate::field::interp::{resample_affine, InterpOptions, SplineInterpolant};
use crate::field::spectral::{Spec, SpectralBox};
use crate::field::VectorField;
use crate::motion::{BodyMotion, RotationFrame};
use crate::report::{fit_slope, DecayReport};
use crate::util::mat3::{self, Mat3};
use num_complex::Complex;

/// Tolerances and interpolation options for the operator.
#[derive(Debug, Clone, Copy)]
pub struct WholeSpaceOptions {
    pub interp: InterpOptions,
    /// Max allowed relative field magnitude at radius L/2 when a rotation
    /// will wrap the box corners.
    pub wrap_tol: f64,
    /// Max allowed relative divergence defect of inputs.
    pub div_tol: f64,
}

impl Default for WholeSpaceOptions {
    fn default() -> Self {
        WholeSpaceOptions {
            interp: InterpOptions::default(),
            wrap_tol: 1e-8,
            // Loose enough to re-accept the operator's own resampled
            // outputs, whose divergence sits at the interpolation level.
            div_tol: 1e-4,
        }
    }
}

/// The whole-space evolution operator `U(t,s)` and its adjoint.
pub struct WholeSpaceOperator {
    pub motion: BodyMotion,
    pub frame: RotationFrame,
    pub opts: WholeSpaceOptions,
    /// Cumulative `∫₀^{t_j} Q(τ)ᵀ η(τ) dτ` on the frame grid (corrected
    /// trapezoid, 4th order).
    drift_cum: Vec<[f64; 3]>,
    rotation_trivial: bool,
    translation_trivial: bool,
}

impl WholeSpaceOperator {
    pub fn new(motion: BodyMotion, frame: RotationFrame, opts: WholeSpaceOptions) -> Result<Self> {
        let n = frame.q.len();
        let h = frame.dt;
        // Integrand g(τ) = Q(τ)ᵀ η(τ) at the frame nodes.
        let mut g = Vec::with_capacity(n);
        for (i, q) in frame.q.iter().enumerate() {
            let eta = motion.eta.eval(i as f64 * h)?;
            g.push(mat3::mat_tvec(q, eta));
        }
        // Corrected trapezoid: ∫_{x_j}^{x_{j+1}} ≈ h/2 (g_j + g_{j+1})
        //                                        - h²/12 (g'_{j+1} - g'_j).
        let deriv = |j: usize| -> [f64; 3] {
            let c = |v: [f64; 3], s: f64| [v[0] * s, v[1] * s, v[2] * s];
            let add = |a: [f64; 3], b: [f64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
            if n < 3 {
                return [0.0; 3];
            }
            if j == 0 {
                add(add(c(g[0], -1.5 / h), c(g[1], 2.0 / h)), c(g[2], -0.5 / h))
            } else if j == n - 1 {
                add(add(c(g[n - 3], 0.5 / h), c(g[n - 2], -2.0 / h)), c(g[n - 1], 1.5 / h))
            } else {
                c(add(g[j + 1], c(g[j - 1], -1.0)), 0.5 / h)
            }
        };
        let mut drift_cum = Vec::with_capacity(n);
        drift_cum.push([0.0; 3]);
        for j in 0..n - 1 {
            let dj = deriv(j);
            let dj1 = deriv(j + 1);
            let prev = drift_cum[j];
            let mut next = [0.0; 3];
            for c in 0..3 {
                next[c] = prev[c] + 0.5 * h * (g[j][c] + g[j + 1][c])
                    - h * h / 12.0 * (dj1[c] - dj[c]);
            }
            drift_cum.push(next);
        }
        let rotation_trivial = frame
            .q
            .iter()
            .all(|q| mat3::frobenius_diff(q, &mat3::IDENTITY) < 1e-12);
        let translation_trivial = drift_cum
            .iter()
            .all(|d| d[0].abs() + d[1].abs() + d[2].abs() < 1e-13);
        Ok(WholeSpaceOperator {
            motion,
            frame,
            opts,
            drift_cum,
            rotation_trivial,
            translation_trivial,
        })
    }

    pub fn is_motion_trivial(&self) -> bool {
        self.rotation_trivial && self.translation_trivial
    }

    fn cum_at(&self, t: f64) -> Result<[f64; 3]> {
        let ratio = t / self.frame.dt;
        let i = ratio.round() as usize;
        if (ratio - i as f64).abs() > 1e-6 || i >= self.drift_cum.len() {
            return Err(Error::invalid(format!(
                "time {t} not aligned with frame grid (dt = {})",
                self.frame.dt
            )));
        }
        Ok(self.drift_cum[i])
    }

    /// Displacement `∫ₛᵗ Φ(t,τ) η(τ) dτ = Q(t) (I(t) - I(s))`.
    pub fn drift(&self, t: f64, s: f64) -> Result<[f64; 3]> {
        let it = self.cum_at(t)?;
        let is = self.cum_at(s)?;
        let q = self.frame.q_at(t)?;
        Ok(mat3::mat_vec(&q, [it[0] - is[0], it[1] - is[1], it[2] - is[2]]))
    }

    pub fn phi(&self, t: f64, s: f64) -> Result<Mat3> {
        self.frame.phi(t, s)
    }

    fn check_input(&self, sb: &SpectralBox, f: &VectorField, role: &str) -> Result<()> {
        f.check_finite()?;
        let defect = sb.div_defect(f);
        if defect > self.opts.div_tol {
            return Err(Error::compat(format!(
                "{role} is not solenoidal: relative divergence defect {defect:.3e} > {:.3e}",
                self.opts.div_tol
            )));
        }
        if !self.rotation_trivial {
            let peak = f.linf();
            if peak > 0.0 {
                let edge = f.max_outside_radius(sb.grid.len / 2.0);
                if edge > self.opts.wrap_tol * peak {
                    return Err(Error::compat(format!(
                        "{role} has relative magnitude {:.3e} at radius L/2; the rotation \
                         would wrap it (tolerance {:.3e})",
                        edge / peak,
                        self.opts.wrap_tol
                    )));
                }
            }
        }
        Ok(())
    }

    fn phase_shift(&self, sb: &SpectralBox, spec: &mut [Spec; 3], d: [f64; 3]) {
        // g(x) = h(x + d) ⟺ ĝ(k) = e^{+i k·d} ĥ(k).
        let tables: Vec<Vec<Complex<f64>>> = (0..3)
            .map(|a| {
                sb.k[a]
                    .iter()
                    .map(|k| Complex::from_polar(1.0, k * d[a]))
                    .collect()
            })
            .collect();
        let [nx, ny, _] = sb.grid.n;
        for s in spec.iter_mut() {
            for (idx, v) in s.iter_mut().enumerate() {
                let i = idx % nx;
                let j = (idx / nx) % ny;
                let kk = idx / (nx * ny);
                *v *= tables[0][i] * tables[1][j] * tables[2][kk];
            }
        }
    }

    /// Applies `U(t,s)` to a solenoidal field.
    pub fn apply(&self, sb: &SpectralBox, f: &VectorField, t: f64, s: f64) -> Result<VectorField> {
        if t < s {
            return Err(Error::invalid("apply requires t >= s"));
        }
        sb.grid.ensure_same(&f.grid)?;
        self.check_input(sb, f, "initial datum")?;
        if t == s {
            return Ok(f.clone());
        }
        let mut spec = sb.forward_vec(f);
        sb.heat_multiply(&mut spec, t - s);
        if self.is_motion_trivial() {
            return Ok(sb.inverse_vec(&spec));
        }
        let d = self.drift(t, s)?;
        if self.rotation_trivial {
            // Pure translation: exact phase shift by d.
            self.phase_shift(sb, &mut spec, d);
            return Ok(sb.inverse_vec(&spec));
        }
        let phi = self.phi(t, s)?;
        let phit = mat3::transpose(&phi);
        let shift = mat3::mat_vec(&phit, d);
        let interp = SplineInterpolant::from_spec(sb, &spec, self.opts.interp)?;
        Ok(resample_affine(&interp, sb.grid, phit, shift, phi))
    }

    /// Applies the adjoint `U(t,s)*` to a final datum `g`:
    /// `U(t,s)* g = e^{(t-s)Δ} [ Φᵀ g(Φ · - d) ]`.
    pub fn apply_adjoint(
        &self,
        sb: &SpectralBox,
        g: &VectorField,
        t: f64,
        s: f64,
    ) -> Result<VectorField> {
        if t < s {
            return Err(Error::invalid("apply_adjoint requires t >= s"));
        }
        sb.grid.ensure_same(&g.grid)?;
        self.check_input(sb, g, "final datum")?;
        if t == s {
            return Ok(g.clone());
        }
        let mut spec = sb.forward_vec(g);
        if !self.is_motion_trivial() {
            let d = self.drift(t, s)?;
            if self.rotation_trivial {
                self.phase_shift(sb, &mut spec, [-d[0], -d[1], -d[2]]);
            } else {
                let phi = self.phi(t, s)?;
                let phit = mat3::transpose(&phi);
                let interp = SplineInterpolant::from_spec(sb, &spec, self.opts.interp)?;
                let moved = resample_affine(&interp, sb.grid, phi, [-d[0], -d[1], -d[2]], phit);
                spec = sb.forward_vec(&moved);
            }
        }
        sb.heat_multiply(&mut spec, t - s);
        Ok(sb.inverse_vec(&spec))
    }

    /// Kernel matrix `Γ(x, y; t, s)`.
    pub fn eval_kernel(&self, x: [f64; 3], y: [f64; 3], t: f64, s: f64) -> Result<Mat3> {
        if t <= s {
            return Err(Error::invalid("eval_kernel requires t > s"));
        }
        let phi = self.phi(t, s)?;
        let d = self.drift(t, s)?;
        let z = mat3::mat_tvec(&phi, [x[0] + d[0], x[1] + d[1], x[2] + d[2]]);
        let dist2 = (z[0] - y[0]).powi(2) + (z[1] - y[1]).powi(2) + (z[2] - y[2]).powi(2);
        let tau = t - s;
        let scale = (4.0 * std::f64::consts::PI * tau).powf(-1.5) * (-dist2 / (4.0 * tau)).exp();
        let mut out = phi;
        for row in out.iter_mut() {
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        Ok(out)
    }

    /// Applies `U(t,s)` by direct kernel quadrature (O(N²) oracle for small
    /// grids; no periodization, so supports must stay well inside the box).
    pub fn apply_kernel_quadrature(
        &self,
        f: &VectorField,
        t: f64,
        s: f64,
    ) -> Result<VectorField> {
        use rayon::prelude::*;
        let grid = f.grid;
        if grid.num_points() > 32_768 {
            return Err(Error::invalid(
                "kernel quadrature is an oracle for grids up to 32³",
            ));
        }
        let phi = self.phi(t, s)?;
        let d = self.drift(t, s)?;
        let tau = t - s;
        let vol = grid.cell_volume();
        let pref = (4.0 * std::f64::consts::PI * tau).powf(-1.5);
        let mut out = VectorField::zeros(grid);
        let nx = grid.n[0];
        let (c0, rest) = out.comp.split_at_mut(1);
        let (c1, c2) = rest.split_at_mut(1);
        (
            c0[0].par_chunks_mut(nx),
            c1[0].par_chunks_mut(nx),
            c2[0].par_chunks_mut(nx),
        )
            .into_par_iter()
            .enumerate()
            .for_each(|(line, (l0, l1, l2))| {
                let j = line % grid.n[1];
                let kk = line / grid.n[1];
                for i in 0..nx {
                    let x = [grid.coord(0, i), grid.coord(1, j), grid.coord(2, kk)];
                    let z = mat3::mat_tvec(&phi, [x[0] + d[0], x[1] + d[1], x[2] + d[2]]);
                    // Gaussian-weighted average of f around z, rotated by Φ.
                    let mut acc = [0.0f64; 3];
                    for flat in 0..grid.num_points() {
                        let y = grid.point(flat);
                        let dist2 = (z[0] - y[0]).powi(2)
                            + (z[1] - y[1]).powi(2)
                            + (z[2] - y[2]).powi(2);
                        if dist2 > 100.0 * tau {
                            continue;
                        }
                        let w = pref * (-dist2 / (4.0 * tau)).exp() * vol;
                        acc[0] += w * f.comp[0][flat];
                        acc[1] += w * f.comp[1][flat];
                        acc[2] += w * f.comp[2][flat];
                    }
                    let rot = mat3::mat_vec(&phi, acc);
                    l0[i] = rot[0];
                    l1[i] = rot[1];
                    l2[i] = rot[2];
                }
            });
        Ok(out)
    }
}

/// One measured norm family from a whole-space decay run.
pub struct WholeDecayResult {
    pub report: DecayReport,
    pub grad_report: DecayReport,
    /// Largest relative deviation of measured norms from the motion-off run
    /// (None when the motion is trivial).
    pub isometry_max_rel: Option<f64>,
}

/// Measures `‖∇^j U(t,s) f‖_r` for `j = 0, 1` over `t_list` (with `s = 0`),
/// fits log-log slopes and compares with `-(3/q - 3/r)/2 - j/2`.
pub fn decay_experiment_whole(
    op: &WholeSpaceOperator,
    sb: &SpectralBox,
    f: &VectorField,
    q: f64,
    r: f64,
    t_list: &[f64],
    slope_tol: f64,
) -> Result<WholeDecayResult> {
    if t_list.len() < 4 {
        return Err(Error::invalid("decay experiment needs at least 4 times"));
    }
    if !(q > 1.0) || r < q {
        return Err(Error::invalid("need 1 < q <= r"));
    }
    op.check_input(sb, f, "initial datum")?;
    let spec0 = sb.forward_vec(f);
    let mut norms = Vec::new();
    let mut grad_norms = Vec::new();
    let mut contamination = Vec::new();
    let mut iso_worst: f64 = 0.0;
    for &t in t_list {
        if t <= 0.0 {
            return Err(Error::invalid("decay times must be positive"));
        }
        // Motion-off norms (pure heat flow) via spectra.
        let mut spec = spec0.clone();
        sb.heat_multiply(&mut spec, t);
        let plain = sb.inverse_vec(&spec);
        let (n_off, g_off) = if r.is_infinite() || (r - 2.0).abs() > 1e-12 {
            let grad = sb.gradient(&plain);
            (plain.lq_norm(r)?, grad.lq_norm(r)?)
        } else {
            (sb.l2_norm_from_spec(&spec), sb.grad_l2_norm_from_spec(&spec))
        };
        let (n_meas, g_meas, contam) = if op.is_motion_trivial() {
            let c = plain.max_on_boundary_shell(2) / plain.linf().max(1e-300);
            (n_off, g_off, c)
        } else {
            let u = op.apply(sb, f, t, 0.0)?;
            let grad = sb.gradient(&u);
            let c = u.max_on_boundary_shell(2) / u.linf().max(1e-300);
            (u.lq_norm(r)?, grad.lq_norm(r)?, c)
        };
        if n_off > 0.0 {
            iso_worst = iso_worst.max((n_meas - n_off).abs() / n_off);
        }
        norms.push(n_meas);
        grad_norms.push(g_meas);
        contamination.push(contam);
    }
    let window = (t_list[0], *t_list.last().unwrap());
    let theory0 = -(3.0 / q - 3.0 / r) / 2.0;
    let pts0: Vec<(f64, f64)> = t_list.iter().copied().zip(norms.iter().copied()).collect();
    let pts1: Vec<(f64, f64)> = t_list
        .iter()
        .copied()
        .zip(grad_norms.iter().copied())
        .collect();
    let fit0 = fit_slope(&pts0, window, theory0, slope_tol)?;
    let fit1 = fit_slope(&pts1, window, theory0 - 0.5, slope_tol)?;
    let mk = |deriv_order: usize, values: Vec<f64>, fit| DecayReport {
        q,
        r,
        deriv_order,
        times: t_list.to_vec(),
        norms: values,
        contamination: contamination.clone(),
        contamination_tol: 1e-3,
        fit,
    };
    Ok(WholeDecayResult {
        report: mk(0, norms, fit0),
        grad_report: mk(1, grad_norms, fit1),
        isometry_max_rel: if op.is_motion_trivial() {
            None
        } else {
            Some(iso_worst)
        },
    })
}
