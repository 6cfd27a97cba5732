//! Initial-data generators for decay and duality experiments.
//!
//! Everything here is built as the spectral curl of a sampled vector
//! potential, so the fields are divergence-free to round-off and vanish
//! (to spectral accuracy) outside the potential's support.
//!
//! Two families matter for decay measurements:
//!
//! * compact "shell" data — a Gaussian ridge at a fixed radius; decays fast
//!   under heat flow (its low-k spectrum is flat), useful for isometry,
//!   duality and energy tests;
//! * "marginal envelope" data — amplitude `~ r^{-p}` between two radii. With
//!   `p = 3/q` the field is on the edge of `L^q`, which is what makes the
//!   `L^q → L^r` decay exponents visible as measured slopes rather than
//!   inequalities with slack.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cutoff::smoothstep;
use super::spectral::SpectralBox;
use super::{Grid, ScalarField, VectorField};
use crate::error::{Error, Result};

/// Radial window: rises smoothly over `[a0, a1]`, falls over `[b0, b1]`.
fn window(r: f64, a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    let rise = if a1 > a0 { smoothstep((r - a0) / (a1 - a0)).0 } else { 1.0 };
    let fall = 1.0 - smoothstep((r - b0) / (b1 - b0)).0;
    rise * fall
}

/// Single solenoidal Fourier mode `sin(k·x + phase) v` with `k·v = 0`.
pub fn fourier_mode(grid: Grid, m: [i64; 3], v: [f64; 3], phase: f64) -> Result<VectorField> {
    let k: Vec<f64> = m
        .iter()
        .map(|&mi| 2.0 * std::f64::consts::PI * mi as f64 / grid.len)
        .collect();
    let dot = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    if dot.abs() > 1e-12 {
        return Err(Error::invalid("fourier_mode requires k·v = 0"));
    }
    Ok(VectorField::from_fn(grid, move |p| {
        let s = (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + phase).sin();
        [v[0] * s, v[1] * s, v[2] * s]
    }))
}

/// Compact solenoidal field: curl of a Gaussian-shell potential.
///
/// The potential is a Gaussian ridge at `r_center` of width `sigma` times a
/// fixed direction mix. No hard truncation: the Gaussian is entire, so the
/// spectral curl carries no window ringing; values fall below 1e-10 of the
/// peak within a few widths of the ridge.
pub struct ShellSpec {
    pub r_center: f64,
    pub sigma: f64,
}

pub fn solenoidal_shell(sb: &SpectralBox, spec: &ShellSpec, amplitude: f64) -> Result<VectorField> {
    let grid = sb.grid;
    if 2.0 * (spec.r_center + 5.0 * spec.sigma) >= grid.len {
        return Err(Error::invalid("shell support exceeds the half-box"));
    }
    let (rc, sg) = (spec.r_center, spec.sigma);
    let pot = VectorField::from_fn(grid, move |p| {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let g = (-(r - rc) * (r - rc) / (2.0 * sg * sg)).exp();
        [g, 0.6 * g, -0.8 * g]
    });
    let mut f = sb.curl(&pot);
    let n = f.l2_norm();
    if n > 0.0 {
        f.scale(amplitude / n);
    }
    Ok(f)
}

/// Marginal-envelope solenoidal data: `|f| ~ r^{-p}` between the core and
/// the truncation radius.
pub struct EnvelopeSpec {
    /// Envelope exponent `p`; `p = 3/q` puts the field on the edge of `L^q`.
    pub p: f64,
    /// Core regularization scale: the power law is smoothly flattened below
    /// this radius (the potential stays analytic at the origin).
    pub r_core: f64,
    /// Optional hard inner exclusion (field ~ 0 inside), for exterior runs
    /// with an obstacle. The rise spans `[r_hole, 2 r_hole]`.
    pub r_hole: Option<f64>,
    /// Outer truncation radius; the fall spans `[0.65 r_out, r_out]`. Wide
    /// on purpose: narrow windows of the Gevrey smoothstep ring at the
    /// 1e-3 level under spectral differentiation.
    pub r_out: f64,
}

pub fn solenoidal_envelope(
    sb: &SpectralBox,
    spec: &EnvelopeSpec,
    amplitude: f64,
) -> Result<VectorField> {
    let grid = sb.grid;
    if 2.0 * spec.r_out >= grid.len {
        return Err(Error::invalid("envelope support exceeds the half-box"));
    }
    if spec.r_core <= 0.0 || spec.r_out <= 4.0 * spec.r_core {
        return Err(Error::invalid("envelope radii must satisfy 0 < r_core < r_out/4"));
    }
    if let Some(rh) = spec.r_hole {
        if 2.0 * rh >= 0.65 * spec.r_out {
            return Err(Error::invalid("inner exclusion overlaps outer truncation"));
        }
    }
    let (p, delta, ro) = (spec.p, spec.r_core, spec.r_out);
    let rh = spec.r_hole;
    // Potential magnitude whose radial derivative scales like r^{-p}.
    let base = move |r: f64| -> f64 {
        let s = delta * delta + r * r;
        if (p - 1.0).abs() < 1e-9 {
            0.5 * s.ln()
        } else {
            s.powf((1.0 - p) / 2.0) / (1.0 - p)
        }
    };
    let pot = VectorField::from_fn(grid, move |q| {
        let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        let mut w = base(r) * window(r, 0.0, 0.0, 0.65 * ro, ro);
        if let Some(rh) = rh {
            w *= smoothstep((r - rh) / rh).0;
        }
        [0.0, 0.3 * w, w]
    });
    let mut f = sb.curl(&pot);
    let n = f.l2_norm();
    if n > 0.0 {
        f.scale(amplitude / n);
    }
    Ok(f)
}

/// Random band-limited solenoidal field (Leray projection of random modes).
pub fn random_solenoidal(sb: &SpectralBox, seed: u64, max_mode: i32, amplitude: f64) -> VectorField {
    let grid = sb.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for _ in 0..16 {
        let m = [
            rng.gen_range(-max_mode..=max_mode) as f64,
            rng.gen_range(-max_mode..=max_mode) as f64,
            rng.gen_range(-max_mode..=max_mode) as f64,
        ];
        let amp = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        modes.push((m, amp, phase));
    }
    let tau = 2.0 * std::f64::consts::PI / grid.len;
    let raw = VectorField::from_fn(grid, move |p| {
        let mut v = [0.0; 3];
        for (m, amp, phase) in &modes {
            let arg = tau * (m[0] * p[0] + m[1] * p[1] + m[2] * p[2]) + phase;
            let s = arg.sin();
            for c in 0..3 {
                v[c] += amp[c] * s;
            }
        }
        v
    });
    let mut f = sb.helmholtz_project(&raw);
    let n = f.l2_norm();
    if n > 0.0 {
        f.scale(amplitude / n);
    }
    f
}

/// Random solenoidal field concentrated in a radial shell: curl of a random
/// low-mode potential under a Gaussian ridge envelope.
///
/// The envelope is a Gaussian centered between `r_in` and `r_out` (entire,
/// so no window ringing); values at the obstacle/boundary are suppressed by
/// Gaussian decay rather than cut to exact zero.
pub fn random_solenoidal_in_shell(
    sb: &SpectralBox,
    seed: u64,
    r_in: f64,
    r_out: f64,
    max_mode: i32,
    amplitude: f64,
) -> Result<VectorField> {
    let grid = sb.grid;
    if 2.0 * r_out >= grid.len {
        return Err(Error::invalid("shell support exceeds the half-box"));
    }
    if !(r_out > r_in && r_in >= 0.0) {
        return Err(Error::invalid("shell radii must satisfy 0 <= r_in < r_out"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for _ in 0..12 {
        let m = [
            rng.gen_range(-max_mode..=max_mode) as f64,
            rng.gen_range(-max_mode..=max_mode) as f64,
            rng.gen_range(-max_mode..=max_mode) as f64,
        ];
        let amp = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        modes.push((m, amp, phase));
    }
    let tau = 2.0 * std::f64::consts::PI / grid.len;
    let rc = 0.5 * (r_in + r_out);
    let sg = (r_out - r_in) / 5.0;
    let pot = VectorField::from_fn(grid, move |p| {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let w = (-(r - rc) * (r - rc) / (2.0 * sg * sg)).exp();
        let mut v = [0.0; 3];
        for (m, amp, phase) in &modes {
            let arg = tau * (m[0] * p[0] + m[1] * p[1] + m[2] * p[2]) + phase;
            let s = arg.sin();
            for c in 0..3 {
                v[c] += amp[c] * s * w;
            }
        }
        v
    });
    let mut f = sb.curl(&pot);
    let n = f.l2_norm();
    if n > 0.0 {
        f.scale(amplitude / n);
    }
    Ok(f)
}

/// Scalar bump with zero mean, supported in a shell; handy for manufactured
/// divergence data.
pub fn shell_scalar(grid: Grid, r_in: f64, r_out: f64, m: [f64; 3]) -> ScalarField {
    let tau = 2.0 * std::f64::consts::PI / grid.len;
    let width = (r_out - r_in) * 0.25;
    ScalarField::from_fn(grid, move |p| {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let w = window(r, r_in, r_in + width, r_out - width, r_out);
        w * (tau * (m[0] * p[0] + m[1] * p[1] + m[2] * p[2])).sin()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_field_is_solenoidal_and_compact() {
        let g = Grid::cubic(48, 40.0).unwrap();
        let sb = SpectralBox::new(g);
        let f = solenoidal_shell(
            &sb,
            &ShellSpec {
                r_center: 6.0,
                sigma: 2.0,
            },
            1.0,
        )
        .unwrap();
        assert!((f.l2_norm() - 1.0).abs() < 1e-12);
        assert!(sb.div_defect(&f) < 1e-11);
        assert!(f.max_outside_radius(g.len / 2.0) < 1e-9 * f.linf());
    }

    #[test]
    fn envelope_field_has_requested_decay() {
        let g = Grid::cubic(64, 64.0).unwrap();
        let sb = SpectralBox::new(g);
        let f = solenoidal_envelope(
            &sb,
            &EnvelopeSpec {
                p: 1.5,
                r_core: 2.0,
                r_hole: None,
                r_out: 26.0,
            },
            1.0,
        )
        .unwrap();
        assert!(sb.div_defect(&f) < 1e-10);
        // Shell-averaged magnitude should fall roughly like r^{-1.5} between
        // the core and the start of the outer fall.
        let avg_at = |r0: f64| -> f64 {
            let mut s = 0.0;
            let mut c = 0usize;
            for flat in 0..g.num_points() {
                let p = g.point(flat);
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                if (r - r0).abs() < 0.8 {
                    s += f.magnitude(flat);
                    c += 1;
                }
            }
            s / c as f64
        };
        let (a, b) = (avg_at(6.0), avg_at(15.0));
        let slope = (b / a).ln() / (15.0f64 / 6.0).ln();
        assert!(
            (slope + 1.5).abs() < 0.35,
            "envelope slope {slope} too far from -1.5"
        );
    }

    #[test]
    fn random_solenoidal_is_projected() {
        let g = Grid::cubic(24, 10.0).unwrap();
        let sb = SpectralBox::new(g);
        let f = random_solenoidal(&sb, 17, 3, 2.0);
        assert!((f.l2_norm() - 2.0).abs() < 1e-12);
        assert!(sb.div_defect(&f) < 1e-12);
    }

    #[test]
    fn fourier_mode_requires_orthogonality() {
        let g = Grid::cubic(16, 2.0 * std::f64::consts::PI).unwrap();
        assert!(fourier_mode(g, [1, 0, 0], [1.0, 0.0, 0.0], 0.0).is_err());
        assert!(fourier_mode(g, [1, 0, 0], [0.0, 1.0, 0.0], 0.0).is_ok());
    }
}
