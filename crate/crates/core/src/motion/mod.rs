//! Prescribed rigid-body velocities and the associated rotation frame.
//!
//! The body's translational velocity `eta(t)` and angular velocity
//! `omega(t)` are given either as closed-form expressions or as sampled
//! tables with linear interpolation. The rotation frame `Q(t)` solves
//! `Q' = -[omega(t)]× Q`, `Q(0) = I`; each step multiplies by the Rodrigues
//! exponential of the skew matrix at the midpoint, so `Q` stays orthogonal
//! to round-off regardless of step count.

pub mod expr;

use crate::error::{Error, Result};
use crate::util::mat3::{self, Mat3};
use expr::Expr;

/// One prescribed vector-valued function of time.
#[derive(Debug, Clone)]
pub enum MotionFn {
    Zero,
    Exprs(Box<[Expr; 3]>),
    Table(MotionTable),
}

/// Sampled motion with linear interpolation between nodes.
#[derive(Debug, Clone)]
pub struct MotionTable {
    pub times: Vec<f64>,
    pub values: Vec<[f64; 3]>,
}

impl MotionTable {
    pub fn new(times: Vec<f64>, values: Vec<[f64; 3]>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::invalid("motion table needs >= 2 aligned rows"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("motion table times must increase"));
        }
        Ok(MotionTable { times, values })
    }

    /// Reads rows `t, v1, v2, v3` from a CSV file with a header row.
    pub fn from_csv(path: &std::path::Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
            if rec.len() < 4 {
                return Err(Error::Config("motion table rows need 4 columns".into()));
            }
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number '{}' in motion table", &rec[i])))
            };
            times.push(parse(0)?);
            values.push([parse(1)?, parse(2)?, parse(3)?]);
        }
        MotionTable::new(times, values)
    }

    fn segment(&self, t: f64) -> Result<(usize, f64)> {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        if t < t0 - 1e-9 || t > t1 + 1e-9 {
            return Err(Error::invalid(format!(
                "time {t} outside motion table range [{t0}, {t1}]"
            )));
        }
        let t = t.clamp(t0, t1);
        let i = match self
            .times
            .binary_search_by(|x| x.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(self.times.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.times.len() - 2),
        };
        Ok((i, (t - self.times[i]) / (self.times[i + 1] - self.times[i])))
    }

    fn eval(&self, t: f64) -> Result<[f64; 3]> {
        let (i, s) = self.segment(t)?;
        let (a, b) = (self.values[i], self.values[i + 1]);
        Ok([0, 1, 2].map(|c| a[c] * (1.0 - s) + b[c] * s))
    }

    fn deriv(&self, t: f64) -> Result<[f64; 3]> {
        let (i, _) = self.segment(t)?;
        let dt = self.times[i + 1] - self.times[i];
        let (a, b) = (self.values[i], self.values[i + 1]);
        Ok([0, 1, 2].map(|c| (b[c] - a[c]) / dt))
    }
}

impl MotionFn {
    pub fn from_exprs(sx: &str, sy: &str, sz: &str) -> Result<Self> {
        Ok(MotionFn::Exprs(Box::new([
            expr::parse(sx)?,
            expr::parse(sy)?,
            expr::parse(sz)?,
        ])))
    }

    pub fn constant(v: [f64; 3]) -> Self {
        if v == [0.0; 3] {
            return MotionFn::Zero;
        }
        MotionFn::Exprs(Box::new([Expr::Num(v[0]), Expr::Num(v[1]), Expr::Num(v[2])]))
    }

    pub fn eval(&self, t: f64) -> Result<[f64; 3]> {
        match self {
            MotionFn::Zero => Ok([0.0; 3]),
            MotionFn::Exprs(e) => Ok([e[0].eval(t), e[1].eval(t), e[2].eval(t)]),
            MotionFn::Table(tb) => tb.eval(t),
        }
    }

    pub fn deriv(&self, t: f64) -> Result<[f64; 3]> {
        match self {
            MotionFn::Zero => Ok([0.0; 3]),
            MotionFn::Exprs(e) => Ok([
                e[0].deriv().eval(t),
                e[1].deriv().eval(t),
                e[2].deriv().eval(t),
            ]),
            MotionFn::Table(tb) => tb.deriv(t),
        }
    }
}

/// Prescribed body motion together with the bounds it is assumed to satisfy.
#[derive(Debug, Clone)]
pub struct BodyMotion {
    pub eta: MotionFn,
    pub omega: MotionFn,
    /// Assumed bound on `sup_t (|eta| + |omega|)`.
    pub bound_m: f64,
    /// Hölder exponent of the prescribed velocities, in (0,1).
    pub hoelder_theta: f64,
    /// Optional decay exponent `gamma` in [1/8, 1).
    pub decay_gamma: Option<f64>,
    /// Optional decay amplitude `M`.
    pub decay_m: Option<f64>,
}

impl BodyMotion {
    pub fn resting() -> Self {
        BodyMotion {
            eta: MotionFn::Zero,
            omega: MotionFn::Zero,
            bound_m: 0.0,
            hoelder_theta: 0.5,
            decay_gamma: None,
            decay_m: None,
        }
    }

    pub fn new(eta: MotionFn, omega: MotionFn, bound_m: f64, hoelder_theta: f64) -> Result<Self> {
        if !(hoelder_theta > 0.0 && hoelder_theta < 1.0) {
            return Err(Error::invalid("hoelder_theta must lie in (0,1)"));
        }
        if !(bound_m >= 0.0) {
            return Err(Error::invalid("bound_m must be nonnegative"));
        }
        Ok(BodyMotion {
            eta,
            omega,
            bound_m,
            hoelder_theta,
            decay_gamma: None,
            decay_m: None,
        })
    }

    pub fn with_decay(mut self, gamma: f64, m: f64) -> Result<Self> {
        if !(0.125..1.0).contains(&gamma) {
            return Err(Error::invalid("decay gamma must lie in [1/8, 1)"));
        }
        if !(m >= 0.0) {
            return Err(Error::invalid("decay M must be nonnegative"));
        }
        self.decay_gamma = Some(gamma);
        self.decay_m = Some(m);
        Ok(self)
    }

    fn speeds(&self, t: f64) -> Result<(f64, f64)> {
        let e = self.eta.eval(t)?;
        let w = self.omega.eval(t)?;
        let nrm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        Ok((nrm(e), nrm(w)))
    }

    /// Checks `sup (|eta| + |omega|) <= bound_m` by dense sampling.
    pub fn check_bounds(&self, t_end: f64, samples: usize) -> Result<()> {
        for i in 0..=samples {
            let t = t_end * i as f64 / samples as f64;
            let (ne, nw) = self.speeds(t)?;
            if !(ne + nw).is_finite() {
                return Err(Error::invalid(format!("non-finite velocity at t = {t}")));
            }
            if ne + nw > self.bound_m + 1e-12 {
                return Err(Error::invalid(format!(
                    "|eta|+|omega| = {} exceeds bound_m = {} at t = {t}",
                    ne + nw,
                    self.bound_m
                )));
            }
        }
        Ok(())
    }

    /// Checks `(1+t)^γ (|eta|+|eta'|+|omega|+|omega'|) <= M` by sampling.
    pub fn check_decay(&self, t_end: f64, samples: usize) -> Result<()> {
        let (Some(gamma), Some(m)) = (self.decay_gamma, self.decay_m) else {
            return Ok(());
        };
        let nrm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        for i in 0..=samples {
            let t = t_end * i as f64 / samples as f64;
            let total = nrm(self.eta.eval(t)?)
                + nrm(self.eta.deriv(t)?)
                + nrm(self.omega.eval(t)?)
                + nrm(self.omega.deriv(t)?);
            if (1.0 + t).powf(gamma) * total > m + 1e-12 {
                return Err(Error::invalid(format!(
                    "(1+t)^γ (|η|+|η'|+|ω|+|ω'|) = {} exceeds M = {m} at t = {t}",
                    (1.0 + t).powf(gamma) * total
                )));
            }
        }
        Ok(())
    }

    /// Sampled lower bound for the Hölder seminorm over `[0, t_end]`.
    ///
    /// Takes the max of the difference quotient over pairs drawn from a
    /// dyadic set of separations; a lower bound only, the true seminorm is a
    /// sup over all pairs.
    pub fn hoelder_seminorm_estimate(&self, t_end: f64, levels: usize) -> Result<f64> {
        let mut best: f64 = 0.0;
        let nrm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        for lev in 0..levels {
            let sep = t_end / (1 << (lev + 1)) as f64;
            let steps = (1 << (lev + 1)) as usize;
            for i in 0..steps {
                let s = i as f64 * sep;
                let t = s + sep;
                if t > t_end + 1e-12 {
                    break;
                }
                let de = {
                    let a = self.eta.eval(t)?;
                    let b = self.eta.eval(s)?;
                    nrm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
                };
                let dw = {
                    let a = self.omega.eval(t)?;
                    let b = self.omega.eval(s)?;
                    nrm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
                };
                best = best.max((de + dw) / sep.powf(self.hoelder_theta));
            }
        }
        Ok(best)
    }

    /// True if the angular velocity vanishes on `[0, t_end]` (sampled).
    pub fn rotation_is_trivial(&self, t_end: f64) -> bool {
        (0..=64).all(|i| {
            let t = t_end * i as f64 / 64.0;
            self.omega
                .eval(t)
                .map(|w| w[0].abs() + w[1].abs() + w[2].abs() < 1e-14)
                .unwrap_or(false)
        })
    }
}

/// Orthogonal matrix path `Q(t)` sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct RotationFrame {
    /// Node spacing (half the requested step; midpoints are kept so that
    /// composite Simpson quadrature over the frame grid is available).
    pub dt: f64,
    /// `Q` at `t = i * dt`.
    pub q: Vec<Mat3>,
}

/// Integrates `Q' = -[omega(t)]× Q`, `Q(0) = I` up to `t_end`.
///
/// Each step multiplies by `exp(-h [omega(t_mid)]×)` (Rodrigues), so every
/// stored `Q` is orthogonal to round-off.
pub fn solve_rotation(motion: &BodyMotion, t_end: f64, dt: f64) -> Result<RotationFrame> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("solve_rotation requires dt > 0"));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::invalid("solve_rotation requires finite t_end >= 0"));
    }
    let h = dt / 2.0;
    let steps = (t_end / h).ceil() as usize + 1;
    let mut q = Vec::with_capacity(steps + 1);
    q.push(mat3::IDENTITY);
    let mut cur = mat3::IDENTITY;
    for i in 0..steps {
        let tm = (i as f64 + 0.5) * h;
        let w = motion.omega.eval(tm)?;
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite omega sample at t = {tm}")));
        }
        let step = mat3::rot_exp([-h * w[0], -h * w[1], -h * w[2]]);
        cur = mat3::mul(&step, &cur);
        q.push(cur);
    }
    Ok(RotationFrame { dt: h, q })
}

impl RotationFrame {
    pub fn t_end(&self) -> f64 {
        (self.q.len() - 1) as f64 * self.dt
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if t < -1e-9 || t > self.t_end() + 1e-9 {
            return Err(Error::invalid(format!(
                "time {t} outside sampled frame range [0, {}]",
                self.t_end()
            )));
        }
        Ok(())
    }

    /// `Q(t)` at a node of the sample grid.
    pub fn q_at(&self, t: f64) -> Result<Mat3> {
        self.check_range(t)?;
        let ratio = t / self.dt;
        let i = ratio.round() as usize;
        if (ratio - i as f64).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "time {t} not aligned with frame grid (dt = {}); use q_interp",
                self.dt
            )));
        }
        Ok(self.q[i.min(self.q.len() - 1)])
    }

    /// `Q(t)` between nodes: fractional Rodrigues step from the nearest
    /// lower node (explicitly requested interpolation).
    pub fn q_interp(&self, t: f64, motion: &BodyMotion) -> Result<Mat3> {
        self.check_range(t)?;
        let i = ((t / self.dt).floor() as usize).min(self.q.len() - 1);
        let rem = t - i as f64 * self.dt;
        if rem.abs() < 1e-12 {
            return Ok(self.q[i]);
        }
        let w = motion.omega.eval(i as f64 * self.dt + rem / 2.0)?;
        Ok(mat3::mul(
            &mat3::rot_exp([-rem * w[0], -rem * w[1], -rem * w[2]]),
            &self.q[i],
        ))
    }

    /// Two-parameter family `Φ(t,s) = Q(t) Q(s)ᵀ`.
    pub fn phi(&self, t: f64, s: f64) -> Result<Mat3> {
        let qt = self.q_at(t)?;
        let qs = self.q_at(s)?;
        Ok(mat3::mul(&qt, &mat3::transpose(&qs)))
    }

    /// Largest orthogonality defect over all stored nodes.
    pub fn max_orthogonality_defect(&self) -> f64 {
        self.q
            .iter()
            .map(mat3::orthogonality_defect)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn z_motion(a: f64) -> BodyMotion {
        BodyMotion::new(
            MotionFn::Zero,
            MotionFn::constant([0.0, 0.0, a]),
            a.abs() + 0.1,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn zero_omega_gives_identity() {
        let frame = solve_rotation(&BodyMotion::resting(), 5.0, 0.1).unwrap();
        for q in &frame.q {
            assert!(mat3::frobenius_diff(q, &mat3::IDENTITY) < 1e-15);
        }
    }

    #[test]
    fn constant_z_rotation_matches_closed_form() {
        // omega = (0,0,a): rows [[cos at, sin at, 0], [-sin at, cos at, 0], [0,0,1]].
        let a = 0.7;
        let m = z_motion(a);
        let frame = solve_rotation(&m, 3.0, 1e-3).unwrap();
        let t = 3.0;
        let q = frame.q_at(t).unwrap();
        assert_relative_eq!(q[0][0], (a * t).cos(), epsilon = 1e-9);
        assert_relative_eq!(q[0][1], (a * t).sin(), epsilon = 1e-9);
        assert_relative_eq!(q[1][0], -(a * t).sin(), epsilon = 1e-9);
        assert_relative_eq!(q[2][2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn time_varying_z_rotation_matches_integral_and_rk4_oracle() {
        // omega = (0,0,a(t)) → z-rotation by angle -∫a. Oracle: dense RK4 on
        // the vector ODE dφ/dt = -ω×φ at dt = 1e-4.
        let m = BodyMotion::new(
            MotionFn::Zero,
            MotionFn::from_exprs("0", "0", "0.4*cos(t)").unwrap(),
            1.0,
            0.5,
        )
        .unwrap();
        let t_end = 2.0;
        let frame = solve_rotation(&m, t_end, 1e-3).unwrap();
        let q = frame.q_at(t_end).unwrap();
        let angle = 0.4 * t_end.sin(); // ∫0.4 cos = 0.4 sin t
        assert_relative_eq!(q[0][0], angle.cos(), epsilon = 1e-8);
        assert_relative_eq!(q[0][1], angle.sin(), epsilon = 1e-8);

        // RK4 oracle applied to y0 = e1.
        let omega = |t: f64| [0.0, 0.0, 0.4 * (t as f64).cos()];
        let f = |t: f64, y: [f64; 3]| {
            let w = omega(t);
            let c = mat3::cross(w, y);
            [-c[0], -c[1], -c[2]]
        };
        let mut y = [1.0, 0.0, 0.0];
        let h = 1e-4;
        let steps = (t_end / h) as usize;
        for i in 0..steps {
            let t = i as f64 * h;
            let k1 = f(t, y);
            let a2 = [0, 1, 2].map(|c| y[c] + 0.5 * h * k1[c]);
            let k2 = f(t + 0.5 * h, a2);
            let a3 = [0, 1, 2].map(|c| y[c] + 0.5 * h * k2[c]);
            let k3 = f(t + 0.5 * h, a3);
            let a4 = [0, 1, 2].map(|c| y[c] + h * k3[c]);
            let k4 = f(t + h, a4);
            for c in 0..3 {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        let qy = mat3::mat_vec(&q, [1.0, 0.0, 0.0]);
        for c in 0..3 {
            assert!((qy[c] - y[c]).abs() < 1e-7, "component {c}: {} vs {}", qy[c], y[c]);
        }
    }

    #[test]
    fn orthogonality_preserved_over_long_runs() {
        let m = BodyMotion::new(
            MotionFn::Zero,
            MotionFn::from_exprs("0.3*sin(t)", "0.2", "0.1*cos(t)").unwrap(),
            1.0,
            0.5,
        )
        .unwrap();
        let frame = solve_rotation(&m, 100.0, 1e-2).unwrap();
        assert!(frame.max_orthogonality_defect() <= 1e-10);
        for q in frame.q.iter().step_by(1000) {
            assert!((mat3::det(q) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_identities() {
        let m = z_motion(0.5);
        let frame = solve_rotation(&m, 4.0, 0.01).unwrap();
        // Φ(s,s) = I.
        let p = frame.phi(1.0, 1.0).unwrap();
        assert!(mat3::frobenius_diff(&p, &mat3::IDENTITY) < 1e-14);
        // Φ(t,s)ᵀ = Φ(s,t).
        let a = frame.phi(3.0, 1.0).unwrap();
        let b = frame.phi(1.0, 3.0).unwrap();
        assert!(mat3::frobenius_diff(&mat3::transpose(&a), &b) < 1e-13);
        // Cocycle: Φ(t,τ)Φ(τ,s) = Φ(t,s) up to round-off.
        let f1 = mat3::mul(&frame.phi(3.5, 2.0).unwrap(), &frame.phi(2.0, 0.5).unwrap());
        let f2 = frame.phi(3.5, 0.5).unwrap();
        assert!(mat3::frobenius_diff(&f1, &f2) < 1e-12);
        // Constant z-rotation: Φ(t,s) is the z-rotation by -a(t-s).
        let ang: f64 = 0.5 * (3.0 - 1.0);
        let p = frame.phi(3.0, 1.0).unwrap();
        assert_relative_eq!(p[0][0], ang.cos(), epsilon = 1e-9);
        assert_relative_eq!(p[0][1], ang.sin(), epsilon = 1e-9);
    }

    #[test]
    fn phi_is_an_isometry() {
        let m = z_motion(0.9);
        let frame = solve_rotation(&m, 2.0, 0.01).unwrap();
        let p = frame.phi(1.5, 0.25).unwrap();
        let x = [0.3, -1.2, 2.0];
        let px = mat3::mat_vec(&p, x);
        let n0 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let n1 = (px[0] * px[0] + px[1] * px[1] + px[2] * px[2]).sqrt();
        assert_relative_eq!(n0, n1, epsilon = 1e-13);
    }

    #[test]
    fn invalid_input_rejected() {
        assert!(solve_rotation(&BodyMotion::resting(), 1.0, 0.0).is_err());
        assert!(solve_rotation(&BodyMotion::resting(), 1.0, -0.1).is_err());
        let m = BodyMotion::new(
            MotionFn::Zero,
            MotionFn::from_exprs("1/(0*t)", "0", "0").unwrap(),
            10.0,
            0.5,
        )
        .unwrap();
        // omega is non-finite at every sample: must error.
        assert!(solve_rotation(&m, 2.0, 0.25).is_err());
    }

    #[test]
    fn bound_and_decay_checks() {
        let m = BodyMotion::new(
            MotionFn::constant([0.3, 0.0, 0.0]),
            MotionFn::constant([0.0, 0.0, 0.2]),
            0.5,
            0.5,
        )
        .unwrap();
        assert!(m.check_bounds(10.0, 100).is_ok());
        let tight = BodyMotion::new(
            MotionFn::constant([0.4, 0.0, 0.0]),
            MotionFn::constant([0.0, 0.0, 0.2]),
            0.5,
            0.5,
        )
        .unwrap();
        assert!(tight.check_bounds(10.0, 100).is_err());

        let dec = BodyMotion::new(
            MotionFn::from_exprs("0.05*(1+t)^-0.5", "0", "0").unwrap(),
            MotionFn::Zero,
            1.0,
            0.5,
        )
        .unwrap()
        .with_decay(0.5, 0.2)
        .unwrap();
        assert!(dec.check_decay(50.0, 200).is_ok());
    }

    #[test]
    fn table_motion_interpolates() {
        let tb = MotionTable::new(
            vec![0.0, 1.0, 2.0],
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        )
        .unwrap();
        let f = MotionFn::Table(tb);
        assert_eq!(f.eval(0.5).unwrap()[0], 0.5);
        assert_eq!(f.deriv(0.25).unwrap()[0], 1.0);
        assert_eq!(f.deriv(1.5).unwrap()[0], -1.0);
        assert!(f.eval(3.0).is_err());
    }

    #[test]
    fn hoelder_estimate_is_sane() {
        // For η = (t, 0, 0) with θ = 0.5 the quotient |t-s|/|t-s|^{1/2}
        // is maximized at the largest separation: sup = sqrt(T/2) over the
        // dyadic set.
        let m = BodyMotion::new(
            MotionFn::from_exprs("t", "0", "0").unwrap(),
            MotionFn::Zero,
            100.0,
            0.5,
        )
        .unwrap();
        let est = m.hoelder_seminorm_estimate(2.0, 5).unwrap();
        assert_relative_eq!(est, 1.0, epsilon = 1e-12); // sep = 1 → 1/1^0.5
    }
}
