//! Slope fits and decay reports shared by the experiment modules.

use crate::error::{Error, Result};

/// Outcome of comparing a fitted slope with its reference value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Fit quality too poor to judge (R² below 0.98).
    LowConfidence,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "fail"),
            Verdict::LowConfidence => write!(f, "low-confidence"),
        }
    }
}

/// Least-squares power-law fit `value ~ C * t^slope` over a window.
#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub theory_slope: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Fits `log value` against `log t` over `window` and compares the slope
/// with `theory` at absolute tolerance `tol`.
///
/// Requires at least 4 strictly positive points inside the window. The
/// verdict is `LowConfidence` when R² < 0.98, regardless of the slope.
pub fn fit_slope(
    points: &[(f64, f64)],
    window: (f64, f64),
    theory: f64,
    tol: f64,
) -> Result<SlopeFit> {
    let sel: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 - 1e-12 && *t <= window.1 + 1e-12)
        .collect();
    if sel.len() < 4 {
        return Err(Error::invalid(format!(
            "slope fit needs >= 4 points in window [{}, {}], got {}",
            window.0,
            window.1,
            sel.len()
        )));
    }
    if sel.iter().any(|(t, v)| *t <= 0.0 || *v <= 0.0 || !v.is_finite()) {
        return Err(Error::invalid("slope fit needs positive finite samples"));
    }
    let n = sel.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (t, v) in &sel {
        let (x, y) = (t.ln(), v.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::invalid("slope fit window has no time spread"));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let ss_tot = syy - sy * sy / n;
    let ss_res: f64 = sel
        .iter()
        .map(|(t, v)| {
            let e = v.ln() - (intercept + slope * t.ln());
            e * e
        })
        .sum();
    let r_squared = if ss_tot <= 1e-300 {
        // Constant series: perfect fit of slope 0.
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    let verdict = if r_squared < 0.98 {
        Verdict::LowConfidence
    } else if (slope - theory).abs() <= tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(SlopeFit {
        window,
        slope,
        intercept,
        r_squared,
        theory_slope: theory,
        tolerance: tol,
        verdict,
    })
}

/// Measured decay of one norm family `‖∇^j u(t)‖_r` for data in `L^q`.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub q: f64,
    pub r: f64,
    pub deriv_order: usize,
    /// Elapsed times `t - s`.
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Boundary contamination (face-shell max over global max) per time.
    pub contamination: Vec<f64>,
    pub contamination_tol: f64,
    pub fit: SlopeFit,
}

impl DecayReport {
    /// Portion of the time axis where contamination stayed below tolerance.
    pub fn valid_window(&self) -> (f64, f64) {
        let mut hi = *self.times.last().unwrap_or(&0.0);
        for (t, c) in self.times.iter().zip(&self.contamination) {
            if *c > self.contamination_tol {
                hi = *t;
                break;
            }
        }
        (self.times.first().copied().unwrap_or(0.0), hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_law_recovered() {
        let pts: Vec<(f64, f64)> = (1..=20).map(|i| (i as f64, (i as f64).powf(-0.75))).collect();
        let fit = fit_slope(&pts, (1.0, 20.0), -0.75, 0.05).unwrap();
        assert_relative_eq!(fit.slope, -0.75, epsilon = 1e-12);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert_eq!(fit.verdict, Verdict::Pass);
    }

    #[test]
    fn noisy_power_law_within_tolerance() {
        // 5 t^{-3/8} with 1% deterministic perturbation.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let pts: Vec<(f64, f64)> = (0..24)
            .map(|i| {
                let t = 2.0 * 1.25f64.powi(i);
                let noise: f64 = 1.0 + 0.01 * rng.gen_range(-1.0..1.0);
                (t, 5.0 * t.powf(-0.375) * noise)
            })
            .collect();
        let fit = fit_slope(&pts, (2.0, 500.0), -0.375, 0.02).unwrap();
        assert!((fit.slope + 0.375).abs() < 0.02, "slope {}", fit.slope);
        assert_eq!(fit.verdict, Verdict::Pass);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let pts: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64, 3.0)).collect();
        let fit = fit_slope(&pts, (1.0, 10.0), 0.0, 0.01).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.verdict, Verdict::Pass);
    }

    #[test]
    fn rejects_nonpositive_and_short_input() {
        let pts = vec![(1.0, 1.0), (2.0, 0.5), (3.0, -0.1), (4.0, 0.2)];
        assert!(fit_slope(&pts, (1.0, 4.0), 0.0, 0.1).is_err());
        let short = vec![(1.0, 1.0), (2.0, 0.5), (3.0, 0.3)];
        assert!(fit_slope(&short, (1.0, 3.0), 0.0, 0.1).is_err());
    }
}
