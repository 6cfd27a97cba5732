//! Fourier-space calculus on the periodic box.
//!
//! All differential operators act through the 3D DFT with signed wavenumbers
//! `k = 2π m / L`. Odd derivative multipliers zero the Nyquist mode so that
//! derivatives of real fields stay real; even multipliers (Laplacian, heat
//! flow, projection) keep it.

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::{Grid, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::util::pairwise_sum;

pub type Spec = Vec<Complex<f64>>;

/// FFT plans and wavenumber tables for one grid.
pub struct SpectralBox {
    pub grid: Grid,
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
    /// Full signed wavenumbers per axis (Nyquist kept, as `-n/2`).
    pub k: [Vec<f64>; 3],
    /// Derivative wavenumbers per axis (Nyquist zeroed).
    pub dk: [Vec<f64>; 3],
}

/// 9-component gradient samples; `comp[j][i]` holds `∂_j u_i`.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub grid: Grid,
    pub comp: [[Vec<f64>; 3]; 3],
}

impl TensorField {
    /// `(∫ |∇u|^q)^{1/q}` with the pointwise Frobenius magnitude.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        let n = self.grid.num_points();
        let mag = |i: usize| -> f64 {
            let mut s = 0.0;
            for row in &self.comp {
                for c in row {
                    s += c[i] * c[i];
                }
            }
            s.sqrt()
        };
        if q.is_infinite() && q > 0.0 {
            return Ok((0..n).map(mag).fold(0.0, f64::max));
        }
        if !(q > 1.0) {
            return Err(Error::invalid(format!("L^q norm requires q in (1, inf], got {q}")));
        }
        let s = pairwise_sum(0, n, |i| mag(i).powf(q));
        Ok((s * self.grid.cell_volume()).powf(1.0 / q))
    }
}

impl SpectralBox {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = [
            planner.plan_fft_forward(grid.n[0]),
            planner.plan_fft_forward(grid.n[1]),
            planner.plan_fft_forward(grid.n[2]),
        ];
        let inv = [
            planner.plan_fft_inverse(grid.n[0]),
            planner.plan_fft_inverse(grid.n[1]),
            planner.plan_fft_inverse(grid.n[2]),
        ];
        let table = |axis: usize, keep_nyquist: bool| -> Vec<f64> {
            let n = grid.n[axis];
            (0..n)
                .map(|i| {
                    let m = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
                    if !keep_nyquist && n % 2 == 0 && i == n / 2 {
                        0.0
                    } else {
                        let m = if n % 2 == 0 && i == n / 2 { -(n as i64) / 2 } else { m };
                        2.0 * std::f64::consts::PI * m as f64 / grid.len
                    }
                })
                .collect()
        };
        let k = [table(0, true), table(1, true), table(2, true)];
        let dk = [table(0, false), table(1, false), table(2, false)];
        SpectralBox { grid, fwd, inv, k, dk }
    }

    fn pass(&self, data: &mut [Complex<f64>], axis: usize, forward: bool) {
        let [nx, ny, nz] = self.grid.n;
        let fft = if forward { &self.fwd[axis] } else { &self.inv[axis] };
        match axis {
            0 => {
                data.par_chunks_mut(nx).for_each_init(
                    || vec![Complex::default(); fft.get_inplace_scratch_len()],
                    |scratch, line| fft.process_with_scratch(line, scratch),
                );
            }
            1 => {
                data.par_chunks_mut(nx * ny).for_each_init(
                    || {
                        (
                            vec![Complex::default(); ny],
                            vec![Complex::default(); fft.get_inplace_scratch_len()],
                        )
                    },
                    |(line, scratch), slab| {
                        for i in 0..nx {
                            for j in 0..ny {
                                line[j] = slab[i + nx * j];
                            }
                            fft.process_with_scratch(line, scratch);
                            for j in 0..ny {
                                slab[i + nx * j] = line[j];
                            }
                        }
                    },
                );
            }
            2 => {
                // Transpose so z-lines become contiguous, transform, restore.
                let mut t = vec![Complex::default(); data.len()];
                let src = &*data;
                t.par_chunks_mut(nz).enumerate().for_each(|(l, line)| {
                    let i = l % nx;
                    let j = l / nx;
                    for (kk, v) in line.iter_mut().enumerate() {
                        *v = src[i + nx * (j + ny * kk)];
                    }
                });
                t.par_chunks_mut(nz).for_each_init(
                    || vec![Complex::default(); fft.get_inplace_scratch_len()],
                    |scratch, line| fft.process_with_scratch(line, scratch),
                );
                let tr = &t;
                data.par_chunks_mut(nx * ny).enumerate().for_each(|(kk, slab)| {
                    for j in 0..ny {
                        for i in 0..nx {
                            slab[i + nx * j] = tr[kk + nz * (i + nx * j)];
                        }
                    }
                });
            }
            _ => unreachable!(),
        }
    }

    /// Unnormalized forward 3D DFT of real samples.
    pub fn forward(&self, real: &[f64]) -> Spec {
        let mut spec: Spec = real.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.pass(&mut spec, 0, true);
        self.pass(&mut spec, 1, true);
        self.pass(&mut spec, 2, true);
        spec
    }

    /// Inverse 3D DFT, normalized by `1/N`; returns the real part.
    pub fn inverse(&self, spec: &Spec) -> Vec<f64> {
        let mut buf = spec.clone();
        self.pass(&mut buf, 0, false);
        self.pass(&mut buf, 1, false);
        self.pass(&mut buf, 2, false);
        let scale = 1.0 / self.grid.num_points() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    pub fn forward_vec(&self, u: &VectorField) -> [Spec; 3] {
        [
            self.forward(&u.comp[0]),
            self.forward(&u.comp[1]),
            self.forward(&u.comp[2]),
        ]
    }

    pub fn inverse_vec(&self, spec: &[Spec; 3]) -> VectorField {
        VectorField {
            grid: self.grid,
            comp: [
                self.inverse(&spec[0]),
                self.inverse(&spec[1]),
                self.inverse(&spec[2]),
            ],
        }
    }

    /// Applies a mode-wise map `(kx, ky, kz, idx)`.
    #[inline]
    pub fn for_each_mode(&self, mut f: impl FnMut(f64, f64, f64, usize)) {
        let [nx, ny, _nz] = self.grid.n;
        let mut idx = 0usize;
        for kz in &self.k[2] {
            for ky in &self.k[1] {
                for kx in &self.k[0] {
                    f(*kx, *ky, *kz, idx);
                    idx += 1;
                }
            }
        }
        debug_assert_eq!(idx % (nx * ny), 0);
    }

    /// Multiplies by `exp(-|k|² tau)` (heat flow over time `tau`).
    pub fn heat_multiply(&self, spec: &mut [Spec], tau: f64) {
        let ex: Vec<Vec<f64>> = (0..3)
            .map(|a| self.k[a].iter().map(|k| (-k * k * tau).exp()).collect())
            .collect();
        let [nx, ny, _] = self.grid.n;
        for s in spec.iter_mut() {
            s.par_chunks_mut(nx * ny).enumerate().for_each(|(kz, slab)| {
                let ez = ex[2][kz];
                for j in 0..ny {
                    let eyz = ez * ex[1][j];
                    let row = &mut slab[j * nx..(j + 1) * nx];
                    for (i, v) in row.iter_mut().enumerate() {
                        *v *= eyz * ex[0][i];
                    }
                }
            });
        }
    }

    /// Leray/Helmholtz projection onto divergence-free modes, in place.
    ///
    /// Uses full wavenumbers (including Nyquist) so the operator is a real
    /// symmetric idempotent; the `k = 0` mode is untouched.
    pub fn project(&self, spec: &mut [Spec; 3]) {
        let [nx, ny, _] = self.grid.n;
        let (s0, rest) = spec.split_at_mut(1);
        let (s1, s2) = rest.split_at_mut(1);
        let kx = &self.k[0];
        let ky = &self.k[1];
        let kz = &self.k[2];
        (
            s0[0].par_chunks_mut(nx * ny),
            s1[0].par_chunks_mut(nx * ny),
            s2[0].par_chunks_mut(nx * ny),
        )
            .into_par_iter()
            .enumerate()
            .for_each(|(kk, (p0, p1, p2))| {
                for j in 0..ny {
                    for i in 0..nx {
                        let idx = i + nx * j;
                        let (a, b, c) = (kx[i], ky[j], kz[kk]);
                        let k2 = a * a + b * b + c * c;
                        if k2 == 0.0 {
                            continue;
                        }
                        let (u, v, w) = (p0[idx], p1[idx], p2[idx]);
                        let kdotu = (u * a + v * b + w * c) / k2;
                        p0[idx] = u - kdotu * a;
                        p1[idx] = v - kdotu * b;
                        p2[idx] = w - kdotu * c;
                    }
                }
            });
    }

    /// Multiplies by `i * dk_axis`, in place.
    pub fn derivative_spec(&self, spec: &mut Spec, axis: usize) {
        let [nx, ny, _] = self.grid.n;
        let d = [&self.dk[0], &self.dk[1], &self.dk[2]];
        spec.par_chunks_mut(nx * ny).enumerate().for_each(|(kz, slab)| {
            for j in 0..ny {
                for i in 0..nx {
                    let kv = match axis {
                        0 => d[0][i],
                        1 => d[1][j],
                        _ => d[2][kz],
                    };
                    let v = &mut slab[i + nx * j];
                    *v = Complex::new(-v.im * kv, v.re * kv);
                }
            }
        });
    }

    /// Multiplies by `-|k|²` (Laplacian), in place.
    pub fn laplacian_spec(&self, spec: &mut Spec) {
        let [nx, ny, _] = self.grid.n;
        let kx = &self.k[0];
        let ky = &self.k[1];
        let kz = &self.k[2];
        spec.par_chunks_mut(nx * ny).enumerate().for_each(|(kk, slab)| {
            for j in 0..ny {
                for i in 0..nx {
                    let k2 = kx[i] * kx[i] + ky[j] * ky[j] + kz[kk] * kz[kk];
                    slab[i + nx * j] *= -k2;
                }
            }
        });
    }

    /// Gaussian low-pass `exp(-σ²|k|²/2)`, in place.
    pub fn gaussian_filter_spec(&self, spec: &mut [Spec], sigma: f64) {
        self.heat_multiply(spec, 0.5 * sigma * sigma);
    }

    // ---- field-level operators ----

    pub fn gradient(&self, u: &VectorField) -> TensorField {
        let spec = self.forward_vec(u);
        let mk = |j: usize, i: usize| -> Vec<f64> {
            let mut s = spec[i].clone();
            self.derivative_spec(&mut s, j);
            self.inverse(&s)
        };
        TensorField {
            grid: u.grid,
            comp: [
                [mk(0, 0), mk(0, 1), mk(0, 2)],
                [mk(1, 0), mk(1, 1), mk(1, 2)],
                [mk(2, 0), mk(2, 1), mk(2, 2)],
            ],
        }
    }

    pub fn scalar_gradient(&self, s: &ScalarField) -> VectorField {
        let spec = self.forward(&s.data);
        let mut out = VectorField::zeros(s.grid);
        for axis in 0..3 {
            let mut d = spec.clone();
            self.derivative_spec(&mut d, axis);
            out.comp[axis] = self.inverse(&d);
        }
        out
    }

    pub fn divergence(&self, u: &VectorField) -> ScalarField {
        let mut acc: Spec = vec![Complex::default(); u.grid.num_points()];
        for axis in 0..3 {
            let mut s = self.forward(&u.comp[axis]);
            self.derivative_spec(&mut s, axis);
            for (a, b) in acc.iter_mut().zip(&s) {
                *a += b;
            }
        }
        ScalarField {
            grid: u.grid,
            data: self.inverse(&acc),
        }
    }

    pub fn curl(&self, u: &VectorField) -> VectorField {
        let spec = self.forward_vec(u);
        let d = |i: usize, axis: usize| -> Spec {
            let mut s = spec[i].clone();
            self.derivative_spec(&mut s, axis);
            s
        };
        let sub = |a: Spec, b: Spec| -> Vec<f64> {
            let mut a = a;
            for (x, y) in a.iter_mut().zip(&b) {
                *x -= y;
            }
            self.inverse(&a)
        };
        VectorField {
            grid: u.grid,
            comp: [
                sub(d(2, 1), d(1, 2)),
                sub(d(0, 2), d(2, 0)),
                sub(d(1, 0), d(0, 1)),
            ],
        }
    }

    pub fn laplacian(&self, u: &VectorField) -> VectorField {
        let mut spec = self.forward_vec(u);
        for s in spec.iter_mut() {
            self.laplacian_spec(s);
        }
        self.inverse_vec(&spec)
    }

    /// Leray projection of a sampled field.
    pub fn helmholtz_project(&self, u: &VectorField) -> VectorField {
        let mut spec = self.forward_vec(u);
        self.project(&mut spec);
        self.inverse_vec(&spec)
    }

    /// Heat flow `e^{tau Δ} u`.
    pub fn heat_flow(&self, u: &VectorField, tau: f64) -> VectorField {
        let mut spec = self.forward_vec(u);
        self.heat_multiply(&mut spec, tau);
        self.inverse_vec(&spec)
    }

    /// `‖u‖₂` evaluated from spectra via Parseval (no inverse transform).
    pub fn l2_norm_from_spec(&self, spec: &[Spec; 3]) -> f64 {
        let n = self.grid.num_points() as f64;
        let vol = self.grid.cell_volume();
        let mut s = 0.0;
        for c in spec {
            s += pairwise_sum(0, c.len(), |i| c[i].norm_sqr());
        }
        (s * vol / n).sqrt()
    }

    /// `‖∇u‖₂` evaluated from spectra via Parseval.
    pub fn grad_l2_norm_from_spec(&self, spec: &[Spec; 3]) -> f64 {
        let [nx, ny, _] = self.grid.n;
        let dx = &self.dk[0];
        let dy = &self.dk[1];
        let dz = &self.dk[2];
        let n = self.grid.num_points() as f64;
        let vol = self.grid.cell_volume();
        let mut s = 0.0;
        for c in spec {
            s += pairwise_sum(0, c.len(), |idx| {
                let i = idx % nx;
                let j = (idx / nx) % ny;
                let kk = idx / (nx * ny);
                let k2 = dx[i] * dx[i] + dy[j] * dy[j] + dz[kk] * dz[kk];
                k2 * c[idx].norm_sqr()
            });
        }
        (s * vol / n).sqrt()
    }

    /// Relative solenoidality defect `‖div u‖₂ / ‖∇u‖₂` (0 for u ≡ 0).
    pub fn div_defect(&self, u: &VectorField) -> f64 {
        let div = self.divergence(u);
        let dn = ScalarField {
            grid: u.grid,
            data: div.data,
        }
        .lq_norm(2.0)
        .unwrap();
        let gn = self.gradient(u).lq_norm(2.0).unwrap();
        if gn == 0.0 {
            0.0
        } else {
            dn / gn
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn grid() -> Grid {
        Grid::cubic(24, 2.0 * std::f64::consts::PI).unwrap()
    }

    fn random_smooth(g: Grid, seed: u64) -> VectorField {
        // Band-limited random field: a handful of low modes.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::new();
        for _ in 0..12 {
            let m: [f64; 3] = [
                rng.gen_range(-3..=3i32) as f64,
                rng.gen_range(-3..=3i32) as f64,
                rng.gen_range(-3..=3i32) as f64,
            ];
            let amp: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            modes.push((m, amp, phase));
        }
        VectorField::from_fn(g, move |p| {
            let mut v = [0.0; 3];
            for (m, amp, phase) in &modes {
                let arg = m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + phase;
                let s = arg.sin();
                for c in 0..3 {
                    v[c] += amp[c] * s;
                }
            }
            v
        })
    }

    #[test]
    fn roundtrip_is_identity() {
        let g = grid();
        let sb = SpectralBox::new(g);
        let u = random_smooth(g, 1);
        let spec = sb.forward(&u.comp[0]);
        let back = sb.inverse(&spec);
        for (a, b) in u.comp[0].iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_single_mode_is_exact() {
        // d/dx sin(3x + y) = 3 cos(3x + y), to round-off.
        let g = grid();
        let sb = SpectralBox::new(g);
        let u = ScalarField::from_fn(g, |p| (3.0 * p[0] + p[1]).sin());
        let gr = sb.scalar_gradient(&u);
        let expect = ScalarField::from_fn(g, |p| 3.0 * (3.0 * p[0] + p[1]).cos());
        for (a, b) in gr.comp[0].iter().zip(&expect.data) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = grid();
        let sb = SpectralBox::new(g);
        let u = VectorField::from_fn(g, |_| [2.0, -1.0, 0.5]);
        let t = sb.gradient(&u);
        assert!(t.lq_norm(f64::INFINITY).unwrap() < 1e-12);
    }

    #[test]
    fn curl_example_sin_x2() {
        // u = (sin x₂, 0, 0) → curl u = (0, 0, -cos x₂).
        let g = grid();
        let sb = SpectralBox::new(g);
        let u = VectorField::from_fn(g, |p| [p[1].sin(), 0.0, 0.0]);
        let c = sb.curl(&u);
        let expect = VectorField::from_fn(g, |p| [0.0, 0.0, -p[1].cos()]);
        let mut diff = c.clone();
        diff.axpy(-1.0, &expect);
        assert!(diff.linf() < 1e-10);
    }

    #[test]
    fn div_of_curl_vanishes() {
        let g = grid();
        let sb = SpectralBox::new(g);
        let w = random_smooth(g, 7);
        let c = sb.curl(&w);
        let d = sb.divergence(&c);
        assert!(d.lq_norm(2.0).unwrap() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent_symmetric_contractive() {
        let g = grid();
        let sb = SpectralBox::new(g);
        let u = random_smooth(g, 3);
        let v = random_smooth(g, 4);
        let pu = sb.helmholtz_project(&u);
        let ppu = sb.helmholtz_project(&pu);
        let mut diff = ppu.clone();
        diff.axpy(-1.0, &pu);
        assert!(diff.linf() < 1e-11 * (1.0 + pu.linf()));
        // symmetry
        let pv = sb.helmholtz_project(&v);
        let lhs = pu.l2_inner(&v);
        let rhs = u.l2_inner(&pv);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-11);
        // contraction
        assert!(pu.l2_norm() <= u.l2_norm() * (1.0 + 1e-13));
    }

    #[test]
    fn projection_fixes_curls_and_kills_gradients() {
        let g = grid();
        let sb = SpectralBox::new(g);
        let w = random_smooth(g, 5);
        let c = sb.curl(&w);
        let pc = sb.helmholtz_project(&c);
        let mut diff = pc.clone();
        diff.axpy(-1.0, &c);
        assert!(diff.linf() < 1e-11 * (1.0 + c.linf()));

        let chi = ScalarField::from_fn(g, |p| (p[0].cos() * (2.0 * p[2]).sin()) + (p[1] * 2.0).cos());
        let gr = sb.scalar_gradient(&chi);
        let pg = sb.helmholtz_project(&gr);
        assert!(pg.linf() < 1e-11 * (1.0 + gr.linf()));
    }

    #[test]
    fn projected_field_orthogonal_to_gradients() {
        let g = grid();
        let sb = SpectralBox::new(g);
        let u = random_smooth(g, 11);
        let pu = sb.helmholtz_project(&u);
        let chi = ScalarField::from_fn(g, |p| (p[0] + 2.0 * p[1]).sin() * p[2].cos());
        let gchi = sb.scalar_gradient(&chi);
        let ip = pu.l2_inner(&gchi);
        assert!(ip.abs() < 1e-10 * pu.l2_norm() * gchi.l2_norm().max(1.0));
    }

    #[test]
    fn parseval_norms_match_real_space() {
        let g = grid();
        let sb = SpectralBox::new(g);
        let u = random_smooth(g, 9);
        let spec = sb.forward_vec(&u);
        assert_relative_eq!(sb.l2_norm_from_spec(&spec), u.l2_norm(), max_relative = 1e-12);
        let gr = sb.gradient(&u);
        assert_relative_eq!(
            sb.grad_l2_norm_from_spec(&spec),
            gr.lq_norm(2.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn hoelder_interpolation_inequality_discrete() {
        // ‖u‖₂ ≤ ‖u‖₆^μ ‖u‖_q^{1-μ} with 1/2 = μ/6 + (1-μ)/q holds for the
        // lattice measure as well; check with 1% slack.
        let g = grid();
        let q = 4.0 / 3.0;
        let mu = (1.0 / q - 1.0 / 2.0) / (1.0 / q - 1.0 / 6.0);
        for seed in [2u64, 8, 21] {
            let u = random_smooth(g, seed);
            let n2 = u.lq_norm(2.0).unwrap();
            let n6 = u.lq_norm(6.0).unwrap();
            let nq = u.lq_norm(q).unwrap();
            assert!(n2 <= n6.powf(mu) * nq.powf(1.0 - mu) * 1.01);
        }
    }

    #[test]
    fn heat_flow_damps_single_mode_exactly() {
        let g = grid();
        let sb = SpectralBox::new(g);
        let u = VectorField::from_fn(g, |p| [0.0, (2.0 * p[0]).sin(), 0.0]);
        let tau = 0.3;
        let v = sb.heat_flow(&u, tau);
        let factor = (-4.0 * tau).exp();
        for (a, b) in v.comp[1].iter().zip(&u.comp[1]) {
            assert!((a - b * factor).abs() < 1e-12);
        }
    }
}
