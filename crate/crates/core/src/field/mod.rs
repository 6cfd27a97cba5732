//! Grids, sampled scalar/vector fields, Lebesgue norms and inner products.
//!
//! Fields live on a uniform periodic box centered at the origin. Quadrature
//! is the midpoint rule with equal weights `h1*h2*h3`, so every norm and
//! inner product below is the plain lattice sum scaled by the cell volume.

pub mod cutoff;
pub mod generate;
pub mod interp;
pub mod snapshot;
pub mod spectral;

use crate::error::{Error, Result};
use crate::util::{all_finite, pairwise_sum};

/// Uniform periodic grid on a box `[-L/2, L/2)^3` centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    /// Points per axis.
    pub n: [usize; 3],
    /// Box side length.
    pub len: f64,
}

impl Grid {
    pub fn new(n: [usize; 3], len: f64) -> Result<Self> {
        if n.iter().any(|&m| m < 4) || !len.is_finite() || len <= 0.0 {
            return Err(Error::invalid(format!(
                "grid must have n >= 4 per axis and positive box length, got n={n:?}, len={len}"
            )));
        }
        Ok(Grid { n, len })
    }

    pub fn cubic(n: usize, len: f64) -> Result<Self> {
        Self::new([n, n, n], len)
    }

    /// Grid spacing along `axis`.
    pub fn h(&self, axis: usize) -> f64 {
        self.len / self.n[axis] as f64
    }

    /// Cell volume `h1*h2*h3`.
    pub fn cell_volume(&self) -> f64 {
        self.h(0) * self.h(1) * self.h(2)
    }

    /// Total number of points.
    pub fn num_points(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Physical coordinate of index `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        -0.5 * self.len + i as f64 * self.h(axis)
    }

    /// Flat index of `(i, j, k)`; the x index varies fastest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    /// Position vector of a flat index.
    #[inline]
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let i = flat % self.n[0];
        let j = (flat / self.n[0]) % self.n[1];
        let k = flat / (self.n[0] * self.n[1]);
        [self.coord(0, i), self.coord(1, j), self.coord(2, k)]
    }

    /// Checks that another grid is identical (same sampling).
    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::invalid("grids do not match"));
        }
        Ok(())
    }
}

/// Scalar samples on a [`Grid`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

/// Three-component vector samples on a [`Grid`].
#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Grid,
    pub comp: [Vec<f64>; 3],
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            data: vec![0.0; grid.num_points()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        let mut out = Self::zeros(grid);
        fill_parallel(&mut out.data, &grid, |p| f(p));
        out
    }

    pub fn check_finite(&self) -> Result<()> {
        if !all_finite(&self.data) {
            return Err(Error::invalid("scalar field contains non-finite entries"));
        }
        Ok(())
    }

    /// Midpoint-rule integral over の box.
    pub fn integral(&self) -> f64 {
        let vol = self.grid.cell_volume();
        pairwise_sum(0, self.data.len(), |i| self.data[i]) * vol
    }

    /// `(∫ |f|^q)^{1/q}`; `q = inf` gives the lattice max of `|f|`.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        lq_impl(q, self.grid.cell_volume(), self.data.len(), |i| {
            self.data[i].abs()
        })
    }

    pub fn l2_inner(&self, other: &ScalarField) -> f64 {
        let vol = self.grid.cell_volume();
        pairwise_sum(0, self.data.len(), |i| self.data[i] * other.data[i]) * vol
    }
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.num_points();
        VectorField {
            grid,
            comp: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> Self {
        let mut out = Self::zeros(grid);
        let (c0, rest) = out.comp.split_at_mut(1);
        let (c1, c2) = rest.split_at_mut(1);
        fill_parallel(&mut c0[0], &grid, |p| f(p)[0]);
        fill_parallel(&mut c1[0], &grid, |p| f(p)[1]);
        fill_parallel(&mut c2[0], &grid, |p| f(p)[2]);
        out
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.comp.iter().any(|c| !all_finite(c)) {
            return Err(Error::invalid("vector field contains non-finite entries"));
        }
        Ok(())
    }

    /// Pointwise Euclidean magnitude at a flat index.
    #[inline]
    pub fn magnitude(&self, i: usize) -> f64 {
        let [a, b, c] = [self.comp[0][i], self.comp[1][i], self.comp[2][i]];
        (a * a + b * b + c * c).sqrt()
    }

    /// `(∫ |u|^q)^{1/q}` with `|u|` the pointwise Euclidean magnitude;
    /// `q = inf` gives the lattice max of `|u|`.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        lq_impl(q, self.grid.cell_volume(), self.comp[0].len(), |i| {
            self.magnitude(i)
        })
    }

    /// Discrete `L²` inner product `h³ Σ u·v`.
    pub fn l2_inner(&self, other: &VectorField) -> f64 {
        let vol = self.grid.cell_volume();
        let n = self.comp[0].len();
        pairwise_sum(0, n, |i| {
            self.comp[0][i] * other.comp[0][i]
                + self.comp[1][i] * other.comp[1][i]
                + self.comp[2][i] * other.comp[2][i]
        }) * vol
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).sqrt()
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for c in 0..3 {
            for (x, y) in self.comp[c].iter_mut().zip(&other.comp[c]) {
                *x += a * y;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in 0..3 {
            for x in self.comp[c].iter_mut() {
                *x *= a;
            }
        }
    }

    /// Maximum of `|u|` over points with `|x| >= radius`.
    pub fn max_outside_radius(&self, radius: f64) -> f64 {
        let mut m: f64 = 0.0;
        for flat in 0..self.grid.num_points() {
            let p = self.grid.point(flat);
            if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() >= radius {
                m = m.max(self.magnitude(flat));
            }
        }
        m
    }

    /// Maximum of `|u|` over the outermost layer of cells near the box faces.
    pub fn max_on_boundary_shell(&self, layers: usize) -> f64 {
        let g = self.grid;
        let mut m: f64 = 0.0;
        for flat in 0..g.num_points() {
            let i = flat % g.n[0];
            let j = (flat / g.n[0]) % g.n[1];
            let k = flat / (g.n[0] * g.n[1]);
            let near = |i: usize, n: usize| i < layers || i >= n - layers;
            if near(i, g.n[0]) || near(j, g.n[1]) || near(k, g.n[2]) {
                m = m.max(self.magnitude(flat));
            }
        }
        m
    }

    pub fn linf(&self) -> f64 {
        (0..self.comp[0].len())
            .map(|i| self.magnitude(i))
            .fold(0.0, f64::max)
    }
}

fn lq_impl(q: f64, vol: f64, n: usize, mag: impl Fn(usize) -> f64) -> Result<f64> {
    if q.is_infinite() && q > 0.0 {
        return Ok((0..n).map(&mag).fold(0.0, f64::max));
    }
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::invalid(format!("L^q norm requires q in (1, inf], got {q}")));
    }
    let s = pairwise_sum(0, n, |i| mag(i).powf(q));
    Ok((s * vol).powf(1.0 / q))
}

fn fill_parallel(data: &mut [f64], grid: &Grid, f: impl Fn([f64; 3]) -> f64 + Sync) {
    use rayon::prelude::*;
    let nx = grid.n[0];
    let g = *grid;
    data.par_chunks_mut(nx).enumerate().for_each(|(line, chunk)| {
        let j = line % g.n[1];
        let k = line / g.n[1];
        let y = g.coord(1, j);
        let z = g.coord(2, k);
        for (i, v) in chunk.iter_mut().enumerate() {
            *v = f([g.coord(0, i), y, z]);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_field_l2_norm_is_sqrt_volume() {
        let g = Grid::cubic(16, 2.0).unwrap();
        let u = VectorField::from_fn(g, |_| [1.0, 0.0, 0.0]);
        assert_relative_eq!(u.lq_norm(2.0).unwrap(), 8.0f64.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn zero_field_norms_vanish() {
        let g = Grid::cubic(8, 1.0).unwrap();
        let u = VectorField::zeros(g);
        assert_eq!(u.lq_norm(2.0).unwrap(), 0.0);
        assert_eq!(u.lq_norm(f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_l2_norm_matches_1d_quadrature_oracle() {
        // ∫ e^{-2x²} dx = sqrt(π/2), so ‖e^{-|x|²} ê₁‖₂ = (π/2)^{3/4}.
        // The oracle evaluates the 1D integral by fine trapezoid instead of
        // trusting the closed form.
        let mut oracle_1d = 0.0;
        let m = 200_000;
        let (a, b) = (-12.0, 12.0);
        let dx = (b - a) / m as f64;
        for i in 0..=m {
            let x = a + i as f64 * dx;
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            oracle_1d += w * (-2.0 * x * x).exp() * dx;
        }
        let expected = oracle_1d.powf(1.5);
        assert_relative_eq!(expected, (std::f64::consts::PI / 2.0).powf(0.75), epsilon = 1e-10);

        let g = Grid::cubic(96, 24.0).unwrap();
        let u = VectorField::from_fn(g, |p| {
            let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            [(-r2).exp(), 0.0, 0.0]
        });
        assert_relative_eq!(u.lq_norm(2.0).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn lq_rejects_bad_exponent() {
        let g = Grid::cubic(8, 1.0).unwrap();
        let u = VectorField::zeros(g);
        assert!(u.lq_norm(1.0).is_err());
        assert!(u.lq_norm(0.5).is_err());
    }

    #[test]
    fn infinity_norm_is_lattice_max() {
        let g = Grid::cubic(8, 4.0).unwrap();
        let mut u = VectorField::zeros(g);
        u.comp[1][37] = -3.5;
        assert_eq!(u.lq_norm(f64::INFINITY).unwrap(), 3.5);
    }
}
