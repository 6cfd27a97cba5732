//! Small numeric helpers shared across modules.

/// Pairwise (cascade) summation over an index range.
///
/// Deterministic regardless of thread count and accurate to a few ulps even
/// for ~1e6 terms, which matters for the transpose/duality checks.
pub fn pairwise_sum<F: Fn(usize) -> f64 + Copy>(lo: usize, hi: usize, f: F) -> f64 {
    let n = hi - lo;
    if n <= 64 {
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        return s;
    }
    let mid = lo + n / 2;
    pairwise_sum(lo, mid, f) + pairwise_sum(mid, hi, f)
}

/// Pairwise sum of a slice.
pub fn slice_sum(v: &[f64]) -> f64 {
    pairwise_sum(0, v.len(), |i| v[i])
}

/// Geometrically spaced samples in `[a, b]`, endpoints included.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let la = a.ln();
    let lb = b.ln();
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Uniformly spaced samples in `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// `true` if every entry of `v` is finite.
pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Dense 3×3 matrix helpers used for rotation frames and resampling maps.
pub mod mat3 {
    pub type Mat3 = [[f64; 3]; 3];

    pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    pub fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        c
    }

    pub fn transpose(a: &Mat3) -> Mat3 {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = a[j][i];
            }
        }
        c
    }

    pub fn mat_vec(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
        [
            a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
            a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
            a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
        ]
    }

    /// `aᵀ v` without forming the transpose.
    pub fn mat_tvec(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
        [
            a[0][0] * v[0] + a[1][0] * v[1] + a[2][0] * v[2],
            a[0][1] * v[0] + a[1][1] * v[1] + a[2][1] * v[2],
            a[0][2] * v[0] + a[1][2] * v[1] + a[2][2] * v[2],
        ]
    }

    pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    /// Exact rotation `exp([v]×)` by the Rodrigues formula; orthogonal to
    /// round-off for any `v`.
    pub fn rot_exp(v: [f64; 3]) -> Mat3 {
        let th2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let th = th2.sqrt();
        let (a, b) = if th < 1e-4 {
            (1.0 - th2 / 6.0 + th2 * th2 / 120.0, 0.5 - th2 / 24.0 + th2 * th2 / 720.0)
        } else {
            (th.sin() / th, (1.0 - th.cos()) / th2)
        };
        let k = [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ];
        let mut r = IDENTITY;
        let k2 = mul(&k, &k);
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] += a * k[i][j] + b * k2[i][j];
            }
        }
        r
    }

    /// Frobenius distance to the identity of `a aᵀ`.
    pub fn orthogonality_defect(a: &Mat3) -> f64 {
        let aat = mul(a, &transpose(a));
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d = aat[i][j] - IDENTITY[i][j];
                s += d * d;
            }
        }
        s.sqrt()
    }

    pub fn det(a: &Mat3) -> f64 {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    pub fn frobenius_diff(a: &Mat3, b: &Mat3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d = a[i][j] - b[i][j];
                s += d * d;
            }
        }
        s.sqrt()
    }
}
