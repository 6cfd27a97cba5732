use oseen::bogovskii::BogovskiiOperator;
use oseen::field::cutoff::smoothstep;
use oseen::field::Grid;

#[test]
fn probe2() {
    let r0 = 1.0f64;
    let grid = Grid::cubic(16, 6.5 * r0).unwrap();
    let op = BogovskiiOperator::new(grid, r0).unwrap();
    let fr = move |r: f64| -> f64 {
        let b1 = (-(((r-0.8)/0.5f64).powi(2))).exp();
        let b2 = (-(((r-1.9)/0.5f64).powi(2))).exp();
        let taper = 1.0 - smoothstep((r - 2.0) / 0.5).0;
        (b1 - 1.0 * b2) * taper
    };
    // zero-mean normalization
    let quad = |g: &dyn Fn(f64) -> f64| -> f64 {
        let n = 200000; let h = 3.0 / n as f64;
        (0..n).map(|i| { let r = (i as f64 + 0.5) * h; g(r) * h }).sum::<f64>()
    };
    let m1 = quad(&|r| { let b1 = (-(((r-0.8)/0.5f64).powi(2))).exp(); let t = 1.0 - smoothstep((r - 2.0) / 0.5).0; b1 * t * r * r });
    let m2 = quad(&|r| { let b2 = (-(((r-1.9)/0.5f64).powi(2))).exp(); let t = 1.0 - smoothstep((r - 2.0) / 0.5).0; b2 * t * r * r });
    let ratio = m1 / m2;
    let f = move |p: [f64; 3]| -> f64 {
        let r = (p[0]*p[0]+p[1]*p[1]+p[2]*p[2]).sqrt();
        let b1 = (-(((r-0.8)/0.5f64).powi(2))).exp();
        let b2 = (-(((r-1.9)/0.5f64).powi(2))).exp();
        let t = 1.0 - smoothstep((r - 2.0) / 0.5).0;
        (b1 - ratio * b2) * t
    };
    let w_exact = |r: f64| -> f64 {
        let n = 4000; let h = r / n as f64;
        let int: f64 = (0..n).map(|i| { let s = (i as f64 + 0.5) * h;
            let b1 = (-(((s-0.8)/0.5f64).powi(2))).exp();
            let b2 = (-(((s-1.9)/0.5f64).powi(2))).exp();
            let t = 1.0 - smoothstep((s - 2.0) / 0.5).0;
            (b1 - ratio * b2) * t * s * s * h }).sum();
        int / (r * r)
    };
    // radial weight supported on shell [0.3, 0.9]
    for r in [0.6, 1.0, 1.5, 2.0, 2.5] {
        let x = [r * 0.36, r * 0.48, r * 0.8];
        let w = op.raw_kernel_integral(x, [0.3, 0.45, 0.75, 0.9], &f);
        let wr = (w[0]*x[0] + w[1]*x[1] + w[2]*x[2]) / r;
        println!("r={r}: W_num={wr:.6} W_exact={:.6}", w_exact(r));
    }
}
