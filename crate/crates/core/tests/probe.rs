use oseen::bogovskii::{BogovskiiOperator, MeanPolicy};
use oseen::field::spectral::SpectralBox;
use oseen::field::cutoff::smoothstep;
use oseen::field::{Grid, VectorField};
use std::time::Instant;

fn case(n: usize) {
    let r0 = 1.0f64;
    let grid = Grid::cubic(n, 6.5 * r0).unwrap();
    let sb = SpectralBox::new(grid);
    let v = VectorField::from_fn(grid, move |p| {
        let r = (p[0]*p[0]+p[1]*p[1]+p[2]*p[2]).sqrt();
        let s = (r / r0 - 1.15) / 1.7;
        let w = if s <= 0.0 || s >= 1.0 { 0.0 } else { (smoothstep(s).0 * (1.0 - smoothstep(s).0)) * 4.0 };
        let ang = (1.3 * p[0] / r0).sin() * (0.9 * p[1] / r0).cos();
        [w * ang, -0.4 * w, 0.7 * w * (p[2] / r0).cos()]
    });
    let mut f = sb.divergence(&v);
    for flat in 0..grid.num_points() {
        let p = grid.point(flat);
        let r = (p[0]*p[0]+p[1]*p[1]+p[2]*p[2]).sqrt();
        if !(r0..=3.0*r0).contains(&r) { f.data[flat] = 0.0; }
    }
    let t0 = Instant::now();
    let op = BogovskiiOperator::new(grid, r0).unwrap();
    let t1 = Instant::now();
    let w = op.apply(&f, MeanPolicy::Subtract).unwrap();
    let t2 = Instant::now();
    let div = sb.divergence(&w);
    let mut err = 0.0; let mut base = 0.0;
    for flat in 0..grid.num_points() {
        let d = div.data[flat] - f.data[flat];
        err += d*d; base += f.data[flat]*f.data[flat];
    }
    println!("n={n}: rel={:.4}  wmax={:.2} (build {:.1}s, apply {:.1}s, M={})",
        (err/base).sqrt(), w.linf(), (t1-t0).as_secs_f64(), (t2-t1).as_secs_f64(), op.annulus_points());
}

#[test]
fn probe() {
    case(16);
    case(24);
    case(32);
    case(48);
}
