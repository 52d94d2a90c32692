use ebe_core::ebe::*;
use ebe_core::field::*;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn rand_herm_traceless(rng: &mut StdRng) -> Mat<2> {
    let mut m = Mat::<2>::zeros();
    for i in 0..2 { for j in 0..2 {
        m[(i,j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }}
    let mut h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = h.trace() / Complex64::new(2.0, 0.0);
    for i in 0..2 { h[(i,i)] -= tr; }
    h
}

fn main() {
    for level in 0..4usize {
        let npd = 12 << level;
        let grid = Grid3::new(8, 8, 0.25, 2.5, npd).unwrap();
        let h0 = MField::from_fn(&grid, |_, _, y| Mat::<2>::new(
            Complex64::new(1.0/y, 0.0), Complex64::new(0.0,0.0),
            Complex64::new(0.0,0.0), Complex64::new(y,0.0)));
        let frame = CorrectionFrame::new(&h0, &grid).unwrap();
        let mut rng = StdRng::seed_from_u64(12);
        let m0 = rand_herm_traceless(&mut rng);
        let m1 = rand_herm_traceless(&mut rng);
        let (ylo, yhi) = (grid.y[0], *grid.y.last().unwrap());
        let tau = std::f64::consts::TAU;
        let u = MField::from_fn(&grid, |x2, x3, y| {
            let t = (y - ylo) / (yhi - ylo);
            let bump = (t * (1.0 - t) * 4.0).powi(2);
            (m0 * Complex64::new((tau * x2).cos(), 0.0)
                + m1 * Complex64::new((tau * x3).sin() * (tau * x2).sin(), 0.0))
                * Complex64::new(0.1 * bump, 0.0)
        });
        let mut s = MField::<2>::zeros(&grid);
        for i in 0..grid.len() { s.data[i] = frame.from_plain(i, &u.data[i]); }
        let e = Mat::<2>::new(Complex64::new(0.0,0.0), Complex64::new(1.0,0.0),
                              Complex64::new(0.0,0.0), Complex64::new(0.0,0.0));
        let phi = MField::constant(&grid, e);
        let rep = expansion_identity_check(&h0, &s, &phi, &grid).unwrap();
        println!("level {level}: npd={npd} wsup={:.4e} sup={:.4e}", rep.weighted_sup_difference, rep.sup_difference);
    }
}
