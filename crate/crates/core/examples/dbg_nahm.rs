use ebe_core::ebe::omega_residual;
use ebe_core::field::{fnorm, Grid3, MField, Mat};
use num_complex::Complex64;

fn main() {
    for npd in [12usize, 24, 48, 96] {
        let grid = Grid3::new(8, 8, 0.05, 2.0, npd).unwrap();
        let h = MField::from_fn(&grid, |_, _, y| {
            Mat::<2>::new(
                Complex64::new(1.0 / y, 0.0), Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0), Complex64::new(y, 0.0),
            )
        });
        let e = Mat::<2>::new(
            Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0),
        );
        let phi = MField::constant(&grid, e);
        let res = omega_residual(&h, &phi, &grid).unwrap();
        let mut sup = 0.0f64; let mut argy = 0.0;
        for iy in 2..grid.ny() - 2 {
            if grid.y[iy] < 0.2 || grid.y[iy] > 1.5 { continue; }
            let i = grid.idx(0, 0, iy);
            let v = fnorm(&res.omega.data[i]);
            if v > sup { sup = v; argy = grid.y[iy]; }
        }
        println!("npd={npd:3} ny={:3} interior sup={sup:10.3e} at y={argy:8.4}", grid.ny());
    }
}
