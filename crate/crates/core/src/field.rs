//! Discretized geometry and matrix calculus: the periodic-times-graded grid,
//! finite difference stencils, Hermitian matrix exponentials and the
//! `gamma(s) = (e^{ad_s}-1)/ad_s` operator function.
//!
//! Matrix-valued fields are generic over the matrix dimension `D = n+1` so the
//! per-node arithmetic stays on the stack.  Coordinates: `x2, x3` are periodic
//! with period 1 (sample counts `nx`, `nz`), `y` runs over a geometrically
//! graded mesh on `[y_min, y_max]`.

use nalgebra::{Const, OMatrix, SMatrix, SVector};
use num_complex::Complex64;

use crate::par;
use crate::{Error, Result};

pub type Mat<const D: usize> = SMatrix<Complex64, D, D>;

/// Frobenius norm.
pub fn fnorm<const D: usize>(m: &Mat<D>) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn commutator<const D: usize>(a: &Mat<D>, b: &Mat<D>) -> Mat<D> {
    a * b - b * a
}

/// The discretized domain: periodic `(x2, x3)` of period 1 and a graded
/// `y`-mesh on `[y_min, y_max]` with roughly `nodes_per_decade` geometric
/// subdivisions per decade.
#[derive(Debug, Clone)]
pub struct Grid3 {
    pub nx: usize,
    pub nz: usize,
    pub y: Vec<f64>,
    pub hx: f64,
    pub hz: f64,
    /// Trapezoid quadrature weights for the y direction.
    pub wy: Vec<f64>,
}

impl Grid3 {
    /// Geometric mesh `y_k = y_min rho^k` with the endpoint pinned to `y_max`.
    pub fn new(nx: usize, nz: usize, y_min: f64, y_max: f64, nodes_per_decade: usize) -> Result<Self> {
        if nx < 5 || nz < 5 {
            return Err(Error::Domain(format!(
                "need at least 5 nodes per periodic direction, got {nx}x{nz}"
            )));
        }
        if !(y_min > 0.0) || !(y_max > y_min) {
            return Err(Error::Domain(format!(
                "need 0 < y_min < y_max, got [{y_min}, {y_max}]"
            )));
        }
        if nodes_per_decade < 8 {
            return Err(Error::Domain(format!(
                "graded mesh needs at least 8 nodes per decade, got {nodes_per_decade}"
            )));
        }
        let decades = (y_max / y_min).log10();
        let m = (decades * nodes_per_decade as f64).ceil().max(4.0) as usize;
        let rho = (y_max / y_min).powf(1.0 / m as f64);
        let mut y = Vec::with_capacity(m + 1);
        for k in 0..=m {
            y.push(y_min * rho.powi(k as i32));
        }
        *y.last_mut().unwrap() = y_max;
        if y.len() < 5 {
            return Err(Error::Domain("fewer than 5 nodes in y direction".into()));
        }
        let wy = trapezoid_weights(&y);
        Ok(Grid3 { nx, nz, y, hx: 1.0 / nx as f64, hz: 1.0 / nz as f64, wy })
    }

    /// Same spacing ratio, extended upper end. Node set on the common range is
    /// identical, which makes truncation studies a pointwise comparison.
    pub fn extended(&self, y_max_new: f64) -> Result<Self> {
        if y_max_new <= *self.y.last().unwrap() {
            return Err(Error::Domain("extended: new y_max must exceed the old one".into()));
        }
        let rho = self.y[1] / self.y[0];
        let mut y = self.y.clone();
        let mut cur = *y.last().unwrap();
        loop {
            cur *= rho;
            if cur >= y_max_new {
                break;
            }
            y.push(cur);
        }
        y.push(y_max_new);
        let wy = trapezoid_weights(&y);
        Ok(Grid3 { nx: self.nx, nz: self.nz, y, hx: self.hx, hz: self.hz, wy })
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, ix: usize, iz: usize, iy: usize) -> usize {
        (iy * self.nz + iz) * self.nx + ix
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let ix = i % self.nx;
        let iz = (i / self.nx) % self.nz;
        let iy = i / (self.nx * self.nz);
        (ix, iz, iy)
    }

    pub fn x2(&self, ix: usize) -> f64 {
        ix as f64 * self.hx
    }

    pub fn x3(&self, iz: usize) -> f64 {
        iz as f64 * self.hz
    }

    /// Quadrature weight of node `i` for integrals over the half-cylinder.
    pub fn quad_weight(&self, i: usize) -> f64 {
        let (_, _, iy) = self.coords(i);
        self.hx * self.hz * self.wy[iy]
    }

    /// Max ratio of consecutive y spacings minus one (grading constant).
    pub fn grading_constant(&self) -> f64 {
        self.y.windows(2).map(|w| w[1] / w[0] - 1.0).fold(0.0f64, f64::max)
    }
}

fn trapezoid_weights(y: &[f64]) -> Vec<f64> {
    let m = y.len();
    let mut w = vec![0.0; m];
    for k in 0..m - 1 {
        let h = y[k + 1] - y[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w
}

/// A matrix-valued field sampled on a [`Grid3`].
#[derive(Debug, Clone)]
pub struct MField<const D: usize> {
    pub data: Vec<Mat<D>>,
}

impl<const D: usize> MField<D> {
    pub fn zeros(grid: &Grid3) -> Self {
        MField { data: vec![Mat::<D>::zeros(); grid.len()] }
    }

    pub fn constant(grid: &Grid3, m: Mat<D>) -> Self {
        MField { data: vec![m; grid.len()] }
    }

    pub fn from_fn<F>(grid: &Grid3, f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> Mat<D> + Sync,
    {
        let mut data = vec![Mat::<D>::zeros(); grid.len()];
        par::map_slots(&mut data, |i| {
            let (ix, iz, iy) = grid.coords(i);
            f(grid.x2(ix), grid.x3(iz), grid.y[iy])
        });
        MField { data }
    }

    pub fn sup_norm(&self) -> f64 {
        par::max_slots(self.data.len(), |i| fnorm(&self.data[i]))
    }

    pub fn axpy(&mut self, a: f64, x: &MField<D>) {
        let ac = Complex64::new(a, 0.0);
        par::for_each_slot(&mut self.data, |i, m| *m += x.data[i] * ac);
    }

    pub fn scale(&mut self, a: f64) {
        let ac = Complex64::new(a, 0.0);
        par::for_each_slot(&mut self.data, |_, m| *m *= ac);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PDir {
    X2,
    X3,
}

fn check_grid<const D: usize>(f: &MField<D>, grid: &Grid3) -> Result<()> {
    if f.data.len() != grid.len() {
        return Err(Error::Domain(format!(
            "field/grid mismatch: {} values on a {} node grid",
            f.data.len(),
            grid.len()
        )));
    }
    if grid.nx < 5 || grid.nz < 5 || grid.ny() < 5 {
        return Err(Error::Domain("need at least 5 nodes in every direction".into()));
    }
    Ok(())
}

fn periodic_diff<const D: usize>(f: &MField<D>, grid: &Grid3, dir: PDir) -> MField<D> {
    let (n, h) = match dir {
        PDir::X2 => (grid.nx, grid.hx),
        PDir::X3 => (grid.nz, grid.hz),
    };
    let c1 = Complex64::new(8.0 / (12.0 * h), 0.0);
    let c2 = Complex64::new(1.0 / (12.0 * h), 0.0);
    let mut out = vec![Mat::<D>::zeros(); grid.len()];
    par::map_slots(&mut out, |i| {
        let (ix, iz, iy) = grid.coords(i);
        let at = |k: i64| -> &Mat<D> {
            let kk = k.rem_euclid(n as i64) as usize;
            match dir {
                PDir::X2 => &f.data[grid.idx(kk, iz, iy)],
                PDir::X3 => &f.data[grid.idx(ix, kk, iy)],
            }
        };
        let j = match dir {
            PDir::X2 => ix as i64,
            PDir::X3 => iz as i64,
        };
        (at(j + 1) - at(j - 1)) * c1 - (at(j + 2) - at(j - 2)) * c2
    });
    MField { data: out }
}

/// 4th-order periodic derivative in `x2`.
pub fn dx2_apply<const D: usize>(f: &MField<D>, grid: &Grid3) -> Result<MField<D>> {
    check_grid(f, grid)?;
    Ok(periodic_diff(f, grid, PDir::X2))
}

/// 4th-order periodic derivative in `x3`.
pub fn dx3_apply<const D: usize>(f: &MField<D>, grid: &Grid3) -> Result<MField<D>> {
    check_grid(f, grid)?;
    Ok(periodic_diff(f, grid, PDir::X3))
}

/// `d/dz = (d/dx2 - i d/dx3)/2`.
pub fn del_apply<const D: usize>(f: &MField<D>, grid: &Grid3) -> Result<MField<D>> {
    check_grid(f, grid)?;
    let fx = periodic_diff(f, grid, PDir::X2);
    let fz = periodic_diff(f, grid, PDir::X3);
    let half = Complex64::new(0.5, 0.0);
    let mhalf_i = Complex64::new(0.0, -0.5);
    let mut out = vec![Mat::<D>::zeros(); grid.len()];
    par::map_slots(&mut out, |i| fx.data[i] * half + fz.data[i] * mhalf_i);
    Ok(MField { data: out })
}

/// `d/dzbar = (d/dx2 + i d/dx3)/2`.
pub fn dbar_apply<const D: usize>(f: &MField<D>, grid: &Grid3) -> Result<MField<D>> {
    check_grid(f, grid)?;
    let fx = periodic_diff(f, grid, PDir::X2);
    let fz = periodic_diff(f, grid, PDir::X3);
    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, 0.5);
    let mut out = vec![Mat::<D>::zeros(); grid.len()];
    par::map_slots(&mut out, |i| fx.data[i] * half + fz.data[i] * half_i);
    Ok(MField { data: out })
}

/// Coefficients of the second-order 3-point first derivative on the
/// (nonuniform) y mesh; interior nodes use the centered stencil, the two
/// endpoints the one-sided one.
pub fn dy_coeffs(y: &[f64]) -> Vec<([f64; 3], [i64; 3])> {
    let m = y.len();
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        // in each branch one coefficient is derived from the others so the
        // stencil annihilates constants exactly, not merely to rounding
        if k == 0 {
            let (h1, h2) = (y[1] - y[0], y[2] - y[1]);
            let c1 = (h1 + h2) / (h1 * h2);
            let c2 = -h1 / (h2 * (h1 + h2));
            out.push(([-(c1 + c2), c1, c2], [0, 1, 2]));
        } else if k == m - 1 {
            let (h1, h2) = (y[m - 2] - y[m - 3], y[m - 1] - y[m - 2]);
            let c0 = h2 / (h1 * (h1 + h2));
            let c1 = -(h1 + h2) / (h1 * h2);
            out.push(([c0, c1, -(c0 + c1)], [-2, -1, 0]));
        } else {
            let (a, b) = (y[k] - y[k - 1], y[k + 1] - y[k]);
            let cm = -b / (a * (a + b));
            let cp = a / (b * (a + b));
            out.push(([cm, -(cm + cp), cp], [-1, 0, 1]));
        }
    }
    out
}

/// Derivative along the graded y mesh.
///
/// Applied in difference form (coefficients hit `f_j - f_center`), so
/// constants are annihilated exactly.
pub fn dy_apply<const D: usize>(f: &MField<D>, grid: &Grid3) -> Result<MField<D>> {
    check_grid(f, grid)?;
    let coeffs = dy_coeffs(&grid.y);
    let mut out = vec![Mat::<D>::zeros(); grid.len()];
    par::map_slots(&mut out, |i| {
        let (ix, iz, iy) = grid.coords(i);
        let (c, off) = &coeffs[iy];
        let center = &f.data[i];
        let mut acc = Mat::<D>::zeros();
        for t in 0..3 {
            if off[t] == 0 {
                continue;
            }
            let j = (iy as i64 + off[t]) as usize;
            acc += (f.data[grid.idx(ix, iz, j)] - center) * Complex64::new(c[t], 0.0);
        }
        acc
    });
    Ok(MField { data: out })
}

// ---------------------------------------------------------------------------
// Hermitian functional calculus
// ---------------------------------------------------------------------------

fn hermiticity_defect<const D: usize>(s: &Mat<D>) -> f64 {
    fnorm(&(s - s.adjoint()))
}

/// Eigen-decomposition of a Hermitian matrix: `(eigenvalues, unitary)` with
/// eigenvectors in the columns of the unitary.
///
/// Routed through a dynamically sized matrix because nalgebra's symmetric
/// eigensolver is not implemented for generic `Const<D>` dimensions.
pub fn herm_eigen<const D: usize>(s: &Mat<D>) -> Result<(SVector<f64, D>, Mat<D>)> {
    if hermiticity_defect(s) > 1e-10 * (fnorm(s) + 1.0) {
        return Err(Error::Domain("herm_eigen: input is not Hermitian".into()));
    }
    let h = (s + s.adjoint()) * Complex64::new(0.5, 0.0);
    let hd = nalgebra::DMatrix::<Complex64>::from_fn(D, D, |i, j| h[(i, j)]);
    let se = nalgebra::SymmetricEigen::new(hd);
    let vals = SVector::<f64, D>::from_fn(|i, _| se.eigenvalues[i]);
    let vecs = Mat::<D>::from_fn(|i, j| se.eigenvectors[(i, j)]);
    Ok((vals, vecs))
}

/// `exp(s)` for Hermitian `s` via unitary eigen-decomposition.
/// For traceless `s` the result is unimodular to rounding.
pub fn herm_exp<const D: usize>(s: &Mat<D>) -> Result<Mat<D>> {
    let (vals, u) = herm_eigen(s)?;
    let mut d = Mat::<D>::zeros();
    for k in 0..D {
        d[(k, k)] = Complex64::new(vals[k].exp(), 0.0);
    }
    Ok(u * d * u.adjoint())
}

/// Matrix logarithm of a positive Hermitian matrix.
pub fn herm_log<const D: usize>(h: &Mat<D>) -> Result<Mat<D>> {
    let (vals, u) = herm_eigen(h)?;
    let mut d = Mat::<D>::zeros();
    for k in 0..D {
        if vals[k] <= 0.0 {
            return Err(Error::Domain("herm_log: matrix is not positive".into()));
        }
        d[(k, k)] = Complex64::new(vals[k].ln(), 0.0);
    }
    Ok(u * d * u.adjoint())
}

/// Square root of a positive semidefinite Hermitian matrix.
pub fn herm_sqrt<const D: usize>(h: &Mat<D>) -> Result<Mat<D>> {
    let (vals, u) = herm_eigen(h)?;
    let mut d = Mat::<D>::zeros();
    for k in 0..D {
        if vals[k] < -1e-14 {
            return Err(Error::Domain("herm_sqrt: matrix is not positive".into()));
        }
        d[(k, k)] = Complex64::new(vals[k].max(0.0).sqrt(), 0.0);
    }
    Ok(u * d * u.adjoint())
}

/// `(e^l - 1)/l` with the removable singularity handled by series.
fn phi1(l: f64) -> f64 {
    if l.abs() < 1e-5 {
        1.0 + l / 2.0 + l * l / 6.0
    } else {
        l.exp_m1() / l
    }
}

/// Apply the entire function `g` of `ad_s` to `a`, for Hermitian `s`:
/// in the eigenbasis of `s`, `ad_s` has eigenvalue `l_i - l_j` on `E_ij`.
fn ad_function<const D: usize, G: Fn(f64) -> f64>(s: &Mat<D>, a: &Mat<D>, g: G) -> Result<Mat<D>> {
    let (vals, u) = herm_eigen(s)?;
    let b = u.adjoint() * a * u;
    let mut c = Mat::<D>::zeros();
    for i in 0..D {
        for j in 0..D {
            c[(i, j)] = b[(i, j)] * Complex64::new(g(vals[i] - vals[j]), 0.0);
        }
    }
    Ok(u * c * u.adjoint())
}

/// `gamma(s) a = ((e^{ad_s}-1)/ad_s) a` for Hermitian `s`.
pub fn gamma_apply<const D: usize>(s: &Mat<D>, a: &Mat<D>) -> Result<Mat<D>> {
    ad_function(s, a, phi1)
}

/// `gamma(-s) a = ((1 - e^{-ad_s})/ad_s) a`.
pub fn gamma_neg_apply<const D: usize>(s: &Mat<D>, a: &Mat<D>) -> Result<Mat<D>> {
    ad_function(s, a, |l| phi1(-l))
}

/// `sqrt(gamma(-s)) a`, the `v(s)` entering the norm identity.
pub fn gamma_neg_sqrt_apply<const D: usize>(s: &Mat<D>, a: &Mat<D>) -> Result<Mat<D>> {
    ad_function(s, a, |l| phi1(-l).sqrt())
}

// ---------------------------------------------------------------------------
// Weighted norms and decay fits
// ---------------------------------------------------------------------------

/// Result of [`weighted_norms`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct WeightedNorms {
    /// `sup_nodes y^{-mu} |s|`.
    pub weighted_sup: f64,
    /// Least squares slope of `log max_x |s(., y)|` against `log y` over the
    /// fit window; `None` when the field vanishes there or fewer than two
    /// levels are usable.
    pub alpha: Option<f64>,
    /// Number of y-levels entering the fit.
    pub fit_levels: usize,
}

/// Sup of `y^{-mu}|s|` together with the fitted decay exponent of
/// `max_x |s(., y)|` over `y_lo <= y <= y_fit`.
pub fn weighted_norms<const D: usize>(
    s: &MField<D>,
    grid: &Grid3,
    mu: f64,
    y_lo: f64,
    y_fit: f64,
) -> WeightedNorms {
    let ny = grid.ny();
    let nslab = grid.nx * grid.nz;
    let mut level_max = vec![0.0f64; ny];
    par::map_slots(&mut level_max, |iy| {
        let mut m = 0.0f64;
        for off in 0..nslab {
            m = m.max(fnorm(&s.data[iy * nslab + off]));
        }
        m
    });
    let weighted_sup = level_max
        .iter()
        .zip(grid.y.iter())
        .map(|(m, y)| m * y.powf(-mu))
        .fold(0.0f64, f64::max);

    let peak = level_max.iter().fold(0.0f64, |a, &b| a.max(b));
    let floor = 1e-14 * peak.max(1e-300);
    let pts: Vec<(f64, f64)> = grid
        .y
        .iter()
        .zip(level_max.iter())
        .filter(|(y, m)| **y >= y_lo && **y <= y_fit && **m > floor)
        .map(|(y, m)| (y.ln(), m.ln()))
        .collect();
    let alpha = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() < 1e-300 {
            None
        } else {
            Some((n * sxy - sx * sy) / denom)
        }
    } else {
        None
    };
    WeightedNorms { weighted_sup, alpha, fit_levels: pts.len() }
}

/// CSV dump of one y-slice (entrywise real/imag parts).
pub fn slice_csv<const D: usize>(f: &MField<D>, grid: &Grid3, iy: usize) -> String {
    let mut out = String::from("x2,x3,y");
    for i in 0..D {
        for j in 0..D {
            out.push_str(&format!(",re_{i}{j},im_{i}{j}"));
        }
    }
    out.push('\n');
    for iz in 0..grid.nz {
        for ix in 0..grid.nx {
            let m = &f.data[grid.idx(ix, iz, iy)];
            out.push_str(&format!("{},{},{}", grid.x2(ix), grid.x3(iz), grid.y[iy]));
            for i in 0..D {
                for j in 0..D {
                    out.push_str(&format!(",{:.17e},{:.17e}", m[(i, j)].re, m[(i, j)].im));
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Convert a dynamically sized matrix (as produced by `liealg`) into the
/// statically sized type used by field computations.
pub fn to_static<const D: usize>(m: &nalgebra::DMatrix<Complex64>) -> Mat<D> {
    assert_eq!(m.nrows(), D);
    assert_eq!(m.ncols(), D);
    OMatrix::<Complex64, Const<D>, Const<D>>::from_fn(|i, j| m[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn scalar_field<const D: usize>(
        grid: &Grid3,
        f: impl Fn(f64, f64, f64) -> Complex64 + Sync,
    ) -> MField<D> {
        MField::from_fn(grid, |x2, x3, y| Mat::<D>::identity() * f(x2, x3, y))
    }

    fn rand_herm<const D: usize>(rng: &mut StdRng) -> Mat<D> {
        let mut m = Mat::<D>::zeros();
        for i in 0..D {
            for j in 0..D {
                m[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        (m + m.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn grid_grading() {
        let g = Grid3::new(8, 8, 1e-3, 8.0, 12).unwrap();
        assert!(g.grading_constant() < 0.34);
        assert!(g.y[0] == 1e-3 && *g.y.last().unwrap() == 8.0);
        let decades = (8.0f64 / 1e-3).log10();
        assert!(g.ny() as f64 >= 8.0 * decades);
    }

    #[test]
    fn grid_extension_shares_nodes() {
        let g = Grid3::new(8, 8, 8e-3, 8.0, 12).unwrap();
        let g2 = g.extended(16.0).unwrap();
        for (a, b) in g.y.iter().take(g.ny() - 1).zip(g2.y.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(*g2.y.last().unwrap(), 16.0);
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(Grid3::new(4, 8, 1e-2, 1.0, 12).is_err());
    }

    #[test]
    fn constants_annihilated_exactly() {
        let g = Grid3::new(8, 8, 1e-2, 2.0, 12).unwrap();
        let c = scalar_field::<2>(&g, |_, _, _| Complex64::new(1.5, -0.5));
        for op in [dx2_apply, dx3_apply, dy_apply, del_apply, dbar_apply] {
            let d = op(&c, &g).unwrap();
            assert_eq!(d.sup_norm(), 0.0);
        }
    }

    #[test]
    fn fourier_mode_fourth_order() {
        // f = exp(2 pi i x2): measured convergence order 4 +- 0.3
        let tau = std::f64::consts::TAU;
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for nx in [8usize, 16, 32] {
            let g = Grid3::new(nx, 5, 0.1, 1.0, 12).unwrap();
            let f = scalar_field::<2>(&g, |x2, _, _| Complex64::new(0.0, tau * x2).exp());
            let d = dx2_apply(&f, &g).unwrap();
            let exact = scalar_field::<2>(&g, |x2, _, _| {
                Complex64::new(0.0, tau) * Complex64::new(0.0, tau * x2).exp()
            });
            let mut err = 0.0f64;
            for i in 0..g.len() {
                err = err.max(fnorm(&(d.data[i] - exact.data[i])));
            }
            errs.push(err.ln());
            hs.push((1.0 / nx as f64).ln());
        }
        let slope = (errs[2] - errs[0]) / (hs[2] - hs[0]);
        assert!((slope - 4.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn graded_y_second_order() {
        // f = y^3 (the 3-point stencil is not exact on cubics): slope 2 +- 0.3
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for npd in [12usize, 24, 48] {
            let g = Grid3::new(5, 5, 1e-2, 1.0, npd).unwrap();
            let f = scalar_field::<2>(&g, |_, _, y| Complex64::new(y * y * y, 0.0));
            let d = dy_apply(&f, &g).unwrap();
            let mut err = 0.0f64;
            for iy in 1..g.ny() - 1 {
                let i = g.idx(0, 0, iy);
                let exact = 3.0 * g.y[iy] * g.y[iy];
                err = err.max((d.data[i][(0, 0)].re - exact).abs());
            }
            errs.push(err.ln());
            hs.push((1.0 / npd as f64).ln());
        }
        let slope = (errs[2] - errs[0]) / (hs[2] - hs[0]);
        assert!((slope - 2.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn y_squared_derivative_exact() {
        // the 3-point stencil reproduces quadratics up to rounding
        let g = Grid3::new(5, 5, 1e-2, 1.0, 16).unwrap();
        let f = scalar_field::<2>(&g, |_, _, y| Complex64::new(y * y, 0.0));
        let d = dy_apply(&f, &g).unwrap();
        for iy in 1..g.ny() - 1 {
            let i = g.idx(0, 0, iy);
            assert!((d.data[i][(0, 0)].re - 2.0 * g.y[iy]).abs() < 1e-10);
        }
    }

    #[test]
    fn gamma_at_zero_is_identity() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = rand_herm::<3>(&mut rng);
        let z = Mat::<3>::zeros();
        let out = gamma_apply(&z, &a).unwrap();
        assert!(fnorm(&(out - a)) < 1e-13);
    }

    #[test]
    fn gamma_fixes_its_argument() {
        // ad_s s = 0, so gamma(s) s = s and gamma(-s) s = s
        let mut rng = StdRng::seed_from_u64(4);
        let s = rand_herm::<3>(&mut rng);
        assert!(fnorm(&(gamma_apply(&s, &s).unwrap() - s)) < 1e-12);
        assert!(fnorm(&(gamma_neg_apply(&s, &s).unwrap() - s)) < 1e-12);
    }

    #[test]
    fn exponential_derivative_matches_finite_difference() {
        // d/du e^{s+us'}|_0 = e^s gamma(-s) s'
        let mut rng = StdRng::seed_from_u64(5);
        let s = rand_herm::<3>(&mut rng);
        let sp = rand_herm::<3>(&mut rng);
        let u = 1e-6;
        let ep = herm_exp(&(s + sp * Complex64::new(u, 0.0))).unwrap();
        let em = herm_exp(&(s - sp * Complex64::new(u, 0.0))).unwrap();
        let fd = (ep - em) * Complex64::new(0.5 / u, 0.0);
        let formula = herm_exp(&s).unwrap() * gamma_neg_apply(&s, &sp).unwrap();
        let rel = fnorm(&(fd - formula)) / fnorm(&formula);
        assert!(rel < 1e-6, "rel err {rel}");
    }

    #[test]
    fn herm_exp_inverse() {
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..20 {
            let s = rand_herm::<4>(&mut rng);
            let e = herm_exp(&s).unwrap();
            let ei = herm_exp(&(-s)).unwrap();
            assert!(fnorm(&(e * ei - Mat::<4>::identity())) < 1e-12);
        }
    }

    #[test]
    fn det_of_exp_traceless_is_one() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut s = rand_herm::<3>(&mut rng);
        let tr = s.trace() / Complex64::new(3.0, 0.0);
        s -= Mat::<3>::identity() * tr;
        let e = herm_exp(&s).unwrap();
        assert!((e.determinant() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = Mat::<2>::zeros();
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(herm_exp(&m).is_err());
    }

    #[test]
    fn gamma_neg_positive_semidefinite() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..50 {
            let s = rand_herm::<3>(&mut rng);
            let mut a = Mat::<3>::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    a[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            let ga = gamma_neg_apply(&s, &a).unwrap();
            let ip = (ga * a.adjoint()).trace().re;
            assert!(ip >= -1e-12, "ip {ip}");
        }
    }

    #[test]
    fn decay_fit_synthetic_fields() {
        let g = Grid3::new(5, 5, 1e-3, 1.0, 16).unwrap();
        let m0 = Mat::<2>::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.2, 0.1),
            Complex64::new(0.2, -0.1),
            Complex64::new(-1.0, 0.0),
        );
        let f = MField::from_fn(&g, |_, _, y| m0 * Complex64::new(y, 0.0));
        let wn = weighted_norms(&f, &g, 0.0, 0.0, 1.0);
        assert!((wn.alpha.unwrap() - 1.0).abs() < 0.05);
        let f15 = MField::from_fn(&g, |_, _, y| m0 * Complex64::new(y.powf(1.5), 0.0));
        let wn = weighted_norms(&f15, &g, 0.0, 0.0, 1.0);
        assert!((wn.alpha.unwrap() - 1.5).abs() < 0.05);
        // sup of y^{-1}|s| for |s| = |m0| y is |m0|
        let wn = weighted_norms(&f, &g, 1.0, 0.0, 1.0);
        assert!((wn.weighted_sup - fnorm(&m0)).abs() < 1e-10);
    }

    #[test]
    fn decay_fit_zero_field_reports_none() {
        let g = Grid3::new(5, 5, 1e-3, 1.0, 16).unwrap();
        let f = MField::<2>::zeros(&g);
        let wn = weighted_norms(&f, &g, 0.0, 0.0, 1.0);
        assert_eq!(wn.weighted_sup, 0.0);
        assert!(wn.alpha.is_none());
    }

    #[test]
    fn stencils_linear_to_machine_precision() {
        let g = Grid3::new(8, 8, 1e-2, 2.0, 12).unwrap();
        let tau = std::f64::consts::TAU;
        let f1 = scalar_field::<2>(&g, |x2, x3, y| {
            Complex64::new((tau * x2).sin(), y * (tau * x3).cos())
        });
        let f2 = scalar_field::<2>(&g, |x2, _, y| Complex64::new(y * (tau * x2).cos(), 1.0));
        for op in [dx2_apply, dx3_apply, dy_apply] {
            let mut sum = f1.clone();
            sum.axpy(2.5, &f2);
            let lhs = op(&sum, &g).unwrap();
            let mut rhs = op(&f1, &g).unwrap();
            rhs.axpy(2.5, &op(&f2, &g).unwrap());
            let mut err = 0.0f64;
            for i in 0..g.len() {
                err = err.max(fnorm(&(lhs.data[i] - rhs.data[i])));
            }
            assert!(err < 1e-12, "linearity defect {err}");
        }
    }
}
