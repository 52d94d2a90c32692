//! Exact `sl(n+1)` structure data: Cartan matrix and its rational inverse,
//! Chevalley basis, the principal `sl2` triple, and the algebraic Casimir
//! operator whose spectrum produces the boundary indicial roots.
//!
//! All generators are (n+1)x(n+1) complex matrices.  Integer data (Cartan
//! matrix, commutators of Chevalley generators) is exact; the only floating
//! entries are the `sqrt(B_j)` values in the raised `sl2` generator, double
//! precision square roots of exact integers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Rational number with i64 numerator/denominator, enough for the Cartan
/// inverse at rank <= 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0);
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        let sign = if den < 0 { -1 } else { 1 };
        Rational { num: sign * num / g, den: sign * den / g }
    }

    pub fn zero() -> Self {
        Rational { num: 0, den: 1 }
    }

    pub fn add(self, o: Self) -> Self {
        Rational::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn mul_int(self, k: i64) -> Self {
        Rational::new(self.num * k, self.den)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// All `sl(n+1)` data used by the rest of the crate.
///
/// Immutable after construction; safe to share across workers.
#[derive(Debug, Clone)]
pub struct LieContext {
    /// Rank parameter; the group is SL(n+1).
    pub n: usize,
    /// Cartan matrix, exact integers.
    pub cartan: Vec<Vec<i64>>,
    /// Exact rational inverse of the Cartan matrix.
    pub cartan_inv: Vec<Vec<Rational>>,
    /// Weights `B_i = i(n+1-i)`.
    pub weights: Vec<i64>,
    /// Chevalley raising generators `E_j^+ = E_{j,j+1}`.
    pub e_plus: Vec<CMat>,
    /// Chevalley lowering generators `E_j^- = E_{j+1,j}`.
    pub e_minus: Vec<CMat>,
    /// Coroot generators `H_j = E_{jj} - E_{j+1,j+1}`.
    pub h_basis: Vec<CMat>,
    /// Principal sl2 raising element, `sum_j sqrt(B_j) E_j^+`.
    pub sl2_plus: CMat,
    /// Principal sl2 neutral element, `diag(n, n-2, ..., -n)`.
    pub sl2_zero: CMat,
    /// Principal sl2 lowering element, transpose of `sl2_plus`.
    pub sl2_minus: CMat,
}

fn zeros(dim: usize) -> CMat {
    DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0))
}

fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Build the full context for SL(n+1).
///
/// Fails for `n` outside `1..=8` (the desk-scale rank cap; the Casimir matrix
/// stays at most 80x80).
pub fn build_lie_context(n: usize) -> Result<LieContext> {
    if n == 0 || n > 8 {
        return Err(Error::Domain(format!("rank n must satisfy 1 <= n <= 8, got {n}")));
    }
    let dim = n + 1;

    let mut cartan = vec![vec![0i64; n]; n];
    for i in 0..n {
        cartan[i][i] = 2;
        if i + 1 < n {
            cartan[i][i + 1] = -1;
            cartan[i + 1][i] = -1;
        }
    }

    // Closed-form inverse A^{-1}_{ij} = min(i,j) - ij/(n+1), 1-based indices.
    let mut cartan_inv = vec![vec![Rational::zero(); n]; n];
    for i in 1..=n {
        for j in 1..=n {
            let m = i.min(j) as i64;
            cartan_inv[i - 1][j - 1] =
                Rational::new(m * (dim as i64) - (i * j) as i64, dim as i64);
        }
    }
    // Verify A * A^{-1} = I exactly in rational arithmetic.
    for i in 0..n {
        for j in 0..n {
            let mut acc = Rational::zero();
            for k in 0..n {
                acc = acc.add(cartan_inv[k][j].mul_int(cartan[i][k]));
            }
            let expect = if i == j { Rational::new(1, 1) } else { Rational::zero() };
            if acc != expect {
                return Err(Error::Consistency(format!(
                    "Cartan inverse failed exact check at ({i},{j}): {acc:?}"
                )));
            }
        }
    }

    let weights: Vec<i64> = (1..=n as i64).map(|i| i * (dim as i64 - i)).collect();
    // B_i = 2 sum_j A^{-1}_{ij}, checked exactly.
    for i in 0..n {
        let mut acc = Rational::zero();
        for j in 0..n {
            acc = acc.add(cartan_inv[i][j]);
        }
        if acc.mul_int(2) != Rational::new(weights[i], 1) {
            return Err(Error::Consistency(format!(
                "weight identity B_i = 2 sum_j A^-1_ij failed at i={i}"
            )));
        }
    }

    let one = Complex64::new(1.0, 0.0);
    let mut e_plus = Vec::with_capacity(n);
    let mut e_minus = Vec::with_capacity(n);
    let mut h_basis = Vec::with_capacity(n);
    for j in 0..n {
        let mut ep = zeros(dim);
        ep[(j, j + 1)] = one;
        let mut em = zeros(dim);
        em[(j + 1, j)] = one;
        let mut h = zeros(dim);
        h[(j, j)] = one;
        h[(j + 1, j + 1)] = -one;
        e_plus.push(ep);
        e_minus.push(em);
        h_basis.push(h);
    }

    let mut sl2_plus = zeros(dim);
    for j in 0..n {
        sl2_plus += &e_plus[j] * Complex64::new((weights[j] as f64).sqrt(), 0.0);
    }
    let sl2_minus = sl2_plus.transpose();
    let mut sl2_zero = zeros(dim);
    for i in 0..dim {
        sl2_zero[(i, i)] = Complex64::new(n as f64 - 2.0 * i as f64, 0.0);
    }

    let ctx = LieContext {
        n,
        cartan,
        cartan_inv,
        weights,
        e_plus,
        e_minus,
        h_basis,
        sl2_plus,
        sl2_zero,
        sl2_minus,
    };
    ctx.check_commutators()?;
    Ok(ctx)
}

impl LieContext {
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// Dimension of the traceless endomorphism space, `(n+1)^2 - 1`.
    pub fn adjoint_dim(&self) -> usize {
        (self.n + 1) * (self.n + 1) - 1
    }

    /// Cartan inverse entry as f64.
    pub fn cartan_inv_f64(&self, i: usize, j: usize) -> f64 {
        self.cartan_inv[i][j].as_f64()
    }

    fn check_commutators(&self) -> Result<()> {
        let n = self.n;
        let tol = 1e-12;
        for i in 0..n {
            for j in 0..n {
                // [E_i^+, E_j^-] = delta_ij H_j
                let lhs = commutator(&self.e_plus[i], &self.e_minus[j]);
                let rhs = if i == j { self.h_basis[j].clone() } else { zeros(self.dim()) };
                if (lhs.clone() - rhs).norm() > tol {
                    return Err(Error::Consistency(format!("[E{i}+,E{j}-] relation failed")));
                }
                // [H_i, H_j] = 0
                if commutator(&self.h_basis[i], &self.h_basis[j]).norm() > tol {
                    return Err(Error::Consistency(format!("[H{i},H{j}] != 0")));
                }
                // [H_i, E_j^pm] = pm A_ij E_j^pm
                let a = Complex64::new(self.cartan[i][j] as f64, 0.0);
                let lp = commutator(&self.h_basis[i], &self.e_plus[j]) - &self.e_plus[j] * a;
                let lm = commutator(&self.h_basis[i], &self.e_minus[j]) + &self.e_minus[j] * a;
                if lp.norm() > tol || lm.norm() > tol {
                    return Err(Error::Consistency(format!("[H{i},E{j}] relation failed")));
                }
            }
        }
        // Principal sl2 relations; sl2_plus has sqrt weights, scale tolerance.
        let scale = self.sl2_plus.norm().max(1.0);
        let r1 = commutator(&self.sl2_plus, &self.sl2_minus) - &self.sl2_zero;
        let r2 = commutator(&self.sl2_zero, &self.sl2_plus) - &self.sl2_plus * Complex64::new(2.0, 0.0);
        let r3 = commutator(&self.sl2_zero, &self.sl2_minus) + &self.sl2_minus * Complex64::new(2.0, 0.0);
        if r1.norm() > 1e-12 * scale * scale || r2.norm() > 1e-12 * scale || r3.norm() > 1e-12 * scale {
            return Err(Error::Consistency("principal sl2 relations failed".into()));
        }
        Ok(())
    }

    /// Orthonormal basis of the real vector space of Hermitian traceless
    /// (n+1)x(n+1) matrices, with respect to `<a,b> = Re Tr(a b^dagger)`.
    ///
    /// Order: symmetric off-diagonal pairs, antisymmetric pairs, then diagonal.
    pub fn hermitian_basis(&self) -> Vec<CMat> {
        let dim = self.dim();
        let mut basis = Vec::with_capacity(self.adjoint_dim());
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        for i in 0..dim {
            for j in (i + 1)..dim {
                let mut m = zeros(dim);
                m[(i, j)] = Complex64::new(inv_sqrt2, 0.0);
                m[(j, i)] = Complex64::new(inv_sqrt2, 0.0);
                basis.push(m);
                let mut m = zeros(dim);
                m[(i, j)] = Complex64::new(0.0, inv_sqrt2);
                m[(j, i)] = Complex64::new(0.0, -inv_sqrt2);
                basis.push(m);
            }
        }
        for k in 1..dim {
            // diag(1,...,1,-k,0,...)/sqrt(k(k+1)), traceless and unit norm
            let s = 1.0 / ((k * (k + 1)) as f64).sqrt();
            let mut m = zeros(dim);
            for i in 0..k {
                m[(i, i)] = Complex64::new(s, 0.0);
            }
            m[(k, k)] = Complex64::new(-(k as f64) * s, 0.0);
            basis.push(m);
        }
        basis
    }

    /// Apply the algebraic Casimir operator
    /// `s -> 1/2([e+,[e-,s]] + [e-,[e+,s]]) + 1/4 [e0,[e0,s]]`.
    pub fn casimir_apply(&self, s: &CMat) -> Result<CMat> {
        let dim = self.dim();
        if s.nrows() != dim || s.ncols() != dim {
            return Err(Error::Domain(format!(
                "casimir_apply: expected {dim}x{dim} matrix, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        let tr = s.trace();
        if tr.norm() > 1e-10 * s.norm().max(1.0) {
            return Err(Error::Domain(format!("casimir_apply: matrix not traceless (tr = {tr})")));
        }
        let a = commutator(&self.sl2_plus, &commutator(&self.sl2_minus, s));
        let b = commutator(&self.sl2_minus, &commutator(&self.sl2_plus, s));
        let c = commutator(&self.sl2_zero, &commutator(&self.sl2_zero, s));
        Ok((a + b) * Complex64::new(0.5, 0.0) + c * Complex64::new(0.25, 0.0))
    }

    /// Matrix of the Casimir operator in the Hermitian orthonormal basis.
    /// Real symmetric since the operator preserves Hermitian traceless
    /// matrices and is self-adjoint for the trace pairing.
    pub fn casimir_matrix(&self) -> Result<DMatrix<f64>> {
        let basis = self.hermitian_basis();
        let d = basis.len();
        let mut m = DMatrix::zeros(d, d);
        for (a, ta) in basis.iter().enumerate() {
            let ca = self.casimir_apply(ta)?;
            for (b, tb) in basis.iter().enumerate() {
                // <Cas T_a, T_b> with T_b Hermitian: Re Tr(Cas(T_a) T_b)
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..self.dim() {
                    for j in 0..self.dim() {
                        acc += ca[(i, j)] * tb[(j, i)];
                    }
                }
                m[(a, b)] = acc.re;
            }
        }
        Ok(m)
    }

    /// Eigen-decomposition of the Casimir operator on Hermitian traceless
    /// matrices: `(eigenvalues ascending, eigenvectors as columns)` in the
    /// hermitian_basis coordinates.
    pub fn casimir_eigen(&self) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let m = self.casimir_matrix()?;
        let sym = nalgebra::SymmetricEigen::new(m);
        let mut idx: Vec<usize> = (0..sym.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| sym.eigenvalues[a].partial_cmp(&sym.eigenvalues[b]).unwrap());
        let vals: Vec<f64> = idx.iter().map(|&i| sym.eigenvalues[i]).collect();
        let d = vals.len();
        let mut vecs = DMatrix::zeros(d, d);
        for (col, &i) in idx.iter().enumerate() {
            vecs.set_column(col, &sym.eigenvectors.column(i));
        }
        Ok((vals, vecs))
    }

    /// Indicial roots at the Nahm pole face, computed from the Casimir
    /// spectrum and checked against the closed form `{-n..-1, 2..n+1}`.
    ///
    /// Each eigenvalue must be within 1e-8 of `j(j+1)` for an integer
    /// `j in 1..=n`; the associated root pair is `{-j, j+1}`.
    pub fn indicial_roots(&self) -> Result<Vec<i64>> {
        let (vals, _) = self.casimir_eigen()?;
        let mut mult = vec![0usize; self.n + 1];
        for &mu in &vals {
            // solve j(j+1) = mu for integer j >= 1
            let j = (-0.5 + (0.25 + mu).sqrt()).round();
            let ok = j >= 1.0
                && j <= self.n as f64
                && (mu - j * (j + 1.0)).abs() <= 1e-8;
            if !ok {
                return Err(Error::Consistency(format!(
                    "Casimir eigenvalue {mu} is not j(j+1) for integer 1 <= j <= n"
                )));
            }
            mult[j as usize] += 1;
        }
        let mut roots = Vec::new();
        for j in 1..=self.n {
            if mult[j] != 2 * j + 1 {
                return Err(Error::Consistency(format!(
                    "Casimir eigenvalue j(j+1), j={j} has multiplicity {} != {}",
                    mult[j],
                    2 * j + 1
                )));
            }
            roots.push(-(j as i64));
            roots.push(j as i64 + 1);
        }
        roots.sort_unstable();
        let expected: Vec<i64> =
            (-(self.n as i64)..=-1).chain(2..=(self.n as i64 + 1)).collect();
        if roots != expected {
            return Err(Error::Consistency(format!(
                "indicial roots {roots:?} differ from closed form {expected:?}"
            )));
        }
        Ok(roots)
    }

    /// Serialize all context data as JSON (used by the CLI dump verb).
    pub fn to_json(&self) -> serde_json::Value {
        let mat_repr = |m: &CMat| -> Vec<Vec<[f64; 2]>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect()
        };
        serde_json::json!({
            "n": self.n,
            "cartan": self.cartan,
            "cartan_inv": self.cartan_inv.iter().map(|row| {
                row.iter().map(|r| format!("{}/{}", r.num, r.den)).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
            "weights": self.weights,
            "e_plus": self.e_plus.iter().map(&mat_repr).collect::<Vec<_>>(),
            "e_minus": self.e_minus.iter().map(&mat_repr).collect::<Vec<_>>(),
            "h_basis": self.h_basis.iter().map(&mat_repr).collect::<Vec<_>>(),
            "sl2_plus": mat_repr(&self.sl2_plus),
            "sl2_zero": mat_repr(&self.sl2_zero),
            "sl2_minus": mat_repr(&self.sl2_minus),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rand_hermitian_traceless(dim: usize, rng: &mut StdRng) -> CMat {
        let mut m = zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let h = (m.clone() + m.adjoint()) * Complex64::new(0.5, 0.0);
        let tr = h.trace() / Complex64::new(dim as f64, 0.0);
        h - CMat::identity(dim, dim) * tr
    }

    #[test]
    fn cartan_matrix_n2() {
        let ctx = build_lie_context(2).unwrap();
        assert_eq!(ctx.cartan, vec![vec![2, -1], vec![-1, 2]]);
    }

    #[test]
    fn cartan_inverse_closed_form_n3() {
        let ctx = build_lie_context(3).unwrap();
        // entry (1,2) in 1-based indexing: min(1,2) - 1*2/4 = 1/2
        assert_eq!(ctx.cartan_inv[0][1], Rational::new(1, 2));
        assert_eq!(ctx.weights, vec![3, 4, 3]);
    }

    #[test]
    fn sl2_generators_n1() {
        let ctx = build_lie_context(1).unwrap();
        assert_eq!(ctx.sl2_zero[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(ctx.sl2_zero[(1, 1)], Complex64::new(-1.0, 0.0));
        assert_eq!(ctx.sl2_plus[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(ctx.sl2_plus[(1, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rank_bounds_rejected() {
        assert!(build_lie_context(0).is_err());
        assert!(build_lie_context(9).is_err());
    }

    #[test]
    fn casimir_on_h1_sl2() {
        // adjoint representation of sl2 has Casimir eigenvalue 2
        let ctx = build_lie_context(1).unwrap();
        let out = ctx.casimir_apply(&ctx.h_basis[0]).unwrap();
        let expect = &ctx.h_basis[0] * Complex64::new(2.0, 0.0);
        assert!((out - expect).norm() < 1e-12);
    }

    #[test]
    fn casimir_linear_zero() {
        let ctx = build_lie_context(3).unwrap();
        let z = zeros(ctx.dim());
        assert!(ctx.casimir_apply(&z).unwrap().norm() == 0.0);
    }

    #[test]
    fn casimir_shape_mismatch() {
        let ctx = build_lie_context(2).unwrap();
        let bad = zeros(2);
        assert!(ctx.casimir_apply(&bad).is_err());
    }

    #[test]
    fn casimir_spectrum_sl3() {
        // eigenvalues j(j+1): 2 with multiplicity 3, 6 with multiplicity 5
        let ctx = build_lie_context(2).unwrap();
        let (vals, _) = ctx.casimir_eigen().unwrap();
        assert_eq!(vals.len(), 8);
        for (i, &v) in vals.iter().enumerate() {
            let expect = if i < 3 { 2.0 } else { 6.0 };
            assert!((v - expect).abs() < 1e-8, "eigenvalue {i} = {v}");
        }
    }

    #[test]
    fn casimir_self_adjoint_random() {
        let mut rng = StdRng::seed_from_u64(7);
        for n in 1..=4usize {
            let ctx = build_lie_context(n).unwrap();
            for _ in 0..20 {
                let a = rand_hermitian_traceless(ctx.dim(), &mut rng);
                let b = rand_hermitian_traceless(ctx.dim(), &mut rng);
                let ca = ctx.casimir_apply(&a).unwrap();
                let cb = ctx.casimir_apply(&b).unwrap();
                let lhs = (ca * b.adjoint()).trace();
                let rhs = (a * cb.adjoint()).trace();
                assert!((lhs - rhs).norm() <= 1e-10, "n={n}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn chevalley_relations_all_ranks() {
        for n in 1..=8 {
            build_lie_context(n).unwrap(); // constructor checks exact relations
        }
    }

    #[test]
    fn indicial_roots_match_closed_form() {
        let ctx = build_lie_context(1).unwrap();
        assert_eq!(ctx.indicial_roots().unwrap(), vec![-1, 2]);
        let ctx = build_lie_context(2).unwrap();
        assert_eq!(ctx.indicial_roots().unwrap(), vec![-2, -1, 2, 3]);
        let ctx = build_lie_context(3).unwrap();
        assert_eq!(ctx.indicial_roots().unwrap(), vec![-3, -2, -1, 2, 3, 4]);
    }

    #[test]
    fn hermitian_basis_orthonormal() {
        let ctx = build_lie_context(2).unwrap();
        let basis = ctx.hermitian_basis();
        assert_eq!(basis.len(), 8);
        for (a, ta) in basis.iter().enumerate() {
            assert!(ta.trace().norm() < 1e-14);
            for (b, tb) in basis.iter().enumerate() {
                let ip = (ta * tb.adjoint()).trace().re;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-13);
            }
        }
    }
}
