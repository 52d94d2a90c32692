//! Holomorphic data: Higgs fields on the periodic chart, the
//! characteristic-polynomial fibration, divisor extraction from wedge
//! degenerations, and canonical frame reduction for truncated power series.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::liealg::CMat;
use crate::{Error, Result};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

// ---------------------------------------------------------------------------
// Truncated power series
// ---------------------------------------------------------------------------

/// Power series in `z` truncated at order `trunc` (coefficients `0..trunc`).
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<Complex64>,
    pub trunc: usize,
}

impl Poly {
    pub fn zero(trunc: usize) -> Self {
        Poly { coeffs: vec![C0; trunc], trunc }
    }

    pub fn constant(c: Complex64, trunc: usize) -> Self {
        let mut p = Poly::zero(trunc);
        p.coeffs[0] = c;
        p
    }

    /// `z^k`.
    pub fn monomial(k: usize, trunc: usize) -> Self {
        let mut p = Poly::zero(trunc);
        if k < trunc {
            p.coeffs[k] = C1;
        }
        p
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>, trunc: usize) -> Self {
        let mut c = coeffs;
        c.resize(trunc, C0);
        Poly { coeffs: c, trunc }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let trunc = self.trunc.min(o.trunc);
        let mut p = Poly::zero(trunc);
        for k in 0..trunc {
            p.coeffs[k] = self.coeffs[k] + o.coeffs[k];
        }
        p
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let trunc = self.trunc.min(o.trunc);
        let mut p = Poly::zero(trunc);
        for k in 0..trunc {
            p.coeffs[k] = self.coeffs[k] - o.coeffs[k];
        }
        p
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let trunc = self.trunc.min(o.trunc);
        let mut p = Poly::zero(trunc);
        for i in 0..trunc {
            if self.coeffs[i] == C0 {
                continue;
            }
            for j in 0..trunc - i {
                p.coeffs[i + j] += self.coeffs[i] * o.coeffs[j];
            }
        }
        p
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|a| a * c).collect(), trunc: self.trunc }
    }

    /// Divide by `z^k`; the dropped low coefficients must vanish.
    pub fn shift_down(&self, k: usize) -> Result<Poly> {
        let scale = self.max_abs().max(1e-300);
        for j in 0..k.min(self.trunc) {
            if self.coeffs[j].norm() > 1e-9 * scale {
                return Err(Error::Domain(format!(
                    "shift_down: coefficient {j} is nonzero, cannot divide by z^{k}"
                )));
            }
        }
        let mut p = Poly::zero(self.trunc);
        for j in k..self.trunc {
            p.coeffs[j - k] = self.coeffs[j];
        }
        p.trunc = self.trunc; // caller keeps track: top k coefficients are unknown
        Ok(p)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Vanishing order at `z = 0`: first index with a coefficient above the
    /// relative threshold. `None` when the series is zero to truncation order.
    pub fn vanishing_order(&self) -> Option<usize> {
        let scale = self.max_abs();
        if scale == 0.0 {
            return None;
        }
        self.coeffs.iter().position(|c| c.norm() > 1e-9 * scale)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = C0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Multiplicative inverse; requires a unit constant term.
    pub fn inverse(&self) -> Result<Poly> {
        if self.coeffs[0].norm() < 1e-12 * self.max_abs().max(1.0) {
            return Err(Error::Domain("series inverse needs a unit constant term".into()));
        }
        let mut inv = Poly::zero(self.trunc);
        inv.coeffs[0] = C1 / self.coeffs[0];
        for k in 1..self.trunc {
            let mut acc = C0;
            for j in 1..=k {
                acc += self.coeffs[j] * inv.coeffs[k - j];
            }
            inv.coeffs[k] = -acc / self.coeffs[0];
        }
        Ok(inv)
    }
}

/// Matrix of truncated power series.
#[derive(Debug, Clone)]
pub struct PolyMatrix {
    pub dim: usize,
    pub trunc: usize,
    /// Row-major entries.
    pub entries: Vec<Poly>,
}

/// Column vector of truncated power series.
#[derive(Debug, Clone)]
pub struct PolyVec {
    pub dim: usize,
    pub trunc: usize,
    pub entries: Vec<Poly>,
}

impl PolyMatrix {
    pub fn zeros(dim: usize, trunc: usize) -> Self {
        PolyMatrix { dim, trunc, entries: vec![Poly::zero(trunc); dim * dim] }
    }

    pub fn identity(dim: usize, trunc: usize) -> Self {
        let mut m = PolyMatrix::zeros(dim, trunc);
        for i in 0..dim {
            *m.at_mut(i, i) = Poly::constant(C1, trunc);
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.dim + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Poly {
        &mut self.entries[i * self.dim + j]
    }

    pub fn matmul(&self, o: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.dim, o.dim);
        let trunc = self.trunc.min(o.trunc);
        let mut m = PolyMatrix::zeros(self.dim, trunc);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut acc = Poly::zero(trunc);
                for k in 0..self.dim {
                    acc = acc.add(&self.at(i, k).mul(o.at(k, j)));
                }
                *m.at_mut(i, j) = acc;
            }
        }
        m
    }

    pub fn apply(&self, v: &PolyVec) -> PolyVec {
        assert_eq!(self.dim, v.dim);
        let trunc = self.trunc.min(v.trunc);
        let mut out = PolyVec { dim: self.dim, trunc, entries: vec![Poly::zero(trunc); self.dim] };
        for i in 0..self.dim {
            let mut acc = Poly::zero(trunc);
            for k in 0..self.dim {
                acc = acc.add(&self.at(i, k).mul(&v.entries[k]));
            }
            out.entries[i] = acc;
        }
        out
    }

    /// Constant term as a numeric matrix.
    pub fn constant_term(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.at(i, j).coeffs[0])
    }

    /// Series inverse; requires an invertible constant term.
    pub fn inverse(&self) -> Result<PolyMatrix> {
        let a0 = self.constant_term();
        let a0_inv = a0
            .try_inverse()
            .ok_or_else(|| Error::Domain("poly matrix inverse: constant term singular".into()))?;
        // X_m = -A0^{-1} sum_{l=1..m} A_l X_{m-l}, X_0 = A0^{-1}
        let d = self.dim;
        let t = self.trunc;
        let mut x = vec![DMatrix::<Complex64>::zeros(d, d); t];
        x[0] = a0_inv.clone();
        for m in 1..t {
            let mut acc = DMatrix::<Complex64>::zeros(d, d);
            for l in 1..=m {
                let al = DMatrix::from_fn(d, d, |i, j| self.at(i, j).coeffs[l]);
                acc += al * &x[m - l];
            }
            x[m] = -&a0_inv * acc;
        }
        let mut out = PolyMatrix::zeros(d, t);
        for i in 0..d {
            for j in 0..d {
                let mut p = Poly::zero(t);
                for (m, xm) in x.iter().enumerate() {
                    p.coeffs[m] = xm[(i, j)];
                }
                *out.at_mut(i, j) = p;
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|p| p.max_abs()).fold(0.0, f64::max)
    }
}

impl PolyVec {
    pub fn basis(dim: usize, idx: usize, trunc: usize) -> Self {
        let mut v = PolyVec { dim, trunc, entries: vec![Poly::zero(trunc); dim] };
        v.entries[idx] = Poly::constant(C1, trunc);
        v
    }
}

// ---------------------------------------------------------------------------
// Higgs data on the periodic chart
// ---------------------------------------------------------------------------

/// Trigonometric polynomial on the periodic chart:
/// `q(x2,x3) = c0 + sum_m c_m exp(2 pi i (k2 x2 + k3 x3))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub c0: Complex64,
    pub modes: Vec<(i32, i32, Complex64)>,
}

impl TrigPoly {
    pub fn constant(c: Complex64) -> Self {
        TrigPoly { c0: c, modes: Vec::new() }
    }

    pub fn eval(&self, x2: f64, x3: f64) -> Complex64 {
        let mut acc = self.c0;
        for &(k2, k3, c) in &self.modes {
            let phase = std::f64::consts::TAU * (k2 as f64 * x2 + k3 as f64 * x3);
            acc += c * Complex64::new(0.0, phase).exp();
        }
        acc
    }

    /// Sup of `|dq/dzbar|`: each mode contributes `|c| pi |k2 + i k3|`.
    pub fn dbar_sup(&self) -> f64 {
        self.modes
            .iter()
            .map(|&(k2, k3, c)| {
                c.norm() * std::f64::consts::PI * ((k2 as f64).hypot(k3 as f64))
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiggsKind {
    HitchinSection,
    KnotLocal,
    Explicit,
}

/// Higgs field data on the chart.
///
/// For `HitchinSection`: `sqrt(B_i)` on the superdiagonal and
/// `(q_{n+1}, q_n, ..., q_2, 0)` in the bottom row.  For `KnotLocal`: the
/// superdiagonal carries `w(z)^{r_i}` where `w` is the periodized radial
/// profile around the marked point (the local model has `z^{r_i}` exactly;
/// only the modulus enters the metric equation, and the modulus is the only
/// part of `z^{r}` that extends periodically).
#[derive(Debug, Clone)]
pub struct HiggsData {
    pub n: usize,
    pub kind: HiggsKind,
    pub q_coeffs: Vec<TrigPoly>,
    pub knot_weights: Vec<u32>,
    pub position: (f64, f64),
    /// For `Explicit`: a fixed matrix sample.
    pub explicit: Option<DMatrix<Complex64>>,
}

/// `B_i = i(n+1-i)`.
fn b_weight(n: usize, i: usize) -> f64 {
    (i as f64) * ((n + 1 - i) as f64)
}

/// Periodized squared distance to the marked point:
/// `rho^2 = (sin^2(pi d2) + sin^2(pi d3)) / pi^2`, smooth, period 1 in both
/// coordinates, `~ |z - p|^2` near the point and vanishing only there.
pub fn periodized_r2(x2: f64, x3: f64, p: (f64, f64)) -> f64 {
    let pi = std::f64::consts::PI;
    let a = (pi * (x2 - p.0)).sin();
    let b = (pi * (x3 - p.1)).sin();
    (a * a + b * b) / (pi * pi)
}

impl HiggsData {
    /// Hitchin-section field; needs exactly `n` coefficient functions
    /// `q_2 .. q_{n+1}`.
    pub fn hitchin_section(n: usize, q_coeffs: Vec<TrigPoly>) -> Result<Self> {
        if q_coeffs.len() != n {
            return Err(Error::Domain(format!(
                "hitchin section at rank {n} needs exactly {n} coefficients q_2..q_{}, got {}",
                n + 1,
                q_coeffs.len()
            )));
        }
        Ok(HiggsData {
            n,
            kind: HiggsKind::HitchinSection,
            q_coeffs,
            knot_weights: Vec::new(),
            position: (0.0, 0.0),
            explicit: None,
        })
    }

    /// Knot-local field with a single marked point.
    pub fn knot_local(n: usize, weights: Vec<u32>, position: (f64, f64)) -> Result<Self> {
        if weights.len() != n {
            return Err(Error::Domain(format!("need {n} knot weights, got {}", weights.len())));
        }
        Ok(HiggsData {
            n,
            kind: HiggsKind::KnotLocal,
            q_coeffs: Vec::new(),
            knot_weights: weights,
            position,
            explicit: None,
        })
    }

    pub fn explicit(m: DMatrix<Complex64>) -> Self {
        let n = m.nrows() - 1;
        HiggsData {
            n,
            kind: HiggsKind::Explicit,
            q_coeffs: Vec::new(),
            knot_weights: Vec::new(),
            position: (0.0, 0.0),
            explicit: Some(m),
        }
    }

    /// Evaluate the field matrix at a chart point.
    pub fn eval(&self, x2: f64, x3: f64) -> DMatrix<Complex64> {
        let dim = self.n + 1;
        match self.kind {
            HiggsKind::Explicit => self.explicit.clone().unwrap(),
            HiggsKind::HitchinSection => {
                let mut m = DMatrix::from_element(dim, dim, C0);
                for i in 1..=self.n {
                    m[(i - 1, i)] = Complex64::new(b_weight(self.n, i).sqrt(), 0.0);
                }
                // bottom row (q_{n+1}, q_n, ..., q_2, 0)
                for j in 0..self.n {
                    m[(self.n, j)] = self.q_coeffs[self.n - 1 - j].eval(x2, x3);
                }
                m
            }
            HiggsKind::KnotLocal => {
                let rho = periodized_r2(x2, x3, self.position).sqrt();
                let mut m = DMatrix::from_element(dim, dim, C0);
                for i in 1..=self.n {
                    m[(i - 1, i)] = Complex64::new(rho.powi(self.knot_weights[i - 1] as i32), 0.0);
                }
                m
            }
        }
    }

    /// Analytic sup of `|dbar phi|` (zero for knot-free constant data).
    pub fn dbar_sup(&self) -> f64 {
        match self.kind {
            HiggsKind::HitchinSection => self.q_coeffs.iter().map(|q| q.dbar_sup()).sum(),
            HiggsKind::Explicit => 0.0,
            // the periodized modulus is not holomorphic; report the scale of
            // its dbar away from the knot so callers can gate on it
            HiggsKind::KnotLocal => {
                if self.knot_weights.iter().all(|&r| r == 0) {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Hitchin fibration
// ---------------------------------------------------------------------------

/// Characteristic-polynomial coefficients `(p_2, ..., p_{n+1})` with the
/// convention `det(lambda - phi) = sum_j lambda^{n+1-j} (-1)^j p_j`.
/// `p_1 = tr(phi)` must vanish and is checked, not returned.
pub fn hitchin_fibration(phi: &CMat) -> Result<Vec<Complex64>> {
    let dim = phi.nrows();
    if dim != phi.ncols() || dim < 2 {
        return Err(Error::Domain("hitchin_fibration: need a square matrix of size >= 2".into()));
    }
    let scale = phi.norm().max(1e-300);
    if phi.trace().norm() > 1e-10 * scale {
        return Err(Error::Domain(format!(
            "hitchin_fibration: trace {} is not zero relative to |phi| = {scale}",
            phi.trace()
        )));
    }
    // Faddeev-LeVerrier: det(lambda I - A) = lambda^N + c_1 lambda^{N-1} + ... + c_N
    let mut m = DMatrix::<Complex64>::identity(dim, dim);
    let mut cs = Vec::with_capacity(dim);
    for k in 1..=dim {
        let am = phi * m;
        let ck = -am.trace() / Complex64::new(k as f64, 0.0);
        m = am + DMatrix::<Complex64>::identity(dim, dim) * ck;
        cs.push(ck);
    }
    // p_j = (-1)^j c_j ; skip p_1
    Ok(cs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(idx, c)| {
            let j = idx + 1;
            if j % 2 == 0 {
                *c
            } else {
                -*c
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Divisor orders from wedge degenerations
// ---------------------------------------------------------------------------

/// Knot-local model matrix: `z^{r_i}` on the superdiagonal, zero elsewhere.
pub fn knot_local_polymatrix(n: usize, weights: &[u32], trunc: usize) -> PolyMatrix {
    let mut m = PolyMatrix::zeros(n + 1, trunc);
    for i in 0..n {
        *m.at_mut(i, i + 1) = Poly::monomial(weights[i] as usize, trunc);
    }
    m
}

/// The distinguished initial line for superdiagonal conventions: the last
/// basis vector, whose iterates climb the flag.
pub fn vanishing_line(dim: usize, trunc: usize) -> PolyVec {
    PolyVec::basis(dim, dim - 1, trunc)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DivisorReport {
    /// `Z(f_1), ..., Z(f_n)`: vanishing orders of the wedge maps.
    pub z_orders: Vec<usize>,
    /// Weights `r_n = Z(f_1)`, `r_{n-i} = Z(f_i) - Z(f_{i-1})`, in the order
    /// `r_1 .. r_n`.
    pub weights: Vec<i64>,
    /// All weights nonnegative.
    pub effective: bool,
}

/// Determinant of the submatrix of `cols` with the given row set, by subset
/// dynamic programming over the columns.
fn minor_det(cols: &[PolyVec], rows: &[usize], trunc: usize) -> Poly {
    let k = rows.len();
    assert_eq!(cols.len(), k);
    // dp over subsets of columns: det of first |S| rows against column set S
    let full = 1usize << k;
    let mut dp = vec![Poly::zero(trunc); full];
    dp[0] = Poly::constant(C1, trunc);
    for s in 1..full {
        let row = rows[(s as u32).count_ones() as usize - 1];
        let mut acc = Poly::zero(trunc);
        let mut sign = C1;
        for j in 0..k {
            if s & (1 << j) != 0 {
                let term = cols[j].entries[row].mul(&dp[s & !(1 << j)]);
                acc = acc.add(&term.scale(sign));
                sign = -sign;
            }
        }
        dp[s] = acc;
    }
    dp[full - 1].clone()
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Vanishing orders of the wedge maps `f_i = v ^ phi v ^ ... ^ phi^i v`
/// (minimal vanishing order over all `(i+1) x (i+1)` minors of the column
/// stack), and the derived knot weights.
pub fn divisor_orders(phi: &PolyMatrix, v: &PolyVec) -> Result<DivisorReport> {
    let dim = phi.dim;
    let n = dim - 1;
    let trunc = phi.trunc.min(v.trunc);
    let mut cols = vec![v.clone()];
    for _ in 0..n {
        cols.push(phi.apply(cols.last().unwrap()));
    }

    let mut z_orders = Vec::with_capacity(n);
    for i in 1..=n {
        let stack: Vec<PolyVec> = cols[..=i].to_vec();
        let mut best: Option<usize> = None;
        for rows in subsets_of_size(dim, i + 1) {
            let det = minor_det(&stack, &rows, trunc);
            if let Some(ord) = det.vanishing_order() {
                best = Some(best.map_or(ord, |b: usize| b.min(ord)));
                if best == Some(0) {
                    break;
                }
            }
        }
        match best {
            Some(ord) => z_orders.push(ord),
            None => {
                return Err(Error::Inconclusive {
                    msg: format!("all {}x{} minors of the wedge stack vanish to truncation", i + 1, i + 1),
                    order: trunc,
                })
            }
        }
    }

    // For the local model, phi^j v ~ z^{S_j} e_{n+1-j} with the cumulative
    // sums S_j = r_n + ... + r_{n+1-j}, so Z(f_i) = S_1 + ... + S_i and the
    // weights are second differences: r_{n+1-i} = Z_i - 2 Z_{i-1} + Z_{i-2}
    // (Z_0 = Z_{-1} = 0; for i = 1 this is the familiar r_n = Z(f_1)).
    let z = |i: i64| -> i64 {
        if i <= 0 {
            0
        } else {
            z_orders[(i - 1) as usize] as i64
        }
    };
    let mut weights = vec![0i64; n];
    for i in 1..=n as i64 {
        weights[(n as i64 - i) as usize] = z(i) - 2 * z(i - 1) + z(i - 2);
    }
    let effective = weights.iter().all(|&r| r >= 0);
    Ok(DivisorReport { z_orders, weights, effective })
}

// ---------------------------------------------------------------------------
// Canonical frame reduction
// ---------------------------------------------------------------------------

/// Result of [`canonical_frame`].
#[derive(Debug, Clone)]
pub struct CanonicalFrame {
    /// Frame change: columns are the new frame in the old coordinates.
    pub frame: PolyMatrix,
    /// `frame^{-1} phi frame`, with superdiagonal entries exactly `z^{r_i}`.
    pub transformed: PolyMatrix,
    /// Extracted weights `r_1 .. r_n`.
    pub weights: Vec<usize>,
}

/// Solve `F x = b` over the series ring (constant term of `F` invertible).
fn poly_solve(f: &PolyMatrix, b: &PolyVec) -> Result<PolyVec> {
    let finv = f.inverse()?;
    Ok(finv.apply(b))
}

/// Reduce `phi` to the canonical local form along the line spanned by `v`:
/// builds the frame `e_{n+1} = v`, `phi(e_{k+1}) = z^{r_k} e_k` modulo
/// `span{e_{k+1}, ..., e_{n+1}}`, absorbing units into the frame vectors.
pub fn canonical_frame(phi: &PolyMatrix, v: &PolyVec) -> Result<CanonicalFrame> {
    let dim = phi.dim;
    let n = dim - 1;
    let trunc = phi.trunc.min(v.trunc);

    // chain[k] = w_k, starting from w_0 = v
    let mut chain: Vec<PolyVec> = vec![v.clone()];
    let mut orders: Vec<usize> = Vec::new();

    for _step in 0..n {
        // complete the chain to a frame using standard basis vectors, chosen
        // greedily so the constant-term matrix stays invertible
        let k = chain.len();
        let mut frame_cols: Vec<PolyVec> = chain.clone();
        let mut used_rows: Vec<usize> = Vec::new();
        for e_idx in 0..dim {
            if frame_cols.len() == dim {
                break;
            }
            let mut candidate = frame_cols.clone();
            candidate.push(PolyVec::basis(dim, e_idx, trunc));
            let m0 = DMatrix::from_fn(dim, candidate.len(), |i, j| candidate[j].entries[i].coeffs[0]);
            // full column rank test via singular values
            let svd = m0.svd(false, false);
            let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
            if smin > 1e-8 {
                frame_cols = candidate;
                used_rows.push(e_idx);
            }
        }
        if frame_cols.len() != dim {
            return Err(Error::Inconclusive {
                msg: "canonical_frame: could not complete chain to a frame".into(),
                order: trunc,
            });
        }
        let mut fmat = PolyMatrix::zeros(dim, trunc);
        for (j, col) in frame_cols.iter().enumerate() {
            for i in 0..dim {
                *fmat.at_mut(i, j) = col.entries[i].clone();
            }
        }

        // express phi w_{k-1} in the frame, split off the completion part
        let target = phi.apply(chain.last().unwrap());
        let x = poly_solve(&fmat, &target)?;
        let comp: Vec<Poly> = x.entries[k..].to_vec();
        let ord = comp
            .iter()
            .filter_map(|p| p.vanishing_order())
            .min()
            .ok_or(Error::Inconclusive {
                msg: "canonical_frame: pivot not determinable at truncation order".into(),
                order: trunc,
            })?;
        // w_k := z^{-ord} (completion part), so the coefficient of w_k in
        // phi w_{k-1} is exactly z^{ord}
        let mut wk = PolyVec { dim, trunc, entries: vec![Poly::zero(trunc); dim] };
        for (t, p) in comp.iter().enumerate() {
            let shifted = p.shift_down(ord)?;
            let basis_idx = used_rows[t];
            for i in 0..dim {
                if i == basis_idx {
                    wk.entries[i] = wk.entries[i].add(&shifted);
                }
            }
        }
        orders.push(ord);
        chain.push(wk);
    }

    // frame order: e_1 .. e_{n+1} = w_n .. w_0
    let mut frame = PolyMatrix::zeros(dim, trunc);
    for (j, w) in chain.iter().rev().enumerate() {
        for i in 0..dim {
            *frame.at_mut(i, j) = w.entries[i].clone();
        }
    }
    let transformed = frame.inverse()?.matmul(&phi.matmul(&frame));
    // weights in superdiagonal order: r_i at (i, i+1); r_i = orders[n - i]
    let weights: Vec<usize> = (0..n).map(|i| orders[n - 1 - i]).collect();
    Ok(CanonicalFrame { frame, transformed, weights })
}
