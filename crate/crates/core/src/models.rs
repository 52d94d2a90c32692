//! Singular model Hermitian metrics: the Nahm pole model `exp(-log y e0)` and
//! the knot models built from the repulsive Toda system
//!
//! ```text
//! q_i'' - sum_j A_ij exp(q_j) = 0,    q_j ~ -2 log(sigma) + log(B_j)  (sigma -> 0)
//! ```
//!
//! with `chi_i = sum_j A^-1_ij q_j`.  Closed forms are provided for rank 1 and
//! rank 2; other weights and ranks go through a collocation BVP solved by
//! Newton iteration on a log-spaced grid.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::liealg::{CMat, LieContext};
use crate::{Error, Result};

/// Cylindrical chart around a boundary knot point.
///
/// `r = |z|`, `y` the height, `R = sqrt(r^2+y^2)`, `psi` with `y = R sin psi`,
/// and `sigma = log((R+y)/r) = asinh(y/r)`.
#[derive(Debug, Clone, Copy)]
pub struct KnotChart {
    pub r: f64,
    pub y: f64,
    pub big_r: f64,
    pub psi: f64,
    pub sigma: f64,
    pub theta: f64,
}

impl KnotChart {
    pub fn from_ry(r: f64, y: f64) -> Result<Self> {
        if r < 0.0 || y < 0.0 || (r == 0.0 && y == 0.0) {
            return Err(Error::Domain(format!(
                "knot chart needs r, y >= 0, (r,y) != 0; got ({r},{y})"
            )));
        }
        let big_r = r.hypot(y);
        let psi = y.atan2(r);
        let sigma = if r > 0.0 { (y / r).asinh() } else { f64::INFINITY };
        Ok(KnotChart { r, y, big_r, psi, sigma, theta: 0.0 })
    }

    pub fn from_r_psi(big_r: f64, psi: f64) -> Result<Self> {
        if big_r <= 0.0 || !(0.0..=std::f64::consts::FRAC_PI_2).contains(&psi) {
            return Err(Error::Domain(format!(
                "knot chart needs R > 0 and psi in [0, pi/2]; got ({big_r},{psi})"
            )));
        }
        // pin the singular ray exactly (cos(pi/2) is not 0 in floating point)
        let r = if psi == std::f64::consts::FRAC_PI_2 { 0.0 } else { big_r * psi.cos() };
        let y = big_r * psi.sin();
        let sigma = if r > 0.0 { (y / r).asinh() } else { f64::INFINITY };
        Ok(KnotChart { r, y, big_r, psi, sigma, theta: 0.0 })
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }
}

/// Where a Toda profile came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    ClosedForm,
    NumericBvp,
}

enum ProfileData {
    /// Exponential-sum closed forms: for each component i a list of
    /// `(alpha_k, beta_k)` with `exp(-chi_i) = sum_k alpha_k exp(beta_k sigma)`.
    ExpSum(Vec<Vec<(f64, f64)>>),
    /// Collocation values `q_i` on a sigma grid, with cubic Hermite
    /// interpolation and asymptotic extension outside the grid.
    Grid { sigma: Vec<f64>, q: Vec<DVector<f64>>, residual: f64 },
}

/// Solution profile of the repulsive Toda system for a weight vector.
pub struct TodaProfile {
    pub n: usize,
    pub weights: Vec<u32>,
    pub source: ProfileSource,
    cartan: Vec<Vec<i64>>,
    cartan_inv: Vec<Vec<f64>>,
    b_weights: Vec<f64>,
    data: ProfileData,
}

/// Evaluate `f = sum alpha_k exp(beta_k s)` together with `f'/f` and `f''/f`,
/// factoring out the dominant exponential so large `s` stays finite.
fn exp_sum_eval(terms: &[(f64, f64)], s: f64) -> (f64, f64, f64) {
    let bmax = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut g, mut g1, mut g2) = (0.0, 0.0, 0.0);
    for &(a, b) in terms {
        let e = a * ((b - bmax) * s).exp();
        g += e;
        g1 += b * e;
        g2 += b * b * e;
    }
    // log f = bmax*s + log g ; f'/f = g1/g ; f''/f = g2/g
    (bmax * s + g.ln(), g1 / g, g2 / g)
}

impl TodaProfile {
    /// `chi_i(sigma)` for all i.
    pub fn chi(&self, sigma: f64) -> Vec<f64> {
        match &self.data {
            ProfileData::ExpSum(terms) => terms
                .iter()
                .map(|t| {
                    let (logf, _, _) = exp_sum_eval(t, sigma);
                    -logf
                })
                .collect(),
            ProfileData::Grid { .. } => {
                let q = self.q(sigma);
                (0..self.n)
                    .map(|i| (0..self.n).map(|j| self.cartan_inv[i][j] * q[j]).sum())
                    .collect()
            }
        }
    }

    /// `q_i(sigma) = sum_j A_ij chi_j(sigma)`.
    pub fn q(&self, sigma: f64) -> Vec<f64> {
        match &self.data {
            ProfileData::ExpSum(_) => {
                let chi = self.chi(sigma);
                (0..self.n)
                    .map(|i| (0..self.n).map(|j| self.cartan[i][j] as f64 * chi[j]).sum())
                    .collect()
            }
            ProfileData::Grid { sigma: sg, q, .. } => {
                let m = sg.len();
                if sigma <= sg[0] {
                    // boundary asymptote, shifted by the grid-end offset so the
                    // extension is continuous
                    return (0..self.n)
                        .map(|j| {
                            let w0 = q[0][j] + 2.0 * sg[0].ln() - self.b_weights[j].ln();
                            -2.0 * sigma.ln() + self.b_weights[j].ln() + w0
                        })
                        .collect();
                }
                if sigma >= sg[m - 1] {
                    // linear continuation with the limiting slope -2(r_j + 1)
                    return (0..self.n)
                        .map(|j| {
                            q[m - 1][j]
                                - 2.0 * (self.weights[j] as f64 + 1.0) * (sigma - sg[m - 1])
                        })
                        .collect();
                }
                // cubic Hermite in xi = log sigma with finite-difference slopes
                let xi = sigma.ln();
                let xs: Vec<f64> = sg.iter().map(|s| s.ln()).collect();
                let k = match xs.binary_search_by(|x| x.partial_cmp(&xi).unwrap()) {
                    Ok(k) => k.min(m - 2),
                    Err(k) => (k - 1).min(m - 2),
                };
                let slope = |idx: usize, j: usize| -> f64 {
                    if idx == 0 {
                        (q[1][j] - q[0][j]) / (xs[1] - xs[0])
                    } else if idx == m - 1 {
                        (q[m - 1][j] - q[m - 2][j]) / (xs[m - 1] - xs[m - 2])
                    } else {
                        (q[idx + 1][j] - q[idx - 1][j]) / (xs[idx + 1] - xs[idx - 1])
                    }
                };
                let h = xs[k + 1] - xs[k];
                let t = (xi - xs[k]) / h;
                let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
                let h10 = t * (1.0 - t) * (1.0 - t);
                let h01 = t * t * (3.0 - 2.0 * t);
                let h11 = t * t * (t - 1.0);
                (0..self.n)
                    .map(|j| {
                        h00 * q[k][j]
                            + h10 * h * slope(k, j)
                            + h01 * q[k + 1][j]
                            + h11 * h * slope(k + 1, j)
                    })
                    .collect()
            }
        }
    }

    /// Analytic `q_i''(sigma)` for closed forms (exact differentiation of the
    /// exponential sums); `None` for grid profiles.
    pub fn q_second_analytic(&self, sigma: f64) -> Option<Vec<f64>> {
        match &self.data {
            ProfileData::ExpSum(terms) => {
                // chi_i = -log f_i, so chi_i'' = (f'/f)^2 - f''/f
                let chi2: Vec<f64> = terms
                    .iter()
                    .map(|t| {
                        let (_, r1, r2) = exp_sum_eval(t, sigma);
                        r1 * r1 - r2
                    })
                    .collect();
                Some(
                    (0..self.n)
                        .map(|i| (0..self.n).map(|j| self.cartan[i][j] as f64 * chi2[j]).sum())
                        .collect(),
                )
            }
            ProfileData::Grid { .. } => None,
        }
    }

    /// Max over sampled `sigma` and components of the Toda residual
    /// `|q_i'' - sum_j A_ij exp(q_j)|`.
    ///
    /// Closed forms use the analytic second derivative (the forms are
    /// exponential sums, so this is an exact oracle); grid profiles report the
    /// collocation residual of the `sigma^2`-scaled equation recorded at solve
    /// time.
    pub fn residual(&self, sigmas: &[f64]) -> f64 {
        match &self.data {
            ProfileData::ExpSum(_) => {
                let mut worst = 0.0f64;
                for &s in sigmas {
                    let q = self.q(s);
                    let q2 = self.q_second_analytic(s).unwrap();
                    for i in 0..self.n {
                        let rhs: f64 =
                            (0..self.n).map(|j| self.cartan[i][j] as f64 * q[j].exp()).sum();
                        worst = worst.max((q2[i] - rhs).abs());
                    }
                }
                worst
            }
            ProfileData::Grid { residual, .. } => *residual,
        }
    }

    /// Defect of the boundary asymptote `q_j + 2 log sigma - log B_j`.
    pub fn boundary_asymptote_defect(&self, sigma: f64) -> f64 {
        let q = self.q(sigma);
        (0..self.n)
            .map(|j| (q[j] + 2.0 * sigma.ln() - self.b_weights[j].ln()).abs())
            .fold(0.0, f64::max)
    }

    /// `(sigma, q_i, residual)` table rows for CSV export.
    pub fn table(&self, sigmas: &[f64]) -> Vec<(f64, Vec<f64>, f64)> {
        sigmas
            .iter()
            .map(|&s| {
                let q = self.q(s);
                let res = match &self.data {
                    ProfileData::ExpSum(_) => {
                        let q2 = self.q_second_analytic(s).unwrap();
                        (0..self.n)
                            .map(|i| {
                                let rhs: f64 = (0..self.n)
                                    .map(|j| self.cartan[i][j] as f64 * q[j].exp())
                                    .sum();
                                (q2[i] - rhs).abs()
                            })
                            .fold(0.0f64, f64::max)
                    }
                    ProfileData::Grid { residual, .. } => *residual,
                };
                (s, q, res)
            })
            .collect()
    }
}

/// The Nahm pole model metric `exp(-log y e0) = diag(y^-n, y^-n+2, ..., y^n)`.
pub fn nahm_model_metric(ctx: &LieContext, y: f64) -> Result<CMat> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("nahm_model_metric needs y > 0, got {y}")));
    }
    let dim = ctx.dim();
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for i in 0..dim {
        let p = -(ctx.n as i32) + 2 * i as i32;
        h[(i, i)] = Complex64::new(y.powi(p), 0.0);
    }
    Ok(h)
}

/// Closed-form rank-1 knot profile: `chi_1 = -log(sinh((r+1) sigma)/(r+1))`,
/// i.e. `exp(-chi_1) = (e^{m sigma} - e^{-m sigma})/(2m)` with `m = r+1`.
pub fn sl2_knot_profile(r: u32) -> TodaProfile {
    let m = (r + 1) as f64;
    let terms = vec![vec![(1.0 / (2.0 * m), m), (-1.0 / (2.0 * m), -m)]];
    TodaProfile {
        n: 1,
        weights: vec![r],
        source: ProfileSource::ClosedForm,
        cartan: vec![vec![2]],
        cartan_inv: vec![vec![0.5]],
        b_weights: vec![1.0],
        data: ProfileData::ExpSum(terms),
    }
}

/// Closed-form rank-2 knot profile with `m_i = r_i + 1`; the two components
/// are three-term exponential sums that swap under `m1 <-> m2`.
pub fn sl3_knot_profile(m1: u32, m2: u32) -> Result<TodaProfile> {
    if m1 == 0 || m2 == 0 {
        return Err(Error::Domain("sl3_knot_profile needs m1, m2 >= 1".into()));
    }
    let comp = |a: f64, b: f64| -> Vec<(f64, f64)> {
        vec![
            (0.25 / (a * (a + b)), (4.0 * a + 2.0 * b) / 3.0),
            (-0.25 / (a * b), (-2.0 * a + 2.0 * b) / 3.0),
            (0.25 / (b * (a + b)), -(2.0 * a + 4.0 * b) / 3.0),
        ]
    };
    let (a, b) = (m1 as f64, m2 as f64);
    Ok(TodaProfile {
        n: 2,
        weights: vec![m1 - 1, m2 - 1],
        source: ProfileSource::ClosedForm,
        cartan: vec![vec![2, -1], vec![-1, 2]],
        cartan_inv: vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]],
        b_weights: vec![2.0, 2.0],
        data: ProfileData::ExpSum(vec![comp(a, b), comp(b, a)]),
    })
}

/// Closed form when one exists (rank 1 or 2, any weights).
pub fn closed_form_profile(ctx: &LieContext, weights: &[u32]) -> Option<TodaProfile> {
    if weights.len() != ctx.n {
        return None;
    }
    match ctx.n {
        1 => Some(sl2_knot_profile(weights[0])),
        2 => sl3_knot_profile(weights[0] + 1, weights[1] + 1).ok(),
        _ => None,
    }
}

/// Default log-spaced collocation grid for [`toda_bvp_solve`].
pub fn default_sigma_grid(sigma_min: f64, sigma_max: f64, m: usize) -> Vec<f64> {
    let (a, b) = (sigma_min.ln(), sigma_max.ln());
    (0..m).map(|k| (a + (b - a) * k as f64 / (m - 1) as f64).exp()).collect()
}

/// Collocation solve of the repulsive Toda system on the given sigma grid.
///
/// The unknown is the defect `v_j = q_j - g_j` from the rank-1 closed-form
/// superposition `g_j = 2 chi^{sl2}_{r_j}`; in the `sigma^2`-scaled equation
///
/// ```text
/// sigma^2 (v_j'' + g_j'') - sum_j A_ij exp(g_j + v_j) sigma^2 = 0
/// ```
///
/// the `g` terms are evaluated analytically, so the stencil only ever
/// differentiates `v`, which is smooth, bounded, and exponentially flat at
/// both ends of the grid.  Dirichlet data from the boundary asymptote
/// `q_j = -2 log sigma + log B_j` at `sigma_min`; Neumann slope
/// `q_j' = -2 (r_j+1)` at `sigma_max`.
pub fn toda_bvp_solve(
    ctx: &LieContext,
    weights: &[u32],
    sigma_grid: &[f64],
) -> Result<TodaProfile> {
    let n = ctx.n;
    if weights.len() != n {
        return Err(Error::Domain(format!("expected {n} weights, got {}", weights.len())));
    }
    let m = sigma_grid.len();
    if m < 5 {
        return Err(Error::Domain("sigma grid needs at least 5 nodes".into()));
    }
    if sigma_grid[0] < 1e-3 {
        return Err(Error::Domain("sigma grid must start at sigma >= 1e-3".into()));
    }
    if sigma_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("sigma grid must be strictly increasing".into()));
    }

    let b_weights: Vec<f64> = ctx.weights.iter().map(|&b| b as f64).collect();
    let cartan = ctx.cartan.clone();
    let cinv: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| ctx.cartan_inv_f64(i, j)).collect()).collect();

    // per-component rank-1 guess data: g_j, sigma^2 g_j'' and
    // t_j = g_j + 2 log sigma (bounded near sigma = 0)
    let guesses: Vec<TodaProfile> = weights.iter().map(|&r| sl2_knot_profile(r)).collect();
    let g_vals: Vec<DVector<f64>> = sigma_grid
        .iter()
        .map(|&s| DVector::from_fn(n, |j, _| guesses[j].q(s)[0]))
        .collect();
    let g_second_scaled: Vec<DVector<f64>> = sigma_grid
        .iter()
        .map(|&s| DVector::from_fn(n, |j, _| s * s * guesses[j].q_second_analytic(s).unwrap()[0]))
        .collect();
    let t_vals: Vec<DVector<f64>> = sigma_grid
        .iter()
        .map(|&s| DVector::from_fn(n, |j, _| guesses[j].q(s)[0] + 2.0 * s.ln()))
        .collect();

    let mut v: Vec<DVector<f64>> = vec![DVector::zeros(n); m];

    // nonuniform 3-point second derivative in sigma at interior nodes
    let d2_coeffs: Vec<[f64; 3]> = (1..m - 1)
        .map(|k| {
            let (a, b) = (sigma_grid[k] - sigma_grid[k - 1], sigma_grid[k + 1] - sigma_grid[k]);
            [2.0 / (a * (a + b)), -2.0 / (a * b), 2.0 / (b * (a + b))]
        })
        .collect();

    // Dirichlet: v = -2 log sigma_min + log B_j - g_j(sigma_min)
    let v_dirichlet: Vec<f64> = (0..n)
        .map(|j| -2.0 * sigma_grid[0].ln() + b_weights[j].ln() - g_vals[0][j])
        .collect();
    // Neumann: v' = -2 (r_j+1) - g_j'(sigma_max), with g' from the closed form
    let v_neumann: Vec<f64> = (0..n)
        .map(|j| {
            let mj = weights[j] as f64 + 1.0;
            let smax = sigma_grid[m - 1];
            // g' = -2 m coth(m sigma)
            -2.0 * mj + 2.0 * mj * (mj * smax).tanh().recip()
        })
        .collect();

    let residual = |v: &[DVector<f64>]| -> Vec<DVector<f64>> {
        let mut res = vec![DVector::zeros(n); m];
        for j in 0..n {
            res[0][j] = v[0][j] - v_dirichlet[j];
        }
        for k in 1..m - 1 {
            let c2 = &d2_coeffs[k - 1];
            let s2 = sigma_grid[k] * sigma_grid[k];
            for i in 0..n {
                let vss = c2[0] * v[k - 1][i] + c2[1] * v[k][i] + c2[2] * v[k + 1][i];
                let mut rhs = 0.0;
                for j in 0..n {
                    // sigma^2 e^{q_j} = e^{t_j + v_j}
                    rhs += cartan[i][j] as f64 * (t_vals[k][j] + v[k][j]).exp();
                }
                res[k][i] = s2 * vss + g_second_scaled[k][i] - rhs;
            }
        }
        let h = sigma_grid[m - 1] - sigma_grid[m - 2];
        for j in 0..n {
            res[m - 1][j] = (v[m - 1][j] - v[m - 2][j]) / h - v_neumann[j];
        }
        res
    };

    let sup = |r: &[DVector<f64>]| r.iter().map(|v| v.amax()).fold(0.0f64, f64::max);

    let mut res = residual(&v);
    let mut rnorm = sup(&res);
    for _ in 0..60 {
        if rnorm < 1e-10 {
            break;
        }
        let mut lo = vec![DMatrix::<f64>::zeros(n, n); m];
        let mut di = vec![DMatrix::<f64>::zeros(n, n); m];
        let mut up = vec![DMatrix::<f64>::zeros(n, n); m];
        di[0] = DMatrix::identity(n, n);
        for k in 1..m - 1 {
            let c2 = &d2_coeffs[k - 1];
            let s2 = sigma_grid[k] * sigma_grid[k];
            for i in 0..n {
                lo[k][(i, i)] = s2 * c2[0];
                up[k][(i, i)] = s2 * c2[2];
                di[k][(i, i)] = s2 * c2[1];
                for j in 0..n {
                    di[k][(i, j)] -= cartan[i][j] as f64 * (t_vals[k][j] + v[k][j]).exp();
                }
            }
        }
        let h = sigma_grid[m - 1] - sigma_grid[m - 2];
        for j in 0..n {
            di[m - 1][(j, j)] = 1.0 / h;
            lo[m - 1][(j, j)] = -1.0 / h;
        }

        // block Thomas elimination
        let mut dhat = vec![DMatrix::<f64>::zeros(n, n); m];
        let mut rhat = vec![DVector::<f64>::zeros(n); m];
        dhat[0] = di[0].clone();
        rhat[0] = -&res[0];
        for k in 1..m {
            let inv = dhat[k - 1].clone().try_inverse().ok_or_else(|| Error::Solver {
                msg: "Toda BVP: singular pivot block".into(),
                residual: rnorm,
            })?;
            let factor = &lo[k] * inv;
            dhat[k] = &di[k] - &factor * &up[k - 1];
            rhat[k] = -&res[k] - &factor * &rhat[k - 1];
        }
        let mut delta = vec![DVector::<f64>::zeros(n); m];
        let inv = dhat[m - 1].clone().try_inverse().ok_or_else(|| Error::Solver {
            msg: "Toda BVP: singular last block".into(),
            residual: rnorm,
        })?;
        delta[m - 1] = &inv * &rhat[m - 1];
        for k in (0..m - 1).rev() {
            let inv = dhat[k].clone().try_inverse().ok_or_else(|| Error::Solver {
                msg: "Toda BVP: singular block".into(),
                residual: rnorm,
            })?;
            let rhs = &rhat[k] - &up[k] * &delta[k + 1];
            delta[k] = &inv * &rhs;
        }

        let mut step = 1.0f64;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<DVector<f64>> =
                v.iter().zip(delta.iter()).map(|(vk, dk)| vk + dk * step).collect();
            let tres = residual(&trial);
            let tnorm = sup(&tres);
            if tnorm < rnorm * (1.0 - 0.25 * step) || tnorm < 1e-12 {
                v = trial;
                res = tres;
                rnorm = tnorm;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // at the rounding floor of the stencil arithmetic
            if rnorm < 1e-8 {
                break;
            }
            return Err(Error::Solver { msg: "Toda BVP Newton stalled".into(), residual: rnorm });
        }
    }
    if rnorm > 1e-6 {
        return Err(Error::Solver { msg: "Toda BVP did not converge".into(), residual: rnorm });
    }

    // back to q_j = g_j + v_j
    let q: Vec<DVector<f64>> = v
        .iter()
        .zip(g_vals.iter())
        .map(|(vk, gk)| gk + vk)
        .collect();

    Ok(TodaProfile {
        n,
        weights: weights.to_vec(),
        source: ProfileSource::NumericBvp,
        cartan,
        cartan_inv: cinv,
        b_weights,
        data: ProfileData::Grid { sigma: sigma_grid.to_vec(), q, residual: rnorm },
    })
}

/// Diagonal entries of the knot model metric at a chart point:
/// `H_mod = exp(sum_i (chi_i - 2 sum_j A^-1_ij (r_j+1) log r) H_i)`.
pub fn knot_model_diag(
    ctx: &LieContext,
    profile: &TodaProfile,
    chart: &KnotChart,
) -> Result<Vec<f64>> {
    if !(chart.r > 0.0) || !(chart.y > 0.0) {
        return Err(Error::Domain(format!(
            "knot model metric needs r > 0 and y > 0, got ({}, {})",
            chart.r, chart.y
        )));
    }
    if profile.n != ctx.n {
        return Err(Error::Domain("profile rank does not match context".into()));
    }
    let n = ctx.n;
    let chi = profile.chi(chart.sigma);
    let logr = chart.r.ln();
    let c: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = chi[i];
            for j in 0..n {
                acc -= 2.0 * ctx.cartan_inv_f64(i, j) * (profile.weights[j] as f64 + 1.0) * logr;
            }
            acc
        })
        .collect();
    // H_i = E_ii - E_{i+1,i+1}: diagonal entry k of sum_i c_i H_i is c_k - c_{k-1}
    let mut diag = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let ck = if k < n { c[k] } else { 0.0 };
        let ckm = if k > 0 { c[k - 1] } else { 0.0 };
        diag.push((ck - ckm).exp());
    }
    Ok(diag)
}

/// Knot model metric as a full (diagonal) matrix.
pub fn knot_model_metric(
    ctx: &LieContext,
    profile: &TodaProfile,
    chart: &KnotChart,
) -> Result<CMat> {
    let diag = knot_model_diag(ctx, profile, chart)?;
    let dim = ctx.dim();
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for k in 0..dim {
        h[(k, k)] = Complex64::new(diag[k], 0.0);
    }
    Ok(h)
}

/// Result of [`lambda_ratio_bound`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct LambdaRatioReport {
    /// Max over samples and k of `lambda_{k+1}/lambda_k`.
    pub max_ratio: f64,
    /// Ratios along `R = 2^-j` at fixed `psi = pi/4` (tend to zero).
    pub radial_tail: Vec<f64>,
    /// Ratios along `psi = (pi/2) 2^-j` at fixed `R = 1` (tend to zero).
    pub angular_tail: Vec<f64>,
}

/// Bound on consecutive eigenvalue ratios of the model metric over a punctured
/// half ball, plus the two vanishing-limit tails.
pub fn lambda_ratio_bound(
    ctx: &LieContext,
    profile: &TodaProfile,
    ball_samples: &[KnotChart],
) -> Result<LambdaRatioReport> {
    let ratio_at = |chart: &KnotChart| -> Result<f64> {
        let d = knot_model_diag(ctx, profile, chart)?;
        Ok(d.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max))
    };
    let mut max_ratio = 0.0f64;
    for c in ball_samples {
        max_ratio = max_ratio.max(ratio_at(c)?);
    }
    let mut radial_tail = Vec::new();
    for j in 0..16 {
        let chart = KnotChart::from_r_psi(2f64.powi(-j), std::f64::consts::FRAC_PI_4)?;
        radial_tail.push(ratio_at(&chart)?);
    }
    let mut angular_tail = Vec::new();
    for j in 1..=16 {
        let chart = KnotChart::from_r_psi(1.0, std::f64::consts::FRAC_PI_2 * 2f64.powi(-j))?;
        angular_tail.push(ratio_at(&chart)?);
    }
    Ok(LambdaRatioReport { max_ratio, radial_tail, angular_tail })
}
