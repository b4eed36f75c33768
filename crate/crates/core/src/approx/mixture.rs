// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Gamma mixtures fitted by moment matching.
//!
//! A mixture `sum pi_j Gamma(shape 1/lambda, mean mu_j)` has raw moments
//! `m_r = (1 + lambda)...(1 + (r-1) lambda) * sum pi_j mu_j^r`, so dividing
//! the target moments by that product (the pseudo-moments) leaves the moments
//! of a discrete distribution with atoms `mu_j`. The dispersion is the value
//! of `lambda` at which the Hankel matrix of pseudo-moments becomes singular.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{PgfError, Result};
use crate::pgf::Distribution;
use crate::value::{ExtendedValue, ValueScale};

use super::cumulants::{Standardization, Z_OFFSET};
use super::continuous_interval;

pub const MAX_COMPONENTS: usize = 6;

const LAMBDA_CAP: f64 = (1u64 << 20) as f64;
const LAMBDA_TOL: f64 = 1e-12;
const SCAN_POINTS: usize = 400;
const EIGEN_FLOOR: f64 = 1e-12;
const MOMENT_TOLERANCE: f64 = 1e-6;

/// `delta*_0..delta*_len-1` for `lambda`, where `moments[r-1] = m_r`.
pub fn pseudo_moments(moments: &[f64], lambda: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut denom = 1.0;
    for r in 0..len {
        if r >= 2 {
            denom *= 1.0 + (r - 1) as f64 * lambda;
        }
        out.push(if r == 0 { 1.0 } else { moments[r - 1] / denom });
    }
    out
}

/// The Hankel matrix `{delta*_{j+k}}` for `j, k = 0..=p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoMomentMatrix {
    pub p: usize,
    pub lambda: f64,
    pub delta_star: Vec<f64>,
}

impl PseudoMomentMatrix {
    pub fn new(moments: &[f64], p: usize, lambda: f64) -> Self {
        PseudoMomentMatrix {
            p,
            lambda,
            delta_star: pseudo_moments(moments, lambda, 2 * p + 1),
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.p + 1;
        DMatrix::from_fn(n, n, |j, k| self.delta_star[j + k])
    }

    /// The matrix with unit diagonal, `D^-1/2 M D^-1/2`, and `D^-1/2`.
    fn equilibrated(&self) -> (DMatrix<f64>, Vec<f64>) {
        let n = self.p + 1;
        let d: Vec<f64> = (0..n).map(|j| 1.0 / self.delta_star[2 * j].abs().sqrt()).collect();
        let m = DMatrix::from_fn(n, n, |j, k| self.delta_star[j + k] * d[j] * d[k]);
        (m, d)
    }

    /// Determinant of the equilibrated matrix; same sign as `det Delta_p`.
    pub fn scaled_determinant(&self) -> f64 {
        self.equilibrated().0.determinant()
    }
}

/// Parameters of a fitted mixture in standardized units.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaFit {
    pub lambda: f64,
    /// `lambda_1 > lambda_2 > ...`, the roots found at each stage.
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub pis: Vec<f64>,
}

impl GammaFit {
    /// Raw moments `m_1..m_n` of the mixture.
    pub fn moments(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut factor = 1.0;
        for r in 1..=n {
            if r >= 2 {
                factor *= 1.0 + (r - 1) as f64 * self.lambda;
            }
            let s: f64 = self
                .mus
                .iter()
                .zip(&self.pis)
                .map(|(m, p)| p * m.powi(r as i32))
                .sum();
            out.push(factor * s);
        }
        out
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // invariant: f(lo) > 0 >= f(hi)
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= LAMBDA_TOL * 1e-3 * hi.max(1e-300) {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn not_found(k: usize) -> PgfError {
    PgfError::FitFailed(format!("lambda root not found for {k} components"))
}

fn solve_lambdas(moments: &[f64], p: usize) -> Result<Vec<f64>> {
    let det = |k: usize, lambda: f64| PseudoMomentMatrix::new(moments, k, lambda).scaled_determinant();
    let mut lambdas = Vec::with_capacity(p);
    for k in 1..=p {
        if det(k, 0.0) <= 0.0 {
            return Err(PgfError::FitFailed(format!(
                "moment matrix of order {k} is not positive definite"
            )));
        }
        let root = match lambdas.last() {
            None => {
                let mut hi = 10.0 * moments[1].max(1.0);
                while det(k, hi) > 0.0 {
                    hi *= 2.0;
                    if hi > LAMBDA_CAP {
                        return Err(not_found(k));
                    }
                }
                bisect(|l| det(k, l), 0.0, hi)
            }
            Some(&prev) => {
                let top = prev * (1.0 - 1e-12);
                let mut lo = 0.0;
                let mut found = None;
                for i in 1..=SCAN_POINTS {
                    let x = top * i as f64 / SCAN_POINTS as f64;
                    if det(k, x) <= 0.0 {
                        found = Some((lo, x));
                        break;
                    }
                    lo = x;
                }
                let (lo, hi) = found.ok_or_else(|| not_found(k))?;
                bisect(|l| det(k, l), lo, hi)
            }
        };
        if root.is_nan() || root <= 0.0 {
            return Err(not_found(k));
        }
        lambdas.push(root);
    }
    Ok(lambdas)
}

fn poly_eval(c: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for coef in c.iter().rev() {
        d = d * x + v;
        v = v * x + coef;
    }
    (v, d)
}

/// Real positive distinct roots of `sum c_k x^k`.
fn positive_real_roots(c: &[f64]) -> Result<Vec<f64>> {
    let p = c.len() - 1;
    let lead = c[p];
    let cmax = c.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if lead.abs() <= 1e-14 * cmax {
        return Err(PgfError::FitFailed("degenerate location polynomial".into()));
    }
    let mut companion = DMatrix::zeros(p, p);
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..p {
        companion[(i, p - 1)] = -c[i] / lead;
    }
    let eig = companion.complex_eigenvalues();
    let mut roots = Vec::with_capacity(p);
    for z in eig.iter() {
        if z.im.abs() > 1e-6 * z.re.abs().max(1e-12) {
            return Err(PgfError::FitFailed("complex location parameter".into()));
        }
        let mut x = z.re;
        for _ in 0..4 {
            let (v, d) = poly_eval(c, x);
            if d == 0.0 {
                break;
            }
            let step = v / d;
            if !step.is_finite() {
                break;
            }
            x -= step;
        }
        if x.is_nan() || x <= 0.0 {
            return Err(PgfError::FitFailed("non-positive location parameter".into()));
        }
        roots.push(x);
    }
    roots.sort_by(f64::total_cmp);
    if roots.windows(2).any(|w| w[1] - w[0] <= 1e-10 * w[1]) {
        return Err(PgfError::FitFailed("location parameters are not distinct".into()));
    }
    Ok(roots)
}

/// Fits `p` components to the raw moments `m_1..m_2p` of a positive
/// variable.
pub fn fit_gamma_mixture(moments: &[f64], p: usize) -> Result<GammaFit> {
    if p == 0 || p > MAX_COMPONENTS {
        return Err(PgfError::parameter(format!(
            "mixture components must be in 1..={MAX_COMPONENTS}, got {p}"
        )));
    }
    if moments.len() < 2 * p {
        return Err(PgfError::parameter(format!(
            "{p} components need {} moments, got {}",
            2 * p,
            moments.len()
        )));
    }
    if moments.iter().any(|m| !m.is_finite()) {
        return Err(PgfError::FitFailed("non-finite moments".into()));
    }
    let moments = &moments[..2 * p];
    let lambdas = solve_lambdas(moments, p)?;
    let lambda = *lambdas.last().unwrap();

    // the location polynomial spans the null space of Delta_p(lambda)
    let pm = PseudoMomentMatrix::new(moments, p, lambda);
    let (scaled, d) = pm.equilibrated();
    let eig = scaled.symmetric_eigen();
    let mut order: Vec<usize> = (0..=p).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].abs().total_cmp(&eig.eigenvalues[*b].abs()));
    let largest = eig.eigenvalues[order[p]].abs();
    if p >= 1 && eig.eigenvalues[order[1]].abs() < EIGEN_FLOOR * largest {
        return Err(PgfError::FitFailed("pseudo-moment matrix is near-singular".into()));
    }
    let null = eig.eigenvectors.column(order[0]);
    let coeffs: Vec<f64> = (0..=p).map(|k| null[k] * d[k]).collect();
    let mus = positive_real_roots(&coeffs)?;

    let delta = &pm.delta_star;
    let vander = DMatrix::from_fn(p, p, |i, j| mus[j].powi(i as i32));
    let rhs = DVector::from_iterator(p, delta[..p].iter().copied());
    let pis = vander
        .lu()
        .solve(&rhs)
        .ok_or_else(|| PgfError::FitFailed("singular Vandermonde system".into()))?;
    if pis.iter().any(|x| !x.is_finite() || *x < -1e-9) {
        return Err(PgfError::FitFailed("negative mixing weight".into()));
    }
    let mut pis: Vec<f64> = pis.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = pis.iter().sum();
    pis.iter_mut().for_each(|x| *x /= total);

    let fit = GammaFit {
        lambda,
        lambdas,
        mus,
        pis,
    };
    let fitted = fit.moments(2 * p);
    let worst = fitted
        .iter()
        .zip(moments)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
        .fold(0.0, f64::max);
    if worst.is_nan() || worst > MOMENT_TOLERANCE {
        return Err(PgfError::FitFailed(format!("moment residual {worst:e}")));
    }
    Ok(fit)
}

/// A fitted mixture mapped back to the grid of the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMixture {
    pub lambda: f64,
    pub mus: Vec<f64>,
    pub pis: Vec<f64>,
    pub shift: f64,
    pub scale: f64,
    #[serde(skip, default)]
    pub value_scale: ValueScale,
}

impl GammaMixture {
    pub fn new(fit: &GammaFit, st: Standardization, value_scale: ValueScale) -> Self {
        GammaMixture {
            lambda: fit.lambda,
            mus: fit.mus.clone(),
            pis: fit.pis.clone(),
            shift: st.shift,
            scale: st.scale,
            value_scale,
        }
    }

    pub fn standardization(&self) -> Standardization {
        Standardization {
            shift: self.shift,
            scale: self.scale,
        }
    }

    /// CDF of the standardized variable.
    pub fn z_cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        if z == f64::INFINITY {
            return 1.0;
        }
        let shape = 1.0 / self.lambda;
        let total: f64 = self
            .mus
            .iter()
            .zip(&self.pis)
            .map(|(mu, pi)| {
                let g = Gamma::new(shape, 1.0 / (self.lambda * mu)).expect("positive parameters");
                pi * g.cdf(z)
            })
            .sum();
        total.clamp(0.0, 1.0)
    }

    /// Continuous CDF in grid units.
    pub fn mixture_cdf(&self, x: f64) -> f64 {
        self.z_cdf(self.standardization().to_z(x))
    }

    pub fn mixture_mass_at(&self, x: f64) -> f64 {
        (self.mixture_cdf(x + 0.5) - self.mixture_cdf(x - 0.5)).max(0.0)
    }

    fn z_moments(&self) -> (f64, f64) {
        let m1: f64 = self.mus.iter().zip(&self.pis).map(|(m, p)| p * m).sum();
        let m2: f64 = self.mus.iter().zip(&self.pis).map(|(m, p)| p * m * m).sum::<f64>() * (1.0 + self.lambda);
        (m1, m2 - m1 * m1)
    }
}

impl Distribution for GammaMixture {
    fn scale(&self) -> ValueScale {
        self.value_scale
    }

    fn cdf_at(&self, k: i64) -> f64 {
        self.mixture_cdf(k as f64 + 0.5)
    }

    fn mass_at(&self, k: i64) -> f64 {
        self.mixture_mass_at(k as f64)
    }

    fn mean(&self) -> Option<f64> {
        Some(self.standardization().to_a(self.z_moments().0))
    }

    fn variance(&self) -> Option<f64> {
        Some(self.z_moments().1 * self.scale * self.scale)
    }

    fn interval(&self, level: f64) -> Result<(ExtendedValue, ExtendedValue)> {
        let center = self.standardization().to_a(Z_OFFSET);
        continuous_interval(|x| self.mixture_cdf(x), center, self.scale, level)
    }
}
