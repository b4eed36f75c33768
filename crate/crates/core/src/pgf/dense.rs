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

use crate::error::{PgfError, Result};
use crate::pgf::NORMALIZATION_TOLERANCE;

/// An expanded polynomial `sum c[k] X^k` over the exponents `0..=n`, where
/// `c[k] = P(aggregate = k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCountPgf {
    coeffs: Vec<f64>,
}

impl DenseCountPgf {
    /// Validates that the coefficients form a probability vector.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(PgfError::InvalidDistribution("no coefficients".into()));
        }
        if let Some((i, c)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| !c.is_finite() || **c < 0.0)
        {
            return Err(PgfError::InvalidDistribution(format!(
                "coefficient {i} is {c}"
            )));
        }
        let total: f64 = coeffs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(PgfError::InvalidDistribution(format!(
                "coefficients sum to {total}"
            )));
        }
        Ok(DenseCountPgf { coeffs })
    }

    pub(crate) fn new_unchecked(coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        DenseCountPgf { coeffs }
    }

    /// The multiplicative identity `X^0`.
    pub fn one() -> Self {
        DenseCountPgf { coeffs: vec![1.0] }
    }

    /// `q + pX` for a tuple present with probability `p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(PgfError::parameter(format!("probability {p} outside [0, 1]")));
        }
        Ok(DenseCountPgf {
            coeffs: vec![1.0 - p, p],
        })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Evaluates the polynomial at `X^stride` by spreading the coefficients
    /// `stride` positions apart: `(3, 0.2z^2+0.3z+0.5)` becomes
    /// `0.2z^6+0.3z^3+0.5`.
    pub fn stretch(&self, stride: usize) -> Self {
        if stride <= 1 {
            return self.clone();
        }
        let mut out = vec![0.0; self.degree() * stride + 1];
        for (k, c) in self.coeffs.iter().enumerate() {
            out[k * stride] = *c;
        }
        DenseCountPgf { coeffs: out }
    }

    /// Multiplies by `X^k`.
    pub fn shift(&self, k: usize) -> Self {
        if k == 0 {
            return self.clone();
        }
        let mut out = vec![0.0; k];
        out.extend_from_slice(&self.coeffs);
        DenseCountPgf { coeffs: out }
    }

    pub fn mean(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| k as f64 * c)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| (k as f64 - mean).powi(2) * c)
            .sum()
    }

    /// Largest absolute per-coefficient difference.
    pub fn max_abs_diff(&self, other: &DenseCountPgf) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n)
            .map(|k| (self.get(k) - other.get(k)).abs())
            .fold(0.0, f64::max)
    }

    pub fn total_variation(&self, other: &DenseCountPgf) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        0.5 * (0..n).map(|k| (self.get(k) - other.get(k)).abs()).sum::<f64>()
    }
}
