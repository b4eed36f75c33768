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

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{PgfError, Result};
use crate::pgf::Distribution;
use crate::uda::{check_probability, AggConfig, Uda};
use crate::value::{ExtendedValue, ValueScale};

use super::{continuous_interval, Approximation};

/// Standard normal CDF, accurate in both tails.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Mean and variance of `sum v_i * Bernoulli(p_i)`.
pub fn normal_fit<I: IntoIterator<Item = (f64, f64)>>(tuples: I) -> Result<(f64, f64)> {
    let mut state = NormalState::new(ValueScale::INTEGER);
    let mut seen = false;
    for (v, p) in tuples {
        state.add_f64(p, v)?;
        seen = true;
    }
    if !seen {
        return Err(PgfError::parameter("normal fit needs at least one tuple"));
    }
    Ok((state.mu, state.sigma2))
}

/// `P(S = s)` as the normal mass of `[s - 1/2, s + 1/2]`.
pub fn normal_mass_at(mu: f64, sigma2: f64, s: f64) -> f64 {
    if sigma2 <= 0.0 {
        return if (s - mu).abs() <= 0.5 { 1.0 } else { 0.0 };
    }
    let sigma = sigma2.sqrt();
    let hi = (s + 0.5 - mu) / sigma;
    let lo = (s - 0.5 - mu) / sigma;
    // subtract on the side with the smaller tail to keep precision
    let m = if lo > 0.0 {
        std_normal_cdf(-lo) - std_normal_cdf(-hi)
    } else {
        std_normal_cdf(hi) - std_normal_cdf(lo)
    };
    m.max(0.0)
}

/// Normal approximation in grid units, with continuity correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalApprox {
    pub mu: f64,
    pub sigma2: f64,
    #[serde(skip, default)]
    pub scale: ValueScale,
}

impl NormalApprox {
    pub fn new(mu: f64, sigma2: f64, scale: ValueScale) -> Result<Self> {
        if !mu.is_finite() || !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(PgfError::parameter(format!("invalid normal parameters ({mu}, {sigma2})")));
        }
        Ok(NormalApprox { mu, sigma2, scale })
    }

    /// Continuous CDF without correction.
    pub fn continuous_cdf(&self, x: f64) -> f64 {
        if self.sigma2 <= 0.0 {
            return if x >= self.mu { 1.0 } else { 0.0 };
        }
        std_normal_cdf((x - self.mu) / self.sigma2.sqrt())
    }
}

impl Distribution for NormalApprox {
    fn scale(&self) -> ValueScale {
        self.scale
    }

    fn cdf_at(&self, k: i64) -> f64 {
        self.continuous_cdf(k as f64 + 0.5)
    }

    fn mass_at(&self, k: i64) -> f64 {
        normal_mass_at(self.mu, self.sigma2, k as f64)
    }

    fn mean(&self) -> Option<f64> {
        Some(self.mu)
    }

    fn variance(&self) -> Option<f64> {
        Some(self.sigma2)
    }

    fn interval(&self, level: f64) -> Result<(ExtendedValue, ExtendedValue)> {
        if self.sigma2 <= 0.0 {
            let k = ExtendedValue::Finite(self.mu.round() as i64);
            crate::pgf::check_level(level)?;
            return Ok((k, k));
        }
        let sd = self.sigma2.sqrt();
        continuous_interval(|x| self.continuous_cdf(x), self.mu, sd, level)
    }
}

/// Running `sum v p` and `sum v^2 p (1 - p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalState {
    scale: ValueScale,
    mu: f64,
    sigma2: f64,
}

impl NormalState {
    pub fn new(scale: ValueScale) -> Self {
        NormalState {
            scale,
            mu: 0.0,
            sigma2: 0.0,
        }
    }

    fn add_f64(&mut self, p: f64, v: f64) -> Result<()> {
        let p = check_probability(p)?;
        self.mu += v * p;
        self.sigma2 += v * v * p * (1.0 - p);
        Ok(())
    }

    pub fn add(&mut self, p: f64, v: i64) -> Result<()> {
        self.add_f64(p, v as f64)
    }

    pub fn fit(&self) -> Result<NormalApprox> {
        NormalApprox::new(self.mu, self.sigma2, self.scale)
    }
}

impl Uda for NormalState {
    type Input = i64;
    type Output = Approximation;

    fn accumulate(&mut self, p: f64, v: &i64) -> Result<()> {
        self.add(p, *v)
    }

    fn merge(&mut self, other: Self) -> Result<()> {
        if self.scale != other.scale {
            return Err(PgfError::StateMismatch("normal states on different grids".into()));
        }
        self.mu += other.mu;
        self.sigma2 += other.sigma2;
        Ok(())
    }

    fn finalize(self, _: &AggConfig) -> Result<Approximation> {
        Ok(Approximation::Normal(self.fit()?))
    }
}
