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

//! Approximate SUM and COUNT distributions built from exactly accumulated
//! cumulants: a continuity-corrected normal and a moment-matched gamma
//! mixture.

mod cumulants;
mod mixture;
mod normal;

pub use cumulants::{
    bernoulli_cumulants, cumulants_to_moments, moments_to_cumulants, standardize,
    CumulantAccumulator, Standardization, Z_OFFSET,
};
pub use mixture::{
    fit_gamma_mixture, pseudo_moments, GammaFit, GammaMixture, PseudoMomentMatrix, MAX_COMPONENTS,
};
pub use normal::{normal_fit, normal_mass_at, std_normal_cdf, NormalApprox, NormalState};

use crate::error::{PgfError, Result};
use crate::pgf::{check_level, Distribution};
use crate::uda::{AggConfig, Uda};
use crate::value::{ExtendedValue, ValueScale};

/// Result of an approximate aggregate.
#[derive(Debug, Clone, PartialEq)]
pub enum Approximation {
    Normal(NormalApprox),
    Mixture(GammaMixture),
}

impl Approximation {
    fn inner(&self) -> &dyn Distribution {
        match self {
            Approximation::Normal(n) => n,
            Approximation::Mixture(m) => m,
        }
    }
}

impl Distribution for Approximation {
    fn scale(&self) -> ValueScale {
        self.inner().scale()
    }

    fn cdf_at(&self, k: i64) -> f64 {
        self.inner().cdf_at(k)
    }

    fn mass_at(&self, k: i64) -> f64 {
        self.inner().mass_at(k)
    }

    fn mean(&self) -> Option<f64> {
        self.inner().mean()
    }

    fn variance(&self) -> Option<f64> {
        self.inner().variance()
    }

    fn interval(&self, level: f64) -> Result<(ExtendedValue, ExtendedValue)> {
        self.inner().interval(level)
    }
}

/// `x` with `cdf(x) = t`, bracketed outward from `center` in steps of
/// `spread`.
fn continuous_quantile(cdf: &impl Fn(f64) -> f64, t: f64, center: f64, spread: f64) -> f64 {
    let spread = if spread > 0.0 { spread } else { 1.0 };
    let mut step = spread;
    let mut lo = center - step;
    while cdf(lo) > t {
        step *= 2.0;
        lo = center - step;
    }
    step = spread;
    let mut hi = center + step;
    while cdf(hi) < t {
        step *= 2.0;
        hi = center + step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Grid interval from a continuous CDF, undoing the continuity correction:
/// `lo` is the largest grid value with `P(A < lo) <= tail`, `hi` the
/// smallest with `P(A <= hi) >= 1 - tail`.
pub(crate) fn continuous_interval(
    cdf: impl Fn(f64) -> f64,
    center: f64,
    spread: f64,
    level: f64,
) -> Result<(ExtendedValue, ExtendedValue)> {
    let tail = check_level(level)?;
    let x_lo = continuous_quantile(&cdf, tail, center, spread);
    let x_hi = continuous_quantile(&cdf, 1.0 - tail, center, spread);
    let lo = (x_lo + 0.5).floor();
    let hi = (x_hi - 0.5).ceil();
    Ok((ExtendedValue::Finite(lo as i64), ExtendedValue::Finite(hi.max(lo) as i64)))
}

/// Moment-based approximation as an aggregate: cumulants are accumulated
/// exactly, the mixture is fitted once at finalize.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    scale: ValueScale,
    components: usize,
    acc: CumulantAccumulator,
}

impl MomentState {
    pub fn new(scale: ValueScale, components: usize) -> Result<Self> {
        if components == 0 || components > MAX_COMPONENTS {
            return Err(PgfError::parameter(format!(
                "mixture components must be in 1..={MAX_COMPONENTS}, got {components}"
            )));
        }
        Ok(MomentState {
            scale,
            components,
            acc: CumulantAccumulator::new(2 * components)?,
        })
    }

    pub fn add(&mut self, p: f64, v: i64) -> Result<()> {
        self.acc.add(v as f64, p)
    }

    pub fn cumulants(&self) -> &[f64] {
        self.acc.kappas()
    }

    pub fn fit(&self) -> Result<Approximation> {
        let k = self.acc.kappas();
        if k[1] <= 0.0 {
            return Ok(Approximation::Normal(NormalApprox::new(k[0], 0.0, self.scale)?));
        }
        let (z, st) = standardize(k)?;
        let moments = cumulants_to_moments(&z);
        match fit_gamma_mixture(&moments, self.components) {
            Ok(fit) => Ok(Approximation::Mixture(GammaMixture::new(&fit, st, self.scale))),
            Err(e) => {
                log::warn!("gamma mixture fit failed ({e}); using the normal approximation");
                Ok(Approximation::Normal(NormalApprox::new(k[0], k[1], self.scale)?))
            }
        }
    }
}

impl Uda for MomentState {
    type Input = i64;
    type Output = Approximation;

    fn accumulate(&mut self, p: f64, v: &i64) -> Result<()> {
        self.add(p, *v)
    }

    fn merge(&mut self, other: Self) -> Result<()> {
        if self.scale != other.scale || self.components != other.components {
            return Err(PgfError::StateMismatch("moment states with different settings".into()));
        }
        self.acc.merge(&other.acc)
    }

    fn finalize(self, _: &AggConfig) -> Result<Approximation> {
        self.fit()
    }
}
