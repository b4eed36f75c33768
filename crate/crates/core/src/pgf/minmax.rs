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

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pgf::Pgf;
use crate::value::{ExtendedValue, ValueScale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinMaxMode {
    Min,
    Max,
}

impl MinMaxMode {
    /// The neutral exponent: `+inf` for MIN, `-inf` for MAX.
    pub fn neutral(&self) -> ExtendedValue {
        match self {
            MinMaxMode::Min => ExtendedValue::PosInf,
            MinMaxMode::Max => ExtendedValue::NegInf,
        }
    }

    pub fn combine(&self, a: ExtendedValue, b: ExtendedValue) -> ExtendedValue {
        match self {
            MinMaxMode::Min => a.min(b),
            MinMaxMode::Max => a.max(b),
        }
    }
}

/// Product in the MIN (or MAX) monoid: the coefficient of `X^k` is the sum of
/// `a_i * b_j` over all pairs with `min(i, j) = k`.
///
/// Evaluated in one ordered sweep as
/// `P(min = k) = a_k P(b >= k) + P(a > k) b_k`.
pub fn pgf_mul_minmax(a: &Pgf, b: &Pgf, mode: MinMaxMode) -> Result<Pgf> {
    let scale = ValueScale {
        scale_digits: a
            .value_scale()
            .scale_digits
            .max(b.value_scale().scale_digits),
    };
    let a = a.rescaled(scale)?;
    let b = b.rescaled(scale)?;
    let values: BTreeSet<ExtendedValue> = a
        .terms()
        .iter()
        .chain(b.terms())
        .map(|(v, _)| *v)
        .collect();
    let ordered: Vec<ExtendedValue> = match mode {
        MinMaxMode::Min => values.into_iter().collect(),
        MinMaxMode::Max => values.into_iter().rev().collect(),
    };
    // surviving mass: P(a beyond-or-at current value) in sweep direction
    let mut surv_a = 1.0;
    let mut surv_b = 1.0;
    let mut out = Vec::with_capacity(ordered.len());
    for v in ordered {
        let pa = a.prob(v);
        let pb = b.prob(v);
        let mass = pa * surv_b + (surv_a - pa) * pb;
        out.push((v, mass.max(0.0)));
        surv_a -= pa;
        surv_b -= pb;
    }
    let overflow = match (a.overflow(), b.overflow()) {
        (Some(x), Some(y)) => Some(if mode.combine(x.at, y.at) == x.at { x } else { y }),
        (x, y) => x.or(y),
    };
    Ok(Pgf::from_weights(out, scale)?.with_overflow(overflow))
}
