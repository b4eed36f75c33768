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
use crate::pgf::Pgf;
use crate::value::ExtendedValue;

const CDF_SLACK: f64 = 1e-12;

pub(crate) fn check_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(PgfError::parameter(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    Ok((1.0 - level) / 2.0)
}

/// Central interval: `lo` is the largest value with `P(A < lo) <= tail` and
/// `hi` the smallest with `P(A <= hi) >= 1 - tail`, where
/// `tail = (1 - level) / 2`.
pub fn confidence_interval(a: &Pgf, level: f64) -> Result<(ExtendedValue, ExtendedValue)> {
    let tail = check_level(level)?;
    let terms = a.terms();
    if terms.is_empty() {
        return Err(PgfError::EmptySupport);
    }
    let mut lo = terms[0].0;
    let mut below = 0.0;
    for (v, p) in terms {
        if below <= tail + CDF_SLACK {
            lo = *v;
        } else {
            break;
        }
        below += p;
    }
    let mut hi = terms[terms.len() - 1].0;
    let mut cdf = 0.0;
    for (v, p) in terms {
        cdf += p;
        if cdf >= 1.0 - tail - CDF_SLACK {
            hi = *v;
            break;
        }
    }
    Ok((lo, hi))
}
