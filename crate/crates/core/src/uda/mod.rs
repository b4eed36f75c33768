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

//! Aggregates expressed as user-defined aggregates.
//!
//! Every state follows the same lifecycle: construct an empty state,
//! `accumulate` one tuple at a time, `merge` states built over disjoint
//! partitions of the same group, and `finalize` once to expand the
//! distribution. Expansion is deferred to `finalize` so partial states stay
//! small.

mod at_least_one;
mod count;
mod minmax;
mod sum;

pub use at_least_one::{at_least_one, AtLeastOneState};
pub use count::CountState;
pub use minmax::MinMaxState;
pub use sum::SumState;

use crate::error::{PgfError, Result};
use crate::pgf::DEFAULT_FFT_THRESHOLD;

pub const DEFAULT_TOPK_CAPACITY: usize = 100;
pub const DEFAULT_MAX_DENSE_DEGREE: u64 = 1 << 26;
pub const DEFAULT_MIXTURE_COMPONENTS: usize = 4;

/// Knobs consulted when states are finalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggConfig {
    pub fft_threshold: usize,
    pub max_dense_degree: u64,
    pub topk_capacity: usize,
    pub mixture_components: usize,
}

impl Default for AggConfig {
    fn default() -> Self {
        AggConfig {
            fft_threshold: DEFAULT_FFT_THRESHOLD,
            max_dense_degree: DEFAULT_MAX_DENSE_DEGREE,
            topk_capacity: DEFAULT_TOPK_CAPACITY,
            mixture_components: DEFAULT_MIXTURE_COMPONENTS,
        }
    }
}

pub trait Uda: Sized + Send {
    /// Per-tuple attribute value consumed besides the tuple probability.
    type Input: ?Sized;
    type Output;

    fn accumulate(&mut self, p: f64, input: &Self::Input) -> Result<()>;

    /// Absorbs a state built over a disjoint partition of the same group.
    fn merge(&mut self, other: Self) -> Result<()>;

    fn finalize(self, cfg: &AggConfig) -> Result<Self::Output>;
}

pub(crate) fn check_probability(p: f64) -> Result<f64> {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return Err(PgfError::parameter(format!("tuple probability {p} outside [0, 1]")));
    }
    Ok(p)
}
