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

use crate::error::Result;
use crate::uda::{check_probability, AggConfig, Uda};

/// Running `sum ln(1 - p_i)`, so that `1 - prod (1 - p_i)` keeps full
/// relative precision when every `p_i` is tiny.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct AtLeastOneState {
    pub log_q: f64,
}

impl AtLeastOneState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, p: f64) -> Result<()> {
        self.log_q += (-check_probability(p)?).ln_1p();
        Ok(())
    }

    /// `prod (1 - p_i)`, the probability that no tuple is present.
    pub fn q_product(&self) -> f64 {
        self.log_q.exp()
    }

    pub fn probability(&self) -> f64 {
        (-self.log_q.exp_m1()).clamp(0.0, 1.0)
    }
}

impl Uda for AtLeastOneState {
    type Input = ();
    type Output = f64;

    fn accumulate(&mut self, p: f64, _: &()) -> Result<()> {
        self.add(p)
    }

    fn merge(&mut self, other: Self) -> Result<()> {
        self.log_q += other.log_q;
        Ok(())
    }

    fn finalize(self, _: &AggConfig) -> Result<f64> {
        Ok(self.probability())
    }
}

/// `1 - prod (1 - p_i)` over a stream of probabilities.
pub fn at_least_one<I: IntoIterator<Item = f64>>(probs: I) -> Result<f64> {
    let mut s = AtLeastOneState::new();
    for p in probs {
        s.add(p)?;
    }
    Ok(s.probability())
}
