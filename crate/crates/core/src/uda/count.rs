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

use crate::error::Result;
use crate::pgf::{product_tree, DenseCountPgf};
use crate::uda::{check_probability, AggConfig, Uda};

/// COUNT as a Poisson-binomial product `prod (q_i + p_i X)`.
///
/// Tuples with `p = 0` are skipped and tuples with `p = 1` only shift the
/// result, so the pending factor list holds strictly uncertain tuples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountState {
    probs: Vec<f64>,
    certain: usize,
}

impl CountState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, p: f64) -> Result<()> {
        let p = check_probability(p)?;
        if p == 1.0 {
            self.certain += 1;
        } else if p > 0.0 {
            self.probs.push(p);
        }
        Ok(())
    }

    /// Number of tuples that can be present.
    pub fn max_count(&self) -> usize {
        self.probs.len() + self.certain
    }

    pub fn pending(&self) -> &[f64] {
        &self.probs
    }

    pub fn expand(&self, fft_threshold: usize) -> Result<DenseCountPgf> {
        let base = if self.probs.is_empty() {
            DenseCountPgf::one()
        } else {
            let factors = self
                .probs
                .iter()
                .map(|p| DenseCountPgf::new_unchecked(vec![1.0 - p, *p]))
                .collect();
            product_tree(factors, fft_threshold)?
        };
        Ok(base.shift(self.certain))
    }
}

impl Uda for CountState {
    type Input = ();
    type Output = DenseCountPgf;

    fn accumulate(&mut self, p: f64, _: &()) -> Result<()> {
        self.add(p)
    }

    fn merge(&mut self, other: Self) -> Result<()> {
        self.probs.extend(other.probs);
        self.certain += other.certain;
        Ok(())
    }

    fn finalize(self, cfg: &AggConfig) -> Result<DenseCountPgf> {
        self.expand(cfg.fft_threshold)
    }
}
