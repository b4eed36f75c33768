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

use std::collections::BTreeMap;

use crate::error::{PgfError, Result};
use crate::pgf::{product_tree, DenseCountPgf, Pgf};
use crate::uda::{check_probability, AggConfig, CountState, Uda};
use crate::value::{ExtendedValue, ValueScale};

/// SUM over uncertain tuples.
///
/// Tuples are grouped by attribute value; each group of `n` tuples sharing
/// value `a` contributes its COUNT distribution evaluated at `X^a`. Tuples
/// that carry a whole distribution (a SUM over an aggregated column) add a
/// factor `(1 - p) + p * B(X)` each.
#[derive(Debug, Clone, PartialEq)]
pub struct SumState {
    scale: ValueScale,
    groups: BTreeMap<i64, CountState>,
    dist_factors: Vec<(f64, Pgf)>,
}

impl SumState {
    pub fn new(scale: ValueScale) -> Self {
        SumState {
            scale,
            groups: BTreeMap::new(),
            dist_factors: Vec::new(),
        }
    }

    pub fn add(&mut self, p: f64, v: i64) -> Result<()> {
        let p = check_probability(p)?;
        if p > 0.0 {
            self.groups.entry(v).or_default().add(p)?;
        }
        Ok(())
    }

    /// Adds a tuple whose value is itself random. Infinite exponents count
    /// as zero.
    pub fn add_distribution(&mut self, p: f64, dist: &Pgf) -> Result<()> {
        let p = check_probability(p)?;
        if p == 0.0 {
            return Ok(());
        }
        let dist = dist.rescaled(self.scale)?.map_values(|v| match v {
            ExtendedValue::Finite(_) => v,
            _ => ExtendedValue::Finite(0),
        });
        self.dist_factors.push((p, dist));
        Ok(())
    }

    /// Sum of `|a| * n_a` over all groups plus the spans of random factors.
    pub fn dense_degree(&self) -> u64 {
        let groups: u128 = self
            .groups
            .iter()
            .map(|(a, c)| a.unsigned_abs() as u128 * c.max_count() as u128)
            .sum();
        let dists: u128 = self
            .dist_factors
            .iter()
            .map(|(_, d)| span(d).map(|(lo, hi)| (hi - lo) as u128).unwrap_or(0))
            .sum();
        (groups + dists).min(u64::MAX as u128) as u64
    }

    pub fn expand(&self, cfg: &AggConfig) -> Result<Pgf> {
        let degree = self.dense_degree();
        if degree > cfg.max_dense_degree {
            return Err(PgfError::SumSupportTooLarge {
                degree,
                max: cfg.max_dense_degree,
            });
        }
        let mut offset: i64 = 0;
        let mut factors = Vec::new();
        for (a, group) in &self.groups {
            if *a == 0 {
                continue;
            }
            let count = group.expand(cfg.fft_threshold)?;
            let stride = a.unsigned_abs() as usize;
            if *a > 0 {
                factors.push(count.stretch(stride));
            } else {
                // value a*k for k present; reversing indexes by n - k
                let n = count.degree();
                let mut rev = count.into_coeffs();
                rev.reverse();
                factors.push(DenseCountPgf::new_unchecked(rev).stretch(stride));
                offset -= (stride * n) as i64;
            }
        }
        for (p, dist) in &self.dist_factors {
            let (lo, hi) = span(dist).unwrap_or((0, 0));
            let lo = lo.min(0);
            let hi = hi.max(0);
            let mut coeffs = vec![0.0; (hi - lo) as usize + 1];
            coeffs[(-lo) as usize] += 1.0 - p;
            for (v, q) in dist.terms() {
                let v = v.finite().expect("finite after mapping");
                coeffs[(v - lo) as usize] += p * q;
            }
            factors.push(DenseCountPgf::new_unchecked(coeffs));
            offset += lo;
        }
        if factors.is_empty() {
            return Ok(Pgf::point(ExtendedValue::Finite(0), self.scale));
        }
        let dense = product_tree(factors, cfg.fft_threshold)?;
        Ok(Pgf::from_dense(&dense, offset, self.scale))
    }
}

fn span(d: &Pgf) -> Option<(i64, i64)> {
    let lo = d.min_value()?.finite()?;
    let hi = d.max_value()?.finite()?;
    Some((lo, hi))
}

impl Uda for SumState {
    type Input = i64;
    type Output = Pgf;

    fn accumulate(&mut self, p: f64, v: &i64) -> Result<()> {
        self.add(p, *v)
    }

    fn merge(&mut self, other: Self) -> Result<()> {
        if self.scale != other.scale {
            return Err(PgfError::StateMismatch(format!(
                "cannot merge sums at {} and {} digits",
                self.scale.scale_digits, other.scale.scale_digits
            )));
        }
        for (a, c) in other.groups {
            self.groups.entry(a).or_default().merge(c)?;
        }
        self.dist_factors.extend(other.dist_factors);
        Ok(())
    }

    fn finalize(self, cfg: &AggConfig) -> Result<Pgf> {
        self.expand(cfg)
    }
}
