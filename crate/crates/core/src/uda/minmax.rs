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
use crate::pgf::{MinMaxMode, Overflow, Pgf, TailSide};
use crate::uda::{check_probability, AggConfig, Uda};
use crate::value::{ExtendedValue, ValueScale};

/// MIN or MAX over uncertain tuples.
///
/// Keeps, per distinct value, the product of absence probabilities. With a
/// capacity `k` only the `k` most extreme distinct values (smallest for MIN,
/// largest for MAX) are tracked; the remaining values collapse into one tail
/// bucket placed at the nearest evicted value.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxState {
    mode: MinMaxMode,
    scale: ValueScale,
    capacity: Option<usize>,
    entries: BTreeMap<i64, f64>,
    total_q: f64,
    cutoff: Option<i64>,
}

impl MinMaxState {
    pub fn new(mode: MinMaxMode, scale: ValueScale) -> Self {
        MinMaxState {
            mode,
            scale,
            capacity: None,
            entries: BTreeMap::new(),
            total_q: 1.0,
            cutoff: None,
        }
    }

    /// Top-k variant. A capacity of zero is rejected.
    pub fn with_capacity(mode: MinMaxMode, scale: ValueScale, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(PgfError::parameter("top-k capacity must be positive"));
        }
        Ok(MinMaxState {
            capacity: Some(capacity),
            ..Self::new(mode, scale)
        })
    }

    pub fn mode(&self) -> MinMaxMode {
        self.mode
    }

    pub fn tracked(&self) -> usize {
        self.entries.len()
    }

    /// Tracked `(value, prod (1 - p))` pairs in ascending value order.
    pub fn entries(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.entries.iter().map(|(v, q)| (*v, *q))
    }

    /// True if `v` lies on the far side of the tail bucket.
    fn beyond_cutoff(&self, v: i64) -> bool {
        match (self.cutoff, self.mode) {
            (Some(c), MinMaxMode::Min) => v >= c,
            (Some(c), MinMaxMode::Max) => v <= c,
            (None, _) => false,
        }
    }

    fn least_extreme(&self) -> Option<i64> {
        match self.mode {
            MinMaxMode::Min => self.entries.keys().next_back().copied(),
            MinMaxMode::Max => self.entries.keys().next().copied(),
        }
    }

    fn evict_excess(&mut self) {
        let Some(cap) = self.capacity else { return };
        while self.entries.len() > cap {
            let v = self.least_extreme().expect("non-empty");
            self.entries.remove(&v);
            self.cutoff = Some(match (self.cutoff, self.mode) {
                (Some(c), MinMaxMode::Min) => c.min(v),
                (Some(c), MinMaxMode::Max) => c.max(v),
                (None, _) => v,
            });
        }
    }

    pub fn add(&mut self, p: f64, v: i64) -> Result<()> {
        let p = check_probability(p)?;
        if p == 0.0 {
            return Ok(());
        }
        let q = 1.0 - p;
        self.total_q *= q;
        if self.beyond_cutoff(v) {
            return Ok(());
        }
        *self.entries.entry(v).or_insert(1.0) *= q;
        self.evict_excess();
        Ok(())
    }

    pub fn expand(&self) -> Result<Pgf> {
        let mut terms = Vec::with_capacity(self.entries.len() + 2);
        let mut prefix = 1.0;
        let mut push = |v: i64, q: f64| {
            terms.push((ExtendedValue::Finite(v), prefix * (1.0 - q)));
            prefix *= q;
        };
        match self.mode {
            MinMaxMode::Min => self.entries.iter().for_each(|(v, q)| push(*v, *q)),
            MinMaxMode::Max => self.entries.iter().rev().for_each(|(v, q)| push(*v, *q)),
        }
        let mut overflow = None;
        let neutral = match self.cutoff {
            Some(c) => {
                let tail = (prefix - self.total_q).max(0.0);
                if tail > 0.0 {
                    terms.push((ExtendedValue::Finite(c), tail));
                    overflow = Some(Overflow {
                        at: ExtendedValue::Finite(c),
                        side: match self.mode {
                            MinMaxMode::Min => TailSide::AtLeast,
                            MinMaxMode::Max => TailSide::AtMost,
                        },
                    });
                }
                self.total_q
            }
            None => prefix,
        };
        terms.push((self.mode.neutral(), neutral));
        Ok(Pgf::from_weights(terms, self.scale)?.with_overflow(overflow))
    }
}

impl Uda for MinMaxState {
    type Input = i64;
    type Output = Pgf;

    fn accumulate(&mut self, p: f64, v: &i64) -> Result<()> {
        self.add(p, *v)
    }

    fn merge(&mut self, other: Self) -> Result<()> {
        if self.mode != other.mode || self.capacity != other.capacity || self.scale != other.scale {
            return Err(PgfError::StateMismatch(format!(
                "cannot merge {:?}/{:?} with {:?}/{:?}",
                self.mode, self.capacity, other.mode, other.capacity
            )));
        }
        self.total_q *= other.total_q;
        if let Some(c) = other.cutoff {
            self.cutoff = Some(match (self.cutoff, self.mode) {
                (Some(s), MinMaxMode::Min) => s.min(c),
                (Some(s), MinMaxMode::Max) => s.max(c),
                (None, _) => c,
            });
        }
        for (v, q) in other.entries {
            *self.entries.entry(v).or_insert(1.0) *= q;
        }
        if let Some(c) = self.cutoff {
            match self.mode {
                MinMaxMode::Min => self.entries.retain(|v, _| *v < c),
                MinMaxMode::Max => self.entries.retain(|v, _| *v > c),
            }
        }
        self.evict_excess();
        Ok(())
    }

    fn finalize(self, _: &AggConfig) -> Result<Pgf> {
        self.expand()
    }
}
