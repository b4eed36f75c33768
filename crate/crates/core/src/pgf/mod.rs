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

//! Generalized-exponent polynomials with probability coefficients.
//!
//! A [`Pgf`] is a finite map from [`ExtendedValue`] exponents to positive
//! probabilities summing to one. The exponent monoid decides what the product
//! means: ordinary addition for COUNT and SUM (see [`poly`]), minimum or
//! maximum for MIN and MAX (see [`pgf_mul_minmax`]).

mod dense;
mod interval;
mod minmax;
pub mod poly;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use dense::DenseCountPgf;
pub(crate) use interval::check_level;
pub use interval::confidence_interval;
pub use minmax::{pgf_mul_minmax, MinMaxMode};
pub use poly::{poly_mul, product_tree, DEFAULT_FFT_THRESHOLD};

use crate::error::{PgfError, Result};
use crate::value::{cmp_extended, Decimal, ExtendedValue, ValueScale};

/// Allowed deviation of a distribution's total mass from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "=", alias = "==")]
    Eq,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CompareOp {
    pub fn holds(&self, ord: Ordering) -> bool {
        match self {
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Le => ord != Ordering::Greater,
            CompareOp::Gt => ord == Ordering::Greater,
            CompareOp::Ge => ord != Ordering::Less,
        }
    }

    /// The operator with its operands swapped: `a < b` iff `b > a`.
    pub fn flipped(&self) -> Self {
        match self {
            CompareOp::Eq => CompareOp::Eq,
            CompareOp::Lt => CompareOp::Gt,
            CompareOp::Le => CompareOp::Ge,
            CompareOp::Gt => CompareOp::Lt,
            CompareOp::Ge => CompareOp::Le,
        }
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompareOp::Eq => "=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        })
    }
}

/// Which side of the distribution a truncated tail bucket stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSide {
    /// The bucket holds the mass of every value `>=` its position (MIN).
    AtLeast,
    /// The bucket holds the mass of every value `<=` its position (MAX).
    AtMost,
}

/// Marks one term of a truncated distribution as an aggregated tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overflow {
    pub at: ExtendedValue,
    pub side: TailSide,
}

/// The PGF abstract data type: anything that can answer probability queries
/// about an aggregate whose values live on an integer grid.
pub trait Distribution {
    fn scale(&self) -> ValueScale;

    /// `P(A <= k)` for a grid value `k`, counting any mass at `-inf`.
    fn cdf_at(&self, k: i64) -> f64;

    /// `P(A = k)` for a grid value `k`.
    fn mass_at(&self, k: i64) -> f64;

    fn mass_pos_inf(&self) -> f64 {
        0.0
    }

    fn mass_neg_inf(&self) -> f64 {
        0.0
    }

    /// Mean over the finite part, in grid units. `None` when infinite values
    /// carry mass.
    fn mean(&self) -> Option<f64>;

    fn variance(&self) -> Option<f64>;

    /// Central interval `[lo, hi]` holding at least `level` of the mass.
    fn interval(&self, level: f64) -> Result<(ExtendedValue, ExtendedValue)>;

    /// `P(A op b)` for a scalar `b`.
    fn prob_vs_scalar(&self, op: CompareOp, b: Decimal) -> f64 {
        let scale = self.scale().scale_digits;
        match b.rescaled(scale) {
            Some(k) => {
                let below = self.cdf_at(k.saturating_sub(1));
                let at = self.mass_at(k);
                prob_from_parts(op, below, at)
            }
            None => {
                // b falls strictly between two grid points
                let floor = floor_on_grid(b, scale);
                let below = self.cdf_at(floor);
                prob_from_parts(op, below, 0.0)
            }
        }
    }

    /// `P(A op v)` for an extended value on this distribution's grid.
    fn prob_vs_extended(&self, op: CompareOp, v: ExtendedValue) -> f64 {
        match v {
            ExtendedValue::Finite(k) => self.prob_vs_scalar(
                op,
                Decimal::new(k, self.scale().scale_digits),
            ),
            ExtendedValue::PosInf => {
                let at = self.mass_pos_inf();
                prob_from_parts(op, 1.0 - at, at)
            }
            ExtendedValue::NegInf => prob_from_parts(op, 0.0, self.mass_neg_inf()),
        }
    }
}

fn prob_from_parts(op: CompareOp, below: f64, at: f64) -> f64 {
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    match op {
        CompareOp::Eq => clamp(at),
        CompareOp::Lt => clamp(below),
        CompareOp::Le => clamp(below + at),
        CompareOp::Gt => clamp(1.0 - below - at),
        CompareOp::Ge => clamp(1.0 - below),
    }
}

/// Largest grid point (at `scale` digits) not above `b`.
fn floor_on_grid(b: Decimal, scale: u32) -> i64 {
    if b.scale <= scale {
        return b.rescaled(scale).unwrap_or(if b.raw < 0 { i64::MIN } else { i64::MAX });
    }
    let div = 10i128.pow(b.scale - scale);
    let raw = b.raw as i128;
    raw.div_euclid(div) as i64
}

/// Sparse distribution over extended values.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgf {
    terms: Vec<(ExtendedValue, f64)>,
    scale: ValueScale,
    overflow: Option<Overflow>,
}

impl Pgf {
    /// Builds a distribution from `(value, probability)` pairs, merging
    /// duplicate values and dropping zero terms. The total must be one.
    pub fn from_terms<I>(terms: I, scale: ValueScale) -> Result<Self>
    where
        I: IntoIterator<Item = (ExtendedValue, f64)>,
    {
        let pgf = Self::collect(terms, scale)?;
        let total = pgf.total_mass();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(PgfError::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(pgf)
    }

    /// Like [`Pgf::from_terms`] but rescales the weights to sum to one.
    pub fn from_weights<I>(terms: I, scale: ValueScale) -> Result<Self>
    where
        I: IntoIterator<Item = (ExtendedValue, f64)>,
    {
        let mut pgf = Self::collect(terms, scale)?;
        let total = pgf.total_mass();
        if total <= 0.0 {
            return Err(PgfError::EmptySupport);
        }
        pgf.terms.iter_mut().for_each(|(_, p)| *p /= total);
        Ok(pgf)
    }

    fn collect<I>(terms: I, scale: ValueScale) -> Result<Self>
    where
        I: IntoIterator<Item = (ExtendedValue, f64)>,
    {
        let mut map: BTreeMap<ExtendedValue, f64> = BTreeMap::new();
        for (v, p) in terms {
            if !p.is_finite() || p < 0.0 {
                return Err(PgfError::InvalidDistribution(format!(
                    "probability {p} at {v}"
                )));
            }
            *map.entry(v).or_insert(0.0) += p;
        }
        Ok(Pgf {
            terms: map.into_iter().filter(|(_, p)| *p > 0.0).collect(),
            scale,
            overflow: None,
        })
    }

    pub fn point(value: ExtendedValue, scale: ValueScale) -> Self {
        Pgf {
            terms: vec![(value, 1.0)],
            scale,
            overflow: None,
        }
    }

    /// Sparse view of a dense distribution whose index `k` stands for the
    /// grid value `k + offset`.
    pub fn from_dense(dense: &DenseCountPgf, offset: i64, scale: ValueScale) -> Self {
        let terms: Vec<_> = dense
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0.0)
            .map(|(k, c)| (ExtendedValue::Finite(k as i64 + offset), *c))
            .collect();
        let total: f64 = terms.iter().map(|(_, c)| c).sum();
        let terms = if total > 0.0 && total != 1.0 {
            terms.into_iter().map(|(v, c)| (v, c / total)).collect()
        } else {
            terms
        };
        Pgf {
            terms,
            scale,
            overflow: None,
        }
    }

    pub(crate) fn with_overflow(mut self, overflow: Option<Overflow>) -> Self {
        self.overflow = overflow;
        self
    }

    pub fn terms(&self) -> &[(ExtendedValue, f64)] {
        &self.terms
    }

    pub fn value_scale(&self) -> ValueScale {
        self.scale
    }

    pub fn overflow(&self) -> Option<Overflow> {
        self.overflow
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.terms.iter().map(|(_, p)| p).sum()
    }

    pub fn prob(&self, v: ExtendedValue) -> f64 {
        self.terms
            .binary_search_by(|(x, _)| x.cmp(&v))
            .map(|i| self.terms[i].1)
            .unwrap_or(0.0)
    }

    pub fn min_value(&self) -> Option<ExtendedValue> {
        self.terms.first().map(|(v, _)| *v)
    }

    pub fn max_value(&self) -> Option<ExtendedValue> {
        self.terms.last().map(|(v, _)| *v)
    }

    /// The same distribution on a finer grid.
    pub fn rescaled(&self, scale: ValueScale) -> Result<Self> {
        if scale.scale_digits < self.scale.scale_digits {
            return Err(PgfError::parameter("cannot rescale a distribution to a coarser grid"));
        }
        if scale == self.scale {
            return Ok(self.clone());
        }
        let factor = 10i64.pow(scale.scale_digits - self.scale.scale_digits);
        let map = |v: ExtendedValue| -> Result<ExtendedValue> {
            match v {
                ExtendedValue::Finite(x) => x
                    .checked_mul(factor)
                    .map(ExtendedValue::Finite)
                    .ok_or_else(|| PgfError::parameter("value overflow while rescaling")),
                other => Ok(other),
            }
        };
        let terms = self
            .terms
            .iter()
            .map(|(v, p)| Ok((map(*v)?, *p)))
            .collect::<Result<Vec<_>>>()?;
        let overflow = match self.overflow {
            Some(o) => Some(Overflow {
                at: map(o.at)?,
                side: o.side,
            }),
            None => None,
        };
        Ok(Pgf {
            terms,
            scale,
            overflow,
        })
    }

    /// Applies `f` to every exponent, merging terms that collide.
    pub fn map_values(&self, f: impl Fn(ExtendedValue) -> ExtendedValue) -> Self {
        let mut map: BTreeMap<ExtendedValue, f64> = BTreeMap::new();
        for (v, p) in &self.terms {
            *map.entry(f(*v)).or_insert(0.0) += p;
        }
        Pgf {
            terms: map.into_iter().collect(),
            scale: self.scale,
            overflow: self.overflow.map(|o| Overflow { at: f(o.at), side: o.side }),
        }
    }

    /// Removes the term at `v` and renormalizes; returns the removed mass.
    /// Fails if nothing else remains.
    pub fn condition_excluding(&self, v: ExtendedValue) -> Result<(Pgf, f64)> {
        let removed = self.prob(v);
        let (pgf, _) = truncate_and_renormalize(self, |x| x != v)?;
        Ok((pgf, removed))
    }

    /// Total variation distance to another distribution.
    pub fn total_variation(&self, other: &Pgf) -> f64 {
        let mut all: BTreeMap<ExtendedValue, (f64, f64)> = BTreeMap::new();
        for (v, p) in &self.terms {
            all.entry(*v).or_default().0 += p;
        }
        for (v, p) in &other.terms {
            all.entry(*v).or_default().1 += p;
        }
        0.5 * all.values().map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Mean and variance of the finite part, in grid units.
    fn finite_moments(&self) -> Option<(f64, f64)> {
        if self.terms.iter().any(|(v, _)| !v.is_finite()) {
            return None;
        }
        let mean: f64 = self
            .terms
            .iter()
            .map(|(v, p)| v.finite().unwrap() as f64 * p)
            .sum();
        let var = self
            .terms
            .iter()
            .map(|(v, p)| (v.finite().unwrap() as f64 - mean).powi(2) * p)
            .sum();
        Some((mean, var))
    }
}

impl Distribution for Pgf {
    fn scale(&self) -> ValueScale {
        self.scale
    }

    fn cdf_at(&self, k: i64) -> f64 {
        let bound = ExtendedValue::Finite(k);
        self.terms
            .iter()
            .take_while(|(v, _)| *v <= bound)
            .map(|(_, p)| p)
            .sum()
    }

    fn mass_at(&self, k: i64) -> f64 {
        self.prob(ExtendedValue::Finite(k))
    }

    fn mass_pos_inf(&self) -> f64 {
        self.prob(ExtendedValue::PosInf)
    }

    fn mass_neg_inf(&self) -> f64 {
        self.prob(ExtendedValue::NegInf)
    }

    fn mean(&self) -> Option<f64> {
        self.finite_moments().map(|(m, _)| m)
    }

    fn variance(&self) -> Option<f64> {
        self.finite_moments().map(|(_, v)| v)
    }

    fn interval(&self, level: f64) -> Result<(ExtendedValue, ExtendedValue)> {
        confidence_interval(self, level)
    }

    fn prob_vs_scalar(&self, op: CompareOp, b: Decimal) -> f64 {
        let s = self.scale.scale_digits;
        let p: f64 = self
            .terms
            .iter()
            .filter(|(v, _)| op.holds(cmp_extended(*v, s, b.raw, b.scale)))
            .map(|(_, p)| p)
            .sum();
        p.clamp(0.0, 1.0)
    }
}

/// Right-hand side of a probabilistic comparison.
#[derive(Clone, Copy)]
pub enum CompareTarget<'a> {
    Scalar(Decimal),
    Dist(&'a dyn Distribution),
}

/// `P(a op b)`. A distribution operand is assumed independent of `a`.
pub fn prob_compare(a: &Pgf, op: CompareOp, b: CompareTarget<'_>) -> f64 {
    match b {
        CompareTarget::Scalar(b) => a.prob_vs_scalar(op, b),
        CompareTarget::Dist(b) => {
            let digits = a.scale.scale_digits;
            // a op b  <=>  b flipped(op) a
            let p: f64 = a
                .terms
                .iter()
                .map(|(v, pa)| {
                    pa * match v {
                        ExtendedValue::Finite(x) => {
                            b.prob_vs_scalar(op.flipped(), Decimal::new(*x, digits))
                        }
                        other => b.prob_vs_extended(op.flipped(), *other),
                    }
                })
                .sum();
            p.clamp(0.0, 1.0)
        }
    }
}

/// Keeps only the terms satisfying `keep` and renormalizes. Returns the new
/// distribution with the mass that was retained.
pub fn truncate_and_renormalize(
    a: &Pgf,
    keep: impl Fn(ExtendedValue) -> bool,
) -> Result<(Pgf, f64)> {
    let kept: Vec<_> = a.terms.iter().filter(|(v, _)| keep(*v)).copied().collect();
    let mass: f64 = kept.iter().map(|(_, p)| p).sum();
    if kept.is_empty() || mass <= 0.0 {
        return Err(PgfError::EmptySupport);
    }
    let overflow = a.overflow.filter(|o| keep(o.at));
    Ok((
        Pgf {
            terms: kept.into_iter().map(|(v, p)| (v, p / mass)).collect(),
            scale: a.scale,
            overflow,
        },
        mass,
    ))
}
