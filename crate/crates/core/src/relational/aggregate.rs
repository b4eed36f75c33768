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

//! Grouping with aggregation.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::approx::{MomentState, NormalState};
use crate::error::{PgfError, Result};
use crate::pgf::{MinMaxMode, Pgf};
use crate::relational::table::{AggCell, AggDist, AggKind, Cell, Column, ColumnType, Lineage, ProbTable, Row, Schema};
use crate::uda::{AggConfig, AtLeastOneState, CountState, MinMaxState, SumState, Uda};
use crate::value::{ExtendedValue, ValueScale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Normal,
    Moments,
    Topk,
}

impl Method {
    pub fn supports(&self, kind: AggKind) -> bool {
        match self {
            Method::Exact => true,
            Method::Normal | Method::Moments => matches!(kind, AggKind::Count | AggKind::Sum),
            Method::Topk => matches!(kind, AggKind::Min | AggKind::Max),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Method::Exact | Method::Topk)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Normal => "normal",
            Method::Moments => "moments",
            Method::Topk => "topk",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "normal" => Ok(Method::Normal),
            "moments" => Ok(Method::Moments),
            "topk" => Ok(Method::Topk),
            _ => Err(format!("unknown method `{s}` (expected exact, normal, moments or topk)")),
        }
    }
}

/// One output aggregate of a grouping node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggSpec {
    pub name: String,
    pub kind: AggKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
}

impl AggSpec {
    pub fn new(name: &str, kind: AggKind, column: Option<&str>) -> Self {
        AggSpec {
            name: name.into(),
            kind,
            column: column.map(String::from),
            method: None,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = Some(method);
        self
    }
}

#[derive(Debug, Clone, Copy)]
enum Input {
    Tuple,
    Num(usize, ValueScale),
    Dist(usize, AggKind),
}

#[derive(Debug, Clone)]
struct BoundAgg {
    kind: AggKind,
    method: Method,
    input: Input,
    scale: ValueScale,
}

/// A validated grouping node.
#[derive(Debug, Clone)]
pub struct GroupAggregate {
    keys: Vec<usize>,
    aggs: Vec<BoundAgg>,
    schema: Arc<Schema>,
}

impl GroupAggregate {
    /// `override_method` replaces the method of every aggregate it supports.
    pub fn bind(
        schema: &Arc<Schema>,
        keys: &[String],
        aggs: &[AggSpec],
        override_method: Option<Method>,
    ) -> std::result::Result<Self, Vec<String>> {
        let mut errors = Vec::new();
        let mut key_idx = Vec::new();
        let mut columns = Vec::new();
        for k in keys {
            match schema.resolve(k) {
                Ok(i) if schema.column(i).ty.is_dist() => {
                    errors.push(format!("cannot group by probabilistic column `{k}`"))
                }
                Ok(i) => {
                    key_idx.push(i);
                    columns.push(schema.column(i).clone());
                }
                Err(e) => errors.push(e),
            }
        }
        if aggs.is_empty() && keys.is_empty() {
            errors.push("group_agg needs keys or aggregates".into());
        }
        let mut bound = Vec::new();
        for a in aggs {
            let mut method = a.method.unwrap_or(Method::Exact);
            if !method.supports(a.kind) {
                errors.push(format!("method {method} is not supported for {} (`{}`)", a.kind, a.name));
                continue;
            }
            if let Some(m) = override_method.filter(|m| m.supports(a.kind)) {
                method = m;
            }
            let input = match (&a.column, a.kind) {
                (_, AggKind::Count) => Input::Tuple,
                (None, kind) => {
                    errors.push(format!("{kind} `{}` needs an input column", a.name));
                    continue;
                }
                (Some(c), kind) => match schema.resolve(c) {
                    Err(e) => {
                        errors.push(e);
                        continue;
                    }
                    Ok(i) => match schema.column(i).ty {
                        ColumnType::Number { scale } => Input::Num(i, scale),
                        ColumnType::Text => {
                            errors.push(format!("{kind} over string column `{c}`"));
                            continue;
                        }
                        ColumnType::Dist { exact: false, .. } => {
                            errors.push(format!("{kind} over approximate distribution column `{c}`"));
                            continue;
                        }
                        ColumnType::Dist { kind: from, .. } => {
                            if !method.is_exact() {
                                errors.push(format!(
                                    "method {method} over distribution column `{c}` is not supported"
                                ));
                                continue;
                            }
                            Input::Dist(i, from)
                        }
                    },
                },
            };
            let scale = match input {
                Input::Tuple => ValueScale::INTEGER,
                Input::Num(_, s) => s,
                Input::Dist(i, _) => match schema.column(i).ty {
                    ColumnType::Dist { scale, .. } => scale,
                    _ => unreachable!(),
                },
            };
            columns.push(Column::new(
                a.name.clone(),
                ColumnType::Dist {
                    kind: a.kind,
                    exact: method.is_exact(),
                    scale,
                },
            ));
            bound.push(BoundAgg {
                kind: a.kind,
                method,
                input,
                scale,
            });
        }
        let out = match Schema::new(columns) {
            Ok(s) => Some(s),
            Err(e) => {
                errors.push(format!("group_agg output has a {e}"));
                None
            }
        };
        if !errors.is_empty() {
            return Err(errors);
        }
        let dropped: BTreeSet<String> = schema.dropped().clone();
        Ok(GroupAggregate {
            keys: key_idx,
            aggs: bound,
            schema: Arc::new(out.unwrap().with_dropped(dropped)),
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Accumulates contiguous row chunks on `workers` threads, merges the
    /// partial states in chunk order and finalizes every group.
    pub fn apply(&self, t: &ProbTable, workers: usize, cfg: &AggConfig) -> Result<ProbTable> {
        let rows = t.rows();
        let workers = workers.max(1).min(rows.len().max(1));
        let chunk = rows.len().div_ceil(workers).max(1);
        let partials: Vec<Result<Groups>> = if workers == 1 {
            vec![self.accumulate(rows, cfg)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = rows
                    .chunks(chunk)
                    .map(|part| s.spawn(move || self.accumulate(part, cfg)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("aggregation worker panicked"))
                    .collect()
            })
        };
        let mut merged: Groups = IndexMap::new();
        for part in partials {
            for (key, state) in part? {
                match merged.get_mut(&key) {
                    Some(g) => g.merge(state)?,
                    None => {
                        merged.insert(key, state);
                    }
                }
            }
        }
        if merged.is_empty() && self.keys.is_empty() {
            merged.insert(Vec::new(), self.new_group(cfg)?);
        }

        let groups: Vec<(Vec<Cell>, GroupState)> = merged.into_iter().collect();
        let grouped = !self.keys.is_empty();
        let finish = |(key, g): (Vec<Cell>, GroupState)| g.finalize(key, grouped, cfg);
        let out: Vec<Result<Option<Row>>> = if workers == 1 || groups.len() < 2 {
            groups.into_iter().map(finish).collect()
        } else {
            let per = groups.len().div_ceil(workers);
            let mut batches: Vec<Vec<(Vec<Cell>, GroupState)>> = Vec::new();
            let mut it = groups.into_iter().peekable();
            while it.peek().is_some() {
                batches.push(it.by_ref().take(per).collect());
            }
            std::thread::scope(|s| {
                let handles: Vec<_> = batches
                    .into_iter()
                    .map(|b| s.spawn(move || b.into_iter().map(finish).collect::<Vec<_>>()))
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("aggregation worker panicked"))
                    .collect()
            })
        };
        let mut rows = Vec::with_capacity(out.len());
        for r in out {
            if let Some(row) = r? {
                rows.push(row);
            }
        }
        Ok(ProbTable::from_parts(self.schema.clone(), rows))
    }

    fn new_group(&self, cfg: &AggConfig) -> Result<GroupState> {
        let aggs = self
            .aggs
            .iter()
            .map(|a| AggState::new(a, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupState {
            alo: AtLeastOneState::new(),
            lineages: Vec::new(),
            aggs,
        })
    }

    fn accumulate(&self, rows: &[Row], cfg: &AggConfig) -> Result<Groups> {
        let mut groups: Groups = IndexMap::new();
        for row in rows {
            let key: Vec<Cell> = self.keys.iter().map(|i| row.cells[*i].clone()).collect();
            let g = match groups.get_mut(&key) {
                Some(g) => g,
                None => {
                    let g = self.new_group(cfg)?;
                    groups.entry(key).or_insert(g)
                }
            };
            g.alo.add(row.p)?;
            if !matches!(row.lineage, Lineage::Certain) {
                g.lineages.push(row.lineage.clone());
            }
            for (state, agg) in g.aggs.iter_mut().zip(&self.aggs) {
                state.add(agg, row)?;
            }
        }
        Ok(groups)
    }
}

type Groups = IndexMap<Vec<Cell>, GroupState>;

struct GroupState {
    alo: AtLeastOneState,
    lineages: Vec<Lineage>,
    aggs: Vec<AggState>,
}

impl GroupState {
    fn merge(&mut self, other: GroupState) -> Result<()> {
        self.alo.merge(other.alo)?;
        self.lineages.extend(other.lineages);
        for (a, b) in self.aggs.iter_mut().zip(other.aggs) {
            a.merge(b)?;
        }
        Ok(())
    }

    fn finalize(self, mut cells: Vec<Cell>, grouped: bool, cfg: &AggConfig) -> Result<Option<Row>> {
        let lineage = Lineage::disjoint_union(&self.lineages).map_err(|id| {
            PgfError::Correlated(format!(
                "base tuple {} of table #{} reaches the same group twice",
                id & ((1 << 40) - 1),
                id >> 40
            ))
        })?;
        let p = if grouped { self.alo.probability() } else { 1.0 };
        if p <= 0.0 {
            return Ok(None);
        }
        let q = self.alo.q_product();
        for state in self.aggs {
            let kind = state.kind();
            let dist = state.finalize(cfg)?;
            let (dist, conditioned) = match dist {
                AggDist::Exact(pgf) if grouped => (AggDist::Exact(condition_on_existence(&pgf, kind, q)?), true),
                other => (other, false),
            };
            cells.push(Cell::Dist(Arc::new(AggCell {
                kind,
                dist,
                conditioned,
            })));
        }
        Ok(Some(Row { cells, p, lineage }))
    }
}

const NEUTRAL_ROUND_OFF: f64 = 1e-12;

/// Removes the all-absent outcome, of probability `q`, from the neutral
/// term and renormalizes.
pub fn condition_on_existence(pgf: &Pgf, kind: AggKind, q: f64) -> Result<Pgf> {
    if q <= 0.0 {
        return Ok(pgf.clone());
    }
    let neutral = kind.neutral();
    let terms = pgf.terms().iter().map(|(v, p)| {
        if *v != neutral {
            return (*v, *p);
        }
        // the neutral mass and q are computed separately, so a remainder at
        // round-off level stands for zero
        let rest = p - q;
        (*v, if rest <= NEUTRAL_ROUND_OFF * p { 0.0 } else { rest })
    });
    Ok(Pgf::from_weights(terms, pgf.value_scale())?.with_overflow(pgf.overflow()))
}

enum AggState {
    Count(CountState),
    Sum(SumState),
    Normal(AggKind, NormalState),
    Moments(AggKind, MomentState),
    MinMax(AggKind, MinMaxState),
    DistMinMax(AggKind, DistMinMaxState),
}

fn mode(kind: AggKind) -> MinMaxMode {
    match kind {
        AggKind::Min => MinMaxMode::Min,
        _ => MinMaxMode::Max,
    }
}

impl AggState {
    fn new(a: &BoundAgg, cfg: &AggConfig) -> Result<Self> {
        Ok(match (a.kind, a.method, a.input) {
            (AggKind::Count, Method::Exact, _) => AggState::Count(CountState::new()),
            (AggKind::Sum, Method::Exact, _) => AggState::Sum(SumState::new(a.scale)),
            (k, Method::Normal, _) => AggState::Normal(k, NormalState::new(a.scale)),
            (k, Method::Moments, _) => AggState::Moments(k, MomentState::new(a.scale, cfg.mixture_components)?),
            (k, _, Input::Dist(_, from)) => AggState::DistMinMax(k, DistMinMaxState::new(k, from, a.scale)),
            (k, Method::Topk, _) => AggState::MinMax(k, MinMaxState::with_capacity(mode(k), a.scale, cfg.topk_capacity)?),
            (k, _, _) => AggState::MinMax(k, MinMaxState::new(mode(k), a.scale)),
        })
    }

    fn kind(&self) -> AggKind {
        match self {
            AggState::Count(_) => AggKind::Count,
            AggState::Sum(_) => AggKind::Sum,
            AggState::Normal(k, _)
            | AggState::Moments(k, _)
            | AggState::MinMax(k, _)
            | AggState::DistMinMax(k, _) => *k,
        }
    }

    fn add(&mut self, a: &BoundAgg, row: &Row) -> Result<()> {
        let value = || -> Result<i64> {
            match a.input {
                Input::Tuple => Ok(1),
                Input::Num(i, scale) => {
                    let d = row.cells[i].as_num().expect("typed numeric column");
                    d.rescaled(scale.scale_digits)
                        .ok_or_else(|| PgfError::OffGrid {
                            value: d.to_string(),
                            scale_digits: scale.scale_digits,
                        })
                }
                Input::Dist(..) => unreachable!(),
            }
        };
        let dist = || -> &Pgf {
            match a.input {
                Input::Dist(i, _) => {
                    let cell = row.cells[i].as_agg().expect("typed distribution column");
                    cell.dist.exact().expect("bind checked exactness")
                }
                _ => unreachable!(),
            }
        };
        match self {
            AggState::Count(s) => s.add(row.p),
            AggState::Sum(s) => match a.input {
                Input::Dist(..) => s.add_distribution(row.p, dist()),
                _ => s.add(row.p, value()?),
            },
            AggState::Normal(_, s) => s.add(row.p, value()?),
            AggState::Moments(_, s) => s.add(row.p, value()?),
            AggState::MinMax(_, s) => s.add(row.p, value()?),
            AggState::DistMinMax(_, s) => s.add(row.p, dist()),
        }
    }

    fn merge(&mut self, other: AggState) -> Result<()> {
        match (self, other) {
            (AggState::Count(a), AggState::Count(b)) => a.merge(b),
            (AggState::Sum(a), AggState::Sum(b)) => a.merge(b),
            (AggState::Normal(_, a), AggState::Normal(_, b)) => a.merge(b),
            (AggState::Moments(_, a), AggState::Moments(_, b)) => a.merge(b),
            (AggState::MinMax(_, a), AggState::MinMax(_, b)) => a.merge(b),
            (AggState::DistMinMax(_, a), AggState::DistMinMax(_, b)) => {
                a.factors.extend(b.factors);
                Ok(())
            }
            _ => Err(PgfError::StateMismatch("aggregate states of different kinds".into())),
        }
    }

    fn finalize(self, cfg: &AggConfig) -> Result<AggDist> {
        Ok(match self {
            AggState::Count(s) => {
                let dense = s.finalize(cfg)?;
                AggDist::Exact(Pgf::from_dense(&dense, 0, ValueScale::INTEGER))
            }
            AggState::Sum(s) => AggDist::Exact(s.finalize(cfg)?),
            AggState::Normal(_, s) => AggDist::Approx(s.finalize(cfg)?),
            AggState::Moments(_, s) => AggDist::Approx(s.finalize(cfg)?),
            AggState::MinMax(_, s) => AggDist::Exact(s.finalize(cfg)?),
            AggState::DistMinMax(_, s) => AggDist::Exact(s.expand()?),
        })
    }
}

/// MIN or MAX over tuples whose attribute is itself a distribution. The
/// neutral outcome of a MIN input becomes the neutral outcome of MAX and
/// vice versa.
#[derive(Debug, Clone)]
pub struct DistMinMaxState {
    kind: AggKind,
    from: AggKind,
    scale: ValueScale,
    factors: Vec<(f64, Pgf)>,
}

impl DistMinMaxState {
    pub fn new(kind: AggKind, from: AggKind, scale: ValueScale) -> Self {
        DistMinMaxState {
            kind,
            from,
            scale,
            factors: Vec::new(),
        }
    }

    pub fn add(&mut self, p: f64, dist: &Pgf) -> Result<()> {
        if p == 0.0 {
            return Ok(());
        }
        let target = self.kind.neutral();
        let source = self.from.neutral();
        let remap = matches!(self.from, AggKind::Min | AggKind::Max) && source != target;
        let negate = self.kind == AggKind::Max;
        let dist = dist.rescaled(self.scale)?.map_values(|v| {
            let v = if remap && v == source { target } else { v };
            if negate {
                v.negate()
            } else {
                v
            }
        });
        self.factors.push((p, dist));
        Ok(())
    }

    /// `P(min >= v) = prod_i (1 - p_i + p_i P(X_i >= v))` evaluated over the
    /// union of supports. MAX runs the same recursion on negated values.
    pub fn expand(&self) -> Result<Pgf> {
        let mut support: BTreeSet<ExtendedValue> = BTreeSet::new();
        support.insert(ExtendedValue::PosInf);
        for (_, d) in &self.factors {
            support.extend(d.terms().iter().map(|(v, _)| *v));
        }
        let support: Vec<ExtendedValue> = support.into_iter().collect();
        let mut survival = vec![1.0; support.len()];
        for (p, d) in &self.factors {
            // walk the support from the top, accumulating P(X >= v)
            let terms = d.terms();
            let mut t = terms.len();
            let mut tail = 0.0;
            for (j, v) in support.iter().enumerate().rev() {
                while t > 0 && terms[t - 1].0 >= *v {
                    tail += terms[t - 1].1;
                    t -= 1;
                }
                survival[j] *= 1.0 - p + p * tail.min(1.0);
            }
        }
        let mut terms = Vec::with_capacity(support.len());
        for j in 0..support.len() {
            let next = survival.get(j + 1).copied().unwrap_or(0.0);
            terms.push((support[j], (survival[j] - next).max(0.0)));
        }
        let pgf = Pgf::from_weights(terms, self.scale)?;
        Ok(if self.kind == AggKind::Max {
            pgf.map_values(|v| v.negate())
        } else {
            pgf
        })
    }
}
