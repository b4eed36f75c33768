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

//! Brute-force evaluation over every possible world.
//!
//! Each uncertain base tuple is either present or absent; a world is a
//! bitmask over those tuples. The plan is run on every world with all
//! probabilities fixed to one, and results are accumulated by weight.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{PgfError, Result};
use crate::pgf::Pgf;
use crate::plan::{execute, validate, EngineConfig, QueryPlan};
use crate::relational::{AggCell, AggDist, Cell, ColumnType, Lineage, Method, ProbTable, Row, Schema};
use crate::uda::AggConfig;
use crate::value::ExtendedValue;

pub const ORACLE_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseTuple {
    pub table: usize,
    pub row: usize,
    pub p: f64,
}

/// The uncertain tuples of a set of tables, in table then row order.
#[derive(Debug, Clone)]
pub struct WorldEnumeration {
    names: Vec<String>,
    tuples: Vec<BaseTuple>,
}

impl WorldEnumeration {
    pub fn new<'a>(tables: impl IntoIterator<Item = (&'a str, &'a ProbTable)>) -> Result<Self> {
        let mut names = Vec::new();
        let mut tuples = Vec::new();
        for (t, (name, table)) in tables.into_iter().enumerate() {
            names.push(name.to_string());
            for (r, row) in table.rows().iter().enumerate() {
                if row.p > 0.0 && row.p < 1.0 {
                    tuples.push(BaseTuple { table: t, row: r, p: row.p });
                }
            }
        }
        if tuples.len() > ORACLE_LIMIT {
            return Err(PgfError::OracleTooLarge {
                limit: ORACLE_LIMIT,
                found: tuples.len(),
            });
        }
        Ok(WorldEnumeration { names, tuples })
    }

    pub fn tuples(&self) -> &[BaseTuple] {
        &self.tuples
    }

    pub fn worlds(&self) -> u64 {
        1 << self.tuples.len()
    }

    /// Bit `i` of `mask` set means tuple `i` is present.
    pub fn weight(&self, mask: u64) -> f64 {
        self.tuples
            .iter()
            .enumerate()
            .map(|(i, t)| if mask >> i & 1 == 1 { t.p } else { 1.0 - t.p })
            .product()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.worlds()).map(|m| self.weight(m)).collect()
    }

    /// The deterministic tables of one world; every row has probability one.
    pub fn world(&self, tables: &[&ProbTable], mask: u64) -> Vec<ProbTable> {
        let mut present: Vec<Vec<bool>> = tables.iter().map(|t| t.rows().iter().map(|r| r.p >= 1.0).collect()).collect();
        for (i, t) in self.tuples.iter().enumerate() {
            present[t.table][t.row] = mask >> i & 1 == 1;
        }
        tables
            .iter()
            .zip(present)
            .map(|(t, keep)| {
                let rows = t
                    .rows()
                    .iter()
                    .zip(keep)
                    .filter(|(_, k)| *k)
                    .map(|(r, _)| Row::new(r.cells.clone(), 1.0))
                    .collect();
                ProbTable::from_parts(t.schema().clone(), rows)
            })
            .collect()
    }

    pub fn table_names(&self) -> &[String] {
        &self.names
    }
}

/// Accumulated mass of one output key: `presence[k]` is the probability
/// that at least `k + 1` rows carry the key; `values[k][j]` is the mass of
/// each value of distribution column `j` on the `k`-th such row.
#[derive(Debug, Clone, Default)]
struct KeyMass {
    presence: Vec<f64>,
    values: Vec<Vec<BTreeMap<ExtendedValue, f64>>>,
}

type Accumulator = IndexMap<Vec<Cell>, KeyMass>;

fn scalar_key(row: &Row) -> Vec<Cell> {
    row.cells.iter().filter(|c| !matches!(c, Cell::Dist(_))).cloned().collect()
}

fn accumulate_world(acc: &mut Accumulator, result: &ProbTable, w: f64, dist_cols: &[usize]) {
    let mut ordinal: HashMap<Vec<Cell>, usize> = HashMap::new();
    for row in result.rows() {
        let key = scalar_key(row);
        let k = {
            let e = ordinal.entry(key.clone()).or_insert(0);
            *e += 1;
            *e - 1
        };
        let mass = acc.entry(key).or_default();
        if mass.presence.len() <= k {
            mass.presence.resize(k + 1, 0.0);
            mass.values.resize(k + 1, vec![BTreeMap::new(); dist_cols.len()]);
        }
        let rw = w * row.p;
        mass.presence[k] += rw;
        for (j, &c) in dist_cols.iter().enumerate() {
            let agg = row.cells[c].as_agg().expect("distribution column");
            let pgf = agg.dist.exact().expect("oracle runs exact aggregates");
            for (v, q) in pgf.terms() {
                *mass.values[k][j].entry(*v).or_insert(0.0) += rw * q;
            }
        }
    }
}

/// Runs `plan` on every world of the tables it scans. Aggregates are forced
/// to their exact method. The result has one row per distinct scalar key
/// and occurrence, carrying the existence probability and the aggregate
/// distributions conditioned on existence.
pub fn enumerate_eval(plan: &QueryPlan, data: &BTreeMap<String, ProbTable>, workers: usize) -> Result<ProbTable> {
    let scanned = plan.scanned_tables();
    let mut tables: Vec<(&str, &ProbTable)> = Vec::new();
    for name in &scanned {
        match data.get(name) {
            Some(t) => tables.push((name.as_str(), t)),
            None => return Err(PgfError::Validation(vec![format!("table `{name}` was not loaded")])),
        }
    }
    let worlds = WorldEnumeration::new(tables.iter().copied())?;
    let schemas: BTreeMap<String, Arc<Schema>> = data.iter().map(|(n, t)| (n.clone(), t.schema().clone())).collect();
    let validated = validate(plan, &schemas, Some(Method::Exact))?;
    let refs: Vec<&ProbTable> = tables.iter().map(|(_, t)| *t).collect();
    let schema = validated.schema().clone();
    let dist_cols: Vec<usize> = (0..schema.len()).filter(|i| schema.column(*i).ty.is_dist()).collect();

    let run = |range: std::ops::Range<u64>| -> Result<Accumulator> {
        let cfg = EngineConfig {
            workers: 1,
            agg: AggConfig::default(),
        };
        let mut acc = Accumulator::new();
        for mask in range {
            let w = worlds.weight(mask);
            let world = worlds.world(&refs, mask);
            let db: BTreeMap<String, ProbTable> = tables.iter().map(|(n, _)| n.to_string()).zip(world).collect();
            let result = execute(&validated, &db, &cfg)?;
            accumulate_world(&mut acc, &result, w, &dist_cols);
        }
        Ok(acc)
    };
    let total = worlds.worlds();
    let workers = (workers.max(1) as u64).min(total);
    let parts: Vec<Result<Accumulator>> = if workers == 1 {
        vec![run(0..total)]
    } else {
        let step = total.div_ceil(workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|i| {
                    let run = &run;
                    s.spawn(move || run(i * step..((i + 1) * step).min(total)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("oracle worker panicked")).collect()
        })
    };
    let mut acc = Accumulator::new();
    for part in parts {
        for (key, m) in part? {
            let e = acc.entry(key).or_default();
            if e.presence.len() < m.presence.len() {
                e.presence.resize(m.presence.len(), 0.0);
                e.values.resize(m.presence.len(), vec![BTreeMap::new(); dist_cols.len()]);
            }
            for (k, p) in m.presence.iter().enumerate() {
                e.presence[k] += p;
                for (j, vals) in m.values[k].iter().enumerate() {
                    for (v, q) in vals {
                        *e.values[k][j].entry(*v).or_insert(0.0) += q;
                    }
                }
            }
        }
    }
    build_result(schema, acc, &dist_cols)
}

fn build_result(schema: Arc<Schema>, acc: Accumulator, dist_cols: &[usize]) -> Result<ProbTable> {
    let mut rows = Vec::new();
    for (key, mass) in acc {
        for (k, p) in mass.presence.iter().enumerate() {
            if *p <= 0.0 {
                continue;
            }
            let mut scalars = key.iter();
            let mut dists = dist_cols.iter().enumerate();
            let mut cells = Vec::with_capacity(schema.len());
            for i in 0..schema.len() {
                match schema.column(i).ty {
                    ColumnType::Dist { kind, scale, .. } => {
                        let (j, _) = dists.next().expect("distribution column");
                        let terms = mass.values[k][j].iter().map(|(v, q)| (*v, q / p));
                        let pgf = Pgf::from_weights(terms, scale)?;
                        cells.push(Cell::Dist(Arc::new(AggCell {
                            kind,
                            dist: AggDist::Exact(pgf),
                            conditioned: true,
                        })));
                    }
                    _ => cells.push(scalars.next().expect("scalar column").clone()),
                }
            }
            rows.push(Row {
                cells,
                p: p.min(1.0),
                lineage: Lineage::Certain,
            });
        }
    }
    ProbTable::new(schema, rows)
}

/// Differences between an engine result and an oracle result, after
/// collapsing both to expected multiplicity per scalar key and the
/// multiplicity-weighted distribution of every aggregate column.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Comparison {
    pub keys: usize,
    pub max_probability_diff: f64,
    pub max_total_variation: f64,
    pub mismatches: Vec<String>,
}

impl Comparison {
    pub fn within(&self, tol: f64) -> bool {
        self.mismatches.is_empty() && self.max_probability_diff <= tol && self.max_total_variation <= tol
    }
}

type Collapsed = IndexMap<Vec<Cell>, (f64, Vec<BTreeMap<ExtendedValue, f64>>)>;

fn collapse(t: &ProbTable) -> std::result::Result<Collapsed, String> {
    let dist_cols: Vec<usize> = (0..t.schema().len()).filter(|i| t.schema().column(*i).ty.is_dist()).collect();
    let mut out: Collapsed = IndexMap::new();
    for row in t.rows() {
        let e = out
            .entry(scalar_key(row))
            .or_insert_with(|| (0.0, vec![BTreeMap::new(); dist_cols.len()]));
        e.0 += row.p;
        for (j, &c) in dist_cols.iter().enumerate() {
            let agg = row.cells[c].as_agg().expect("distribution column");
            let pgf = agg
                .dist
                .exact()
                .ok_or_else(|| format!("column `{}` is approximate", t.schema().column(c).name))?;
            for (v, q) in pgf.terms() {
                *e.1[j].entry(*v).or_insert(0.0) += row.p * q;
            }
        }
    }
    Ok(out)
}

fn key_label(key: &[Cell]) -> String {
    format!("({})", key.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "))
}

pub fn compare(engine: &ProbTable, oracle: &ProbTable) -> Comparison {
    let mut cmp = Comparison::default();
    let (a, b) = match (collapse(engine), collapse(oracle)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            cmp.mismatches.push(e);
            return cmp;
        }
    };
    let empty = (0.0, Vec::new());
    let mut keys: Vec<&Vec<Cell>> = a.keys().collect();
    keys.extend(b.keys().filter(|k| !a.contains_key(*k)));
    cmp.keys = keys.len();
    for key in keys {
        let x = a.get(key).unwrap_or(&empty);
        let y = b.get(key).unwrap_or(&empty);
        let diff = (x.0 - y.0).abs();
        cmp.max_probability_diff = cmp.max_probability_diff.max(diff);
        if (x.0 == 0.0) != (y.0 == 0.0) && diff > 1e-12 {
            cmp.mismatches.push(format!("key {} only on one side (p {} vs {})", key_label(key), x.0, y.0));
            continue;
        }
        let cols = x.1.len().max(y.1.len());
        for j in 0..cols {
            let none = BTreeMap::new();
            let dx = x.1.get(j).unwrap_or(&none);
            let dy = y.1.get(j).unwrap_or(&none);
            let mut tv = 0.0;
            for v in dx.keys().chain(dy.keys().filter(|v| !dx.contains_key(v))) {
                let px = dx.get(v).copied().unwrap_or(0.0) / x.0.max(f64::MIN_POSITIVE);
                let py = dy.get(v).copied().unwrap_or(0.0) / y.0.max(f64::MIN_POSITIVE);
                tv += (px - py).abs();
            }
            cmp.max_total_variation = cmp.max_total_variation.max(0.5 * tv);
        }
    }
    cmp
}
