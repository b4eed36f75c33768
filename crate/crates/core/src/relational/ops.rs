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

//! Selection, probabilistic selection, projection and join.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{PgfError, Result};
use crate::pgf::{prob_compare, truncate_and_renormalize, CompareOp, CompareTarget};
use crate::relational::predicate::{BoundPredicate, Literal, Operand, Predicate};
use crate::relational::table::{AggCell, AggDist, Cell, Column, ColumnType, Lineage, ProbTable, Row, Schema};
use crate::uda::AtLeastOneState;
use crate::value::{cmp_extended, Decimal};

type BindResult<T> = std::result::Result<T, Vec<String>>;

fn correlated(id: u64) -> PgfError {
    PgfError::Correlated(format!(
        "base tuple {} of table #{} contributes twice to the same result",
        id & ((1 << 40) - 1),
        id >> 40
    ))
}

/// Deterministic selection: keeps matching rows unchanged.
#[derive(Debug, Clone)]
pub struct Select {
    predicate: BoundPredicate,
    schema: Arc<Schema>,
}

impl Select {
    pub fn bind(schema: &Arc<Schema>, predicate: &Predicate) -> BindResult<Self> {
        let mut errors = Vec::new();
        match predicate.bind(schema, &mut errors) {
            Some(p) => Ok(Select {
                predicate: p,
                schema: schema.clone(),
            }),
            None => Err(errors),
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn apply(&self, t: &ProbTable) -> ProbTable {
        let rows = t
            .rows()
            .iter()
            .filter(|r| self.predicate.eval(&r.cells))
            .cloned()
            .collect();
        ProbTable::from_parts(self.schema.clone(), rows)
    }
}

#[derive(Debug, Clone)]
enum PsSide {
    Dist(usize),
    Num(usize),
    Lit(Decimal),
}

/// Selection on a condition involving a distribution-valued column. The
/// tuple probability is multiplied by the probability of the condition.
#[derive(Debug, Clone)]
pub struct ProbSelect {
    left: PsSide,
    cmp: CompareOp,
    right: PsSide,
    keep: Vec<usize>,
    /// Input index of the distribution column kept in truncated form.
    retained: Option<usize>,
    schema: Arc<Schema>,
}

impl ProbSelect {
    pub fn bind(
        schema: &Arc<Schema>,
        left: &Operand,
        cmp: CompareOp,
        right: &Operand,
        retain: bool,
    ) -> BindResult<Self> {
        let mut errors = Vec::new();
        let mut side = |o: &Operand| -> Option<PsSide> {
            match o {
                Operand::Column(c) => match schema.resolve(c) {
                    Ok(i) => match schema.column(i).ty {
                        ColumnType::Dist { .. } => Some(PsSide::Dist(i)),
                        ColumnType::Number { .. } => Some(PsSide::Num(i)),
                        ColumnType::Text => {
                            errors.push(format!("probabilistic comparison with string column `{c}`"));
                            None
                        }
                    },
                    Err(e) => {
                        errors.push(e);
                        None
                    }
                },
                Operand::Value(Literal::Num(d)) => Some(PsSide::Lit(*d)),
                Operand::Value(Literal::Text(t)) => match Decimal::parse(t) {
                    Ok(d) => Some(PsSide::Lit(d)),
                    Err(_) => {
                        errors.push(format!("`{t}` is not a number"));
                        None
                    }
                },
            }
        };
        let l = side(left);
        let r = side(right);
        let (Some(l), Some(r)) = (l, r) else {
            return Err(errors);
        };
        let dists: Vec<usize> = [&l, &r]
            .iter()
            .filter_map(|s| match s {
                PsSide::Dist(i) => Some(*i),
                _ => None,
            })
            .collect();
        if dists.is_empty() {
            return Err(vec!["prob_select needs a probabilistic operand; use select".into()]);
        }
        if dists.len() == 2 && dists[0] == dists[1] {
            return Err(vec!["prob_select compares a column with itself".into()]);
        }
        let both_approx = dists.len() == 2
            && dists
                .iter()
                .all(|i| matches!(schema.column(*i).ty, ColumnType::Dist { exact: false, .. }));
        if both_approx {
            return Err(vec!["cannot compare two approximate distributions".into()]);
        }
        let retained = if retain {
            if dists.len() != 1 {
                return Err(vec!["retain needs exactly one probabilistic operand".into()]);
            }
            if matches!(schema.column(dists[0]).ty, ColumnType::Dist { exact: false, .. }) {
                return Err(vec!["retain needs an exact distribution".into()]);
            }
            Some(dists[0])
        } else {
            None
        };
        let keep: Vec<usize> = (0..schema.len())
            .filter(|i| !dists.contains(i) || retained == Some(*i))
            .collect();
        let mut dropped: BTreeSet<String> = schema.dropped().clone();
        for i in &dists {
            if retained != Some(*i) {
                dropped.insert(schema.column(*i).name.clone());
            }
        }
        let out = Schema::new(keep.iter().map(|i| schema.column(*i).clone()).collect())
            .expect("subset of a valid schema")
            .with_dropped(dropped);
        Ok(ProbSelect {
            left: l,
            cmp,
            right: r,
            keep,
            retained,
            schema: Arc::new(out),
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    fn probability(&self, row: &[Cell]) -> Result<f64> {
        let dist = |i: &usize| -> &AggCell { row[*i].as_agg().expect("typed distribution column") };
        let scalar = |s: &PsSide| -> Decimal {
            match s {
                PsSide::Num(i) => row[*i].as_num().expect("typed numeric column"),
                PsSide::Lit(d) => *d,
                PsSide::Dist(_) => unreachable!(),
            }
        };
        Ok(match (&self.left, &self.right) {
            (PsSide::Dist(a), PsSide::Dist(b)) => {
                let (a, b) = (dist(a), dist(b));
                match (&a.dist, &b.dist) {
                    (AggDist::Exact(x), other) => prob_compare(x, self.cmp, CompareTarget::Dist(other.as_dist())),
                    (other, AggDist::Exact(y)) => {
                        prob_compare(y, self.cmp.flipped(), CompareTarget::Dist(other.as_dist()))
                    }
                    _ => return Err(PgfError::Unsupported("comparing two approximate distributions".into())),
                }
            }
            (PsSide::Dist(a), s) => dist(a).dist.as_dist().prob_vs_scalar(self.cmp, scalar(s)),
            (s, PsSide::Dist(b)) => dist(b).dist.as_dist().prob_vs_scalar(self.cmp.flipped(), scalar(s)),
            _ => unreachable!("bind requires a distribution operand"),
        })
    }

    pub fn apply(&self, t: &ProbTable) -> Result<ProbTable> {
        let mut rows = Vec::new();
        for (n, row) in t.rows().iter().enumerate() {
            let prob = self
                .probability(&row.cells)
                .map_err(|e| PgfError::parameter(format!("row {n}: {e}")))?;
            let p = row.p * prob;
            if p <= 0.0 {
                continue;
            }
            let mut cells: Vec<Cell> = self.keep.iter().map(|i| row.cells[*i].clone()).collect();
            if let Some(ri) = self.retained {
                let (scalar, cmp) = match (&self.left, &self.right) {
                    (PsSide::Dist(_), s) => (s, self.cmp),
                    (s, _) => (s, self.cmp.flipped()),
                };
                let b = match scalar {
                    PsSide::Num(i) => row.cells[*i].as_num().expect("typed"),
                    PsSide::Lit(d) => *d,
                    PsSide::Dist(_) => unreachable!(),
                };
                let agg = row.cells[ri].as_agg().expect("typed");
                let pgf = agg.dist.exact().expect("bind checked exactness");
                let digits = pgf.value_scale().scale_digits;
                let (truncated, _) =
                    truncate_and_renormalize(pgf, |v| cmp.holds(cmp_extended(v, digits, b.raw, b.scale)))?;
                let pos = self.keep.iter().position(|i| *i == ri).expect("retained is kept");
                cells[pos] = Cell::Dist(Arc::new(AggCell {
                    kind: agg.kind,
                    dist: AggDist::Exact(truncated),
                    conditioned: agg.conditioned,
                }));
            }
            rows.push(Row {
                cells,
                p,
                lineage: row.lineage.clone(),
            });
        }
        Ok(ProbTable::from_parts(self.schema.clone(), rows))
    }
}

/// Duplicate-eliminating projection onto scalar columns.
#[derive(Debug, Clone)]
pub struct Project {
    columns: Vec<usize>,
    schema: Arc<Schema>,
}

impl Project {
    pub fn bind(schema: &Arc<Schema>, columns: &[String]) -> BindResult<Self> {
        let mut errors = Vec::new();
        let mut idx = Vec::new();
        for c in columns {
            match schema.resolve(c) {
                Ok(i) if schema.column(i).ty.is_dist() => {
                    errors.push(format!("cannot project onto probabilistic column `{c}`"))
                }
                Ok(i) => idx.push(i),
                Err(e) => errors.push(e),
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        let out = Schema::new(idx.iter().map(|i| schema.column(*i).clone()).collect())
            .map_err(|e| vec![e.to_string()])?
            .with_dropped(schema.dropped().clone());
        Ok(Project {
            columns: idx,
            schema: Arc::new(out),
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn apply(&self, t: &ProbTable) -> Result<ProbTable> {
        let mut groups: IndexMap<Vec<Cell>, (AtLeastOneState, Vec<&Lineage>)> = IndexMap::new();
        for row in t.rows() {
            let key: Vec<Cell> = self.columns.iter().map(|i| row.cells[*i].clone()).collect();
            let g = groups.entry(key).or_insert_with(|| (AtLeastOneState::new(), Vec::new()));
            g.0.add(row.p)?;
            g.1.push(&row.lineage);
        }
        let mut rows = Vec::with_capacity(groups.len());
        for (cells, (alo, lineages)) in groups {
            let lineage = Lineage::disjoint_union(lineages.iter().copied()).map_err(correlated)?;
            rows.push(Row {
                cells,
                p: alo.probability(),
                lineage,
            });
        }
        Ok(ProbTable::from_parts(self.schema.clone(), rows))
    }
}

/// Equi-join on scalar columns; no key pairs means the cartesian product.
#[derive(Debug, Clone)]
pub struct Join {
    left_keys: Vec<usize>,
    right_keys: Vec<usize>,
    schema: Arc<Schema>,
}

impl Join {
    pub fn bind(left: &Arc<Schema>, right: &Arc<Schema>, on: &[(String, String)]) -> BindResult<Self> {
        let mut errors = Vec::new();
        let mut lk = Vec::new();
        let mut rk = Vec::new();
        for (l, r) in on {
            let li = left.resolve(l).map_err(|e| errors.push(e)).ok();
            let ri = right.resolve(r).map_err(|e| errors.push(e)).ok();
            let (Some(li), Some(ri)) = (li, ri) else { continue };
            let (lt, rt) = (left.column(li).ty, right.column(ri).ty);
            if lt.is_dist() || rt.is_dist() {
                errors.push(format!("probabilistic join condition not allowed (`{l}` = `{r}`)"));
                continue;
            }
            if matches!(lt, ColumnType::Text) != matches!(rt, ColumnType::Text) {
                errors.push(format!("join key `{l}` and `{r}` have different types"));
                continue;
            }
            lk.push(li);
            rk.push(ri);
        }
        let columns: Vec<Column> = left.columns().iter().chain(right.columns()).cloned().collect();
        let dropped: BTreeSet<String> = left.dropped().union(right.dropped()).cloned().collect();
        let schema = match Schema::new(columns) {
            Ok(s) => Some(s.with_dropped(dropped)),
            Err(e) => {
                errors.push(format!("join output has a {e}"));
                None
            }
        };
        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(Join {
            left_keys: lk,
            right_keys: rk,
            schema: Arc::new(schema.unwrap()),
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    fn combine(l: &Row, r: &Row) -> Result<Row> {
        let mut cells = Vec::with_capacity(l.cells.len() + r.cells.len());
        cells.extend(l.cells.iter().cloned());
        cells.extend(r.cells.iter().cloned());
        Ok(Row {
            cells,
            p: l.p * r.p,
            lineage: Lineage::disjoint_union([&l.lineage, &r.lineage]).map_err(correlated)?,
        })
    }

    pub fn apply(&self, l: &ProbTable, r: &ProbTable) -> Result<ProbTable> {
        let mut rows = Vec::new();
        if self.left_keys.is_empty() {
            for a in l.rows() {
                for b in r.rows() {
                    rows.push(Self::combine(a, b)?);
                }
            }
        } else {
            let mut index: HashMap<Vec<&Cell>, Vec<usize>> = HashMap::new();
            for (i, b) in r.rows().iter().enumerate() {
                let key = self.right_keys.iter().map(|k| &b.cells[*k]).collect();
                index.entry(key).or_default().push(i);
            }
            for a in l.rows() {
                let key: Vec<&Cell> = self.left_keys.iter().map(|k| &a.cells[*k]).collect();
                if let Some(matches) = index.get(&key) {
                    for i in matches {
                        rows.push(Self::combine(a, &r.rows()[*i])?);
                    }
                }
            }
        }
        Ok(ProbTable::from_parts(self.schema.clone(), rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgf::Pgf;
    use crate::relational::table::AggKind;
    use crate::value::{ExtendedValue, ValueScale};

    const INT: ColumnType = ColumnType::Number { scale: ValueScale::INTEGER };

    fn num(v: i64) -> Cell {
        Cell::Num(Decimal::integer(v))
    }

    fn pgf(terms: &[(i64, f64)]) -> Pgf {
        Pgf::from_terms(
            terms.iter().map(|(v, p)| (ExtendedValue::Finite(*v), *p)),
            ValueScale::INTEGER,
        )
        .unwrap()
    }

    fn dist_cell(p: Pgf) -> Cell {
        Cell::Dist(Arc::new(AggCell {
            kind: AggKind::Count,
            dist: AggDist::Exact(p),
            conditioned: false,
        }))
    }

    fn dist_ty() -> ColumnType {
        ColumnType::Dist {
            kind: AggKind::Count,
            exact: true,
            scale: ValueScale::INTEGER,
        }
    }

    fn table(cols: Vec<Column>, rows: Vec<(Vec<Cell>, f64)>) -> ProbTable {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, (c, p))| Row {
                cells: c,
                p,
                lineage: Lineage::One(i as u64),
            })
            .collect();
        ProbTable::new(Arc::new(Schema::new(cols).unwrap()), rows).unwrap()
    }

    fn count_table() -> ProbTable {
        table(
            vec![Column::new("g", INT), Column::new("alpha", dist_ty())],
            vec![(vec![num(1), dist_cell(pgf(&[(0, 0.03), (1, 0.22), (2, 0.47), (3, 0.28)]))], 1.0)],
        )
    }

    fn col(c: &str) -> Operand {
        Operand::Column(c.into())
    }

    fn lit(v: i64) -> Operand {
        Operand::Value(Literal::Num(Decimal::integer(v)))
    }

    #[test]
    fn prob_select_tail_mass() {
        let t = count_table();
        let op = ProbSelect::bind(t.schema(), &col("alpha"), CompareOp::Ge, &lit(2), false).unwrap();
        let out = op.apply(&t).unwrap();
        assert!((out.rows()[0].p - 0.75).abs() < 1e-12);
        assert_eq!(out.schema().len(), 1);
        let err = Project::bind(out.schema(), &["alpha".into()]).unwrap_err();
        assert!(err[0].contains("column projected out by probabilistic selection"));

        // mirrored operands give the same probability
        let op = ProbSelect::bind(t.schema(), &lit(2), CompareOp::Le, &col("alpha"), false).unwrap();
        assert!((op.apply(&t).unwrap().rows()[0].p - 0.75).abs() < 1e-12);
    }

    #[test]
    fn prob_select_retains_truncated_distribution() {
        let t = count_table();
        let op = ProbSelect::bind(t.schema(), &col("alpha"), CompareOp::Ge, &lit(2), true).unwrap();
        let out = op.apply(&t).unwrap();
        let agg = out.rows()[0].cells[1].as_agg().unwrap();
        let p = agg.dist.exact().unwrap();
        assert!((p.prob(ExtendedValue::Finite(2)) - 0.47 / 0.75).abs() < 1e-12);
        assert!((p.prob(ExtendedValue::Finite(3)) - 0.28 / 0.75).abs() < 1e-12);
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn prob_select_certain_condition() {
        let t = count_table();
        let op = ProbSelect::bind(t.schema(), &col("alpha"), CompareOp::Gt, &lit(-1), true).unwrap();
        let out = op.apply(&t).unwrap();
        assert_eq!(out.rows()[0].p, 1.0);
        let before = t.rows()[0].cells[1].as_agg().unwrap().dist.exact().unwrap();
        let after = out.rows()[0].cells[1].as_agg().unwrap().dist.exact().unwrap();
        assert!(before.total_variation(after) < 1e-15);
    }

    #[test]
    fn prob_select_two_distributions() {
        let u = pgf(&[(1, 0.5), (2, 0.5)]);
        let t = table(
            vec![Column::new("a", dist_ty()), Column::new("b", dist_ty())],
            vec![(vec![dist_cell(u.clone()), dist_cell(u)], 0.8)],
        );
        let op = ProbSelect::bind(t.schema(), &col("a"), CompareOp::Eq, &col("b"), false).unwrap();
        let out = op.apply(&t).unwrap();
        assert!((out.rows()[0].p - 0.4).abs() < 1e-12);
        assert_eq!(out.schema().len(), 0);
        assert!(ProbSelect::bind(t.schema(), &col("a"), CompareOp::Eq, &col("b"), true).is_err());
    }

    #[test]
    fn prob_select_needs_distribution() {
        let t = count_table();
        let err = ProbSelect::bind(t.schema(), &col("g"), CompareOp::Eq, &lit(1), false).unwrap_err();
        assert!(err[0].contains("use select"));
    }

    #[test]
    fn project_at_least_one() {
        let cols = || vec![Column::new("k", INT), Column::new("v", INT)];
        let t = table(cols(), vec![(vec![num(1), num(1)], 0.5), (vec![num(1), num(2)], 0.5)]);
        let out = Project::bind(t.schema(), &["k".into()]).unwrap().apply(&t).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.rows()[0].p - 0.75).abs() < 1e-15);

        let t = table(
            cols(),
            vec![(vec![num(1), num(1)], 0.7), (vec![num(1), num(2)], 0.8), (vec![num(1), num(3)], 0.5)],
        );
        let out = Project::bind(t.schema(), &["k".into()]).unwrap().apply(&t).unwrap();
        assert!((out.rows()[0].p - 0.97).abs() < 1e-12);

        let out = Project::bind(t.schema(), &["v".into()]).unwrap().apply(&t).unwrap();
        let ps: Vec<f64> = out.rows().iter().map(|r| r.p).collect();
        assert_eq!(ps, vec![0.7, 0.8, 0.5]);
    }

    #[test]
    fn project_rejects_reused_tuples() {
        let t = table(vec![Column::new("k", INT)], vec![(vec![num(1)], 0.5)]);
        let j = Join::bind(t.schema(), &Arc::new(Schema::new(vec![Column::new("k2", INT)]).unwrap()), &[])
            .unwrap();
        let renamed = ProbTable::new(
            Arc::new(Schema::new(vec![Column::new("k2", INT)]).unwrap()),
            t.rows().to_vec(),
        )
        .unwrap();
        assert!(matches!(j.apply(&t, &renamed), Err(PgfError::Correlated(_))));
    }

    #[test]
    fn join_products() {
        let l = table(vec![Column::new("a", INT)], vec![(vec![num(1)], 0.9), (vec![num(2)], 0.6)]);
        let r = ProbTable::new(
            Arc::new(Schema::new(vec![Column::new("b", INT), Column::new("c", ColumnType::Text)]).unwrap()),
            vec![Row {
                cells: vec![num(1), Cell::text("x")],
                p: 0.2,
                lineage: Lineage::One(100),
            }],
        )
        .unwrap();
        let j = Join::bind(l.schema(), r.schema(), &[("a".into(), "b".into())]).unwrap();
        let out = j.apply(&l, &r).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.rows()[0].p - 0.18).abs() < 1e-15);
        assert_eq!(out.rows()[0].lineage.ids(), &[0, 100]);

        let empty = ProbTable::new(r.schema().clone(), vec![]).unwrap();
        assert!(j.apply(&l, &empty).unwrap().is_empty());

        let bad = Join::bind(l.schema(), r.schema(), &[("a".into(), "c".into())]).unwrap_err();
        assert!(bad[0].contains("different types"));
        let dup = Join::bind(l.schema(), l.schema(), &[]).unwrap_err();
        assert!(dup[0].contains("duplicate"));
    }

    #[test]
    fn join_on_distribution_rejected() {
        let t = count_table();
        let other = Arc::new(Schema::new(vec![Column::new("x", INT)]).unwrap());
        let err = Join::bind(t.schema(), &other, &[("alpha".into(), "x".into())]).unwrap_err();
        assert!(err[0].contains("probabilistic join condition not allowed"));
    }

    #[test]
    fn join_equals_filtered_product() {
        let l = table(
            vec![Column::new("a", INT)],
            (0..4).map(|i| (vec![num(i % 2)], 0.1 + 0.2 * i as f64)).collect(),
        );
        let r = ProbTable::new(
            Arc::new(Schema::new(vec![Column::new("b", INT)]).unwrap()),
            (0..3)
                .map(|i| Row {
                    cells: vec![num(i % 2)],
                    p: 0.3 + 0.1 * i as f64,
                    lineage: Lineage::One(50 + i as u64),
                })
                .collect(),
        )
        .unwrap();
        let eq = Join::bind(l.schema(), r.schema(), &[("a".into(), "b".into())]).unwrap();
        let cross = Join::bind(l.schema(), r.schema(), &[]).unwrap();
        let product = cross.apply(&l, &r).unwrap();
        assert_eq!(product.len(), 12);
        let pred = Predicate::Compare {
            left: col("a"),
            cmp: CompareOp::Eq,
            right: col("b"),
        };
        let filtered = Select::bind(product.schema(), &pred).unwrap().apply(&product);
        let joined = eq.apply(&l, &r).unwrap();
        assert_eq!(filtered.len(), joined.len());
        for (x, y) in filtered.rows().iter().zip(joined.rows()) {
            assert_eq!(x.cells, y.cells);
            assert_eq!(x.p, y.p);
        }
    }
}
