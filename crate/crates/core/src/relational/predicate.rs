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

//! Deterministic row predicates.

use std::fmt;
use std::sync::Arc;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::pgf::CompareOp;
use crate::relational::table::{Cell, ColumnType, Schema};
use crate::value::Decimal;

/// A literal in a plan: a decimal number or a string.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Num(Decimal),
    Text(String),
}

impl Serialize for Literal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Literal::Num(d) if d.scale == 0 => s.serialize_i64(d.raw),
            Literal::Num(d) => s.serialize_str(&d.to_string()),
            Literal::Text(t) => s.serialize_str(t),
        }
    }
}

impl<'de> Deserialize<'de> for Literal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Literal;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Literal, E> {
                Ok(Literal::Num(Decimal::integer(v)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Literal, E> {
                i64::try_from(v)
                    .map(|v| Literal::Num(Decimal::integer(v)))
                    .map_err(|_| E::custom("integer literal out of range"))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Literal, E> {
                // Display never uses exponent notation
                Decimal::parse(&format!("{v}"))
                    .map(Literal::Num)
                    .map_err(|e| E::custom(e.to_string()))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Literal, E> {
                Ok(Literal::Text(v.to_string()))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Column(String),
    Value(Literal),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Compare {
        left: Operand,
        cmp: CompareOp,
        right: Operand,
    },
    /// SQL `LIKE` with `%` and `_` wildcards.
    Like { column: String, pattern: String },
    /// Inclusive on both ends.
    Between {
        column: String,
        low: Literal,
        high: Literal,
    },
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
    Const(bool),
}

impl Predicate {
    pub fn compare(column: &str, cmp: CompareOp, value: Literal) -> Self {
        Predicate::Compare {
            left: Operand::Column(column.to_string()),
            cmp,
            right: Operand::Value(value),
        }
    }

    /// Column names referenced anywhere in the tree.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Predicate::Compare { left, right, .. } => {
                for o in [left, right] {
                    if let Operand::Column(c) = o {
                        out.push(c);
                    }
                }
            }
            Predicate::Like { column, .. } | Predicate::Between { column, .. } => out.push(column),
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().for_each(|p| p.collect_columns(out)),
            Predicate::Not(p) => p.collect_columns(out),
            Predicate::Const(_) => {}
        }
    }

    /// Resolves columns against `schema`, pushing every problem to `errors`.
    pub fn bind(&self, schema: &Schema, errors: &mut Vec<String>) -> Option<BoundPredicate> {
        let before = errors.len();
        let bound = self.bind_inner(schema, errors);
        if errors.len() > before {
            None
        } else {
            bound
        }
    }

    fn bind_inner(&self, schema: &Schema, errors: &mut Vec<String>) -> Option<BoundPredicate> {
        match self {
            Predicate::Compare { left, cmp, right } => {
                let l = bind_operand(left, schema, errors)?;
                let r = bind_operand(right, schema, errors)?;
                let (l, r) = unify(l, r, errors)?;
                Some(BoundPredicate::Compare { left: l, cmp: *cmp, right: r })
            }
            Predicate::Like { column, pattern } => {
                let i = scalar_column(column, schema, errors)?;
                if schema.column(i).ty != ColumnType::Text {
                    errors.push(format!("LIKE needs a string column, `{column}` is numeric"));
                    return None;
                }
                Some(BoundPredicate::Like {
                    column: i,
                    pattern: pattern.chars().collect(),
                })
            }
            Predicate::Between { column, low, high } => {
                let i = scalar_column(column, schema, errors)?;
                let lo = unify(Side::Column(i, schema.column(i).ty), Side::Literal(low.clone()), errors)?.1;
                let hi = unify(Side::Column(i, schema.column(i).ty), Side::Literal(high.clone()), errors)?.1;
                Some(BoundPredicate::Between { column: i, low: lo, high: hi })
            }
            Predicate::And(ps) => bind_all(ps, schema, errors).map(BoundPredicate::And),
            Predicate::Or(ps) => bind_all(ps, schema, errors).map(BoundPredicate::Or),
            Predicate::Not(p) => Some(BoundPredicate::Not(Box::new(p.bind_inner(schema, errors)?))),
            Predicate::Const(b) => Some(BoundPredicate::Const(*b)),
        }
    }
}

fn bind_all(ps: &[Predicate], schema: &Schema, errors: &mut Vec<String>) -> Option<Vec<BoundPredicate>> {
    let bound: Vec<_> = ps.iter().map(|p| p.bind_inner(schema, errors)).collect();
    bound.into_iter().collect()
}

enum Side {
    Column(usize, ColumnType),
    Literal(Literal),
}

fn scalar_column(name: &str, schema: &Schema, errors: &mut Vec<String>) -> Option<usize> {
    match schema.resolve(name) {
        Ok(i) if schema.column(i).ty.is_dist() => {
            errors.push(format!(
                "deterministic predicate on probabilistic column `{name}`; use prob_select"
            ));
            None
        }
        Ok(i) => Some(i),
        Err(e) => {
            errors.push(e);
            None
        }
    }
}

fn bind_operand(o: &Operand, schema: &Schema, errors: &mut Vec<String>) -> Option<Side> {
    match o {
        Operand::Column(c) => {
            let i = scalar_column(c, schema, errors)?;
            Some(Side::Column(i, schema.column(i).ty))
        }
        Operand::Value(l) => Some(Side::Literal(l.clone())),
    }
}

fn literal_cell(l: &Literal, numeric: bool, errors: &mut Vec<String>) -> Option<Cell> {
    match (l, numeric) {
        (Literal::Num(d), true) => Some(Cell::Num(*d)),
        (Literal::Text(t), false) => Some(Cell::Text(Arc::from(t.as_str()))),
        (Literal::Text(t), true) => match Decimal::parse(t) {
            Ok(d) => Some(Cell::Num(d)),
            Err(_) => {
                errors.push(format!("`{t}` is not a number"));
                None
            }
        },
        (Literal::Num(d), false) => {
            errors.push(format!("number {d} compared with a string column"));
            None
        }
    }
}

fn unify(l: Side, r: Side, errors: &mut Vec<String>) -> Option<(BoundSide, BoundSide)> {
    let numeric = |t: ColumnType| matches!(t, ColumnType::Number { .. });
    match (l, r) {
        (Side::Column(a, ta), Side::Column(b, tb)) => {
            if numeric(ta) != numeric(tb) {
                errors.push("comparison between a number and a string column".into());
                return None;
            }
            Some((BoundSide::Column(a), BoundSide::Column(b)))
        }
        (Side::Column(a, ta), Side::Literal(v)) => {
            Some((BoundSide::Column(a), BoundSide::Literal(literal_cell(&v, numeric(ta), errors)?)))
        }
        (Side::Literal(v), Side::Column(b, tb)) => {
            Some((BoundSide::Literal(literal_cell(&v, numeric(tb), errors)?), BoundSide::Column(b)))
        }
        (Side::Literal(a), Side::Literal(b)) => {
            let numeric = matches!(a, Literal::Num(_)) || matches!(b, Literal::Num(_));
            Some((
                BoundSide::Literal(literal_cell(&a, numeric, errors)?),
                BoundSide::Literal(literal_cell(&b, numeric, errors)?),
            ))
        }
    }
}

#[derive(Debug, Clone)]
pub enum BoundSide {
    Column(usize),
    Literal(Cell),
}

impl BoundSide {
    fn get<'a>(&'a self, row: &'a [Cell]) -> &'a Cell {
        match self {
            BoundSide::Column(i) => &row[*i],
            BoundSide::Literal(c) => c,
        }
    }
}

/// A predicate with columns resolved to indices.
#[derive(Debug, Clone)]
pub enum BoundPredicate {
    Compare {
        left: BoundSide,
        cmp: CompareOp,
        right: BoundSide,
    },
    Like {
        column: usize,
        pattern: Vec<char>,
    },
    Between {
        column: usize,
        low: BoundSide,
        high: BoundSide,
    },
    And(Vec<BoundPredicate>),
    Or(Vec<BoundPredicate>),
    Not(Box<BoundPredicate>),
    Const(bool),
}

fn cmp_cells(a: &Cell, b: &Cell) -> Option<std::cmp::Ordering> {
    match (a, b) {
        (Cell::Num(x), Cell::Num(y)) => Some(x.cmp(y)),
        (Cell::Text(x), Cell::Text(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

impl BoundPredicate {
    pub fn eval(&self, row: &[Cell]) -> bool {
        match self {
            BoundPredicate::Compare { left, cmp, right } => cmp_cells(left.get(row), right.get(row))
                .map(|o| cmp.holds(o))
                .unwrap_or(false),
            BoundPredicate::Like { column, pattern } => match &row[*column] {
                Cell::Text(s) => like(s, pattern),
                _ => false,
            },
            BoundPredicate::Between { column, low, high } => {
                let v = &row[*column];
                matches!(cmp_cells(low.get(row), v), Some(o) if o.is_le())
                    && matches!(cmp_cells(v, high.get(row)), Some(o) if o.is_le())
            }
            BoundPredicate::And(ps) => ps.iter().all(|p| p.eval(row)),
            BoundPredicate::Or(ps) => ps.iter().any(|p| p.eval(row)),
            BoundPredicate::Not(p) => !p.eval(row),
            BoundPredicate::Const(b) => *b,
        }
    }
}

/// Wildcard match with backtracking to the last `%`.
fn like(text: &str, pattern: &[char]) -> bool {
    let text: Vec<char> = text.chars().collect();
    let (mut t, mut p) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while t < text.len() {
        if p < pattern.len() && pattern[p] == '%' {
            star = Some((p, t));
            p += 1;
        } else if p < pattern.len() && (pattern[p] == '_' || pattern[p] == text[t]) {
            t += 1;
            p += 1;
        } else if let Some((sp, st)) = star {
            p = sp + 1;
            t = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    pattern[p..].iter().all(|c| *c == '%')
}
