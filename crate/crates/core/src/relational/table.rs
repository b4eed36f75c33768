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

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::approx::Approximation;
use crate::error::{PgfError, Result};
use crate::pgf::{Distribution, Pgf};
use crate::value::{Decimal, ExtendedValue, ValueScale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggKind {
    #[serde(alias = "COUNT")]
    Count,
    #[serde(alias = "SUM")]
    Sum,
    #[serde(alias = "MIN")]
    Min,
    #[serde(alias = "MAX")]
    Max,
}

impl AggKind {
    /// Exponent taken by the aggregate when no tuple is present.
    pub fn neutral(&self) -> ExtendedValue {
        match self {
            AggKind::Count | AggKind::Sum => ExtendedValue::Finite(0),
            AggKind::Min => ExtendedValue::PosInf,
            AggKind::Max => ExtendedValue::NegInf,
        }
    }
}

impl fmt::Display for AggKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggKind::Count => "COUNT",
            AggKind::Sum => "SUM",
            AggKind::Min => "MIN",
            AggKind::Max => "MAX",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Number { scale: ValueScale },
    Text,
    /// An aggregate distribution. `exact` is false for approximations.
    Dist {
        kind: AggKind,
        exact: bool,
        scale: ValueScale,
    },
}

impl ColumnType {
    pub fn is_dist(&self) -> bool {
        matches!(self, ColumnType::Dist { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column {
            name: name.into(),
            ty,
        }
    }
}

/// Column list of a table. Also remembers the names removed by
/// probabilistic selections so later references get a precise error.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schema {
    columns: Vec<Column>,
    dropped: BTreeSet<String>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(PgfError::parameter(format!("duplicate column name `{}`", c.name)));
            }
        }
        Ok(Schema {
            columns,
            dropped: BTreeSet::new(),
        })
    }

    pub(crate) fn with_dropped(mut self, dropped: BTreeSet<String>) -> Self {
        self.dropped = dropped
            .into_iter()
            .filter(|d| !self.columns.iter().any(|c| &c.name == d))
            .collect();
        self
    }

    pub fn dropped(&self) -> &BTreeSet<String> {
        &self.dropped
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Index of `name`, or a message suitable for a validation report.
    pub fn resolve(&self, name: &str) -> std::result::Result<usize, String> {
        match self.index_of(name) {
            Some(i) => Ok(i),
            None if self.dropped.contains(name) => Err(format!(
                "column projected out by probabilistic selection: `{name}`"
            )),
            None => Err(format!("unknown column `{name}`")),
        }
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggDist {
    Exact(Pgf),
    Approx(Approximation),
}

impl AggDist {
    pub fn as_dist(&self) -> &dyn Distribution {
        match self {
            AggDist::Exact(p) => p,
            AggDist::Approx(a) => a,
        }
    }

    pub fn exact(&self) -> Option<&Pgf> {
        match self {
            AggDist::Exact(p) => Some(p),
            AggDist::Approx(_) => None,
        }
    }
}

/// A distribution-valued cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AggCell {
    pub kind: AggKind,
    pub dist: AggDist,
    /// True when the distribution is conditioned on the existence of its
    /// group; false when it includes the all-absent outcome.
    pub conditioned: bool,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(Decimal),
    Text(Arc<str>),
    Dist(Arc<AggCell>),
}

impl Cell {
    pub fn text(s: &str) -> Self {
        Cell::Text(Arc::from(s))
    }

    pub fn as_num(&self) -> Option<Decimal> {
        match self {
            Cell::Num(d) => Some(*d),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_agg(&self) -> Option<&AggCell> {
        match self {
            Cell::Dist(a) => Some(a),
            _ => None,
        }
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Cell::Num(a), Cell::Num(b)) => a == b,
            (Cell::Text(a), Cell::Text(b)) => a == b,
            (Cell::Dist(a), Cell::Dist(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Eq for Cell {}

impl Hash for Cell {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Cell::Num(d) => {
                0u8.hash(state);
                d.hash(state);
            }
            Cell::Text(s) => {
                1u8.hash(state);
                s.hash(state);
            }
            Cell::Dist(a) => {
                2u8.hash(state);
                std::ptr::hash(Arc::as_ptr(a), state);
            }
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(d) => write!(f, "{d}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Dist(a) => write!(f, "<{} distribution>", a.kind),
        }
    }
}

/// The uncertain base tuples a row depends on, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Lineage {
    #[default]
    Certain,
    One(u64),
    Many(Arc<[u64]>),
}

impl Lineage {
    pub fn ids(&self) -> &[u64] {
        match self {
            Lineage::Certain => &[],
            Lineage::One(id) => std::slice::from_ref(id),
            Lineage::Many(ids) => ids,
        }
    }

    fn from_sorted(ids: Vec<u64>) -> Self {
        match ids.len() {
            0 => Lineage::Certain,
            1 => Lineage::One(ids[0]),
            _ => Lineage::Many(ids.into()),
        }
    }

    /// Union of lineages that must not share a tuple.
    pub fn disjoint_union<'a, I>(parts: I) -> std::result::Result<Lineage, u64>
    where
        I: IntoIterator<Item = &'a Lineage>,
    {
        let mut ids: Vec<u64> = Vec::new();
        let mut count = 0;
        let mut single = None;
        for part in parts {
            match part {
                Lineage::Certain => {}
                other => {
                    count += 1;
                    if single.is_none() {
                        single = Some(other.clone());
                    }
                    ids.extend_from_slice(other.ids());
                }
            }
        }
        if count <= 1 {
            return Ok(single.unwrap_or_default());
        }
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(w[0]);
        }
        Ok(Lineage::from_sorted(ids))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub p: f64,
    pub lineage: Lineage,
}

impl Row {
    pub fn new(cells: Vec<Cell>, p: f64) -> Self {
        Row {
            cells,
            p,
            lineage: Lineage::Certain,
        }
    }
}

/// A tuple-independent table: every row exists with probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable {
    schema: Arc<Schema>,
    rows: Vec<Row>,
}

impl ProbTable {
    /// Checks arity, probabilities and cell kinds.
    pub fn new(schema: Arc<Schema>, rows: Vec<Row>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.cells.len() != schema.len() {
                return Err(PgfError::parameter(format!(
                    "row {i} has {} cells, schema has {} columns",
                    row.cells.len(),
                    schema.len()
                )));
            }
            if !(0.0..=1.0).contains(&row.p) {
                return Err(PgfError::parameter(format!(
                    "row {i} probability {} outside [0, 1]",
                    row.p
                )));
            }
            for (cell, col) in row.cells.iter().zip(schema.columns()) {
                let ok = matches!(
                    (cell, col.ty),
                    (Cell::Num(_), ColumnType::Number { .. })
                        | (Cell::Text(_), ColumnType::Text)
                        | (Cell::Dist(_), ColumnType::Dist { .. })
                );
                if !ok {
                    return Err(PgfError::parameter(format!(
                        "row {i} column `{}` holds the wrong kind of value",
                        col.name
                    )));
                }
            }
        }
        Ok(ProbTable { schema, rows })
    }

    pub(crate) fn from_parts(schema: Arc<Schema>, rows: Vec<Row>) -> Self {
        ProbTable { schema, rows }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Row> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Cells of one column, by name.
    pub fn column(&self, name: &str) -> Option<impl Iterator<Item = &Cell>> {
        let i = self.schema.index_of(name)?;
        Some(self.rows.iter().map(move |r| &r.cells[i]))
    }
}
