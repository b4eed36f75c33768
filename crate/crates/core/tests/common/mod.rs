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

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use pgfdb_core::relational::{Cell, Column, ColumnType, Lineage, ProbTable, Row, Schema};
use pgfdb_core::{Decimal, ValueScale};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn int_column(name: &str) -> Column {
    Column::new(name, ColumnType::Number { scale: ValueScale::INTEGER })
}

/// Integer table whose rows get base identifiers `table << 40 | row`.
pub fn int_table(table: u64, columns: &[&str], rows: &[(Vec<i64>, f64)]) -> ProbTable {
    let schema = Schema::new(columns.iter().map(|c| int_column(c)).collect()).unwrap();
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, (vals, p))| Row {
            cells: vals.iter().map(|v| Cell::Num(Decimal::integer(*v))).collect(),
            p: *p,
            lineage: if *p < 1.0 { Lineage::One(table << 40 | i as u64) } else { Lineage::Certain },
        })
        .collect();
    ProbTable::new(Arc::new(schema), rows).unwrap()
}

pub fn fig1() -> ProbTable {
    int_table(0, &["v"], &[(vec![3], 0.7), (vec![8], 0.8), (vec![5], 0.5)])
}
