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

//! CSV ingestion and serialization of probabilistic tables.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PgfError, Result};
use crate::io::catalog::{ProbabilityRule, TableSource, ROW_BITS};
use crate::io::expr::Expr;
use crate::relational::{Cell, ColumnType, Lineage, ProbTable, Row};
use crate::value::Decimal;

fn delimiter_byte(src: &TableSource) -> Result<u8> {
    u8::try_from(src.delimiter)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| PgfError::parameter(format!("delimiter `{}` is not a single ASCII character", src.delimiter)))
}

/// Reads one table. `table_index` is the table's position in the catalog
/// and seeds the base tuple identifiers.
pub fn ingest(dir: &Path, src: &TableSource, table_index: u64) -> Result<ProbTable> {
    let path = dir.join(&src.file);
    let shown = path.display().to_string();
    let err = |message: String| PgfError::Ingest {
        path: shown.clone(),
        message,
    };
    let schema = Arc::new(src.schema().map_err(|e| err(e.to_string()))?);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(src)?)
        .has_headers(true)
        .from_path(&path)
        .map_err(|e| err(e.to_string()))?;
    let header = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let position = |name: &str| header.iter().position(|h| h.trim() == name);

    let mut missing = Vec::new();
    let mut columns = Vec::new();
    for decl in &src.columns {
        match position(&decl.name) {
            Some(i) => columns.push(i),
            None => missing.push(format!("`{}`", decl.name)),
        }
    }
    let p_index = position(&src.p_column);
    if matches!(src.probability, ProbabilityRule::Column) && p_index.is_none() {
        missing.push(format!("probability column `{}`", src.p_column));
    }
    if !missing.is_empty() {
        return Err(err(format!("missing declared column {}", missing.join(", "))));
    }

    let expr = match &src.probability {
        ProbabilityRule::Expression { expr } => {
            let e = Expr::parse(expr).map_err(|m| err(format!("probability expression: {m}")))?;
            for c in e.columns() {
                match schema.index_of(c).map(|i| schema.column(i).ty) {
                    Some(ColumnType::Number { .. }) => {}
                    Some(_) => return Err(err(format!("probability expression uses non-numeric column `{c}`"))),
                    None => return Err(err(format!("probability expression uses unknown column `{c}`"))),
                }
            }
            Some(e)
        }
        ProbabilityRule::Constant { value } if !(0.0..=1.0).contains(value) => {
            return Err(err(format!("constant probability {value} outside [0, 1]")));
        }
        _ => None,
    };
    let mut rng = match src.probability {
        ProbabilityRule::Uniform { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };

    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let row_no = n + 1;
        let record = record.map_err(|e| err(format!("row {row_no}: {e}")))?;
        let line = record.position().map_or(row_no as u64 + 1, |p| p.line());
        let at = |m: String| err(format!("row {row_no} (line {line}): {m}"));
        let mut cells = Vec::with_capacity(columns.len());
        for (decl, &ci) in src.columns.iter().zip(&columns) {
            let text = record.get(ci).unwrap_or("");
            let cell = match schema.column(cells.len()).ty {
                ColumnType::Text => Cell::text(text),
                ColumnType::Number { scale } => {
                    let raw = scale
                        .parse(text)
                        .map_err(|e| at(format!("column `{}`: {e}", decl.name)))?;
                    Cell::Num(Decimal::new(raw, scale.scale_digits))
                }
                ColumnType::Dist { .. } => unreachable!("catalog columns are scalar"),
            };
            cells.push(cell);
        }
        let p = match &src.probability {
            ProbabilityRule::Column => {
                let text = record.get(p_index.expect("checked")).unwrap_or("").trim();
                text.parse::<f64>()
                    .map_err(|_| at(format!("probability `{text}` is not a number")))?
            }
            ProbabilityRule::Constant { value } => *value,
            ProbabilityRule::Uniform { .. } => rng.as_mut().expect("seeded").random::<f64>(),
            ProbabilityRule::Expression { .. } => {
                let vars: HashMap<&str, f64> = src
                    .columns
                    .iter()
                    .zip(&cells)
                    .filter_map(|(d, c)| c.as_num().map(|v| (d.name.as_str(), v.to_f64())))
                    .collect();
                expr.as_ref().expect("parsed").eval(&vars).map_err(&at)?
            }
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(at(format!("probability {p} outside [0, 1]")));
        }
        if n as u64 >= 1 << ROW_BITS {
            return Err(err("too many rows".into()));
        }
        let lineage = if p < 1.0 {
            Lineage::One(table_index << ROW_BITS | n as u64)
        } else {
            Lineage::Certain
        };
        rows.push(Row { cells, p, lineage });
    }
    ProbTable::new(schema, rows).map_err(|e| err(e.to_string()))
}

fn format_cell(cell: &Cell, ty: ColumnType) -> String {
    match (cell, ty) {
        (Cell::Num(d), ColumnType::Number { scale }) => match d.rescaled(scale.scale_digits) {
            Some(raw) => scale.format(raw),
            None => d.to_string(),
        },
        (Cell::Text(t), _) => t.to_string(),
        (other, _) => other.to_string(),
    }
}

/// Writes the scalar columns of `table` in the layout `src` describes,
/// with probabilities in the probability column.
pub fn write_table(dir: &Path, src: &TableSource, table: &ProbTable) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter_byte(src)?)
        .from_path(dir.join(&src.file))?;
    let schema = table.schema();
    let idx: Vec<usize> = src
        .columns
        .iter()
        .map(|c| {
            schema
                .index_of(&c.name)
                .ok_or_else(|| PgfError::parameter(format!("table has no column `{}`", c.name)))
        })
        .collect::<Result<_>>()?;
    let mut header: Vec<&str> = src.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(&src.p_column);
    w.write_record(&header)?;
    for row in table.rows() {
        let mut rec: Vec<String> = idx
            .iter()
            .map(|i| format_cell(&row.cells[*i], schema.column(*i).ty))
            .collect();
        rec.push(format!("{}", row.p));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
