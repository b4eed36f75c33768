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

//! Catalog files describing the CSV tables of a data directory, and the
//! loaded database.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PgfError, Result};
use crate::io::csv::ingest;
use crate::relational::{Column, ColumnType, ProbTable, Schema};
use crate::value::ValueScale;

pub const CATALOG_FILE: &str = "catalog.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Int,
    Decimal,
    String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnKind,
    /// Digits after the decimal point; only for `decimal` columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_digits: Option<u32>,
}

impl ColumnDecl {
    pub fn new(name: &str, kind: ColumnKind, scale_digits: Option<u32>) -> Self {
        ColumnDecl {
            name: name.into(),
            kind,
            scale_digits,
        }
    }

    pub fn column_type(&self) -> Result<ColumnType> {
        Ok(match (self.kind, self.scale_digits) {
            (ColumnKind::String, _) => ColumnType::Text,
            (ColumnKind::Int, None | Some(0)) => ColumnType::Number {
                scale: ValueScale::INTEGER,
            },
            (ColumnKind::Int, Some(_)) => {
                return Err(PgfError::parameter(format!(
                    "int column `{}` cannot declare scale_digits",
                    self.name
                )))
            }
            (ColumnKind::Decimal, d) => ColumnType::Number {
                scale: ValueScale::new(d.unwrap_or(0))?,
            },
        })
    }
}

/// How tuple probabilities are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum ProbabilityRule {
    /// Read from the probability column.
    #[default]
    Column,
    Constant {
        value: f64,
    },
    /// Independent draws from U(0, 1), reproducible from the seed.
    Uniform {
        seed: u64,
    },
    /// An arithmetic expression over numeric columns.
    Expression {
        expr: String,
    },
}

fn default_delimiter() -> char {
    ','
}

fn default_p_column() -> String {
    "p".into()
}

fn is_default_delimiter(c: &char) -> bool {
    *c == ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSource {
    pub name: String,
    /// Relative to the catalog's directory.
    pub file: PathBuf,
    #[serde(default = "default_delimiter", skip_serializing_if = "is_default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_p_column")]
    pub p_column: String,
    pub columns: Vec<ColumnDecl>,
    #[serde(default)]
    pub probability: ProbabilityRule,
}

impl TableSource {
    pub fn new(name: &str, file: impl Into<PathBuf>, columns: Vec<ColumnDecl>) -> Self {
        TableSource {
            name: name.into(),
            file: file.into(),
            delimiter: ',',
            p_column: default_p_column(),
            columns,
            probability: ProbabilityRule::Column,
        }
    }

    pub fn schema(&self) -> Result<Schema> {
        let cols = self
            .columns
            .iter()
            .map(|c| Ok(Column::new(c.name.clone(), c.column_type()?)))
            .collect::<Result<Vec<_>>>()?;
        Schema::new(cols)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Catalog {
    pub tables: Vec<TableSource>,
}

impl Catalog {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(CATALOG_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| PgfError::Ingest {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| PgfError::Ingest {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(dir.join(CATALOG_FILE), text)?;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&TableSource> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Tables of a data directory. Tuples of table `t`, row `r` get the base
/// identifier `t << 40 | r` used to detect reuse of the same tuple.
#[derive(Debug, Clone, Default)]
pub struct Database {
    pub catalog: Catalog,
    pub tables: BTreeMap<String, ProbTable>,
}

pub const ROW_BITS: u32 = 40;

impl Database {
    /// Reads the catalog and every table it lists.
    pub fn load(dir: &Path) -> Result<Self> {
        Self::load_only(dir, None)
    }

    /// Like [`Database::load`] but ingests only the named tables.
    pub fn load_only(dir: &Path, names: Option<&[String]>) -> Result<Self> {
        let catalog = Catalog::load(dir)?;
        let mut tables = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for (idx, src) in catalog.tables.iter().enumerate() {
            if !seen.insert(src.name.as_str()) {
                return Err(PgfError::Ingest {
                    path: dir.join(CATALOG_FILE).display().to_string(),
                    message: format!("table `{}` listed twice", src.name),
                });
            }
            if names.is_some_and(|n| !n.contains(&src.name)) {
                continue;
            }
            let table = ingest(dir, src, idx as u64)?;
            tables.insert(src.name.clone(), table);
        }
        Ok(Database { catalog, tables })
    }

    pub fn schemas(&self) -> BTreeMap<String, Arc<Schema>> {
        self.tables
            .iter()
            .map(|(n, t)| (n.clone(), t.schema().clone()))
            .collect()
    }

    /// Schemas from the catalog alone, without reading any file.
    pub fn catalog_schemas(catalog: &Catalog) -> Result<BTreeMap<String, Arc<Schema>>> {
        catalog
            .tables
            .iter()
            .map(|t| Ok((t.name.clone(), Arc::new(t.schema()?))))
            .collect()
    }
}
