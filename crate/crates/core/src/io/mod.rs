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

//! Data directories, CSV tables, the synthetic generator and result
//! documents.

mod catalog;
mod csv;
mod expr;
mod gen;
mod result;

pub use catalog::{Catalog, ColumnDecl, ColumnKind, Database, ProbabilityRule, TableSource, CATALOG_FILE, ROW_BITS};
pub use csv::{ingest, write_table};
pub use expr::Expr;
pub use gen::{generate, GenProbability, GenSchema, TableGen, TABLES};
pub use result::{
    parse_value, AggregateDoc, ColumnInfo, DistDoc, OverflowDoc, ResultDocument, ResultRow, Summary, SupportEntry,
};
