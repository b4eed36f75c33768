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

//! Workloads shared by the criterion benches and the scaling binary.

use std::collections::BTreeMap;
use std::sync::Arc;

use pgfdb_core::plan::{execute, validate, EngineConfig, QueryPlan};
use pgfdb_core::relational::{Cell, Column, ColumnType, Lineage, ProbTable, Row, Schema};
use pgfdb_core::{Decimal, ValueScale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A single-column table of `n` uncertain tuples with values in
/// `0..=max_value` and uniform probabilities.
pub fn random_table(n: usize, max_value: i64, seed: u64) -> BTreeMap<String, ProbTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Schema::new(vec![Column::new("v", ColumnType::Number { scale: ValueScale::INTEGER })]).unwrap();
    let rows = (0..n)
        .map(|i| Row {
            cells: vec![Cell::Num(Decimal::integer(rng.random_range(0..=max_value)))],
            p: rng.random_range(0.01..0.99),
            lineage: Lineage::One(i as u64),
        })
        .collect();
    BTreeMap::from([("t".to_string(), ProbTable::new(Arc::new(schema), rows).unwrap())])
}

pub fn aggregate_plan(kind: &str, method: &str) -> QueryPlan {
    let column = if kind == "count" { String::new() } else { r#","column":"v""#.to_string() };
    QueryPlan::from_json(&format!(
        r#"{{"nodes":[{{"id":"s","op":"scan","table":"t"}},
            {{"id":"a","op":"group_agg","input":"s","aggs":[{{"name":"a","kind":"{kind}","method":"{method}"{column}}}]}}],
            "output":"a"}}"#
    ))
    .unwrap()
}

pub fn run(plan: &QueryPlan, data: &BTreeMap<String, ProbTable>, workers: usize) -> ProbTable {
    let schemas = data.iter().map(|(k, t)| (k.clone(), t.schema().clone())).collect();
    let v = validate(plan, &schemas, None).unwrap();
    execute(&v, data, &EngineConfig::with_workers(workers)).unwrap()
}
