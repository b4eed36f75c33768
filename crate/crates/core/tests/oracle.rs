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

mod common;

use std::collections::BTreeMap;

use common::{fig1, int_table};
use pgfdb_core::oracle::{enumerate_eval, WorldEnumeration, ORACLE_LIMIT};
use pgfdb_core::plan::QueryPlan;
use pgfdb_core::{ExtendedValue, PgfError};

#[test]
fn figure_world_weights() {
    let t = fig1();
    let worlds = WorldEnumeration::new([("fig1", &t)]).unwrap();
    assert_eq!(worlds.worlds(), 8);
    let mut by_size: Vec<(u32, u64, f64)> =
        (0..8u64).map(|m| (m.count_ones(), m, worlds.weight(m))).collect();
    by_size.sort_by_key(|(c, m, _)| (*c, *m));
    let expected = [0.03, 0.07, 0.12, 0.03, 0.28, 0.07, 0.12, 0.28];
    for ((_, _, w), e) in by_size.iter().zip(expected) {
        assert!((w - e).abs() < 1e-12, "{w} vs {e}");
    }
    let total: f64 = worlds.weights().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    let w = worlds.world(&[&t], 0b101);
    assert_eq!(w[0].len(), 2);
    assert!(w[0].rows().iter().all(|r| r.p == 1.0));
}

fn count_plan() -> QueryPlan {
    QueryPlan::from_json(
        r#"{"nodes":[{"id":"s","op":"scan","table":"t"},
            {"id":"c","op":"group_agg","input":"s","aggs":[{"name":"n","kind":"count"}]}],"output":"c"}"#,
    )
    .unwrap()
}

#[test]
fn oracle_count_of_figure() {
    let mut data = BTreeMap::new();
    data.insert("t".to_string(), fig1());
    for workers in [1, 3] {
        let out = enumerate_eval(&count_plan(), &data, workers).unwrap();
        let pgf = out.rows()[0].cells[0].as_agg().unwrap().dist.exact().unwrap().clone();
        for (k, e) in [0.03, 0.22, 0.47, 0.28].iter().enumerate() {
            assert!((pgf.prob(ExtendedValue::Finite(k as i64)) - e).abs() < 1e-12);
        }
    }
}

#[test]
fn certain_tables_have_one_world() {
    let t = int_table(0, &["v"], &[(vec![1], 1.0), (vec![2], 1.0)]);
    let worlds = WorldEnumeration::new([("t", &t)]).unwrap();
    assert_eq!(worlds.worlds(), 1);
    assert_eq!(worlds.weight(0), 1.0);
    let mut data = BTreeMap::new();
    data.insert("t".to_string(), t);
    let out = enumerate_eval(&count_plan(), &data, 1).unwrap();
    let pgf = out.rows()[0].cells[0].as_agg().unwrap().dist.exact().unwrap().clone();
    assert_eq!(pgf.prob(ExtendedValue::Finite(2)), 1.0);
}

#[test]
fn refuses_too_many_tuples() {
    let rows: Vec<(Vec<i64>, f64)> = (0..ORACLE_LIMIT as i64 + 1).map(|i| (vec![i], 0.5)).collect();
    let mut data = BTreeMap::new();
    data.insert("t".to_string(), int_table(0, &["v"], &rows));
    let err = enumerate_eval(&count_plan(), &data, 1).unwrap_err();
    assert!(matches!(err, PgfError::OracleTooLarge { limit: 24, found: 25 }));
    assert!(err.to_string().contains("oracle limited to 24 tuples"));

    data.insert("t".to_string(), int_table(0, &["v"], &rows[..3]));
    data.insert("unused".to_string(), int_table(1, &["v"], &rows));
    assert!(enumerate_eval(&count_plan(), &data, 1).is_ok());
}
