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

//! Synthetic TPC-H-like catalogs with uniform tuple probabilities.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PgfError, Result};
use crate::io::catalog::{Catalog, ColumnDecl, ColumnKind, TableSource};
use crate::io::csv::write_table;
use crate::relational::{Cell, ProbTable, Row};
use crate::value::Decimal;

pub const TABLES: [&str; 6] = ["nation", "supplier", "part", "partsupp", "orders", "lineitem"];

const NATIONS: [(&str, i64); 25] = [
    ("ALGERIA", 0),
    ("ARGENTINA", 1),
    ("BRAZIL", 1),
    ("CANADA", 1),
    ("EGYPT", 4),
    ("ETHIOPIA", 0),
    ("FRANCE", 3),
    ("GERMANY", 3),
    ("INDIA", 2),
    ("INDONESIA", 2),
    ("IRAN", 4),
    ("IRAQ", 4),
    ("JAPAN", 2),
    ("JORDAN", 4),
    ("KENYA", 0),
    ("MOROCCO", 0),
    ("MOZAMBIQUE", 0),
    ("PERU", 1),
    ("CHINA", 2),
    ("ROMANIA", 3),
    ("SAUDI ARABIA", 4),
    ("VIETNAM", 2),
    ("RUSSIA", 3),
    ("UNITED KINGDOM", 3),
    ("UNITED STATES", 1),
];

const COLORS: [&str; 40] = [
    "almond", "antique", "aquamarine", "azure", "beige", "bisque", "black", "blanched", "blue", "blush",
    "brown", "burlywood", "chartreuse", "chocolate", "coral", "cornflower", "cream", "cyan", "dark", "deep",
    "dim", "dodger", "drab", "firebrick", "floral", "forest", "frosted", "gainsboro", "ghost", "goldenrod",
    "green", "grey", "honeydew", "hot", "indian", "ivory", "khaki", "lace", "lavender", "lemon",
];

/// How the probability column of a generated table is filled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GenProbability {
    #[default]
    Uniform,
    Certain,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TableGen {
    #[serde(default)]
    pub probability: GenProbability,
    /// Overrides the row count derived from the lineitem count.
    #[serde(default)]
    pub rows: Option<usize>,
}

/// Contents of the `--schema` file. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GenSchema {
    #[serde(default)]
    pub tables: BTreeMap<String, TableGen>,
    /// Pool for the first word of part names.
    #[serde(default)]
    pub part_name_first_words: Option<Vec<String>>,
    /// Pool of nation names suppliers are drawn from.
    #[serde(default)]
    pub supplier_nations: Option<Vec<String>>,
    /// Pool of ship years.
    #[serde(default)]
    pub ship_years: Option<Vec<i32>>,
    #[serde(default)]
    pub max_availqty: Option<i64>,
}

impl GenSchema {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: GenSchema = serde_json::from_str(text)?;
        let unknown: Vec<&String> = s.tables.keys().filter(|t| !TABLES.contains(&t.as_str())).collect();
        if !unknown.is_empty() {
            return Err(PgfError::Validation(
                unknown.iter().map(|t| format!("unknown table `{t}` in generator schema")).collect(),
            ));
        }
        if let Some(nations) = &s.supplier_nations {
            for n in nations {
                if !NATIONS.iter().any(|(name, _)| name == n) {
                    return Err(PgfError::Validation(vec![format!("unknown nation `{n}`")]));
                }
            }
        }
        Ok(s)
    }

    fn table(&self, name: &str) -> TableGen {
        self.tables.get(name).cloned().unwrap_or_default()
    }
}

fn int(name: &str) -> ColumnDecl {
    ColumnDecl::new(name, ColumnKind::Int, None)
}

fn money(name: &str) -> ColumnDecl {
    ColumnDecl::new(name, ColumnKind::Decimal, Some(2))
}

fn text(name: &str) -> ColumnDecl {
    ColumnDecl::new(name, ColumnKind::String, None)
}

fn num(v: i64) -> Cell {
    Cell::Num(Decimal::integer(v))
}

fn cents(v: i64) -> Cell {
    Cell::Num(Decimal::new(v, 2))
}

fn rng_for(seed: u64, table: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TABLES.iter().position(|t| *t == table).unwrap_or(0) as u64 + 1);
    rng
}

struct Builder {
    seed: u64,
    schema: GenSchema,
    catalog: Catalog,
    tables: Vec<(TableSource, ProbTable)>,
}

impl Builder {
    fn push(&mut self, name: &str, columns: Vec<ColumnDecl>, rows: Vec<Vec<Cell>>) -> Result<()> {
        let src = TableSource::new(name, format!("{name}.csv"), columns);
        let mut prng = rng_for(self.seed ^ 0x9e37_79b9_7f4a_7c15, name);
        let rule = self.schema.table(name).probability;
        let rows = rows
            .into_iter()
            .map(|cells| {
                let p = match rule {
                    GenProbability::Uniform => prng.random::<f64>(),
                    GenProbability::Certain => 1.0,
                    GenProbability::Constant(c) => c,
                };
                Row::new(cells, p)
            })
            .collect();
        let table = ProbTable::new(Arc::new(src.schema()?), rows)?;
        self.catalog.tables.push(src.clone());
        self.tables.push((src, table));
        Ok(())
    }
}

fn random_address(rng: &mut impl Rng) -> String {
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 ,";
    let len = rng.random_range(10..=25);
    (0..len).map(|_| CHARS[rng.random_range(0..CHARS.len())] as char).collect::<String>().trim().to_string()
}

/// Generates the six tables for `lineitems` line items and writes them with
/// a catalog into `out`. Output is a pure function of the arguments.
pub fn generate(schema: &GenSchema, lineitems: usize, seed: u64, out: &Path) -> Result<Catalog> {
    if let Some(c) = schema.tables.get("lineitem").and_then(|t| t.rows) {
        if c != lineitems {
            return Err(PgfError::Validation(vec![format!(
                "lineitem rows {c} in the schema file disagree with --rows {lineitems}"
            )]));
        }
    }
    let rows_of = |t: &str, default: usize| schema.table(t).rows.unwrap_or(default);
    let n_part = rows_of("part", (lineitems / 30).max(2));
    let n_supp = rows_of("supplier", (lineitems / 600).max(2));
    let n_orders = rows_of("orders", lineitems.div_ceil(4).max(1));
    let per_part = n_supp.min(4);
    if n_part == 0 || n_supp == 0 || n_orders == 0 {
        return Err(PgfError::parameter("part, supplier and orders need at least one row"));
    }

    let mut b = Builder {
        seed,
        schema: schema.clone(),
        catalog: Catalog::default(),
        tables: Vec::new(),
    };

    let nations: Vec<Vec<Cell>> = NATIONS
        .iter()
        .enumerate()
        .map(|(k, (name, region))| vec![num(k as i64), Cell::text(name), num(*region)])
        .collect();
    b.push("nation", vec![int("n_nationkey"), text("n_name"), int("n_regionkey")], nations)?;

    let pool: Vec<i64> = match &schema.supplier_nations {
        Some(names) => names
            .iter()
            .map(|n| NATIONS.iter().position(|(m, _)| m == n).expect("validated") as i64)
            .collect(),
        None => (0..NATIONS.len() as i64).collect(),
    };
    let mut rng = rng_for(seed, "supplier");
    let suppliers = (1..=n_supp as i64)
        .map(|k| {
            vec![
                num(k),
                Cell::text(&format!("Supplier#{k:09}")),
                Cell::text(&random_address(&mut rng)),
                num(*pool.choose(&mut rng).expect("non-empty nation pool")),
                cents(rng.random_range(-99_999..=999_999)),
            ]
        })
        .collect();
    b.push(
        "supplier",
        vec![int("s_suppkey"), text("s_name"), text("s_address"), int("s_nationkey"), money("s_acctbal")],
        suppliers,
    )?;

    let first: Vec<&str> = match &schema.part_name_first_words {
        Some(w) if !w.is_empty() => w.iter().map(String::as_str).collect(),
        _ => COLORS.to_vec(),
    };
    let mut rng = rng_for(seed, "part");
    let mut prices = Vec::with_capacity(n_part);
    let parts = (1..=n_part as i64)
        .map(|k| {
            let mut words = vec![*first.choose(&mut rng).expect("non-empty")];
            words.extend((0..4).map(|_| *COLORS.choose(&mut rng).expect("non-empty")));
            let price = 90_000 + (k / 10) % 20_001 + 100 * (k % 1000);
            prices.push(price);
            vec![num(k), Cell::text(&words.join(" ")), cents(price)]
        })
        .collect();
    b.push("part", vec![int("p_partkey"), text("p_name"), money("p_retailprice")], parts)?;

    let max_avail = schema.max_availqty.unwrap_or(9999).max(1);
    let mut rng = rng_for(seed, "partsupp");
    let mut pairs = Vec::with_capacity(n_part * per_part);
    let mut partsupp = Vec::with_capacity(n_part * per_part);
    for part in 1..=n_part as i64 {
        for i in 0..per_part as i64 {
            let supp = (part - 1 + i * (n_supp as i64 / per_part as i64).max(1)) % n_supp as i64 + 1;
            pairs.push((part, supp));
            partsupp.push(vec![
                num(part),
                num(supp),
                num(rng.random_range(1..=max_avail)),
                cents(rng.random_range(100..=100_000)),
            ]);
        }
    }
    b.push(
        "partsupp",
        vec![int("ps_partkey"), int("ps_suppkey"), int("ps_availqty"), money("ps_supplycost")],
        partsupp,
    )?;

    let years: Vec<i32> = match &schema.ship_years {
        Some(y) if !y.is_empty() => y.clone(),
        _ => (1992..=1998).collect(),
    };
    let mut rng = rng_for(seed, "lineitem");
    let mut lines = Vec::with_capacity(lineitems);
    let mut order_dates: Vec<Option<NaiveDate>> = vec![None; n_orders];
    let mut order_totals = vec![0i64; n_orders];
    for i in 0..lineitems {
        let order = i % n_orders;
        let (part, supp) = *pairs.choose(&mut rng).expect("partsupp rows");
        let qty = rng.random_range(1..=50i64);
        let year = *years.choose(&mut rng).expect("non-empty");
        let start = NaiveDate::from_ymd_opt(year, 1, 1)
            .ok_or_else(|| PgfError::parameter(format!("ship year {year} out of range")))?;
        let ship = start + Days::new(rng.random_range(0..365));
        let ordered = ship - Days::new(rng.random_range(1..=121));
        let slot = &mut order_dates[order];
        *slot = Some(slot.map_or(ordered, |d| d.min(ordered)));
        let price = qty * prices[(part - 1) as usize];
        order_totals[order] += price;
        lines.push(vec![
            num(order as i64 + 1),
            num(part),
            num(supp),
            num((i / n_orders) as i64 + 1),
            num(qty),
            cents(price),
            Cell::text(&ship.format("%Y-%m-%d").to_string()),
        ]);
    }
    let mut rng = rng_for(seed, "orders");
    let orders = (0..n_orders)
        .map(|k| {
            let date = order_dates[k].unwrap_or_else(|| {
                NaiveDate::from_ymd_opt(1992, 1, 1).expect("valid") + Days::new(rng.random_range(0..2400))
            });
            vec![num(k as i64 + 1), Cell::text(&date.format("%Y-%m-%d").to_string()), cents(order_totals[k])]
        })
        .collect();
    b.push("orders", vec![int("o_orderkey"), text("o_orderdate"), money("o_totalprice")], orders)?;
    b.push(
        "lineitem",
        vec![
            int("l_orderkey"),
            int("l_partkey"),
            int("l_suppkey"),
            int("l_linenumber"),
            int("l_quantity"),
            money("l_extendedprice"),
            text("l_shipdate"),
        ],
        lines,
    )?;

    std::fs::create_dir_all(out)?;
    for (src, table) in &b.tables {
        write_table(out, src, table)?;
    }
    b.catalog.save(out)?;
    Ok(b.catalog)
}
