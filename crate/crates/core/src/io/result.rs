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

//! JSON result documents.

use serde::{Deserialize, Serialize};

use crate::approx::Approximation;
use crate::error::{PgfError, Result};
use crate::pgf::{Distribution, Overflow, Pgf, TailSide, NORMALIZATION_TOLERANCE};
use crate::relational::{AggDist, AggKind, Cell, ColumnType, Literal, ProbTable};
use crate::value::{ExtendedValue, ValueScale};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_digits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    pub value: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverflowDoc {
    pub at: String,
    pub side: TailSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistDoc {
    Exact {
        support: Vec<SupportEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        overflow: Option<OverflowDoc>,
    },
    Mixture {
        lambda: f64,
        mus: Vec<f64>,
        pis: Vec<f64>,
        shift: f64,
        scale: f64,
    },
    Normal {
        mu: f64,
        sigma2: f64,
    },
}

/// Moments are in value units; grid-unit parameters of approximations are
/// converted with the column's `scale_digits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub interval95: Option<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateDoc {
    pub name: String,
    pub aggregate: AggKind,
    /// Whether the distribution is conditioned on the row existing.
    pub conditioned: bool,
    #[serde(flatten)]
    pub dist: DistDoc,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub values: Vec<Literal>,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregates: Vec<AggregateDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub columns: Vec<ColumnInfo>,
    pub rows: Vec<ResultRow>,
}

fn format_value(v: ExtendedValue, scale: ValueScale) -> String {
    match v {
        ExtendedValue::Finite(raw) => scale.format(raw),
        ExtendedValue::PosInf => "inf".into(),
        ExtendedValue::NegInf => "-inf".into(),
    }
}

pub fn parse_value(text: &str, scale: ValueScale) -> Result<ExtendedValue> {
    Ok(match text.trim() {
        "inf" | "+inf" => ExtendedValue::PosInf,
        "-inf" => ExtendedValue::NegInf,
        t => ExtendedValue::Finite(scale.parse(t)?),
    })
}

fn summarize(d: &dyn Distribution) -> Summary {
    let scale = d.scale();
    let f = scale.factor() as f64;
    Summary {
        mean: d.mean().map(|m| m / f),
        variance: d.variance().map(|v| v / (f * f)),
        interval95: d
            .interval(0.95)
            .ok()
            .map(|(lo, hi)| [format_value(lo, scale), format_value(hi, scale)]),
    }
}

fn dist_doc(d: &AggDist) -> DistDoc {
    match d {
        AggDist::Exact(p) => {
            let scale = p.value_scale();
            DistDoc::Exact {
                support: p
                    .terms()
                    .iter()
                    .map(|(v, q)| SupportEntry {
                        value: format_value(*v, scale),
                        p: *q,
                    })
                    .collect(),
                overflow: p.overflow().map(|o| OverflowDoc {
                    at: format_value(o.at, scale),
                    side: o.side,
                }),
            }
        }
        AggDist::Approx(Approximation::Mixture(m)) => DistDoc::Mixture {
            lambda: m.lambda,
            mus: m.mus.clone(),
            pis: m.pis.clone(),
            shift: m.shift,
            scale: m.scale,
        },
        AggDist::Approx(Approximation::Normal(n)) => DistDoc::Normal {
            mu: n.mu,
            sigma2: n.sigma2,
        },
    }
}

fn column_info(name: &str, ty: ColumnType) -> ColumnInfo {
    let (t, digits) = match ty {
        ColumnType::Number { scale } if scale.scale_digits == 0 => ("int".to_string(), None),
        ColumnType::Number { scale } => ("decimal".to_string(), Some(scale.scale_digits)),
        ColumnType::Text => ("string".to_string(), None),
        ColumnType::Dist { kind, exact, scale } => (
            format!("{}{}", kind.to_string().to_lowercase(), if exact { "" } else { "~" }),
            Some(scale.scale_digits),
        ),
    };
    ColumnInfo {
        name: name.into(),
        ty: t,
        scale_digits: digits,
    }
}

impl ResultDocument {
    pub fn from_table(t: &ProbTable) -> Self {
        let schema = t.schema();
        let columns = schema.columns().iter().map(|c| column_info(&c.name, c.ty)).collect();
        let rows = t
            .rows()
            .iter()
            .map(|row| {
                let mut values = Vec::new();
                let mut aggregates = Vec::new();
                for (cell, col) in row.cells.iter().zip(schema.columns()) {
                    match cell {
                        Cell::Num(d) => values.push(Literal::Num(*d)),
                        Cell::Text(s) => values.push(Literal::Text(s.to_string())),
                        Cell::Dist(a) => aggregates.push(AggregateDoc {
                            name: col.name.clone(),
                            aggregate: a.kind,
                            conditioned: a.conditioned,
                            dist: dist_doc(&a.dist),
                            summary: summarize(a.dist.as_dist()),
                        }),
                    }
                }
                ResultRow {
                    values,
                    p: row.p,
                    aggregates,
                }
            })
            .collect();
        ResultDocument { columns, rows }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize") + "\n"
    }

    /// Parses a document and checks that every exact support is normalized.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ResultDocument = serde_json::from_str(text)?;
        for (i, row) in doc.rows.iter().enumerate() {
            if !(0.0..=1.0).contains(&row.p) {
                return Err(PgfError::InvalidDistribution(format!("row {i}: probability {}", row.p)));
            }
            for a in &row.aggregates {
                if let DistDoc::Exact { support, .. } = &a.dist {
                    let total: f64 = support.iter().map(|s| s.p).sum();
                    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
                        return Err(PgfError::InvalidDistribution(format!(
                            "row {i}, `{}`: support sums to {total}",
                            a.name
                        )));
                    }
                }
            }
        }
        Ok(doc)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnInfo> {
        self.columns.iter().find(|c| c.name == name)
    }
}

impl AggregateDoc {
    /// The exact distribution, on the grid of `scale_digits` digits.
    pub fn to_pgf(&self, scale_digits: u32) -> Result<Option<Pgf>> {
        let DistDoc::Exact { support, overflow } = &self.dist else {
            return Ok(None);
        };
        let scale = ValueScale::new(scale_digits)?;
        let terms = support
            .iter()
            .map(|s| Ok((parse_value(&s.value, scale)?, s.p)))
            .collect::<Result<Vec<_>>>()?;
        let overflow = match overflow {
            Some(o) => Some(Overflow {
                at: parse_value(&o.at, scale)?,
                side: o.side,
            }),
            None => None,
        };
        Ok(Some(Pgf::from_terms(terms, scale)?.with_overflow(overflow)))
    }
}
