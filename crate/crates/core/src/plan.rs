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

//! Query plans: a DAG of probabilistic operators, its validation against a
//! catalog of table schemas, and execution.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PgfError, Result};
use crate::pgf::CompareOp;
use crate::relational::{
    AggSpec, GroupAggregate, Join, Method, Operand, Predicate, ProbSelect, ProbTable, Project, Schema, Select,
};
use crate::uda::AggConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub nodes: Vec<PlanNode>,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    pub id: String,
    #[serde(flatten)]
    pub op: Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinKey {
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operator {
    Scan {
        table: String,
    },
    Select {
        input: String,
        predicate: Predicate,
    },
    ProbSelect {
        input: String,
        left: Operand,
        cmp: CompareOp,
        right: Operand,
        #[serde(default)]
        retain: bool,
    },
    Project {
        input: String,
        columns: Vec<String>,
    },
    Join {
        left: String,
        right: String,
        #[serde(default)]
        on: Vec<JoinKey>,
    },
    GroupAgg {
        input: String,
        #[serde(default)]
        keys: Vec<String>,
        aggs: Vec<AggSpec>,
    },
}

impl Operator {
    pub fn inputs(&self) -> Vec<&str> {
        match self {
            Operator::Scan { .. } => vec![],
            Operator::Select { input, .. }
            | Operator::ProbSelect { input, .. }
            | Operator::Project { input, .. }
            | Operator::GroupAgg { input, .. } => vec![input],
            Operator::Join { left, right, .. } => vec![left, right],
        }
    }
}

impl QueryPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans always serialize")
    }

    /// Tables read by scans reachable from the output.
    pub fn scanned_tables(&self) -> BTreeSet<String> {
        let by_id: HashMap<&str, &PlanNode> = self.nodes.iter().map(|n| (n.id.as_str(), n)).collect();
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        let mut stack = vec![self.output.as_str()];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(n) = by_id.get(id) {
                if let Operator::Scan { table } = &n.op {
                    out.insert(table.clone());
                }
                stack.extend(n.op.inputs());
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum BoundOp {
    Scan(String),
    Select(Select),
    ProbSelect(ProbSelect),
    Project(Project),
    Join(Join),
    Group(GroupAggregate),
}

#[derive(Debug, Clone)]
struct BoundNode {
    id: String,
    op: BoundOp,
    inputs: Vec<usize>,
}

/// A plan whose columns are all resolved; nodes are kept in evaluation
/// order and only nodes reachable from the output survive.
#[derive(Debug, Clone)]
pub struct ValidatedPlan {
    nodes: Vec<BoundNode>,
    output: usize,
    schema: Arc<Schema>,
}

impl ValidatedPlan {
    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.id.as_str())
    }
}

/// Checks structure, binds every operator and returns either the typed
/// plan or every violation found.
pub fn validate(
    plan: &QueryPlan,
    catalog: &BTreeMap<String, Arc<Schema>>,
    method_override: Option<Method>,
) -> Result<ValidatedPlan> {
    let mut errors = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, n) in plan.nodes.iter().enumerate() {
        if index.insert(n.id.as_str(), i).is_some() {
            errors.push(format!("duplicate node id `{}`", n.id));
        }
    }
    for n in &plan.nodes {
        for input in n.op.inputs() {
            if !index.contains_key(input) {
                errors.push(format!("node `{}`: unknown input `{input}`", n.id));
            }
        }
    }
    let Some(&out) = index.get(plan.output.as_str()) else {
        errors.push(format!("output node `{}` does not exist", plan.output));
        return Err(PgfError::Validation(errors));
    };
    if !errors.is_empty() {
        return Err(PgfError::Validation(errors));
    }

    // depth-first topological order of the nodes reachable from the output
    let mut order = Vec::new();
    let mut state = vec![0u8; plan.nodes.len()];
    let mut stack = vec![(out, false)];
    while let Some((i, done)) = stack.pop() {
        if done {
            state[i] = 2;
            order.push(i);
            continue;
        }
        match state[i] {
            2 => continue,
            1 => {
                errors.push(format!("plan has a cycle through `{}`", plan.nodes[i].id));
                return Err(PgfError::Validation(errors));
            }
            _ => {}
        }
        state[i] = 1;
        stack.push((i, true));
        for input in plan.nodes[i].op.inputs().into_iter().rev() {
            let j = index[input];
            if state[j] == 1 {
                errors.push(format!("plan has a cycle through `{}`", plan.nodes[j].id));
                return Err(PgfError::Validation(errors));
            }
            if state[j] == 0 {
                stack.push((j, false));
            }
        }
    }

    let mut position: HashMap<usize, usize> = HashMap::new();
    let mut bound: Vec<BoundNode> = Vec::with_capacity(order.len());
    let mut schemas: Vec<Option<Arc<Schema>>> = Vec::with_capacity(order.len());
    let mut tables: Vec<BTreeSet<String>> = Vec::with_capacity(order.len());
    for &i in &order {
        let node = &plan.nodes[i];
        let inputs: Vec<usize> = node.op.inputs().iter().map(|id| position[&index[id]]).collect();
        let in_schemas: Option<Vec<Arc<Schema>>> = inputs.iter().map(|j| schemas[*j].clone()).collect();
        let mut scanned: BTreeSet<String> = inputs.iter().flat_map(|j| tables[*j].iter().cloned()).collect();
        let mut fail = |msgs: Vec<String>| {
            errors.extend(msgs.into_iter().map(|m| format!("node `{}`: {m}", node.id)));
        };
        let result: Option<(BoundOp, Arc<Schema>)> = match (&node.op, in_schemas) {
            (Operator::Scan { table }, _) => match catalog.get(table) {
                Some(s) => {
                    scanned.insert(table.clone());
                    Some((BoundOp::Scan(table.clone()), s.clone()))
                }
                None => {
                    fail(vec![format!("unknown table `{table}`")]);
                    None
                }
            },
            // an input already failed; its errors are reported
            (_, None) => None,
            (Operator::Select { predicate, .. }, Some(s)) => match Select::bind(&s[0], predicate) {
                Ok(b) => Some((BoundOp::Select(b.clone()), b.schema().clone())),
                Err(e) => {
                    fail(e);
                    None
                }
            },
            (
                Operator::ProbSelect {
                    left,
                    cmp,
                    right,
                    retain,
                    ..
                },
                Some(s),
            ) => match ProbSelect::bind(&s[0], left, *cmp, right, *retain) {
                Ok(b) => Some((BoundOp::ProbSelect(b.clone()), b.schema().clone())),
                Err(e) => {
                    fail(e);
                    None
                }
            },
            (Operator::Project { columns, .. }, Some(s)) => match Project::bind(&s[0], columns) {
                Ok(b) => Some((BoundOp::Project(b.clone()), b.schema().clone())),
                Err(e) => {
                    fail(e);
                    None
                }
            },
            (Operator::Join { on, .. }, Some(s)) => {
                let shared: Vec<&String> = tables[inputs[0]].intersection(&tables[inputs[1]]).collect();
                let mut msgs = Vec::new();
                if !shared.is_empty() {
                    msgs.push(format!(
                        "unsafe reuse: table{} {} reach both join inputs",
                        if shared.len() > 1 { "s" } else { "" },
                        shared.iter().map(|t| format!("`{t}`")).collect::<Vec<_>>().join(", ")
                    ));
                }
                let keys: Vec<(String, String)> = on.iter().map(|k| (k.left.clone(), k.right.clone())).collect();
                match Join::bind(&s[0], &s[1], &keys) {
                    Ok(b) if msgs.is_empty() => Some((BoundOp::Join(b.clone()), b.schema().clone())),
                    Ok(_) => {
                        fail(msgs);
                        None
                    }
                    Err(e) => {
                        msgs.extend(e);
                        fail(msgs);
                        None
                    }
                }
            }
            (Operator::GroupAgg { keys, aggs, .. }, Some(s)) => {
                match GroupAggregate::bind(&s[0], keys, aggs, method_override) {
                    Ok(b) => Some((BoundOp::Group(b.clone()), b.schema().clone())),
                    Err(e) => {
                        fail(e);
                        None
                    }
                }
            }
        };
        position.insert(i, bound.len());
        tables.push(scanned);
        match result {
            Some((op, schema)) => {
                schemas.push(Some(schema));
                bound.push(BoundNode {
                    id: node.id.clone(),
                    op,
                    inputs,
                });
            }
            None => {
                schemas.push(None);
                bound.push(BoundNode {
                    id: node.id.clone(),
                    op: BoundOp::Scan(String::new()),
                    inputs,
                });
            }
        }
    }
    if !errors.is_empty() {
        return Err(PgfError::Validation(errors));
    }
    let output = position[&out];
    Ok(ValidatedPlan {
        schema: schemas[output].clone().expect("validated"),
        nodes: bound,
        output,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub workers: usize,
    pub agg: AggConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            agg: AggConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn with_workers(workers: usize) -> Self {
        EngineConfig {
            workers: workers.max(1),
            ..Self::default()
        }
    }
}

/// Evaluates every node once in topological order. Scans drop tuples of
/// probability zero. Intermediate tables are released after their last use.
pub fn execute(plan: &ValidatedPlan, data: &BTreeMap<String, ProbTable>, cfg: &EngineConfig) -> Result<ProbTable> {
    let mut uses = vec![0usize; plan.nodes.len()];
    for n in &plan.nodes {
        for i in &n.inputs {
            uses[*i] += 1;
        }
    }
    let mut results: Vec<Option<Cow<'_, ProbTable>>> = vec![None; plan.nodes.len()];
    for (k, node) in plan.nodes.iter().enumerate() {
        let input = |j: usize| -> &ProbTable { results[node.inputs[j]].as_deref().expect("inputs run first") };
        let wrap = |e: PgfError| e.in_node(&node.id);
        let out = match &node.op {
            BoundOp::Scan(table) => {
                let t = data
                    .get(table)
                    .ok_or_else(|| wrap(PgfError::Validation(vec![format!("table `{table}` was not loaded")])))?;
                if t.rows().iter().any(|r| r.p <= 0.0) {
                    let rows = t.rows().iter().filter(|r| r.p > 0.0).cloned().collect();
                    Cow::Owned(ProbTable::new(t.schema().clone(), rows).map_err(wrap)?)
                } else {
                    Cow::Borrowed(t)
                }
            }
            BoundOp::Select(op) => Cow::Owned(op.apply(input(0))),
            BoundOp::ProbSelect(op) => Cow::Owned(op.apply(input(0)).map_err(wrap)?),
            BoundOp::Project(op) => Cow::Owned(op.apply(input(0)).map_err(wrap)?),
            BoundOp::Join(op) => Cow::Owned(op.apply(input(0), input(1)).map_err(wrap)?),
            BoundOp::Group(op) => Cow::Owned(op.apply(input(0), cfg.workers, &cfg.agg).map_err(wrap)?),
        };
        for i in &node.inputs {
            uses[*i] -= 1;
            if uses[*i] == 0 {
                results[*i] = None;
            }
        }
        results[k] = Some(out);
    }
    Ok(results[plan.output].take().expect("output computed").into_owned())
}
