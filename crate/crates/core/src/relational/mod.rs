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

//! Probabilistic relational operators over tables with a tuple
//! probability column.

mod aggregate;
mod ops;
mod predicate;
mod table;

pub use aggregate::{condition_on_existence, AggSpec, DistMinMaxState, GroupAggregate, Method};
pub use ops::{Join, ProbSelect, Project, Select};
pub use predicate::{BoundPredicate, BoundSide, Literal, Operand, Predicate};
pub use table::{AggCell, AggDist, AggKind, Cell, Column, ColumnType, Lineage, ProbTable, Row, Schema};
