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

//! Exact and approximate aggregate distributions over tuple-independent
//! probabilistic tables, computed with probability generating functions.

pub mod approx;
pub mod error;
pub mod io;
pub mod oracle;
pub mod pgf;
pub mod plan;
pub mod relational;
pub mod uda;
pub mod value;

pub use error::{PgfError, Result};
pub use pgf::{CompareOp, DenseCountPgf, Distribution, Pgf};
pub use value::{Decimal, ExtendedValue, ValueScale};
