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

use thiserror::Error;

pub type Result<T, E = PgfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PgfError {
    #[error("empty product")]
    EmptyProduct,

    #[error("empty support after truncation")]
    EmptySupport,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("sum support too large, use approximation (degree {degree} exceeds {max})")]
    SumSupportTooLarge { degree: u64, max: u64 },

    #[error("fft round-off produced coefficient {value:e} at index {index}")]
    FftRoundOff { index: usize, value: f64 },

    #[error("aggregate state mismatch: {0}")]
    StateMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("value {value} is not on the grid of {scale_digits} decimal digits")]
    OffGrid { value: String, scale_digits: u32 },

    #[error("moment fit failed: {0}")]
    FitFailed(String),

    #[error("correlated tuples: {0}")]
    Correlated(String),

    #[error("plan validation failed:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<String>),

    #[error("node `{node}`: {source}")]
    Node {
        node: String,
        #[source]
        source: Box<PgfError>,
    },

    #[error("oracle limited to {limit} tuples (plan touches {found} probabilistic tuples)")]
    OracleTooLarge { limit: usize, found: usize },

    #[error("{path}: {message}")]
    Ingest { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl PgfError {
    pub fn parameter(msg: impl Into<String>) -> Self {
        PgfError::Parameter(msg.into())
    }

    pub fn in_node(self, node: &str) -> Self {
        PgfError::Node {
            node: node.to_string(),
            source: Box::new(self),
        }
    }

    /// True for errors that indicate a malformed plan or input rather than a
    /// failure while computing.
    pub fn is_validation(&self) -> bool {
        match self {
            PgfError::Validation(_) | PgfError::OracleTooLarge { .. } | PgfError::Ingest { .. } => {
                true
            }
            PgfError::Node { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
