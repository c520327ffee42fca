//! Interval rule sets that summarize labeled outlier-detection results.
//!
//! The crate learns a small set of short, axis-aligned interval rules that
//! together partition the feature space and reproduce a given labeling:
//!
//! * [`stair`] grows the rule set greedily under a ratio objective that trades
//!   accumulated purity against total rule length, with a self-tuning
//!   stabilizer in the denominator.
//! * [`lstair`] partitions the data jointly with rule learning and fits one
//!   rule set per partition.
//! * [`baselines`] provides depth-swept ID3 and pruned CART-style trees for
//!   comparison, and [`bench`] runs the comparison protocols.

pub mod baselines;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod kmeans;
pub mod lstair;
pub mod metrics;
pub mod rules;
pub mod splitter;
pub mod stair;

pub use dataset::{Dataset, StandardizationParams};
pub use error::{Error, Result};
pub use metrics::{ObjectiveState, ScoreKind};
pub use rules::{Interval, Rule, RuleSet};

/// Absolute tolerance for entropy and objective comparisons.
pub const EPSILON: f64 = 1e-9;

/// How a learner finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    /// The score threshold was exceeded.
    Reached,
    /// No further split was possible before the threshold was met.
    Exhausted,
    /// The score stopped improving; the best rule set seen is returned.
    Stalled,
}

impl FitStatus {
    pub fn is_flagged(self) -> bool {
        self != FitStatus::Reached
    }
}

impl std::fmt::Display for FitStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitStatus::Reached => "reached",
            FitStatus::Exhausted => "below_threshold",
            FitStatus::Stalled => "stalled",
        })
    }
}
