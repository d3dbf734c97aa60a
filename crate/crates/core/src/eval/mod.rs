//! Policy evaluation on simulated worlds: EM/F1 reports, abstention
//! analysis, comparison tables and routing latency.

mod latency;
mod policy;
mod report;

pub use latency::{latency_bench, LatencyStats};
pub use policy::{ConstantPolicy, Policy, RandomPolicy, RouterPolicy, TablePolicy};
pub use report::{
    evaluate_policy, evaluate_queries, r0_analysis, split_digest, ComparisonDelta, ComparisonTable, EvalReport,
    R0Analysis,
};
