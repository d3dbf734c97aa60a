//! The two supervision signals: judge-based retrieval quality and
//! outcome-based generation utility, plus their top-k contrast sets.

mod judge;
mod metrics;
mod records;

pub use judge::{parse_judge_json, ParsedJudge, QualityAssessment, OVERALL_TOLERANCE};
pub use metrics::{exact_match, f1_score, normalize_answer};
pub use records::{
    build_contrast_sets, build_query_supervision, correctness_by_retriever, global_correctness,
    read_supervision_jsonl, utility_score, write_supervision_jsonl, ContrastSets,
    GenerationOutcome, QuerySupervision, SupervisionRecord, UtilityConfig,
};
