//! Evaluation: ranking and completion metrics, the synthetic clone /
//! completion benchmark, and the harnesses that tie retrieval and
//! generation together.

pub mod bench;
pub mod harness;
pub mod metrics;

pub use bench::{
    build_synthetic_benchmark, BenchmarkConfig, CloneBenchmark, CloneQuery, CompletionItem,
    CompletionSet,
};
pub use harness::{alpha_sweep, random_encoder_chance, run_clone_eval, run_completion_eval, EvalReport};
pub use metrics::{
    average_precision_at_k, edit_similarity, exact_match, map_at_k, perplexity, precision_at_1,
    EvalError,
};
