//! Statistical-query simulation: the STAT(τ) oracle, distinguishers, and
//! learners.

pub mod learners;
pub mod oracle;
pub mod tester;

pub use learners::{
    backward_correction_learner, corrected_gradient_variance, sq_sgd_softmax, train_softmax, CheatingLearner,
    ConstantLearner, Learner, SgdConfig, SgdLearner, SgdReport, TrainConfig,
};
pub use oracle::{quantize, BatchQuery, BoundedQuery, OracleMode, QueryKind, SqOracle, Target, TranscriptEntry};
pub use tester::{moment_tester, tester_from_learner, Decision, TestOutcome};
