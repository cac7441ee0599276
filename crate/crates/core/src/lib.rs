//! Rule induction for four-voice symbolic music.
//!
//! A corpus of four-voice pieces is columnized into sonority sequences; a machine-
//! enumerated universe of 63 interpretable features partitions the raw
//! sonority alphabet; a teacher/student loop extracts compositional rules
//! (probability distributions over feature values) by alternating
//! discriminative selection with constrained entropy maximization; and an
//! evolving bigram phase overwrites unigram rules with transition tables,
//! exposing style rules that only show up in the comparison.

pub mod corpus;
pub mod dist;
pub mod features;
pub mod learning;
pub mod ngram;
pub mod rulebook;
pub mod student;
pub mod teacher;

pub use corpus::{parse_corpus, CorpusModel, Sonority};
pub use dist::{CondDist, Dist};
pub use features::{
    apply_feature, describe_feature, enumerate_features, parse_feature, Feature, FeatureTable,
};
pub use learning::{run_unigram_loop, LoopConfig, Trace};
pub use student::{Objective, Rule, RuleSet, StudentModel};
