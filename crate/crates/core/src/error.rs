use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid record {record}: {reason}")]
    InvalidRecord { record: String, reason: String },
    #[error("duplicate paper_id {0}")]
    DuplicatePaper(String),
    #[error("unknown author {0}")]
    UnknownAuthor(String),
    #[error("author {0} cannot be paired with itself")]
    SameAuthor(String),
    #[error("inverted year window [{lo}, {hi}]")]
    InvertedWindow { lo: i32, hi: i32 },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("pair ({mentor}, {mentee}) has no co-publications")]
    NoCopublications { mentor: String, mentee: String },
    #[error("no corpus author matches mentee {0:?}")]
    NoMenteeMatch(String),
    #[error("no co-author of mentee {mentee:?} matches mentor {mentor:?}")]
    NoMentorMatch { mentor: String, mentee: String },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("schema mismatch: expected {expected} columns, found {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("schema mismatch at column {index}: expected {expected:?}, found {found:?}")]
    SchemaNameMismatch { index: usize, expected: String, found: String },
    #[error("design matrix is rank deficient; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("need at least 2 distinct mentees to split, found {0}")]
    TooFewGroups(usize),
    #[error("duplicate edge {mentor} -> {mentee}")]
    DuplicateEdge { mentor: String, mentee: String },
    #[error("edge {mentor} -> {mentee} has weight {weight} outside [0, 1]")]
    WeightOutOfRange { mentor: String, mentee: String, weight: f64 },
    #[error("all {0} search trials failed")]
    AllTrialsFailed(usize),
    #[error("no rows left after {0}")]
    NoRowsLeft(&'static str),
}
