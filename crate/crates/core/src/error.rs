use thiserror::Error;

use crate::formula::VarId;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("variable `{0}` is used but never declared")]
    UndeclaredVariable(VarId),
    #[error("variable `{0}` is declared twice")]
    DuplicateVariable(VarId),
    #[error("invalid variable name `{0}`")]
    InvalidVarName(String),
    #[error("probability {value} of `{name}` is outside [0, 1]")]
    ProbabilityOutOfRange { name: String, value: String },
    #[error("no probability for variable `{0}`")]
    MissingProbability(VarId),
    #[error("formula is not read-once: `{0}` occurs more than once")]
    NotReadOnce(VarId),

    #[error("malformed CSV for table `{table}`: {message}")]
    Csv { table: String, message: String },
    #[error("duplicate tuple id `{id}` in table `{table}`")]
    DuplicateTupleId { table: String, id: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("atom {table} has {found} arguments but the table has {expected} attributes")]
    ArityMismatch {
        table: String,
        expected: usize,
        found: usize,
    },
    #[error("query has no atoms")]
    EmptyQuery,

    #[error("formula is already read-once, nothing to dissociate")]
    NothingToDissociate,
    #[error("variable `{0}` occurs in both conjunctive and disjunctive positions")]
    MixedContext(VarId),
    #[error("variable `{0}` is not dissociated conjunctively or disjunctively as required")]
    UnsupportedContext(VarId),
    #[error("invalid corner choice for `{0}`")]
    InvalidChoice(VarId),
    #[error("copy `{0}` does not belong to any dissociation group")]
    UnknownCopy(VarId),
    #[error("variable `{0}` has probability 1, its frontier is degenerate")]
    DegenerateGroup(VarId),
    #[error("the oracle supports a single dissociation group, found {0}")]
    TooManyGroups(usize),
    #[error("grid resolution must lie in (0, 1], got {0}")]
    InvalidResolution(f64),

    #[error("formula has {found} variables, the oracle limit is {limit}")]
    TooManyVariables { found: usize, limit: usize },

    #[error("variable `{0}` does not occur in the formula")]
    VariableAbsent(VarId),
    #[error("no shared variable in leaf")]
    NoSharedVariable,
    #[error("leaf interval has not been initialized")]
    UninitializedLeaf,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sampled instance is empty (seed {0}); retry with another seed")]
    EmptyInstance(u64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
