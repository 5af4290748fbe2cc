//! Crate-wide error type.

use crate::model::instance::Time;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown task id {id}")]
    UnknownTask { id: String },
    #[error("unknown precedence edge ({pred}, {succ})")]
    UnknownEdge { pred: String, succ: String },
    #[error("delta entry keyed {key} carries task id {task}")]
    DeltaIdMismatch { key: String, task: String },
    #[error("updated instance invalid: {violations:?}")]
    InvalidUpdatedInstance { violations: Vec<String> },
    #[error(
        "task {task} start {start} outside window [{earliest_start}, {latest_start}]"
    )]
    StartOutsideWindow {
        task: String,
        start: Time,
        earliest_start: Time,
        latest_start: Time,
    },
    #[error("missing assignments for {tasks:?}")]
    MissingAssignments { tasks: Vec<String> },
    #[error("schedule infeasible: {diagnostics:?}")]
    InfeasibleSchedule { diagnostics: Vec<String> },
    #[error("instance invalid: {violations:?}")]
    InvalidInstance { violations: Vec<String> },
    #[error("degenerate cost vector: all unit costs are zero")]
    DegenerateCostVector,
    #[error("edge features requested for non-overlapping processes {a} and {b}")]
    NonOverlappingPair { a: usize, b: usize },
    #[error("process {process} is not in the candidate set")]
    NotACandidate { process: usize },
    #[error("process {process} was already committed")]
    AlreadyCommitted { process: usize },
    #[error("subproblem for process {process} is infeasible (task {task})")]
    SubproblemInfeasible { process: usize, task: String },
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("no candidate solutions to select from")]
    NoCandidateSolutions,
    #[error("tensor shape mismatch: {context}")]
    ShapeMismatch { context: String },
    #[error("ranking needs at least two entries, got {got}")]
    RankingTooShort { got: usize },
    #[error("non-terminal state has no candidates")]
    NonTerminalWithoutCandidates,
    #[error("objective must be positive for the terminal reward, got {objective}")]
    NonPositiveObjective { objective: String },
    #[error("prior schedule infeasible for the original instance: {diagnostics:?}")]
    PriorInfeasible { diagnostics: Vec<String> },
    #[error("training data is empty")]
    EmptyDataset,
    #[error("invalid training triple at index {index}: {reason}")]
    InvalidTriple { index: usize, reason: String },
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: parse error: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field {field} has {got} entries, expected {expected} (one per task)")]
    LengthMismatch {
        field: String,
        expected: usize,
        got: usize,
    },
    #[error("field {field} references unknown task name {name}")]
    UnknownName { field: String, name: String },
    #[error("checkpoint rejected: {reason}")]
    BadCheckpoint { reason: String },
}
