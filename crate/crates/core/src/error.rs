use thiserror::Error;

use crate::checklist::{Category, RiskLevel};

#[derive(Debug, Error)]
pub enum ChecklistError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown {what} '{value}'")]
    UnknownValue { what: &'static str, value: String },
    #[error("checklist has no parameters")]
    Empty,
    #[error("duplicate parameter id '{0}'")]
    DuplicateId(String),
    #[error("parameter '{id}' stores risk {stored} but likelihood × impact gives {derived}")]
    RiskMismatch {
        id: String,
        stored: RiskLevel,
        derived: RiskLevel,
    },
    #[error("category {category} has {found} parameters, expected {expected}")]
    CategoryCount {
        category: Category,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoringError {
    #[error("categorical value '{value}' given for boolean parameter '{parameter}'")]
    CategoricalOnBoolean { parameter: String, value: String },
    #[error("parameter '{0}' is not in the checklist")]
    UnknownParameter(String),
    #[error("duplicate {origin} observations for parameter '{parameter}'")]
    DuplicateObservation { parameter: String, origin: String },
    #[error("profiles were built against different checklist versions ({0} vs {1})")]
    ChecklistMismatch(String, String),
    #[error("no profiles to compare")]
    NoProfiles,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed report document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported report schema '{0}'")]
    Schema(String),
    #[error("report checklist version '{found}' does not match '{expected}'")]
    ChecklistVersion { expected: String, found: String },
    #[error("embedded {what} does not match the re-scored observations")]
    Tampered { what: &'static str },
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("code corpus is empty")]
    EmptyCorpus,
    #[error("duplicate corpus path '{0}'")]
    DuplicatePath(String),
    #[error("rule file line {line}: {message}")]
    RuleParse { line: usize, message: String },
    #[error("rule '{rule}': invalid pattern: {source}")]
    Pattern {
        rule: String,
        #[source]
        source: regex::Error,
    },
    #[error("rule set does not cover static parameter '{0}'")]
    UncoveredParameter(String),
    #[error("rule '{rule}' targets '{parameter}', which is not a static parameter of the checklist")]
    NotStatic { rule: String, parameter: String },
    #[error("rules for '{0}' disagree on the verdict when nothing matches")]
    InconsistentAbsence(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
