//! Checklist model, scoring, static analysis and reporting for web
//! application security audits.

pub mod checklist;
pub mod error;
pub mod observation;
pub mod reference;
pub mod report;
pub mod risk_engine;
pub mod static_analyzer;
#[cfg(any(test, feature = "proptest"))]
pub mod strategies;

pub use checklist::{default_checklist, load_checklist, risk_level, Checklist, ParameterSpec, RiskLevel};
pub use error::{AnalysisError, ChecklistError, ReportError, ScoringError};
pub use observation::{Evidence, Observation, ObservationValue, ProbeReport, SkippedParameter, Source};
pub use risk_engine::{build_profile, judge_compliance, AuditProfile, Compliance};
