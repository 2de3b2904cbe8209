//! Raw outcomes for checklist parameters, as produced by probes, pattern rules
//! or human attestation.

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::checklist::{EvaluationMode, ParameterKind, ParameterSpec};

/// Observed value for one parameter.
///
/// Text forms are `Yes`, `No`, `NA`, `Unknown`; anything else is a
/// categorical value kept verbatim (e.g. `Only Length`, `bcrypt`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ObservationValue {
    Yes,
    No,
    /// The parent feature is absent, so the question does not apply.
    NotApplicable,
    /// The probe or rule could not decide.
    Unknown,
    Categorical(String),
}

impl ObservationValue {
    pub fn from_text(text: &str) -> Self {
        let t = text.trim();
        match t.to_ascii_lowercase().as_str() {
            "yes" => ObservationValue::Yes,
            "no" => ObservationValue::No,
            "na" | "n/a" | "notapplicable" | "not applicable" => ObservationValue::NotApplicable,
            "unknown" | "" => ObservationValue::Unknown,
            _ => ObservationValue::Categorical(t.to_string()),
        }
    }

    pub fn categorical(value: impl Into<String>) -> Self {
        ObservationValue::from_text(&value.into())
    }

    pub fn is_decided(&self) -> bool {
        !matches!(self, ObservationValue::Unknown)
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, ObservationValue::Categorical(_))
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            ObservationValue::Yes
        } else {
            ObservationValue::No
        }
    }
}

impl fmt::Display for ObservationValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservationValue::Yes => f.write_str("Yes"),
            ObservationValue::No => f.write_str("No"),
            ObservationValue::NotApplicable => f.write_str("NA"),
            ObservationValue::Unknown => f.write_str("Unknown"),
            ObservationValue::Categorical(s) => f.write_str(s),
        }
    }
}

impl Serialize for ObservationValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObservationValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(ObservationValue::from_text(&s))
    }
}

/// Where an observation came from. Merge precedence is Dynamic > Static > Manual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    Dynamic,
    Static,
    Manual,
}

impl Source {
    pub fn precedence(self) -> u8 {
        match self {
            Source::Dynamic => 3,
            Source::Static => 2,
            Source::Manual => 1,
        }
    }
}

impl From<EvaluationMode> for Source {
    fn from(mode: EvaluationMode) -> Self {
        match mode {
            EvaluationMode::Dynamic => Source::Dynamic,
            EvaluationMode::Static => Source::Static,
            EvaluationMode::Manual => Source::Manual,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Dynamic => "Dynamic",
            Source::Static => "Static",
            Source::Manual => "Manual",
        })
    }
}

/// A request/response excerpt backing an observation. For static findings the
/// request side holds a `path:line` location and the response side the line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub request: String,
    pub response: String,
}

impl Evidence {
    pub fn new(request: impl Into<String>, response: impl Into<String>) -> Self {
        Evidence {
            request: request.into(),
            response: response.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub parameter_id: String,
    pub value: ObservationValue,
    #[serde(default)]
    pub evidence: Vec<Evidence>,
    pub source: Source,
    pub captured_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Observation {
    pub fn new(parameter_id: impl Into<String>, value: ObservationValue, source: Source) -> Self {
        Observation {
            parameter_id: parameter_id.into(),
            value,
            evidence: Vec::new(),
            source,
            captured_at: Utc::now(),
            note: None,
        }
    }

    pub fn with_evidence(mut self, request: impl Into<String>, response: impl Into<String>) -> Self {
        self.evidence.push(Evidence::new(request, response));
        self
    }

    pub fn with_all_evidence(mut self, evidence: impl IntoIterator<Item = Evidence>) -> Self {
        self.evidence.extend(evidence);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Equality ignoring the capture timestamp.
    pub fn same_outcome(&self, other: &Observation) -> bool {
        self.parameter_id == other.parameter_id
            && self.value == other.value
            && self.source == other.source
            && self.evidence == other.evidence
            && self.note == other.note
    }

    /// Checks the observation against its checklist row.
    pub fn validate(&self, spec: &ParameterSpec) -> Result<(), String> {
        if self.value.is_categorical() && spec.kind != ParameterKind::Categorical {
            return Err(format!(
                "categorical value '{}' on boolean parameter '{}'",
                self.value, self.parameter_id
            ));
        }
        let needs_evidence = matches!(
            self.value,
            ObservationValue::Yes | ObservationValue::No | ObservationValue::Categorical(_)
        );
        if self.source == Source::Dynamic && needs_evidence && self.evidence.is_empty() {
            return Err(format!("dynamic observation for '{}' has no evidence", self.parameter_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedParameter {
    pub parameter_id: String,
    pub reason: String,
}

/// Output of one scan or static analysis run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Base URL or code directory the run examined.
    pub target: String,
    pub observations: Vec<Observation>,
    #[serde(default)]
    pub skipped: Vec<SkippedParameter>,
}

impl ProbeReport {
    pub fn observation(&self, parameter_id: &str) -> Option<&Observation> {
        self.observations.iter().find(|o| o.parameter_id == parameter_id)
    }

    pub fn value_of(&self, parameter_id: &str) -> Option<&ObservationValue> {
        self.observation(parameter_id).map(|o| &o.value)
    }

    pub fn is_skipped(&self, parameter_id: &str) -> bool {
        self.skipped.iter().any(|s| s.parameter_id == parameter_id)
    }
}
