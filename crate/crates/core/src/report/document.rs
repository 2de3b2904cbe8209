use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::checklist::Checklist;
use crate::error::{ReportError, ScoringError};
use crate::observation::{Observation, SkippedParameter};
use crate::risk_engine::{
    build_profile, coverage_summary, risk_profile, AuditProfile, ComplianceRecord, CoverageSummary, RiskProfile,
};

pub const REPORT_SCHEMA: &str = "secaudit.report/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetMetadata {
    pub label: String,
    /// Base URL for scans, code directory for static analysis, or the merged inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

/// A self-contained audit: raw observations plus everything derived from them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditDocument {
    pub schema: String,
    pub tool_version: String,
    pub checklist_version: String,
    pub target: TargetMetadata,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub observations: Vec<Observation>,
    #[serde(default)]
    pub skipped: Vec<SkippedParameter>,
    pub records: Vec<ComplianceRecord>,
    pub coverage: CoverageSummary,
    pub risk: RiskProfile,
}

impl AuditDocument {
    /// Scores `observations` and packages the result. Observations are put in
    /// checklist order, higher-precedence sources first.
    pub fn assemble(
        target: TargetMetadata,
        mut observations: Vec<Observation>,
        skipped: Vec<SkippedParameter>,
        checklist: &Checklist,
        started_at: DateTime<Utc>,
    ) -> Result<Self, ScoringError> {
        let profile = build_profile(&target.label, &observations, checklist)?;
        observations.sort_by_key(|o| {
            (
                checklist.position(&o.parameter_id).unwrap_or(usize::MAX),
                std::cmp::Reverse(o.source.precedence()),
            )
        });
        let coverage = coverage_summary(&profile, checklist);
        let risk = risk_profile(&profile, checklist);
        Ok(AuditDocument {
            schema: REPORT_SCHEMA.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            checklist_version: checklist.version.clone(),
            target,
            started_at,
            finished_at: Utc::now().max(started_at),
            observations,
            skipped,
            records: profile.records,
            coverage,
            risk,
        })
    }

    pub fn profile(&self) -> AuditProfile {
        AuditProfile {
            target_label: self.target.label.clone(),
            checklist_version: self.checklist_version.clone(),
            records: self.records.clone(),
        }
    }

    /// Re-scores the embedded observations and checks that records, coverage
    /// and risk profile all match what is stored.
    pub fn validate(&self, checklist: &Checklist) -> Result<(), ReportError> {
        if self.schema != REPORT_SCHEMA {
            return Err(ReportError::Schema(self.schema.clone()));
        }
        if self.checklist_version != checklist.version {
            return Err(ReportError::ChecklistVersion {
                expected: checklist.version.clone(),
                found: self.checklist_version.clone(),
            });
        }
        let profile = build_profile(&self.target.label, &self.observations, checklist)?;
        if profile.records != self.records {
            return Err(ReportError::Tampered { what: "compliance records" });
        }
        if coverage_summary(&profile, checklist) != self.coverage {
            return Err(ReportError::Tampered { what: "coverage summary" });
        }
        if risk_profile(&profile, checklist) != self.risk {
            return Err(ReportError::Tampered { what: "risk profile" });
        }
        Ok(())
    }
}

/// Canonical JSON: object keys sorted, two-space indentation, trailing newline.
pub fn emit_json(doc: &AuditDocument) -> String {
    // Going through Value sorts object keys.
    let value = serde_json::to_value(doc).expect("audit documents always serialize");
    let mut text = serde_json::to_string_pretty(&value).expect("json values always serialize");
    text.push('\n');
    text
}

/// Structural parse only; see [`load_document`] for the consistency check.
pub fn parse_document(text: &str) -> Result<AuditDocument, ReportError> {
    let doc: AuditDocument = serde_json::from_str(text)?;
    if doc.schema != REPORT_SCHEMA {
        return Err(ReportError::Schema(doc.schema));
    }
    Ok(doc)
}

pub fn load_document(text: &str, checklist: &Checklist) -> Result<AuditDocument, ReportError> {
    let doc = parse_document(text)?;
    doc.validate(checklist)?;
    Ok(doc)
}
