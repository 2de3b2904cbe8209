//! Compliance judgment, observation merging, per-category coverage and
//! per-risk-level non-compliance counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::checklist::{Category, Checklist, ParameterKind, ParameterSpec, Polarity, RiskLevel};
use crate::error::ScoringError;
use crate::observation::{Observation, ObservationValue, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compliance {
    Compliant,
    NonCompliant,
}

impl Compliance {
    pub fn is_compliant(self) -> bool {
        self == Compliance::Compliant
    }
}

/// Judges a single observed value against its checklist row.
///
/// Boolean rows are compliant only on the desired answer; NA and Unknown are
/// never compliant. Categorical rows are compliant on any decided value other
/// than No that the row accepts.
pub fn judge_compliance(spec: &ParameterSpec, value: &ObservationValue) -> Result<Compliance, ScoringError> {
    use ObservationValue::*;
    let compliant = match (spec.kind, value) {
        (ParameterKind::Boolean, Categorical(v)) => {
            return Err(ScoringError::CategoricalOnBoolean {
                parameter: spec.id.clone(),
                value: v.clone(),
            })
        }
        (_, NotApplicable | Unknown) => false,
        (ParameterKind::Boolean, Yes) => spec.polarity == Polarity::DesiredYes,
        (ParameterKind::Boolean, No) => spec.polarity == Polarity::DesiredNo,
        (ParameterKind::Categorical, No) => false,
        (ParameterKind::Categorical, Yes) => spec.accepted_values.is_empty(),
        (ParameterKind::Categorical, Categorical(v)) => spec.accepts(v),
    };
    Ok(if compliant {
        Compliance::Compliant
    } else {
        Compliance::NonCompliant
    })
}

fn rationale(spec: &ParameterSpec, observation: Option<&Observation>, compliance: Compliance) -> String {
    let Some(obs) = observation else {
        return "not observed; attest manually".into();
    };
    match (&obs.value, compliance) {
        (ObservationValue::NotApplicable, _) => "dependent feature absent".into(),
        (ObservationValue::Unknown, _) => match &obs.note {
            Some(note) => format!("undetermined ({note}); attest manually"),
            None => "undetermined; attest manually".into(),
        },
        (ObservationValue::Categorical(v), Compliance::Compliant) => format!("'{v}' is an accepted implementation"),
        (ObservationValue::Categorical(v), Compliance::NonCompliant) => format!("'{v}' is not an accepted value"),
        (_, Compliance::Compliant) if spec.polarity == Polarity::DesiredNo => "weakness not observed".into(),
        (_, Compliance::Compliant) => "control implemented".into(),
        (_, Compliance::NonCompliant) if spec.polarity == Polarity::DesiredNo => "weakness present".into(),
        (_, Compliance::NonCompliant) => "control missing".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceRecord {
    pub parameter_id: String,
    /// The observation that won the merge; `None` when nothing observed the parameter.
    pub observation: Option<Observation>,
    pub compliance: Compliance,
    pub rationale: String,
}

impl ComplianceRecord {
    pub fn value(&self) -> ObservationValue {
        self.observation
            .as_ref()
            .map(|o| o.value.clone())
            .unwrap_or(ObservationValue::Unknown)
    }
}

/// Compliance records for one audited target, one per checklist parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditProfile {
    pub target_label: String,
    pub checklist_version: String,
    pub records: Vec<ComplianceRecord>,
}

impl AuditProfile {
    pub fn record(&self, parameter_id: &str) -> Option<&ComplianceRecord> {
        self.records.iter().find(|r| r.parameter_id == parameter_id)
    }

    pub fn non_compliant(&self) -> impl Iterator<Item = &ComplianceRecord> {
        self.records.iter().filter(|r| !r.compliance.is_compliant())
    }
}

/// Picks one observation per parameter.
///
/// Higher-precedence sources win (Dynamic > Static > Manual), but an Unknown
/// never displaces a decided value from a lower source. Two observations from
/// the same source for the same parameter are an error.
pub fn merge_observations<'a>(
    observations: impl IntoIterator<Item = &'a Observation>,
    checklist: &Checklist,
) -> Result<BTreeMap<String, Observation>, ScoringError> {
    let mut grouped: BTreeMap<&str, Vec<&Observation>> = BTreeMap::new();
    for obs in observations {
        if checklist.get(&obs.parameter_id).is_none() {
            return Err(ScoringError::UnknownParameter(obs.parameter_id.clone()));
        }
        let group = grouped.entry(obs.parameter_id.as_str()).or_default();
        if group.iter().any(|o| o.source == obs.source) {
            return Err(ScoringError::DuplicateObservation {
                parameter: obs.parameter_id.clone(),
                origin: obs.source.to_string(),
            });
        }
        group.push(obs);
    }
    Ok(grouped
        .into_iter()
        .filter_map(|(id, group)| {
            group
                .into_iter()
                .max_by_key(|o| (o.value.is_decided(), o.source.precedence()))
                .map(|o| (id.to_string(), o.clone()))
        })
        .collect())
}

/// Merges observations and judges every checklist parameter.
pub fn build_profile(
    label: &str,
    observations: &[Observation],
    checklist: &Checklist,
) -> Result<AuditProfile, ScoringError> {
    let mut merged = merge_observations(observations, checklist)?;
    let mut records = Vec::with_capacity(checklist.len());
    for spec in &checklist.parameters {
        let observation = merged.remove(&spec.id);
        let value = observation.as_ref().map(|o| &o.value).unwrap_or(&ObservationValue::Unknown);
        let compliance = judge_compliance(spec, value)?;
        records.push(ComplianceRecord {
            parameter_id: spec.id.clone(),
            rationale: rationale(spec, observation.as_ref(), compliance),
            observation,
            compliance,
        });
    }
    Ok(AuditProfile {
        target_label: label.to_string(),
        checklist_version: checklist.version.clone(),
        records,
    })
}

/// Builds a profile from bare values, as an auditor copying a results table would.
pub fn profile_from_values<'a>(
    label: &str,
    values: impl IntoIterator<Item = (&'a str, ObservationValue)>,
    source: Source,
    checklist: &Checklist,
) -> Result<AuditProfile, ScoringError> {
    let observations: Vec<Observation> = values
        .into_iter()
        .map(|(id, value)| Observation::new(id, value, source))
        .collect();
    build_profile(label, &observations, checklist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCoverage {
    pub fulfilled: usize,
    pub total: usize,
}

impl std::fmt::Display for CategoryCoverage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.fulfilled, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub per_category: BTreeMap<Category, CategoryCoverage>,
}

impl CoverageSummary {
    pub fn get(&self, category: Category) -> CategoryCoverage {
        self.per_category
            .get(&category)
            .copied()
            .unwrap_or(CategoryCoverage { fulfilled: 0, total: 0 })
    }

    pub fn total_fulfilled(&self) -> usize {
        self.per_category.values().map(|c| c.fulfilled).sum()
    }
}

/// Counts compliant records per category.
pub fn coverage_summary(profile: &AuditProfile, checklist: &Checklist) -> CoverageSummary {
    let mut per_category: BTreeMap<Category, CategoryCoverage> = checklist
        .category_counts()
        .into_iter()
        .map(|(c, total)| (c, CategoryCoverage { fulfilled: 0, total }))
        .collect();
    for record in profile.records.iter().filter(|r| r.compliance.is_compliant()) {
        if let Some(spec) = checklist.get(&record.parameter_id) {
            if let Some(entry) = per_category.get_mut(&spec.category) {
                entry.fulfilled += 1;
            }
        }
    }
    CoverageSummary { per_category }
}

/// Number of non-compliant parameters at each risk level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub counts: BTreeMap<RiskLevel, usize>,
}

impl RiskProfile {
    pub fn count(&self, level: RiskLevel) -> usize {
        self.counts.get(&level).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Non-compliant parameters at `level` or above.
    pub fn at_or_above(&self, level: RiskLevel) -> usize {
        self.counts.iter().filter(|(l, _)| **l >= level).map(|(_, n)| n).sum()
    }
}

pub fn risk_profile(profile: &AuditProfile, checklist: &Checklist) -> RiskProfile {
    let mut counts: BTreeMap<RiskLevel, usize> = RiskLevel::ALL.iter().map(|l| (*l, 0)).collect();
    for record in profile.non_compliant() {
        if let Some(spec) = checklist.get(&record.parameter_id) {
            *counts.entry(spec.risk).or_default() += 1;
        }
    }
    RiskProfile { counts }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub parameter_id: String,
    pub category: Category,
    pub subcategory: String,
    pub name: String,
    /// One value per compared target, in label order.
    pub values: Vec<ObservationValue>,
}

/// Parameter × target matrix plus per-target summaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub checklist_version: String,
    pub labels: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    pub coverage: Vec<CoverageSummary>,
    pub risk: Vec<RiskProfile>,
}

pub fn compare_profiles(profiles: &[AuditProfile], checklist: &Checklist) -> Result<Comparison, ScoringError> {
    let first = profiles.first().ok_or(ScoringError::NoProfiles)?;
    for p in profiles {
        if p.checklist_version != first.checklist_version {
            return Err(ScoringError::ChecklistMismatch(
                first.checklist_version.clone(),
                p.checklist_version.clone(),
            ));
        }
    }
    if first.checklist_version != checklist.version {
        return Err(ScoringError::ChecklistMismatch(
            checklist.version.clone(),
            first.checklist_version.clone(),
        ));
    }
    let rows = checklist
        .parameters
        .iter()
        .map(|spec| ComparisonRow {
            parameter_id: spec.id.clone(),
            category: spec.category,
            subcategory: spec.subcategory.clone(),
            name: spec.name.clone(),
            values: profiles
                .iter()
                .map(|p| p.record(&spec.id).map(|r| r.value()).unwrap_or(ObservationValue::Unknown))
                .collect(),
        })
        .collect();
    Ok(Comparison {
        checklist_version: checklist.version.clone(),
        labels: profiles.iter().map(|p| p.target_label.clone()).collect(),
        rows,
        coverage: profiles.iter().map(|p| coverage_summary(p, checklist)).collect(),
        risk: profiles.iter().map(|p| risk_profile(p, checklist)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checklist::{default_checklist, ids};
    use ObservationValue::*;

    fn judge(id: &str, value: ObservationValue) -> Compliance {
        let c = default_checklist();
        judge_compliance(c.get(id).unwrap(), &value).unwrap()
    }

    #[test]
    fn judge_examples() {
        assert_eq!(judge(ids::PASSWORD_COMPLEXITY, ObservationValue::categorical("Only Length")), Compliance::Compliant);
        assert_eq!(judge(ids::JS_EXECUTION, Yes), Compliance::NonCompliant);
        assert_eq!(judge(ids::JS_EXECUTION, No), Compliance::Compliant);
        assert_eq!(judge(ids::MFA_TYPE, NotApplicable), Compliance::NonCompliant);
        assert_eq!(judge(ids::MFA_ENABLED, Unknown), Compliance::NonCompliant);
        assert_eq!(judge(ids::HPP, ObservationValue::categorical("last-wins")), Compliance::NonCompliant);
        assert_eq!(judge(ids::HSTS_MAX_AGE, ObservationValue::categorical("31536000")), Compliance::Compliant);
    }

    #[test]
    fn categorical_on_boolean_is_an_error() {
        let c = default_checklist();
        let err = judge_compliance(c.get(ids::MFA_ENABLED).unwrap(), &ObservationValue::categorical("TOTP")).unwrap_err();
        assert!(matches!(err, ScoringError::CategoricalOnBoolean { .. }));
    }

    #[test]
    fn dynamic_beats_static() {
        let c = default_checklist();
        let obs = vec![
            Observation::new(ids::SESSION_REGENERATED, Yes, Source::Static),
            Observation::new(ids::SESSION_REGENERATED, No, Source::Dynamic).with_evidence("POST /login", "200"),
        ];
        let p = build_profile("t", &obs, &c).unwrap();
        let r = p.record(ids::SESSION_REGENERATED).unwrap();
        assert_eq!(r.value(), No);
        assert_eq!(r.observation.as_ref().unwrap().source, Source::Dynamic);
    }

    #[test]
    fn unknown_does_not_override_decided_lower_source() {
        let c = default_checklist();
        let obs = vec![
            Observation::new(ids::JS_EXECUTION, Unknown, Source::Dynamic),
            Observation::new(ids::JS_EXECUTION, No, Source::Static),
        ];
        let p = build_profile("t", &obs, &c).unwrap();
        assert_eq!(p.record(ids::JS_EXECUTION).unwrap().value(), No);
    }

    #[test]
    fn missing_observation_is_unknown() {
        let c = default_checklist();
        let p = build_profile("t", &[], &c).unwrap();
        assert_eq!(p.records.len(), 48);
        let r = p.record(ids::BACKUP_CODES).unwrap();
        assert!(r.observation.is_none());
        assert_eq!(r.value(), Unknown);
        assert_eq!(r.compliance, Compliance::NonCompliant);
    }

    #[test]
    fn duplicate_same_source_rejected() {
        let c = default_checklist();
        let obs = vec![
            Observation::new(ids::CORS_POLICY, Yes, Source::Manual),
            Observation::new(ids::CORS_POLICY, No, Source::Manual),
        ];
        assert!(matches!(build_profile("t", &obs, &c), Err(ScoringError::DuplicateObservation { .. })));
    }

    #[test]
    fn unknown_parameter_rejected() {
        let c = default_checklist();
        let obs = vec![Observation::new("nope", Yes, Source::Manual)];
        assert_eq!(build_profile("t", &obs, &c).unwrap_err(), ScoringError::UnknownParameter("nope".into()));
    }

    #[test]
    fn all_compliant_profile() {
        let c = default_checklist();
        let values: Vec<(&str, ObservationValue)> = c
            .parameters
            .iter()
            .map(|p| {
                let v = match (p.kind, p.polarity) {
                    (ParameterKind::Categorical, _) => match p.accepted_values.first() {
                        Some(v) => ObservationValue::categorical(v.clone()),
                        None => ObservationValue::categorical("31536000"),
                    },
                    (_, Polarity::DesiredYes) => Yes,
                    (_, Polarity::DesiredNo) => No,
                };
                (p.id.as_str(), v)
            })
            .collect();
        let p = profile_from_values("all", values, Source::Manual, &c).unwrap();
        assert!(p.records.iter().all(|r| r.compliance.is_compliant()));
        let cov = coverage_summary(&p, &c);
        for cat in Category::ALL {
            let cc = cov.get(cat);
            assert_eq!(cc.fulfilled, cc.total);
            assert_eq!(cc.total, cat.expected_parameter_count());
        }
        let risk = risk_profile(&p, &c);
        assert_eq!(risk.total(), 0);
        assert_eq!(risk.counts.len(), 6);
    }

    #[test]
    fn compare_rejects_mixed_versions() {
        let c = default_checklist();
        let a = build_profile("a", &[], &c).unwrap();
        let mut b = a.clone();
        b.checklist_version = "2.0".into();
        assert!(matches!(compare_profiles(&[a.clone(), b], &c), Err(ScoringError::ChecklistMismatch(..))));
        assert!(matches!(compare_profiles(&[], &c), Err(ScoringError::NoProfiles)));
        let single = compare_profiles(&[a], &c).unwrap();
        assert_eq!(single.labels.len(), 1);
        assert!(single.rows.iter().all(|r| r.values.len() == 1));
    }

    mod properties {
        use super::*;
        use crate::strategies::{observations, single_observations, value_for};
        use proptest::prelude::*;

        fn any_spec_and_value() -> impl Strategy<Value = (ParameterSpec, ObservationValue)> {
            let c = default_checklist();
            proptest::sample::select(c.parameters).prop_flat_map(|spec| {
                let v = value_for(&spec);
                (Just(spec), v)
            })
        }

        proptest! {
            #[test]
            fn judge_is_total_and_deterministic((spec, value) in any_spec_and_value()) {
                let a = judge_compliance(&spec, &value).unwrap();
                let b = judge_compliance(&spec, &value).unwrap();
                prop_assert_eq!(a, b);
                if matches!(value, NotApplicable | Unknown) {
                    prop_assert_eq!(a, Compliance::NonCompliant);
                }
            }

            #[test]
            fn judge_rejects_only_categorical_on_boolean(
                (spec, value) in any_spec_and_value(),
                text in "[a-z]{1,8}",
            ) {
                let v = ObservationValue::categorical(format!("x-{text}"));
                let r = judge_compliance(&spec, &v);
                prop_assert_eq!(r.is_err(), spec.kind == ParameterKind::Boolean);
                prop_assert!(judge_compliance(&spec, &value).is_ok());
            }

            #[test]
            fn conservation(obs in observations(&default_checklist())) {
                let c = default_checklist();
                let p = build_profile("p", &obs, &c).unwrap();
                prop_assert_eq!(p.records.len(), 48);
                let cov = coverage_summary(&p, &c);
                let risk = risk_profile(&p, &c);
                prop_assert_eq!(cov.total_fulfilled() + risk.total(), 48);
                prop_assert_eq!(risk.total(), p.non_compliant().count());
                for cat in Category::ALL {
                    let cc = cov.get(cat);
                    prop_assert!(cc.fulfilled <= cc.total);
                    prop_assert_eq!(cc.total, cat.expected_parameter_count());
                }
            }

            #[test]
            fn monotone_safety(obs in single_observations(&default_checklist()), idx in 0usize..48) {
                let c = default_checklist();
                let before = build_profile("p", &obs, &c).unwrap();
                prop_assume!(before.records[idx].compliance.is_compliant());
                let mut changed = obs.clone();
                changed[idx].value = No;
                let after = build_profile("p", &changed, &c).unwrap();
                let (cb, ca) = (coverage_summary(&before, &c), coverage_summary(&after, &c));
                for cat in Category::ALL {
                    prop_assert!(ca.get(cat).fulfilled <= cb.get(cat).fulfilled);
                }
                prop_assert!(risk_profile(&after, &c).total() >= risk_profile(&before, &c).total());
            }
        }
    }
}
