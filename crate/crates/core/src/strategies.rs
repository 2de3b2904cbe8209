//! proptest strategies for randomized audit inputs. Enabled by the
//! `proptest` feature.

use chrono::{DateTime, TimeZone, Utc};
use proptest::collection::vec;
use proptest::option;
use proptest::prelude::*;

use crate::checklist::{default_checklist, Checklist, ParameterKind, ParameterSpec};
use crate::observation::{Evidence, Observation, ObservationValue, SkippedParameter, Source};
use crate::report::{AuditDocument, TargetMetadata};

pub fn timestamp() -> impl Strategy<Value = DateTime<Utc>> {
    // 2000-01-01 .. 2100-01-01 with nanosecond precision
    (946_684_800i64..4_102_444_800i64, 0u32..1_000_000_000).prop_map(|(s, n)| Utc.timestamp_opt(s, n).unwrap())
}

/// Any value legal for `spec`.
pub fn value_for(spec: &ParameterSpec) -> BoxedStrategy<ObservationValue> {
    let fixed = prop_oneof![
        Just(ObservationValue::Yes),
        Just(ObservationValue::No),
        Just(ObservationValue::NotApplicable),
        Just(ObservationValue::Unknown),
    ];
    match spec.kind {
        ParameterKind::Boolean => fixed.boxed(),
        ParameterKind::Categorical => {
            let mut choices: Vec<String> = spec.accepted_values.clone();
            choices.push("something else".into());
            prop_oneof![
                fixed,
                proptest::sample::select(choices).prop_map(ObservationValue::Categorical),
                "[A-Za-z0-9+ ]{1,12}".prop_map(|s: String| ObservationValue::from_text(&s)),
            ]
            .boxed()
        }
    }
}

fn source() -> impl Strategy<Value = Source> {
    prop_oneof![Just(Source::Dynamic), Just(Source::Static), Just(Source::Manual)]
}

fn evidence() -> impl Strategy<Value = Evidence> {
    (any::<String>(), any::<String>()).prop_map(|(a, b)| Evidence::new(a, b))
}

fn observation(spec: &ParameterSpec, source: Source) -> impl Strategy<Value = Observation> {
    let id = spec.id.clone();
    (value_for(spec), vec(evidence(), 0..3), timestamp(), option::of(any::<String>())).prop_map(
        move |(value, evidence, captured_at, note)| Observation {
            parameter_id: id.clone(),
            value,
            evidence,
            source,
            captured_at,
            note,
        },
    )
}

/// Zero to three observations per parameter, never two from the same source.
pub fn observations(checklist: &Checklist) -> BoxedStrategy<Vec<Observation>> {
    let per_param: Vec<BoxedStrategy<Vec<Observation>>> = checklist
        .parameters
        .iter()
        .map(|spec| {
            let spec = spec.clone();
            proptest::sample::subsequence(vec![Source::Dynamic, Source::Static, Source::Manual], 0..=3)
                .prop_flat_map(move |sources| {
                    sources.into_iter().map(|s| observation(&spec, s)).collect::<Vec<_>>()
                })
                .boxed()
        })
        .collect();
    per_param.prop_map(|groups| groups.into_iter().flatten().collect()).boxed()
}

/// One observation per parameter with a random source, as a single audit run
/// would produce.
pub fn single_observations(checklist: &Checklist) -> BoxedStrategy<Vec<Observation>> {
    let per_param: Vec<BoxedStrategy<Observation>> = checklist
        .parameters
        .iter()
        .map(|spec| {
            let spec = spec.clone();
            source().prop_flat_map(move |s| observation(&spec, s)).boxed()
        })
        .collect();
    per_param.boxed()
}

/// A fully scored document against the default checklist.
pub fn audit_document() -> impl Strategy<Value = AuditDocument> {
    let checklist = default_checklist();
    let ids: Vec<String> = checklist.parameters.iter().map(|p| p.id.clone()).collect();
    let skipped = vec(
        (proptest::sample::select(ids), any::<String>()).prop_map(|(parameter_id, reason)| SkippedParameter {
            parameter_id,
            reason,
        }),
        0..4,
    );
    (
        any::<String>(),
        option::of(any::<String>()),
        observations(&checklist),
        skipped,
        timestamp(),
    )
        .prop_map(move |(label, location, obs, skipped, started)| {
            AuditDocument::assemble(TargetMetadata { label, location }, obs, skipped, &checklist, started)
                .expect("generated observations are legal")
        })
}
