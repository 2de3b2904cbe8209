//! Source-level checks for the parameters a black-box scan cannot see, plus
//! supplementary evidence for a few that it can.

mod corpus;
mod escaping;
mod rules;
mod session;

pub use corpus::{CodeCorpus, SourceFile, SOURCE_EXTENSIONS};
pub use escaping::analyze_output_escaping;
pub use rules::{PatternRule, RuleContext, RuleHit, RuleSet, MAX_EVIDENCE};
pub use session::{analyze_session_and_logging, REGENERATION_WINDOW};

use std::collections::BTreeSet;

use crate::checklist::{Checklist, EvaluationMode};
use crate::error::AnalysisError;
use crate::observation::ProbeReport;

/// Runs the rule set over `corpus` and adds the supplementary analyses.
///
/// Static-mode parameters come from `rules`. The supplementary analyses only
/// contribute observations for parameters of other modes, so every parameter
/// gets at most one static observation.
pub fn run_static(corpus: &CodeCorpus, checklist: &Checklist, rules: &RuleSet) -> Result<ProbeReport, AnalysisError> {
    if corpus.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    rules.validate_against(checklist)?;

    let mut observations = rules.evaluate(corpus);
    let mut seen: BTreeSet<String> = observations.iter().map(|o| o.parameter_id.clone()).collect();
    let supplementary = analyze_output_escaping(corpus)
        .into_iter()
        .chain(session::analyze_session(corpus));
    for obs in supplementary {
        let keep = checklist
            .get(&obs.parameter_id)
            .is_some_and(|spec| spec.mode != EvaluationMode::Static);
        if keep && seen.insert(obs.parameter_id.clone()) {
            observations.push(obs);
        }
    }
    observations.sort_by_key(|o| checklist.position(&o.parameter_id).unwrap_or(usize::MAX));
    Ok(ProbeReport {
        target: corpus.origin.clone(),
        observations,
        skipped: Vec::new(),
    })
}

/// Convenience wrapper using the bundled rules.
pub fn run_default(corpus: &CodeCorpus, checklist: &Checklist) -> Result<ProbeReport, AnalysisError> {
    run_static(corpus, checklist, &RuleSet::default_rules())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checklist::{default_checklist, ids};
    use crate::observation::{ObservationValue, Source};

    #[test]
    fn empty_corpus_is_an_error() {
        let c = CodeCorpus::new("t", "php", Vec::<(String, String)>::new()).unwrap();
        assert!(matches!(run_default(&c, &default_checklist()), Err(AnalysisError::EmptyCorpus)));
    }

    #[test]
    fn one_static_observation_per_parameter() {
        let c = CodeCorpus::new(
            "t",
            "php",
            vec![(
                "login.php".to_string(),
                "<?php\nsession_start();\n$stmt = $db->prepare('SELECT id FROM users WHERE email = ?');\nif (password_verify($p, $h)) { session_regenerate_id(true); }\necho htmlspecialchars($_GET['q']);".to_string(),
            )],
        )
        .unwrap();
        let checklist = default_checklist();
        let report = run_default(&c, &checklist).unwrap();
        let ids_seen: Vec<&str> = report.observations.iter().map(|o| o.parameter_id.as_str()).collect();
        let unique: BTreeSet<&str> = ids_seen.iter().copied().collect();
        assert_eq!(unique.len(), ids_seen.len());
        assert!(report.observations.iter().all(|o| o.source == Source::Static));
        assert_eq!(report.value_of(ids::PARAMETERIZED_QUERIES), Some(&ObservationValue::Yes));
        assert_eq!(report.value_of(ids::SESSION_REGENERATED), Some(&ObservationValue::Yes));
        assert_eq!(report.value_of(ids::JS_EXECUTION), Some(&ObservationValue::No));
        assert_eq!(report.value_of(ids::FAILED_LOGIN_LOGGED), Some(&ObservationValue::No));
        for obs in &report.observations {
            if matches!(obs.value, ObservationValue::Yes | ObservationValue::No) {
                assert!(!obs.evidence.is_empty(), "{}", obs.parameter_id);
            }
        }
    }
}
