//! Black-box HTTP scanner for authentication and session security.
//!
//! A scan fetches the target's base URL once, runs the read-only probe
//! groups concurrently, then runs the state-changing groups one at a time
//! when the target allows them. Every dynamic checklist parameter ends up
//! either with exactly one observation or in the skipped list.

mod error;
pub mod http;
pub mod probes;
pub mod signatures;
pub mod target;

use std::collections::BTreeSet;

use futures::stream::{self, StreamExt};
use reqwest::Method;
use secaudit_core::checklist::EvaluationMode;
use secaudit_core::{Checklist, Observation, ProbeReport, SkippedParameter};

pub use error::ScanError;
pub use http::{Exchange, ScanContext, REDACTED};
pub use probes::{run_group, ProbeGroup};
pub use signatures::{PatternList, Signatures};
pub use target::TargetConfig;

/// Number of read-only probe groups run at once by default.
pub const DEFAULT_PARALLELISM: usize = 4;

/// Scans `target` for every dynamic parameter of `checklist`.
pub async fn run_scan(target: TargetConfig, checklist: &Checklist, parallelism: usize) -> Result<ProbeReport, ScanError> {
    let ctx = ScanContext::new(target, Signatures::default())?;
    scan_with(&ctx, checklist, parallelism).await
}

/// Like [`run_scan`] with a prepared context, e.g. one using custom
/// signature lists.
pub async fn scan_with(ctx: &ScanContext, checklist: &Checklist, parallelism: usize) -> Result<ProbeReport, ScanError> {
    let base = ctx.target.base_url.clone();
    let baseline = ctx
        .browser()
        .send(Method::GET, base.clone(), &[], true)
        .await
        .map_err(|message| ScanError::Unreachable { url: base.to_string(), message })?;

    let wanted: Vec<&str> = checklist.by_mode(EvaluationMode::Dynamic).map(|p| p.id.as_str()).collect();
    let groups: BTreeSet<ProbeGroup> = wanted.iter().filter_map(|id| ProbeGroup::for_parameter(id)).collect();
    let (destructive, read_only): (Vec<ProbeGroup>, Vec<ProbeGroup>) =
        ProbeGroup::ALL.into_iter().filter(|g| groups.contains(g)).partition(|g| g.is_destructive());

    let mut observations: Vec<Observation> = Vec::new();
    let mut skipped: Vec<SkippedParameter> = Vec::new();
    let results: Vec<_> = stream::iter(read_only)
        .map(|g| run_group(g, ctx, &baseline))
        .buffer_unordered(parallelism.max(1))
        .collect()
        .await;
    for r in results {
        observations.extend(r?);
    }
    for g in destructive {
        match run_group(g, ctx, &baseline).await {
            Ok(obs) => observations.extend(obs),
            Err(ScanError::DestructiveNotAllowed(name)) => skipped.extend(g.parameters().iter().map(|id| SkippedParameter {
                parameter_id: id.to_string(),
                reason: format!("{name} probe changes server state and destructive probing is disabled"),
            })),
            Err(e) => return Err(e),
        }
    }
    for id in &wanted {
        if ProbeGroup::for_parameter(id).is_none() {
            skipped.push(SkippedParameter {
                parameter_id: id.to_string(),
                reason: "no probe implements this parameter".into(),
            });
        }
    }

    observations.retain(|o| wanted.contains(&o.parameter_id.as_str()));
    observations.sort_by_key(|o| checklist.position(&o.parameter_id));
    skipped.sort_by_key(|s| checklist.position(&s.parameter_id));
    Ok(ProbeReport {
        target: base.to_string(),
        observations,
        skipped,
    })
}
