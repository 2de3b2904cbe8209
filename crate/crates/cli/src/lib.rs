//! The `secaudit` command line: scan, analyze, score, report, testbed and
//! checklist subcommands over the core library.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use secaudit_core::checklist::Category;
use secaudit_core::report::{
    emit_all_radars, emit_compliance_matrix, emit_coverage_table, emit_json, load_document, AuditDocument,
    TableFormat, TargetMetadata,
};
use secaudit_core::risk_engine::compare_profiles;
use secaudit_core::static_analyzer::{run_static, CodeCorpus, RuleSet};
use secaudit_core::{
    default_checklist, load_checklist, Checklist, Observation, ObservationValue, RiskLevel, SkippedParameter, Source,
};
use secaudit_scanner::{scan_with, PatternList, ScanContext, Signatures, TargetConfig};
use secaudit_testbed::{start_testbed, TestbedConfig, TOTP_SECRET};
use serde::Deserialize;

/// Environment variable naming the default checklist file.
pub const CHECKLIST_ENV: &str = "SECAUDIT_CHECKLIST";

/// Exit status when the audit itself failed or a `--fail-on` gate tripped.
pub const EXIT_AUDIT: i32 = 1;
/// Exit status for malformed command lines.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "secaudit", version, about = "Security compliance auditor for web application authentication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ChecklistArg {
    /// Checklist file; defaults to the built-in 48-parameter checklist.
    #[arg(long, env = CHECKLIST_ENV)]
    checklist: Option<PathBuf>,
}

impl ChecklistArg {
    fn load(&self) -> Result<Checklist> {
        match &self.checklist {
            None => Ok(default_checklist()),
            Some(path) => {
                let text = read(path)?;
                load_checklist(&text).with_context(|| format!("checklist {}", path.display()))
            }
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Probe a running web application over HTTP.
    Scan {
        /// Target description (TOML).
        #[arg(long)]
        target: PathBuf,
        #[command(flatten)]
        checklist: ChecklistArg,
        /// Where to write the audit document; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Allow probes that register accounts, trip rate limits and lock the test account.
        #[arg(long)]
        destructive: bool,
        /// Read-only probe groups to run at once.
        #[arg(long, default_value_t = secaudit_scanner::DEFAULT_PARALLELISM)]
        parallel: usize,
        /// Label recorded in the report; defaults to the base URL.
        #[arg(long)]
        label: Option<String>,
        /// Replacement list of database error signatures.
        #[arg(long)]
        sql_errors: Option<PathBuf>,
        /// Replacement list of CAPTCHA markers.
        #[arg(long)]
        captcha_markers: Option<PathBuf>,
        /// Replacement list of CSRF nonce patterns.
        #[arg(long)]
        nonce_patterns: Option<PathBuf>,
    },
    /// Analyze application source code.
    Analyze {
        #[arg(long)]
        code_dir: PathBuf,
        #[command(flatten)]
        checklist: ChecklistArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replacement rule file (id|parameter_id|pattern|context|verdicts).
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Declared stack of the code base.
        #[arg(long, default_value = "php-mysql")]
        stack: String,
        #[arg(long)]
        label: Option<String>,
    },
    /// Merge audit documents and attestations, judge every parameter and summarize.
    Score {
        /// Audit documents to merge.
        #[arg(long = "input", value_name = "FILE")]
        inputs: Vec<PathBuf>,
        /// Attestation files with manual observations (TOML).
        #[arg(long = "attest", value_name = "FILE")]
        attestations: Vec<PathBuf>,
        #[command(flatten)]
        checklist: ChecklistArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
        /// Exit with status 1 if any non-compliant parameter is at this risk level or above.
        #[arg(long, value_parser = parse_level)]
        fail_on: Option<RiskLevel>,
    },
    /// Render comparison tables and risk charts from audit documents.
    Report {
        #[arg(long = "input", value_name = "FILE", required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        checklist: ChecklistArg,
        /// csv or markdown.
        #[arg(long, default_value = "markdown", value_parser = parse_format)]
        format: TableFormat,
        /// Directory for the tables, SVG charts and chart data; tables go to stdout when omitted.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the configurable fixture application.
    Testbed {
        /// One of hardened, vulnerable, chatgpt, deepseek, claude, gemini, grok.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Testbed configuration file (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        /// Also write the matching scan target description here.
        #[arg(long)]
        target_out: Option<PathBuf>,
    },
    /// Print or validate the checklist.
    Checklist {
        #[command(flatten)]
        checklist: ChecklistArg,
        /// Only validate; print a one-line summary.
        #[arg(long)]
        validate: bool,
    },
}

fn parse_level(s: &str) -> Result<RiskLevel, String> {
    s.parse::<RiskLevel>().map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<TableFormat, String> {
    s.parse()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand, returning
/// the process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_AUDIT
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Scan {
            target,
            checklist,
            out,
            destructive,
            parallel,
            label,
            sql_errors,
            captcha_markers,
            nonce_patterns,
        } => {
            let checklist = checklist.load()?;
            let mut target = TargetConfig::from_file(&target)?;
            target.destructive_allowed = destructive;
            let mut signatures = Signatures::default();
            if let Some(p) = sql_errors {
                signatures.sql_errors = PatternList::load("sql_errors", &p)?;
            }
            if let Some(p) = captcha_markers {
                signatures.captcha_markers = PatternList::load("captcha_markers", &p)?;
            }
            if let Some(p) = nonce_patterns {
                signatures.nonce_patterns = PatternList::load("nonce_patterns", &p)?;
            }
            let started = Utc::now();
            let location = target.base_url.to_string();
            let ctx = ScanContext::new(target, signatures)?;
            let report = runtime()?.block_on(scan_with(&ctx, &checklist, parallel))?;
            let meta = TargetMetadata {
                label: label.unwrap_or_else(|| location.clone()),
                location: Some(location),
            };
            let doc = AuditDocument::assemble(meta, report.observations, report.skipped, &checklist, started)?;
            write_or_print(out.as_deref(), &emit_json(&doc))?;
            eprint!("{}", summary(&doc, &checklist));
            Ok(0)
        }
        Command::Analyze {
            code_dir,
            checklist,
            out,
            rules,
            stack,
            label,
        } => {
            let checklist = checklist.load()?;
            let rules = match rules {
                Some(p) => RuleSet::parse(&read(&p)?).with_context(|| format!("rules {}", p.display()))?,
                None => RuleSet::default_rules(),
            };
            let started = Utc::now();
            let corpus = CodeCorpus::from_dir(&code_dir, stack)?;
            let report = run_static(&corpus, &checklist, &rules)?;
            let meta = TargetMetadata {
                label: label.unwrap_or_else(|| report.target.clone()),
                location: Some(report.target.clone()),
            };
            let doc = AuditDocument::assemble(meta, report.observations, report.skipped, &checklist, started)?;
            write_or_print(out.as_deref(), &emit_json(&doc))?;
            eprint!("{}", summary(&doc, &checklist));
            Ok(0)
        }
        Command::Score {
            inputs,
            attestations,
            checklist,
            out,
            label,
            fail_on,
        } => {
            if inputs.is_empty() && attestations.is_empty() {
                bail!("nothing to score: pass --input and/or --attest");
            }
            let checklist = checklist.load()?;
            let started = Utc::now();
            let mut observations = Vec::new();
            let mut skipped: Vec<SkippedParameter> = Vec::new();
            let mut labels = Vec::new();
            for path in &inputs {
                let doc = load_document(&read(path)?, &checklist).with_context(|| format!("{}", path.display()))?;
                labels.push(doc.target.label.clone());
                observations.extend(doc.observations);
                skipped.extend(doc.skipped);
            }
            for path in &attestations {
                observations.extend(load_attestations(&read(path)?).with_context(|| format!("{}", path.display()))?);
            }
            skipped.retain(|s| !observations.iter().any(|o| o.parameter_id == s.parameter_id));
            skipped.sort_by_key(|s| checklist.position(&s.parameter_id));
            skipped.dedup_by(|a, b| a.parameter_id == b.parameter_id);
            labels.dedup();
            let meta = TargetMetadata {
                label: label.unwrap_or_else(|| if labels.is_empty() { "attested".into() } else { labels.join(" + ") }),
                location: None,
            };
            let doc = AuditDocument::assemble(meta, observations, skipped, &checklist, started)?;
            if let Some(path) = &out {
                write_or_print(Some(path), &emit_json(&doc))?;
            }
            print!("{}", summary(&doc, &checklist));
            if let Some(level) = fail_on {
                let n = doc.risk.at_or_above(level);
                if n > 0 {
                    eprintln!("gate: {n} non-compliant parameter(s) at {} or above", level.label());
                    return Ok(EXIT_AUDIT);
                }
            }
            Ok(0)
        }
        Command::Report {
            inputs,
            checklist,
            format,
            out_dir,
        } => {
            let checklist = checklist.load()?;
            let mut docs = Vec::new();
            for path in &inputs {
                docs.push(load_document(&read(path)?, &checklist).with_context(|| format!("{}", path.display()))?);
            }
            let profiles: Vec<_> = docs.iter().map(|d| d.profile()).collect();
            let cmp = compare_profiles(&profiles, &checklist)?;
            let matrix = emit_compliance_matrix(&cmp, format);
            let coverage: Vec<_> = docs.iter().map(|d| (d.target.label.clone(), d.coverage.clone())).collect();
            let coverage = emit_coverage_table(&coverage, format);
            let risks: Vec<_> = docs.iter().map(|d| (d.target.label.clone(), d.risk.clone())).collect();
            let Some(dir) = out_dir else {
                println!("{matrix}");
                println!("{coverage}");
                return Ok(0);
            };
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let ext = match format {
                TableFormat::Csv => "csv",
                TableFormat::Markdown => "md",
            };
            fs::write(dir.join(format!("compliance_matrix.{ext}")), matrix)?;
            fs::write(dir.join(format!("coverage.{ext}")), coverage)?;
            for chart in emit_all_radars(&risks) {
                let stem = format!("risk_{}", chart.level.ident());
                fs::write(dir.join(format!("{stem}.svg")), &chart.svg)?;
                fs::write(dir.join(format!("{stem}.json")), chart.sidecar_json())?;
            }
            eprintln!("wrote report files to {}", dir.display());
            Ok(0)
        }
        Command::Testbed {
            preset,
            config,
            port,
            target_out,
        } => {
            let mut cfg = match config {
                Some(p) => TestbedConfig::from_file(&p)?,
                None => TestbedConfig::preset(preset.as_deref().unwrap_or("hardened"))?,
            };
            if let Some(port) = port {
                cfg.listen_port = port;
            }
            runtime()?.block_on(async move {
                let handle = start_testbed(cfg).await?;
                let target = handle.target_toml();
                if let Some(p) = &target_out {
                    fs::write(p, &target).with_context(|| format!("writing {}", p.display()))?;
                }
                println!("testbed listening on {}", handle.base_url());
                println!("TOTP secret: {TOTP_SECRET}");
                println!("scan target:\n{target}");
                tokio::signal::ctrl_c().await.context("waiting for ctrl-c")?;
                handle.shutdown().await;
                Ok(0)
            })
        }
        Command::Checklist { checklist, validate } => {
            let checklist = checklist.load()?;
            checklist.validate()?;
            if validate {
                println!("checklist {} is valid: {} parameters", checklist.version, checklist.len());
            } else {
                print!("{}", checklist.to_text());
            }
            Ok(0)
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttestationFile {
    #[serde(default)]
    attestation: Vec<Attestation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Attestation {
    parameter: String,
    value: String,
    #[serde(default)]
    note: Option<String>,
}

/// Manual observations from an attestation file:
///
/// ```toml
/// [[attestation]]
/// parameter = "auth.backup_codes"
/// value = "No"
/// note = "reviewed the account settings page"
/// ```
pub fn load_attestations(text: &str) -> Result<Vec<Observation>> {
    let file: AttestationFile = toml::from_str(text)?;
    Ok(file
        .attestation
        .into_iter()
        .map(|a| {
            let obs = Observation::new(a.parameter, ObservationValue::from_text(&a.value), Source::Manual);
            match a.note {
                Some(n) => obs.with_note(n),
                None => obs,
            }
        })
        .collect())
}

/// Plain-text summary of one audit document.
pub fn summary(doc: &AuditDocument, checklist: &Checklist) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "target: {}", doc.target.label);
    let _ = writeln!(s, "coverage:");
    for c in Category::ALL {
        let _ = writeln!(s, "  {:<28} {}", c.label(), doc.coverage.get(c));
    }
    let _ = writeln!(s, "  {:<28} {}/{}", "Total", doc.coverage.total_fulfilled(), checklist.len());
    let _ = writeln!(s, "non-compliant by risk level:");
    for level in RiskLevel::ALL.iter().rev() {
        let _ = writeln!(s, "  {:<28} {}", level.label(), doc.risk.count(*level));
    }
    let unknown = doc
        .records
        .iter()
        .filter(|r| r.observation.as_ref().is_none_or(|o| o.value == ObservationValue::Unknown))
        .count();
    if unknown > 0 {
        let _ = writeln!(s, "undetermined (attest manually): {unknown}");
    }
    if !doc.skipped.is_empty() {
        let _ = writeln!(s, "skipped: {}", doc.skipped.len());
    }
    s
}
