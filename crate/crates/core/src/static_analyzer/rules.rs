use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use regex::Regex;

use crate::checklist::{Checklist, EvaluationMode};
use crate::error::AnalysisError;
use crate::observation::{Evidence, Observation, ObservationValue, Source};

use super::corpus::CodeCorpus;

const DEFAULT_RULES: &str = include_str!("../../data/default_rules.txt");

/// Hits beyond this many are summarised in the observation note.
pub const MAX_EVIDENCE: usize = 25;
const MAX_EXCERPT: usize = 200;

#[derive(Debug, Clone)]
pub enum RuleContext {
    Line,
    Near { lines: usize, pattern: Regex, negate: bool },
    File { pattern: Regex, negate: bool },
}

impl fmt::Display for RuleContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleContext::Line => write!(f, "line"),
            RuleContext::Near { lines, pattern, negate } => {
                write!(f, "{}near:{lines}:{}", if *negate { "!" } else { "" }, escape(pattern.as_str()))
            }
            RuleContext::File { pattern, negate } => {
                write!(f, "{}file:{}", if *negate { "!" } else { "" }, escape(pattern.as_str()))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PatternRule {
    pub id: String,
    pub parameter_id: String,
    pub pattern: Regex,
    pub context: RuleContext,
    pub on_match: ObservationValue,
    pub on_absence: ObservationValue,
}

impl fmt::Display for PatternRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}|{}|{},{}",
            self.id,
            self.parameter_id,
            escape(self.pattern.as_str()),
            self.context,
            self.on_match,
            self.on_absence
        )
    }
}

/// A location where a rule fired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleHit {
    pub rule_id: String,
    pub path: String,
    pub line: usize,
    pub excerpt: String,
}

impl RuleHit {
    pub fn evidence(&self) -> Evidence {
        Evidence::new(format!("{}:{}", self.path, self.line), self.excerpt.clone())
    }
}

fn escape(pattern: &str) -> String {
    pattern.replace('|', "\\|")
}

/// Splits on bars not preceded by a backslash and turns `\|` back into `|`.
fn split_fields(line: &str) -> Vec<String> {
    let mut fields = vec![String::new()];
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' if chars.peek() == Some(&'|') => {
                chars.next();
                fields.last_mut().unwrap().push('|');
            }
            '|' => fields.push(String::new()),
            _ => fields.last_mut().unwrap().push(c),
        }
    }
    fields
}

pub(crate) fn excerpt(line: &str) -> String {
    let t = line.trim();
    if t.chars().count() <= MAX_EXCERPT {
        t.to_string()
    } else {
        let cut: String = t.chars().take(MAX_EXCERPT).collect();
        format!("{cut}…")
    }
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<PatternRule>,
}

impl RuleSet {
    pub fn parse(text: &str) -> Result<Self, AnalysisError> {
        let mut rules: Vec<PatternRule> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |message: String| AnalysisError::RuleParse { line: line_no, message };
            let fields = split_fields(line);
            if fields.len() != 5 {
                return Err(perr(format!("expected 5 fields, found {}", fields.len())));
            }
            let id = fields[0].trim().to_string();
            let parameter_id = fields[1].trim().to_string();
            if id.is_empty() || parameter_id.is_empty() {
                return Err(perr("rule id and parameter id must not be empty".into()));
            }
            if rules.iter().any(|r| r.id == id) {
                return Err(perr(format!("duplicate rule id '{id}'")));
            }
            let compile = |p: &str| {
                Regex::new(p).map_err(|source| AnalysisError::Pattern {
                    rule: id.clone(),
                    source,
                })
            };
            let pattern = compile(&fields[2])?;
            let context = parse_context(fields[3].trim(), &compile).map_err(|e| match e {
                ContextError::Syntax(m) => perr(m),
                ContextError::Pattern(e) => e,
            })?;
            let (on_match, on_absence) = fields[4]
                .split_once(',')
                .map(|(a, b)| (ObservationValue::from_text(a), ObservationValue::from_text(b)))
                .ok_or_else(|| perr("verdicts must be 'on_match,on_absence'".into()))?;
            if !on_match.is_decided() {
                return Err(perr(format!("match verdict must be a decided value, got '{on_match}'")));
            }
            if !matches!(on_absence, ObservationValue::NotApplicable | ObservationValue::Unknown) {
                // A decided value with no matching site would carry no evidence.
                return Err(perr(format!("absence verdict must be NA or Unknown, got '{on_absence}'")));
            }
            rules.push(PatternRule {
                id,
                parameter_id,
                pattern,
                context,
                on_match,
                on_absence,
            });
        }
        let set = RuleSet { rules };
        set.check_absence()?;
        Ok(set)
    }

    pub fn default_rules() -> Self {
        Self::parse(DEFAULT_RULES).expect("bundled rules parse")
    }

    pub fn default_text() -> &'static str {
        DEFAULT_RULES
    }

    pub fn rules(&self) -> &[PatternRule] {
        &self.rules
    }

    pub fn parameters(&self) -> BTreeSet<&str> {
        self.rules.iter().map(|r| r.parameter_id.as_str()).collect()
    }

    pub fn rules_for<'a>(&'a self, parameter_id: &'a str) -> impl Iterator<Item = &'a PatternRule> + 'a {
        self.rules.iter().filter(move |r| r.parameter_id == parameter_id)
    }

    pub fn to_text(&self) -> String {
        self.rules.iter().map(|r| format!("{r}\n")).collect()
    }

    fn check_absence(&self) -> Result<(), AnalysisError> {
        let mut absence: BTreeMap<&str, &ObservationValue> = BTreeMap::new();
        for r in &self.rules {
            if let Some(prev) = absence.insert(&r.parameter_id, &r.on_absence) {
                if prev != &r.on_absence {
                    return Err(AnalysisError::InconsistentAbsence(r.parameter_id.clone()));
                }
            }
        }
        Ok(())
    }

    /// Rules must target exactly the static parameters of `checklist`.
    pub fn validate_against(&self, checklist: &Checklist) -> Result<(), AnalysisError> {
        for r in &self.rules {
            match checklist.get(&r.parameter_id) {
                Some(spec) if spec.mode == EvaluationMode::Static => {
                    let spec_ok = !r.on_match.is_categorical() || spec.kind == crate::checklist::ParameterKind::Categorical;
                    if !spec_ok {
                        return Err(AnalysisError::NotStatic {
                            rule: r.id.clone(),
                            parameter: r.parameter_id.clone(),
                        });
                    }
                }
                _ => {
                    return Err(AnalysisError::NotStatic {
                        rule: r.id.clone(),
                        parameter: r.parameter_id.clone(),
                    })
                }
            }
        }
        let covered = self.parameters();
        for spec in checklist.by_mode(EvaluationMode::Static) {
            if !covered.contains(spec.id.as_str()) {
                return Err(AnalysisError::UncoveredParameter(spec.id.clone()));
            }
        }
        Ok(())
    }

    /// All sites where `rule` fires, in corpus order.
    pub fn hits(&self, rule: &PatternRule, corpus: &CodeCorpus) -> Vec<RuleHit> {
        let mut hits = Vec::new();
        for file in corpus.files() {
            let lines = file.code_lines();
            if let RuleContext::File { pattern, negate } = &rule.context {
                let found = lines.iter().any(|(_, l)| pattern.is_match(l));
                if found == *negate {
                    continue;
                }
            }
            for (i, (line_no, text)) in lines.iter().enumerate() {
                if !rule.pattern.is_match(text) {
                    continue;
                }
                if let RuleContext::Near { lines: n, pattern, negate } = &rule.context {
                    let lo = i.saturating_sub(*n);
                    let hi = (i + n + 1).min(lines.len());
                    let found = lines[lo..hi].iter().any(|(_, l)| pattern.is_match(l));
                    if found == *negate {
                        continue;
                    }
                }
                hits.push(RuleHit {
                    rule_id: rule.id.clone(),
                    path: file.path.clone(),
                    line: *line_no,
                    excerpt: excerpt(text),
                });
            }
        }
        hits
    }

    /// First rule with any hit decides; otherwise the absence verdict applies.
    /// Returns `None` if no rule targets the parameter.
    pub fn evaluate_parameter(&self, corpus: &CodeCorpus, parameter_id: &str) -> Option<Observation> {
        let mut absence = None;
        for rule in self.rules_for(parameter_id) {
            absence.get_or_insert_with(|| rule.on_absence.clone());
            let hits = self.hits(rule, corpus);
            if hits.is_empty() {
                continue;
            }
            let mut note = format!("rule {}", rule.id);
            if hits.len() > MAX_EVIDENCE {
                note.push_str(&format!(" ({} sites, first {} shown)", hits.len(), MAX_EVIDENCE));
            }
            return Some(
                Observation::new(parameter_id, rule.on_match.clone(), Source::Static)
                    .with_all_evidence(hits.iter().take(MAX_EVIDENCE).map(RuleHit::evidence))
                    .with_note(note),
            );
        }
        absence.map(|v| Observation::new(parameter_id, v, Source::Static).with_note("no rule matched"))
    }

    /// One observation per parameter covered by the rules, ordered by id.
    pub fn evaluate(&self, corpus: &CodeCorpus) -> Vec<Observation> {
        self.parameters()
            .into_iter()
            .filter_map(|p| self.evaluate_parameter(corpus, p))
            .collect()
    }
}

enum ContextError {
    Syntax(String),
    Pattern(AnalysisError),
}

fn parse_context(
    text: &str,
    compile: &dyn Fn(&str) -> Result<Regex, AnalysisError>,
) -> Result<RuleContext, ContextError> {
    if text == "line" {
        return Ok(RuleContext::Line);
    }
    let (negate, body) = match text.strip_prefix('!') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    if let Some(rest) = body.strip_prefix("near:") {
        let (n, pat) = rest
            .split_once(':')
            .ok_or_else(|| ContextError::Syntax("near context must be near:N:REGEX".into()))?;
        let lines = n
            .parse()
            .map_err(|_| ContextError::Syntax(format!("bad line window '{n}'")))?;
        let pattern = compile(pat).map_err(ContextError::Pattern)?;
        return Ok(RuleContext::Near { lines, pattern, negate });
    }
    if let Some(pat) = body.strip_prefix("file:") {
        let pattern = compile(pat).map_err(ContextError::Pattern)?;
        return Ok(RuleContext::File { pattern, negate });
    }
    Err(ContextError::Syntax(format!("unknown context '{text}'")))
}
