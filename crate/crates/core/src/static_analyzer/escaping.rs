//! Reflected-output check: does request data reach an output sink without
//! passing through an HTML escaping function?
//!
//! Taint starts at superglobals and flows through plain assignments within a
//! function body (taint is reset at each `function` declaration). A sink whose
//! tainted operands all sit inside an escaping call is considered escaped.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use crate::checklist::ids;
use crate::observation::{Evidence, Observation, ObservationValue, Source};

use super::corpus::CodeCorpus;
use super::rules::{excerpt, MAX_EVIDENCE};

const ESCAPERS: &[&str] = &[
    "htmlspecialchars",
    "htmlentities",
    "strip_tags",
    "intval",
    "floatval",
    "filter_var",
    "json_encode",
    "urlencode",
    "rawurlencode",
    "esc_html",
    "esc_attr",
];

struct Patterns {
    source: Regex,
    variable: Regex,
    assignment: Regex,
    function: Regex,
    sink: Regex,
    escaper: Regex,
    cast: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        source: Regex::new(
            r#"\$_(GET|POST|REQUEST|COOKIE|FILES)\b|\$_SERVER\s*\[\s*['"](QUERY_STRING|REQUEST_URI|PHP_SELF|PATH_INFO|HTTP_[A-Z_]+)['"]\s*\]"#,
        )
        .unwrap(),
        variable: Regex::new(r"\$([A-Za-z_][A-Za-z0-9_]*)").unwrap(),
        assignment: Regex::new(r"^\s*\$([A-Za-z_][A-Za-z0-9_]*)(?:\s*\[[^\]]*\])*\s*(\.?=)([^=>].*|)$").unwrap(),
        function: Regex::new(r"^\s*(?:(?:public|private|protected|static|final|abstract)\s+)*function\s+\w+\s*\(").unwrap(),
        sink: Regex::new(r"<\?=|\becho\b|\bprint\b|\b(?:printf|vprintf|die|exit)\s*\(").unwrap(),
        escaper: Regex::new(&format!(r"\b(?:{})\s*\(", ESCAPERS.join("|"))).unwrap(),
        cast: Regex::new(r"\((?:int|integer|float|double|bool)\)\s*$").unwrap(),
    })
}

/// Byte spans inside the argument lists of escaping calls.
fn escaped_spans(expr: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    for m in patterns().escaper.find_iter(expr) {
        let open = m.end() - 1;
        let mut depth = 0usize;
        let mut quote: Option<char> = None;
        let mut close = expr.len();
        for (i, c) in expr[open..].char_indices() {
            match quote {
                Some(q) if c == q => quote = None,
                Some(_) => {}
                None => match c {
                    '\'' | '"' => quote = Some(c),
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            close = open + i;
                            break;
                        }
                    }
                    _ => {}
                },
            }
        }
        spans.push((open, close));
    }
    spans
}

/// Whether `expr` carries request data that is not escaped.
fn has_raw_taint(expr: &str, tainted: &BTreeSet<String>) -> bool {
    let p = patterns();
    let spans = escaped_spans(expr);
    let covered = |pos: usize| {
        spans.iter().any(|(a, b)| pos > *a && pos < *b) || p.cast.is_match(&expr[..pos])
    };
    let from_source = p.source.find_iter(expr).any(|m| !covered(m.start()));
    let from_var = p
        .variable
        .captures_iter(expr)
        .any(|c| tainted.contains(&c[1]) && !covered(c.get(0).unwrap().start()));
    from_source || from_var
}

fn mentions_input(expr: &str, tainted: &BTreeSet<String>) -> bool {
    let p = patterns();
    p.source.is_match(expr) || p.variable.captures_iter(expr).any(|c| tainted.contains(&c[1]))
}

#[derive(Debug, Default)]
struct Findings {
    raw: Vec<Evidence>,
    escaped: Vec<Evidence>,
    constant: Vec<Evidence>,
}

fn scan(corpus: &CodeCorpus) -> Findings {
    let p = patterns();
    let mut f = Findings::default();
    for file in corpus.files() {
        let mut tainted: BTreeSet<String> = BTreeSet::new();
        for (line_no, text) in file.code_lines() {
            if p.function.is_match(&text) {
                tainted.clear();
            }
            if let Some(c) = p.assignment.captures(&text) {
                let name = c[1].to_string();
                let append = &c[2] == ".=";
                let rhs = &c[3];
                if has_raw_taint(rhs, &tainted) {
                    tainted.insert(name);
                } else if !append {
                    tainted.remove(&name);
                }
            }
            if let Some(m) = p.sink.find(&text) {
                let expr = &text[m.start()..];
                let ev = Evidence::new(format!("{}:{}", file.path, line_no), excerpt(&text));
                if has_raw_taint(expr, &tainted) {
                    f.raw.push(ev);
                } else if mentions_input(expr, &tainted) {
                    f.escaped.push(ev);
                } else {
                    f.constant.push(ev);
                }
            }
        }
    }
    f
}

/// Observations for the script-execution and HTML-injection parameters. Both
/// share one verdict: Yes if any sink echoes unescaped request data, No if
/// sinks exist and none do, NA if the code has no output sinks.
pub fn analyze_output_escaping(corpus: &CodeCorpus) -> Vec<Observation> {
    let f = scan(corpus);
    let (value, evidence, note) = if !f.raw.is_empty() {
        (ObservationValue::Yes, f.raw, "request data echoed without escaping")
    } else if !f.escaped.is_empty() {
        (ObservationValue::No, f.escaped, "all reflected request data is escaped")
    } else if !f.constant.is_empty() {
        (ObservationValue::No, f.constant, "output sinks carry no request data")
    } else {
        (ObservationValue::NotApplicable, Vec::new(), "no output sinks found")
    };
    let shown: Vec<Evidence> = evidence.into_iter().take(MAX_EVIDENCE).collect();
    [ids::JS_EXECUTION, ids::HTML_INJECTION]
        .iter()
        .map(|id| {
            Observation::new(*id, value.clone(), Source::Static)
                .with_all_evidence(shown.clone())
                .with_note(note)
        })
        .collect()
}
