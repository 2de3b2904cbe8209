use std::path::Path;

use regex::{Regex, RegexBuilder};

use crate::error::ScanError;

const SQL_ERRORS: &str = include_str!("../data/sql_errors.txt");
const CAPTCHA_MARKERS: &str = include_str!("../data/captcha_markers.txt");
const NONCE_PATTERNS: &str = include_str!("../data/nonce_patterns.txt");

/// A named list of case-insensitive patterns, one per line; blank lines and
/// lines starting with `#` are ignored.
#[derive(Debug, Clone)]
pub struct PatternList {
    pub name: &'static str,
    patterns: Vec<Regex>,
}

impl PatternList {
    pub fn parse(name: &'static str, text: &str) -> Result<Self, ScanError> {
        let mut patterns = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let re = RegexBuilder::new(line)
                .case_insensitive(true)
                .build()
                .map_err(|e| ScanError::Signature {
                    list: name,
                    line: i + 1,
                    message: e.to_string(),
                })?;
            patterns.push(re);
        }
        if patterns.is_empty() {
            return Err(ScanError::Signature {
                list: name,
                line: 0,
                message: "list is empty".into(),
            });
        }
        Ok(PatternList { name, patterns })
    }

    pub fn load(name: &'static str, path: &Path) -> Result<Self, ScanError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScanError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(name, &text)
    }

    /// The first matching text, if any.
    pub fn find<'t>(&self, text: &'t str) -> Option<&'t str> {
        self.patterns.iter().find_map(|re| re.find(text)).map(|m| m.as_str())
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.find(text).is_some()
    }

    pub fn replace_all(&self, text: &str, with: &str) -> String {
        self.patterns
            .iter()
            .fold(text.to_string(), |acc, re| re.replace_all(&acc, with).into_owned())
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// The three configurable detection lists.
#[derive(Debug, Clone)]
pub struct Signatures {
    pub sql_errors: PatternList,
    pub captcha_markers: PatternList,
    pub nonce_patterns: PatternList,
}

impl Default for Signatures {
    fn default() -> Self {
        Signatures {
            sql_errors: PatternList::parse("sql_errors", SQL_ERRORS).expect("bundled list"),
            captcha_markers: PatternList::parse("captcha_markers", CAPTCHA_MARKERS).expect("bundled list"),
            nonce_patterns: PatternList::parse("nonce_patterns", NONCE_PATTERNS).expect("bundled list"),
        }
    }
}
