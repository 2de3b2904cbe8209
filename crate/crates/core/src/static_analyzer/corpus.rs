use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::AnalysisError;

/// Extensions read by [`CodeCorpus::from_dir`].
pub const SOURCE_EXTENSIONS: &[&str] = &["php", "phtml", "inc", "html", "htm", "js", "sql"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
}

impl SourceFile {
    /// Lines with comments blanked out, numbered from 1. Block comments are
    /// tracked across lines; line comments only when they start the line.
    pub fn code_lines(&self) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        let mut in_block = false;
        for (i, raw) in self.text.lines().enumerate() {
            let mut line = String::new();
            let mut rest = raw;
            loop {
                if in_block {
                    match rest.find("*/") {
                        Some(end) => {
                            in_block = false;
                            rest = &rest[end + 2..];
                        }
                        None => break,
                    }
                } else {
                    let trimmed = rest.trim_start();
                    if line.trim().is_empty()
                        && (trimmed.starts_with("//") || trimmed.starts_with('#') && !trimmed.starts_with("#["))
                    {
                        break;
                    }
                    match rest.find("/*") {
                        Some(start) if !in_string_at(rest, start) => {
                            line.push_str(&rest[..start]);
                            in_block = true;
                            rest = &rest[start + 2..];
                        }
                        _ => {
                            line.push_str(rest);
                            break;
                        }
                    }
                }
            }
            let keep = !line.trim().is_empty() && !line.trim_start().starts_with('*');
            out.push((i + 1, if keep { line } else { String::new() }));
        }
        out
    }
}

/// Whether byte offset `pos` of `s` falls inside a quoted string literal.
fn in_string_at(s: &str, pos: usize) -> bool {
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if i >= pos {
            break;
        }
        match quote {
            Some(q) => {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None if c == '"' || c == '\'' => quote = Some(c),
            None => {}
        }
    }
    quote.is_some()
}

/// Source files under analysis, kept sorted by path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeCorpus {
    pub origin: String,
    pub declared_stack: String,
    files: Vec<SourceFile>,
}

impl CodeCorpus {
    pub fn new(
        origin: impl Into<String>,
        declared_stack: impl Into<String>,
        files: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, AnalysisError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (path, text) in files {
            if !seen.insert(path.clone()) {
                return Err(AnalysisError::DuplicatePath(path));
            }
            out.push(SourceFile { path, text });
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(CodeCorpus {
            origin: origin.into(),
            declared_stack: declared_stack.into(),
            files: out,
        })
    }

    /// Like [`CodeCorpus::new`] but from raw bytes; invalid UTF-8 is replaced.
    pub fn from_bytes(
        origin: impl Into<String>,
        declared_stack: impl Into<String>,
        files: impl IntoIterator<Item = (String, Vec<u8>)>,
    ) -> Result<Self, AnalysisError> {
        Self::new(
            origin,
            declared_stack,
            files
                .into_iter()
                .map(|(p, bytes)| (p, String::from_utf8_lossy(&bytes).into_owned())),
        )
    }

    /// Reads every source file under `root`. Paths are stored relative to it.
    pub fn from_dir(root: &Path, declared_stack: impl Into<String>) -> Result<Self, AnalysisError> {
        let mut files = Vec::new();
        collect(root, root, &mut files)?;
        Self::from_bytes(root.display().to_string(), declared_stack, files)
    }

    pub fn files(&self) -> &[SourceFile] {
        &self.files
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }
}

fn io_err(path: &Path, source: std::io::Error) -> AnalysisError {
    AnalysisError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) -> Result<(), AnalysisError> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .collect::<Result<_, _>>()
        .map_err(|e| io_err(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        let name = entry.file_name();
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        let kind = entry.file_type().map_err(|e| io_err(&path, e))?;
        if kind.is_dir() {
            if name == "vendor" || name == "node_modules" {
                continue;
            }
            collect(root, &path, out)?;
        } else if kind.is_file() {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
            if !SOURCE_EXTENSIONS.contains(&ext.as_str()) {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
            let rel = path.strip_prefix(root).unwrap_or(&path).to_string_lossy().replace('\\', "/");
            out.push((rel, bytes));
        }
    }
    Ok(())
}
