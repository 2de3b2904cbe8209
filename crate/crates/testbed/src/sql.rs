//! A toy interpreter for the two queries the fixture builds by string
//! concatenation. It is just faithful enough that quote breakage produces a
//! MySQL-style syntax error and that tautologies and comment truncation
//! change the result, which is all a black-box probe can observe.

use std::sync::LazyLock;

use regex::Regex;

pub const SYNTAX_ERROR: &str = "You have an error in your SQL syntax; check the manual that corresponds to your MySQL server version for the right syntax to use near";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlError(pub String);

static TAUTOLOGY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)\bor\s+(?:'([^']*)'\s*=\s*'([^']*)'|(\d+)\s*=\s*(\d+)|true\b)"#).unwrap());

/// Removes trailing comments outside string literals and reports an
/// unterminated literal as a syntax error.
fn strip_comments(query: &str) -> Result<String, SqlError> {
    let chars: Vec<char> = query.chars().collect();
    let mut out = String::new();
    let mut in_str = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_str {
            if c == '\'' && chars.get(i + 1) == Some(&'\'') {
                out.push_str("''");
                i += 2;
                continue;
            }
            if c == '\'' {
                in_str = false;
            }
            out.push(c);
        } else if c == '#' || (c == '-' && chars.get(i + 1) == Some(&'-')) {
            break;
        } else {
            if c == '\'' {
                in_str = true;
            }
            out.push(c);
        }
        i += 1;
    }
    if in_str {
        let near: String = query.chars().skip_while(|c| *c != '\'').take(40).collect();
        return Err(SqlError(format!("{SYNTAX_ERROR} '{near}' at line 1")));
    }
    Ok(out)
}

fn is_tautology(clause: &str) -> bool {
    TAUTOLOGY.captures_iter(clause).any(|c| match (c.get(1), c.get(2), c.get(3), c.get(4)) {
        (Some(a), Some(b), _, _) => a.as_str() == b.as_str(),
        (_, _, Some(a), Some(b)) => a.as_str() == b.as_str(),
        _ => true,
    })
}

fn literal_after(clause: &str, column: &str) -> Option<String> {
    let re = Regex::new(&format!(r"(?i)\b{column}\s*=\s*'((?:[^']|'')*)'")).unwrap();
    re.captures(clause).map(|c| c[1].replace("''", "'"))
}

/// Outcome of `SELECT * FROM users WHERE username = '<u>' AND password = '<p>'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoginQuery {
    /// The WHERE clause is always true: the first row is returned.
    AnyRow,
    /// Ordinary lookup; `password` is None when it was commented out.
    Lookup { username: String, password: Option<String> },
}

pub fn login_query(username: &str, password: &str) -> Result<LoginQuery, SqlError> {
    let query = format!("SELECT * FROM users WHERE username = '{username}' AND password = '{password}'");
    let clause = strip_comments(&query)?;
    if is_tautology(&clause) {
        return Ok(LoginQuery::AnyRow);
    }
    let username = literal_after(&clause, "username").unwrap_or_default();
    Ok(LoginQuery::Lookup {
        username,
        password: literal_after(&clause, "password"),
    })
}

/// Rows of `SELECT name FROM products WHERE name LIKE '%<q>%'`.
pub fn search_query(q: &str, products: &[&str]) -> Result<Vec<String>, SqlError> {
    let query = format!("SELECT name FROM products WHERE name LIKE '%{q}%'");
    let clause = strip_comments(&query)?;
    if is_tautology(&clause) {
        return Ok(products.iter().map(|p| p.to_string()).collect());
    }
    let needle = Regex::new(r"(?i)LIKE\s*'%((?:[^']|'')*)%'")
        .unwrap()
        .captures(&clause)
        .map(|c| c[1].replace("''", "'"))
        .unwrap_or_default()
        .to_lowercase();
    Ok(products
        .iter()
        .filter(|p| p.to_lowercase().contains(&needle))
        .map(|p| p.to_string())
        .collect())
}
