use std::str::FromStr;

use csv::{QuoteStyle, WriterBuilder};

use crate::checklist::Category;
use crate::risk_engine::{Comparison, CoverageSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(format!("unknown table format '{other}' (expected csv or markdown)")),
        }
    }
}

fn render(header: Vec<String>, rows: Vec<Vec<String>>, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => {
            let mut w = WriterBuilder::new().quote_style(QuoteStyle::Always).from_writer(Vec::new());
            w.write_record(&header).expect("in-memory csv write");
            for row in &rows {
                w.write_record(row).expect("in-memory csv write");
            }
            String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
        }
        TableFormat::Markdown => {
            let line = |cells: &[String]| {
                let escaped: Vec<String> = cells.iter().map(|c| c.replace('|', "\\|")).collect();
                format!("| {} |\n", escaped.join(" | "))
            };
            let mut out = line(&header);
            out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for row in &rows {
                out.push_str(&line(row));
            }
            out
        }
    }
}

/// Parameter × target matrix of observation values, verbatim.
pub fn emit_compliance_matrix(cmp: &Comparison, format: TableFormat) -> String {
    let mut header: Vec<String> = match format {
        TableFormat::Csv => vec!["id".into(), "category".into(), "parameter".into()],
        TableFormat::Markdown => vec!["Category".into(), "Parameter".into()],
    };
    header.extend(cmp.labels.iter().cloned());
    let rows = cmp
        .rows
        .iter()
        .map(|row| {
            let mut cells = match format {
                TableFormat::Csv => vec![row.parameter_id.clone(), row.category.label().to_string(), row.name.clone()],
                TableFormat::Markdown => vec![row.category.label().to_string(), row.name.clone()],
            };
            cells.extend(row.values.iter().map(|v| v.to_string()));
            cells
        })
        .collect();
    render(header, rows, format)
}

/// Category × target table with `fulfilled/total` cells. With no targets the
/// output is just the header.
pub fn emit_coverage_table(summaries: &[(String, CoverageSummary)], format: TableFormat) -> String {
    let mut header = vec!["Category".to_string()];
    header.extend(summaries.iter().map(|(label, _)| label.clone()));
    let rows = if summaries.is_empty() {
        Vec::new()
    } else {
        Category::ALL
            .iter()
            .map(|cat| {
                let mut cells = vec![cat.label().to_string()];
                cells.extend(summaries.iter().map(|(_, s)| s.get(*cat).to_string()));
                cells
            })
            .collect()
    };
    render(header, rows, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checklist::default_checklist;
    use crate::reference::{reference_observations, REFERENCE_LABELS};
    use crate::risk_engine::{build_profile, compare_profiles, coverage_summary};

    fn comparison() -> Comparison {
        let c = default_checklist();
        let profiles: Vec<_> = REFERENCE_LABELS
            .iter()
            .map(|l| build_profile(l, &reference_observations(l).unwrap(), &c).unwrap())
            .collect();
        compare_profiles(&profiles, &c).unwrap()
    }

    #[test]
    fn csv_matrix_shape() {
        let text = emit_compliance_matrix(&comparison(), TableFormat::Csv);
        assert_eq!(text.lines().count(), 49);
        assert!(text.starts_with("\"id\",\"category\",\"parameter\",\"ChatGPT\""));
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let rec = reader.records().nth(3).unwrap().unwrap();
        assert_eq!(&rec[3], "Only Length");
        assert_eq!(&rec[7], "Length+letters+numbers");
    }

    #[test]
    fn markdown_matrix_columns() {
        let text = emit_compliance_matrix(&comparison(), TableFormat::Markdown);
        let first = text.lines().next().unwrap();
        // leading and trailing pipes bound 2 + 5 columns
        assert_eq!(first.matches(" | ").count() + 1, 7);
        assert_eq!(text.lines().count(), 50);
    }

    #[test]
    fn empty_coverage_table_is_header_only() {
        assert_eq!(emit_coverage_table(&[], TableFormat::Csv), "\"Category\"\n");
        let md = emit_coverage_table(&[], TableFormat::Markdown);
        assert_eq!(md.lines().count(), 2);
    }

    #[test]
    fn coverage_table_cells() {
        let c = default_checklist();
        let p = build_profile("Grok", &reference_observations("Grok").unwrap(), &c).unwrap();
        let text = emit_coverage_table(&[("Grok".into(), coverage_summary(&p, &c))], TableFormat::Csv);
        assert!(text.contains("\"Session Security\",\"7/8\""));
    }
}
