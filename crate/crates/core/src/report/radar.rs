//! Standalone SVG charts of non-compliance counts, one chart per risk level.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::checklist::RiskLevel;
use crate::risk_engine::RiskProfile;

const SIZE: f64 = 420.0;
const CENTER: f64 = SIZE / 2.0;
const RADIUS: f64 = 150.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartKind {
    /// Radar polygon, used with three or more targets.
    Polygon,
    /// Bar chart fallback for one or two targets.
    Bar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadarSidecar {
    pub level: RiskLevel,
    pub values: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarChart {
    pub level: RiskLevel,
    pub kind: ChartKind,
    pub svg: String,
    pub sidecar: RadarSidecar,
}

impl RadarChart {
    pub fn sidecar_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.sidecar).expect("sidecar serializes");
        text.push('\n');
        text
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn emit_radar(profiles: &[(String, RiskProfile)], level: RiskLevel) -> RadarChart {
    let values: Vec<(&str, usize)> = profiles.iter().map(|(l, p)| (l.as_str(), p.count(level))).collect();
    let kind = if values.len() >= 3 { ChartKind::Polygon } else { ChartKind::Bar };
    let scale = values.iter().map(|(_, v)| *v).max().unwrap_or(0).max(1) as f64;
    let title = format!("{} Risks", level.label());

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{CENTER}" y="24" text-anchor="middle" font-size="16">{}</text>"#, xml_escape(&title));

    match kind {
        ChartKind::Polygon => {
            let n = values.len();
            let point = |i: usize, r: f64| {
                let angle = -PI / 2.0 + 2.0 * PI * i as f64 / n as f64;
                (CENTER + r * angle.cos(), CENTER + r * angle.sin())
            };
            for ring in 1..=4 {
                let r = RADIUS * ring as f64 / 4.0;
                let pts: Vec<String> = (0..n).map(|i| point(i, r)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(svg, r##"<polygon points="{}" fill="none" stroke="#cccccc"/>"##, pts.join(" "));
            }
            for (i, (label, value)) in values.iter().enumerate() {
                let (x, y) = point(i, RADIUS);
                let _ = writeln!(svg, r##"<line x1="{CENTER}" y1="{CENTER}" x2="{x:.2}" y2="{y:.2}" stroke="#999999"/>"##);
                let (lx, ly) = point(i, RADIUS + 22.0);
                let _ = writeln!(
                    svg,
                    r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle">{} ({value})</text>"#,
                    xml_escape(label)
                );
            }
            let pts: Vec<String> = values
                .iter()
                .enumerate()
                .map(|(i, (_, v))| point(i, RADIUS * *v as f64 / scale))
                .map(|(x, y)| format!("{x:.2},{y:.2}"))
                .collect();
            let _ = writeln!(
                svg,
                r##"<polygon class="risk" points="{}" fill="#d62728" fill-opacity="0.35" stroke="#d62728"/>"##,
                pts.join(" ")
            );
        }
        ChartKind::Bar => {
            let baseline = SIZE - 60.0;
            let height = SIZE - 140.0;
            let slot = (SIZE - 80.0) / values.len().max(1) as f64;
            let _ = writeln!(svg, r##"<line x1="40" y1="{baseline}" x2="{}" y2="{baseline}" stroke="#999999"/>"##, SIZE - 40.0);
            for (i, (label, value)) in values.iter().enumerate() {
                let h = height * *value as f64 / scale;
                let x = 40.0 + slot * i as f64 + slot * 0.2;
                let w = slot * 0.6;
                let _ = writeln!(
                    svg,
                    r##"<rect class="risk" x="{x:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}" fill="#d62728" fill-opacity="0.6"/>"##,
                    baseline - h
                );
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{} ({value})</text>"#,
                    x + w / 2.0,
                    baseline + 18.0,
                    xml_escape(label)
                );
            }
        }
    }
    svg.push_str("</svg>\n");

    RadarChart {
        level,
        kind,
        svg,
        sidecar: RadarSidecar {
            level,
            values: values.iter().map(|(l, v)| (l.to_string(), *v)).collect(),
        },
    }
}

/// One chart per risk level, highest level first.
pub fn emit_all_radars(profiles: &[(String, RiskProfile)]) -> Vec<RadarChart> {
    RiskLevel::ALL.iter().rev().map(|level| emit_radar(profiles, *level)).collect()
}
