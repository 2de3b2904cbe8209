//! Audit documents and the tables and charts rendered from them.

mod document;
mod radar;
mod tables;

pub use document::{
    emit_json, load_document, parse_document, AuditDocument, TargetMetadata, REPORT_SCHEMA, TOOL_VERSION,
};
pub use radar::{emit_all_radars, emit_radar, ChartKind, RadarChart, RadarSidecar};
pub use tables::{emit_compliance_matrix, emit_coverage_table, TableFormat};
