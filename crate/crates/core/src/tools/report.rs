//! Report delivery.
//!
//! A delivered message is a plain-text body whose first line is the binary
//! answer (`COMPLIANT` or `NON-COMPLIANT`), followed by one `- ` line per
//! gap, plus a JSON sidecar carrying the full report.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compliance::{Compliance, ComplianceReport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryReceipt {
    pub sink_id: String,
    pub location: String,
}

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("report sink unavailable: {0}")]
    SinkUnavailable(String),
    #[error("malformed report: {0}")]
    MalformedReport(String),
}

pub trait ReportSink: Send + Sync {
    fn id(&self) -> &str;
    fn deliver(&self, report: &ComplianceReport) -> Result<DeliveryReceipt, SinkError>;
}

pub fn render_report_body(report: &ComplianceReport) -> String {
    let mut body = String::new();
    body.push_str(match report.overall {
        Compliance::Compliant => "COMPLIANT\n",
        Compliance::NonCompliant => "NON-COMPLIANT\n",
    });
    for gap in report.gaps() {
        body.push_str("- ");
        body.push_str(gap);
        body.push('\n');
    }
    body.push('\n');
    body.push_str(&format!("Subject: {}\n", report.subject));
    body.push_str(&format!("Audit date: {}\n", report.audit_date));
    if !report.task_query.is_empty() {
        body.push_str(&format!("Task: {}\n", report.task_query));
    }
    body.push_str(&format!(
        "Rules evaluated: {}, violated: {}\n",
        report.verdicts.len(),
        report.gaps().count()
    ));
    body
}

/// Writes `<subject>_<timestamp>.txt` and `<subject>_<timestamp>.json`
/// into a directory.
#[derive(Debug, Clone)]
pub struct FileSink {
    dir: PathBuf,
}

impl FileSink {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn unavailable(&self, e: std::io::Error) -> SinkError {
        SinkError::SinkUnavailable(format!("{}: {e}", self.dir.display()))
    }
}

fn sanitize(subject: &str) -> String {
    let s: String = subject
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "report".into()
    } else {
        s
    }
}

impl ReportSink for FileSink {
    fn id(&self) -> &str {
        "file"
    }

    fn deliver(&self, report: &ComplianceReport) -> Result<DeliveryReceipt, SinkError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| self.unavailable(e))?;
        let stem = format!(
            "{}_{}",
            sanitize(&report.subject),
            Utc::now().format("%Y%m%dT%H%M%S%.3fZ")
        );
        let json = serde_json::to_string_pretty(report)
            .map_err(|e| SinkError::MalformedReport(e.to_string()))?;

        // create_new claims the name; on collision try the next suffix
        for n in 0..1000 {
            let name = if n == 0 { stem.clone() } else { format!("{stem}-{n}") };
            let body_path = self.dir.join(format!("{name}.txt"));
            let mut file = match OpenOptions::new().write(true).create_new(true).open(&body_path) {
                Ok(f) => f,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(self.unavailable(e)),
            };
            file.write_all(render_report_body(report).as_bytes())
                .map_err(|e| self.unavailable(e))?;
            std::fs::write(self.dir.join(format!("{name}.json")), &json)
                .map_err(|e| self.unavailable(e))?;
            return Ok(DeliveryReceipt {
                sink_id: self.id().to_string(),
                location: body_path.display().to_string(),
            });
        }
        Err(SinkError::SinkUnavailable(format!(
            "{}: could not allocate a unique file name",
            self.dir.display()
        )))
    }
}

pub fn emit_report(report: &ComplianceReport, sink: &dyn ReportSink) -> Result<DeliveryReceipt, SinkError> {
    if !report.is_well_formed() {
        return Err(SinkError::MalformedReport(
            "verdicts, gaps and overall answer disagree".into(),
        ));
    }
    sink.deliver(report)
}
