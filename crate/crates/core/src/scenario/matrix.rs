use serde::Serialize;

use super::{run_scenario, reference_status, HarnessConfig, RunMode, ScenarioResult, ScenarioSpec, TaskResult};

/// One rendered row. `compliance_status` is what the agent reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatrixRow {
    pub scenario: String,
    pub interpret_audit_task: bool,
    pub execute_task_independently: bool,
    pub compliance_status: String,
    pub task_result: TaskResult,
    pub hedged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MatrixRow {
    fn from_result(r: &ScenarioResult) -> Self {
        let mut notes = Vec::new();
        if !r.transcript.is_completed() {
            notes.push(format!(
                "run ended with {:?}{}",
                r.transcript.status,
                r.transcript.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
            ));
        }
        if r.task_result == TaskResult::Fail && r.transcript.is_completed() {
            notes.push(format!("rule engine says {}", r.oracle_compliance.label()));
        }
        if r.hedged {
            notes.push("answer hedges on the current date".into());
        }
        Self {
            scenario: r.scenario_id.clone(),
            interpret_audit_task: r.interpreted_task,
            execute_task_independently: r.executed_independently,
            compliance_status: r.reported_compliance.label().to_string(),
            task_result: r.task_result,
            hedged: r.hedged,
            note: (!notes.is_empty()).then(|| notes.join("; ")),
        }
    }

    fn failed(id: &str, note: String) -> Self {
        Self {
            scenario: id.to_string(),
            interpret_audit_task: false,
            execute_task_independently: false,
            compliance_status: "Indeterminate".into(),
            task_result: TaskResult::Fail,
            hedged: false,
            note: Some(note),
        }
    }

    /// Differences from the reference row for this id, if there is one.
    pub fn deviations(&self) -> Vec<String> {
        let Some(expected) = reference_status(&self.scenario) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if !self.interpret_audit_task {
            out.push("task not interpreted".to_string());
        }
        if !self.execute_task_independently {
            out.push("task not executed independently".to_string());
        }
        if self.compliance_status != expected.label() {
            out.push(format!("status {} instead of {}", self.compliance_status, expected.label()));
        }
        if self.task_result != TaskResult::Pass {
            out.push("task result Fail".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Matrix {
    pub mode: RunMode,
    pub rows: Vec<MatrixRow>,
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

impl Matrix {
    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.task_result == TaskResult::Pass).count()
    }

    /// True when a scripted run differs from the reference table or any
    /// row failed. Live runs never gate.
    pub fn gates_failure(&self) -> bool {
        self.mode == RunMode::Scripted
            && self
                .rows
                .iter()
                .any(|r| r.task_result == TaskResult::Fail || !r.deviations().is_empty())
    }

    pub fn render_text(&self) -> String {
        let headers = [
            "Scenario",
            "Interpret Audit Task",
            "Execute Task Independently",
            "Compliance Status",
            "Task Result Evaluation",
        ];
        let cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    format!("Scenario {}", r.scenario),
                    yes_no(r.interpret_audit_task).to_string(),
                    yes_no(r.execute_task_independently).to_string(),
                    r.compliance_status.clone(),
                    format!("{:?}", r.task_result),
                ]
            })
            .collect();
        let mut widths = headers.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cols: Vec<&str>| -> String {
            let padded: Vec<String> = cols
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = line(headers.to_vec());
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
        for row in &cells {
            out.push_str(&line(row.iter().map(String::as_str).collect()));
        }
        out.push_str(&format!("\n{}/{} Pass ({:?} mode)\n", self.passed(), self.rows.len(), self.mode));
        for r in &self.rows {
            if let Some(note) = &r.note {
                out.push_str(&format!("  {}: {note}\n", r.scenario));
            }
            let dev = r.deviations();
            if self.mode == RunMode::Scripted && !dev.is_empty() {
                out.push_str(&format!("  {}: deviates from reference: {}\n", r.scenario, dev.join(", ")));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }
}

/// Runs the scenarios concurrently; rows come back in the order given.
/// A scenario that cannot run becomes a Fail row.
pub fn run_all(specs: &[ScenarioSpec], mode: RunMode, config: &HarnessConfig) -> (Matrix, Vec<Option<ScenarioResult>>) {
    let outcomes: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = specs
            .iter()
            .map(|spec| s.spawn(move || run_scenario(spec, mode, config)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(Err(super::ScenarioError::Panicked)))
            .collect()
    });
    let mut rows = Vec::with_capacity(specs.len());
    let mut results = Vec::with_capacity(specs.len());
    for (spec, outcome) in specs.iter().zip(outcomes) {
        match outcome {
            Ok(r) => {
                rows.push(MatrixRow::from_result(&r));
                results.push(Some(r));
            }
            Err(e) => {
                rows.push(MatrixRow::failed(&spec.id, e.to_string()));
                results.push(None);
            }
        }
    }
    (Matrix { mode, rows }, results)
}
