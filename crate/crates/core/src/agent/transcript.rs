use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// One Thought → Action → Observation round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStep {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
    pub action_name: String,
    pub action_input: String,
    pub observation: String,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    StepLimitExceeded,
    LoopDetected,
    ToolFailure,
    ParseFailure,
    BackendFailure,
}

/// The record of one agent run. Serializes with `task_query` and `output`
/// at the top level; `output` holds the final answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub task_query: String,
    #[serde(rename = "output")]
    pub final_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_thought: Option<String>,
    pub steps: Vec<AgentStep>,
    pub status: RunStatus,
    /// Diagnostic for a non-completed run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub corrective_retries: u32,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
}

impl Transcript {
    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// A copy with wall-clock fields zeroed, for comparing runs.
    pub fn without_timing(&self) -> Transcript {
        let epoch = DateTime::<Utc>::UNIX_EPOCH;
        let mut t = self.clone();
        t.started_at = epoch;
        t.ended_at = epoch;
        for s in &mut t.steps {
            s.duration_ms = 0;
        }
        t
    }

    /// Human-readable log. Each step is introduced by `--- step N ---`
    /// (N counted from 1), the answer by `--- final answer ---`.
    pub fn render_text(&self) -> String {
        let mut out = format!("Task: {}\n", self.task_query);
        for step in &self.steps {
            out.push_str(&format!("--- step {} ---\n", step.index + 1));
            if let Some(t) = &step.thought {
                out.push_str(&format!("Thought: {t}\n"));
            }
            out.push_str(&format!("Action: {}\n", step.action_name));
            out.push_str(&format!("Action Input: {}\n", step.action_input));
            out.push_str(&format!("Observation: {}\n", step.observation.trim_end()));
        }
        if let Some(answer) = &self.final_answer {
            out.push_str("--- final answer ---\n");
            if let Some(t) = &self.final_thought {
                out.push_str(&format!("Thought: {t}\n"));
            }
            out.push_str(&format!("Final Answer: {answer}\n"));
        }
        out.push_str(&format!("Status: {:?}\n", self.status));
        if let Some(e) = &self.error {
            out.push_str(&format!("Error: {e}\n"));
        }
        out
    }
}
