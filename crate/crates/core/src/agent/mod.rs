//! The ReAct loop.
//!
//! Each iteration renders the prompt, asks the backend for a completion,
//! parses it and either finishes (final answer) or dispatches one tool and
//! appends the observation. Every way out is recorded in
//! [`Transcript::status`]; `run` never returns an error and never reads
//! interactive input.

mod parse;
mod prompt;
mod transcript;

pub use parse::{parse_model_output, ParsedDirective, UnparseableOutput};
pub use prompt::{
    render_action, render_prompt, PromptTemplate, CORRECTIVE_MESSAGE, DEFAULT_COT_TRIGGER,
    DEFAULT_FORMAT_INSTRUCTIONS, DEFAULT_PERSONA,
};
pub use transcript::{AgentStep, RunStatus, Transcript};

use std::sync::mpsc;
use std::time::{Duration, Instant};

use chrono::Utc;

use crate::llm::{ChatMessage, CompletionBackend, CompletionRequest};
use crate::tools::{ToolError, ToolRegistry, ToolResult, ToolSpec};

pub const OBSERVATION_STOP: &str = "Observation:";
pub const TRUNCATION_MARKER: &str = "[truncated]";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentLimits {
    pub max_steps: usize,
    pub loop_window: usize,
    pub per_tool_timeout_seconds: u64,
    pub observation_budget_bytes: usize,
}

impl Default for AgentLimits {
    fn default() -> Self {
        Self {
            max_steps: 15,
            loop_window: 3,
            per_tool_timeout_seconds: 60,
            observation_budget_bytes: 8 * 1024,
        }
    }
}

impl AgentLimits {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_steps == 0 || self.loop_window == 0 || self.per_tool_timeout_seconds == 0 {
            return Err("max_steps, loop_window and per_tool_timeout_seconds must be positive".into());
        }
        if self.loop_window > self.max_steps {
            return Err(format!(
                "loop_window {} exceeds max_steps {}",
                self.loop_window, self.max_steps
            ));
        }
        Ok(())
    }
}

/// True when the last `window` steps repeat one (action, input) pair.
pub fn detect_loop(steps: &[AgentStep], window: usize) -> bool {
    if window == 0 || steps.len() < window {
        return false;
    }
    let tail = &steps[steps.len() - window..];
    let first = &tail[0];
    tail.iter().all(|s| {
        s.action_name.eq_ignore_ascii_case(&first.action_name)
            && s.action_input.trim() == first.action_input.trim()
    })
}

/// Cuts `text` to at most `budget` bytes (on a char boundary) and appends
/// the truncation marker.
pub fn truncate_observation(text: &str, budget: usize) -> String {
    if text.len() <= budget {
        return text.to_string();
    }
    let mut cut = budget;
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}\n{TRUNCATION_MARKER}", &text[..cut])
}

fn invoke_with_timeout(spec: &ToolSpec, input: &str, timeout: Duration) -> Result<ToolResult, ToolError> {
    let handler = spec.handler.clone();
    let input = input.to_string();
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let _ = tx.send(handler(&input));
    });
    match rx.recv_timeout(timeout) {
        Ok(result) => result,
        Err(mpsc::RecvTimeoutError::Timeout) => Err(ToolError::new(
            &spec.name,
            format!("timed out after {} s", timeout.as_secs()),
        )),
        Err(mpsc::RecvTimeoutError::Disconnected) => Err(ToolError::new(&spec.name, "tool panicked")),
    }
}

enum Dispatch {
    Observed(String),
    Failed(String),
}

fn dispatch(tools: &ToolRegistry, name: &str, input: &str, timeout: Duration) -> Dispatch {
    let spec = match tools.lookup(name) {
        Ok(spec) => spec,
        Err(unknown) => return Dispatch::Observed(format!("Error: {unknown}")),
    };
    let first = invoke_with_timeout(spec, input, timeout);
    let result = match first {
        Ok(r) => Ok(r),
        Err(_) => invoke_with_timeout(spec, input, timeout),
    };
    match result {
        Ok(r) if r.is_error => Dispatch::Observed(format!("Error: {}", r.output)),
        Ok(r) => Dispatch::Observed(r.output),
        Err(e) => Dispatch::Failed(e.to_string()),
    }
}

/// Runs the agent on one task until it answers or a limit trips.
pub fn run(
    task_query: &str,
    tools: &ToolRegistry,
    backend: &mut dyn CompletionBackend,
    template: &PromptTemplate,
    limits: &AgentLimits,
) -> Transcript {
    let started_at = Utc::now();
    let mut steps: Vec<AgentStep> = Vec::new();
    let mut pending_correction: Option<String> = None;
    let mut corrective_retries = 0u32;
    let tool_timeout = Duration::from_secs(limits.per_tool_timeout_seconds.max(1));

    let finish = |steps: Vec<AgentStep>,
                  status: RunStatus,
                  answer: Option<(Option<String>, String)>,
                  error: Option<String>,
                  corrective_retries: u32| {
        let (final_thought, final_answer) = match answer {
            Some((t, a)) => (t, Some(a)),
            None => (None, None),
        };
        Transcript {
            task_query: task_query.to_string(),
            final_answer,
            final_thought,
            steps,
            status,
            error,
            corrective_retries,
            started_at,
            ended_at: Utc::now(),
        }
    };

    if tools.is_empty() {
        return finish(steps, RunStatus::ToolFailure, None, Some("no tools registered".into()), 0);
    }
    if let Err(e) = limits.validate() {
        return finish(steps, RunStatus::StepLimitExceeded, None, Some(e), 0);
    }

    loop {
        let mut messages = render_prompt(template, task_query, &steps);
        if let Some(bad) = &pending_correction {
            if !bad.trim().is_empty() {
                messages.push(ChatMessage::assistant(bad.clone()));
            }
            messages.push(ChatMessage::user(CORRECTIVE_MESSAGE));
        }
        let request = CompletionRequest::new(messages, backend.model_id()).with_stop(OBSERVATION_STOP);

        let text = match backend.complete(&request) {
            Ok(text) => text,
            Err(e) => {
                return finish(steps, RunStatus::BackendFailure, None, Some(e.to_string()), corrective_retries)
            }
        };

        let directive = match parse_model_output(&text) {
            Ok(d) => d,
            Err(_) if pending_correction.is_none() => {
                pending_correction = Some(text);
                corrective_retries += 1;
                continue;
            }
            Err(e) => {
                return finish(steps, RunStatus::ParseFailure, None, Some(e.to_string()), corrective_retries)
            }
        };
        pending_correction = None;

        match directive {
            ParsedDirective::FinalAnswer { thought, answer } => {
                return finish(steps, RunStatus::Completed, Some((thought, answer)), None, corrective_retries);
            }
            ParsedDirective::ToolCall {
                thought,
                action_name,
                action_input,
            } => {
                if steps.len() >= limits.max_steps {
                    let msg = format!("step limit of {} reached", limits.max_steps);
                    return finish(steps, RunStatus::StepLimitExceeded, None, Some(msg), corrective_retries);
                }
                let start = Instant::now();
                let outcome = dispatch(tools, &action_name, &action_input, tool_timeout);
                let duration_ms = start.elapsed().as_millis() as u64;
                let (observation, failure) = match outcome {
                    Dispatch::Observed(o) => (o, None),
                    Dispatch::Failed(e) => (format!("Error: {e}"), Some(e)),
                };
                steps.push(AgentStep {
                    index: steps.len(),
                    thought,
                    action_name,
                    action_input,
                    observation: truncate_observation(&observation, limits.observation_budget_bytes),
                    duration_ms,
                });
                if let Some(e) = failure {
                    return finish(steps, RunStatus::ToolFailure, None, Some(e), corrective_retries);
                }
                if detect_loop(&steps, limits.loop_window) {
                    let msg = format!(
                        "the same action repeated {} times in a row",
                        limits.loop_window
                    );
                    return finish(steps, RunStatus::LoopDetected, None, Some(msg), corrective_retries);
                }
            }
        }
    }
}
