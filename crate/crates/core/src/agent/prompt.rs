use crate::llm::ChatMessage;
use crate::tools::ToolRegistry;

use super::AgentStep;

pub const DEFAULT_PERSONA: &str = "You are a security audit assistant";
pub const DEFAULT_COT_TRIGGER: &str = "Let's think step by step.";

/// `{tool_names}` is replaced with the comma-separated tool names.
pub const DEFAULT_FORMAT_INSTRUCTIONS: &str = "\
Use the following format:

Thought: you should always think about what to do
Action: the action to take, should be one of [{tool_names}]
Action Input: the input to the action
Observation: the result of the action
... (this Thought/Action/Action Input/Observation can repeat N times)
Thought: I now know the final answer
Final Answer: the final answer to the original question. State plainly whether the subject is compliant or non-compliant, and list every gap found.";

const ROLE_DETAIL: &str = "You audit Windows machines and user accounts for password policy compliance. \
Gather evidence with the tools rather than assumptions, and report your findings in a concise, formal style.";

pub const CORRECTIVE_MESSAGE: &str = "Your last reply could not be parsed. Reply using exactly one of these forms:\n\
Thought: <reasoning>\nAction: <tool name>\nAction Input: <tool input>\n\
or\n\
Thought: <reasoning>\nFinal Answer: <answer>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub persona_line: String,
    /// `(name, description)` pairs shown to the model.
    pub tool_descriptions: Vec<(String, String)>,
    pub format_instructions: String,
    pub cot_trigger: String,
}

impl PromptTemplate {
    pub fn for_tools(tools: &ToolRegistry) -> Self {
        Self {
            persona_line: DEFAULT_PERSONA.to_string(),
            tool_descriptions: tools
                .iter()
                .map(|t| (t.name.clone(), t.description.clone()))
                .collect(),
            format_instructions: DEFAULT_FORMAT_INSTRUCTIONS.to_string(),
            cot_trigger: DEFAULT_COT_TRIGGER.to_string(),
        }
    }

    pub fn with_cot_trigger(mut self, trigger: impl Into<String>) -> Self {
        self.cot_trigger = trigger.into();
        self
    }

    pub fn system_content(&self) -> String {
        let persona = self.persona_line.trim();
        let mut out = String::from(persona);
        if !persona.ends_with(['.', '!', '?']) {
            out.push('.');
        }
        out.push(' ');
        out.push_str(ROLE_DETAIL);
        out.push_str("\n\nYou have access to the following tools:\n\n");
        for (name, description) in &self.tool_descriptions {
            out.push_str(&format!("{name}: {description}\n"));
        }
        let names: Vec<&str> = self.tool_descriptions.iter().map(|(n, _)| n.as_str()).collect();
        out.push('\n');
        out.push_str(&self.format_instructions.replace("{tool_names}", &names.join(", ")));
        out
    }

    pub fn task_content(&self, task_query: &str) -> String {
        let mut out = format!("Question: {}", task_query.trim());
        if !self.cot_trigger.trim().is_empty() {
            out.push_str("\n\n");
            out.push_str(self.cot_trigger.trim());
        }
        out
    }
}

/// Renders the step's model-side half: thought, action, input.
pub fn render_action(step: &AgentStep) -> String {
    let mut out = String::new();
    if let Some(t) = step.thought.as_deref().filter(|t| !t.trim().is_empty()) {
        out.push_str(&format!("Thought: {}\n", t.trim()));
    }
    out.push_str(&format!(
        "Action: {}\nAction Input: {}",
        step.action_name, step.action_input
    ));
    out
}

/// Builds the message list: system prompt, the task with the reasoning
/// cue, then each prior step as an assistant action followed by a user
/// observation.
pub fn render_prompt(template: &PromptTemplate, task_query: &str, steps: &[AgentStep]) -> Vec<ChatMessage> {
    let mut messages = Vec::with_capacity(2 + 2 * steps.len());
    messages.push(ChatMessage::system(template.system_content()));
    messages.push(ChatMessage::user(template.task_content(task_query)));
    for step in steps {
        messages.push(ChatMessage::assistant(render_action(step)));
        messages.push(ChatMessage::user(format!("Observation: {}", step.observation)));
    }
    messages
}
