//! Parsing of ReAct-formatted model output.
//!
//! Labels (`Thought:`, `Action:`, `Action Input:`, `Observation:`,
//! `Final Answer:`) are recognized case-insensitively at line starts.
//! Unlabeled text before the first label counts as the thought.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ParsedDirective {
    ToolCall {
        thought: Option<String>,
        action_name: String,
        action_input: String,
    },
    FinalAnswer {
        thought: Option<String>,
        answer: String,
    },
}

impl ParsedDirective {
    pub fn thought(&self) -> Option<&str> {
        match self {
            ParsedDirective::ToolCall { thought, .. } | ParsedDirective::FinalAnswer { thought, .. } => {
                thought.as_deref()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable model output: {reason}")]
pub struct UnparseableOutput {
    pub reason: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Thought,
    Action,
    ActionInput,
    Observation,
    FinalAnswer,
}

// longer labels first so "Action Input:" is not read as "Action:"
const LABELS: &[(&str, Label)] = &[
    ("action input:", Label::ActionInput),
    ("final answer:", Label::FinalAnswer),
    ("observation:", Label::Observation),
    ("thought:", Label::Thought),
    ("action:", Label::Action),
];

fn label_of(line: &str) -> Option<(Label, &str)> {
    let trimmed = line.trim_start();
    LABELS.iter().find_map(|(prefix, label)| {
        let head = trimmed.get(..prefix.len())?;
        head.eq_ignore_ascii_case(prefix)
            .then(|| (*label, &trimmed[prefix.len()..]))
    })
}

struct Segment {
    label: Option<Label>,
    start: usize,
    lines: Vec<String>,
}

impl Segment {
    fn text(&self) -> String {
        self.lines.join("\n").trim().to_string()
    }
}

fn segments(text: &str) -> Vec<Segment> {
    let mut out = vec![Segment {
        label: None,
        start: 0,
        lines: Vec::new(),
    }];
    for (i, line) in text.lines().enumerate() {
        match label_of(line) {
            Some((label, rest)) => out.push(Segment {
                label: Some(label),
                start: i,
                lines: vec![rest.to_string()],
            }),
            None => out.last_mut().expect("non-empty").lines.push(line.to_string()),
        }
    }
    out
}

fn strip_quotes(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') {
        s[1..s.len() - 1].trim().to_string()
    } else {
        s.to_string()
    }
}

fn non_empty(s: String) -> Option<String> {
    (!s.is_empty()).then_some(s)
}

/// Parses one completion into a tool call or a final answer. When both an
/// `Action:` and a `Final Answer:` appear, whichever comes first wins.
pub fn parse_model_output(text: &str) -> Result<ParsedDirective, UnparseableOutput> {
    let segs = segments(text);
    let action_at = segs.iter().position(|s| s.label == Some(Label::Action));
    let final_at = segs.iter().position(|s| s.label == Some(Label::FinalAnswer));

    let thought_before = |end: usize| -> Option<String> {
        let parts: Vec<String> = segs[..end]
            .iter()
            .filter(|s| matches!(s.label, None | Some(Label::Thought)))
            .map(Segment::text)
            .filter(|t| !t.is_empty())
            .collect();
        non_empty(parts.join("\n"))
    };

    match (action_at, final_at) {
        (Some(a), f) if f.is_none_or(|f| a < f) => {
            let action_name = segs[a].text();
            let action_name = action_name.lines().next().unwrap_or("").trim().to_string();
            if action_name.is_empty() {
                return Err(UnparseableOutput {
                    reason: "empty Action line",
                });
            }
            let input = segs[a + 1..]
                .iter()
                .take_while(|s| s.label != Some(Label::Action))
                .find(|s| s.label == Some(Label::ActionInput))
                .ok_or(UnparseableOutput {
                    reason: "Action without Action Input",
                })?;
            Ok(ParsedDirective::ToolCall {
                thought: thought_before(a),
                action_name,
                action_input: strip_quotes(&input.text()),
            })
        }
        (_, Some(f)) => {
            // the answer runs to the end of the text, labels included
            let all: Vec<&str> = text.lines().collect();
            let mut answer = segs[f].lines[0].clone();
            for line in &all[segs[f].start + 1..] {
                answer.push('\n');
                answer.push_str(line);
            }
            let answer = answer.trim().to_string();
            if answer.is_empty() {
                return Err(UnparseableOutput {
                    reason: "empty Final Answer",
                });
            }
            Ok(ParsedDirective::FinalAnswer {
                thought: thought_before(f),
                answer,
            })
        }
        _ => Err(UnparseableOutput {
            reason: "neither Action nor Final Answer found",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PATRICK_STEP_1: &str = "To determine if the user account \"Patrick\" has changed their password in the past 90 days, I need to check the password last set date for the account. This can be done using a Windows command.\n\nAction: WindowsTask\nAction Input: \"net user Patrick\"";

    #[test]
    fn transcript_step_one() {
        let d = parse_model_output(PATRICK_STEP_1).unwrap();
        match d {
            ParsedDirective::ToolCall {
                action_name,
                action_input,
                thought,
            } => {
                assert_eq!(action_name, "WindowsTask");
                assert_eq!(action_input, "net user Patrick");
                assert!(thought.unwrap().starts_with("To determine"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_final_answer() {
        assert_eq!(
            parse_model_output("Final Answer: compliant").unwrap(),
            ParsedDirective::FinalAnswer {
                thought: None,
                answer: "compliant".into()
            }
        );
    }

    #[test]
    fn action_without_input() {
        assert!(parse_model_output("Thought: hmm\nAction: WindowsTask\n").is_err());
    }

    #[test]
    fn nothing_recognizable() {
        assert!(parse_model_output("I am not sure what to do.").is_err());
        assert!(parse_model_output("").is_err());
        assert!(parse_model_output("Final Answer:   ").is_err());
        assert!(parse_model_output("Action:\nAction Input: x").is_err());
    }

    #[test]
    fn labels_case_insensitive_and_indented() {
        let d = parse_model_output("thought: look\n  ACTION: CurrentDate\n  action input: now").unwrap();
        assert_eq!(
            d,
            ParsedDirective::ToolCall {
                thought: Some("look".into()),
                action_name: "CurrentDate".into(),
                action_input: "now".into()
            }
        );
    }

    #[test]
    fn multiline_input_stops_at_next_label() {
        let d = parse_model_output("Action: X\nAction Input: line one\nline two\nObservation: made up").unwrap();
        match d {
            ParsedDirective::ToolCall { action_input, .. } => assert_eq!(action_input, "line one\nline two"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn earlier_directive_wins() {
        let d = parse_model_output("Action: WindowsTask\nAction Input: net accounts\nFinal Answer: done").unwrap();
        assert!(matches!(d, ParsedDirective::ToolCall { .. }));
        let d = parse_model_output("Final Answer: done\nAction: WindowsTask\nAction Input: net accounts").unwrap();
        match d {
            ParsedDirective::FinalAnswer { answer, .. } => {
                assert!(answer.starts_with("done"));
                assert!(answer.contains("Action: WindowsTask"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn final_answer_runs_to_end() {
        let d = parse_model_output("Thought: I now know the final answer\nFinal Answer: Penny is non-compliant.\nGaps:\n- password age").unwrap();
        match d {
            ParsedDirective::FinalAnswer { answer, thought } => {
                assert_eq!(answer, "Penny is non-compliant.\nGaps:\n- password age");
                assert_eq!(thought.as_deref(), Some("I now know the final answer"));
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn never_panics(s in "(?s).{0,400}") {
            let _ = parse_model_output(&s);
        }

        #[test]
        fn never_panics_on_label_soup(parts in proptest::collection::vec(
            prop_oneof![
                Just("Action:".to_string()), Just("Action Input:".to_string()),
                Just("Final Answer:".to_string()), Just("Thought:".to_string()),
                Just("Observation:".to_string()), Just("\n".to_string()),
                Just("\"".to_string()), "[a-zé ]{0,6}",
            ], 0..30)) {
            let text = parts.concat();
            if let Ok(d) = parse_model_output(&text) {
                match d {
                    ParsedDirective::ToolCall { action_name, .. } => prop_assert!(!action_name.is_empty()),
                    ParsedDirective::FinalAnswer { answer, .. } => prop_assert!(!answer.is_empty()),
                }
            }
        }
    }
}
