//! Runtime for an LLM-driven ReAct agent that audits Windows password-policy
//! compliance, plus the deterministic rule engine used to grade it.

pub mod agent;
pub mod cli;
pub mod compliance;
pub mod llm;
pub mod parsers;
pub mod scenario;
pub mod tools;
