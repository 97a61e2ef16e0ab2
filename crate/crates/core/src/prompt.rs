//! Instruction templates and prompt assembly.
//!
//! The three instruction texts live under `templates/` as plain files and are
//! compiled in verbatim. Zero- and one-shot templates embed a worked example
//! through `{example_response}` / `{example_description}` placeholders; the
//! default example is the hotel staffing problem.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FINETUNE_TEMPLATE: &str = include_str!("../templates/finetune.txt");
pub const ZERO_SHOT_TEMPLATE: &str = include_str!("../templates/zero_shot.txt");
pub const ONE_SHOT_TEMPLATE: &str = include_str!("../templates/one_shot.txt");
const EXAMPLE_DESCRIPTION: &str = include_str!("../templates/example_description.txt");
const EXAMPLE_RESPONSE: &str = include_str!("../templates/example_response.txt");

const DESCRIPTION_SLOT: &str = "{example_description}";
const RESPONSE_SLOT: &str = "{example_response}";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("problem description is empty")]
    EmptyDescription,
    #[error("unknown prompt kind {0:?} (expected finetune, zero or one)")]
    UnknownKind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    #[serde(rename = "finetune")]
    FineTune,
    #[serde(rename = "zero")]
    ZeroShot,
    #[serde(rename = "one")]
    OneShot,
}

impl PromptKind {
    pub fn template(self) -> &'static str {
        match self {
            PromptKind::FineTune => FINETUNE_TEMPLATE,
            PromptKind::ZeroShot => ZERO_SHOT_TEMPLATE,
            PromptKind::OneShot => ONE_SHOT_TEMPLATE,
        }
    }

    /// Number of worked examples in the prompt; `None` for fine-tuning.
    pub fn k_shot(self) -> Option<u8> {
        match self {
            PromptKind::FineTune => None,
            PromptKind::ZeroShot => Some(0),
            PromptKind::OneShot => Some(1),
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptKind::FineTune => "finetune",
            PromptKind::ZeroShot => "zero",
            PromptKind::OneShot => "one",
        })
    }
}

impl FromStr for PromptKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "finetune" | "fine-tune" | "ft" => Ok(PromptKind::FineTune),
            "zero" | "zero-shot" | "0" => Ok(PromptKind::ZeroShot),
            "one" | "one-shot" | "1" => Ok(PromptKind::OneShot),
            _ => Err(PromptError::UnknownKind(s.to_string())),
        }
    }
}

/// A worked example: a problem description and its IR response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePair {
    pub description: String,
    pub response: String,
}

/// The hotel staffing problem and its IR.
pub fn default_example() -> ExamplePair {
    ExamplePair {
        description: EXAMPLE_DESCRIPTION.to_string(),
        response: EXAMPLE_RESPONSE.to_string(),
    }
}

fn expand(template: &str, example: &ExamplePair) -> String {
    let mut out = String::with_capacity(template.len() + example.response.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        if let Some(after) = tail.strip_prefix(DESCRIPTION_SLOT) {
            out.push_str(&example.description);
            rest = after;
        } else if let Some(after) = tail.strip_prefix(RESPONSE_SLOT) {
            out.push_str(&example.response);
            rest = after;
        } else {
            out.push('{');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}

/// The instruction text for `kind` with the example filled in. The example is
/// ignored for [`PromptKind::FineTune`]; `None` means the default example.
pub fn instruction(kind: PromptKind, example: Option<&ExamplePair>) -> String {
    match kind {
        PromptKind::FineTune => FINETUNE_TEMPLATE.to_string(),
        _ => {
            let default = default_example();
            expand(kind.template(), example.unwrap_or(&default))
        }
    }
}

/// Instruction and description as separate parts, for callers that send the
/// instruction as a system message.
pub fn build_prompt_parts(
    kind: PromptKind,
    description: &str,
    example: Option<&ExamplePair>,
) -> Result<(String, String), PromptError> {
    if description.trim().is_empty() {
        return Err(PromptError::EmptyDescription);
    }
    Ok((instruction(kind, example), description.to_string()))
}

/// Full prompt: instruction, a single newline, then the description.
pub fn build_prompt(kind: PromptKind, description: &str, example: Option<&ExamplePair>) -> Result<String, PromptError> {
    let (instruction, description) = build_prompt_parts(kind, description, example)?;
    Ok(format!("{instruction}\n{description}"))
}
