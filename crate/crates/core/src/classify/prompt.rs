//! Prompt texts for asking a language model where a failed case's inducer
//! hides.

use std::sync::OnceLock;

use regex::Regex;

use super::{ClassifyError, FailureMode};
use crate::git::CommitId;

/// Optional context a prompt may need besides the fix message.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptContext {
    pub file: Option<String>,
    pub function_names: Vec<String>,
    pub function_code: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptKind {
    A,
    B,
    C,
}

impl PromptKind {
    pub fn for_mode(mode: FailureMode) -> Option<Self> {
        match mode {
            FailureMode::CrossFile => Some(PromptKind::A),
            FailureMode::WithinFile => Some(PromptKind::B),
            FailureMode::FunctionLog | FailureMode::FunctionBlame => Some(PromptKind::C),
            FailureMode::LineChange => None,
        }
    }
}

fn hex_run() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b[0-9a-fA-F]{7,40}\b").expect("valid regex"))
}

/// Drops `Fixes:` lines and every hex run that abbreviates one of
/// `inducers`.
pub fn scrub_message(message: &str, inducers: &[CommitId]) -> String {
    let kept: Vec<String> = message
        .lines()
        .filter(|l| {
            !l.trim_start()
                .get(..6)
                .is_some_and(|p| p.eq_ignore_ascii_case("fixes:"))
        })
        .map(|l| {
            hex_run()
                .replace_all(l, |c: &regex::Captures<'_>| {
                    let run = c[0].to_ascii_lowercase();
                    if inducers.iter().any(|i| i.as_str().starts_with(&run)) {
                        String::new()
                    } else {
                        c[0].to_string()
                    }
                })
                .into_owned()
        })
        .collect();
    kept.join("\n").trim_end().to_string()
}

/// Instantiates the template for `mode` after scrubbing inducer references
/// from `fix_message`.
pub fn emit_llm_prompt(
    mode: FailureMode,
    fix_message: &str,
    context: &PromptContext,
    inducers: &[CommitId],
) -> Result<String, ClassifyError> {
    let kind = PromptKind::for_mode(mode).ok_or(ClassifyError::NoTemplate(mode))?;
    let message = scrub_message(fix_message, inducers);
    match kind {
        PromptKind::A => Ok(format!(
            "{message}\nBased on the above commit message of a bug-fixing commit, which file in the Linux kernel could be causing this bug-fixing commit?"
        )),
        PromptKind::B => {
            let file = context.file.as_deref().ok_or(ClassifyError::MissingContext("file"))?;
            if context.function_names.is_empty() {
                return Err(ClassifyError::MissingContext("function_names"));
            }
            Ok(format!(
                "{message}\nBased on the above commit message of a bug-fixing commit and function names in file {file}, which function or functions could be causing this bug-fixing commit?\n{}",
                context.function_names.join("\n")
            ))
        }
        PromptKind::C => {
            let code = context
                .function_code
                .as_deref()
                .filter(|c| !c.trim().is_empty())
                .ok_or(ClassifyError::MissingContext("function_code"))?;
            Ok(format!(
                "{message}\nBased on the above commit message of a bug-fixing commit, please identify the line or lines of code in the following code that could be causing this bug-fixing commit:\n{code}"
            ))
        }
    }
}
