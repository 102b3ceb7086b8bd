//! Prompt construction for the teacher's translation interface.

use alloc::format;
use alloc::string::String;

use crate::types::SourceSegment;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("segment `{id}` spans multiple lines; prompts take single-line sources")]
    MultilineSource { id: String },
}

/// Render the fixed two-line prompt:
///
/// ```text
/// {source_lang}: {text}
/// {target_lang}:
/// ```
///
/// The completion after the trailing colon is the translation. Sources with
/// internal line breaks are refused: they would corrupt the template.
pub fn build_prompt(segment: &SourceSegment) -> Result<String, PromptError> {
    if segment.text.contains(['\n', '\r']) {
        return Err(PromptError::MultilineSource {
            id: segment.id.clone(),
        });
    }
    Ok(format!(
        "{}: {}\n{}:",
        segment.pair.source_lang, segment.text, segment.pair.target_lang
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LanguagePair;

    fn segment(text: &str) -> SourceSegment {
        SourceSegment::new(
            "s1",
            text,
            LanguagePair::new("English", "German").unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn renders_the_two_line_template() {
        let prompt = build_prompt(&segment("The dog sleeps.")).unwrap();
        assert_eq!(prompt, "English: The dog sleeps.\nGerman:");
    }

    #[test]
    fn rejects_internal_line_breaks() {
        let with_newline = SourceSegment {
            id: "s2".into(),
            text: "line one\nline two".into(),
            pair: LanguagePair::new("English", "German").unwrap(),
        };
        assert_eq!(
            build_prompt(&with_newline).unwrap_err(),
            PromptError::MultilineSource { id: "s2".into() }
        );
    }

    #[test]
    fn surrounding_whitespace_was_already_trimmed() {
        // Construction canonicalizes, so a trailing newline in raw input
        // does not survive to the prompt.
        let prompt = build_prompt(&segment("  Hello.  ")).unwrap();
        assert_eq!(prompt, "English: Hello.\nGerman:");
    }
}
