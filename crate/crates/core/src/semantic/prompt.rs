use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GestureDatabase;
use crate::error::{Error, Result};

const DEFAULT_TASK: &str = "You annotate speech transcripts with semantic gestures. \
A semantic gesture is a short body movement whose meaning matches the words it accompanies, \
such as pointing left while saying \"left\". You receive a numbered list of words and a list of \
available gestures. Choose gestures only where the meaning clearly matches; most words get no gesture. \
Each word may belong to at most one gesture and gesture spans must not overlap.";

const DEFAULT_FINAL: &str = "Answer with a JSON array only. Each item is \
{\"first\": <index of first word>, \"last\": <index of last word>, \"gesture\": <gesture id>}. \
Use only gesture ids from the list. Answer [] when no gesture fits.";

/// One worked example shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotExample {
    pub words: Vec<String>,
    /// Expected JSON answer.
    pub answer: String,
}

/// Prompt layout: task definition, worked examples, then the task itself.
/// `template` may reference `{task}`, `{gestures}`, `{examples}`,
/// `{transcript}` and `{instruction}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptConfig {
    pub task_definition: String,
    pub examples: Vec<FewShotExample>,
    pub final_instruction: String,
    pub template: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        let ex = |w: &str, a: &str| FewShotExample {
            words: w.split(' ').map(str::to_string).collect(),
            answer: a.into(),
        };
        Self {
            task_definition: DEFAULT_TASK.into(),
            examples: vec![
                ex(
                    "the exit is on your left",
                    r#"[{"first": 5, "last": 5, "gesture": "point-left"}]"#,
                ),
                ex("we simply talked for a while", "[]"),
                ex(
                    "great job everyone thumbs up",
                    r#"[{"first": 3, "last": 4, "gesture": "thumbs-up"}]"#,
                ),
                ex("I left early because it rained", "[]"),
            ],
            final_instruction: DEFAULT_FINAL.into(),
            template: "{task}\n\nAvailable gestures:\n{gestures}\n\nExamples:\n{examples}\n\nTask:\n{transcript}\n\n{instruction}\n"
                .into(),
        }
    }
}

fn numbered(words: &[String]) -> String {
    words.iter().enumerate().map(|(i, w)| format!("{i}:{w}")).collect::<Vec<_>>().join(" ")
}

impl PromptConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        if !cfg.template.contains("{transcript}") {
            return Err(Error::InvalidArgument("prompt template must contain {transcript}".into()));
        }
        Ok(cfg)
    }

    pub fn render(&self, words: &[String], db: &GestureDatabase) -> String {
        let gestures = db
            .entries()
            .iter()
            .map(|e| format!("- {}: {} ({}; e.g. \"{}\")", e.id, e.label, e.category, e.keywords.join("\", \"")))
            .collect::<Vec<_>>()
            .join("\n");
        let examples = self
            .examples
            .iter()
            .map(|e| format!("Words: {}\nAnswer: {}", numbered(&e.words), e.answer))
            .collect::<Vec<_>>()
            .join("\n\n");
        self.template
            .replace("{task}", &self.task_definition)
            .replace("{gestures}", &gestures)
            .replace("{examples}", &examples)
            .replace("{instruction}", &self.final_instruction)
            .replace("{transcript}", &format!("Words: {}\nAnswer:", numbered(words)))
    }
}
