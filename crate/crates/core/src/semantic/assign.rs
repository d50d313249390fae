use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::transcript::normalize_word;
use super::{GestureDatabase, LlmClient, PromptConfig, TranscriptWord};
use crate::error::{Error, Result};

/// A gesture over words `first..=last` of the transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureAssignment {
    pub first: usize,
    pub last: usize,
    pub entry_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentSource {
    Llm,
    /// LLM output with some items replaced by keyword matches.
    Mixed,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentOutcome {
    pub assignments: Vec<GestureAssignment>,
    pub source: AssignmentSource,
    pub warnings: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawItem {
    first: usize,
    last: usize,
    gesture: String,
}

/// Parses the strict JSON answer, tolerating a surrounding code fence.
pub fn parse_llm_output(text: &str) -> Result<Vec<(usize, usize, String)>> {
    let mut s = text.trim();
    if let Some(rest) = s.strip_prefix("```") {
        s = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        s = s.strip_suffix("```").unwrap_or(s).trim();
    }
    let items: Vec<RawItem> = serde_json::from_str(s).map_err(|e| Error::Llm(format!("malformed answer: {e}")))?;
    Ok(items.into_iter().map(|i| (i.first, i.last, i.gesture)).collect())
}

/// Leftmost, longest, case-insensitive keyword matches without overlap.
/// Among keywords of equal length the earliest database entry wins.
pub fn keyword_fallback_assign(transcript: &[TranscriptWord], db: &GestureDatabase) -> Vec<GestureAssignment> {
    let words: Vec<String> = transcript.iter().map(|w| normalize_word(&w.text)).collect();
    let phrases = db.keyword_phrases();
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let mut best: Option<(usize, usize)> = None;
        for (phrase, entry) in &phrases {
            let n = phrase.len();
            if i + n <= words.len() && words[i..i + n] == phrase[..] && best.is_none_or(|(bn, _)| n > bn) {
                best = Some((n, *entry));
            }
        }
        match best {
            Some((n, entry)) => {
                out.push(GestureAssignment {
                    first: i,
                    last: i + n - 1,
                    entry_id: db.entries()[entry].id.clone(),
                });
                i += n;
            }
            None => i += 1,
        }
    }
    out
}

/// Asks `client` for gesture assignments. Malformed answers are re-asked
/// once; a second failure falls back to keyword matching. Items with
/// unknown gesture ids are dropped and the keyword matcher is consulted for
/// their words. Invalid or overlapping ranges are dropped.
pub fn assign_gestures(
    transcript: &[TranscriptWord],
    db: &GestureDatabase,
    client: &dyn LlmClient,
    prompt: &PromptConfig,
) -> AssignmentOutcome {
    let mut warnings = Vec::new();
    if transcript.is_empty() {
        return AssignmentOutcome {
            assignments: Vec::new(),
            source: AssignmentSource::Llm,
            warnings,
        };
    }
    let words: Vec<String> = transcript.iter().map(|w| w.text.clone()).collect();
    let text = prompt.render(&words, db);

    let mut parsed = None;
    for attempt in 0..2 {
        let query = if attempt == 0 {
            text.clone()
        } else {
            format!("{text}\n\nYour previous answer could not be parsed. Reply with the JSON array only.")
        };
        match client.complete(&query).and_then(|r| parse_llm_output(&r)) {
            Ok(items) => {
                parsed = Some(items);
                break;
            }
            Err(e) => warnings.push(format!("attempt {}: {e}", attempt + 1)),
        }
    }
    let Some(items) = parsed else {
        warnings.push("falling back to keyword matching".into());
        for w in &warnings {
            log::warn!("gesture assignment: {w}");
        }
        return AssignmentOutcome {
            assignments: keyword_fallback_assign(transcript, db),
            source: AssignmentSource::Fallback,
            warnings,
        };
    };

    let n = transcript.len();
    let mut taken = vec![false; n];
    let mut accepted = Vec::new();
    let mut retry_words = BTreeSet::new();
    for (first, last, id) in items {
        if first > last || last >= n {
            warnings.push(format!("dropped out-of-range span {first}..={last}"));
            continue;
        }
        if db.get(&id).is_none() {
            warnings.push(format!("dropped unknown gesture {id:?}"));
            retry_words.extend(first..=last);
            continue;
        }
        if taken[first..=last].iter().any(|&t| t) {
            warnings.push(format!("dropped overlapping span {first}..={last}"));
            continue;
        }
        taken[first..=last].iter_mut().for_each(|t| *t = true);
        accepted.push(GestureAssignment {
            first,
            last,
            entry_id: id,
        });
    }
    let mut source = AssignmentSource::Llm;
    if !retry_words.is_empty() {
        for a in keyword_fallback_assign(transcript, db) {
            let inside = (a.first..=a.last).all(|w| retry_words.contains(&w) && !taken[w]);
            if inside {
                taken[a.first..=a.last].iter_mut().for_each(|t| *t = true);
                accepted.push(a);
                source = AssignmentSource::Mixed;
            }
        }
    }
    accepted.sort_by_key(|a| a.first);
    for w in &warnings {
        log::warn!("gesture assignment: {w}");
    }
    AssignmentOutcome {
        assignments: accepted,
        source,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::database::tests::entry;
    use crate::semantic::{align_transcript, ScriptedClient};
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<TranscriptWord> {
        let w: Vec<String> = s.split(' ').map(str::to_string).collect();
        let d = vec![0.3; w.len()];
        align_transcript(&w, &d).unwrap()
    }

    fn db() -> GestureDatabase {
        GestureDatabase::from_entries(vec![
            entry("point-left", &["left"], 4),
            entry("thumbs-up", &["thumbs up", "great"], 5),
            entry("up-down", &["up"], 3),
            entry("open-arms", &["wonderful"], 6),
        ])
        .unwrap()
    }

    #[test]
    fn fallback_examples() {
        let a = keyword_fallback_assign(&words("that was wonderful"), &db());
        assert_eq!(a, vec![GestureAssignment { first: 2, last: 2, entry_id: "open-arms".into() }]);
        assert!(keyword_fallback_assign(&words("nothing here"), &db()).is_empty());
        let a = keyword_fallback_assign(&words("Thumbs UP, friends"), &db());
        assert_eq!(a, vec![GestureAssignment { first: 0, last: 1, entry_id: "thumbs-up".into() }]);
        let a = keyword_fallback_assign(&words("up thumbs up"), &db());
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].entry_id, "up-down");
        assert_eq!((a[1].first, a[1].last), (1, 2));
    }

    #[test]
    fn scripted_client_span() {
        let c = ScriptedClient::new([r#"[{"first":2,"last":2,"gesture":"point-left"}]"#.to_string()]);
        let out = assign_gestures(&words("turn to left now"), &db(), &c, &PromptConfig::default());
        assert_eq!(out.source, AssignmentSource::Llm);
        assert_eq!(out.assignments, vec![GestureAssignment { first: 2, last: 2, entry_id: "point-left".into() }]);
        assert!(c.prompts()[0].contains("2:left"));
    }

    #[test]
    fn empty_transcript() {
        let c = ScriptedClient::new([]);
        let out = assign_gestures(&[], &db(), &c, &PromptConfig::default());
        assert!(out.assignments.is_empty());
        assert!(c.prompts().is_empty());
    }

    #[test]
    fn unknown_id_uses_fallback_for_its_words() {
        let c = ScriptedClient::new([r#"```json
[{"first":0,"last":0,"gesture":"jazz-hands"},{"first":3,"last":3,"gesture":"point-left"}]
```"#
            .to_string()]);
        let out = assign_gestures(&words("wonderful to go left"), &db(), &c, &PromptConfig::default());
        assert_eq!(out.source, AssignmentSource::Mixed);
        let ids: Vec<_> = out.assignments.iter().map(|a| a.entry_id.as_str()).collect();
        assert_eq!(ids, vec!["open-arms", "point-left"]);
        assert!(out.warnings.iter().any(|w| w.contains("jazz-hands")));
    }

    #[test]
    fn malformed_twice_falls_back() {
        let c = ScriptedClient::new(["sure!".to_string(), "{oops".to_string()]);
        let out = assign_gestures(&words("that was wonderful"), &db(), &c, &PromptConfig::default());
        assert_eq!(out.source, AssignmentSource::Fallback);
        assert_eq!(out.assignments.len(), 1);
        assert_eq!(c.prompts().len(), 2);
        let c = ScriptedClient::new(["nope".to_string(), "[]".to_string()]);
        let out = assign_gestures(&words("that was wonderful"), &db(), &c, &PromptConfig::default());
        assert_eq!(out.source, AssignmentSource::Llm);
        assert!(out.assignments.is_empty());
    }

    #[test]
    fn client_error_falls_back() {
        let c = ScriptedClient::with_results([Err(Error::Llm("down".into())), Err(Error::Llm("down".into()))]);
        let out = assign_gestures(&words("go left"), &db(), &c, &PromptConfig::default());
        assert_eq!(out.source, AssignmentSource::Fallback);
        assert_eq!(out.assignments[0].entry_id, "point-left");
    }

    proptest! {
        #[test]
        fn any_answer_yields_valid_spans(answer in ".{0,80}", items in proptest::collection::vec((0usize..8, 0usize..8, 0usize..6), 0..6)) {
            let ids = ["point-left", "thumbs-up", "up-down", "open-arms", "bogus", ""];
            let json = serde_json::to_string(&items.iter().map(|&(a, b, k)| serde_json::json!({"first": a, "last": b, "gesture": ids[k]})).collect::<Vec<_>>()).unwrap();
            let tr = words("so great that left up wonderful");
            let d = db();
            for reply in [answer.clone(), json] {
                let c = ScriptedClient::new([reply.clone(), reply]);
                let out = assign_gestures(&tr, &d, &c, &PromptConfig::default());
                let mut used = vec![false; tr.len()];
                let mut prev = None;
                for a in &out.assignments {
                    prop_assert!(a.first <= a.last && a.last < tr.len());
                    prop_assert!(d.get(&a.entry_id).is_some());
                    for w in a.first..=a.last {
                        prop_assert!(!used[w]);
                        used[w] = true;
                    }
                    prop_assert!(prev.is_none_or(|p| p < a.first));
                    prev = Some(a.first);
                }
            }
        }

        #[test]
        fn fallback_is_stable_under_retokenization(pad in 0usize..3) {
            let tr = words("so great that left up wonderful");
            let a = keyword_fallback_assign(&tr, &db());
            let mut tr2 = Vec::new();
            for w in &tr {
                let mut w = w.clone();
                w.text = format!("{}{}", w.text.to_uppercase(), "!".repeat(pad));
                tr2.push(w);
            }
            prop_assert_eq!(&a, &keyword_fallback_assign(&tr2, &db()));
            prop_assert_eq!(&a, &keyword_fallback_assign(&tr, &db()));
        }
    }
}
