//! Semantic gestures: a database of short labeled gestures with their latent
//! embeddings, assignment of gestures to transcript words through an LLM
//! client (with a deterministic keyword fallback), and conversion of those
//! assignments into a timeline mask and candidate latents for injection.

mod assign;
mod categories;
mod database;
mod llm;
mod plan;
mod prompt;
mod transcript;

pub use assign::{assign_gestures, keyword_fallback_assign, parse_llm_output, AssignmentOutcome, AssignmentSource, GestureAssignment};
pub use categories::{default_categories, Category, CategorySystem};
pub use database::{build_database, GestureDatabase, LabeledClip, SemanticGestureEntry, DATABASE_FORMAT, MAX_GESTURE_SECONDS};
pub use llm::{LiveClient, LlmClient, RecordingClient, ReplayClient, ReplayRecord, ScriptedClient};
pub use plan::{
    align_candidate_to_span, build_injection_target, build_plan, make_timeline_mask, perturb_embedding, word_to_latent_span,
    AlignPolicy, AlignedCandidate, InjectionPlan, PlannedSpan,
};
pub use prompt::{FewShotExample, PromptConfig};
pub use transcript::{align_transcript, normalize_word, read_transcript, validate_transcript, write_transcript, TranscriptWord};
