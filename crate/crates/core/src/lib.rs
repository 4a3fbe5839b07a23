//! Accent-transfer verification toolkit.
//!
//! Aligns phoneme sequences from two grapheme-to-phoneme frontends, finds the
//! sites where a rhotic and a non-rhotic transcription disagree, measures the
//! third formant over those sites with LPC analysis, and runs the listening
//! test and slope statistics. A planner turns a corpus manifest into voice
//! conversion jobs and a combined training manifest.

pub mod alignment;
pub mod augment;
pub mod corpus;
mod dd;
pub mod formant;
pub mod phoneme;
pub mod pipeline;
pub mod roots;
pub mod stats;
pub mod synth;

pub use alignment::{
    align, find_rhotic_contrasts, AlignmentPath, ContextKind, RhoticContext, RhoticSide,
};
pub use corpus::{
    parse_ctm, parse_manifest, parse_scores, read_wav, CorpusManifest, Pcm, PhoneTiming, ScoreKind,
    ScoreTable,
};
pub use formant::{f3_slope, lpc_fit, track_f3, AnalysisConfig, FormantTrack, LpcModel, SlopeStat};
pub use phoneme::{
    load_inventory, phoneme_distance, unify_tokens, CostConfig, Phoneme, PhonemeInventory,
    UnifiedTokenMap,
};

/// Crate version, embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
