//! Glue between alignment, forced-alignment timings and formant tracking:
//! turns rhotic contexts into time spans of a recording and measures them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::RhoticContext;
use crate::corpus::{Pcm, PhoneTiming};
use crate::formant::{
    f3_slope, track_many, AnalysisConfig, FormantError, FormantTrack, TrackRequest,
};
use crate::stats::ContextSlope;

/// Aligner tokens that carry no phoneme.
pub const SILENCE_TOKENS: [&str; 5] = ["sil", "sp", "spn", "SIL", "<eps>"];

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("utterance {0:?} has no timings")]
    NoTimings(String),
    #[error(
        "utterance {utterance:?}: timings hold {timed} phones but the sequence has {expected}"
    )]
    LengthMismatch {
        utterance: String,
        timed: usize,
        expected: usize,
    },
    #[error("utterance {utterance:?}: phone {index} is {timed:?} in the timings but {expected:?} in the sequence")]
    SymbolMismatch {
        utterance: String,
        index: usize,
        timed: String,
        expected: String,
    },
    #[error("context index {index} outside a sequence of {len} phones")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("formant analysis failed for {key}: {source}")]
    Formant { key: String, source: FormantError },
}

/// Which transcription the recording realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realization {
    /// Span covers the rhotic-side phones of each context.
    #[default]
    Rhotic,
    /// Span covers the non-rhotic-side phone of each context.
    NonRhotic,
}

/// Contexts for one utterance together with the two sequences they index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceContexts {
    pub utterance: String,
    pub seq_rhotic: Vec<String>,
    pub seq_nonrhotic: Vec<String>,
    pub contexts: Vec<RhoticContext>,
}

/// A context placed on the time axis of a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedContext {
    pub key: String,
    pub context: RhoticContext,
    pub span: (f64, f64),
}

/// Key identifying a context independently of which system rendered it.
pub fn context_key(ctx: &RhoticContext) -> String {
    let kind = match ctx.kind {
        crate::alignment::ContextKind::RInsertion => "r_insertion",
        crate::alignment::ContextKind::RhotacizedVowel => "rhotacized_vowel",
    };
    format!(
        "{}:{}:{}-{}",
        ctx.utterance, kind, ctx.rhotic_span.0, ctx.rhotic_span.1
    )
}

/// Places every context of `group` on the time axis using phone timings
/// for the same utterance. Silence tokens are skipped; the remaining phones
/// must match the realized sequence symbol for symbol.
pub fn place_contexts(
    group: &UtteranceContexts,
    timings: &[PhoneTiming],
    realization: Realization,
) -> Result<Vec<TimedContext>, PipelineError> {
    let phones: Vec<&PhoneTiming> = timings
        .iter()
        .filter(|t| t.utterance == group.utterance && !SILENCE_TOKENS.contains(&t.symbol.as_str()))
        .collect();
    if phones.is_empty() {
        return Err(PipelineError::NoTimings(group.utterance.clone()));
    }
    let sequence = match realization {
        Realization::Rhotic => &group.seq_rhotic,
        Realization::NonRhotic => &group.seq_nonrhotic,
    };
    if phones.len() != sequence.len() {
        return Err(PipelineError::LengthMismatch {
            utterance: group.utterance.clone(),
            timed: phones.len(),
            expected: sequence.len(),
        });
    }
    for (index, (t, s)) in phones.iter().zip(sequence).enumerate() {
        if &t.symbol != s {
            return Err(PipelineError::SymbolMismatch {
                utterance: group.utterance.clone(),
                index,
                timed: t.symbol.clone(),
                expected: s.clone(),
            });
        }
    }
    let check = |index: usize| {
        if index < phones.len() {
            Ok(())
        } else {
            Err(PipelineError::IndexOutOfRange {
                index,
                len: phones.len(),
            })
        }
    };
    group
        .contexts
        .iter()
        .map(|ctx| {
            let (first, last) = match realization {
                Realization::Rhotic => ctx.rhotic_span,
                Realization::NonRhotic => (ctx.nonrhotic_index, ctx.nonrhotic_index),
            };
            check(first)?;
            check(last)?;
            Ok(TimedContext {
                key: context_key(ctx),
                context: ctx.clone(),
                span: (phones[first].start, phones[last].end()),
            })
        })
        .collect()
}

/// Result of measuring one timed context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredContext {
    pub key: String,
    pub track: FormantTrack,
    /// `None` when fewer than two frames carried an F3 estimate.
    pub slope: Option<ContextSlope>,
}

/// Tracks F3 over every context (in parallel) and computes its slope.
pub fn measure_contexts(
    pcm: &Pcm,
    contexts: &[TimedContext],
    cfg: &AnalysisConfig,
) -> Result<Vec<MeasuredContext>, PipelineError> {
    let requests: Vec<TrackRequest<'_>> = contexts
        .iter()
        .map(|c| TrackRequest {
            pcm,
            span: c.span,
            utterance: c.context.utterance.clone(),
        })
        .collect();
    track_many(&requests, cfg)
        .into_iter()
        .zip(contexts)
        .map(|(track, c)| {
            let track = track.map_err(|source| PipelineError::Formant {
                key: c.key.clone(),
                source,
            })?;
            let slope = match f3_slope(&track) {
                Ok(stat) => Some(ContextSlope {
                    context: c.key.clone(),
                    stat,
                }),
                Err(e) => {
                    log::warn!("context {}: no slope ({e})", c.key);
                    None
                }
            };
            Ok(MeasuredContext {
                key: c.key.clone(),
                track,
                slope,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{align, find_rhotic_contrasts, RhoticSide};
    use crate::phoneme::{builtin_inventory, CostConfig};

    fn car_park() -> UtteranceContexts {
        let gb = builtin_inventory("en-GB").unwrap();
        let us = builtin_inventory("en-US").unwrap();
        let a = gb.parse_sequence("k A: p A: k").unwrap();
        let b = us.parse_sequence("k A: r p A: r k").unwrap();
        let path = align(&a, &b, &CostConfig::default()).unwrap();
        let contexts = find_rhotic_contrasts(&path, &b, &a, RhoticSide::B, "u1").unwrap();
        UtteranceContexts {
            utterance: "u1".into(),
            seq_rhotic: b.iter().map(|p| p.symbol().to_string()).collect(),
            seq_nonrhotic: a.iter().map(|p| p.symbol().to_string()).collect(),
            contexts,
        }
    }

    fn timings(symbols: &[&str]) -> Vec<PhoneTiming> {
        let mut t = vec![PhoneTiming {
            utterance: "u1".into(),
            symbol: "sil".into(),
            start: 0.0,
            duration: 0.1,
        }];
        for (i, s) in symbols.iter().enumerate() {
            t.push(PhoneTiming {
                utterance: "u1".into(),
                symbol: s.to_string(),
                start: 0.1 + 0.1 * i as f64,
                duration: 0.1,
            });
        }
        t
    }

    #[test]
    fn rhotic_spans_cover_vowel_and_r() {
        let g = car_park();
        let placed = place_contexts(
            &g,
            &timings(&["k", "A:", "r", "p", "A:", "r", "k"]),
            Realization::Rhotic,
        )
        .unwrap();
        assert_eq!(placed.len(), 2);
        assert!((placed[0].span.0 - 0.2).abs() < 1e-12 && (placed[0].span.1 - 0.4).abs() < 1e-12);
        assert!((placed[1].span.0 - 0.5).abs() < 1e-12 && (placed[1].span.1 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn nonrhotic_spans_cover_the_vowel() {
        let g = car_park();
        let placed = place_contexts(
            &g,
            &timings(&["k", "A:", "p", "A:", "k"]),
            Realization::NonRhotic,
        )
        .unwrap();
        assert!((placed[1].span.0 - 0.4).abs() < 1e-12 && (placed[1].span.1 - 0.5).abs() < 1e-12);
        // Same keys whichever side was recorded.
        let rhotic = place_contexts(
            &g,
            &timings(&["k", "A:", "r", "p", "A:", "r", "k"]),
            Realization::Rhotic,
        )
        .unwrap();
        assert_eq!(placed[0].key, rhotic[0].key);
    }

    #[test]
    fn mismatched_timings_rejected() {
        let g = car_park();
        assert!(matches!(
            place_contexts(&g, &timings(&["k", "A:", "p"]), Realization::NonRhotic),
            Err(PipelineError::LengthMismatch { .. })
        ));
        assert!(matches!(
            place_contexts(
                &g,
                &timings(&["k", "A:", "b", "A:", "k"]),
                Realization::NonRhotic
            ),
            Err(PipelineError::SymbolMismatch { index: 2, .. })
        ));
        assert_eq!(
            place_contexts(&g, &[], Realization::Rhotic),
            Err(PipelineError::NoTimings("u1".into()))
        );
    }
}
