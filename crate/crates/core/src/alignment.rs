//! Global DTW alignment of two phoneme sequences and detection of the
//! rhotic-contrast contexts the alignment exposes.
//!
//! Cost model: the start cell and every diagonal step pay the substitution
//! cost of the pair they land on; every horizontal or vertical step pays the
//! constant `indel_cost`.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phoneme::{phoneme_distance, CostConfig, Phoneme};

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("cannot align an empty phoneme sequence")]
    EmptySequence,
    #[error("path does not fit sequences of length {len_a} and {len_b}")]
    PathMismatch { len_a: usize, len_b: usize },
}

/// Monotone path through the (A, B) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPath {
    pub steps: Vec<(usize, usize)>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Diagonal,
    /// Advance in B only: one A element covers several B elements.
    ExpandA,
    /// Advance in A only.
    ExpandB,
}

impl AlignmentPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Step kind that arrives at `steps[k]`; `None` for the start cell.
    pub fn step_into(&self, k: usize) -> Option<Step> {
        if k == 0 {
            return None;
        }
        let (pi, pj) = self.steps[k - 1];
        let (i, j) = self.steps[k];
        match (i - pi, j - pj) {
            (1, 1) => Some(Step::Diagonal),
            (0, 1) => Some(Step::ExpandA),
            (1, 0) => Some(Step::ExpandB),
            _ => unreachable!("invalid step in alignment path"),
        }
    }

    /// Checks the structural invariants against sequence lengths.
    pub fn is_valid_for(&self, len_a: usize, len_b: usize) -> bool {
        if len_a == 0 || len_b == 0 {
            return false;
        }
        if self.steps.first() != Some(&(0, 0)) || self.steps.last() != Some(&(len_a - 1, len_b - 1))
        {
            return false;
        }
        self.steps.windows(2).all(|w| {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            matches!((di, dj), (1, 1) | (1, 0) | (0, 1))
        })
    }

    /// Recomputes the cost of this path from scratch.
    pub fn recompute_cost(
        &self,
        seq_a: &[Phoneme],
        seq_b: &[Phoneme],
        cfg: &CostConfig,
    ) -> Result<f64, AlignError> {
        if !self.is_valid_for(seq_a.len(), seq_b.len()) {
            return Err(AlignError::PathMismatch {
                len_a: seq_a.len(),
                len_b: seq_b.len(),
            });
        }
        Ok(path_cost(&self.steps, seq_a, seq_b, cfg))
    }
}

pub(crate) fn path_cost(
    steps: &[(usize, usize)],
    seq_a: &[Phoneme],
    seq_b: &[Phoneme],
    cfg: &CostConfig,
) -> f64 {
    let sub = |(i, j): (usize, usize)| phoneme_distance(&seq_a[i], &seq_b[j], cfg);
    let mut cost = sub(steps[0]);
    for w in steps.windows(2) {
        if w[1].0 > w[0].0 && w[1].1 > w[0].1 {
            cost += sub(w[1]);
        } else {
            cost += cfg.indel_cost;
        }
    }
    cost
}

/// Cost-optimal alignment under the step set {(1,1), (0,1), (1,0)}.
///
/// Traceback prefers (1,1), then (0,1), then (1,0) when predecessors tie.
pub fn align(
    seq_a: &[Phoneme],
    seq_b: &[Phoneme],
    cfg: &CostConfig,
) -> Result<AlignmentPath, AlignError> {
    let (n, m) = (seq_a.len(), seq_b.len());
    if n == 0 || m == 0 {
        return Err(AlignError::EmptySequence);
    }
    let sub = |i: usize, j: usize| phoneme_distance(&seq_a[i], &seq_b[j], cfg);
    let idx = |i: usize, j: usize| i * m + j;
    let mut acc = vec![f64::INFINITY; n * m];

    acc[0] = sub(0, 0);
    for j in 1..m {
        acc[idx(0, j)] = acc[idx(0, j - 1)] + cfg.indel_cost;
    }
    for i in 1..n {
        acc[idx(i, 0)] = acc[idx(i - 1, 0)] + cfg.indel_cost;
        for j in 1..m {
            let diag = acc[idx(i - 1, j - 1)] + sub(i, j);
            let left = acc[idx(i, j - 1)] + cfg.indel_cost;
            let up = acc[idx(i - 1, j)] + cfg.indel_cost;
            acc[idx(i, j)] = diag.min(left).min(up);
        }
    }

    let mut steps = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (n - 1, m - 1);
    steps.push((i, j));
    while (i, j) != (0, 0) {
        let here = acc[idx(i, j)];
        // The stored minimum is bitwise equal to whichever candidate produced it.
        if i > 0 && j > 0 && acc[idx(i - 1, j - 1)] + sub(i, j) == here {
            i -= 1;
            j -= 1;
        } else if j > 0 && acc[idx(i, j - 1)] + cfg.indel_cost == here {
            j -= 1;
        } else {
            i -= 1;
        }
        steps.push((i, j));
    }
    steps.reverse();

    Ok(AlignmentPath {
        steps,
        total_cost: acc[idx(n - 1, m - 1)],
    })
}

/// Which side of an alignment path holds the rhotic-frontend sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoticSide {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    /// Postvocalic /r/ present only in the rhotic sequence.
    RInsertion,
    /// Rhotacized vowel substituted for a plain vowel.
    RhotacizedVowel,
}

/// A site where the rhotic and non-rhotic transcriptions contrast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhoticContext {
    pub utterance: String,
    pub kind: ContextKind,
    /// Inclusive index range in the rhotic sequence.
    pub rhotic_span: (usize, usize),
    pub nonrhotic_index: usize,
}

impl RhoticContext {
    pub fn span(&self) -> RangeInclusive<usize> {
        self.rhotic_span.0..=self.rhotic_span.1
    }
}

/// Extracts rhotic-contrast contexts from an alignment.
///
/// `side` says whether `seq_rhotic` was passed to [`align`] as sequence A or
/// B. A rhotic sequence without any rhotic phoneme yields an empty result and
/// a warning.
pub fn find_rhotic_contrasts(
    path: &AlignmentPath,
    seq_rhotic: &[Phoneme],
    seq_nonrhotic: &[Phoneme],
    side: RhoticSide,
    utterance: &str,
) -> Result<Vec<RhoticContext>, AlignError> {
    let (len_a, len_b) = match side {
        RhoticSide::A => (seq_rhotic.len(), seq_nonrhotic.len()),
        RhoticSide::B => (seq_nonrhotic.len(), seq_rhotic.len()),
    };
    if !path.is_valid_for(len_a, len_b) {
        return Err(AlignError::PathMismatch { len_a, len_b });
    }
    if !seq_rhotic.iter().any(Phoneme::rhotic) {
        log::warn!(
            "utterance {utterance}: declared rhotic sequence has no rhotic phoneme; no contexts"
        );
        return Ok(Vec::new());
    }

    // (rhotic index, non-rhotic index)
    let oriented = |(i, j): (usize, usize)| match side {
        RhoticSide::A => (i, j),
        RhoticSide::B => (j, i),
    };
    let is_vowel_at = |k: usize| seq_rhotic.get(k).is_some_and(Phoneme::is_vowel);

    let mut out = Vec::new();
    for k in 0..path.steps.len() {
        let (r, nr) = oriented(path.steps[k]);
        let rp = &seq_rhotic[r];
        let np = &seq_nonrhotic[nr];
        let step = path.step_into(k);
        let rhotic_only_advance = matches!(
            (side, step),
            (RhoticSide::A, Some(Step::ExpandB)) | (RhoticSide::B, Some(Step::ExpandA))
        );
        if rhotic_only_advance
            && rp.is_consonant()
            && rp.rhotic()
            && np.is_vowel()
            && r > 0
            && is_vowel_at(r - 1)
            && !is_vowel_at(r + 1)
        {
            out.push(RhoticContext {
                utterance: utterance.to_string(),
                kind: ContextKind::RInsertion,
                rhotic_span: (r - 1, r),
                nonrhotic_index: nr,
            });
        } else if step != Some(Step::ExpandA)
            && step != Some(Step::ExpandB)
            && rp.is_vowel()
            && rp.rhotic()
            && np.is_vowel()
            && !np.rhotic()
        {
            out.push(RhoticContext {
                utterance: utterance.to_string(),
                kind: ContextKind::RhotacizedVowel,
                rhotic_span: (r, r),
                nonrhotic_index: nr,
            });
        }
    }
    out.sort_by_key(|c| c.rhotic_span);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phoneme::builtin_inventory;

    fn seq(accent: &str, text: &str) -> Vec<Phoneme> {
        builtin_inventory(accent)
            .unwrap()
            .parse_sequence(text)
            .unwrap()
    }

    #[test]
    fn car_park_path() {
        let gb = seq("en-GB", "k A: p A: k");
        let us = seq("en-US", "k A: r p A: r k");
        let cfg = CostConfig::default();
        let path = align(&gb, &us, &cfg).unwrap();
        assert_eq!(
            path.steps,
            [(0, 0), (1, 1), (1, 2), (2, 3), (3, 4), (3, 5), (4, 6)]
        );
        assert!((path.total_cost - 2.0 * cfg.indel_cost).abs() < 1e-12);

        let ctx = find_rhotic_contrasts(&path, &us, &gb, RhoticSide::B, "car_park").unwrap();
        assert_eq!(ctx.len(), 2);
        assert!(ctx.iter().all(|c| c.kind == ContextKind::RInsertion));
        assert_eq!(ctx[0].rhotic_span, (1, 2));
        assert_eq!(ctx[1].rhotic_span, (4, 5));
        assert_eq!(ctx[0].nonrhotic_index, 1);
        assert_eq!(ctx[1].nonrhotic_index, 3);
    }

    #[test]
    fn car_park_with_boundary_marker() {
        let gb = seq("en-GB", "k A: . p A: k");
        let us = seq("en-US", "k A: r . p A: r k");
        let path = align(&us, &gb, &CostConfig::default()).unwrap();
        let ctx = find_rhotic_contrasts(&path, &us, &gb, RhoticSide::A, "u").unwrap();
        assert_eq!(ctx.len(), 2);
    }

    #[test]
    fn thirteen_rhotacized_vowel() {
        let us = seq("en-US", "T 3` t i: n");
        let gb = seq("en-GB", "T 3: t i: n");
        let path = align(&us, &gb, &CostConfig::default()).unwrap();
        let ctx = find_rhotic_contrasts(&path, &us, &gb, RhoticSide::A, "thirteen").unwrap();
        assert_eq!(ctx.len(), 1);
        assert_eq!(ctx[0].kind, ContextKind::RhotacizedVowel);
        assert_eq!(ctx[0].rhotic_span, (1, 1));
    }

    #[test]
    fn identical_sequences_align_diagonally() {
        let a = seq("en-GB", "T 3: t i: n");
        let path = align(&a, &a, &CostConfig::default()).unwrap();
        assert_eq!(path.total_cost, 0.0);
        assert!(path.steps.iter().all(|&(i, j)| i == j));
        let ctx = find_rhotic_contrasts(&path, &a, &a, RhoticSide::A, "u").unwrap();
        assert!(ctx.is_empty());
    }

    #[test]
    fn prevocalic_r_is_not_a_context() {
        // "r" followed by a vowel on the rhotic side is not postvocalic-final.
        let us = seq("en-US", "k A: r i:");
        let gb = seq("en-GB", "k A: i:");
        let path = align(&gb, &us, &CostConfig::default()).unwrap();
        let ctx = find_rhotic_contrasts(&path, &us, &gb, RhoticSide::B, "u").unwrap();
        assert!(ctx.is_empty());
    }

    #[test]
    fn empty_sequence_rejected() {
        let a = seq("en-GB", "k");
        assert_eq!(
            align(&a, &[], &CostConfig::default()),
            Err(AlignError::EmptySequence)
        );
    }

    #[test]
    fn path_for_other_sequences_rejected() {
        let a = seq("en-GB", "k A:");
        let path = align(&a, &a, &CostConfig::default()).unwrap();
        let b = seq("en-US", "k A: r");
        assert!(find_rhotic_contrasts(&path, &b, &a, RhoticSide::A, "u").is_err());
    }

    #[test]
    fn recompute_matches_dp() {
        let gb = seq("en-GB", "T 3: t i: n");
        let us = seq("en-US", "T 3` r t i: n");
        let cfg = CostConfig::default();
        let path = align(&gb, &us, &cfg).unwrap();
        let again = path.recompute_cost(&gb, &us, &cfg).unwrap();
        assert!((again - path.total_cost).abs() < 1e-12);
    }
}
