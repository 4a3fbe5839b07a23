//! Oracles and fixtures shared by the integration, property and acceptance
//! tests.
#![allow(dead_code)]

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhotica::alignment::{align, find_rhotic_contrasts, RhoticSide};
use rhotica::corpus::{
    write_wav, CorpusManifest, Pcm, PhoneTiming, ScoreKind, ScoreRow, ScoreTable, ScoreValue,
    Speaker, UtteranceRecord, WavEncoding,
};
use rhotica::formant::{track_f3, AnalysisConfig, TrackFrame};
use rhotica::phoneme::{builtin_inventory, phoneme_distance, CostConfig, Phoneme};
use rhotica::pipeline::{Realization, UtteranceContexts};
use rhotica::stats::exact_sum;
use rhotica::synth::{synthesize_tilted, Resonance};

// ---------------------------------------------------------------------------
// DTW oracle

/// Minimum cost over every monotone path, found by explicit enumeration.
/// Costs are accumulated from the start cell forward.
pub fn brute_force_dtw(a: &[Phoneme], b: &[Phoneme], cfg: &CostConfig) -> f64 {
    fn walk(
        i: usize,
        j: usize,
        acc: f64,
        a: &[Phoneme],
        b: &[Phoneme],
        cfg: &CostConfig,
        best: &mut f64,
    ) {
        if i == a.len() - 1 && j == b.len() - 1 {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(
                i + 1,
                j + 1,
                acc + phoneme_distance(&a[i + 1], &b[j + 1], cfg),
                a,
                b,
                cfg,
                best,
            );
        }
        if j + 1 < b.len() {
            walk(i, j + 1, acc + cfg.indel_cost, a, b, cfg, best);
        }
        if i + 1 < a.len() {
            walk(i + 1, j, acc + cfg.indel_cost, a, b, cfg, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(
        0,
        0,
        phoneme_distance(&a[0], &b[0], cfg),
        a,
        b,
        cfg,
        &mut best,
    );
    best
}

/// Number of monotone paths through an n×m grid (Delannoy number).
pub fn count_paths(n: usize, m: usize) -> u64 {
    let mut d = vec![vec![0u64; m]; n];
    for i in 0..n {
        for j in 0..m {
            d[i][j] = if i == 0 || j == 0 {
                1
            } else {
                d[i - 1][j - 1] + d[i - 1][j] + d[i][j - 1]
            };
        }
    }
    d[n - 1][m - 1]
}

pub const DTW_ALPHABET: [&str; 5] = ["A:", "r", "3`", "p", "i:"];

pub fn en_us(symbols: &[&str]) -> Vec<Phoneme> {
    builtin_inventory("en-US")
        .unwrap()
        .resolve(symbols.iter().copied())
        .unwrap()
}

pub fn random_sequence(rng: &mut impl Rng, max_len: usize) -> Vec<&'static str> {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| DTW_ALPHABET[rng.gen_range(0..DTW_ALPHABET.len())])
        .collect()
}

// ---------------------------------------------------------------------------
// LPC oracle

/// Solves the normal equations R a = r of order `p` with a dense LU
/// factorization of the full Toeplitz matrix, refined until the update
/// vanishes. Residuals are formed from exact products (fma) and an exactly
/// rounded sum, so the result is accurate to working precision for condition
/// numbers well below 1e16.
pub fn dense_lpc(r: &[f64], p: usize) -> Vec<f64> {
    let m = DMatrix::from_fn(p, p, |i, j| r[i.abs_diff(j)]);
    let rhs = DVector::from_iterator(p, r[1..=p].iter().copied());
    let lu = m.clone().lu();
    let mut x = lu
        .solve(&rhs)
        .expect("autocorrelation matrix is nonsingular");
    for _ in 0..10 {
        let residual = DVector::from_fn(p, |i, _| {
            let mut terms = vec![rhs[i]];
            for j in 0..p {
                let prod = m[(i, j)] * x[j];
                terms.push(-prod);
                terms.push(-m[(i, j)].mul_add(x[j], -prod));
            }
            exact_sum(terms)
        });
        let delta = lu.solve(&residual).unwrap();
        x += &delta;
        if delta.amax() <= f64::EPSILON * x.amax() {
            break;
        }
    }
    x.iter().copied().collect()
}

// ---------------------------------------------------------------------------
// Formant fixtures

pub const SAMPLE_RATE: u32 = 16_000;
/// Source spectral tilt matching the default pre-emphasis.
pub const SOURCE_TILT: f64 = 0.97;

#[derive(Debug, Clone)]
pub struct FormantCase {
    pub resonances: Vec<Resonance>,
    pub seed: u64,
}

/// Three resonances in [300, 3400] Hz at least 500 Hz apart, bandwidths
/// 60-150 Hz.
pub fn random_formant_case(rng: &mut impl Rng, seed: u64) -> FormantCase {
    let freqs = loop {
        let mut f: Vec<f64> = (0..3).map(|_| rng.gen_range(300.0..=3400.0)).collect();
        f.sort_by(f64::total_cmp);
        if f[1] - f[0] >= 500.0 && f[2] - f[1] >= 500.0 {
            break f;
        }
    };
    FormantCase {
        resonances: freqs
            .into_iter()
            .map(|f| Resonance::new(f, rng.gen_range(60.0..=150.0)))
            .collect(),
        seed,
    }
}

pub fn render_case(case: &FormantCase, duration: f64) -> Pcm {
    let res = case.resonances.clone();
    synthesize_tilted(duration, SAMPLE_RATE, case.seed, SOURCE_TILT, move |_| {
        res.clone()
    })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

/// Median F1, F2, F3 over all frames of the recording.
pub fn median_formants(pcm: &Pcm, cfg: &AnalysisConfig) -> [Option<f64>; 3] {
    let track = track_f3(pcm, (0.0, pcm.duration()), cfg, "case").unwrap();
    let pick =
        |f: fn(&TrackFrame) -> Option<f64>| median(track.frames.iter().filter_map(f).collect());
    [
        pick(|fr| fr.f1.map(|x| x.frequency)),
        pick(|fr| fr.f2.map(|x| x.frequency)),
        pick(|fr| fr.f3.map(|x| x.frequency)),
    ]
}

pub fn recovered_within(case: &FormantCase, got: &[Option<f64>; 3], tol: f64) -> bool {
    case.resonances
        .iter()
        .zip(got)
        .all(|(r, g)| g.is_some_and(|g| (g - r.frequency).abs() <= tol))
}

// ---------------------------------------------------------------------------
// Rhoticity mini-corpus

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiniSystem {
    /// Rhotic realization; F3 falls through each vowel + /r/ span.
    Falling,
    /// Non-rhotic realization; F3 stays level.
    Flat,
}

pub struct MiniUtterance {
    pub group: UtteranceContexts,
    pub pcm: Pcm,
    pub timings: Vec<PhoneTiming>,
    pub realization: Realization,
}

const RHOTIC_WORD: [&str; 7] = ["k", "A:", "r", "p", "A:", "r", "k"];
const NONRHOTIC_WORD: [&str; 5] = ["k", "A:", "p", "A:", "k"];

pub fn mini_contexts(utterance: &str) -> UtteranceContexts {
    let gb = builtin_inventory("en-GB").unwrap();
    let us = builtin_inventory("en-US").unwrap();
    let a = gb.resolve(NONRHOTIC_WORD.iter().copied()).unwrap();
    let b = us.resolve(RHOTIC_WORD.iter().copied()).unwrap();
    let path = align(&a, &b, &CostConfig::default()).unwrap();
    let contexts = find_rhotic_contrasts(&path, &b, &a, RhoticSide::B, utterance).unwrap();
    UtteranceContexts {
        utterance: utterance.to_string(),
        seq_rhotic: RHOTIC_WORD.iter().map(|s| s.to_string()).collect(),
        seq_nonrhotic: NONRHOTIC_WORD.iter().map(|s| s.to_string()).collect(),
        contexts,
    }
}

/// One utterance of `system`: silence, the word, silence. Phone durations,
/// formant targets and noise differ per utterance index.
pub fn mini_utterance(system: MiniSystem, index: usize) -> MiniUtterance {
    let id = format!("utt{index:02}");
    let group = mini_contexts(&id);
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + index as u64);
    let word: &[&str] = match system {
        MiniSystem::Falling => &RHOTIC_WORD,
        MiniSystem::Flat => &NONRHOTIC_WORD,
    };
    let lead = 0.1;
    let mut timings = vec![PhoneTiming {
        utterance: id.clone(),
        symbol: "sil".into(),
        start: 0.0,
        duration: lead,
    }];
    let mut t = lead;
    for sym in word {
        let duration = rng.gen_range(0.09..0.13);
        timings.push(PhoneTiming {
            utterance: id.clone(),
            symbol: sym.to_string(),
            start: t,
            duration,
        });
        t += duration;
    }
    timings.push(PhoneTiming {
        utterance: id.clone(),
        symbol: "sil".into(),
        start: t,
        duration: lead,
    });
    let total = t + lead;

    let f3_high: f64 = rng.gen_range(2550.0..2800.0);
    let f3_low: f64 = rng.gen_range(1650.0..1800.0);
    let f3_flat: f64 = rng.gen_range(2400.0..2600.0);
    // Spans over which F3 falls: each vowel + following /r/.
    let spans: Vec<(f64, f64)> = match system {
        MiniSystem::Falling => group
            .contexts
            .iter()
            .map(|c| {
                (
                    timings[1 + c.rhotic_span.0].start,
                    timings[1 + c.rhotic_span.1].end(),
                )
            })
            .collect(),
        MiniSystem::Flat => Vec::new(),
    };
    let phone_at = {
        let timings = timings.clone();
        move |time: f64| {
            timings
                .iter()
                .find(|p| time >= p.start && time < p.end())
                .map_or("sil".to_string(), |p| p.symbol.clone())
        }
    };
    let seed = rng.gen::<u64>();
    let pcm = synthesize_tilted(total, SAMPLE_RATE, seed, SOURCE_TILT, move |time| {
        let (f1, f2) = match phone_at(time).as_str() {
            "A:" => (700.0, 1150.0),
            "r" => (450.0, 1100.0),
            _ => (500.0, 1400.0),
        };
        let f3 = match system {
            MiniSystem::Flat => f3_flat,
            MiniSystem::Falling => spans
                .iter()
                .find(|(s, e)| time >= *s && time < *e)
                .map_or(f3_high, |(s, e)| {
                    f3_high + (f3_low - f3_high) * (time - s) / (e - s)
                }),
        };
        vec![
            Resonance::new(f1, 90.0),
            Resonance::new(f2, 100.0),
            Resonance::new(f3, 120.0),
        ]
    });
    MiniUtterance {
        group,
        pcm,
        timings,
        realization: match system {
            MiniSystem::Falling => Realization::Rhotic,
            MiniSystem::Flat => Realization::NonRhotic,
        },
    }
}

pub fn mini_corpus(system: MiniSystem, count: usize) -> Vec<MiniUtterance> {
    (0..count).map(|i| mini_utterance(system, i)).collect()
}

// ---------------------------------------------------------------------------
// Listening-test and manifest fixtures

/// MUSHRA table with 4 listeners × 25 testcases per system whose integer
/// ratings sum to `sums[k]`, so each mean is exactly `sums[k] / 100`.
pub fn mushra_fixture(systems: &[(&str, i64)]) -> ScoreTable {
    let mut rows = Vec::new();
    for (s_idx, &(system, sum)) in systems.iter().enumerate() {
        let base = sum / 100;
        let mut values: Vec<i64> = (0..100)
            .map(|k| base + ((k * 37 + s_idx * 11) % 21) as i64 - 10)
            .collect();
        let mut diff = sum - values.iter().sum::<i64>();
        let mut k = 0;
        while diff != 0 {
            let step = diff.signum();
            if (0..=100).contains(&(values[k % 100] + step)) {
                values[k % 100] += step;
                diff -= step;
            }
            k += 7;
        }
        for (k, v) in values.into_iter().enumerate() {
            rows.push(ScoreRow {
                listener: format!("L{}", k / 25 + 1),
                testcase: format!("T{:02}", k % 25 + 1),
                system: system.to_string(),
                score: ScoreValue::Rating(v as f64),
            });
        }
    }
    ScoreTable {
        kind: ScoreKind::Mushra,
        rows,
    }
}

fn utterances(speaker: &str, n: usize) -> Vec<UtteranceRecord> {
    (0..n)
        .map(|i| UtteranceRecord {
            id: format!("{speaker}_{i:05}"),
            audio: format!("{speaker}/{speaker}_{i:05}.wav"),
            text: String::new(),
        })
        .collect()
}

/// Donor with `donor_utts` recordings plus target-accent speakers with the
/// given utterance counts.
pub fn corpus_manifest(donor_utts: usize, targets: &[(&str, usize)]) -> CorpusManifest {
    let mut speakers = vec![Speaker {
        id: "donor".into(),
        accent: "en-GB".into(),
        utterances: utterances("donor", donor_utts),
    }];
    for &(id, n) in targets {
        speakers.push(Speaker {
            id: id.into(),
            accent: "en-IE".into(),
            utterances: utterances(id, n),
        });
    }
    CorpusManifest {
        donor: "donor".into(),
        target_accent: "en-IE".into(),
        speakers,
    }
}

/// Writes a short distinct WAV for every utterance of `speaker` under `root`.
pub fn write_source_audio(manifest: &CorpusManifest, speaker: &str, root: &Path) {
    let s = manifest.speaker(speaker).unwrap();
    for (i, u) in s.utterances.iter().enumerate() {
        let path = root.join(&u.audio);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        let pcm = Pcm {
            samples: vec![(i % 97) as f64 / 100.0; 16],
            sample_rate: SAMPLE_RATE,
        };
        std::fs::write(path, write_wav(&pcm, WavEncoding::Pcm16)).unwrap();
    }
}
