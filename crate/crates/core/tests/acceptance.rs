//! Acceptance suite. Runs every criterion with its tolerance and time limit
//! and prints one PASS/FAIL line per criterion. Exits nonzero on any failure.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhotica::alignment::{align, find_rhotic_contrasts, ContextKind, RhoticSide};
use rhotica::augment::{build_tts_corpus, plan_vc_jobs, run_adapter, to_jsonl, AdapterConfig};
use rhotica::corpus::{parse_scores, ScoreKind};
use rhotica::formant::{autocorrelation, levinson_durbin, preprocess, AnalysisConfig};
use rhotica::phoneme::{builtin_inventory, CostConfig};
use rhotica::pipeline::{measure_contexts, place_contexts};
use rhotica::stats::{
    holm_bonferroni, mushra_summary, slope_comparison, t_test, t_two_sided_p, ContextSlope,
    MushraOptions,
};

use common::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn car_park() -> Outcome {
    let gb = builtin_inventory("en-GB").unwrap();
    let us = builtin_inventory("en-US").unwrap();
    let a = gb.parse_sequence("k A: p A: k").unwrap();
    let b = us.parse_sequence("k A: r p A: r k").unwrap();
    let path = align(&a, &b, &CostConfig::default()).map_err(|e| e.to_string())?;
    // Each en-GB /A:/ (indices 1, 3) covers en-US /A: r/ (1-2, 4-5).
    let expected = vec![(0, 0), (1, 1), (1, 2), (2, 3), (3, 4), (3, 5), (4, 6)];
    ensure(path.steps == expected, || format!("path {:?}", path.steps))?;
    let contexts = find_rhotic_contrasts(&path, &b, &a, RhoticSide::B, "car_park")
        .map_err(|e| e.to_string())?;
    let spans: Vec<_> = contexts
        .iter()
        .map(|c| (c.kind, c.rhotic_span, c.nonrhotic_index))
        .collect();
    ensure(
        spans
            == vec![
                (ContextKind::RInsertion, (1, 2), 1),
                (ContextKind::RInsertion, (4, 5), 3),
            ],
        || format!("contexts {spans:?}"),
    )?;
    Ok(format!("path {:?}, 2 r_insertion contexts", path.steps))
}

fn thirteen() -> Outcome {
    let gb = builtin_inventory("en-GB").unwrap();
    let us = builtin_inventory("en-US").unwrap();
    let a = us.parse_sequence("T 3` t i: n").unwrap();
    let b = gb.parse_sequence("T 3: t i: n").unwrap();
    let path = align(&a, &b, &CostConfig::default()).map_err(|e| e.to_string())?;
    let contexts = find_rhotic_contrasts(&path, &a, &b, RhoticSide::A, "thirteen")
        .map_err(|e| e.to_string())?;
    ensure(
        contexts.len() == 1 && contexts[0].kind == ContextKind::RhotacizedVowel,
        || format!("contexts {contexts:?}"),
    )?;
    ensure(
        contexts[0].rhotic_span == (1, 1) && contexts[0].nonrhotic_index == 1,
        || format!("context at {:?}", contexts[0]),
    )?;
    Ok("1 rhotacized_vowel context at /3`/ vs /3:/".into())
}

fn dtw_oracle() -> Outcome {
    let cfg = CostConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen = BTreeSet::new();
    let mut max_paths = 0;
    for k in 0..10_000 {
        let sa = random_sequence(&mut rng, 6);
        let sb = random_sequence(&mut rng, 6);
        let (a, b) = (en_us(&sa), en_us(&sb));
        let path = align(&a, &b, &cfg).map_err(|e| e.to_string())?;
        let oracle = brute_force_dtw(&a, &b, &cfg);
        ensure(path.total_cost == oracle, || {
            format!(
                "pair {k} {sa:?}/{sb:?}: dp {} vs enumeration {oracle}",
                path.total_cost
            )
        })?;
        ensure(path.is_valid_for(a.len(), b.len()), || {
            format!("pair {k}: invalid path")
        })?;
        seen.insert((sa.len(), sb.len()));
        max_paths = max_paths.max(count_paths(a.len(), b.len()));
    }
    Ok(format!(
        "10000 pairs exact, {} length combinations, up to {max_paths} paths per pair",
        seen.len()
    ))
}

fn formant_recovery() -> Outcome {
    let cfg = AnalysisConfig::default();
    let order = cfg.order_for(SAMPLE_RATE);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut recovered = 0;
    let mut worst_ld = 0.0f64;
    let mut misses = Vec::new();
    for case_idx in 0..100u64 {
        let case = random_formant_case(&mut rng, case_idx);
        let pcm = render_case(&case, 0.5);
        let got = median_formants(&pcm, &cfg);
        if recovered_within(&case, &got, 50.0) {
            recovered += 1;
        } else {
            misses.push(case_idx);
        }
        for frame in preprocess(&pcm, cfg.frame_ms, cfg.hop_ms, cfg.preemphasis).unwrap() {
            let r = autocorrelation(&frame, order);
            let fast = levinson_durbin(&r, order).map_err(|e| e.to_string())?;
            let dense = dense_lpc(&r, order);
            let err = fast
                .coefficients
                .iter()
                .zip(&dense)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            worst_ld = worst_ld.max(err);
        }
    }
    ensure(worst_ld <= 1e-8, || {
        format!("Levinson-Durbin vs dense solve differs by {worst_ld:e}")
    })?;
    ensure(recovered >= 95, || {
        format!("{recovered}/100 recovered; misses {misses:?}")
    })?;
    Ok(format!(
        "{recovered}/100 within 50 Hz, max |LD - dense| {worst_ld:.1e}"
    ))
}

fn rhoticity_end_to_end() -> Outcome {
    let cfg = AnalysisConfig::default();
    let mut per_system: BTreeMap<String, Vec<ContextSlope>> = BTreeMap::new();
    for (name, system) in [("falling", MiniSystem::Falling), ("flat", MiniSystem::Flat)] {
        let mut slopes = Vec::new();
        for utt in mini_corpus(system, 20) {
            let placed = place_contexts(&utt.group, &utt.timings, utt.realization)
                .map_err(|e| e.to_string())?;
            for m in measure_contexts(&utt.pcm, &placed, &cfg).map_err(|e| e.to_string())? {
                slopes.extend(m.slope);
            }
        }
        per_system.insert(name.to_string(), slopes);
    }
    let report = slope_comparison(&per_system, 0.05).map_err(|e| e.to_string())?;
    let mean = |s: &str| {
        report
            .systems
            .iter()
            .find(|x| x.system == s)
            .unwrap()
            .mean_ols_slope
    };
    let (falling, flat) = (mean("falling"), mean("flat"));
    let cmp = &report.comparisons[0];
    ensure(falling < -3000.0, || {
        format!("falling mean slope {falling:.0} Hz/s")
    })?;
    ensure(flat.abs() <= 500.0, || {
        format!("flat mean slope {flat:.0} Hz/s")
    })?;
    ensure(cmp.rejected, || format!("comparison not rejected: {cmp:?}"))?;
    Ok(format!(
        "falling {falling:.0} Hz/s over {} contexts, flat {flat:.0} Hz/s over {}, {} p = {:.2e}",
        per_system["falling"].len(),
        per_system["flat"].len(),
        if cmp.paired { "paired" } else { "Welch" },
        cmp.adjusted_p
    ))
}

fn statistics_vectors() -> Outcome {
    let holm = holm_bonferroni(&[0.01, 0.03, 0.04], 0.05).map_err(|e| e.to_string())?;
    let rejected: Vec<bool> = holm.iter().map(|h| h.rejected).collect();
    ensure(rejected == [true, false, false], || {
        format!("holm example {rejected:?}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for v in 0..1000 {
        let m = rng.gen_range(1..=20);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                let u: f64 = rng.gen();
                u.powi(rng.gen_range(1..=4))
            })
            .collect();
        let h = holm_bonferroni(&p, 0.05).map_err(|e| e.to_string())?;
        for (pi, hi) in p.iter().zip(&h) {
            let bonferroni = *pi <= 0.05 / m as f64;
            ensure(!bonferroni || hi.rejected, || format!("vector {v}: {p:?}"))?;
        }
    }

    let xs = [61.0, 74.0, 58.0, 90.0, 45.0];
    let same = t_test(&xs, &xs, true, 0.05).map_err(|e| e.to_string())?;
    ensure(same.t == 0.0 && same.p == 1.0, || {
        format!("identical samples gave {same:?}")
    })?;

    let table = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/t_pvalues.csv"
    ))
    .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut rows = 0;
    for line in table.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let err = (t_two_sided_p(f[0], f[1]) - f[2]).abs();
        ensure(err <= 1e-10, || {
            format!("t = {}, df = {}: error {err:e}", f[0], f[1])
        })?;
        worst = worst.max(err);
        rows += 1;
    }
    Ok(format!(
        "holm example ok, 1000 vectors holm ⊇ bonferroni, {rows} t rows max error {worst:.1e}"
    ))
}

fn mushra_fixture_means() -> Outcome {
    let csv = mushra_fixture(&[("sys_a", 7233), ("sys_b", 4724)]).to_csv();
    let table = parse_scores(&csv, ScoreKind::Mushra).map_err(|e| e.to_string())?;
    let s = mushra_summary(&table, &MushraOptions::default()).map_err(|e| e.to_string())?;
    let means: Vec<f64> = s.systems.iter().map(|x| x.mean).collect();
    ensure(means == [72.33, 47.24], || format!("means {means:?}"))?;
    ensure(s.best_group.iter().collect::<Vec<_>>() == ["sys_a"], || {
        format!("best group {:?}", s.best_group)
    })?;
    Ok(format!(
        "means {:?}, best group {:?}, holm p {:.1e}",
        means, s.best_group, s.comparisons[0].adjusted_p
    ))
}

fn augmentation_bookkeeping() -> Outcome {
    let manifest = corpus_manifest(25_000, &[("ie01", 2000)]);
    let jobs = plan_vc_jobs(&manifest, None).map_err(|e| e.to_string())?;
    let again = plan_vc_jobs(&manifest, None).map_err(|e| e.to_string())?;
    ensure(jobs.len() == 2000, || format!("{} jobs", jobs.len()))?;
    ensure(to_jsonl(&jobs) == to_jsonl(&again), || {
        "re-planning changed the job list".into()
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (input, output) = (dir.path().join("in"), dir.path().join("out"));
    write_source_audio(&manifest, "ie01", &input);
    let run = |parallelism: usize| {
        let cfg = AdapterConfig {
            template: r#"sh -c 'cp "$1" "$2"' adapter {input} {output} {donor}"#.into(),
            parallelism,
            input_root: input.clone(),
            output_root: output.clone(),
        };
        let statuses = run_adapter(&jobs, &cfg).map_err(|e| e.to_string())?;
        let corpus = build_tts_corpus(&manifest, &jobs, &output).map_err(|e| e.to_string())?;
        Ok::<_, String>((to_jsonl(&statuses), statuses, corpus))
    };
    let (serial, statuses, corpus) = run(1)?;
    let (parallel, _, corpus4) = run(4)?;
    ensure(statuses.iter().all(|s| s.is_ok()), || {
        "some identity jobs failed".into()
    })?;
    ensure(serial == parallel, || {
        "status report depends on parallelism".into()
    })?;
    ensure(corpus == corpus4, || {
        "training manifest depends on parallelism".into()
    })?;
    for job in &jobs {
        let a = std::fs::read(input.join(&job.source_audio)).map_err(|e| e.to_string())?;
        let b = std::fs::read(output.join(&job.output)).map_err(|e| e.to_string())?;
        ensure(a == b, || {
            format!("job {} output differs from input", job.id)
        })?;
    }
    ensure(corpus.synthetic_count() == 2000, || {
        format!("{} synthetic", corpus.synthetic_count())
    })?;
    ensure(corpus.donor_voice_count() == 27_000, || {
        format!("{} donor-voice entries", corpus.donor_voice_count())
    })?;
    ensure(corpus.entries.len() == 27_000 + 2000, || {
        format!("{} entries", corpus.entries.len())
    })?;
    Ok(format!(
        "2000 jobs, {} donor-voice entries ({} synthetic en-IE), deterministic at parallelism 1 and 4",
        corpus.donor_voice_count(),
        corpus.totals["en-IE"].synthetic
    ))
}

struct Criterion {
    number: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            number: 1,
            name: "car park pairing",
            limit: Duration::from_secs(1),
            run: car_park,
        },
        Criterion {
            number: 2,
            name: "thirteen substitution",
            limit: Duration::from_secs(1),
            run: thirteen,
        },
        Criterion {
            number: 3,
            name: "DTW oracle equivalence",
            limit: Duration::from_secs(60),
            run: dtw_oracle,
        },
        Criterion {
            number: 4,
            name: "formant recovery",
            limit: Duration::from_secs(120),
            run: formant_recovery,
        },
        Criterion {
            number: 5,
            name: "rhoticity end to end",
            limit: Duration::from_secs(120),
            run: rhoticity_end_to_end,
        },
        Criterion {
            number: 6,
            name: "statistics vectors",
            limit: Duration::from_secs(30),
            run: statistics_vectors,
        },
        Criterion {
            number: 7,
            name: "MUSHRA fixture",
            limit: Duration::from_secs(5),
            run: mushra_fixture_means,
        },
        Criterion {
            number: 8,
            name: "augmentation bookkeeping",
            limit: Duration::from_secs(30),
            run: augmentation_bookkeeping,
        },
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| c.name.contains(f.as_str()) || *f == c.number.to_string())
        {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > c.limit => Err(format!("{detail}; exceeded {:?}", c.limit)),
            other => other,
        };
        let secs = elapsed.as_secs_f64();
        match result {
            Ok(detail) => println!(
                "PASS criterion {} ({}) in {secs:.2}s: {detail}",
                c.number, c.name
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "FAIL criterion {} ({}) in {secs:.2}s: {why}",
                    c.number, c.name
                );
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
