use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rhotica::alignment::RhoticSide;
use rhotica::augment::{self, from_jsonl, AdapterConfig, JobStatus, VcJob};
use rhotica::corpus::{
    parse_ctm, parse_manifest, parse_scores, read_wav, CorpusManifest, PhoneTiming, ScoreKind,
};
use rhotica::phoneme::{
    builtin_inventory, load_inventory, phoneme_distance, Phoneme, PhonemeInventory,
};
use rhotica::pipeline::{
    measure_contexts, place_contexts, MeasuredContext, Realization, TimedContext, UtteranceContexts,
};
use rhotica::stats::{self, ComparisonFamily, ContextSlope, PairingUnit};
use rhotica::{find_rhotic_contrasts, track_f3, unify_tokens, Pcm, SlopeStat};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{check_alpha, Defaults};
use crate::error::{CliError, Context, Result};
use crate::report::{
    load_bundle, read_file, AlignedPair, AlignmentReport, KeyedTrack, Output, Payload,
    PhonemeMapReport, SlopeRow, SlopesReport, StepKind, TokenEntry, TokenRow,
};
use crate::{
    AlignArgs, BuildCorpusArgs, CompareSlopesArgs, F3SlopeArgs, F3TrackArgs, FamilyArg,
    FindContextsArgs, MapPhonemesArgs, MushraArgs, PairingArg, PlanVcArgs, PreferenceArgs,
    RealizationArg, ReportArgs, RunAdapterArgs,
};

const BUILTIN_PREFIX: &str = "builtin:";

fn provenance<A: Serialize>(defaults: &Defaults, args: &A) -> Value {
    json!({ "defaults": defaults, "arguments": args })
}

fn inventory(source: &str) -> Result<PhonemeInventory> {
    match source.strip_prefix(BUILTIN_PREFIX) {
        Some(tag) => builtin_inventory(tag).ok_or_else(|| {
            let known: Vec<&str> = rhotica::phoneme::builtin_accents().collect();
            CliError::Invalid(format!(
                "no built-in inventory {tag:?} (known: {})",
                known.join(", ")
            ))
        }),
        None => {
            let path = Path::new(source);
            load_inventory(&read_file(path)?).context(path.display())
        }
    }
}

fn symbols(seq: &[Phoneme]) -> Vec<String> {
    seq.iter().map(|p| p.symbol().to_string()).collect()
}

/// Non-empty lines that are not `#` comments, with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

pub fn map_phonemes(args: &MapPhonemesArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let inventories = args
        .inventories
        .iter()
        .map(|s| inventory(s))
        .collect::<Result<Vec<_>>>()?;
    let map = unify_tokens(&inventories).context("map-phonemes")?;
    let tokens = map
        .symbols()
        .iter()
        .enumerate()
        .map(|(i, s)| TokenRow {
            token: i as u32,
            symbol: s.clone(),
        })
        .collect();
    let entries = map
        .entries()
        .map(|(accent, symbol, token)| TokenEntry {
            accent: accent.into(),
            symbol: symbol.into(),
            token,
        })
        .collect();
    out.emit(
        &Payload::PhonemeMap(PhonemeMapReport { tokens, entries }),
        provenance(defaults, args),
    )
}

pub fn align(args: &AlignArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let inv_a = inventory(&args.inventory_a)?;
    let inv_b = inventory(&args.inventory_b)?;
    let (text_a, text_b) = match &args.seq_file {
        Some(path) => {
            let text = read_file(path)?;
            let lines: Vec<&str> = content_lines(&text).map(|(_, l)| l).collect();
            if lines.len() != 2 {
                return Err(CliError::Invalid(format!(
                    "{}: expected 2 sequence lines, found {}",
                    path.display(),
                    lines.len()
                )));
            }
            (lines[0].to_string(), lines[1].to_string())
        }
        None => (
            args.seq_a.clone().unwrap_or_default(),
            args.seq_b.clone().unwrap_or_default(),
        ),
    };
    let seq_a = inv_a.parse_sequence(&text_a).context("sequence A")?;
    let seq_b = inv_b.parse_sequence(&text_b).context("sequence B")?;
    let cost = &defaults.cost;
    let path = rhotica::align(&seq_a, &seq_b, cost).context("align")?;
    let steps = path
        .steps
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let step = match path.step_into(k) {
                None => StepKind::Start,
                Some(rhotica::alignment::Step::Diagonal) => StepKind::Diagonal,
                Some(rhotica::alignment::Step::ExpandA) => StepKind::ExpandA,
                Some(rhotica::alignment::Step::ExpandB) => StepKind::ExpandB,
            };
            let cost = match step {
                StepKind::Start | StepKind::Diagonal => {
                    phoneme_distance(&seq_a[a], &seq_b[b], cost)
                }
                StepKind::ExpandA | StepKind::ExpandB => cost.indel_cost,
            };
            AlignedPair {
                a,
                b,
                symbol_a: seq_a[a].symbol().into(),
                symbol_b: seq_b[b].symbol().into(),
                step,
                cost,
            }
        })
        .collect();
    let report = AlignmentReport {
        seq_a: symbols(&seq_a),
        seq_b: symbols(&seq_b),
        total_cost: path.total_cost,
        path: path.steps.clone(),
        steps,
    };
    out.emit(&Payload::Alignment(report), provenance(defaults, args))
}

pub fn find_contexts(args: &FindContextsArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let inv_r = inventory(&args.inventory_rhotic)?;
    let inv_n = inventory(&args.inventory_nonrhotic)?;
    let mut pairs: Vec<(String, String, String)> = Vec::new();
    match &args.seq_file {
        Some(path) => {
            let text = read_file(path)?;
            for (line, l) in content_lines(&text) {
                let fields: Vec<&str> = l.split('\t').collect();
                if fields.len() != 3 {
                    return Err(CliError::Invalid(format!(
                        "{}:{line}: expected 3 tab-separated fields, found {}",
                        path.display(),
                        fields.len()
                    )));
                }
                pairs.push((fields[0].trim().into(), fields[1].into(), fields[2].into()));
            }
        }
        None => pairs.push((
            args.utterance.clone().unwrap_or_default(),
            args.seq_rhotic.clone().unwrap_or_default(),
            args.seq_nonrhotic.clone().unwrap_or_default(),
        )),
    }
    let mut seen = BTreeSet::new();
    let mut groups = Vec::with_capacity(pairs.len());
    for (utt, rhotic, nonrhotic) in pairs {
        if utt.is_empty() {
            return Err(CliError::Invalid("empty utterance id".into()));
        }
        if !seen.insert(utt.clone()) {
            return Err(CliError::Invalid(format!("utterance {utt:?} listed twice")));
        }
        let seq_r = inv_r
            .parse_sequence(&rhotic)
            .context(format!("{utt}: rhotic sequence"))?;
        let seq_n = inv_n
            .parse_sequence(&nonrhotic)
            .context(format!("{utt}: non-rhotic sequence"))?;
        let path = rhotica::align(&seq_n, &seq_r, &defaults.cost).context(&utt)?;
        let contexts =
            find_rhotic_contrasts(&path, &seq_r, &seq_n, RhoticSide::B, &utt).context(&utt)?;
        groups.push(UtteranceContexts {
            utterance: utt,
            seq_rhotic: symbols(&seq_r),
            seq_nonrhotic: symbols(&seq_n),
            contexts,
        });
    }
    out.emit(&Payload::Contexts(groups), provenance(defaults, args))
}

fn load_wav(path: &Path) -> Result<Pcm> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    read_wav(&bytes).context(path.display())
}

/// Accepts a find-contexts report or a bare list of context groups.
fn load_contexts(path: &Path) -> Result<Vec<UtteranceContexts>> {
    let value: Value = serde_json::from_str(&read_file(path)?).context(path.display())?;
    if value.get("tool").is_some() {
        match load_bundle(path)?.1 {
            Payload::Contexts(groups) => Ok(groups),
            other => Err(CliError::Invalid(format!(
                "{}: expected a contexts report, found {:?}",
                path.display(),
                other.kind()
            ))),
        }
    } else {
        serde_json::from_value(value).context(path.display())
    }
}

fn realization(arg: RealizationArg) -> Realization {
    match arg {
        RealizationArg::Rhotic => Realization::Rhotic,
        RealizationArg::NonRhotic => Realization::NonRhotic,
    }
}

type GroupAudio = (UtteranceContexts, PathBuf);

/// Context groups paired with the audio each is measured on.
fn select_groups(
    audio: &crate::AudioSource,
    ctm: &Path,
    contexts: &Path,
    utterance: Option<&str>,
) -> Result<(Vec<PhoneTiming>, Vec<GroupAudio>)> {
    let timings = parse_ctm(&read_file(ctm)?).context(ctm.display())?;
    let timed: BTreeSet<&str> = timings.iter().map(|t| t.utterance.as_str()).collect();
    let groups = load_contexts(contexts)?;
    let mut selected: Vec<UtteranceContexts> = Vec::new();
    for g in groups {
        if utterance.is_some_and(|u| u != g.utterance) {
            continue;
        }
        if timed.contains(g.utterance.as_str()) {
            selected.push(g);
        } else if audio.wav_dir.is_some() {
            log::warn!(
                "utterance {:?} has no timings in {}; skipped",
                g.utterance,
                ctm.display()
            );
        }
    }
    if let Some(u) = utterance {
        if selected.is_empty() {
            return Err(CliError::Invalid(format!(
                "utterance {u:?} is not in both {} and {}",
                contexts.display(),
                ctm.display()
            )));
        }
    }
    let paired = match (&audio.wav, &audio.wav_dir) {
        (Some(wav), _) => {
            if selected.len() != 1 {
                return Err(CliError::Invalid(format!(
                    "{} context groups have timings; pass --utterance or use --wav-dir",
                    selected.len()
                )));
            }
            selected.into_iter().map(|g| (g, wav.clone())).collect()
        }
        (None, Some(dir)) => selected
            .into_iter()
            .map(|g| {
                let wav = dir.join(format!("{}.wav", g.utterance));
                (g, wav)
            })
            .collect(),
        (None, None) => unreachable!("clap requires --wav or --wav-dir"),
    };
    Ok((timings, paired))
}

fn measure(
    audio: &crate::AudioSource,
    ctm: &Path,
    contexts: &Path,
    utterance: Option<&str>,
    realization: Realization,
    defaults: &Defaults,
) -> Result<Vec<(TimedContext, MeasuredContext)>> {
    let (timings, groups) = select_groups(audio, ctm, contexts, utterance)?;
    let mut measured = Vec::new();
    for (group, wav) in groups {
        let pcm = load_wav(&wav)?;
        let placed = place_contexts(&group, &timings, realization).context(&group.utterance)?;
        let results =
            measure_contexts(&pcm, &placed, &defaults.analysis).context(&group.utterance)?;
        measured.extend(placed.into_iter().zip(results));
    }
    Ok(measured)
}

pub fn f3_track(args: &F3TrackArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let tracks = match (args.start, args.end, &args.ctm, &args.contexts) {
        (Some(start), Some(end), _, _) => {
            let wav = args
                .audio
                .wav
                .as_ref()
                .expect("clap requires --wav with --start");
            let pcm = load_wav(wav)?;
            let name = args.utterance.clone().unwrap_or_else(|| {
                wav.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            let track =
                track_f3(&pcm, (start, end), &defaults.analysis, &name).context("f3-track")?;
            vec![KeyedTrack {
                key: format!("{name}:span:{start}-{end}"),
                track,
            }]
        }
        (_, _, Some(ctm), Some(contexts)) => measure(
            &args.audio,
            ctm,
            contexts,
            args.utterance.as_deref(),
            realization(args.realization),
            defaults,
        )?
        .into_iter()
        .map(|(_, m)| KeyedTrack {
            key: m.key,
            track: m.track,
        })
        .collect(),
        _ => unreachable!("clap requires a span or contexts"),
    };
    out.emit(&Payload::F3Track(tracks), provenance(defaults, args))
}

pub fn f3_slope(args: &F3SlopeArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let realization = realization(args.realization);
    let measured = measure(
        &args.audio,
        &args.ctm,
        &args.contexts,
        args.utterance.as_deref(),
        realization,
        defaults,
    )?;
    let contexts = measured
        .into_iter()
        .map(|(placed, m)| SlopeRow {
            n_frames: m.track.f3_points().count(),
            ols_slope: m.slope.as_ref().map(|s| s.stat.ols_slope),
            net_change: m.slope.as_ref().map(|s| s.stat.net_change),
            utterance: m.track.utterance,
            start: m.track.span.0,
            end: m.track.span.1,
            kind: placed.context.kind,
            key: m.key,
        })
        .collect();
    let report = SlopesReport {
        system: args.system.clone(),
        realization,
        contexts,
    };
    out.emit(&Payload::Slopes(report), provenance(defaults, args))
}

pub fn compare_slopes(args: &CompareSlopesArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let alpha = args.alpha.unwrap_or(defaults.alpha);
    check_alpha(alpha)?;
    let mut systems: BTreeMap<String, Vec<ContextSlope>> = BTreeMap::new();
    for path in &args.slopes {
        let report = match load_bundle(path)?.1 {
            Payload::Slopes(r) => r,
            other => {
                return Err(CliError::Invalid(format!(
                    "{}: expected a slopes report, found {:?}",
                    path.display(),
                    other.kind()
                )))
            }
        };
        let slopes: Vec<ContextSlope> = report
            .contexts
            .iter()
            .filter_map(|r| {
                Some(ContextSlope {
                    context: r.key.clone(),
                    stat: SlopeStat {
                        ols_slope: r.ols_slope?,
                        net_change: r.net_change?,
                        n_frames: r.n_frames,
                    },
                })
            })
            .collect();
        if systems.insert(report.system.clone(), slopes).is_some() {
            return Err(CliError::Invalid(format!(
                "system {:?} appears in more than one slopes report",
                report.system
            )));
        }
    }
    let comparison = stats::slope_comparison(&systems, alpha).context("compare-slopes")?;
    let mut effective = defaults.clone();
    effective.alpha = alpha;
    out.emit(
        &Payload::SlopeComparison(comparison),
        provenance(&effective, args),
    )
}

pub fn mushra(args: &MushraArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let mut effective = defaults.clone();
    let opts = &mut effective.mushra;
    if let Some(alpha) = args.alpha {
        check_alpha(alpha)?;
        opts.alpha = alpha;
    }
    if let Some(f) = args.family {
        opts.family = match f {
            FamilyArg::TopVsRest => ComparisonFamily::TopVsRest,
            FamilyArg::AllPairs => ComparisonFamily::AllPairs,
        };
    }
    if let Some(p) = args.pairing {
        opts.pairing = match p {
            PairingArg::Rating => PairingUnit::Rating,
            PairingArg::TestcaseMean => PairingUnit::TestcaseMean,
        };
    }
    let table = parse_scores(&read_file(&args.scores)?, ScoreKind::Mushra)
        .context(args.scores.display())?;
    let summary = stats::mushra_summary(&table, &effective.mushra).context("mushra")?;
    out.emit(&Payload::Mushra(summary), provenance(&effective, args))
}

pub fn preference(args: &PreferenceArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let table = parse_scores(&read_file(&args.scores)?, ScoreKind::Preference)
        .context(args.scores.display())?;
    let summary = stats::preference_summary(&table).context("preference")?;
    out.emit(&Payload::Preference(summary), provenance(defaults, args))
}

fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    parse_manifest(&read_file(path)?).context(path.display())
}

fn load_jsonl<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    from_jsonl(&read_file(path)?)
        .map_err(|(line, e)| CliError::Invalid(format!("{}:{line}: {e}", path.display())))
}

pub fn plan_vc(args: &PlanVcArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let sources = (!args.sources.is_empty()).then_some(args.sources.as_slice());
    let jobs = augment::plan_vc_jobs(&manifest, sources).context("plan-vc")?;
    out.emit(&Payload::Plan(jobs), provenance(defaults, args))
}

pub fn run_adapter(args: &RunAdapterArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let jobs: Vec<VcJob> = load_jsonl(&args.jobs)?;
    let parallelism = args
        .parallelism
        .or(defaults.adapter_parallelism)
        .unwrap_or_else(augment::default_parallelism);
    let cfg = AdapterConfig {
        template: args.template.clone(),
        parallelism,
        input_root: args.input_root.clone(),
        output_root: args.output_root.clone(),
    };
    std::fs::create_dir_all(&cfg.output_root).map_err(|e| CliError::io(&cfg.output_root, e))?;
    let statuses = augment::run_adapter(&jobs, &cfg).context("run-adapter")?;
    let failed = statuses.iter().filter(|s| !s.is_ok()).count();
    let total = statuses.len();
    out.emit(
        &Payload::AdapterStatus(statuses),
        provenance(defaults, args),
    )?;
    if failed > 0 {
        return Err(CliError::JobsFailed { failed, total });
    }
    Ok(())
}

pub fn build_corpus(args: &BuildCorpusArgs, defaults: &Defaults, out: &Output) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let mut jobs: Vec<VcJob> = load_jsonl(&args.jobs)?;
    if let Some(path) = &args.statuses {
        let statuses: Vec<JobStatus> = load_jsonl(path)?;
        let ok: BTreeSet<&str> = statuses
            .iter()
            .filter(|s| s.is_ok())
            .map(|s| s.id.as_str())
            .collect();
        jobs.retain(|j| ok.contains(j.id.as_str()));
    }
    let corpus =
        augment::build_tts_corpus(&manifest, &jobs, &args.output_root).context("build-corpus")?;
    out.emit(
        &Payload::TrainingManifest(corpus),
        provenance(defaults, args),
    )
}

pub fn report(args: &ReportArgs, out: &Output) -> Result<()> {
    let (bundle, payload) = load_bundle(&args.input)?;
    out.emit(&payload, bundle.config)
}
