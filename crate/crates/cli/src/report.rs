use std::path::{Path, PathBuf};

use rhotica::alignment::ContextKind;
use rhotica::augment::{from_jsonl, to_jsonl, JobOutcome, JobStatus, TrainingManifest, VcJob};
use rhotica::formant::Formant;
use rhotica::pipeline::{Realization, UtteranceContexts};
use rhotica::stats::{MushraSummary, PreferenceSummary, SlopeComparison};
use rhotica::FormantTrack;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Context, Result};

pub const TOOL: &str = "rhotica";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    PhonemeMap,
    Alignment,
    Contexts,
    F3Track,
    Slopes,
    SlopeComparison,
    Mushra,
    Preference,
    Plan,
    AdapterStatus,
    TrainingManifest,
}

/// Envelope written around every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportBundle {
    pub tool: String,
    pub version: String,
    pub kind: ReportKind,
    /// Effective defaults and the command's own arguments.
    pub config: Value,
    /// Inline payload, or `{"payload": file, "count": n}` for line-oriented
    /// reports written with `--out`.
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRow {
    pub token: u32,
    pub symbol: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub accent: String,
    pub symbol: String,
    pub token: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeMapReport {
    pub tokens: Vec<TokenRow>,
    pub entries: Vec<TokenEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Start,
    Diagonal,
    ExpandA,
    ExpandB,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub a: usize,
    pub b: usize,
    pub symbol_a: String,
    pub symbol_b: String,
    pub step: StepKind,
    /// Cost added by this step.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub seq_a: Vec<String>,
    pub seq_b: Vec<String>,
    pub total_cost: f64,
    pub path: Vec<(usize, usize)>,
    pub steps: Vec<AlignedPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyedTrack {
    pub key: String,
    pub track: FormantTrack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub key: String,
    pub utterance: String,
    pub kind: ContextKind,
    pub start: f64,
    pub end: f64,
    /// Frames carrying an F3 estimate.
    pub n_frames: usize,
    pub ols_slope: Option<f64>,
    pub net_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopesReport {
    pub system: String,
    pub realization: Realization,
    pub contexts: Vec<SlopeRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    PhonemeMap(PhonemeMapReport),
    Alignment(AlignmentReport),
    Contexts(Vec<UtteranceContexts>),
    F3Track(Vec<KeyedTrack>),
    Slopes(SlopesReport),
    SlopeComparison(SlopeComparison),
    Mushra(MushraSummary),
    Preference(PreferenceSummary),
    Plan(Vec<VcJob>),
    AdapterStatus(Vec<JobStatus>),
    TrainingManifest(TrainingManifest),
}

impl Payload {
    pub fn kind(&self) -> ReportKind {
        match self {
            Payload::PhonemeMap(_) => ReportKind::PhonemeMap,
            Payload::Alignment(_) => ReportKind::Alignment,
            Payload::Contexts(_) => ReportKind::Contexts,
            Payload::F3Track(_) => ReportKind::F3Track,
            Payload::Slopes(_) => ReportKind::Slopes,
            Payload::SlopeComparison(_) => ReportKind::SlopeComparison,
            Payload::Mushra(_) => ReportKind::Mushra,
            Payload::Preference(_) => ReportKind::Preference,
            Payload::Plan(_) => ReportKind::Plan,
            Payload::AdapterStatus(_) => ReportKind::AdapterStatus,
            Payload::TrainingManifest(_) => ReportKind::TrainingManifest,
        }
    }

    fn to_value(&self) -> Value {
        let v = match self {
            Payload::PhonemeMap(p) => serde_json::to_value(p),
            Payload::Alignment(p) => serde_json::to_value(p),
            Payload::Contexts(p) => serde_json::to_value(p),
            Payload::F3Track(p) => serde_json::to_value(p),
            Payload::Slopes(p) => serde_json::to_value(p),
            Payload::SlopeComparison(p) => serde_json::to_value(p),
            Payload::Mushra(p) => serde_json::to_value(p),
            Payload::Preference(p) => serde_json::to_value(p),
            Payload::Plan(p) => serde_json::to_value(p),
            Payload::AdapterStatus(p) => serde_json::to_value(p),
            Payload::TrainingManifest(p) => serde_json::to_value(p),
        };
        v.expect("report payloads serialize")
    }

    pub fn from_value(kind: ReportKind, data: Value) -> Result<Payload> {
        fn de<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T> {
            serde_json::from_value(v).context("report data")
        }
        Ok(match kind {
            ReportKind::PhonemeMap => Payload::PhonemeMap(de(data)?),
            ReportKind::Alignment => Payload::Alignment(de(data)?),
            ReportKind::Contexts => Payload::Contexts(de(data)?),
            ReportKind::F3Track => Payload::F3Track(de(data)?),
            ReportKind::Slopes => Payload::Slopes(de(data)?),
            ReportKind::SlopeComparison => Payload::SlopeComparison(de(data)?),
            ReportKind::Mushra => Payload::Mushra(de(data)?),
            ReportKind::Preference => Payload::Preference(de(data)?),
            ReportKind::Plan => Payload::Plan(de(data)?),
            ReportKind::AdapterStatus => Payload::AdapterStatus(de(data)?),
            ReportKind::TrainingManifest => Payload::TrainingManifest(de(data)?),
        })
    }

    /// JSON Lines rendering for the list-shaped reports consumed by other tools.
    fn jsonl(&self) -> Option<(String, usize)> {
        match self {
            Payload::Plan(jobs) => Some((to_jsonl(jobs), jobs.len())),
            Payload::AdapterStatus(statuses) => Some((to_jsonl(statuses), statuses.len())),
            _ => None,
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            Payload::PhonemeMap(p) => table(
                &["accent", "symbol", "token"],
                p.entries
                    .iter()
                    .map(|e| vec![e.accent.clone(), e.symbol.clone(), e.token.to_string()]),
            ),
            Payload::Alignment(p) => table(
                &["a", "b", "symbol_a", "symbol_b", "step", "cost"],
                p.steps.iter().map(|s| {
                    vec![
                        s.a.to_string(),
                        s.b.to_string(),
                        s.symbol_a.clone(),
                        s.symbol_b.clone(),
                        enum_name(&s.step),
                        s.cost.to_string(),
                    ]
                }),
            ),
            Payload::Contexts(groups) => table(
                &[
                    "utterance",
                    "key",
                    "kind",
                    "rhotic_start",
                    "rhotic_end",
                    "nonrhotic_index",
                    "rhotic_phones",
                    "nonrhotic_phone",
                ],
                groups.iter().flat_map(|g| {
                    g.contexts.iter().map(move |c| {
                        let (r0, r1) = c.rhotic_span;
                        vec![
                            g.utterance.clone(),
                            rhotica::pipeline::context_key(c),
                            enum_name(&c.kind),
                            r0.to_string(),
                            r1.to_string(),
                            c.nonrhotic_index.to_string(),
                            g.seq_rhotic
                                .get(r0..=r1)
                                .map(|s| s.join(" "))
                                .unwrap_or_default(),
                            g.seq_nonrhotic
                                .get(c.nonrhotic_index)
                                .cloned()
                                .unwrap_or_default(),
                        ]
                    })
                }),
            ),
            Payload::F3Track(tracks) => table(
                &[
                    "key",
                    "utterance",
                    "time",
                    "f1",
                    "f1_bandwidth",
                    "f2",
                    "f2_bandwidth",
                    "f3",
                    "f3_bandwidth",
                ],
                tracks.iter().flat_map(|t| {
                    t.track.frames.iter().map(move |f| {
                        let mut row =
                            vec![t.key.clone(), t.track.utterance.clone(), f.time.to_string()];
                        for formant in [f.f1, f.f2, f.f3] {
                            row.extend(formant_cells(formant));
                        }
                        row
                    })
                }),
            ),
            Payload::Slopes(p) => table(
                &[
                    "system",
                    "key",
                    "utterance",
                    "kind",
                    "start",
                    "end",
                    "n_frames",
                    "ols_slope",
                    "net_change",
                ],
                p.contexts.iter().map(|r| {
                    vec![
                        p.system.clone(),
                        r.key.clone(),
                        r.utterance.clone(),
                        enum_name(&r.kind),
                        r.start.to_string(),
                        r.end.to_string(),
                        r.n_frames.to_string(),
                        opt(r.ols_slope),
                        opt(r.net_change),
                    ]
                }),
            ),
            Payload::SlopeComparison(p) => {
                let means = |name: &str| {
                    p.systems
                        .iter()
                        .find(|s| s.system == name)
                        .map(|s| (s.mean_ols_slope.to_string(), s.mean_net_change.to_string()))
                        .unwrap_or_default()
                };
                table(
                    &[
                        "system_a",
                        "system_b",
                        "mean_ols_slope_a",
                        "mean_ols_slope_b",
                        "mean_net_change_a",
                        "mean_net_change_b",
                        "paired",
                        "t",
                        "df",
                        "p",
                        "adjusted_p",
                        "rejected",
                    ],
                    p.comparisons.iter().map(|c| {
                        let (ols_a, net_a) = means(&c.a);
                        let (ols_b, net_b) = means(&c.b);
                        vec![
                            c.a.clone(),
                            c.b.clone(),
                            ols_a,
                            ols_b,
                            net_a,
                            net_b,
                            c.paired.to_string(),
                            c.test.t.to_string(),
                            c.test.degrees_of_freedom.to_string(),
                            c.test.p.to_string(),
                            c.adjusted_p.to_string(),
                            c.rejected.to_string(),
                        ]
                    }),
                )
            }
            Payload::Mushra(p) => table(
                &[
                    "system",
                    "n",
                    "mean",
                    "ci95_low",
                    "ci95_high",
                    "best",
                    "adjusted_p_vs_top",
                ],
                p.systems.iter().map(|s| {
                    vec![
                        s.system.clone(),
                        s.n.to_string(),
                        s.mean.to_string(),
                        opt(s.ci95.map(|c| c.0)),
                        opt(s.ci95.map(|c| c.1)),
                        s.best.to_string(),
                        opt(s.adjusted_p),
                    ]
                }),
            ),
            Payload::Preference(p) => table(
                &[
                    "count_a",
                    "count_b",
                    "count_tie",
                    "share_a",
                    "share_b",
                    "share_tie",
                    "sign_test_p",
                ],
                std::iter::once(vec![
                    p.count_a.to_string(),
                    p.count_b.to_string(),
                    p.count_tie.to_string(),
                    p.share_a.to_string(),
                    p.share_b.to_string(),
                    p.share_tie.to_string(),
                    opt(p.sign_test_p),
                ]),
            ),
            Payload::Plan(jobs) => table(
                &[
                    "id",
                    "source_speaker",
                    "utterance",
                    "source_audio",
                    "donor",
                    "output",
                ],
                jobs.iter().map(|j| {
                    vec![
                        j.id.clone(),
                        j.source_speaker.clone(),
                        j.utterance.clone(),
                        j.source_audio.clone(),
                        j.donor.clone(),
                        j.output.clone(),
                    ]
                }),
            ),
            Payload::AdapterStatus(statuses) => table(
                &["id", "status", "exit_code", "message"],
                statuses.iter().map(|s| {
                    let (status, code, message) = match &s.outcome {
                        JobOutcome::Ok => ("ok", None, String::new()),
                        JobOutcome::Failed { exit_code } => ("failed", *exit_code, String::new()),
                        JobOutcome::MissingOutput => ("missing_output", None, String::new()),
                        JobOutcome::SpawnError { message } => {
                            ("spawn_error", None, message.clone())
                        }
                    };
                    vec![s.id.clone(), status.into(), opt(code), message]
                }),
            ),
            Payload::TrainingManifest(m) => table(
                &["speaker", "accent", "utterance", "audio", "origin"],
                m.entries.iter().map(|e| {
                    vec![
                        e.speaker.clone(),
                        e.accent.clone(),
                        e.utterance.clone(),
                        e.audio.clone(),
                        enum_name(&e.origin),
                    ]
                }),
            ),
        }
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn formant_cells(f: Option<Formant>) -> [String; 2] {
    [opt(f.map(|f| f.frequency)), opt(f.map(|f| f.bandwidth))]
}

/// Serialized name of a unit enum variant.
fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        other => panic!("not a unit variant: {other:?}"),
    }
}

fn table<I: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: I) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

/// Where and how a command writes its report.
#[derive(Debug, Clone)]
pub struct Output {
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Output {
    /// Writes `payload` with its provenance. Line-oriented reports in JSON
    /// format are written as JSON Lines; with `--out` a `<out>.meta.json`
    /// sidecar then carries the provenance.
    pub fn emit(&self, payload: &Payload, config: Value) -> Result<()> {
        let bundle = |data: Value| ReportBundle {
            tool: TOOL.into(),
            version: rhotica::VERSION.into(),
            kind: payload.kind(),
            config: config.clone(),
            data,
        };
        match (self.format, payload.jsonl()) {
            (Format::Csv, _) => self.write(&payload.to_csv()),
            (Format::Json, Some((lines, count))) => {
                self.write(&lines)?;
                if let Some(out) = &self.out {
                    let name = out
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    let meta = bundle(serde_json::json!({ "payload": name, "count": count }));
                    write_file(&meta_path(out), &pretty(&meta))?;
                }
                Ok(())
            }
            (Format::Json, None) => self.write(&pretty(&bundle(payload.to_value()))),
        }
    }

    pub fn write(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => write_file(path, text),
            None => {
                use std::io::Write;
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))
            }
        }
    }
}

pub fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Loads a saved report. Sidecars of line-oriented reports pull their
/// payload from the file named next to them.
pub fn load_bundle(path: &Path) -> Result<(ReportBundle, Payload)> {
    let bundle: ReportBundle = serde_json::from_str(&read_file(path)?).context(path.display())?;
    if bundle.tool != TOOL {
        return Err(CliError::Invalid(format!(
            "{}: not a {TOOL} report (tool = {:?})",
            path.display(),
            bundle.tool
        )));
    }
    let payload_file = bundle
        .data
        .get("payload")
        .and_then(Value::as_str)
        .map(str::to_owned);
    let payload = match (bundle.kind, payload_file) {
        (ReportKind::Plan | ReportKind::AdapterStatus, Some(name)) => {
            let file = path.parent().unwrap_or(Path::new(".")).join(name);
            let text = read_file(&file)?;
            let lines = |e: (usize, serde_json::Error)| {
                CliError::Invalid(format!("{}: line {}: {}", file.display(), e.0, e.1))
            };
            if bundle.kind == ReportKind::Plan {
                Payload::Plan(from_jsonl(&text).map_err(lines)?)
            } else {
                Payload::AdapterStatus(from_jsonl(&text).map_err(lines)?)
            }
        }
        (kind, _) => Payload::from_value(kind, bundle.data.clone())?,
    };
    Ok((bundle, payload))
}
