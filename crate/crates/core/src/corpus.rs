//! Parsers and serializers for the external data formats: phone-level CTM
//! timings, mono WAV audio, corpus manifests and listening-test score tables.
//!
//! Every parser is all-or-nothing: it returns a complete value or an error,
//! never a partial result.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Overlap tolerance for consecutive CTM intervals, in seconds.
const CTM_OVERLAP_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CtmError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duration must be positive, got {duration}")]
    NonPositiveDuration { line: usize, duration: f64 },
    #[error("utterance {utterance}: phone {symbol:?} at {start}s overlaps the previous interval ending at {previous_end}s")]
    Overlap {
        utterance: String,
        symbol: String,
        start: f64,
        previous_end: f64,
    },
}

#[derive(Debug, Error)]
pub enum WavError {
    #[error("expected mono audio, found {0} channels")]
    NotMono(u16),
    #[error("unsupported sample encoding: {0}")]
    UnsupportedCodec(String),
    #[error("truncated or malformed WAV data: {0}")]
    Truncated(String),
    #[error("invalid WAV file: {0}")]
    Format(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ManifestError {
    #[error("manifest parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid manifest:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("score table header must be exactly \"listener,testcase,system,score\", found {0:?}")]
    Header(String),
    #[error("invalid score table:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// One phone interval from a forced alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneTiming {
    pub utterance: String,
    pub symbol: String,
    pub start: f64,
    pub duration: f64,
}

impl PhoneTiming {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Parses CTM lines `<utt> <channel> <start> <dur> <symbol> [<confidence>]`.
///
/// Blank lines and `;;` comments are skipped. Output is grouped by utterance
/// in order of first appearance, each group sorted by start time.
pub fn parse_ctm(text: &str) -> Result<Vec<PhoneTiming>, CtmError> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<PhoneTiming>> = HashMap::new();

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 5 && fields.len() != 6 {
            return Err(CtmError::Malformed {
                line,
                message: format!("expected 5 or 6 fields, found {}", fields.len()),
            });
        }
        let number = |idx: usize, what: &str| -> Result<f64, CtmError> {
            f64::from_str(fields[idx])
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CtmError::Malformed {
                    line,
                    message: format!("{what} {:?} is not a finite number", fields[idx]),
                })
        };
        let start = number(2, "start")?;
        let duration = number(3, "duration")?;
        if fields.len() == 6 {
            number(5, "confidence")?;
        }
        if start < 0.0 {
            return Err(CtmError::Malformed {
                line,
                message: format!("start {start} is negative"),
            });
        }
        if duration <= 0.0 {
            return Err(CtmError::NonPositiveDuration { line, duration });
        }
        let utterance = fields[0].to_string();
        if !groups.contains_key(&utterance) {
            order.push(utterance.clone());
        }
        groups
            .entry(utterance.clone())
            .or_default()
            .push(PhoneTiming {
                utterance,
                symbol: fields[4].to_string(),
                start,
                duration,
            });
    }

    let mut out = Vec::new();
    for utt in order {
        let mut group = groups.remove(&utt).unwrap_or_default();
        group.sort_by(|a, b| a.start.total_cmp(&b.start));
        for pair in group.windows(2) {
            if pair[1].start < pair[0].end() - CTM_OVERLAP_EPS {
                return Err(CtmError::Overlap {
                    utterance: utt,
                    symbol: pair[1].symbol.clone(),
                    start: pair[1].start,
                    previous_end: pair[0].end(),
                });
            }
        }
        out.extend(group);
    }
    Ok(out)
}

/// Writes timings as CTM with channel `1`.
pub fn serialize_ctm(timings: &[PhoneTiming]) -> String {
    let mut out = String::new();
    for t in timings {
        out.push_str(&format!(
            "{} 1 {} {} {}\n",
            t.utterance, t.start, t.duration, t.symbol
        ));
    }
    out
}

/// Mono audio normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcm {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Pcm {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn wav_error(e: hound::Error) -> WavError {
    match e {
        hound::Error::IoError(io) => WavError::Truncated(io.to_string()),
        hound::Error::Unsupported => WavError::UnsupportedCodec("unsupported WAV format".into()),
        hound::Error::FormatError(msg) => WavError::Format(msg.to_string()),
        other => WavError::Format(other.to_string()),
    }
}

/// Decodes a RIFF/WAVE file holding mono PCM16 or float32 samples.
///
/// PCM16 is divided by 32768 so that -32768 maps to exactly -1.
pub fn read_wav(bytes: &[u8]) -> Result<Pcm, WavError> {
    let mut reader = hound::WavReader::new(Cursor::new(bytes)).map_err(wav_error)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(WavError::NotMono(spec.channels));
    }
    if spec.sample_rate == 0 {
        return Err(WavError::Format("sample rate is zero".into()));
    }
    let expected = reader.len() as usize;
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(wav_error)?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(wav_error)?,
        (format, bits) => {
            return Err(WavError::UnsupportedCodec(format!(
                "{bits}-bit {format:?} samples"
            )))
        }
    };
    if samples.len() != expected {
        return Err(WavError::Truncated(format!(
            "header declares {expected} samples, found {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
        return Err(WavError::Format(format!("sample {bad} outside [-1, 1]")));
    }
    Ok(Pcm {
        samples,
        sample_rate: spec.sample_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Encodes mono audio; PCM16 output clamps and scales by 32768.
pub fn write_wav(pcm: &Pcm, encoding: WavEncoding) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: pcm.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer =
            hound::WavWriter::new(&mut cursor, spec).expect("in-memory WAV writer cannot fail");
        for &s in &pcm.samples {
            match encoding {
                WavEncoding::Pcm16 => {
                    let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(v).expect("in-memory write");
                }
                WavEncoding::Float32 => writer.write_sample(s as f32).expect("in-memory write"),
            }
        }
        writer.finalize().expect("in-memory finalize");
    }
    cursor.into_inner()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub id: String,
    pub audio: String,
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Speaker {
    pub id: String,
    pub accent: String,
    #[serde(default)]
    pub utterances: Vec<UtteranceRecord>,
}

/// Ids become path components of VC output files.
fn is_path_safe(id: &str) -> bool {
    id.trim().is_empty() || !(id.contains(['/', '\\', '\0']) || id == "." || id == "..")
}

/// Speaker, accent and utterance catalog plus the augmentation roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub donor: String,
    pub target_accent: String,
    pub speakers: Vec<Speaker>,
}

impl CorpusManifest {
    pub fn speaker(&self, id: &str) -> Option<&Speaker> {
        self.speakers.iter().find(|s| s.id == id)
    }

    pub fn donor_speaker(&self) -> Option<&Speaker> {
        self.speaker(&self.donor)
    }

    /// Lists every invariant violation; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.target_accent.trim().is_empty() {
            issues.push("target_accent is empty".to_string());
        }
        let mut seen = HashSet::new();
        for s in &self.speakers {
            if s.id.trim().is_empty() {
                issues.push("speaker with empty id".to_string());
            }
            if !is_path_safe(&s.id) {
                issues.push(format!(
                    "speaker id {:?} is not usable as a path component",
                    s.id
                ));
            }
            if !seen.insert(s.id.as_str()) {
                issues.push(format!("duplicate speaker id {:?}", s.id));
            }
            let mut utt_ids = HashSet::new();
            for u in &s.utterances {
                if u.id.trim().is_empty() {
                    issues.push(format!("speaker {:?}: utterance with empty id", s.id));
                }
                if !is_path_safe(&u.id) {
                    issues.push(format!(
                        "speaker {:?}: utterance id {:?} is not usable as a path component",
                        s.id, u.id
                    ));
                }
                if !utt_ids.insert(u.id.as_str()) {
                    issues.push(format!(
                        "speaker {:?}: duplicate utterance id {:?}",
                        s.id, u.id
                    ));
                }
            }
        }
        match self.donor_speaker() {
            None => issues.push(format!("donor {:?} is not a listed speaker", self.donor)),
            Some(d) if d.accent == self.target_accent => issues.push(format!(
                "donor {:?} already has the target accent {:?}",
                d.id, self.target_accent
            )),
            Some(_) => {}
        }
        issues
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let issues = self.violations();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ManifestError::Invalid(issues))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization cannot fail")
    }
}

pub fn parse_manifest(text: &str) -> Result<CorpusManifest, ManifestError> {
    let manifest: CorpusManifest =
        serde_json::from_str(text).map_err(|e| ManifestError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    manifest.validate()?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Mushra,
    Preference,
}

/// Listener choice in a two-way preference test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    A,
    B,
    Tie,
}

impl FromStr for Preference {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Preference::A),
            "b" => Ok(Preference::B),
            "tie" | "none" | "0" => Ok(Preference::Tie),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preference::A => "A",
            Preference::B => "B",
            Preference::Tie => "tie",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScoreValue {
    Rating(f64),
    Choice(Preference),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub listener: String,
    pub testcase: String,
    pub system: String,
    pub score: ScoreValue,
}

/// Listening-test responses.
///
/// For MUSHRA tables `system` names the rated system; for preference tables
/// it names the compared pair and `score` holds `A`, `B` or `tie`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub kind: ScoreKind,
    pub rows: Vec<ScoreRow>,
}

pub const SCORE_HEADER: [&str; 4] = ["listener", "testcase", "system", "score"];

impl ScoreTable {
    pub fn systems(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.system.as_str()).collect()
    }

    /// MUSHRA ratings grouped by system and keyed by (listener, testcase).
    pub fn ratings(&self) -> BTreeMap<&str, BTreeMap<(&str, &str), f64>> {
        let mut out: BTreeMap<&str, BTreeMap<(&str, &str), f64>> = BTreeMap::new();
        for r in &self.rows {
            if let ScoreValue::Rating(v) = r.score {
                out.entry(r.system.as_str())
                    .or_default()
                    .insert((r.listener.as_str(), r.testcase.as_str()), v);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SCORE_HEADER).expect("in-memory csv");
        for r in &self.rows {
            let score = match r.score {
                ScoreValue::Rating(v) => v.to_string(),
                ScoreValue::Choice(p) => p.to_string(),
            };
            w.write_record([&r.listener, &r.testcase, &r.system, &score])
                .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

/// Parses a score CSV with the exact header `listener,testcase,system,score`.
pub fn parse_scores(text: &str, kind: ScoreKind) -> Result<ScoreTable, ScoreError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| ScoreError::Header(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != SCORE_HEADER {
        return Err(ScoreError::Header(
            header.iter().collect::<Vec<_>>().join(","),
        ));
    }

    let mut issues = Vec::new();
    let mut rows = Vec::new();
    let mut keys = HashSet::new();
    for (n, rec) in reader.records().enumerate() {
        // header is line 1
        let line = n + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                issues.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let (listener, testcase, system, raw) = (&rec[0], &rec[1], &rec[2], &rec[3]);
        if listener.is_empty() || testcase.is_empty() || system.is_empty() {
            issues.push(format!("line {line}: empty identifier field"));
            continue;
        }
        let score = match kind {
            ScoreKind::Mushra => match raw.parse::<f64>() {
                Ok(v) if (0.0..=100.0).contains(&v) => ScoreValue::Rating(v),
                Ok(v) => {
                    issues.push(format!("line {line}: score {v} outside [0, 100]"));
                    continue;
                }
                Err(_) => {
                    issues.push(format!("line {line}: score {raw:?} is not a number"));
                    continue;
                }
            },
            ScoreKind::Preference => match raw.parse::<Preference>() {
                Ok(p) => ScoreValue::Choice(p),
                Err(()) => {
                    issues.push(format!(
                        "line {line}: preference {raw:?} is not one of A, B, tie"
                    ));
                    continue;
                }
            },
        };
        if !keys.insert((
            listener.to_string(),
            testcase.to_string(),
            system.to_string(),
        )) {
            issues.push(format!(
                "line {line}: duplicate (listener, testcase, system) = ({listener}, {testcase}, {system})"
            ));
            continue;
        }
        rows.push(ScoreRow {
            listener: listener.to_string(),
            testcase: testcase.to_string(),
            system: system.to_string(),
            score,
        });
    }
    if !issues.is_empty() {
        return Err(ScoreError::Invalid(issues));
    }
    Ok(ScoreTable { kind, rows })
}
