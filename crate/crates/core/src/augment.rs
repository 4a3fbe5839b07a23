//! Augmentation planning: VC jobs that render target-accent recordings in the
//! donor voice, the combined TTS training manifest, and an external adapter
//! runner that executes the jobs through a command template.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::CorpusManifest;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("manifest has no speaker with the target accent {0:?}")]
    NoTargetSpeaker(String),
    #[error("source speaker {0:?} is not in the manifest")]
    UnknownSpeaker(String),
    #[error("source speaker {speaker:?} has accent {accent:?}, expected {expected:?}")]
    WrongAccent {
        speaker: String,
        accent: String,
        expected: String,
    },
    #[error("source speaker {0:?} requested twice")]
    DuplicateSource(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("job {id} does not belong to this manifest: {reason}")]
    ForeignJob { id: String, reason: String },
    #[error("missing VC output for {} job(s): {}", .0.len(), .0.join(", "))]
    MissingOutputs(Vec<String>),
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter template is missing placeholder(s): {}", .0.join(", "))]
    MissingPlaceholder(Vec<&'static str>),
    #[error("adapter template cannot be split into words: {0}")]
    BadTemplate(String),
    #[error("adapter executable {0:?} not found")]
    ExecutableNotFound(String),
    #[error("parallelism must be at least 1")]
    Parallelism,
    #[error("two jobs write to the same output {0:?}")]
    SharedOutput(String),
}

/// One voice-conversion work item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcJob {
    pub id: String,
    pub source_speaker: String,
    pub utterance: String,
    /// Source audio path as listed in the manifest.
    pub source_audio: String,
    pub donor: String,
    /// Output path relative to the adapter output root.
    pub output: String,
}

/// First 16 hex digits of SHA-256 over the NUL-joined identifying fields.
pub fn job_id(source_speaker: &str, utterance: &str, donor: &str) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in [source_speaker, utterance, donor].iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())[..16].to_string()
}

fn output_path(donor: &str, speaker: &str, utterance: &str) -> String {
    format!("{donor}/{speaker}/{utterance}.wav")
}

/// Plans one job per utterance of each source speaker, ordered by
/// (speaker id, utterance id).
///
/// Without `sources`, the first target-accent speaker by id is used.
pub fn plan_vc_jobs(
    manifest: &CorpusManifest,
    sources: Option<&[String]>,
) -> Result<Vec<VcJob>, PlanError> {
    manifest
        .validate()
        .map_err(|e| PlanError::InvalidManifest(e.to_string()))?;
    let target = &manifest.target_accent;
    let selected: Vec<&str> = match sources {
        None => {
            let first = manifest
                .speakers
                .iter()
                .filter(|s| &s.accent == target)
                .map(|s| s.id.as_str())
                .min()
                .ok_or_else(|| PlanError::NoTargetSpeaker(target.clone()))?;
            vec![first]
        }
        Some(list) => {
            let mut out: Vec<&str> = Vec::with_capacity(list.len());
            for id in list {
                let speaker = manifest
                    .speaker(id)
                    .ok_or_else(|| PlanError::UnknownSpeaker(id.clone()))?;
                if &speaker.accent != target {
                    return Err(PlanError::WrongAccent {
                        speaker: id.clone(),
                        accent: speaker.accent.clone(),
                        expected: target.clone(),
                    });
                }
                if out.contains(&id.as_str()) {
                    return Err(PlanError::DuplicateSource(id.clone()));
                }
                out.push(id);
            }
            out
        }
    };

    let donor = manifest.donor.as_str();
    let mut jobs: Vec<VcJob> = selected
        .iter()
        .flat_map(|id| {
            let speaker = manifest.speaker(id).expect("checked above");
            speaker.utterances.iter().map(move |u| VcJob {
                id: job_id(&speaker.id, &u.id, donor),
                source_speaker: speaker.id.clone(),
                utterance: u.id.clone(),
                source_audio: u.audio.clone(),
                donor: donor.to_string(),
                output: output_path(donor, &speaker.id, &u.id),
            })
        })
        .collect();
    jobs.sort_by(|a, b| {
        (a.source_speaker.as_str(), a.utterance.as_str())
            .cmp(&(b.source_speaker.as_str(), b.utterance.as_str()))
    });
    Ok(jobs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Recording,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingEntry {
    pub speaker: String,
    pub accent: String,
    pub utterance: String,
    pub audio: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccentTotals {
    pub recording: usize,
    pub synthetic: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub donor: String,
    pub target_accent: String,
    pub entries: Vec<TrainingEntry>,
    pub totals: BTreeMap<String, AccentTotals>,
}

impl TrainingManifest {
    /// Entries spoken in the donor voice, recorded or converted.
    pub fn donor_voice_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.speaker == self.donor)
            .count()
    }

    pub fn synthetic_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.origin == Origin::Synthetic)
            .count()
    }
}

/// Synthetic utterance ids are prefixed so they never collide with the
/// donor's own recordings.
pub fn synthetic_utterance_id(job: &VcJob) -> String {
    format!("vc-{}-{}", job.source_speaker, job.utterance)
}

/// All recordings followed by one synthetic entry per completed job.
///
/// Job outputs are looked up under `output_root`; every missing file is
/// reported in one error.
pub fn build_tts_corpus(
    manifest: &CorpusManifest,
    completed: &[VcJob],
    output_root: &Path,
) -> Result<TrainingManifest, PlanError> {
    manifest
        .validate()
        .map_err(|e| PlanError::InvalidManifest(e.to_string()))?;
    for job in completed {
        let foreign = |reason: String| PlanError::ForeignJob {
            id: job.id.clone(),
            reason,
        };
        if job.donor != manifest.donor {
            return Err(foreign(format!(
                "donor {:?} differs from manifest donor",
                job.donor
            )));
        }
        let speaker = manifest
            .speaker(&job.source_speaker)
            .ok_or_else(|| foreign(format!("unknown speaker {:?}", job.source_speaker)))?;
        if speaker.accent != manifest.target_accent {
            return Err(foreign(format!(
                "speaker {:?} is not a target-accent speaker",
                speaker.id
            )));
        }
        if job.id != job_id(&job.source_speaker, &job.utterance, &job.donor) {
            return Err(foreign("id does not match its fields".to_string()));
        }
    }
    let missing: Vec<String> = completed
        .iter()
        .filter(|j| !output_root.join(&j.output).is_file())
        .map(|j| j.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(PlanError::MissingOutputs(missing));
    }

    let mut entries = Vec::with_capacity(
        manifest
            .speakers
            .iter()
            .map(|s| s.utterances.len())
            .sum::<usize>()
            + completed.len(),
    );
    for speaker in &manifest.speakers {
        for u in &speaker.utterances {
            entries.push(TrainingEntry {
                speaker: speaker.id.clone(),
                accent: speaker.accent.clone(),
                utterance: u.id.clone(),
                audio: u.audio.clone(),
                origin: Origin::Recording,
            });
        }
    }
    for job in completed {
        entries.push(TrainingEntry {
            speaker: manifest.donor.clone(),
            accent: manifest.target_accent.clone(),
            utterance: synthetic_utterance_id(job),
            audio: job.output.clone(),
            origin: Origin::Synthetic,
        });
    }
    let mut totals: BTreeMap<String, AccentTotals> = BTreeMap::new();
    for e in &entries {
        let t = totals.entry(e.accent.clone()).or_default();
        match e.origin {
            Origin::Recording => t.recording += 1,
            Origin::Synthetic => t.synthetic += 1,
        }
    }
    Ok(TrainingManifest {
        donor: manifest.donor.clone(),
        target_accent: manifest.target_accent.clone(),
        entries,
        totals,
    })
}

// ---------------------------------------------------------------------------
// Adapter

pub const PLACEHOLDERS: [&str; 3] = ["{input}", "{output}", "{donor}"];

#[derive(Debug, Clone)]
pub struct AdapterConfig {
    /// Command with `{input}`, `{output}` and `{donor}` placeholders, split
    /// into words with POSIX shell quoting rules (no shell is invoked).
    pub template: String,
    pub parallelism: usize,
    /// Base directory for relative `source_audio` paths.
    pub input_root: PathBuf,
    /// Base directory for job outputs.
    pub output_root: PathBuf,
}

impl AdapterConfig {
    pub fn new(template: impl Into<String>) -> Self {
        Self {
            template: template.into(),
            parallelism: default_parallelism(),
            input_root: PathBuf::from("."),
            output_root: PathBuf::from("."),
        }
    }
}

pub fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobOutcome {
    Ok,
    /// Nonzero exit; `exit_code` is absent when killed by a signal.
    Failed {
        exit_code: Option<i32>,
    },
    /// Exit code 0 but no output file.
    MissingOutput,
    SpawnError {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: String,
    #[serde(flatten)]
    pub outcome: JobOutcome,
}

impl JobStatus {
    pub fn is_ok(&self) -> bool {
        self.outcome == JobOutcome::Ok
    }
}

fn parse_template(template: &str) -> Result<Vec<String>, AdapterError> {
    let missing: Vec<&'static str> = PLACEHOLDERS
        .iter()
        .copied()
        .filter(|p| !template.contains(p))
        .collect();
    if !missing.is_empty() {
        return Err(AdapterError::MissingPlaceholder(missing));
    }
    let words =
        shell_words::split(template).map_err(|e| AdapterError::BadTemplate(e.to_string()))?;
    if words.is_empty() {
        return Err(AdapterError::BadTemplate("template is empty".into()));
    }
    Ok(words)
}

fn find_executable(program: &str) -> Option<PathBuf> {
    let is_exec = |p: &Path| {
        p.is_file() && {
            #[cfg(unix)]
            {
                use std::os::unix::fs::PermissionsExt;
                p.metadata()
                    .is_ok_and(|m| m.permissions().mode() & 0o111 != 0)
            }
            #[cfg(not(unix))]
            {
                true
            }
        }
    };
    if program.contains(std::path::MAIN_SEPARATOR) || program.contains('/') {
        let p = PathBuf::from(program);
        return is_exec(&p).then_some(p);
    }
    std::env::var_os("PATH").and_then(|paths| {
        std::env::split_paths(&paths)
            .map(|dir| dir.join(program))
            .find(|p| is_exec(p))
    })
}

fn substitute(word: &str, input: &str, output: &str, donor: &str) -> String {
    word.replace("{input}", input)
        .replace("{output}", output)
        .replace("{donor}", donor)
}

fn run_one(words: &[String], job: &VcJob, cfg: &AdapterConfig) -> JobOutcome {
    let input = cfg.input_root.join(&job.source_audio);
    let output = cfg.output_root.join(&job.output);
    let (input_s, output_s) = (input.to_string_lossy(), output.to_string_lossy());
    let args: Vec<String> = words
        .iter()
        .map(|w| substitute(w, &input_s, &output_s, &job.donor))
        .collect();

    // A stale file from an earlier run must not count as success.
    if output.exists() {
        if let Err(e) = std::fs::remove_file(&output) {
            return JobOutcome::SpawnError {
                message: format!("cannot remove stale output {}: {e}", output.display()),
            };
        }
    }
    if let Some(parent) = output.parent() {
        if let Err(e) = std::fs::create_dir_all(parent) {
            return JobOutcome::SpawnError {
                message: format!("cannot create {}: {e}", parent.display()),
            };
        }
    }
    let result = Command::new(&args[0])
        .args(&args[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .output();
    match result {
        Err(e) => JobOutcome::SpawnError {
            message: e.to_string(),
        },
        Ok(out) if !out.status.success() => {
            let stderr = String::from_utf8_lossy(&out.stderr);
            log::warn!("job {} failed ({}): {}", job.id, out.status, stderr.trim());
            JobOutcome::Failed {
                exit_code: out.status.code(),
            }
        }
        Ok(_) if !output.is_file() => JobOutcome::MissingOutput,
        Ok(_) => JobOutcome::Ok,
    }
}

/// Runs every job through the adapter with bounded parallelism.
///
/// Failed jobs do not stop the batch. Statuses are sorted by job id.
pub fn run_adapter(jobs: &[VcJob], cfg: &AdapterConfig) -> Result<Vec<JobStatus>, AdapterError> {
    if cfg.parallelism == 0 {
        return Err(AdapterError::Parallelism);
    }
    let words = parse_template(&cfg.template)?;
    if find_executable(&words[0]).is_none() {
        return Err(AdapterError::ExecutableNotFound(words[0].clone()));
    }
    let mut outputs = std::collections::HashSet::new();
    for job in jobs {
        if !outputs.insert(job.output.as_str()) {
            return Err(AdapterError::SharedOutput(job.output.clone()));
        }
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<JobStatus>> = Mutex::new(Vec::with_capacity(jobs.len()));
    let workers = cfg.parallelism.min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let outcome = run_one(&words, job, cfg);
                results
                    .lock()
                    .expect("no worker panics while holding the lock")
                    .push(JobStatus {
                        id: job.id.clone(),
                        outcome,
                    });
            });
        }
    });
    let mut statuses = results.into_inner().expect("workers finished");
    statuses.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(statuses)
}

/// Jobs or statuses as JSON lines.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl<T: for<'de> Deserialize<'de>>(
    text: &str,
) -> Result<Vec<T>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}
