mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::report::{Format, Output};

#[derive(Debug, Parser)]
#[command(
    name = "rhotica",
    version,
    about = "Accent rhoticity analysis and augmentation toolkit"
)]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// JSON defaults file; overrides $RHOTICA_CONFIG.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assign shared token ids across accent inventories.
    MapPhonemes(MapPhonemesArgs),
    /// Align two phoneme sequences with dynamic time warping.
    Align(AlignArgs),
    /// Find rhotic contrasts between rhotic and non-rhotic transcriptions.
    FindContexts(FindContextsArgs),
    /// Track F1-F3 over context spans or one explicit span.
    F3Track(F3TrackArgs),
    /// Measure F3 slopes over the rhotic contexts of synthesized audio.
    F3Slope(F3SlopeArgs),
    /// Compare mean F3 slopes between systems.
    CompareSlopes(CompareSlopesArgs),
    /// Summarize MUSHRA ratings.
    Mushra(MushraArgs),
    /// Summarize A/B preference responses.
    Preference(PreferenceArgs),
    /// Plan voice-conversion jobs from a corpus manifest.
    PlanVc(PlanVcArgs),
    /// Run planned jobs through an external voice-conversion command.
    RunAdapter(RunAdapterArgs),
    /// Build the TTS training manifest from recordings and completed jobs.
    BuildCorpus(BuildCorpusArgs),
    /// Re-render a saved report.
    Report(ReportArgs),
    /// Inspect the effective defaults.
    Config(ConfigArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MapPhonemesArgs {
    /// Inventory file, or builtin:<accent> (en-GB, en-IE, en-US). Repeatable.
    #[arg(long = "inventory", required = true, value_name = "SOURCE")]
    pub inventories: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct AlignArgs {
    /// Inventory for sequence A: a file or builtin:<accent>.
    #[arg(long, value_name = "SOURCE")]
    pub inventory_a: String,
    /// Inventory for sequence B: a file or builtin:<accent>.
    #[arg(long, value_name = "SOURCE")]
    pub inventory_b: String,
    /// Space-separated symbols of sequence A.
    #[arg(long, requires = "seq_b", required_unless_present = "seq_file")]
    pub seq_a: Option<String>,
    /// Space-separated symbols of sequence B.
    #[arg(long, requires = "seq_a", required_unless_present = "seq_file")]
    pub seq_b: Option<String>,
    /// File whose first two non-empty lines are sequences A and B.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["seq_a", "seq_b"])]
    pub seq_file: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FindContextsArgs {
    /// Inventory of the rhotic accent.
    #[arg(long, value_name = "SOURCE")]
    pub inventory_rhotic: String,
    /// Inventory of the non-rhotic accent.
    #[arg(long, value_name = "SOURCE")]
    pub inventory_nonrhotic: String,
    /// Utterance id for a single pair given on the command line.
    #[arg(long, requires_all = ["seq_rhotic", "seq_nonrhotic"])]
    pub utterance: Option<String>,
    #[arg(long, requires = "utterance", required_unless_present = "seq_file")]
    pub seq_rhotic: Option<String>,
    #[arg(long, requires = "utterance", required_unless_present = "seq_file")]
    pub seq_nonrhotic: Option<String>,
    /// Tab-separated lines: utterance, rhotic sequence, non-rhotic sequence.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["utterance", "seq_rhotic", "seq_nonrhotic"])]
    pub seq_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealizationArg {
    /// The audio realizes the rhotic sequence.
    Rhotic,
    /// The audio realizes the non-rhotic sequence.
    NonRhotic,
}

#[derive(Debug, Args, Serialize)]
pub struct AudioSource {
    /// Mono WAV file holding one utterance.
    #[arg(
        long,
        value_name = "PATH",
        required_unless_present = "wav_dir",
        conflicts_with = "wav_dir"
    )]
    pub wav: Option<PathBuf>,
    /// Directory of <utterance>.wav files, one per context group.
    #[arg(long, value_name = "DIR")]
    pub wav_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct F3TrackArgs {
    #[command(flatten)]
    pub audio: AudioSource,
    /// Phone-level CTM timings.
    #[arg(long, value_name = "PATH", requires = "contexts")]
    pub ctm: Option<PathBuf>,
    /// Contexts from find-contexts.
    #[arg(long, value_name = "PATH", requires = "ctm")]
    pub contexts: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RealizationArg::Rhotic)]
    pub realization: RealizationArg,
    /// Restrict to one utterance; names the track when --start/--end are used.
    #[arg(long)]
    pub utterance: Option<String>,
    /// Span start in seconds (instead of --ctm/--contexts).
    #[arg(long, requires = "end", conflicts_with_all = ["ctm", "contexts", "wav_dir"], required_unless_present = "contexts")]
    pub start: Option<f64>,
    /// Span end in seconds.
    #[arg(long, requires = "start")]
    pub end: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct F3SlopeArgs {
    #[command(flatten)]
    pub audio: AudioSource,
    /// Phone-level CTM timings.
    #[arg(long, value_name = "PATH")]
    pub ctm: PathBuf,
    /// Contexts from find-contexts.
    #[arg(long, value_name = "PATH")]
    pub contexts: PathBuf,
    #[arg(long, value_enum, default_value_t = RealizationArg::Rhotic)]
    pub realization: RealizationArg,
    /// Restrict to one utterance.
    #[arg(long)]
    pub utterance: Option<String>,
    /// System label stored in the report.
    #[arg(long, default_value = "system")]
    pub system: String,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareSlopesArgs {
    /// Slopes report from f3-slope (JSON). Give one per system.
    #[arg(long = "slopes", required = true, value_name = "PATH")]
    pub slopes: Vec<PathBuf>,
    /// Significance level (default from config).
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    /// Top system against each other system.
    TopVsRest,
    /// Every pair of systems.
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingArg {
    /// Pair individual (listener, testcase) ratings.
    Rating,
    /// Pair per-testcase means over listeners.
    TestcaseMean,
}

#[derive(Debug, Args, Serialize)]
pub struct MushraArgs {
    /// CSV with header listener,testcase,system,score.
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long, value_enum)]
    pub pairing: Option<PairingArg>,
}

#[derive(Debug, Args, Serialize)]
pub struct PreferenceArgs {
    /// CSV with header listener,testcase,system,score; score is A, B or tie.
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PlanVcArgs {
    /// Corpus manifest (JSON).
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Target-accent source speaker; repeatable. Defaults to the first by id.
    #[arg(long = "source", value_name = "SPEAKER")]
    pub sources: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct RunAdapterArgs {
    /// Jobs from plan-vc (JSON Lines).
    #[arg(long, value_name = "PATH")]
    pub jobs: PathBuf,
    /// Command with {input}, {output} and {donor} placeholders.
    #[arg(long)]
    pub template: String,
    /// Concurrent jobs (default from config, else one per core).
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Base directory for source audio paths.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub input_root: PathBuf,
    /// Base directory for converted audio.
    #[arg(long, value_name = "DIR")]
    pub output_root: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildCorpusArgs {
    /// Corpus manifest (JSON).
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Jobs from plan-vc (JSON Lines).
    #[arg(long, value_name = "PATH")]
    pub jobs: PathBuf,
    /// Statuses from run-adapter; only successful jobs are included.
    #[arg(long, value_name = "PATH")]
    pub statuses: Option<PathBuf>,
    /// Base directory holding converted audio.
    #[arg(long, value_name = "DIR")]
    pub output_root: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Saved JSON report (or .meta.json sidecar).
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ConfigArgs {
    /// Print the effective defaults as JSON.
    #[arg(long, required = true)]
    pub show: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let output = Output {
        format: cli.format,
        out: cli.out,
    };
    let result = config::load(cli.config.as_deref()).and_then(|defaults| {
        use commands::*;
        match &cli.command {
            Command::MapPhonemes(a) => map_phonemes(a, &defaults, &output),
            Command::Align(a) => align(a, &defaults, &output),
            Command::FindContexts(a) => find_contexts(a, &defaults, &output),
            Command::F3Track(a) => f3_track(a, &defaults, &output),
            Command::F3Slope(a) => f3_slope(a, &defaults, &output),
            Command::CompareSlopes(a) => compare_slopes(a, &defaults, &output),
            Command::Mushra(a) => mushra(a, &defaults, &output),
            Command::Preference(a) => preference(a, &defaults, &output),
            Command::PlanVc(a) => plan_vc(a, &defaults, &output),
            Command::RunAdapter(a) => run_adapter(a, &defaults, &output),
            Command::BuildCorpus(a) => build_corpus(a, &defaults, &output),
            Command::Report(a) => report(a, &output),
            Command::Config(_) => output.write(&report::pretty(&defaults)),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
