use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod cmd;

/// Modality-granularity toolkit: dataset construction, information-theoretic
/// checks, evaluation metrics, ablation arithmetic, click calibration and a
/// closed-loop GUI agent simulator.
///
/// Exit status: 0 success, 1 validation or input failure, 2 usage error.
#[derive(Debug, Parser)]
#[command(name = "cgran", version, arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match annotation timelines to frames and emit {image, instruction} pairs.
    #[command(after_help = INGEST_HELP)]
    Ingest(IngestArgs),
    /// Build a dataset from a corpus manifest for a granularity expression.
    #[command(after_help = BUILD_HELP)]
    Build(BuildArgs),
    /// Check a corpus manifest against the scene, label and derivation constraints.
    #[command(after_help = VALIDATE_HELP)]
    Validate(ValidateArgs),
    /// Gaussian mutual information I(S;V) and I(S;M) and their ordering.
    #[command(after_help = MI_HELP)]
    Mi(MiArgs),
    /// Score predictions with BLEU-4 and ROUGE-1/2/L.
    #[command(after_help = EVAL_HELP)]
    Eval(EvalArgs),
    /// Percentage differences of a metric table against a baseline configuration.
    #[command(after_help = ABLATE_HELP)]
    Ablate(AblateArgs),
    /// Pick the checkpoint from a trainer log by the early-stopping rule.
    #[command(after_help = EARLYSTOP_HELP)]
    Earlystop(EarlystopArgs),
    /// Fit per-axis polynomial calibration from measured clicks.
    #[command(after_help = CALIBRATE_HELP)]
    Calibrate(CalibrateArgs),
    /// Compare linear, fitted and corrected click mapping on a curved synthetic screen.
    #[command(name = "simulate-clicks", after_help = SIMULATE_CLICKS_HELP)]
    SimulateClicks(SimulateClicksArgs),
    /// Run one closed-loop agent episode against a scripted platform.
    #[command(after_help = SIMULATE_HELP)]
    Simulate(SimulateArgs),
}

const INGEST_HELP: &str = "\
Formats:
  timeline CSV    timestamp,description
                  3.2,Click [Maneuver]
  timeline JSONL  {\"timestamp\": 3.2, \"description\": \"Click [Maneuver]\"}
  frames CSV      scene_id,frame_index,timestamp,content
                  video_01,12,3.1,frames/video_01/0012.png
  output JSONL    {\"image\":\"frames/video_01/0012.png\",\"instruction\":\"Click [Maneuver]\"}

A directory of timelines is read file by file; each file stem names a scene.";

const BUILD_HELP: &str = "\
Formats:
  corpus JSONL   {\"scene_id\":\"s1\",\"frames\":[{\"index\":0,\"timestamp\":0.0,\"content\":\"s1/0.png\"}],\"key_indices\":[1,3,4],\"features\":[\"tok\"],\"labels\":[\"a\",\"b\",\"c\"]}
  output JSONL   {\"id\":\"0:S*M:s1\",\"expr\":\"S*M\",\"scene\":\"s1\",\"parts\":[{\"kind\":\"static\",\"refs\":[\"s1/1.png\"]}],\"target\":\"a | b | c\"}

Expressions fuse modalities with '*' and mix sample sets with '+', e.g. \"M*V+S\".";

const VALIDATE_HELP: &str = "\
Formats:
  corpus JSONL   as for `build`
  report JSON    {\"passed\": false, \"violations\": [{\"constraint\": \"C3.2\", \"scene_ids\": [\"s1\"], ...}]}

Exits 1 when any violation is found.";

const MI_HELP: &str = "\
Formats:
  feature JSON   {\"modality\":\"S\",\"d\":2,\"count\":2,\"scene_ids\":[\"s1\",\"s2\"],\"rows\":[[0.1,0.2],[0.3,0.4]]}

Static rows may repeat a scene id; they are averaged per scene.";

const EVAL_HELP: &str = "\
Formats:
  predictions JSONL  {\"id\":\"1\",\"prediction\":\"click [maneuver]\",\"reference\":\"click [maneuver]\"}
  CSV report         predict_bleu-4,predict_rouge-1,...,predict_steps_per_second";

const ABLATE_HELP: &str = "\
Formats:
  metric CSV   test_set,exp_no,dataset,symbol,BLEU-4,BLEU-4 PD,ROUGE-1,...
               val_S,9,combo_D1.2,S*V*M,4.81,0,23.46,0,4.91,0,12.84,0
  `exp_no`, `dataset` and the `<metric> PD` columns are optional. Printed PDs
  are checked against the recomputed ones; sign typos and mismatches are flagged.";

const EARLYSTOP_HELP: &str = "\
Formats:
  trainer log JSONL  {\"current_steps\": 120, \"epoch\": 3.0, \"loss\": 0.41, \"eval_loss\": 0.52}
  curve CSV          step,epoch,train_loss,eval_loss";

const CALIBRATE_HELP: &str = "\
Formats:
  samples CSV   axis,relative,measured_px
                x,500,1176.87
  model JSON    {\"screen\":{...},\"x\":{\"axis\":\"x\",\"coeffs\":[a0,a1,a2],...},\"y\":...}";

const SIMULATE_CLICKS_HELP: &str = "\
The synthetic screen answers relative position r with extent*r/1000 - curvature*r*(1000-r) px.";

const SIMULATE_HELP: &str = "\
Formats:
  platform      bundled name (platform-a, platform-b, platform-c) or a script JSON path
  replay file   one model output per line, e.g. Click [Maneuver]
  log JSONL     {\"type\":\"header\",...} then {\"type\":\"event\",...} lines then {\"type\":\"outcome\",...}";

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Timeline file or directory of timeline files.
    #[arg(long)]
    pub timelines: PathBuf,
    /// Frame listing CSV.
    #[arg(long)]
    pub frames: PathBuf,
    /// Output JSONL of {image, instruction} pairs.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a corpus manifest with the matched frames as key frames.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["corpus", "synthetic"]))]
#[command(group = clap::ArgGroup::new("shape").required(true).args(["expr", "window"]))]
pub struct BuildArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Generate a synthetic corpus instead of reading one.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, default_value_t = 180, requires = "synthetic")]
    pub scenes: usize,
    #[arg(long, default_value_t = 1002, requires = "synthetic")]
    pub keys: usize,
    /// Write the corpus used to this manifest path.
    #[arg(long)]
    pub emit_corpus: Option<PathBuf>,
    #[arg(long)]
    pub expr: Option<String>,
    /// Sliding windows of this many consecutive key frames.
    #[arg(long)]
    pub window: Option<usize>,
    /// Emit {image, instruction} records (bare `S` only).
    #[arg(long)]
    pub minimal: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Statics and multi-images are noisy copies of the video feature.
    Chain,
    /// Statics independent of M and V.
    Independent,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["features", "synthetic"]))]
pub struct MiArgs {
    /// Feature files for S, M and V, in that order.
    #[arg(long, num_args = 3, value_names = ["S", "M", "V"])]
    pub features: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub synthetic: Option<SynthKind>,
    #[arg(long, default_value_t = 200)]
    pub scenes: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub noise_static: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_multi: f64,
    /// Average scene overlap ω used for the correction factor.
    #[arg(long, default_value_t = 0.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SmoothingArg {
    AddOne,
    None,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, value_enum, default_value_t = SmoothingArg::AddOne)]
    pub smoothing: SmoothingArg,
    /// Wall-clock prediction runtime in seconds, for throughput columns.
    #[arg(long)]
    pub runtime: Option<f64>,
    #[arg(long, default_value_t = 0.0, requires = "runtime")]
    pub prep_time: f64,
    /// Number of batched steps; defaults to the number of predictions.
    #[arg(long, requires = "runtime")]
    pub steps: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub metrics: PathBuf,
    /// Symbol of the baseline configuration, e.g. "S*V*M".
    #[arg(long)]
    pub baseline: String,
    /// Allowed gap between printed and recomputed PDs, in percentage points.
    #[arg(long, default_value_t = cgran_core::ablation::PD_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Exit 1 when any printed PD disagrees with the recomputed one.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EarlystopArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value_t = cgran_core::ingest::DEFAULT_PATIENCE)]
    pub patience: usize,
    /// Minimum rise over the best loss; 1 % of the minimum when absent.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss-curve CSV path.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Screen size as WIDTHxHEIGHT.
    #[arg(long, value_parser = cmd::parse_screen)]
    pub screen: cgran_core::calibration::ScreenGeometry,
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateClicksArgs {
    #[arg(long, default_value_t = 2360)]
    pub extent: u32,
    #[arg(long, default_value_t = 1e-4)]
    pub curvature: f64,
    #[arg(long, default_value_t = 30)]
    pub calibration_points: usize,
    #[arg(long, default_value_t = 200)]
    pub targets: usize,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Hit radius in px.
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 2.0)]
    pub reversal_threshold: f64,
    #[arg(long, default_value_t = 1)]
    pub margin: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Oracle,
    Noisy,
    Replay,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub platform: String,
    #[arg(long, value_enum, default_value_t = ModelKind::Oracle)]
    pub model: ModelKind,
    /// Model outputs for `--model replay`.
    #[arg(long, required_if_eq("model", "replay"))]
    pub replay: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub wrong_widget: f64,
    #[arg(long, default_value_t = 0.05)]
    pub foreign: f64,
    #[arg(long, default_value_t = 0.05)]
    pub repeat: f64,
    /// Calibration model JSON from `calibrate`.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2)]
    pub patience: usize,
    #[arg(long, default_value_t = 20)]
    pub max_steps: usize,
    /// Ticks to wait after each action; the script's value when absent.
    #[arg(long)]
    pub refresh_ticks: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cmd::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(cmd::exit_code(&e))
        }
    }
}
