use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use cgran_core::ablation::{build_grid, MetricTable, PdFlag};
use cgran_core::calibration::{
    fit_polynomial, read_samples, simulate_clicks, Axis, CalibrationModel, CorrectionConfig, ScreenGeometry, SimConfig,
};
use cgran_core::granularity::{build_dataset, parse_expr, sliding_windows, write_dataset, Dataset, ImageInstruction};
use cgran_core::harness::{builtin_script, Episode, EnvScript, Executor, LoopConfig, Model, NoiseRates, NoisyOracle};
use cgran_core::harness::{OracleModel, ReplayModel};
use cgran_core::info::{check_ordering, triples_from_files, FeatureFile};
use cgran_core::ingest::{
    emit_samples, extract_keyframes, read_frame_listing, read_timeline, read_timeline_dir, read_trainer_log,
    scene_record, select_early_stop, write_loss_curve,
};
use cgran_core::metrics::{read_predictions, EvalReport, RunStats, Smoothing};
use cgran_core::modal::{read_manifest, validate_corpus, write_manifest, Corpus};
use cgran_core::synth::{self, FeatureNoise};

use crate::*;

/// An invocation problem detected by the CLI itself.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage_err(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(cgran_core::Error::Usage(_)) = cause.downcast_ref::<cgran_core::Error>() {
            return 2;
        }
    }
    1
}

pub fn parse_screen(text: &str) -> std::result::Result<ScreenGeometry, String> {
    let (w, h) = text.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT, e.g. 1920x1080")?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    ScreenGeometry::new(w, h).map_err(|e| e.to_string())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(usage_err(format!("{}: no such file", path.display()))),
        Err(e) => Err(anyhow!(e).context(path.display().to_string())),
    }
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Build(a) => build(a),
        Command::Validate(a) => validate(a),
        Command::Mi(a) => mi(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Earlystop(a) => earlystop(a),
        Command::Calibrate(a) => calibrate(a),
        Command::SimulateClicks(a) => simulate_clicks_cmd(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn with_path(path: &Path) -> impl FnOnce(cgran_core::Error) -> anyhow::Error + '_ {
    move |e| anyhow::Error::new(e).context(path.display().to_string())
}

fn ingest(a: IngestArgs) -> Result<ExitCode> {
    let timelines = if a.timelines.is_dir() {
        read_timeline_dir(&a.timelines)?
    } else {
        if !a.timelines.exists() {
            return Err(usage_err(format!("{}: no such file", a.timelines.display())));
        }
        let stem = a.timelines.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
        BTreeMap::from([(stem, read_timeline(&a.timelines).map_err(with_path(&a.timelines))?)])
    };
    let frames = read_frame_listing(open(&a.frames)?).map_err(with_path(&a.frames))?;

    let mut pairs = Vec::new();
    let mut records = Vec::new();
    let mut unmatched = 0;
    for (scene, events) in &timelines {
        let scene_frames = frames
            .get(scene)
            .ok_or_else(|| anyhow!("timeline {scene:?} has no frames in {}", a.frames.display()))?;
        let m = extract_keyframes(scene_frames, events)?;
        for e in &m.unmatched {
            eprintln!("warning: {scene}: action at {} s precedes every frame: {:?}", e.timestamp, e.description);
        }
        unmatched += m.unmatched.len();
        if a.manifest.is_some() {
            records.push(scene_record(scene, scene_frames, &m, Vec::new())?);
        }
        pairs.extend(m.pairs);
    }
    let mut buf = Vec::new();
    let n = emit_samples(&mut buf, &pairs)?;
    write_out(Some(&a.out), &buf)?;
    if let Some(path) = &a.manifest {
        let mut buf = Vec::new();
        for r in &records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        write_out(Some(path), &buf)?;
    }
    eprintln!("{} scenes, {n} pairs, {unmatched} unmatched actions", timelines.len());
    Ok(ExitCode::SUCCESS)
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    let videos = read_manifest(open(path)?).map_err(with_path(path))?;
    Ok(Corpus::decompose(videos)?)
}

fn build(a: BuildArgs) -> Result<ExitCode> {
    let videos = match &a.corpus {
        Some(p) => read_manifest(open(p)?).map_err(with_path(p))?,
        None => synth::corpus_videos(a.scenes, a.keys, a.seed)?,
    };
    if let Some(p) = &a.emit_corpus {
        let mut buf = Vec::new();
        write_manifest(&mut buf, &videos)?;
        write_out(Some(p), &buf)?;
    }
    let corpus = Corpus::decompose(videos)?;
    let dataset: Dataset = match (&a.expr, a.window) {
        (Some(e), _) => build_dataset(&parse_expr(e)?, &corpus)?,
        (None, Some(w)) => sliding_windows(&corpus, w)?,
        (None, None) => unreachable!("clap requires one of --expr, --window"),
    };
    let mut buf = Vec::new();
    if a.minimal {
        if dataset.samples.iter().any(|s| s.parts.len() != 1 || s.parts[0].kind() != "static") {
            return Err(usage_err("--minimal needs single static images, i.e. --expr S"));
        }
        for s in &dataset.samples {
            let image = s.parts[0].frames()[0].content.clone();
            serde_json::to_writer(&mut buf, &ImageInstruction { image, instruction: s.target.clone() })?;
            buf.push(b'\n');
        }
    } else {
        write_dataset(&mut buf, &dataset)?;
    }
    write_out(Some(&a.out), &buf)?;
    let terms: Vec<String> = dataset.provenance.iter().map(|t| format!("{}={}", t.term, t.samples)).collect();
    eprintln!("{} samples ({})", dataset.len(), terms.join(", "));
    Ok(ExitCode::SUCCESS)
}

fn validate(a: ValidateArgs) -> Result<ExitCode> {
    let corpus = load_corpus(&a.corpus)?;
    let report = validate_corpus(&corpus)?;
    write_out(a.out.as_deref(), &json_bytes(&report)?)?;
    for v in &report.violations {
        eprintln!("{} {}: {} [{}]", v.constraint, v.kind, v.message, v.scene_ids.join(", "));
    }
    if report.passed {
        eprintln!("{} scenes pass", corpus.scene_count());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} violations", report.violations.len());
        Ok(ExitCode::from(1))
    }
}

fn read_features(path: &Path) -> Result<FeatureFile> {
    let f: FeatureFile = serde_json::from_reader(open(path)?).with_context(|| path.display().to_string())?;
    Ok(f)
}

fn mi(a: MiArgs) -> Result<ExitCode> {
    let triples = match a.synthetic {
        Some(SynthKind::Chain) => synth::feature_chain(
            a.scenes,
            a.dim,
            FeatureNoise { statics: a.noise_static, multi: a.noise_multi },
            a.seed,
        ),
        Some(SynthKind::Independent) => synth::independent_features(a.scenes, a.dim, a.seed),
        None => {
            let [s, m, v] = [0, 1, 2].map(|i| read_features(&a.features[i]));
            triples_from_files(&s?, &m?, &v?)?
        }
    };
    let report = check_ordering(&triples, a.omega)?;
    write_out(a.out.as_deref(), &json_bytes(&report)?)?;
    eprintln!(
        "I(S;V) = {:.4} bits, I(S;M) = {:.4} bits, ordered: {}",
        report.i_sv.i_bits, report.i_sm.i_bits, report.ordered
    );
    Ok(ExitCode::SUCCESS)
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let preds = read_predictions(open(&a.predictions)?).map_err(with_path(&a.predictions))?;
    let pairs: Vec<(String, String)> = preds.into_iter().map(|p| (p.prediction, p.reference)).collect();
    let smoothing = match a.smoothing {
        SmoothingArg::AddOne => Smoothing::AddOne,
        SmoothingArg::None => Smoothing::None,
    };
    let run = a.runtime.map(|runtime| RunStats {
        model_prep_time: a.prep_time,
        runtime,
        n_samples: pairs.len(),
        n_steps: a.steps.unwrap_or(pairs.len()),
    });
    let report = EvalReport::new(&pairs, smoothing, run)?;
    let bytes = match a.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            buf
        }
    };
    write_out(a.out.as_deref(), &bytes)?;
    Ok(ExitCode::SUCCESS)
}

fn ablate(a: AblateArgs) -> Result<ExitCode> {
    let table = MetricTable::from_csv(open(&a.metrics)?).map_err(with_path(&a.metrics))?;
    let grid = build_grid(&table, &a.baseline, a.tolerance)?;
    let bytes = match a.format {
        Format::Json => json_bytes(&grid)?,
        Format::Csv => {
            let mut buf = Vec::new();
            grid.write_csv(&mut buf)?;
            buf
        }
    };
    match &a.out {
        Some(p) => {
            write_out(Some(p), &bytes)?;
            print!("{}", grid.render());
        }
        None => write_out(None, &bytes)?,
    }
    let flagged = grid.flagged();
    for (row, cell) in &flagged {
        let kind = match cell.flag {
            Some(PdFlag::SignTypo) => "sign typo",
            _ => "mismatch",
        };
        eprintln!(
            "{}: {} {} {}: printed {:.2}, recomputed {:.2}",
            kind,
            row.test_set,
            row.exp_no.map_or_else(|| row.symbol.clone(), |n| format!("exp {n}")),
            cell.metric,
            cell.reported_pd.unwrap_or(f64::NAN),
            cell.pd.unwrap_or(f64::NAN),
        );
    }
    if a.strict && !flagged.is_empty() {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn earlystop(a: EarlystopArgs) -> Result<ExitCode> {
    let entries = read_trainer_log(open(&a.log)?).map_err(with_path(&a.log))?;
    let report = select_early_stop(&entries, a.patience, a.delta)?;
    if let Some(p) = &a.curve {
        let mut buf = Vec::new();
        write_loss_curve(&mut buf, &entries)?;
        write_out(Some(p), &buf)?;
    }
    write_out(a.out.as_deref(), &json_bytes(&report)?)?;
    Ok(ExitCode::SUCCESS)
}

/// Calibration file written by `calibrate` and read by `simulate`.
#[derive(Debug, Serialize, Deserialize)]
struct CalibrationFile {
    screen: ScreenGeometry,
    x: CalibrationModel,
    y: CalibrationModel,
}

fn calibrate(a: CalibrateArgs) -> Result<ExitCode> {
    let samples = read_samples(open(&a.samples)?).map_err(with_path(&a.samples))?;
    let fit = |axis: Axis| -> Result<CalibrationModel> {
        let pts: Vec<(f64, f64)> =
            samples.iter().filter(|s| s.axis == axis).map(|s| (s.relative, s.measured_px)).collect();
        if pts.is_empty() {
            return Ok(CalibrationModel::identity(&a.screen, axis));
        }
        Ok(fit_polynomial(axis, &pts, a.degree)?)
    };
    let file = CalibrationFile { screen: a.screen, x: fit(Axis::X)?, y: fit(Axis::Y)? };
    write_out(a.out.as_deref(), &json_bytes(&file)?)?;
    for m in [&file.x, &file.y] {
        eprintln!(
            "{:?}: {} samples, max residual {:.3} px, rms {:.3} px",
            m.axis, m.n_samples, m.residual_max, m.residual_rms
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate_clicks_cmd(a: SimulateClicksArgs) -> Result<ExitCode> {
    let cfg = SimConfig {
        extent: a.extent,
        curvature: a.curvature,
        n_calibration: a.calibration_points,
        n_targets: a.targets,
        noise_px: a.noise,
        radius: a.radius,
        seed: a.seed,
        correction: CorrectionConfig { window: a.window, reversal_threshold: a.reversal_threshold, edge_margin: a.margin },
    };
    let report = simulate_clicks(&cfg)?;
    write_out(a.out.as_deref(), &json_bytes(&report)?)?;
    eprintln!(
        "max error: linear {:.1} px, fitted {:.1} px, corrected {:.1} px",
        report.linear.max_err, report.fitted.max_err, report.corrected.max_err
    );
    Ok(ExitCode::SUCCESS)
}

fn load_script(name: &str) -> Result<EnvScript> {
    if let Some(text) = builtin_script(name) {
        return Ok(EnvScript::from_json(text)?);
    }
    let path = PathBuf::from(name);
    if !path.exists() {
        return Err(usage_err(format!("{name:?} is neither a bundled platform nor a script file")));
    }
    let text = std::fs::read_to_string(&path)?;
    EnvScript::from_json(&text).with_context(|| path.display().to_string())
}

fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let script = load_script(&a.platform)?;
    let mut model: Box<dyn Model> = match a.model {
        ModelKind::Oracle => Box::new(OracleModel::new(&script)),
        ModelKind::Noisy => Box::new(NoisyOracle::new(
            &script,
            NoiseRates { wrong_widget: a.wrong_widget, foreign: a.foreign, repeat: a.repeat },
            a.seed,
        )),
        ModelKind::Replay => {
            let path = a.replay.as_ref().expect("clap requires --replay");
            let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
            Box::new(ReplayModel::new(text.lines().map(str::to_owned).collect::<Vec<_>>()))
        }
    };
    let executor = match &a.calibration {
        Some(p) => {
            let f: CalibrationFile = serde_json::from_reader(open(p)?).with_context(|| p.display().to_string())?;
            if f.screen != script.screen {
                return Err(usage_err(format!(
                    "calibration is for {}x{}, platform screen is {}x{}",
                    f.screen.width_px, f.screen.height_px, script.screen.width_px, script.screen.height_px
                )));
            }
            Some(Executor { geometry: f.screen, x: f.x, y: f.y })
        }
        None => None,
    };
    let cfg = LoopConfig {
        max_steps: a.max_steps,
        epsilon: a.epsilon,
        patience: a.patience,
        refresh_ticks: a.refresh_ticks,
    };
    let log = Episode::new(script, model.as_mut(), executor, cfg)?.run();
    write_out(a.out.as_deref(), log.to_jsonl().as_bytes())?;
    eprintln!(
        "{}: {:?}{} after {} steps",
        log.platform,
        log.outcome,
        log.attribution.map_or(String::new(), |x| format!(" ({x:?})")),
        log.steps()
    );
    Ok(ExitCode::SUCCESS)
}
