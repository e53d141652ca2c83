//! Annotation timelines, key-frame extraction, sample emission and trainer
//! logs.
//!
//! A key frame is the last frame strictly before its action's timestamp.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::granularity::ImageInstruction;
use crate::modal::{FrameRef, ManifestFrame, SceneRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub timestamp: f64,
    pub description: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimelineFormat {
    Csv,
    Jsonl,
}

impl TimelineFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "jsonl" | "json" | "ndjson" => Some(Self::Jsonl),
            _ => None,
        }
    }
}

fn check_monotone(events: &[(usize, ActionEvent)]) -> Result<()> {
    for pair in events.windows(2) {
        let ((_, a), (line, b)) = (&pair[0], &pair[1]);
        if b.timestamp == a.timestamp {
            return Err(Error::Format { line: *line, message: format!("duplicate timestamp {}", b.timestamp) });
        }
        if b.timestamp < a.timestamp {
            return Err(Error::Format {
                line: *line,
                message: format!("timestamp {} goes back from {}", b.timestamp, a.timestamp),
            });
        }
    }
    Ok(())
}

/// Events with strictly increasing timestamps. CSV needs a
/// `timestamp,description` header; JSON lines carry the same two keys.
pub fn parse_timeline<R: Read>(reader: R, format: TimelineFormat) -> Result<Vec<ActionEvent>> {
    let mut events: Vec<(usize, ActionEvent)> = Vec::new();
    match format {
        TimelineFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
            for (i, rec) in rdr.deserialize().enumerate() {
                let line = i + 2;
                let e: ActionEvent = rec.map_err(|e| Error::Format { line, message: e.to_string() })?;
                events.push((line, e));
            }
        }
        TimelineFormat::Jsonl => {
            for (i, line) in std::io::BufReader::new(reader).lines().enumerate() {
                let line_no = i + 1;
                let text = line?;
                if text.trim().is_empty() {
                    continue;
                }
                let e: ActionEvent = serde_json::from_str(&text)
                    .map_err(|e| Error::Format { line: line_no, message: e.to_string() })?;
                events.push((line_no, e));
            }
        }
    }
    if let Some((line, e)) = events.iter().find(|(_, e)| !e.timestamp.is_finite() || e.timestamp < 0.0) {
        return Err(Error::Format { line: *line, message: format!("invalid timestamp {}", e.timestamp) });
    }
    check_monotone(&events)?;
    Ok(events.into_iter().map(|(_, e)| e).collect())
}

pub fn read_timeline(path: &Path) -> Result<Vec<ActionEvent>> {
    let format = TimelineFormat::from_path(path)
        .ok_or_else(|| usage(format!("{}: timeline must be .csv or .jsonl", path.display())))?;
    parse_timeline(fs::File::open(path)?, format)
}

/// Every timeline file in `dir`, keyed by file stem.
pub fn read_timeline_dir(dir: &Path) -> Result<BTreeMap<String, Vec<ActionEvent>>> {
    let mut out = BTreeMap::new();
    let mut paths: Vec<_> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    paths.sort();
    for p in paths {
        if TimelineFormat::from_path(&p).is_none() {
            continue;
        }
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
        let events = read_timeline(&p).map_err(|e| match e {
            Error::Format { line, message } => Error::Format { line, message: format!("{}: {message}", p.display()) },
            other => other,
        })?;
        out.insert(stem, events);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyframeMatch {
    pub pairs: Vec<(FrameRef, ActionEvent)>,
    /// Events with no earlier frame.
    pub unmatched: Vec<ActionEvent>,
}

pub fn extract_keyframes(frames: &[FrameRef], events: &[ActionEvent]) -> Result<KeyframeMatch> {
    if frames.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
        return Err(usage("frames must be sorted by timestamp"));
    }
    let mut out = KeyframeMatch::default();
    for e in events {
        let n = frames.partition_point(|f| f.timestamp < e.timestamp);
        if n == 0 {
            out.unmatched.push(e.clone());
        } else {
            out.pairs.push((frames[n - 1].clone(), e.clone()));
        }
    }
    Ok(out)
}

/// One `{image, instruction}` line per pair.
pub fn emit_samples<W: Write>(mut writer: W, pairs: &[(FrameRef, ActionEvent)]) -> Result<usize> {
    for (f, e) in pairs {
        if f.content.trim().is_empty() {
            return Err(Error::Emission(format!(
                "frame {} of {} has no media reference (instruction {:?})",
                f.frame_index, f.scene_id, e.description
            )));
        }
        let rec = ImageInstruction { image: f.content.clone(), instruction: e.description.clone() };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    Ok(pairs.len())
}

pub fn read_image_instructions<R: BufRead>(reader: R) -> Result<Vec<ImageInstruction>> {
    crate::granularity::read_jsonl(reader)
}

/// Row of a frame listing CSV: `scene_id,frame_index,timestamp,content`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub scene_id: String,
    pub frame_index: u32,
    pub timestamp: f64,
    pub content: String,
}

/// Frames grouped by scene, each group sorted by timestamp.
pub fn read_frame_listing<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<FrameRef>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: BTreeMap<String, Vec<FrameRef>> = BTreeMap::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        let r: FrameRow = rec.map_err(|e| Error::Format { line: i + 2, message: e.to_string() })?;
        out.entry(r.scene_id.clone()).or_default().push(FrameRef::new(r.scene_id, r.frame_index, r.timestamp, r.content));
    }
    for frames in out.values_mut() {
        frames.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    }
    Ok(out)
}

/// Manifest record for one recording: all frames, with the matched frames as
/// key frames labeled by their events. Two events landing on one frame is a
/// format error since each key frame carries one instruction.
pub fn scene_record(scene_id: &str, frames: &[FrameRef], matched: &KeyframeMatch, features: Vec<String>) -> Result<SceneRecord> {
    let mut keys: Vec<(u32, String)> = Vec::new();
    for (f, e) in &matched.pairs {
        if keys.iter().any(|(k, _)| *k == f.frame_index) {
            return Err(Error::Format {
                line: 0,
                message: format!("{scene_id}: two actions map to frame {} ({:?})", f.frame_index, e.description),
            });
        }
        keys.push((f.frame_index, e.description.clone()));
    }
    keys.sort_by_key(|(k, _)| *k);
    Ok(SceneRecord {
        scene_id: scene_id.to_owned(),
        frames: frames
            .iter()
            .map(|f| ManifestFrame { index: f.frame_index, timestamp: f.timestamp, content: f.content.clone() })
            .collect(),
        key_indices: keys.iter().map(|(k, _)| *k).collect(),
        features,
        labels: keys.into_iter().map(|(_, l)| l).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerLogEntry {
    #[serde(alias = "current_steps")]
    pub step: u64,
    #[serde(default)]
    pub epoch: Option<f64>,
    #[serde(default, alias = "loss")]
    pub train_loss: Option<f64>,
    #[serde(default)]
    pub eval_loss: Option<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

pub fn read_trainer_log<R: BufRead>(reader: R) -> Result<Vec<TrainerLogEntry>> {
    let mut out: Vec<TrainerLogEntry> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let e: TrainerLogEntry =
            serde_json::from_str(&text).map_err(|err| Error::Format { line: i + 1, message: err.to_string() })?;
        if let Some(prev) = out.last() {
            if e.step < prev.step {
                return Err(Error::Format { line: i + 1, message: format!("step {} after step {}", e.step, prev.step) });
            }
        }
        out.push(e);
    }
    Ok(out)
}

pub fn write_loss_curve<W: Write>(writer: W, entries: &[TrainerLogEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "epoch", "train_loss", "eval_loss"])?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for e in entries {
        w.write_record([e.step.to_string(), opt(e.epoch), opt(e.train_loss), opt(e.eval_loss)])?;
    }
    w.flush()?;
    Ok(())
}

pub const DEFAULT_PATIENCE: usize = 3;
pub const DEFAULT_DELTA_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    /// Position among the evaluations.
    pub best_index: usize,
    pub best_step: u64,
    pub best_epoch: Option<f64>,
    pub best_loss: f64,
    pub stop_index: Option<usize>,
    pub stop_step: Option<u64>,
    pub patience: usize,
    pub delta: f64,
    pub evaluations: usize,
}

/// Best checkpoint is the first global minimum of `eval_loss`. Stopping fires
/// at the first evaluation completing `patience` consecutive evaluations,
/// all after the best, above `best + delta`. `delta` defaults to 1 % of the
/// minimum.
pub fn select_early_stop(entries: &[TrainerLogEntry], patience: usize, delta: Option<f64>) -> Result<EarlyStop> {
    let evals: Vec<(&TrainerLogEntry, f64)> =
        entries.iter().filter_map(|e| e.eval_loss.filter(|l| l.is_finite()).map(|l| (e, l))).collect();
    if evals.is_empty() {
        return Err(usage("trainer log has no eval_loss entries"));
    }
    if patience == 0 {
        return Err(usage("patience must be at least 1"));
    }
    let mut best = 0;
    for (i, (_, l)) in evals.iter().enumerate() {
        if *l < evals[best].1 {
            best = i;
        }
    }
    let best_loss = evals[best].1;
    let delta = delta.unwrap_or(DEFAULT_DELTA_FRACTION * best_loss.abs());
    let mut run = 0;
    let mut stop = None;
    for (i, (_, l)) in evals.iter().enumerate().skip(best + 1) {
        if *l > best_loss + delta {
            run += 1;
            if run >= patience {
                stop = Some(i);
                break;
            }
        } else {
            run = 0;
        }
    }
    Ok(EarlyStop {
        best_index: best,
        best_step: evals[best].0.step,
        best_epoch: evals[best].0.epoch,
        best_loss,
        stop_index: stop,
        stop_step: stop.map(|i| evals[i].0.step),
        patience,
        delta,
        evaluations: evals.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(losses: &[f64]) -> Vec<TrainerLogEntry> {
        losses
            .iter()
            .enumerate()
            .map(|(i, l)| TrainerLogEntry {
                step: (i as u64 + 1) * 10,
                epoch: Some(i as f64 + 1.0),
                train_loss: None,
                eval_loss: Some(*l),
                extra: BTreeMap::new(),
            })
            .collect()
    }

    #[test]
    fn early_stop_trace() {
        let r = select_early_stop(&entries(&[1.0, 0.8, 0.7, 0.75, 0.80, 0.85]), 2, Some(0.01)).unwrap();
        assert_eq!((r.best_index, r.stop_index), (2, Some(4)));
        assert_eq!((r.best_step, r.stop_step), (30, Some(50)));
    }

    #[test]
    fn decreasing_never_stops() {
        let r = select_early_stop(&entries(&[1.0, 0.9, 0.8, 0.7]), 2, None).unwrap();
        assert_eq!((r.best_index, r.stop_index), (3, None));
    }

    #[test]
    fn flat_never_stops() {
        let r = select_early_stop(&entries(&[0.5, 0.5, 0.5]), 1, None).unwrap();
        assert_eq!((r.best_index, r.stop_index), (0, None));
    }

    #[test]
    fn dip_resets_the_run() {
        let r = select_early_stop(&entries(&[1.0, 0.5, 0.6, 0.5, 0.6, 0.7]), 2, Some(0.01)).unwrap();
        assert_eq!(r.stop_index, Some(5));
    }

    #[test]
    fn no_eval_loss() {
        let mut e = entries(&[1.0]);
        e[0].eval_loss = None;
        assert!(matches!(select_early_stop(&e, 3, None), Err(Error::Usage(_))));
    }

    #[test]
    fn trainer_log_key_spellings() {
        let text = "{\"current_steps\": 10, \"loss\": 2.5, \"epoch\": 0.1, \"lr\": 0.0001}\n\
                    {\"step\": 20, \"eval_loss\": 1.5, \"epoch\": 0.2}\n";
        let e = read_trainer_log(text.as_bytes()).unwrap();
        assert_eq!(e[0].step, 10);
        assert_eq!(e[0].train_loss, Some(2.5));
        assert!(e[0].extra.contains_key("lr"));
        assert_eq!(e[1].eval_loss, Some(1.5));
        let back = "{\"step\": 20}\n{\"step\": 10}\n";
        assert!(matches!(read_trainer_log(back.as_bytes()), Err(Error::Format { line: 2, .. })));
    }

    #[test]
    fn timeline_csv() {
        let ok = "timestamp,description\n3.2,click A\n7.9,click B\n";
        let ev = parse_timeline(ok.as_bytes(), TimelineFormat::Csv).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[1].description, "click B");
        let bad = "timestamp,description\n3.2,click A\n1.0,click B\n";
        assert!(matches!(parse_timeline(bad.as_bytes(), TimelineFormat::Csv), Err(Error::Format { line: 3, .. })));
        let dup = "timestamp,description\n3.2,a\n3.2,b\n";
        assert!(matches!(parse_timeline(dup.as_bytes(), TimelineFormat::Csv), Err(Error::Format { line: 3, .. })));
    }

    #[test]
    fn timeline_jsonl() {
        let text = "{\"timestamp\": 1.0, \"description\": \"a\"}\n\n{\"timestamp\": 0.5, \"description\": \"b\"}\n";
        assert!(matches!(parse_timeline(text.as_bytes(), TimelineFormat::Jsonl), Err(Error::Format { line: 3, .. })));
    }

    fn frames() -> Vec<FrameRef> {
        (0..=20).map(|i| FrameRef::new("s", i, i as f64 / 10.0, format!("s/{i}.png"))).collect()
    }

    fn ev(t: f64) -> ActionEvent {
        ActionEvent { timestamp: t, description: format!("at {t}") }
    }

    #[test]
    fn keyframe_rule() {
        let m = extract_keyframes(&frames(), &[ev(1.25), ev(1.2), ev(0.0)]).unwrap();
        assert!((m.pairs[0].0.timestamp - 1.2).abs() < 1e-12);
        assert!((m.pairs[1].0.timestamp - 1.1).abs() < 1e-12);
        assert_eq!(m.unmatched, vec![ev(0.0)]);
    }

    #[test]
    fn emission() {
        let m = extract_keyframes(&frames(), &[ev(0.55)]).unwrap();
        let mut out = Vec::new();
        assert_eq!(emit_samples(&mut out, &m.pairs).unwrap(), 1);
        let line: serde_json::Value = serde_json::from_slice(&out).unwrap();
        let keys: Vec<&String> = line.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["image", "instruction"]);
        let mut empty = Vec::new();
        assert_eq!(emit_samples(&mut empty, &[]).unwrap(), 0);
        assert!(empty.is_empty());
        let mut bad = m.pairs.clone();
        bad[0].0.content.clear();
        assert!(matches!(emit_samples(Vec::new(), &bad), Err(Error::Emission(_))));
    }
}
