use std::collections::BTreeMap;
use std::io::Write;

use cgran_core::granularity::{build_dataset, parse_expr, read_dataset, write_dataset, SampleRecord};
use cgran_core::ingest::*;
use cgran_core::modal::{Corpus, FrameRef};
use cgran_core::synth;
use proptest::prelude::*;

#[test]
fn batch_of_82_recordings() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..82 {
        let mut f = std::fs::File::create(dir.path().join(format!("video_{k:02}.csv"))).unwrap();
        writeln!(f, "timestamp,description").unwrap();
        for i in 0..3 {
            writeln!(f, "{}.5,\"Click [Control {i}]\"", i * 2 + 1).unwrap();
        }
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let groups = read_timeline_dir(dir.path()).unwrap();
    assert_eq!(groups.len(), 82);
    assert!(groups.values().all(|e| e.len() == 3));
}

#[test]
fn batch_error_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "timestamp,description\n2,a\n1,b\n").unwrap();
    let err = read_timeline_dir(dir.path()).unwrap_err();
    assert!(matches!(&err, cgran_core::Error::Format { line: 3, message } if message.contains("bad.csv")), "{err}");
}

#[test]
fn timeline_to_scene_record() {
    let frames: Vec<FrameRef> = (0..10).map(|i| FrameRef::new("rec", i, i as f64, format!("rec/{i}.png"))).collect();
    let events: Vec<ActionEvent> = [2.5, 5.0, 8.2]
        .iter()
        .map(|t| ActionEvent { timestamp: *t, description: format!("act {t}") })
        .collect();
    let m = extract_keyframes(&frames, &events).unwrap();
    let rec = scene_record("rec", &frames, &m, vec!["tok".into()]).unwrap();
    assert_eq!(rec.key_indices, vec![2, 4, 8]);
    let video = rec.into_video().unwrap();
    assert_eq!(video.key_count(), 3);
}

#[test]
fn fused_samples_round_trip() {
    let c = Corpus::decompose(synth::corpus_videos(6, 24, 1).unwrap()).unwrap();
    let d = build_dataset(&parse_expr("S*M*V+S").unwrap(), &c).unwrap();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &d).unwrap();
    let back: Vec<SampleRecord> = read_dataset(buf.as_slice()).unwrap();
    assert_eq!(back.len(), d.len());
    let mut again = Vec::new();
    for r in &back {
        serde_json::to_writer(&mut again, r).unwrap();
        again.push(b'\n');
    }
    assert_eq!(again, buf);
}

#[test]
fn loss_curve_csv() {
    let text = "{\"current_steps\": 10, \"loss\": 2.0}\n{\"current_steps\": 20, \"loss\": 1.5, \"eval_loss\": 1.7, \"epoch\": 1.0}\n";
    let entries = read_trainer_log(text.as_bytes()).unwrap();
    let mut out = Vec::new();
    write_loss_curve(&mut out, &entries).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "step,epoch,train_loss,eval_loss\n10,,2,\n20,1,1.5,1.7\n");
}

fn entries(losses: &[f64]) -> Vec<TrainerLogEntry> {
    losses
        .iter()
        .enumerate()
        .map(|(i, l)| TrainerLogEntry {
            step: i as u64 * 10,
            epoch: Some(i as f64),
            train_loss: None,
            eval_loss: Some(*l),
            extra: BTreeMap::new(),
        })
        .collect()
}

proptest! {
    #[test]
    fn keyframes_precede_their_actions(
        gaps in proptest::collection::vec(1u32..20, 1..40),
        events in proptest::collection::vec(0u32..500, 0..20),
    ) {
        let mut t = 0u32;
        let frames: Vec<FrameRef> = gaps.iter().enumerate().map(|(i, g)| {
            t += g;
            FrameRef::new("s", i as u32, t as f64 / 10.0, format!("{i}.png"))
        }).collect();
        let events: Vec<ActionEvent> = events.iter().map(|e| ActionEvent { timestamp: *e as f64 / 10.0, description: "x".into() }).collect();
        let m = extract_keyframes(&frames, &events).unwrap();
        prop_assert_eq!(m.pairs.len() + m.unmatched.len(), events.len());
        for (f, e) in &m.pairs {
            prop_assert!(f.timestamp < e.timestamp);
            let next = frames.iter().find(|g| g.frame_index == f.frame_index + 1);
            prop_assert!(next.is_none_or(|g| g.timestamp >= e.timestamp));
        }
        for e in &m.unmatched {
            prop_assert!(e.timestamp <= frames[0].timestamp);
        }
    }

    #[test]
    fn emit_then_parse_is_identity(texts in proptest::collection::vec("[a-zA-Z0-9 \\[\\]\"']{1,20}", 0..10)) {
        let pairs: Vec<(FrameRef, ActionEvent)> = texts.iter().enumerate().map(|(i, t)| {
            (FrameRef::new("s", i as u32, i as f64, format!("img/{i}.png")), ActionEvent { timestamp: i as f64 + 0.5, description: t.clone() })
        }).collect();
        let mut buf = Vec::new();
        emit_samples(&mut buf, &pairs).unwrap();
        let back = read_image_instructions(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), pairs.len());
        let mut again = Vec::new();
        for r in &back {
            serde_json::to_writer(&mut again, r).unwrap();
            again.push(b'\n');
        }
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn best_is_global_minimum(losses in proptest::collection::vec(0.01f64..5.0, 1..30), patience in 1usize..5) {
        let r = select_early_stop(&entries(&losses), patience, None).unwrap();
        let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r.best_loss, min);
        prop_assert!(losses[..r.best_index].iter().all(|l| *l > min));
        if let Some(s) = r.stop_index {
            prop_assert!(s > r.best_index);
            prop_assert!(losses[s + 1 - patience..=s].iter().all(|l| *l > min + r.delta));
        }
    }
}
