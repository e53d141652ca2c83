//! The video → multi-image → static derivation hierarchy.
//!
//! A scene is recorded once as a [`VideoSample`]. Its key transition frames
//! form the scene's [`MultiImageSample`], and unpacking those frames one by
//! one yields the scene's [`StaticImage`]s. [`Corpus::decompose`] performs the
//! derivation; the `validate_*` functions check that a corpus (possibly
//! assembled by hand or edited after the fact) still satisfies the derivation,
//! label and overlap constraints.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Error, Result};

pub const MIN_VIDEO_FRAMES: usize = 5;
pub const MIN_KEY_FRAMES: usize = 3;
pub const MAX_KEY_FRAMES: usize = 6;

/// Pearson correlation a static feature must exceed against its multi-image feature.
pub const DERIVATION_CORRELATION: f64 = 0.8;

/// Overlap above which two scenes are considered duplicates.
pub const OVERLAP_HARD_LIMIT: f64 = 0.5;
/// Overlap above which only one member of a pair is kept for covariance estimation.
pub const OVERLAP_EXCLUSION: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("feature entry {pos} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub scene_id: String,
    pub frame_index: u32,
    pub timestamp: f64,
    /// Opaque media reference (path or content hash). Equality is by value.
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<FeatureVector>,
}

impl FrameRef {
    pub fn new(scene_id: impl Into<String>, frame_index: u32, timestamp: f64, content: impl Into<String>) -> Self {
        Self {
            scene_id: scene_id.into(),
            frame_index,
            timestamp,
            content: content.into(),
            feature: None,
        }
    }

    /// Same frame of the same scene, ignoring any attached feature.
    pub fn same_frame(&self, other: &FrameRef) -> bool {
        self.scene_id == other.scene_id && self.frame_index == other.frame_index && self.content == other.content
    }
}

/// Discrete scene descriptors: map coordinates, action labels, unit status.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneFeatures(BTreeSet<String>);

impl SceneFeatures {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(tokens.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn insert(&mut self, token: impl Into<String>) -> bool {
        self.0.insert(token.into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoSample {
    pub scene_id: String,
    pub frames: Vec<FrameRef>,
    /// Frame indices of the key transition frames, strictly increasing.
    pub key_indices: Vec<u32>,
    pub features: SceneFeatures,
    /// One instruction per key frame.
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<FeatureVector>,
}

impl VideoSample {
    pub fn new(
        scene_id: impl Into<String>,
        frames: Vec<FrameRef>,
        key_indices: Vec<u32>,
        features: SceneFeatures,
        labels: Vec<String>,
    ) -> Result<Self> {
        let v = Self {
            scene_id: scene_id.into(),
            frames,
            key_indices,
            features,
            labels,
            feature: None,
        };
        v.check()?;
        Ok(v)
    }

    /// Structural invariants of a single video sample.
    pub fn check(&self) -> Result<()> {
        let id = &self.scene_id;
        if self.frames.len() < MIN_VIDEO_FRAMES {
            return Err(domain(format!(
                "scene {id}: {} frames, need at least {MIN_VIDEO_FRAMES}",
                self.frames.len()
            )));
        }
        if let Some(f) = self.frames.iter().find(|f| &f.scene_id != id) {
            return Err(domain(format!("scene {id}: frame {} belongs to scene {}", f.frame_index, f.scene_id)));
        }
        for w in self.frames.windows(2) {
            if w[1].frame_index <= w[0].frame_index || w[1].timestamp <= w[0].timestamp {
                return Err(domain(format!(
                    "scene {id}: frame {} does not follow frame {} in index and time",
                    w[1].frame_index, w[0].frame_index
                )));
            }
        }
        let k = self.key_indices.len();
        if !(MIN_KEY_FRAMES..=MAX_KEY_FRAMES).contains(&k) {
            return Err(domain(format!(
                "scene {id}: {k} key frames, expected {MIN_KEY_FRAMES}..={MAX_KEY_FRAMES}"
            )));
        }
        if self.key_indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain(format!("scene {id}: key indices not strictly increasing")));
        }
        for idx in &self.key_indices {
            if !self.frames.iter().any(|f| f.frame_index == *idx) {
                return Err(domain(format!("scene {id}: key index {idx} is not a frame of the scene")));
            }
        }
        if self.labels.len() != k {
            return Err(domain(format!(
                "scene {id}: {} labels for {k} key frames",
                self.labels.len()
            )));
        }
        Ok(())
    }

    pub fn key_count(&self) -> usize {
        self.key_indices.len()
    }

    pub fn key_frames(&self) -> Vec<&FrameRef> {
        self.key_indices
            .iter()
            .filter_map(|idx| self.frames.iter().find(|f| f.frame_index == *idx))
            .collect()
    }

    /// The scene label used for cross-modality comparison: the ordered
    /// instructions joined by newlines.
    pub fn scene_label(&self) -> String {
        self.labels.join("\n")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiImageSample {
    pub scene_id: String,
    pub frames: Vec<FrameRef>,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<FeatureVector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticImage {
    pub scene_id: String,
    pub frame: FrameRef,
    /// `(k, i)`: scene position in the corpus and frame position inside `m_k`, both 0-based.
    pub source_ordinal: (usize, usize),
    /// 0-based global index `t_k + i`.
    pub global_index: usize,
    pub label: String,
}

/// All three modalities of a set of scenes, in scene order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub videos: Vec<VideoSample>,
    pub multis: Vec<MultiImageSample>,
    pub statics: Vec<StaticImage>,
}

impl Corpus {
    /// Derive the multi-image and static modalities from the videos.
    pub fn decompose(videos: Vec<VideoSample>) -> Result<Self> {
        let mut multis = Vec::with_capacity(videos.len());
        let mut statics = Vec::new();
        let offsets = static_offsets(&videos);
        let mut seen = BTreeSet::new();
        for (k, v) in videos.iter().enumerate() {
            v.check()?;
            if !seen.insert(v.scene_id.as_str()) {
                return Err(domain(format!("duplicate scene id {}", v.scene_id)));
            }
            let frames: Vec<FrameRef> = v.key_frames().into_iter().cloned().collect();
            for (i, frame) in frames.iter().enumerate() {
                statics.push(StaticImage {
                    scene_id: v.scene_id.clone(),
                    frame: frame.clone(),
                    source_ordinal: (k, i),
                    global_index: offsets[k] + i,
                    label: v.labels[i].clone(),
                });
            }
            multis.push(MultiImageSample {
                scene_id: v.scene_id.clone(),
                frames,
                labels: v.labels.clone(),
                feature: None,
            });
        }
        Ok(Self { videos, multis, statics })
    }

    pub fn scene_count(&self) -> usize {
        self.videos.len()
    }

    /// `N_S = Σ_k K_k`.
    pub fn expected_static_count(&self) -> usize {
        self.videos.iter().map(VideoSample::key_count).sum()
    }

    pub fn video(&self, scene_id: &str) -> Option<&VideoSample> {
        self.videos.iter().find(|v| v.scene_id == scene_id)
    }

    pub fn multi(&self, scene_id: &str) -> Option<&MultiImageSample> {
        self.multis.iter().find(|m| m.scene_id == scene_id)
    }

    /// Statics grouped by scene, each group in source-frame order.
    pub fn statics_by_scene(&self) -> HashMap<&str, Vec<&StaticImage>> {
        let mut map: HashMap<&str, Vec<&StaticImage>> = HashMap::new();
        for s in &self.statics {
            map.entry(s.scene_id.as_str()).or_default().push(s);
        }
        map
    }
}

/// Prefix sums of key-frame counts: `t_1 = 0`, `t_{k+1} = t_k + K_k`.
pub fn static_offsets(videos: &[VideoSample]) -> Vec<usize> {
    videos
        .iter()
        .scan(0usize, |acc, v| {
            let start = *acc;
            *acc += v.key_count();
            Some(start)
        })
        .collect()
}

/// Intersection over the smaller of the two feature sets.
pub fn scene_overlap(a: &SceneFeatures, b: &SceneFeatures) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("scene overlap of an empty feature set"));
    }
    let common = a.0.intersection(&b.0).count();
    Ok(common as f64 / a.len().min(b.len()) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapPair {
    pub a: String,
    pub b: String,
    pub omega: f64,
}

/// Every scene pair with non-zero overlap, in corpus order.
pub fn overlapping_pairs(videos: &[VideoSample]) -> Result<Vec<OverlapPair>> {
    let mut out = Vec::new();
    for (i, a) in videos.iter().enumerate() {
        for b in &videos[i + 1..] {
            let omega = scene_overlap(&a.features, &b.features)
                .map_err(|_| domain(format!("scene {} or {} has no scene features", a.scene_id, b.scene_id)))?;
            if omega > 0.0 {
                out.push(OverlapPair { a: a.scene_id.clone(), b: b.scene_id.clone(), omega });
            }
        }
    }
    Ok(out)
}

/// Mean overlap over the pairs that overlap at all; 0 when none do.
pub fn mean_overlap(pairs: &[OverlapPair]) -> f64 {
    if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.omega).sum::<f64>() / pairs.len() as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightPlan {
    /// Covariance weight of every retained scene.
    pub weights: BTreeMap<String, f64>,
    pub excluded: BTreeSet<String>,
    /// Pairs above the hard limit; these also show up as C3.1 violations.
    pub hard_violations: Vec<OverlapPair>,
}

impl WeightPlan {
    pub fn weight(&self, scene_id: &str) -> Option<f64> {
        self.weights.get(scene_id).copied()
    }
}

/// Turn pairwise overlaps into per-scene covariance weights.
///
/// `key_counts` lists every scene taking part (weight 1 unless a pair says
/// otherwise). Pairs with `ω > 0.3` keep only the scene with more key frames
/// (the first of the pair on ties); pairs with `0 < ω ≤ 0.3` weight both
/// members by `1 − ω`. A scene in several pairs takes the smallest weight.
pub fn overlap_weight_plan(pairs: &[OverlapPair], key_counts: &BTreeMap<String, usize>) -> Result<WeightPlan> {
    let mut plan = WeightPlan {
        weights: key_counts.keys().map(|k| (k.clone(), 1.0)).collect(),
        ..Default::default()
    };
    for p in pairs {
        if !(0.0..=1.0).contains(&p.omega) || p.omega.is_nan() {
            return Err(domain(format!("overlap {} for ({}, {}) outside [0, 1]", p.omega, p.a, p.b)));
        }
        for id in [&p.a, &p.b] {
            if !key_counts.contains_key(id) {
                return Err(usage(format!("scene {id} appears in an overlap pair but has no key count")));
            }
        }
    }
    for p in pairs {
        if p.omega > OVERLAP_HARD_LIMIT {
            plan.hard_violations.push(p.clone());
        }
        if p.omega > OVERLAP_EXCLUSION {
            if plan.excluded.contains(&p.a) || plan.excluded.contains(&p.b) {
                continue;
            }
            let drop = if key_counts[&p.b] > key_counts[&p.a] { &p.a } else { &p.b };
            plan.weights.remove(drop);
            plan.excluded.insert(drop.clone());
        } else if p.omega > 0.0 {
            let w = 1.0 - p.omega;
            for id in [&p.a, &p.b] {
                if let Some(cur) = plan.weights.get_mut(id) {
                    *cur = cur.min(w);
                }
            }
        }
    }
    Ok(plan)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintId {
    /// Weak scene independence.
    #[serde(rename = "C3.1")]
    SceneIndependence,
    /// Label consistency.
    #[serde(rename = "C3.2")]
    LabelConsistency,
    /// Derivation consistency.
    #[serde(rename = "C3.3")]
    DerivationConsistency,
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintId::SceneIndependence => "C3.1",
            ConstraintId::LabelConsistency => "C3.2",
            ConstraintId::DerivationConsistency => "C3.3",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub scene_ids: Vec<String>,
    /// Short category, e.g. "frame order" or "frame number matching".
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    /// Checks that were skipped, e.g. feature correlation without feature vectors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub not_evaluated: Vec<String>,
}

impl Default for ConstraintReport {
    fn default() -> Self {
        Self { passed: true, violations: Vec::new(), not_evaluated: Vec::new() }
    }
}

impl ConstraintReport {
    fn push(&mut self, constraint: ConstraintId, scene_ids: Vec<String>, kind: &str, message: String) {
        self.violations.push(Violation { constraint, scene_ids, kind: kind.to_string(), message });
        self.passed = false;
    }

    pub fn merge(&mut self, other: ConstraintReport) {
        self.passed &= other.passed;
        self.violations.extend(other.violations);
        self.not_evaluated.extend(other.not_evaluated);
    }

    pub fn count(&self, constraint: ConstraintId) -> usize {
        self.violations.iter().filter(|v| v.constraint == constraint).count()
    }
}

/// Sample Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Derivation consistency of one scene: `m` must equal the key frames of `v`
/// in order, `s` must unpack `m` frame by frame, and attached features must
/// correlate above [`DERIVATION_CORRELATION`].
///
/// At most one violation is reported per category per scene.
pub fn validate_derivation(v: &VideoSample, m: &MultiImageSample, s: &[&StaticImage]) -> Result<ConstraintReport> {
    let id = &v.scene_id;
    if &m.scene_id != id {
        return Err(usage(format!("multi-image {} paired with video {id}", m.scene_id)));
    }
    if let Some(bad) = s.iter().find(|st| &st.scene_id != id) {
        return Err(usage(format!("static of scene {} paired with video {id}", bad.scene_id)));
    }
    let mut report = ConstraintReport::default();
    let scene = || vec![id.clone()];
    let key = v.key_frames();
    let k = key.len();

    let mut count_problems = Vec::new();
    if m.frames.len() != k {
        count_problems.push(format!("multi-image has {} frames, video has {k} key frames", m.frames.len()));
    }
    if s.len() != k {
        count_problems.push(format!("{} static images for {k} key frames", s.len()));
    }
    if !count_problems.is_empty() {
        report.push(ConstraintId::DerivationConsistency, scene(), "frame number matching", count_problems.join("; "));
    }

    let mut order_problems = Vec::new();
    if m.frames.len() == k {
        let bad: Vec<usize> = (0..k).filter(|&i| !m.frames[i].same_frame(key[i])).collect();
        if !bad.is_empty() {
            order_problems.push(format!("multi-image frames differ from video key frames at positions {bad:?}"));
        }
    }
    if s.len() == m.frames.len() {
        let bad: Vec<usize> = (0..s.len())
            .filter(|&i| s[i].source_ordinal.1 != i || !s[i].frame.same_frame(&m.frames[i]))
            .collect();
        if !bad.is_empty() {
            order_problems.push(format!("static images do not unpack the multi-image at positions {bad:?}"));
        }
    }
    if !order_problems.is_empty() {
        report.push(ConstraintId::DerivationConsistency, scene(), "frame order", order_problems.join("; "));
    }

    match &m.feature {
        Some(mf) if s.iter().all(|st| st.frame.feature.is_some()) && !s.is_empty() => {
            let mut weak = Vec::new();
            for (i, st) in s.iter().enumerate() {
                let sf = st.frame.feature.as_ref().expect("checked above");
                match pearson(sf.as_slice(), mf.as_slice()) {
                    Some(r) if r > DERIVATION_CORRELATION => {}
                    Some(r) => weak.push(format!("static {i}: r = {r:.4}")),
                    None => weak.push(format!("static {i}: correlation undefined")),
                }
            }
            if !weak.is_empty() {
                report.push(ConstraintId::DerivationConsistency, scene(), "feature correlation", weak.join("; "));
            }
        }
        _ => report.not_evaluated.push(format!("{id}: feature correlation (no feature vectors)")),
    }
    Ok(report)
}

/// Label consistency: statics and multi-images carry the video's labels at
/// corresponding positions, and overlapping scenes carry identical labels.
pub fn validate_labels(corpus: &Corpus) -> Result<ConstraintReport> {
    let mut report = ConstraintReport::default();
    for m in &corpus.multis {
        if let Some(v) = corpus.video(&m.scene_id) {
            if m.labels != v.labels {
                report.push(
                    ConstraintId::LabelConsistency,
                    vec![m.scene_id.clone()],
                    "modality labels",
                    "multi-image labels differ from video labels".into(),
                );
            }
        }
    }
    for s in &corpus.statics {
        let Some(v) = corpus.video(&s.scene_id) else { continue };
        let i = s.source_ordinal.1;
        match v.labels.get(i) {
            Some(expected) if expected == &s.label => {}
            Some(expected) => report.push(
                ConstraintId::LabelConsistency,
                vec![s.scene_id.clone()],
                "modality labels",
                format!("static {} labelled {:?}, video says {:?}", s.global_index, s.label, expected),
            ),
            None => report.push(
                ConstraintId::LabelConsistency,
                vec![s.scene_id.clone()],
                "modality labels",
                format!("static {} points at key frame {i} which has no label", s.global_index),
            ),
        }
    }
    for p in overlapping_pairs(&corpus.videos)? {
        let (a, b) = (corpus.video(&p.a).expect("pair from corpus"), corpus.video(&p.b).expect("pair from corpus"));
        if a.labels != b.labels {
            report.push(
                ConstraintId::LabelConsistency,
                vec![p.a.clone(), p.b.clone()],
                "overlapping scene labels",
                format!("scenes overlap (ω = {:.3}) but carry different labels", p.omega),
            );
        }
    }
    Ok(report)
}

/// Weak scene independence: no pair of scenes may overlap by more than 0.5.
pub fn validate_overlap(corpus: &Corpus) -> Result<ConstraintReport> {
    let mut report = ConstraintReport::default();
    for p in overlapping_pairs(&corpus.videos)? {
        if p.omega > OVERLAP_HARD_LIMIT {
            report.push(
                ConstraintId::SceneIndependence,
                vec![p.a.clone(), p.b.clone()],
                "scene overlap",
                format!("ω = {:.3} exceeds {OVERLAP_HARD_LIMIT}", p.omega),
            );
        }
    }
    Ok(report)
}

/// All three constraint families over a whole corpus.
pub fn validate_corpus(corpus: &Corpus) -> Result<ConstraintReport> {
    let mut report = ConstraintReport::default();
    let by_scene = corpus.statics_by_scene();
    let offsets = static_offsets(&corpus.videos);

    if corpus.statics.len() != corpus.expected_static_count() {
        report.push(
            ConstraintId::DerivationConsistency,
            Vec::new(),
            "static count",
            format!(
                "{} static images, key frames sum to {}",
                corpus.statics.len(),
                corpus.expected_static_count()
            ),
        );
    }
    let known: BTreeSet<&str> = corpus.videos.iter().map(|v| v.scene_id.as_str()).collect();
    for orphan in by_scene.keys().filter(|id| !known.contains(*id)) {
        report.push(
            ConstraintId::DerivationConsistency,
            vec![orphan.to_string()],
            "orphan statics",
            "static images for a scene with no video".into(),
        );
    }

    for (k, v) in corpus.videos.iter().enumerate() {
        if let Err(e) = v.check() {
            report.push(ConstraintId::DerivationConsistency, vec![v.scene_id.clone()], "video structure", e.to_string());
            continue;
        }
        let Some(m) = corpus.multi(&v.scene_id) else {
            report.push(
                ConstraintId::DerivationConsistency,
                vec![v.scene_id.clone()],
                "missing multi-image",
                "scene has no multi-image sample".into(),
            );
            continue;
        };
        let statics = by_scene.get(v.scene_id.as_str()).cloned().unwrap_or_default();
        let misplaced: Vec<usize> = statics
            .iter()
            .filter(|s| s.source_ordinal.0 != k || s.global_index != offsets[k] + s.source_ordinal.1)
            .map(|s| s.global_index)
            .collect();
        if !misplaced.is_empty() {
            report.push(
                ConstraintId::DerivationConsistency,
                vec![v.scene_id.clone()],
                "static index",
                format!("static global indices {misplaced:?} do not match t_k + i"),
            );
        }
        report.merge(validate_derivation(v, m, &statics)?);
    }
    report.merge(validate_labels(corpus)?);
    report.merge(validate_overlap(corpus)?);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub index: u32,
    pub timestamp: f64,
    pub content: String,
}

/// One line of a corpus manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: String,
    pub frames: Vec<ManifestFrame>,
    pub key_indices: Vec<u32>,
    pub features: Vec<String>,
    pub labels: Vec<String>,
}

impl SceneRecord {
    pub fn from_video(v: &VideoSample) -> Self {
        Self {
            scene_id: v.scene_id.clone(),
            frames: v
                .frames
                .iter()
                .map(|f| ManifestFrame { index: f.frame_index, timestamp: f.timestamp, content: f.content.clone() })
                .collect(),
            key_indices: v.key_indices.clone(),
            features: v.features.iter().map(str::to_string).collect(),
            labels: v.labels.clone(),
        }
    }

    pub fn into_video(self) -> Result<VideoSample> {
        let frames = self
            .frames
            .into_iter()
            .map(|f| FrameRef::new(self.scene_id.clone(), f.index, f.timestamp, f.content))
            .collect();
        VideoSample::new(self.scene_id, frames, self.key_indices, SceneFeatures::new(self.features), self.labels)
    }
}

pub fn read_manifest<R: BufRead>(reader: R) -> Result<Vec<VideoSample>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SceneRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format { line: n + 1, message: e.to_string() })?;
        out.push(rec.into_video().map_err(|e| Error::Format { line: n + 1, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn write_manifest<W: Write>(mut writer: W, videos: &[VideoSample]) -> Result<()> {
    for v in videos {
        serde_json::to_writer(&mut writer, &SceneRecord::from_video(v))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
