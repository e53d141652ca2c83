//! Seeded synthetic corpora.
//!
//! Scenes come in twin pairs that share a task (same key-frame count, same
//! labels) but are recorded on different maps. Every fifth pair also shares
//! 2 of its 10 scene-feature tokens, giving ω = 0.2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};
use crate::info::SceneTriple;
use crate::modal::{FeatureVector, FrameRef, SceneFeatures, VideoSample, MAX_KEY_FRAMES, MIN_KEY_FRAMES};

pub const FEATURE_TOKENS_PER_SCENE: usize = 10;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scene_id(k: usize) -> String {
    format!("scene_{k:03}")
}

/// Key-frame counts in `3..=6`, equal within each twin pair, summing to `total_keys`.
pub fn paired_key_counts(n_scenes: usize, total_keys: usize, seed: u64) -> Result<Vec<usize>> {
    if n_scenes == 0 || !n_scenes.is_multiple_of(2) {
        return Err(domain("scene count must be a positive even number"));
    }
    if !total_keys.is_multiple_of(2) {
        return Err(domain("twin pairs need an even key-frame total"));
    }
    let pairs = n_scenes / 2;
    let per_pair_total = total_keys / 2;
    if per_pair_total < pairs * MIN_KEY_FRAMES || per_pair_total > pairs * MAX_KEY_FRAMES {
        return Err(domain(format!("{total_keys} key frames cannot be spread over {n_scenes} scenes")));
    }
    let mut counts = vec![MIN_KEY_FRAMES; pairs];
    let mut rng = rng(seed);
    let mut remaining = per_pair_total - pairs * MIN_KEY_FRAMES;
    while remaining > 0 {
        let i = rng.random_range(0..pairs);
        if counts[i] < MAX_KEY_FRAMES {
            counts[i] += 1;
            remaining -= 1;
        }
    }
    Ok(counts.into_iter().flat_map(|k| [k, k]).collect())
}

/// A corpus of `n_scenes` videos whose key-frame counts sum to `total_keys`.
pub fn corpus_videos(n_scenes: usize, total_keys: usize, seed: u64) -> Result<Vec<VideoSample>> {
    let counts = paired_key_counts(n_scenes, total_keys, seed)?;
    let mut rng = rng(seed ^ 0x5eed);
    let mut videos = Vec::with_capacity(n_scenes);
    for (k, &key_count) in counts.iter().enumerate() {
        let pair = k / 2;
        let id = scene_id(k);
        let ordinary = rng.random_range(2..=5usize);
        let total = key_count + ordinary;
        let mut t = 0.0;
        let frames: Vec<FrameRef> = (0..total as u32)
            .map(|i| {
                t += 0.1 * rng.random_range(1..=10) as f64;
                FrameRef::new(&id, i, (t * 10.0f64).round() / 10.0, format!("sha:{id}:{i:02}"))
            })
            .collect();
        // key frames spread through the clip, always leaving ordinary frames in between
        let mut keys: Vec<u32> = (0..total as u32).collect();
        while keys.len() > key_count {
            let drop = rng.random_range(0..keys.len());
            keys.remove(drop);
        }
        let labels = (0..key_count).map(|i| format!("task {pair:03}: click [Control {i}]")).collect();
        let mut tokens: Vec<String> = (0..FEATURE_TOKENS_PER_SCENE).map(|i| format!("{id}:f{i}")).collect();
        if pair % 5 == 0 && k % 2 == 1 {
            let twin = scene_id(k - 1);
            tokens[0] = format!("{twin}:f0");
            tokens[1] = format!("{twin}:f1");
        }
        videos.push(VideoSample::new(id, frames, keys, SceneFeatures::new(tokens), labels)?);
    }
    Ok(videos)
}

/// 180 scenes, 1002 key frames in total.
pub fn reference_videos(seed: u64) -> Result<Vec<VideoSample>> {
    corpus_videos(180, 1002, seed)
}

/// Noise levels of the synthetic feature generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureNoise {
    /// Per-frame noise of each static image around the scene's video feature.
    pub statics: f64,
    /// Noise of the multi-image feature around the video feature.
    pub multi: f64,
}

impl Default for FeatureNoise {
    fn default() -> Self {
        Self { statics: 0.5, multi: 1.0 }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize, sigma: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect()
}

/// Scene features where statics and multi-images are noisy copies of the
/// video feature, the multi-image copy being the noisier one.
pub fn feature_chain(n_scenes: usize, d: usize, noise: FeatureNoise, seed: u64) -> Vec<SceneTriple> {
    let mut rng = rng(seed);
    (0..n_scenes)
        .map(|k| {
            let video = gaussian(&mut rng, d, 1.0);
            let key_count = rng.random_range(MIN_KEY_FRAMES..=MAX_KEY_FRAMES);
            let statics = (0..key_count)
                .map(|_| {
                    let e = gaussian(&mut rng, d, noise.statics);
                    FeatureVector::new(video.iter().zip(e).map(|(v, e)| v + e).collect()).expect("finite")
                })
                .collect();
            let e = gaussian(&mut rng, d, noise.multi);
            let multi = FeatureVector::new(video.iter().zip(e).map(|(v, e)| v + e).collect()).expect("finite");
            SceneTriple {
                scene_id: scene_id(k),
                statics,
                multi,
                video: FeatureVector::new(video).expect("finite"),
                weight: 1.0,
            }
        })
        .collect()
}

/// Scene features where the statics carry no information about M or V.
pub fn independent_features(n_scenes: usize, d: usize, seed: u64) -> Vec<SceneTriple> {
    let mut rng = rng(seed);
    (0..n_scenes)
        .map(|k| {
            let video = gaussian(&mut rng, d, 1.0);
            let multi: Vec<f64> = video.iter().zip(gaussian(&mut rng, d, 1.0)).map(|(v, e)| v + e).collect();
            let statics = vec![FeatureVector::new(gaussian(&mut rng, d, 1.0)).expect("finite")];
            SceneTriple {
                scene_id: scene_id(k),
                statics,
                multi: FeatureVector::new(multi).expect("finite"),
                video: FeatureVector::new(video).expect("finite"),
                weight: 1.0,
            }
        })
        .collect()
}
