//! Weighted covariances and Gaussian mutual information with the scene-overlap
//! correction `I = ½·log₂(|Σx|·|Σy| / |Σxy|) · (1 − ω_avg/2)`.
//!
//! Determinants are taken in log space from Cholesky factors. When a matrix is
//! not positive definite, every matrix of the triple gets the same ridge
//! `εI` with `ε = 1e-8 · tr(Σxy) / (dx + dy)`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Error, Result};
use crate::granularity::Modality;
use crate::modal::{Corpus, FeatureVector, WeightPlan};

pub const RIDGE_SCALE: f64 = 1e-8;
/// Squared Cholesky pivots below this fraction of the largest diagonal entry
/// count as rank deficiency.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Default per-modality sample weight.
pub fn default_modality_weight(m: Modality) -> f64 {
    match m {
        Modality::S => 0.2,
        Modality::M => 0.8,
        Modality::V => 1.0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModalityFeatureSet {
    pub modality: Modality,
    /// Feature vectors with their per-sample (overlap) weights.
    pub vectors: Vec<(FeatureVector, f64)>,
    /// Multiplies every sample weight. It cancels under normalization but is
    /// kept so mixed-modality pools can be weighted consistently.
    pub modality_weight: f64,
}

impl ModalityFeatureSet {
    pub fn new(modality: Modality, vectors: Vec<(FeatureVector, f64)>) -> Self {
        Self { modality, vectors, modality_weight: default_modality_weight(modality) }
    }
}

/// `Σ = Σᵢ wᵢ (xᵢ − μ)(xᵢ − μ)ᵀ / Σᵢ wᵢ` around the weighted mean.
pub fn weighted_covariance(set: &ModalityFeatureSet) -> Result<DMatrix<f64>> {
    if set.modality_weight <= 0.0 || !set.modality_weight.is_finite() {
        return Err(domain("modality weight must be positive"));
    }
    let rows: Vec<&[f64]> = set.vectors.iter().map(|(v, _)| v.as_slice()).collect();
    let weights: Vec<f64> = set.vectors.iter().map(|(_, w)| w * set.modality_weight).collect();
    covariance_of_rows(&rows, &weights)
}

pub(crate) fn covariance_of_rows(rows: &[&[f64]], weights: &[f64]) -> Result<DMatrix<f64>> {
    if rows.len() < 2 {
        return Err(domain(format!("covariance needs at least 2 vectors, got {}", rows.len())));
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(domain("zero-dimensional features"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != d) {
        return Err(domain(format!("vector {i} has dimension {}, expected {d}", rows[i].len())));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(domain(format!("sample weight {w} is not positive")));
    }
    let total: f64 = weights.iter().sum();
    let mut mean = DVector::zeros(d);
    for (r, w) in rows.iter().zip(weights) {
        mean += DVector::from_column_slice(r) * *w;
    }
    mean /= total;
    let mut cov = DMatrix::zeros(d, d);
    for (r, w) in rows.iter().zip(weights) {
        let c = DVector::from_column_slice(r) - &mean;
        cov.ger(*w / total, &c, &c, 1.0);
    }
    // exact symmetry
    let t = cov.transpose();
    cov += t;
    cov *= 0.5;
    Ok(cov)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MIResult {
    /// Overlap-corrected value.
    pub i_bits: f64,
    pub raw_bits: f64,
    pub omega_avg: f64,
    pub correction: f64,
    pub log2_det_x: f64,
    pub log2_det_y: f64,
    pub log2_det_xy: f64,
    /// Ridge added to every diagonal; 0 when none was needed.
    pub epsilon: f64,
}

fn log2_det(m: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    let max_diag = (0..m.nrows()).map(|i| m[(i, i)]).fold(0.0f64, f64::max);
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) || !d.is_finite() || d * d <= PIVOT_FLOOR * max_diag {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc / std::f64::consts::LN_2)
}

fn with_ridge(m: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let mut out = m.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += eps;
    }
    out
}

/// Overlap-corrected Gaussian mutual information from a covariance triple.
pub fn gaussian_mi(sx: &DMatrix<f64>, sy: &DMatrix<f64>, sxy: &DMatrix<f64>, omega_avg: f64) -> Result<MIResult> {
    if !(0.0..=1.0).contains(&omega_avg) {
        return Err(domain(format!("ω_avg = {omega_avg} outside [0, 1]")));
    }
    let (dx, dy) = (sx.nrows(), sy.nrows());
    if !sx.is_square() || !sy.is_square() || !sxy.is_square() || sxy.nrows() != dx + dy {
        return Err(usage(format!(
            "covariance shapes {}x{}, {}x{}, {}x{} do not form a joint triple",
            sx.nrows(),
            sx.ncols(),
            sy.nrows(),
            sy.ncols(),
            sxy.nrows(),
            sxy.ncols()
        )));
    }
    let scale = sxy.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let block_x = sxy.view((0, 0), (dx, dx));
    let block_y = sxy.view((dx, dx), (dy, dy));
    if (block_x - sx).amax() > 1e-9 * scale || (block_y - sy).amax() > 1e-9 * scale {
        return Err(usage("joint covariance does not contain the marginals as diagonal blocks"));
    }

    let mut epsilon = 0.0;
    let dets = match (log2_det(sx), log2_det(sy), log2_det(sxy)) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            epsilon = RIDGE_SCALE * sxy.trace() / (dx + dy) as f64;
            let (a, b, c) = (
                log2_det(&with_ridge(sx, epsilon)),
                log2_det(&with_ridge(sy, epsilon)),
                log2_det(&with_ridge(sxy, epsilon)),
            );
            match (a, b, c) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    let min_diag = (0..dx + dy).map(|i| sxy[(i, i)]).fold(f64::INFINITY, f64::min);
                    return Err(Error::Numerical(format!(
                        "joint covariance not positive definite after ridge ε = {epsilon:e} \
                         (dims {dx}+{dy}, trace {:e}, min diagonal {min_diag:e})",
                        sxy.trace()
                    )));
                }
            }
        }
    };
    let raw_bits = 0.5 * (dets.0 + dets.1 - dets.2);
    let correction = 1.0 - omega_avg / 2.0;
    Ok(MIResult {
        i_bits: raw_bits * correction,
        raw_bits,
        omega_avg,
        correction,
        log2_det_x: dets.0,
        log2_det_y: dets.1,
        log2_det_xy: dets.2,
        epsilon,
    })
}

/// Marginal and joint covariances of weighted paired observations.
pub fn joint_covariances(
    xs: &[&[f64]],
    ys: &[&[f64]],
    weights: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if xs.len() != ys.len() || xs.len() != weights.len() {
        return Err(usage("paired observations must have equal counts"));
    }
    let stacked: Vec<Vec<f64>> = xs.iter().zip(ys).map(|(x, y)| x.iter().chain(y.iter()).copied().collect()).collect();
    let rows: Vec<&[f64]> = stacked.iter().map(Vec::as_slice).collect();
    let joint = covariance_of_rows(&rows, weights)?;
    let dx = xs.first().map_or(0, |x| x.len());
    let dy = joint.nrows() - dx;
    let sx = joint.view((0, 0), (dx, dx)).into_owned();
    let sy = joint.view((dx, dx), (dy, dy)).into_owned();
    Ok((sx, sy, joint))
}

pub fn paired_mi(xs: &[&[f64]], ys: &[&[f64]], weights: &[f64], omega_avg: f64) -> Result<MIResult> {
    let (sx, sy, sxy) = joint_covariances(xs, ys, weights)?;
    gaussian_mi(&sx, &sy, &sxy, omega_avg)
}

/// Per-scene features of all three modalities.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneTriple {
    pub scene_id: String,
    pub statics: Vec<FeatureVector>,
    pub multi: FeatureVector,
    pub video: FeatureVector,
    pub weight: f64,
}

impl SceneTriple {
    /// Static features averaged over the scene's key frames.
    pub fn static_mean(&self) -> Result<Vec<f64>> {
        let first = self
            .statics
            .first()
            .ok_or_else(|| usage(format!("scene {} has no static features", self.scene_id)))?;
        let d = first.dim();
        let mut mean = vec![0.0; d];
        for s in &self.statics {
            if s.dim() != d {
                return Err(domain(format!("scene {}: static feature dimensions differ", self.scene_id)));
            }
            for (m, v) in mean.iter_mut().zip(s.as_slice()) {
                *m += v;
            }
        }
        let n = self.statics.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }
}

/// Collect feature triples from a corpus. Scenes excluded by `plan` are
/// dropped; retained scenes carry the plan's weight.
pub fn triples_from_corpus(corpus: &Corpus, plan: Option<&WeightPlan>) -> Result<Vec<SceneTriple>> {
    let by_scene = corpus.statics_by_scene();
    let mut out = Vec::new();
    for v in &corpus.videos {
        let weight = match plan {
            Some(p) => match p.weight(&v.scene_id) {
                Some(w) => w,
                None => continue,
            },
            None => 1.0,
        };
        let missing = |m: char| usage(format!("scene {} has no {m} features", v.scene_id));
        let video = v.feature.clone().ok_or_else(|| missing('V'))?;
        let multi = corpus.multi(&v.scene_id).and_then(|m| m.feature.clone()).ok_or_else(|| missing('M'))?;
        let statics = by_scene
            .get(v.scene_id.as_str())
            .map(|ss| ss.iter().map(|s| s.frame.feature.clone()).collect::<Option<Vec<_>>>())
            .unwrap_or(None)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| missing('S'))?;
        out.push(SceneTriple { scene_id: v.scene_id.clone(), statics, multi, video, weight });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub i_sv: MIResult,
    pub i_sm: MIResult,
    /// `I(S;V) > I(S;M)` and neither value is indistinguishable from estimation noise.
    pub ordered: bool,
    /// Both values sit below the small-sample bias floor.
    pub degenerate: bool,
    pub bias_floor_bits: f64,
}

/// Typical upward bias of the plug-in Gaussian estimator on independent
/// data, `dx·dy / (2n)` nats, tripled to give a noise floor in bits.
pub fn bias_floor_bits(dx: usize, dy: usize, n: usize) -> f64 {
    3.0 * (dx * dy) as f64 / (2.0 * n as f64 * std::f64::consts::LN_2)
}

/// Compare `I(S;V)` with `I(S;M)` over scene-paired features.
pub fn check_ordering(scenes: &[SceneTriple], omega_avg: f64) -> Result<OrderingReport> {
    if scenes.len() < 2 {
        return Err(usage("ordering check needs at least 2 scenes with features"));
    }
    let s_means: Vec<Vec<f64>> = scenes.iter().map(SceneTriple::static_mean).collect::<Result<_>>()?;
    let s: Vec<&[f64]> = s_means.iter().map(Vec::as_slice).collect();
    let m: Vec<&[f64]> = scenes.iter().map(|t| t.multi.as_slice()).collect();
    let v: Vec<&[f64]> = scenes.iter().map(|t| t.video.as_slice()).collect();
    let w: Vec<f64> = scenes.iter().map(|t| t.weight).collect();
    let i_sv = paired_mi(&s, &v, &w, omega_avg)?;
    let i_sm = paired_mi(&s, &m, &w, omega_avg)?;
    let floor = bias_floor_bits(s[0].len(), v[0].len().max(m[0].len()), scenes.len());
    let degenerate = i_sv.raw_bits < floor && i_sm.raw_bits < floor;
    let ordered = !degenerate && i_sv.i_bits > i_sm.i_bits;
    Ok(OrderingReport { i_sv, i_sm, ordered, degenerate, bias_floor_bits: floor })
}

/// Feature matrix file: one modality, one row per observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub modality: Modality,
    pub d: usize,
    pub count: usize,
    pub scene_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureFile {
    pub fn check(&self) -> Result<()> {
        if self.rows.len() != self.count || self.scene_ids.len() != self.count {
            return Err(usage(format!(
                "{} feature file declares {} rows but has {} rows and {} scene ids",
                self.modality,
                self.count,
                self.rows.len(),
                self.scene_ids.len()
            )));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != self.d) {
            return Err(domain(format!("{} feature row {i} has dimension {}", self.modality, self.rows[i].len())));
        }
        Ok(())
    }
}

/// Pair S, M and V feature files by scene. Static rows sharing a scene id are
/// averaged; M and V must have exactly one row per scene.
pub fn triples_from_files(s: &FeatureFile, m: &FeatureFile, v: &FeatureFile) -> Result<Vec<SceneTriple>> {
    for f in [s, m, v] {
        f.check()?;
    }
    let one_per_scene = |f: &FeatureFile| -> Result<std::collections::BTreeMap<String, FeatureVector>> {
        let mut map = std::collections::BTreeMap::new();
        for (id, row) in f.scene_ids.iter().zip(&f.rows) {
            if map.insert(id.clone(), FeatureVector::new(row.clone())?).is_some() {
                return Err(usage(format!("{} features list scene {id} twice", f.modality)));
            }
        }
        Ok(map)
    };
    let mm = one_per_scene(m)?;
    let vm = one_per_scene(v)?;
    let mut order: Vec<String> = Vec::new();
    let mut statics: std::collections::BTreeMap<String, Vec<FeatureVector>> = Default::default();
    for (id, row) in s.scene_ids.iter().zip(&s.rows) {
        if !statics.contains_key(id) {
            order.push(id.clone());
        }
        statics.entry(id.clone()).or_default().push(FeatureVector::new(row.clone())?);
    }
    order
        .into_iter()
        .map(|id| {
            let multi = mm.get(&id).cloned().ok_or_else(|| usage(format!("scene {id} has no M features")))?;
            let video = vm.get(&id).cloned().ok_or_else(|| usage(format!("scene {id} has no V features")))?;
            Ok(SceneTriple { statics: statics.remove(&id).unwrap_or_default(), scene_id: id, multi, video, weight: 1.0 })
        })
        .collect()
}
