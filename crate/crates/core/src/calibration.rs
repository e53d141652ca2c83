//! Normalized (0–1000 per axis) to pixel click mapping.
//!
//! The naive map is `px = extent · rel / 1000`, rounded half-up. A per-axis
//! quadratic `a0 + a1·r + a2·r²` fitted by least squares replaces it when the
//! screen's true response is curved, and [`correct`] adds a sliding mean of
//! recent residuals on top, dropping it when those residuals oscillate.

use std::collections::VecDeque;
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const REL_MAX: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenGeometry {
    pub width_px: u32,
    pub height_px: u32,
}

impl ScreenGeometry {
    pub fn new(width_px: u32, height_px: u32) -> Result<Self> {
        if width_px == 0 || height_px == 0 {
            return Err(domain(format!("screen {width_px}x{height_px} has an empty axis")));
        }
        Ok(Self { width_px, height_px })
    }

    pub fn extent(&self, axis: Axis) -> u32 {
        match axis {
            Axis::X => self.width_px,
            Axis::Y => self.height_px,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

fn clamp_px(px: i64, lo: i64, hi: i64) -> u32 {
    px.clamp(lo, hi.max(lo)) as u32
}

fn check_rel(rel: f64) -> Result<()> {
    if !(0.0..=REL_MAX).contains(&rel) {
        return Err(domain(format!("relative coordinate {rel} outside [0, 1000]")));
    }
    Ok(())
}

/// Unrounded `extent · rel / 1000`.
pub fn linear_px(extent: u32, rel: f64) -> f64 {
    extent as f64 * rel / REL_MAX
}

pub fn linear_map_axis(geom: &ScreenGeometry, axis: Axis, rel: f64) -> Result<u32> {
    check_rel(rel)?;
    let extent = geom.extent(axis);
    Ok(clamp_px(round_half_up(linear_px(extent, rel)), 0, extent as i64 - 1))
}

pub fn linear_map(geom: &ScreenGeometry, rel: (f64, f64)) -> Result<(u32, u32)> {
    Ok((linear_map_axis(geom, Axis::X, rel.0)?, linear_map_axis(geom, Axis::Y, rel.1)?))
}

/// Pixel error per axis caused by an error of `delta_rel` normalized units.
pub fn error_bound(geom: &ScreenGeometry, delta_rel: f64) -> (f64, f64) {
    (geom.width_px as f64 / REL_MAX * delta_rel, geom.height_px as f64 / REL_MAX * delta_rel)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub axis: Axis,
    /// `a0, a1, a2`.
    pub coeffs: [f64; 3],
    pub residual_max: f64,
    pub residual_rms: f64,
    pub n_samples: usize,
}

impl CalibrationModel {
    pub fn identity(geom: &ScreenGeometry, axis: Axis) -> Self {
        Self {
            axis,
            coeffs: [0.0, geom.extent(axis) as f64 / REL_MAX, 0.0],
            residual_max: 0.0,
            residual_rms: 0.0,
            n_samples: 0,
        }
    }

    pub fn eval(&self, rel: f64) -> f64 {
        let [a0, a1, a2] = self.coeffs;
        a0 + rel * (a1 + rel * a2)
    }

    /// Rounded and clamped to the screen.
    pub fn eval_px(&self, rel: f64, geom: &ScreenGeometry) -> u32 {
        clamp_px(round_half_up(self.eval(rel)), 0, geom.extent(self.axis) as i64 - 1)
    }
}

/// Least-squares polynomial of degree ≤ 2 through `(relative, measured_px)`.
pub fn fit_polynomial(axis: Axis, samples: &[(f64, f64)], degree: usize) -> Result<CalibrationModel> {
    if degree > 2 {
        return Err(domain(format!("degree {degree} not supported (max 2)")));
    }
    let cols = degree + 1;
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < cols {
        return Err(Error::Fit(format!(
            "{} distinct relative positions cannot determine a degree-{degree} polynomial",
            distinct.len()
        )));
    }
    if samples.iter().any(|(r, m)| !r.is_finite() || !m.is_finite()) {
        return Err(domain("non-finite calibration sample"));
    }
    // columns in u = r/1000 keep the design well conditioned
    let design = DMatrix::from_fn(samples.len(), cols, |i, j| (samples[i].0 / REL_MAX).powi(j as i32));
    let target = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let qr = design.clone().qr();
    let r = qr.r();
    let scale = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..cols).any(|i| r[(i, i)].abs() <= 1e-12 * scale) {
        return Err(Error::Fit("rank-deficient design".into()));
    }
    let qtb = qr.q().transpose() * &target;
    let u = r.solve_upper_triangular(&qtb).ok_or_else(|| Error::Fit("triangular solve failed".into()))?;
    let mut coeffs = [0.0; 3];
    for j in 0..cols {
        coeffs[j] = u[j] / REL_MAX.powi(j as i32);
    }
    let resid = &design * &u - &target;
    let residual_max = resid.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let residual_rms = (resid.norm_squared() / samples.len() as f64).sqrt();
    Ok(CalibrationModel { axis, coeffs, residual_max, residual_rms, n_samples: samples.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub axis: Axis,
    pub relative: f64,
    pub measured_px: f64,
}

/// CSV with columns `axis,relative,measured_px`.
pub fn read_samples<R: Read>(reader: R) -> Result<Vec<CalibrationSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        let s: CalibrationSample = rec.map_err(|e| Error::Format { line: i + 2, message: e.to_string() })?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConfig {
    pub window: usize,
    /// Px/step; residual slopes steeper than this in both directions mark a reversal.
    pub reversal_threshold: f64,
    pub edge_margin: u32,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self { window: 5, reversal_threshold: 2.0, edge_margin: 1 }
    }
}

/// Recent clicks on one axis, oldest first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClickHistory {
    capacity: usize,
    points: VecDeque<HistoryPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub relative: f64,
    pub predicted_px: f64,
    pub observed_px: f64,
}

impl HistoryPoint {
    pub fn residual(&self) -> f64 {
        self.observed_px - self.predicted_px
    }
}

impl ClickHistory {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), points: VecDeque::new() }
    }

    pub fn record(&mut self, relative: f64, predicted_px: f64, observed_px: f64) {
        if self.points.len() == self.capacity {
            self.points.pop_front();
        }
        self.points.push_back(HistoryPoint { relative, predicted_px, observed_px });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &HistoryPoint> {
        self.points.iter()
    }

    fn recent_residuals(&self, window: usize) -> Vec<f64> {
        let skip = self.points.len().saturating_sub(window);
        self.points.iter().skip(skip).map(HistoryPoint::residual).collect()
    }
}

/// True when the last two residual slopes have opposite signs and both
/// exceed `threshold` in magnitude.
pub fn reversal(residuals: &[f64], threshold: f64) -> bool {
    let n = residuals.len();
    if n < 3 {
        return false;
    }
    let d1 = residuals[n - 2] - residuals[n - 3];
    let d2 = residuals[n - 1] - residuals[n - 2];
    d1 * d2 < 0.0 && d1.abs() > threshold && d2.abs() > threshold
}

/// Unrounded corrected position before edge clamping.
pub fn correct_raw(model: &CalibrationModel, rel: f64, history: &ClickHistory, cfg: &CorrectionConfig) -> f64 {
    let base = model.eval(rel);
    let recent = history.recent_residuals(cfg.window.max(1));
    if recent.is_empty() || reversal(&recent, cfg.reversal_threshold) {
        return base;
    }
    base + recent.iter().sum::<f64>() / recent.len() as f64
}

pub fn correct(
    model: &CalibrationModel,
    rel: f64,
    history: &ClickHistory,
    geom: &ScreenGeometry,
    cfg: &CorrectionConfig,
) -> u32 {
    let extent = geom.extent(model.axis) as i64;
    let margin = cfg.edge_margin as i64;
    clamp_px(round_half_up(correct_raw(model, rel, history, cfg)), margin, extent - 1 - margin)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub max_err: f64,
    pub rms_err: f64,
    pub hit_rate: f64,
    pub radius: f64,
    pub n: usize,
}

/// Error of `mapper` over `(rel, true_px)` targets, in target order.
pub fn precision_sim<F>(targets: &[(f64, f64)], mut mapper: F, radius: f64) -> ErrorStats
where
    F: FnMut(f64, f64) -> f64,
{
    let (mut max_err, mut sq, mut hits) = (0.0f64, 0.0, 0usize);
    for &(rel, truth) in targets {
        let e = (mapper(rel, truth) - truth).abs();
        max_err = max_err.max(e);
        sq += e * e;
        if e <= radius {
            hits += 1;
        }
    }
    let n = targets.len();
    ErrorStats {
        max_err,
        rms_err: if n == 0 { 0.0 } else { (sq / n as f64).sqrt() },
        hit_rate: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        radius,
        n,
    }
}

/// Curved synthetic screen response `extent·r/1000 − curvature·r·(1000 − r)`.
/// It meets the linear map at both ends and sags by `curvature·250000` px in the middle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub extent: u32,
    pub curvature: f64,
    pub n_calibration: usize,
    pub n_targets: usize,
    /// Standard deviation of measurement noise on observed clicks, px.
    pub noise_px: f64,
    pub radius: f64,
    pub seed: u64,
    pub correction: CorrectionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            extent: 2360,
            curvature: 1e-4,
            n_calibration: 30,
            n_targets: 200,
            noise_px: 0.5,
            radius: 3.0,
            seed: 0,
            correction: CorrectionConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn truth(&self, rel: f64) -> f64 {
        linear_px(self.extent, rel) - self.curvature * rel * (REL_MAX - rel)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub model: CalibrationModel,
    pub linear: ErrorStats,
    pub fitted: ErrorStats,
    pub corrected: ErrorStats,
}

pub fn simulate_clicks(cfg: &SimConfig) -> Result<SimReport> {
    let geom = ScreenGeometry::new(cfg.extent, cfg.extent)?;
    let noise = Normal::new(0.0, cfg.noise_px.max(0.0)).map_err(|e| domain(e.to_string()))?;
    let mut rng = crate::synth::rng(cfg.seed);
    let calib: Vec<(f64, f64)> = (0..cfg.n_calibration)
        .map(|_| {
            let r = rng.random_range(0.0..=REL_MAX);
            (r, cfg.truth(r) + noise.sample(&mut rng))
        })
        .collect();
    let model = fit_polynomial(Axis::X, &calib, 2)?;
    let targets: Vec<(f64, f64)> = (0..cfg.n_targets)
        .map(|_| {
            let r = rng.random_range(0.0..=REL_MAX);
            (r, round_half_up(cfg.truth(r)) as f64)
        })
        .collect();
    let feedback: Vec<f64> = targets.iter().map(|_| noise.sample(&mut rng)).collect();

    let linear = precision_sim(&targets, |r, _| linear_map_axis(&geom, Axis::X, r).unwrap_or(0) as f64, cfg.radius);
    let fitted = precision_sim(&targets, |r, _| model.eval_px(r, &geom) as f64, cfg.radius);
    let mut history = ClickHistory::new(cfg.correction.window);
    let mut i = 0;
    let corrected = precision_sim(
        &targets,
        |r, _| {
            let px = correct(&model, r, &history, &geom, &cfg.correction) as f64;
            history.record(r, model.eval(r), cfg.truth(r) + feedback[i]);
            i += 1;
            px
        },
        cfg.radius,
    );
    Ok(SimReport { config: *cfg, model, linear, fitted, corrected })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn screen() -> ScreenGeometry {
        ScreenGeometry::new(2360, 1600).unwrap()
    }

    #[test]
    fn linear_examples() {
        assert_eq!(linear_map(&screen(), (500.0, 500.0)).unwrap(), (1180, 800));
        assert_eq!(linear_map(&screen(), (0.0, 0.0)).unwrap(), (0, 0));
        assert_eq!(linear_map_axis(&screen(), Axis::Y, 512.75).unwrap(), 820);
        assert!((linear_px(2360, 498.25) - 1175.87).abs() < 1e-9);
        assert_eq!(linear_map(&screen(), (1000.0, 1000.0)).unwrap(), (2359, 1599));
        assert!(linear_map(&screen(), (1000.5, 0.0)).is_err());
        assert!(linear_map(&screen(), (-1.0, 0.0)).is_err());
    }

    #[test]
    fn half_up() {
        assert_eq!(round_half_up(820.5), 821);
        assert_eq!(round_half_up(820.49), 820);
        assert_eq!(round_half_up(-0.5), 0);
    }

    #[test]
    fn error_bounds() {
        let (dx, _) = error_bound(&screen(), 1.0);
        assert!((dx - 2.36).abs() < 1e-12);
        assert!((error_bound(&screen(), 5.0).0 - 11.8).abs() < 1e-12);
        assert_eq!(error_bound(&ScreenGeometry::new(1000, 10).unwrap(), 1.0).0, 1.0);
    }

    #[test]
    fn fit_recovers_linear() {
        let s: Vec<(f64, f64)> = (0..=20).map(|i| (i as f64 * 50.0, 2.36 * i as f64 * 50.0)).collect();
        let m = fit_polynomial(Axis::X, &s, 2).unwrap();
        assert!(m.coeffs[0].abs() < 1e-6 && (m.coeffs[1] - 2.36).abs() < 1e-6 && m.coeffs[2].abs() < 1e-6);
    }

    #[test]
    fn three_points_interpolate() {
        let s = [(0.0, 3.0), (400.0, 1000.0), (900.0, 2000.0)];
        let m = fit_polynomial(Axis::Y, &s, 2).unwrap();
        assert!(m.residual_max < 1e-9);
    }

    #[test]
    fn rank_deficient() {
        assert!(matches!(fit_polynomial(Axis::X, &[(5.0, 1.0); 6], 2), Err(Error::Fit(_))));
        assert!(matches!(fit_polynomial(Axis::X, &[(5.0, 1.0), (6.0, 2.0)], 2), Err(Error::Fit(_))));
    }

    #[test]
    fn correction_examples() {
        let g = screen();
        let m = CalibrationModel::identity(&g, Axis::X);
        let cfg = CorrectionConfig::default();
        let mut h = ClickHistory::new(5);
        assert_eq!(correct(&m, 300.25, &h, &g, &cfg), round_half_up(m.eval(300.25)) as u32);
        for r in [100.0, 200.0, 300.0] {
            h.record(r, m.eval(r), m.eval(r) + 2.0);
        }
        assert!((correct_raw(&m, 300.25, &h, &cfg) - (m.eval(300.25) + 2.0)).abs() < 1e-12);
        let edge = CalibrationModel { coeffs: [50.0, 2.5, 0.0], ..m.clone() };
        assert_eq!(correct(&edge, 1000.0, &ClickHistory::new(5), &g, &cfg), 2358);
        let low = CalibrationModel { coeffs: [-40.0, 2.36, 0.0], ..m };
        assert_eq!(correct(&low, 0.0, &ClickHistory::new(5), &g, &cfg), 1);
    }

    #[test]
    fn reversal_suppresses_blend() {
        let g = screen();
        let m = CalibrationModel::identity(&g, Axis::X);
        let mut h = ClickHistory::new(5);
        for res in [0.0, 6.0, -1.0] {
            h.record(10.0, 0.0, res);
        }
        assert!(reversal(&[0.0, 6.0, -1.0], 2.0));
        assert_eq!(correct_raw(&m, 100.0, &h, &CorrectionConfig::default()), m.eval(100.0));
    }

    #[test]
    fn simulation_improves_on_linear() {
        let r = simulate_clicks(&SimConfig::default()).unwrap();
        assert!(r.linear.max_err > 3.0, "{r:?}");
        assert!(r.linear.max_err - r.corrected.max_err >= 3.0, "{r:?}");
        assert!(r.linear.max_err - r.fitted.max_err >= 3.0, "{r:?}");
        assert_eq!(simulate_clicks(&SimConfig::default()).unwrap(), r);
    }

    #[test]
    fn ground_truth_mapper_is_exact() {
        let targets = [(0.0, 0.0), (500.0, 1180.0), (1000.0, 2359.0)];
        let s = precision_sim(&targets, |_, t| t, 0.0);
        assert_eq!((s.max_err, s.hit_rate), (0.0, 1.0));
    }
}
