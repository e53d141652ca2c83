//! Scripted screens and the executor that applies actions to them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::action::ActionKind;
use crate::calibration::{Axis, CalibrationModel, ScreenGeometry};
use crate::error::{usage, Result};

/// `[x, y, w, h]` in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect(pub [u32; 4]);

impl Rect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        let [rx, ry, w, h] = self.0;
        x >= rx && y >= ry && x < rx + w && y < ry + h
    }

    pub fn center(&self) -> (f64, f64) {
        let [x, y, w, h] = self.0;
        (x as f64 + w as f64 / 2.0, y as f64 + h as f64 / 2.0)
    }

    pub fn within(&self, geom: &ScreenGeometry) -> bool {
        let [x, y, w, h] = self.0;
        w > 0 && h > 0 && x + w <= geom.width_px && y + h <= geom.height_px
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widget {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    pub rect: Rect,
    #[serde(default)]
    pub state: Vec<String>,
}

impl Widget {
    /// `name` or `color name`, unique within a screen.
    pub fn key(&self) -> String {
        match &self.color {
            Some(c) => format!("{c} {}", self.name),
            None => self.name.clone(),
        }
    }
}

/// What the camera sees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screen {
    pub frame_id: String,
    pub widgets: Vec<Widget>,
    pub cursor: String,
}

impl Screen {
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("screen serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Topmost widget under a pixel; later widgets are drawn on top.
    pub fn hit(&self, x: u32, y: u32) -> Option<&Widget> {
        self.widgets.iter().rev().find(|w| w.rect.contains(x, y))
    }

    pub fn widget(&self, key: &str) -> Option<&Widget> {
        self.widgets.iter().find(|w| w.key() == key)
    }
}

/// Weight of the digest term. A change that moves no widget state (cursor
/// shape, highlight) can contribute at most this much to the delta.
pub const DIGEST_WEIGHT: f64 = 0.01;

fn digest_bits_changed(a: &str, b: &str) -> u32 {
    let word = |s: &str| u64::from_str_radix(&s[..16.min(s.len())], 16).unwrap_or(0);
    (word(a) ^ word(b)).count_ones()
}

/// Fraction of widgets whose state changed, appeared or vanished.
pub fn widget_change_fraction(prev: &Screen, cur: &Screen) -> f64 {
    let states = |s: &Screen| -> BTreeMap<String, Vec<String>> {
        s.widgets.iter().map(|w| (w.key(), w.state.clone())).collect()
    };
    let (a, b) = (states(prev), states(cur));
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    if keys.is_empty() {
        return 0.0;
    }
    let changed = keys.iter().filter(|k| a.get(**k) != b.get(**k)).count();
    changed as f64 / keys.len() as f64
}

/// Structural difference in `[0, 1]`.
pub fn screen_delta(prev: &Screen, cur: &Screen) -> f64 {
    let widget = widget_change_fraction(prev, cur);
    let digest = DIGEST_WEIGHT * digest_bits_changed(&prev.digest(), &cur.digest()) as f64 / 64.0;
    widget.max(digest).clamp(0.0, 1.0)
}

pub fn detect_stall(prev: &Screen, cur: &Screen, epsilon: f64) -> bool {
    screen_delta(prev, cur) < epsilon
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trigger {
    /// `click`, `double_click`, `hotkey` or `type`.
    pub kind: String,
    /// Widget key for clicks, key spec for hotkeys, text for typing.
    pub target: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub on: Trigger,
    /// Next screen; absent when only the cursor changes.
    #[serde(default)]
    pub to: Option<String>,
    #[serde(default)]
    pub cursor: Option<String>,
    #[serde(default = "one")]
    pub delay_ticks: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenSpec {
    pub id: String,
    #[serde(default = "arrow")]
    pub cursor: String,
    pub widgets: Vec<Widget>,
    /// Instruction the oracle gives on this screen.
    #[serde(default)]
    pub expect: Option<String>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
}

fn arrow() -> String {
    "arrow".into()
}

/// A widget that exists on some other platform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForeignWidget {
    pub platform: String,
    pub name: String,
    pub rect: Rect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvScript {
    pub platform: String,
    pub screen: ScreenGeometry,
    #[serde(default = "one")]
    pub refresh_ticks: u32,
    pub start: String,
    pub success: Vec<String>,
    pub screens: Vec<ScreenSpec>,
    #[serde(default)]
    pub foreign_widgets: Vec<ForeignWidget>,
}

impl EnvScript {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: EnvScript = serde_json::from_str(text)?;
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        let ids: Vec<&str> = self.screens.iter().map(|s| s.id.as_str()).collect();
        let known = |id: &str| ids.contains(&id);
        if !known(&self.start) {
            return Err(usage(format!("start screen {:?} is not defined", self.start)));
        }
        if let Some(s) = self.success.iter().find(|s| !known(s)) {
            return Err(usage(format!("success screen {s:?} is not defined")));
        }
        for s in &self.screens {
            if ids.iter().filter(|i| **i == s.id).count() > 1 {
                return Err(usage(format!("screen {:?} defined twice", s.id)));
            }
            for w in &s.widgets {
                if !w.rect.within(&self.screen) {
                    return Err(usage(format!("widget {:?} on {:?} lies outside the screen", w.key(), s.id)));
                }
                if s.widgets.iter().filter(|o| o.key() == w.key()).count() > 1 {
                    return Err(usage(format!("widget {:?} appears twice on {:?}", w.key(), s.id)));
                }
            }
            for t in &s.transitions {
                if let Some(to) = &t.to {
                    if !known(to) {
                        return Err(usage(format!("transition from {:?} to undefined screen {to:?}", s.id)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self, id: &str) -> Option<&ScreenSpec> {
        self.screens.iter().find(|s| s.id == id)
    }

    /// True when `hit_key` has a same-named widget of another color on
    /// screen `id` that some click transition targets.
    pub fn color_twin_expected(&self, id: &str, hit_key: &str) -> bool {
        let Some(spec) = self.spec(id) else { return false };
        let Some(hit) = spec.widgets.iter().find(|w| w.key() == hit_key) else { return false };
        hit.color.is_some()
            && spec.widgets.iter().any(|w| {
                w.name == hit.name
                    && w.key() != hit_key
                    && spec.transitions.iter().any(|t| t.on.target.eq_ignore_ascii_case(&w.key()))
            })
    }

    pub fn foreign(&self, name: &str) -> Option<&ForeignWidget> {
        self.foreign_widgets.iter().find(|f| f.name.eq_ignore_ascii_case(name))
    }
}

/// Maps normalized points to pixels through per-axis calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Executor {
    pub geometry: ScreenGeometry,
    pub x: CalibrationModel,
    pub y: CalibrationModel,
}

impl Executor {
    pub fn identity(geometry: ScreenGeometry) -> Self {
        Self {
            x: CalibrationModel::identity(&geometry, Axis::X),
            y: CalibrationModel::identity(&geometry, Axis::Y),
            geometry,
        }
    }

    pub fn to_pixel(&self, x: u32, y: u32) -> (u32, u32) {
        (self.x.eval_px(x as f64, &self.geometry), self.y.eval_px(y as f64, &self.geometry))
    }

    /// Inverse of the identity map, used to ground widget centers.
    pub fn normalize(&self, px: (f64, f64)) -> (u32, u32) {
        let n = |v: f64, extent: u32| ((v * 1000.0 / extent as f64).round() as i64).clamp(0, 1000) as u32;
        (n(px.0, self.geometry.width_px), n(px.1, self.geometry.height_px))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Execution {
    pub pixel: Option<(u32, u32)>,
    /// Key of the widget under the pixel.
    pub hit: Option<String>,
    /// A scripted transition was triggered.
    pub triggered: bool,
}

#[derive(Clone, Debug, PartialEq)]
struct Pending {
    to: Option<String>,
    cursor: Option<String>,
    ticks_left: u32,
}

/// Running environment.
#[derive(Clone, Debug)]
pub struct Env {
    script: EnvScript,
    current: String,
    cursor: String,
    pending: Option<Pending>,
    clock: u64,
}

impl Env {
    pub fn new(script: EnvScript) -> Result<Self> {
        script.check()?;
        let current = script.start.clone();
        let cursor = script.spec(&current).expect("checked").cursor.clone();
        Ok(Self { script, current, cursor, pending: None, clock: 0 })
    }

    pub fn script(&self) -> &EnvScript {
        &self.script
    }

    pub fn current_id(&self) -> &str {
        &self.current
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn is_success(&self) -> bool {
        self.script.success.contains(&self.current)
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    pub fn capture(&self) -> Screen {
        let spec = self.script.spec(&self.current).expect("current screen exists");
        Screen { frame_id: self.current.clone(), widgets: spec.widgets.clone(), cursor: self.cursor.clone() }
    }

    pub fn execute(&mut self, action: &ActionKind, executor: &Executor) -> Execution {
        let screen = self.capture();
        let (pixel, hit, target) = match action.point() {
            Some(p) => {
                let px = executor.to_pixel(p.x, p.y);
                let hit = screen.hit(px.0, px.1).map(Widget::key);
                (Some(px), hit.clone(), hit)
            }
            None => (None, None, action.argument()),
        };
        let spec = self.script.spec(&self.current).expect("current screen exists");
        let transition = target.as_ref().and_then(|t| {
            spec.transitions.iter().find(|tr| tr.on.kind == action.verb() && tr.on.target.eq_ignore_ascii_case(t))
        });
        let triggered = transition.is_some();
        if let Some(tr) = transition {
            self.pending = Some(Pending { to: tr.to.clone(), cursor: tr.cursor.clone(), ticks_left: tr.delay_ticks });
            if tr.delay_ticks == 0 {
                self.land();
            }
        }
        Execution { pixel, hit, triggered }
    }

    fn land(&mut self) {
        if let Some(p) = self.pending.take() {
            if let Some(to) = p.to {
                self.cursor = self.script.spec(&to).expect("checked").cursor.clone();
                self.current = to;
            }
            if let Some(c) = p.cursor {
                self.cursor = c;
            }
        }
    }

    pub fn advance(&mut self, ticks: u32) {
        for _ in 0..ticks {
            self.clock += 1;
            if let Some(p) = &mut self.pending {
                p.ticks_left = p.ticks_left.saturating_sub(1);
                if p.ticks_left == 0 {
                    self.land();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(name: &str, state: &str) -> Widget {
        Widget { name: name.into(), color: None, rect: Rect([0, 0, 10, 10]), state: vec![state.into()] }
    }

    fn screen(widgets: Vec<Widget>, cursor: &str) -> Screen {
        Screen { frame_id: "f".into(), widgets, cursor: cursor.into() }
    }

    #[test]
    fn identical_screens_stall() {
        let s = screen(vec![w("a", "x")], "arrow");
        assert_eq!(screen_delta(&s, &s), 0.0);
        assert!(detect_stall(&s, &s, 0.05));
    }

    #[test]
    fn one_of_ten_toggled() {
        let ws: Vec<Widget> = (0..10).map(|i| w(&format!("w{i}"), "off")).collect();
        let a = screen(ws.clone(), "arrow");
        let mut b = a.clone();
        b.widgets[3].state = vec!["on".into()];
        assert!((screen_delta(&a, &b) - 0.1).abs() < 1e-12);
        assert!(!detect_stall(&a, &b, 0.05));
    }

    #[test]
    fn cursor_only_change_stalls() {
        let a = screen(vec![w("a", "x")], "arrow");
        let b = screen(vec![w("a", "x")], "+");
        let d = screen_delta(&a, &b);
        assert!(d > 0.0 && d <= DIGEST_WEIGHT);
        assert!(detect_stall(&a, &b, 0.05));
    }

    #[test]
    fn identity_executor() {
        let e = Executor::identity(ScreenGeometry::new(2360, 1600).unwrap());
        assert_eq!(e.to_pixel(500, 500), (1180, 800));
    }
}
