//! Instruction sources and the grounder that turns an instruction into an
//! action string.

use std::collections::{BTreeMap, VecDeque};
use std::sync::LazyLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::action::{parse_action, ActionKind, ParseFailure, Point};
use super::env::{EnvScript, Executor, Screen, Widget};

/// Screen in, one instruction line out.
pub trait Model {
    fn name(&self) -> String;
    fn instruct(&mut self, screen: &Screen) -> String;
}

/// Instruction naming `w`, e.g. `Click the cyan [Aircraft]`.
pub fn click_instruction(w: &Widget) -> String {
    match &w.color {
        Some(c) => format!("Click the {c} [{}]", w.name),
        None => format!("Click [{}]", w.name),
    }
}

/// Follows each screen's scripted instruction. It keys on the frame alone,
/// so a cursor change on the same frame goes unnoticed.
#[derive(Clone, Debug)]
pub struct OracleModel {
    expect: BTreeMap<String, String>,
}

impl OracleModel {
    pub fn new(script: &EnvScript) -> Self {
        Self {
            expect: script.screens.iter().filter_map(|s| s.expect.clone().map(|e| (s.id.clone(), e))).collect(),
        }
    }
}

impl Model for OracleModel {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn instruct(&mut self, screen: &Screen) -> String {
        self.expect.get(&screen.frame_id).cloned().unwrap_or_default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRates {
    /// Name another widget of the current screen instead.
    pub wrong_widget: f64,
    /// Name a widget from another platform.
    pub foreign: f64,
    /// Repeat the previous instruction.
    pub repeat: f64,
}

impl Default for NoiseRates {
    fn default() -> Self {
        Self { wrong_widget: 0.1, foreign: 0.05, repeat: 0.05 }
    }
}

/// Oracle with seeded substitutions. A same-named widget of another color
/// is preferred for wrong-widget picks.
#[derive(Clone, Debug)]
pub struct NoisyOracle {
    oracle: OracleModel,
    rates: NoiseRates,
    foreign: Vec<String>,
    rng: ChaCha8Rng,
    last: Option<String>,
    seed: u64,
}

impl NoisyOracle {
    pub fn new(script: &EnvScript, rates: NoiseRates, seed: u64) -> Self {
        Self {
            oracle: OracleModel::new(script),
            rates,
            foreign: script.foreign_widgets.iter().map(|f| f.name.clone()).collect(),
            rng: crate::synth::rng(seed),
            last: None,
            seed,
        }
    }

    fn wrong_widget(&mut self, screen: &Screen, intended: &str) -> Option<String> {
        let named = bracketed(intended);
        let others: Vec<&Widget> = screen.widgets.iter().filter(|w| Some(w.key()) != resolve_key(screen, intended)).collect();
        if others.is_empty() {
            return None;
        }
        let twins: Vec<&&Widget> =
            others.iter().filter(|w| named.as_deref().is_some_and(|n| w.name.eq_ignore_ascii_case(n))).collect();
        let pick = if twins.is_empty() {
            others[self.rng.random_range(0..others.len())]
        } else {
            twins[self.rng.random_range(0..twins.len())]
        };
        Some(click_instruction(pick))
    }
}

impl Model for NoisyOracle {
    fn name(&self) -> String {
        format!("noisy-oracle(seed={})", self.seed)
    }

    fn instruct(&mut self, screen: &Screen) -> String {
        let intended = self.oracle.instruct(screen);
        let u: f64 = self.rng.random();
        let r = self.rates;
        let out = if u < r.repeat && self.last.is_some() {
            self.last.clone()
        } else if u < r.repeat + r.foreign && !self.foreign.is_empty() {
            let i = self.rng.random_range(0..self.foreign.len());
            Some(format!("Click [{}]", self.foreign[i]))
        } else if u < r.repeat + r.foreign + r.wrong_widget {
            self.wrong_widget(screen, &intended)
        } else {
            None
        };
        let out = out.unwrap_or(intended);
        self.last = Some(out.clone());
        out
    }
}

/// Feeds recorded instructions in order, then empty lines.
#[derive(Clone, Debug)]
pub struct ReplayModel {
    lines: VecDeque<String>,
}

impl ReplayModel {
    pub fn new<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { lines: lines.into_iter().map(Into::into).collect() }
    }
}

impl Model for ReplayModel {
    fn name(&self) -> String {
        "replay".into()
    }

    fn instruct(&mut self, _screen: &Screen) -> String {
        self.lines.pop_front().unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grounded {
    pub action_text: String,
    pub action: ActionKind,
    /// Widget key the instruction resolved to.
    pub target: Option<String>,
    /// Platform of a widget that does not exist here.
    pub foreign_platform: Option<String>,
}

static HOTKEY_A: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:press|click|use)\s+(?:the\s+)?(?:hotkey|key)\s+\(?([\w+ ]+?)\)?\s*\.?$").unwrap());
static HOTKEY_B: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:press|click)\s+(?:the\s+)?([\w+]+)\s+(?:hotkey|key)\s*\.?$").unwrap());
static TYPE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"(?i)^(?:type|enter)\s+["']?(.*?)["']?\s*\.?$"#).unwrap());
static CLICK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(double[- ]?click|click)\s+(?:on\s+)?(?:the\s+)?(.+?)\s*\.?$").unwrap());
static BRACKET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\]]+)\]").unwrap());
static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""([^"]+)""#).unwrap());

fn bracketed(text: &str) -> Option<String> {
    BRACKET.captures(text).map(|c| c[1].trim().to_owned())
}

/// Widget name and optional color word from a click phrase.
fn target_phrase(phrase: &str) -> (String, Option<String>) {
    if let Some(c) = BRACKET.captures(phrase) {
        let before = phrase[..c.get(0).unwrap().start()].trim();
        let color = before
            .split_whitespace()
            .last()
            .map(|w| w.trim_end_matches("-colored").trim_end_matches("-colour").to_lowercase())
            .filter(|w| !w.is_empty() && *w != "the");
        return (c[1].trim().to_owned(), color);
    }
    if let Some(c) = QUOTED.captures(phrase) {
        return (c[1].trim().to_owned(), None);
    }
    (phrase.trim().to_owned(), None)
}

fn resolve_key(screen: &Screen, instruction: &str) -> Option<String> {
    let c = CLICK.captures(instruction.trim())?;
    let (name, color) = target_phrase(&c[2]);
    resolve(screen, &name, color.as_deref()).map(Widget::key)
}

fn resolve<'a>(screen: &'a Screen, name: &str, color: Option<&str>) -> Option<&'a Widget> {
    let named: Vec<&Widget> = screen
        .widgets
        .iter()
        .filter(|w| w.name.eq_ignore_ascii_case(name) || w.key().eq_ignore_ascii_case(name))
        .collect();
    color
        .and_then(|c| named.iter().find(|w| w.color.as_deref().is_some_and(|wc| wc.eq_ignore_ascii_case(c))))
        .or(named.first())
        .copied()
}

/// Turns an instruction into an action string. Text that already is an
/// action string passes through unchanged.
pub fn ground(instruction: &str, screen: &Screen, script: &EnvScript, executor: &Executor) -> Result<Grounded, ParseFailure> {
    let text = instruction.trim();
    if let Ok(a) = parse_action(text) {
        return Ok(Grounded { action_text: text.to_owned(), action: a.kind, target: None, foreign_platform: None });
    }
    let fail = |reason: String| ParseFailure { text: instruction.to_owned(), reason };
    let finish = |kind: ActionKind, target: Option<String>, foreign: Option<String>| {
        let action_text = format!("Action: {}", kind.render());
        let parsed = parse_action(&action_text)?;
        Ok(Grounded { action_text, action: parsed.kind, target, foreign_platform: foreign })
    };
    if text.is_empty() {
        return Err(fail("empty instruction".into()));
    }
    if let Some(c) = HOTKEY_A.captures(text).or_else(|| HOTKEY_B.captures(text)) {
        let spec = c[1].trim().to_lowercase().replace(' ', "+");
        let kind = match parse_action(&format!("hotkey({spec})")) {
            Ok(a) => a.kind,
            Err(e) => return Err(fail(e.reason)),
        };
        return finish(kind, None, None);
    }
    if let Some(c) = TYPE.captures(text) {
        return finish(ActionKind::TypeText { text: c[1].to_owned() }, None, None);
    }
    if let Some(c) = CLICK.captures(text) {
        let double = c[1].to_lowercase().starts_with("double");
        let (name, color) = target_phrase(&c[2]);
        let (center, target, foreign) = if let Some(w) = resolve(screen, &name, color.as_deref()) {
            (w.rect.center(), Some(w.key()), None)
        } else if let Some(f) = script.foreign(&name) {
            (f.rect.center(), Some(f.name.clone()), Some(f.platform.clone()))
        } else {
            return Err(fail(format!("no widget named {name:?} on screen {}", screen.frame_id)));
        };
        let (x, y) = executor.normalize(center);
        let point = Point { x, y };
        let kind = if double { ActionKind::DoubleClick { point } } else { ActionKind::Click { point } };
        return finish(kind, target, foreign);
    }
    Err(fail("instruction names no action".into()))
}
