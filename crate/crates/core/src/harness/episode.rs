//! The screenshot → instruction → action → refresh loop and its log.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::action::ActionKind;
use super::env::{screen_delta, widget_change_fraction, Env, EnvScript, Execution, Executor};
use super::model::{ground, Model};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub max_steps: usize,
    pub epsilon: f64,
    pub patience: usize,
    /// Overrides the script's wait after each action.
    pub refresh_ticks: Option<u32>,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self { max_steps: 20, epsilon: 0.05, patience: 2, refresh_ticks: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventNote {
    Progress,
    /// The model produced nothing.
    Empty,
    Unparsed,
    /// The instruction named a widget of another platform.
    ForeignWidget,
    /// Repeat of an action that already moved the flow on.
    Redundant,
    Miss,
    WrongWidget,
    /// A transition fired but changed the screen by less than ε.
    MinimalChange,
    /// A transition fired and has not landed by the next capture.
    Pending,
    NoChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopEvent {
    pub step: usize,
    pub frame_id: String,
    pub screen_digest: String,
    pub model_output: String,
    pub action_text: Option<String>,
    pub action: Option<ActionKind>,
    pub parse_error: Option<String>,
    pub target: Option<String>,
    pub foreign_platform: Option<String>,
    pub executed: Option<Execution>,
    pub post_frame_id: String,
    pub post_digest: String,
    pub post_delta: f64,
    pub note: EventNote,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Stall,
    MaxSteps,
    Failure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attribution {
    IconRecognitionError,
    RedundantAction,
    PlatformConfusion,
    MinimalInterfaceChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub platform: String,
    pub model: String,
    pub config: LoopConfig,
    pub events: Vec<LoopEvent>,
    pub outcome: Outcome,
    pub attribution: Option<Attribution>,
}

/// One line of the serialized log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum LogLine {
    Header { platform: String, model: String, config: LoopConfig },
    Event(LoopEvent),
    Outcome { outcome: Outcome, attribution: Option<Attribution>, steps: usize },
}

impl EpisodeLog {
    pub fn steps(&self) -> usize {
        self.events.len()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = LogLine::Header { platform: self.platform.clone(), model: self.model.clone(), config: self.config };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for e in &self.events {
            writeln!(w, "{}", serde_json::to_string(&LogLine::Event(e.clone()))?)?;
        }
        let end = LogLine::Outcome { outcome: self.outcome, attribution: self.attribution, steps: self.steps() };
        writeln!(w, "{}", serde_json::to_string(&end)?)?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let lines: Vec<LogLine> = crate::granularity::read_jsonl(reader)?;
        let mut it = lines.into_iter();
        let Some(LogLine::Header { platform, model, config }) = it.next() else {
            return Err(Error::Format { line: 1, message: "episode log must start with a header".into() });
        };
        let mut events = Vec::new();
        for (i, line) in it.enumerate() {
            match line {
                LogLine::Event(e) => events.push(e),
                LogLine::Outcome { outcome, attribution, .. } => {
                    return Ok(Self { platform, model, config, events, outcome, attribution });
                }
                LogLine::Header { .. } => {
                    return Err(Error::Format { line: i + 2, message: "second header".into() });
                }
            }
        }
        Err(Error::Format { line: events.len() + 1, message: "episode log has no outcome line".into() })
    }
}

/// Identity of an action for redundancy checks: verb plus the widget it
/// landed on, or its key spec / text.
fn action_key(action: &ActionKind, exec: &Execution) -> Option<(String, String)> {
    let target = match action.point() {
        Some(_) => exec.hit.clone(),
        None => action.argument(),
    }?;
    Some((action.verb().to_owned(), target.to_lowercase()))
}

/// Loop state that persists across steps.
pub struct Episode<'a> {
    env: Env,
    model: &'a mut dyn Model,
    executor: Executor,
    config: LoopConfig,
    completed: BTreeSet<(String, String)>,
    events: Vec<LoopEvent>,
}

impl<'a> Episode<'a> {
    pub fn new(script: EnvScript, model: &'a mut dyn Model, executor: Option<Executor>, config: LoopConfig) -> Result<Self> {
        let executor = executor.unwrap_or_else(|| Executor::identity(script.screen));
        Ok(Self { env: Env::new(script)?, model, executor, config, completed: BTreeSet::new(), events: Vec::new() })
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn step(&mut self) -> &LoopEvent {
        let before = self.env.capture();
        let output = self.model.instruct(&before);
        let mut event = LoopEvent {
            step: self.events.len() + 1,
            frame_id: before.frame_id.clone(),
            screen_digest: before.digest(),
            model_output: output.clone(),
            action_text: None,
            action: None,
            parse_error: None,
            target: None,
            foreign_platform: None,
            executed: None,
            post_frame_id: String::new(),
            post_digest: String::new(),
            post_delta: 0.0,
            note: EventNote::NoChange,
        };
        let mut key = None;
        if !output.trim().is_empty() {
            match ground(&output, &before, self.env.script(), &self.executor) {
                Ok(g) => {
                    let exec = self.env.execute(&g.action, &self.executor);
                    key = action_key(&g.action, &exec);
                    event.action_text = Some(g.action_text);
                    event.action = Some(g.action);
                    event.target = g.target;
                    event.foreign_platform = g.foreign_platform;
                    event.executed = Some(exec);
                }
                Err(e) => event.parse_error = Some(e.reason),
            }
        }
        let refresh = self.config.refresh_ticks.unwrap_or(self.env.script().refresh_ticks);
        self.env.advance(refresh);
        let after = self.env.capture();
        event.post_delta = screen_delta(&before, &after);
        event.post_frame_id = after.frame_id.clone();
        event.post_digest = after.digest();

        let triggered = event.executed.as_ref().is_some_and(|e| e.triggered);
        let moved = event.post_delta >= self.config.epsilon;
        event.note = if output.trim().is_empty() {
            EventNote::Empty
        } else if event.parse_error.is_some() {
            EventNote::Unparsed
        } else if event.foreign_platform.is_some() {
            EventNote::ForeignWidget
        } else if triggered && moved {
            EventNote::Progress
        } else if key.as_ref().is_some_and(|k| self.completed.contains(k)) {
            EventNote::Redundant
        } else if event.action.as_ref().is_some_and(|a| a.point().is_some())
            && event.executed.as_ref().is_some_and(|e| e.hit.is_none())
        {
            EventNote::Miss
        } else if (event.target.is_some() && event.executed.as_ref().and_then(|e| e.hit.clone()) != event.target)
            || (!triggered
                && event
                    .executed
                    .as_ref()
                    .and_then(|e| e.hit.as_deref())
                    .is_some_and(|h| self.env.script().color_twin_expected(&before.frame_id, h)))
        {
            EventNote::WrongWidget
        } else if self.env.has_pending() {
            EventNote::Pending
        } else if triggered {
            EventNote::MinimalChange
        } else if moved {
            EventNote::Progress
        } else {
            EventNote::NoChange
        };
        if triggered && (before.frame_id != after.frame_id || widget_change_fraction(&before, &after) > 0.0) {
            if let Some(k) = key {
                self.completed.insert(k);
            }
        }
        self.events.push(event);
        self.events.last().expect("just pushed")
    }

    fn stall_streak(&self) -> usize {
        self.events.iter().rev().take_while(|e| e.post_delta < self.config.epsilon).count()
    }

    /// Runs until success, a stall of `patience` steps, or `max_steps`.
    pub fn run(mut self) -> EpisodeLog {
        let platform = self.env.script().platform.clone();
        let model = self.model.name();
        let (outcome, attribution) = loop {
            if self.env.is_success() {
                break (Outcome::Success, None);
            }
            if self.events.len() >= self.config.max_steps {
                break (Outcome::MaxSteps, None);
            }
            self.step();
            if self.env.is_success() {
                break (Outcome::Success, None);
            }
            let patience = self.config.patience.max(1);
            if self.stall_streak() >= patience {
                let streak = &self.events[self.events.len() - patience..];
                break attribute(streak);
            }
        };
        EpisodeLog { platform, model, config: self.config, events: self.events, outcome, attribution }
    }
}

/// Rule-based attribution of a stall streak.
pub fn attribute(streak: &[LoopEvent]) -> (Outcome, Option<Attribution>) {
    let any = |n: EventNote| streak.iter().any(|e| e.note == n);
    if !streak.is_empty() && streak.iter().all(|e| e.note == EventNote::Redundant) {
        (Outcome::Failure, Some(Attribution::RedundantAction))
    } else if any(EventNote::ForeignWidget) {
        (Outcome::Failure, Some(Attribution::PlatformConfusion))
    } else if any(EventNote::Miss) || any(EventNote::WrongWidget) {
        (Outcome::Failure, Some(Attribution::IconRecognitionError))
    } else if any(EventNote::MinimalChange) {
        (Outcome::Stall, Some(Attribution::MinimalInterfaceChange))
    } else {
        (Outcome::Stall, None)
    }
}

pub fn run_episode(script: EnvScript, model: &mut dyn Model, config: LoopConfig) -> Result<EpisodeLog> {
    Ok(Episode::new(script, model, None, config)?.run())
}
