//! Closed-loop GUI agent simulation over scripted screens.
//!
//! Each step captures the screen, asks a [`Model`] for an instruction,
//! grounds it into an action string, executes it through calibration, waits
//! `refresh_ticks` and measures the structural delta. Runs of steps whose
//! delta stays below ε end the episode as a stall.

pub mod action;
pub mod env;
pub mod episode;
pub mod model;

pub use action::{parse_action, Action, ActionKind, ParseFailure, Point};
pub use env::{detect_stall, screen_delta, Env, EnvScript, Executor, Screen};
pub use episode::{run_episode, Attribution, Episode, EpisodeLog, EventNote, LoopConfig, LoopEvent, Outcome};
pub use model::{ground, Model, NoiseRates, NoisyOracle, OracleModel, ReplayModel};

/// Bundled platform scripts by name.
pub fn builtin_script(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "a" | "platform-a" => Some(include_str!("../../fixtures/scripts/platform_a.json")),
        "b" | "platform-b" => Some(include_str!("../../fixtures/scripts/platform_b.json")),
        "c" | "platform-c" => Some(include_str!("../../fixtures/scripts/platform_c.json")),
        _ => None,
    }
}

pub const BUILTIN_SCRIPTS: [&str; 3] = ["platform-a", "platform-b", "platform-c"];
