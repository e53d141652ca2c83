//! Executor action strings.
//!
//! Accepted forms, with or without a leading `Action:`:
//!
//! ```text
//! click(start_box='(257,671)')      click(start_box=(257,671)')
//! double_click(start_box='(x,y)')   left_double(start_box='(x,y)')
//! hotkey(f1)   hotkey(key='shift+f1')   hotkey(shift f1)
//! type(content='text')
//! ```
//!
//! Coordinates are normalized to 0–1000 per axis.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionKind {
    Click { point: Point },
    DoubleClick { point: Point },
    Hotkey { key: String },
    HotkeyCombo { keys: Vec<String> },
    TypeText { text: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    #[serde(flatten)]
    pub kind: ActionKind,
    pub raw: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub text: String,
    pub reason: String,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot parse {:?}: {}", self.text, self.reason)
    }
}

impl std::error::Error for ParseFailure {}

static PREFIX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^\s*action\s*:\s*").unwrap());
static CLICK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?i)^(click|left_single|double_click|double-click|doubleclick|left_double)\s*\(\s*start_box\s*=\s*['"]?\s*[(\[]?\s*([^,()\[\]'"]*?)\s*,\s*([^,()\[\]'"]*?)\s*[)\]]?\s*['"]?\s*\)?\s*$"#,
    )
    .unwrap()
});
static HOTKEY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)^hotkey\s*\(\s*(?:key\s*=\s*)?['"]?\s*([^'"()]*?)\s*['"]?\s*\)\s*$"#).unwrap()
});
static TYPE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?is)^type\s*\(\s*content\s*=\s*(['"])(.*)(['"])\s*\)\s*$"#).unwrap());
static KEY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[a-z0-9_]+$").unwrap());

fn fail(text: &str, reason: impl Into<String>) -> ParseFailure {
    ParseFailure { text: text.to_owned(), reason: reason.into() }
}

fn coordinate(s: &str, text: &str) -> Result<u32, ParseFailure> {
    let v: u32 = s.parse().map_err(|_| fail(text, format!("coordinate {s:?} is not a non-negative integer")))?;
    if v > 1000 {
        return Err(fail(text, format!("coordinate {v} outside 0..=1000")));
    }
    Ok(v)
}

fn keys_of(spec: &str, text: &str) -> Result<Vec<String>, ParseFailure> {
    let keys: Vec<String> =
        spec.split(|c: char| c == '+' || c.is_whitespace()).filter(|k| !k.is_empty()).map(str::to_lowercase).collect();
    if keys.is_empty() {
        return Err(fail(text, "hotkey without a key"));
    }
    if let Some(k) = keys.iter().find(|k| !KEY.is_match(k)) {
        return Err(fail(text, format!("invalid key name {k:?}")));
    }
    Ok(keys)
}

pub fn parse_action(text: &str) -> Result<Action, ParseFailure> {
    let body = PREFIX.replace(text, "");
    let body = body.trim();
    if body.is_empty() {
        return Err(fail(text, "empty action"));
    }
    let kind = if let Some(c) = CLICK.captures(body) {
        let point = Point { x: coordinate(&c[2], text)?, y: coordinate(&c[3], text)? };
        match c[1].to_lowercase().as_str() {
            "click" | "left_single" => ActionKind::Click { point },
            _ => ActionKind::DoubleClick { point },
        }
    } else if let Some(c) = HOTKEY.captures(body) {
        let mut keys = keys_of(&c[1], text)?;
        if keys.len() == 1 {
            ActionKind::Hotkey { key: keys.remove(0) }
        } else {
            ActionKind::HotkeyCombo { keys }
        }
    } else if let Some(c) = TYPE.captures(body) {
        if c[1] != c[3] {
            return Err(fail(text, "mismatched quotes"));
        }
        ActionKind::TypeText { text: c[2].to_owned() }
    } else {
        return Err(fail(text, "unrecognized action"));
    };
    Ok(Action { kind, raw: text.to_owned() })
}

impl ActionKind {
    /// Canonical action string.
    pub fn render(&self) -> String {
        match self {
            ActionKind::Click { point } => format!("click(start_box='({},{})')", point.x, point.y),
            ActionKind::DoubleClick { point } => format!("double_click(start_box='({},{})')", point.x, point.y),
            ActionKind::Hotkey { key } => format!("hotkey({key})"),
            ActionKind::HotkeyCombo { keys } => format!("hotkey({})", keys.join("+")),
            ActionKind::TypeText { text } => {
                let q = if text.contains('\'') { '"' } else { '\'' };
                format!("type(content={q}{text}{q})")
            }
        }
    }

    pub fn point(&self) -> Option<Point> {
        match self {
            ActionKind::Click { point } | ActionKind::DoubleClick { point } => Some(*point),
            _ => None,
        }
    }

    pub fn verb(&self) -> &'static str {
        match self {
            ActionKind::Click { .. } => "click",
            ActionKind::DoubleClick { .. } => "double_click",
            ActionKind::Hotkey { .. } | ActionKind::HotkeyCombo { .. } => "hotkey",
            ActionKind::TypeText { .. } => "type",
        }
    }

    /// Key spec for hotkeys (`shift+f1`) or the typed text.
    pub fn argument(&self) -> Option<String> {
        match self {
            ActionKind::Hotkey { key } => Some(key.clone()),
            ActionKind::HotkeyCombo { keys } => Some(keys.join("+")),
            ActionKind::TypeText { text } => Some(text.clone()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn click(x: u32, y: u32) -> ActionKind {
        ActionKind::Click { point: Point { x, y } }
    }

    #[test]
    fn log_fixtures() {
        assert_eq!(parse_action("Action: click(start_box=(257,671)')").unwrap().kind, click(257, 671));
        assert_eq!(parse_action("Action: click(start_box=(893,190))").unwrap().kind, click(893, 190));
        assert_eq!(parse_action("Action: hotkey(f1)").unwrap().kind, ActionKind::Hotkey { key: "f1".into() });
        assert_eq!(parse_action("click(start_box='(231,402)')").unwrap().kind, click(231, 402));
    }

    #[test]
    fn other_forms() {
        assert_eq!(
            parse_action("hotkey(key='Shift+F1')").unwrap().kind,
            ActionKind::HotkeyCombo { keys: vec!["shift".into(), "f1".into()] }
        );
        assert_eq!(
            parse_action("left_double(start_box='(10,20)')").unwrap().kind,
            ActionKind::DoubleClick { point: Point { x: 10, y: 20 } }
        );
        assert_eq!(
            parse_action("type(content='2')").unwrap().kind,
            ActionKind::TypeText { text: "2".into() }
        );
    }

    #[test]
    fn malformed() {
        for t in ["click(start_box=(25.5,671))", "click(start_box=(1200,5))", "click(start_box=(a,b))", "", "scroll(up)", "hotkey()"] {
            assert!(parse_action(t).is_err(), "{t}");
        }
    }

    #[test]
    fn canonical_render() {
        assert_eq!(click(257, 671).render(), "click(start_box='(257,671)')");
        assert_eq!(ActionKind::Hotkey { key: "f1".into() }.render(), "hotkey(f1)");
    }
}
