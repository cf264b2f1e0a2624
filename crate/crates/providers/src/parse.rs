//! Parsing of model responses.
//!
//! Repair is a single pass: strip a surrounding code fence, then cut any
//! prose after the first complete JSON value. Leading prose is not removed.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    Repaired,
    Failed,
}

impl ParseStatus {
    /// The worse of two statuses.
    pub fn and(self, other: Self) -> Self {
        use ParseStatus::*;
        match (self, other) {
            (Failed, _) | (_, Failed) => Failed,
            (Repaired, _) | (_, Repaired) => Repaired,
            _ => Ok,
        }
    }
}

fn strip_fence(s: &str) -> &str {
    let s = s.trim();
    let Some(rest) = s.strip_prefix("```") else {
        return s;
    };
    // Drop the info string (e.g. `json`) on the opening line.
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

/// Byte length of the JSON object or array at the start of `s`, if its
/// brackets balance.
fn leading_value_len(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' | '[' => depth += 1,
            '}' | ']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ if depth == 0 => return None,
            _ => {}
        }
    }
    None
}

/// Parses `raw` as JSON, allowing one repair pass.
pub fn parse_json_lenient(raw: &str) -> Option<(Value, ParseStatus)> {
    if let Ok(v) = serde_json::from_str(raw) {
        return Some((v, ParseStatus::Ok));
    }
    let unfenced = strip_fence(raw);
    let cut = &unfenced[..leading_value_len(unfenced)?];
    serde_json::from_str(cut).ok().map(|v| (v, ParseStatus::Repaired))
}

/// Interprets a JSON value as a boolean. JSON booleans are exact; 0/1 and
/// yes/no/true/false strings are accepted as coercions.
pub fn json_bool(v: &Value) -> Option<(bool, bool)> {
    match v {
        Value::Bool(b) => Some((*b, true)),
        Value::Number(n) => match n.as_f64() {
            Some(1.0) => Some((true, false)),
            Some(0.0) => Some((false, false)),
            _ => None,
        },
        Value::String(s) => yes_no(s).map(|b| (b, false)),
        _ => None,
    }
}

/// Reads a yes/no answer from the first word, ignoring case and
/// punctuation ("Yes.", "no", "TRUE").
pub fn yes_no(answer: &str) -> Option<bool> {
    let word: String = answer
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" | "true" | "1" => Some(true),
        "no" | "false" | "0" => Some(false),
        _ => None,
    }
}

/// True for lowercase words of letters and digits joined by single
/// underscores.
pub fn is_snake_case(s: &str) -> bool {
    !s.is_empty()
        && s.split('_')
            .all(|w| !w.is_empty() && w.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_json_is_ok() {
        let (v, s) = parse_json_lenient(r#"{"a": true}"#).unwrap();
        assert_eq!(s, ParseStatus::Ok);
        assert_eq!(v["a"], true);
    }

    #[test]
    fn fences_and_trailing_prose_are_repaired() {
        let raw = "```json\n{\"a\": true, \"b\": \"}\"}\n```";
        let (v, s) = parse_json_lenient(raw).unwrap();
        assert_eq!(s, ParseStatus::Repaired);
        assert_eq!(v["b"], "}");
        let raw = "{\"a\": false}\nHope this helps!";
        assert_eq!(parse_json_lenient(raw).unwrap().1, ParseStatus::Repaired);
        let raw = "```\n[1, 2]\n```\ntrailing";
        assert!(parse_json_lenient(raw).is_some());
    }

    #[test]
    fn leading_prose_and_garbage_fail() {
        assert!(parse_json_lenient("Here you go: {\"a\": 1}").is_none());
        assert!(parse_json_lenient("{\"a\": ").is_none());
        assert!(parse_json_lenient("```json\n{'a': 1}\n```").is_none());
    }

    #[test]
    fn yes_no_parsing() {
        assert_eq!(yes_no("Yes."), Some(true));
        assert_eq!(yes_no("no"), Some(false));
        assert_eq!(yes_no("  NO, it does not"), Some(false));
        assert_eq!(yes_no("maybe"), None);
        assert_eq!(yes_no(""), None);
        assert_eq!(json_bool(&Value::from(1)), Some((true, false)));
        assert_eq!(json_bool(&Value::from(false)), Some((false, true)));
        assert_eq!(json_bool(&Value::from(0.5)), None);
    }

    #[test]
    fn snake_case() {
        assert!(is_snake_case("steam_lines"));
        assert!(is_snake_case("leg2"));
        assert!(!is_snake_case("Steam Lines"));
        assert!(!is_snake_case("steam__lines"));
        assert!(!is_snake_case("_x"));
        assert!(!is_snake_case(""));
    }
}
