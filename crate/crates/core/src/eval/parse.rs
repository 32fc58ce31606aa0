use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::{Box2D, OrientedBox3D, Vec3};
use crate::qa::{Answer, Category};

/// Shape of answer expected for a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerKind {
    Binary,
    Count,
    Choice,
    Metric,
    Box2d,
    Box3d,
}

impl AnswerKind {
    pub fn for_category(category: Category) -> AnswerKind {
        match category {
            Category::BinaryViewpoint | Category::BinarySize | Category::BinaryPresence => {
                AnswerKind::Binary
            }
            Category::Counting => AnswerKind::Count,
            Category::Multichoice => AnswerKind::Choice,
            Category::RegressionEgoDist
            | Category::RegressionObjDist
            | Category::RegressionCenterDist
            | Category::RegressionSize => AnswerKind::Metric,
            Category::Grounding2d => AnswerKind::Box2d,
            Category::Grounding3d => AnswerKind::Box3d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("could not read a {expected:?} answer from the response")]
pub struct ParseFailure {
    pub expected: AnswerKind,
}

/// Text after the last `Answer:` marker (case-insensitive), or all of it.
pub fn answer_region(raw: &str) -> &str {
    let lower = raw.to_ascii_lowercase();
    match lower.rfind("answer:") {
        Some(i) => &raw[i + "answer:".len()..],
        None => raw,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct NumberToken {
    value: f64,
    integral: bool,
    end: usize,
}

fn numbers(text: &str) -> Vec<NumberToken> {
    let b = text.as_bytes();
    let word = |c: u8| c.is_ascii_alphanumeric() || c == b'_';
    let digit_at = |j: usize| b.get(j).is_some_and(u8::is_ascii_digit);
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let in_word = i > 0 && word(b[i - 1]);
        if c.is_ascii_alphabetic() || c == b'_' || (in_word && c.is_ascii_digit()) {
            // digits inside identifiers such as obj_006 are not numbers
            while i < b.len() && word(b[i]) {
                i += 1;
            }
            continue;
        }
        let signed = (c == b'-' || c == b'+') && !in_word;
        let body = if signed { i + 1 } else { i };
        let starts = digit_at(body) || (b.get(body) == Some(&b'.') && digit_at(body + 1));
        if !starts {
            i += 1;
            continue;
        }
        let start = i;
        i = body;
        while digit_at(i) {
            i += 1;
        }
        let mut integral = true;
        if b.get(i) == Some(&b'.') && digit_at(i + 1) {
            integral = false;
            i += 1;
            while digit_at(i) {
                i += 1;
            }
        }
        if let Ok(value) = text[start..i].parse::<f64>() {
            out.push(NumberToken { value, integral, end: i });
        }
    }
    out
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_ascii_lowercase())
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];

/// Meters per unit for the accepted unit spellings.
pub fn unit_scale(unit: &str) -> Option<f64> {
    Some(match unit {
        "m" | "meter" | "meters" | "metre" | "metres" => 1.0,
        "cm" | "centimeter" | "centimeters" | "centimetre" | "centimetres" => 0.01,
        "mm" | "millimeter" | "millimeters" | "millimetre" | "millimetres" => 0.001,
        "ft" | "foot" | "feet" => 0.3048,
        "in" | "inch" | "inches" => 0.0254,
        _ => return None,
    })
}

fn parse_binary(region: &str) -> Option<bool> {
    words(region).find_map(|w| match w.as_str() {
        "yes" | "true" => Some(true),
        "no" | "false" => Some(false),
        _ => None,
    })
}

fn parse_count(region: &str) -> Option<u32> {
    // the last integer, digits or a spelled-out number
    let mut best: Option<(usize, u32)> = None;
    for n in numbers(region) {
        if n.integral && n.value >= 0.0 && n.value <= u32::MAX as f64 {
            best = Some((n.end, n.value as u32));
        }
    }
    let mut at = 0;
    for piece in region.split(|c: char| !c.is_ascii_alphabetic()) {
        let end = at + piece.len();
        if let Some(v) = NUMBER_WORDS.iter().position(|w| piece.eq_ignore_ascii_case(w)) {
            if best.is_none_or(|(e, _)| end > e) {
                best = Some((end, v as u32));
            }
        }
        at = end + 1;
    }
    best.map(|(_, v)| v)
}

fn parse_choice(region: &str) -> Option<char> {
    let b = region.as_bytes();
    let is_letter = |c: u8| (b'A'..=b'D').contains(&c);
    for i in 0..b.len().saturating_sub(2) {
        if b[i] == b'(' && is_letter(b[i + 1]) && b[i + 2] == b')' {
            return Some(b[i + 1] as char);
        }
    }
    let t = region.trim_start().as_bytes();
    if let Some(&c) = t.first() {
        if is_letter(c) && t.get(1).is_none_or(|n| !n.is_ascii_alphanumeric()) {
            return Some(c as char);
        }
    }
    for (i, &c) in b.iter().enumerate() {
        let before = i == 0 || !b[i - 1].is_ascii_alphanumeric();
        let after = b.get(i + 1).is_none_or(|n| !n.is_ascii_alphanumeric());
        if is_letter(c) && before && after {
            return Some(c as char);
        }
    }
    None
}

fn parse_metric(region: &str) -> Option<f64> {
    let n = numbers(region).pop()?;
    let rest = region[n.end..].trim_start();
    let unit: String = rest.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    let scale = unit_scale(&unit.to_ascii_lowercase()).unwrap_or(1.0);
    Some(n.value * scale)
}

fn parse_box2d(region: &str) -> Option<Box2D> {
    let v: Vec<f64> = numbers(region).iter().map(|n| n.value).collect();
    if v.len() < 4 {
        return None;
    }
    Box2D::new(v[0], v[1], v[2], v[3]).ok()
}

fn parse_box3d(region: &str) -> Option<OrientedBox3D> {
    let v: Vec<f64> = numbers(region).iter().map(|n| n.value).collect();
    if v.len() < 7 {
        return None;
    }
    OrientedBox3D::new(Vec3::new(v[0], v[1], v[2]), [v[3], v[4], v[5]], v[6]).ok()
}

/// Reads a typed answer for `category` out of free text.
pub fn parse_answer(raw: &str, category: Category) -> Result<Answer, ParseFailure> {
    let kind = AnswerKind::for_category(category);
    let region = answer_region(raw);
    let parsed = match kind {
        AnswerKind::Binary => parse_binary(region).map(Answer::Binary),
        AnswerKind::Count => parse_count(region).map(Answer::Count),
        AnswerKind::Choice => parse_choice(region).map(Answer::Choice),
        AnswerKind::Metric => parse_metric(region).map(Answer::Metric),
        AnswerKind::Box2d => parse_box2d(region).map(Answer::Box2d),
        AnswerKind::Box3d => parse_box3d(region).map(Answer::Box3d),
    };
    parsed.ok_or(ParseFailure { expected: kind })
}

/// A depth reasoning step found in a response.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedDepth {
    pub label: String,
    pub bbox: Box2D,
    pub meters: f64,
}

/// Every `Depth(<label>, [..]) -> <value><unit>` step in `raw`.
pub fn parse_cot_depths(raw: &str) -> Vec<PredictedDepth> {
    let mut out = Vec::new();
    let mut rest = raw;
    while let Some(i) = rest.find("Depth(") {
        let tail = &rest[i..];
        let Some(arrow) = tail.find("->") else { break };
        let call = &tail[..arrow + 2];
        let after = &tail[arrow + 2..];
        rest = after;
        let Ok(Some(c)) = crate::tool::parse_tool_call(call) else { continue };
        let value_text = after.trim_start();
        let mut end = 0;
        for (j, ch) in value_text.char_indices() {
            if ch == '\n' {
                break;
            }
            end = j + ch.len_utf8();
        }
        if let Some(first) = numbers(&value_text[..end]).first() {
            if value_text[..end].trim_start().starts_with(|c: char| c.is_ascii_digit() || c == '.') {
                let unit: String = value_text[first.end..end]
                    .trim_start()
                    .chars()
                    .take_while(|c| c.is_ascii_alphabetic())
                    .collect();
                let scale = unit_scale(&unit.to_ascii_lowercase()).unwrap_or(1.0);
                out.push(PredictedDepth {
                    label: c.label,
                    bbox: c.bbox,
                    meters: first.value * scale,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(raw: &str) -> f64 {
        match parse_answer(raw, Category::RegressionEgoDist).unwrap() {
            Answer::Metric(m) => m,
            _ => unreachable!(),
        }
    }

    #[test]
    fn metric_units() {
        assert!((metric("The chair is 1.32m away") - 1.32).abs() < 1e-12);
        assert!((metric("about 132 cm") - 1.32).abs() < 1e-12);
        assert!((metric("1320 mm") - 1.32).abs() < 1e-12);
        assert!((metric("3 ft") - 0.9144).abs() < 1e-12);
        assert!((metric("10 inches") - 0.254).abs() < 1e-12);
        assert!((metric("2.5") - 2.5).abs() < 1e-12);
        assert!((metric("Depth(chair, [1, 2, 3, 4]) -> 9.00m\nAnswer: 1.50m") - 1.5).abs() < 1e-12);
        assert!(parse_answer("I cannot tell", Category::RegressionSize).is_err());
    }

    #[test]
    fn choice_priority() {
        let c = |s| parse_answer(s, Category::Multichoice);
        assert_eq!(c("(B) 0.8m"), Ok(Answer::Choice('B')));
        assert_eq!(c("C"), Ok(Answer::Choice('C')));
        assert_eq!(c("D. 3"), Ok(Answer::Choice('D')));
        assert_eq!(c("I think the answer is A"), Ok(Answer::Choice('A')));
        assert_eq!(c("Answer: (A) is tempting but B"), Ok(Answer::Choice('A')));
        assert!(c("none of them").is_err());
    }

    #[test]
    fn binary_and_count() {
        assert_eq!(parse_answer("Yes, it is.", Category::BinarySize), Ok(Answer::Binary(true)));
        assert_eq!(parse_answer("no", Category::BinaryPresence), Ok(Answer::Binary(false)));
        assert!(parse_answer("maybe", Category::BinaryPresence).is_err());
        assert_eq!(parse_answer("There are 3 chairs", Category::Counting), Ok(Answer::Count(3)));
        assert_eq!(parse_answer("I see two", Category::Counting), Ok(Answer::Count(2)));
        assert_eq!(parse_answer("between 2 and 4", Category::Counting), Ok(Answer::Count(4)));
    }

    #[test]
    fn boxes() {
        assert_eq!(
            parse_answer("[10.00, 20.00, 110.00, 220.00]", Category::Grounding2d),
            Ok(Answer::Box2d(Box2D::new(10.0, 20.0, 110.0, 220.0).unwrap()))
        );
        let b = parse_answer(
            "center [-0.100, 0.200, 3.000], dims [1.000, 0.500, 0.800], yaw -0.300",
            Category::Grounding3d,
        )
        .unwrap();
        assert_eq!(
            b,
            Answer::Box3d(OrientedBox3D::new(Vec3::new(-0.1, 0.2, 3.0), [1.0, 0.5, 0.8], -0.3).unwrap())
        );
        assert!(parse_answer("[1, 2, 3]", Category::Grounding2d).is_err());
        assert!(parse_answer("x_min 5", Category::Grounding2d).is_err());
    }

    #[test]
    fn cot_depth_lines() {
        let d = parse_cot_depths("Depth(chair, [10, 20, 110, 220]) -> 2.00m\nDepth(table, [0, 0, 5, 5]) -> 150 cm\nAnswer: Yes");
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].label, "chair");
        assert_eq!(d[0].meters, 2.0);
        assert!((d[1].meters - 1.5).abs() < 1e-12);
        assert!(parse_cot_depths("Depth(chair, [1, 2, 3, 4]) -> unknown").is_empty());
    }
}
