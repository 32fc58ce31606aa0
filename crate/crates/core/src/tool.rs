//! Depth tool-use: parse `Depth(<label>, [x0, y0, x1, y1]) ->` calls at the
//! end of a model's output, answer them with the box median of a depth map and
//! splice the value back into the stream.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

use crate::depth::{DepthMap, DepthSource};
use crate::geometry::Box2D;

pub const DEFAULT_MAX_CALLS: usize = 8;
/// Spliced in place of a value when the box holds no valid depth.
pub const UNKNOWN_TOKEN: &str = "unknown";

const CALL_OPEN: &str = "Depth(";
const ARROW: &str = "->";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToolError {
    #[error("malformed depth call at characters {}..{}", span.start, span.end)]
    MalformedCall { span: Range<usize> },
    #[error("no valid depth inside the requested box")]
    EmptyDepthRegion,
    #[error("model exceeded the budget of {max_calls} depth calls")]
    CallBudgetExceeded { max_calls: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolCall {
    pub label: String,
    pub bbox: Box2D,
    /// Character offsets of the call text, from `Depth(` through `->`.
    pub span: Range<usize>,
}

/// Recognizes a call that ends the text (trailing whitespace allowed).
/// `Ok(None)` means there is no call to answer.
pub fn parse_tool_call(text: &str) -> Result<Option<ToolCall>, ToolError> {
    let body = text.trim_end();
    if !body.ends_with(ARROW) {
        return Ok(None);
    }
    let Some(start) = body.rfind(CALL_OPEN) else {
        return Ok(None);
    };
    let span = char_offset(text, start)..char_offset(text, body.len());
    let malformed = || ToolError::MalformedCall { span: span.clone() };
    let inner = &body[start + CALL_OPEN.len()..body.len() - ARROW.len()];
    let inner = inner.trim_end().strip_suffix(')').ok_or_else(malformed)?;
    let (label, rest) = inner.split_once(',').ok_or_else(malformed)?;
    let label = label.trim();
    if label.is_empty() {
        return Err(malformed());
    }
    let coords = rest
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(malformed)?;
    let values: Vec<f64> = coords
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| malformed())?;
    let [x0, y0, x1, y1] = values[..] else {
        return Err(malformed());
    };
    let bbox = Box2D::new(x0, y0, x1, y1).map_err(|_| malformed())?;
    Ok(Some(ToolCall {
        label: label.to_string(),
        bbox,
        span,
    }))
}

fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Depth map bound to one frame and source, with a log of answered calls.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolSession {
    pub session_id: String,
    pub frame_id: String,
    pub depth_source: DepthSource,
    pub depth: DepthMap,
    /// Each call with its result; `None` for empty regions.
    pub log: Vec<(ToolCall, Option<f64>)>,
}

impl ToolSession {
    pub fn new(session_id: String, frame_id: String, depth_source: DepthSource, depth: DepthMap) -> Self {
        ToolSession {
            session_id,
            frame_id,
            depth_source,
            depth,
            log: Vec::new(),
        }
    }

    /// Median valid depth inside the call's box (clamped to the image).
    pub fn answer_call(&mut self, call: &ToolCall) -> Result<f64, ToolError> {
        let result = self.depth_in(&call.bbox);
        self.log.push((call.clone(), result.as_ref().ok().copied()));
        result
    }

    /// Same rule as [`Self::answer_call`] without logging.
    pub fn depth_in(&self, bbox: &Box2D) -> Result<f64, ToolError> {
        let clamped = bbox.clamp_to_image(self.depth.width(), self.depth.height());
        self.depth
            .median_in_box(&clamped)
            .map_err(|_| ToolError::EmptyDepthRegion)
    }
}

/// Text spliced after a call's arrow.
pub fn splice_text(result: Option<f64>) -> String {
    match result {
        Some(m) => format!(" {m:.2}m"),
        None => format!(" {UNKNOWN_TOKEN}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub text: String,
    /// Byte ranges of `text` inserted by the executor, in order.
    pub splices: Vec<Range<usize>>,
    /// Well-formed calls with their results.
    pub calls: Vec<(ToolCall, Option<f64>)>,
}

impl Transcript {
    /// The model's own emission with every splice removed.
    pub fn model_text(&self) -> String {
        let mut out = String::with_capacity(self.text.len());
        let mut at = 0;
        for s in &self.splices {
            out.push_str(&self.text[at..s.start]);
            at = s.end;
        }
        out.push_str(&self.text[at..]);
        out
    }
}

/// Alternates between `model` (given the transcript so far, returns the next
/// chunk) and answering the call that chunk ends with. Stops at the first
/// chunk that does not end in a call.
pub fn run_tool_loop<F>(mut model: F, session: &mut ToolSession, max_calls: usize) -> Result<Transcript, ToolError>
where
    F: FnMut(&str) -> String,
{
    let mut t = Transcript {
        text: String::new(),
        splices: Vec::new(),
        calls: Vec::new(),
    };
    let mut attempts = 0usize;
    loop {
        let chunk = model(&t.text);
        let before = t.text.len();
        t.text.push_str(&chunk);
        let call = match parse_tool_call(&t.text[before..]) {
            Ok(None) => return Ok(t),
            Ok(Some(call)) => Some(call),
            Err(ToolError::MalformedCall { .. }) => None,
            Err(other) => return Err(other),
        };
        // malformed calls count against the budget too
        attempts += 1;
        if attempts > max_calls {
            return Err(ToolError::CallBudgetExceeded { max_calls });
        }
        let result = call.and_then(|mut call| {
            let offset = char_offset(&t.text, before);
            call.span = call.span.start + offset..call.span.end + offset;
            let result = session.answer_call(&call).ok();
            t.calls.push((call, result));
            result
        });
        let text = splice_text(result);
        let start = t.text.len();
        t.text.push_str(&text);
        t.splices.push(start..t.text.len());
    }
}
