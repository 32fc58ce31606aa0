//! Blind filtering: ask a panel of text-only judges each benchmark question
//! and drop the ones enough judges get right without seeing the image.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{answer_matches, parse_answer, DEFAULT_RELATIVE_TOLERANCE};
use crate::qa::{choice_index, choice_letter, format_meters, Answer, Category, QaRecord, QuestionKind};
use crate::rng::{rng_for, SeedPart};

pub const DEFAULT_PANEL_SIZE: usize = 7;
pub const DEFAULT_THRESHOLD: usize = 3;

/// What a judge gets to see: the question and, for multichoice, the options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindQuery {
    pub record_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
}

impl BlindQuery {
    pub fn from_record(record: &QaRecord) -> Self {
        BlindQuery {
            record_id: record.record_id.clone(),
            question: record.question.clone(),
            choices: record.choices.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgeError {
    #[error("judge timed out")]
    Timeout,
    #[error("judge unreachable: {0}")]
    Unreachable(String),
}

pub trait Judge {
    fn judge_id(&self) -> &str;
    /// Free-text reply to a blind query.
    fn answer(&self, query: &BlindQuery) -> Result<String, JudgeError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub record_id: String,
    pub judge_id: String,
    pub raw_answer: String,
    pub correct: bool,
    /// Seconds.
    pub latency: f64,
    /// The reply could not be read as an answer (scored incorrect).
    #[serde(default)]
    pub unparseable: bool,
}

/// Grounding questions are never filtered: a blind box guess carries no
/// signal.
pub fn is_filterable(record: &QaRecord) -> bool {
    !record.category.is_grounding()
}

/// Exact match for discrete answers, 10% relative error for metric ones.
/// `None` when the reply does not parse.
pub fn blind_correct(record: &QaRecord, reply: &str) -> Option<bool> {
    let parsed = parse_answer(reply, record.category).ok()?;
    Some(answer_matches(&record.answer, &parsed, DEFAULT_RELATIVE_TOLERANCE))
}

/// Queries `judge` with the text of `record`; `clock` returns seconds.
pub fn judge_blind<J: Judge + ?Sized>(
    record: &QaRecord,
    judge: &J,
    clock: &dyn Fn() -> f64,
) -> Result<JudgeVerdict, JudgeError> {
    let start = clock();
    let reply = judge.answer(&BlindQuery::from_record(record))?;
    let latency = (clock() - start).max(0.0);
    let outcome = blind_correct(record, &reply);
    Ok(JudgeVerdict {
        record_id: record.record_id.clone(),
        judge_id: judge.judge_id().to_string(),
        raw_answer: reply,
        correct: outcome == Some(true),
        latency,
        unparseable: outcome.is_none(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlindError {
    #[error("threshold {threshold} exceeds the panel size {panel}")]
    ThresholdExceedsPanel { threshold: usize, panel: usize },
    #[error("threshold must be at least 1")]
    ZeroThreshold,
    #[error("judge id `{0}` appears twice in the panel")]
    DuplicateJudge(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<QaRecord>,
    pub removed: Vec<QaRecord>,
    /// Kept records that lack a verdict from at least one judge.
    pub incomplete: Vec<String>,
    /// Correct-verdict count per filterable record.
    pub votes: BTreeMap<String, usize>,
}

pub fn check_panel(panel: &[String], threshold: usize) -> Result<(), BlindError> {
    if threshold == 0 {
        return Err(BlindError::ZeroThreshold);
    }
    if threshold > panel.len() {
        return Err(BlindError::ThresholdExceedsPanel { threshold, panel: panel.len() });
    }
    let mut seen = BTreeSet::new();
    for id in panel {
        if !seen.insert(id.as_str()) {
            return Err(BlindError::DuplicateJudge(id.clone()));
        }
    }
    Ok(())
}

/// Splits `records` by vote count. A record is removed when at least
/// `threshold` panel judges answered it correctly; records missing a verdict
/// from any panel judge are kept and listed as incomplete. For repeated
/// `(record, judge)` verdicts the last one counts.
pub fn filter_benchmark(
    records: &[QaRecord],
    verdicts: &[JudgeVerdict],
    panel: &[String],
    threshold: usize,
) -> Result<FilterOutcome, BlindError> {
    check_panel(panel, threshold)?;
    let members: BTreeSet<&str> = panel.iter().map(String::as_str).collect();
    let mut latest: BTreeMap<(&str, &str), bool> = BTreeMap::new();
    for v in verdicts {
        if members.contains(v.judge_id.as_str()) {
            latest.insert((v.record_id.as_str(), v.judge_id.as_str()), v.correct);
        }
    }
    let mut out = FilterOutcome::default();
    for r in records {
        if !is_filterable(r) {
            out.kept.push(r.clone());
            continue;
        }
        let mut answered = 0;
        let mut correct = 0;
        for judge in panel {
            if let Some(ok) = latest.get(&(r.record_id.as_str(), judge.as_str())) {
                answered += 1;
                correct += usize::from(*ok);
            }
        }
        out.votes.insert(r.record_id.clone(), correct);
        if answered < panel.len() {
            out.incomplete.push(r.record_id.clone());
            out.kept.push(r.clone());
        } else if correct >= threshold {
            out.removed.push(r.clone());
        } else {
            out.kept.push(r.clone());
        }
    }
    Ok(out)
}

/// Queries every judge on every filterable record, in order. Failed queries
/// leave no verdict.
pub fn collect_verdicts(
    records: &[QaRecord],
    judges: &[&dyn Judge],
    clock: &dyn Fn() -> f64,
) -> (Vec<JudgeVerdict>, Vec<(String, String, JudgeError)>) {
    let mut verdicts = Vec::new();
    let mut failures = Vec::new();
    for r in records.iter().filter(|r| is_filterable(r)) {
        for j in judges {
            match judge_blind(r, *j, clock) {
                Ok(v) => verdicts.push(v),
                Err(e) => failures.push((r.record_id.clone(), j.judge_id().to_string(), e)),
            }
        }
    }
    (verdicts, failures)
}

/// Local stand-in judge behaviors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MockPolicy {
    AlwaysCorrect,
    AlwaysWrong,
    /// Most frequent answer per category and question kind in a reference
    /// (training) set.
    MajorityClass,
    /// Correct with probability `p`, decided per record from the judge id.
    SeededRandom(f64),
}

impl FromStr for MockPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "always_correct" => return Ok(MockPolicy::AlwaysCorrect),
            "always_wrong" => return Ok(MockPolicy::AlwaysWrong),
            "majority_class" => return Ok(MockPolicy::MajorityClass),
            _ => {}
        }
        let p = s
            .strip_prefix("seeded_random(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("unknown mock policy `{s}`"))?;
        let p: f64 = p.trim().parse().map_err(|_| format!("bad probability in `{s}`"))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("probability out of [0, 1] in `{s}`"));
        }
        Ok(MockPolicy::SeededRandom(p))
    }
}

/// Where a panel member's answers come from.
#[derive(Debug, Clone, PartialEq)]
pub enum JudgeDescriptor {
    Local(MockPolicy),
    Http(String),
}

impl FromStr for JudgeDescriptor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(policy) = s.strip_prefix("local:") {
            return Ok(JudgeDescriptor::Local(policy.parse()?));
        }
        if let Some(url) = s.strip_prefix("http:") {
            // accept http:host/path, http://host/path and http:http://host/path
            let url = if url.contains("://") {
                url.to_string()
            } else if url.starts_with("//") {
                format!("http:{url}")
            } else {
                format!("http://{url}")
            };
            return Ok(JudgeDescriptor::Http(url));
        }
        Err(format!("judge descriptor `{s}` must start with local: or http:"))
    }
}

type Key = (Category, QuestionKind);

/// Deterministic in-process judge.
#[derive(Debug, Clone)]
pub struct MockJudge {
    id: String,
    policy: MockPolicy,
    truth: BTreeMap<String, QaRecord>,
    priors: BTreeMap<Key, String>,
}

impl MockJudge {
    /// `benchmark` supplies the ground truth the policy needs; `reference`
    /// supplies the answer priors for [`MockPolicy::MajorityClass`].
    pub fn new(id: String, policy: MockPolicy, benchmark: &[QaRecord], reference: &[QaRecord]) -> Self {
        let truth = benchmark.iter().map(|r| (r.record_id.clone(), r.clone())).collect();
        let priors = if policy == MockPolicy::MajorityClass {
            majority_answers(reference)
        } else {
            BTreeMap::new()
        };
        MockJudge { id, policy, truth, priors }
    }
}

/// Canonical text of the most frequent answer per (category, kind); metric
/// answers are bucketed to 0.1 m. Ties go to the smallest text.
pub fn majority_answers(records: &[QaRecord]) -> BTreeMap<Key, String> {
    let mut tally: BTreeMap<Key, BTreeMap<String, usize>> = BTreeMap::new();
    for r in records.iter().filter(|r| is_filterable(r)) {
        let text = match r.answer {
            Answer::Metric(m) => format_meters(libm::round(m * 10.0) / 10.0),
            ref a => a.text(),
        };
        *tally.entry((r.category, r.kind)).or_default().entry(text).or_default() += 1;
    }
    tally
        .into_iter()
        .filter_map(|(k, counts)| {
            let best = counts.iter().map(|(_, n)| *n).max()?;
            let text = counts.into_iter().find(|(_, n)| *n == best)?.0;
            Some((k, text))
        })
        .collect()
}

/// A reply that is certainly wrong for `answer`.
pub fn wrong_answer_text(answer: &Answer) -> String {
    match answer {
        Answer::Binary(b) => Answer::Binary(!b).text(),
        Answer::Count(n) => Answer::Count(n + 1).text(),
        Answer::Choice(c) => {
            let i = choice_index(*c).unwrap_or(0);
            Answer::Choice(choice_letter((i + 1) % 4)).text()
        }
        Answer::Metric(m) => format_meters(m * 2.0 + 1.0),
        Answer::Box2d(_) | Answer::Box3d(_) => String::from("I cannot tell"),
    }
}

impl Judge for MockJudge {
    fn judge_id(&self) -> &str {
        &self.id
    }

    fn answer(&self, query: &BlindQuery) -> Result<String, JudgeError> {
        let Some(record) = self.truth.get(&query.record_id) else {
            return Ok(String::from("I cannot tell"));
        };
        let right = || record.answer.text();
        let wrong = || wrong_answer_text(&record.answer);
        Ok(match self.policy {
            MockPolicy::AlwaysCorrect => right(),
            MockPolicy::AlwaysWrong => wrong(),
            MockPolicy::MajorityClass => self
                .priors
                .get(&(record.category, record.kind))
                .cloned()
                .unwrap_or_else(|| String::from("I cannot tell")),
            MockPolicy::SeededRandom(p) => {
                let mut rng = rng_for(&[SeedPart::Str("judge"), SeedPart::Str(&self.id), SeedPart::Str(&record.record_id)]);
                if rng.gen_bool(p) {
                    right()
                } else {
                    wrong()
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptors() {
        assert_eq!("local:always_wrong".parse(), Ok(JudgeDescriptor::Local(MockPolicy::AlwaysWrong)));
        assert_eq!(
            "local:seeded_random(0.5)".parse(),
            Ok(JudgeDescriptor::Local(MockPolicy::SeededRandom(0.5)))
        );
        assert_eq!(
            "http:http://127.0.0.1:9000/judge".parse(),
            Ok(JudgeDescriptor::Http("http://127.0.0.1:9000/judge".into()))
        );
        assert_eq!(
            "http://127.0.0.1:9000/judge".parse(),
            Ok(JudgeDescriptor::Http("http://127.0.0.1:9000/judge".into()))
        );
        assert!("local:seeded_random(1.5)".parse::<JudgeDescriptor>().is_err());
        assert!("gpt".parse::<JudgeDescriptor>().is_err());
    }

    #[test]
    fn panel_checks() {
        let panel: Vec<String> = (0..7).map(|i| format!("j{i}")).collect();
        assert!(check_panel(&panel, 3).is_ok());
        assert_eq!(
            check_panel(&panel, 8),
            Err(BlindError::ThresholdExceedsPanel { threshold: 8, panel: 7 })
        );
        let dup = alloc::vec![String::from("a"), String::from("a")];
        assert_eq!(check_panel(&dup, 1), Err(BlindError::DuplicateJudge("a".into())));
    }
}
