//! Micro-averaged precision/recall/f1 over paraphrase test sets and
//! confidence-threshold sweeps.
//!
//! Scoring convention for each test case at threshold `t`:
//!
//! | expected         | answered correctly | answered wrongly | rejected |
//! |------------------|--------------------|------------------|----------|
//! | a kb question    | tp                 | fp               | fn       |
//! | `REJECT`         | -                  | fp               | tp       |
//!
//! Counting a correctly rejected off-topic question as a true positive is
//! what makes e.g. 116 correct answers + 3 correct rejections out of 122
//! cases come out at recall 119/122.
//!
//! Because of that convention, recall is only guaranteed to be
//! non-increasing in the threshold when the case set has no `REJECT`
//! entries; the answered count is always non-increasing.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dom::normalize_text;
use crate::matcher::{MatchError, Matcher};

/// Marker in the test-set file for questions the knowledge base must not answer.
pub const REJECT_MARKER: &str = "<REJECT>";
pub const CURVE_HEADER: &str = "threshold,precision,recall,f1";

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("test case {case}: {reason}")]
    InvalidCase { case: usize, reason: String },
    #[error("no test cases")]
    NoCases,
    #[error("thresholds must be sorted ascending and finite")]
    UnsortedThresholds,
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("test set: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expected {
    Index(usize),
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub question: String,
    pub expected: Expected,
}

impl TestCase {
    pub fn new(question: impl Into<String>, expected: usize) -> Self {
        TestCase {
            question: question.into(),
            expected: Expected::Index(expected),
        }
    }

    pub fn reject(question: impl Into<String>) -> Self {
        TestCase {
            question: question.into(),
            expected: Expected::Reject,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Cases that received an answer. Equals `tp + fp` unless correctly
    /// rejected off-topic cases contributed to `tp`.
    pub answered: u64,
}

impl ConfusionCounts {
    /// Counts for a case set without off-topic cases.
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts {
            tp,
            fp,
            fn_,
            answered: tp + fp,
        }
    }

    /// Scores one case given its top match and the threshold.
    pub fn record(&mut self, expected: Expected, top_index: usize, answered: bool) {
        self.answered += u64::from(answered);
        match (expected, answered) {
            (Expected::Index(want), true) if want == top_index => self.tp += 1,
            (_, true) => self.fp += 1,
            (Expected::Index(_), false) => self.fn_ += 1,
            (Expected::Reject, false) => self.tp += 1,
        }
    }

    pub fn answered(&self) -> u64 {
        self.answered
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn f1(c: &ConfusionCounts) -> f64 {
    f1_from(precision(c), recall(c))
}

/// Harmonic mean; zero when both inputs are zero.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

impl BenchmarkResult {
    pub fn from_counts(threshold: f64, counts: ConfusionCounts) -> Self {
        BenchmarkResult {
            threshold,
            precision: precision(&counts),
            recall: recall(&counts),
            f1: f1(&counts),
            counts,
        }
    }
}

fn check_cases(cases: &[TestCase], kb_len: usize) -> Result<(), EvalError> {
    if cases.is_empty() {
        return Err(EvalError::NoCases);
    }
    for (case, c) in cases.iter().enumerate() {
        if let Expected::Index(i) = c.expected {
            if i >= kb_len {
                return Err(EvalError::InvalidCase {
                    case,
                    reason: format!("expected index {i} but the knowledge base has {kb_len} questions"),
                });
            }
        }
    }
    Ok(())
}

/// Top match (index, similarity) for every case, in case order.
pub fn top_matches(matcher: &Matcher, cases: &[TestCase]) -> Result<Vec<(usize, f64)>, EvalError> {
    check_cases(cases, matcher.knowledge_base().len())?;
    Ok(cases
        .par_iter()
        .map(|c| matcher.top_match(&c.question))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn counts_at(cases: &[TestCase], tops: &[(usize, f64)], threshold: f64) -> ConfusionCounts {
    let mut counts = ConfusionCounts::default();
    for (case, &(index, confidence)) in cases.iter().zip(tops) {
        counts.record(case.expected, index, confidence >= threshold);
    }
    counts
}

pub fn evaluate(
    matcher: &Matcher,
    cases: &[TestCase],
    threshold: f64,
) -> Result<ConfusionCounts, EvalError> {
    let tops = top_matches(matcher, cases)?;
    Ok(counts_at(cases, &tops, threshold))
}

/// One result per threshold; similarities are computed once.
pub fn threshold_sweep(
    matcher: &Matcher,
    cases: &[TestCase],
    thresholds: &[f64],
) -> Result<Vec<BenchmarkResult>, EvalError> {
    if thresholds.iter().any(|t| t.is_nan()) || thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(EvalError::UnsortedThresholds);
    }
    let tops = top_matches(matcher, cases)?;
    Ok(thresholds
        .iter()
        .map(|&t| BenchmarkResult::from_counts(t, counts_at(cases, &tops, t)))
        .collect())
}

/// `count` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Row with the highest f1; the lowest threshold wins ties.
pub fn best_f1(results: &[BenchmarkResult]) -> Option<&BenchmarkResult> {
    results.iter().fold(None, |best, r| match best {
        Some(b) if b.f1 >= r.f1 => Some(b),
        _ => Some(r),
    })
}

pub fn write_curve<W: Write>(results: &[BenchmarkResult], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER.split(','))?;
    for r in results {
        w.write_record([
            r.threshold.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f1.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_curve(results: &[BenchmarkResult], path: &Path) -> Result<(), EvalError> {
    let file = std::fs::File::create(path)?;
    write_curve(results, std::io::BufWriter::new(file))
}

/// Reads a `threshold,precision,recall,f1` table back.
pub fn read_curve(path: &Path) -> Result<Vec<[f64; 4]>, EvalError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = [0.0; 4];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = field.trim().parse().map_err(|_| EvalError::InvalidCase {
                case: i,
                reason: format!("not a number: `{field}`"),
            })?;
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Deserialize)]
struct TestSetRow {
    test_question: String,
    expected_question: String,
}

/// Parses a `test_question,expected_question` table, resolving expected
/// questions against `kb_questions` by normalized text.
pub fn read_test_set<R: std::io::Read>(
    input: R,
    kb_questions: &[&str],
) -> Result<Vec<TestCase>, EvalError> {
    let index: std::collections::HashMap<String, usize> = kb_questions
        .iter()
        .enumerate()
        .rev()
        .map(|(i, q)| (normalize_key(q), i))
        .collect();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut cases = Vec::new();
    for (case, row) in reader.deserialize::<TestSetRow>().enumerate() {
        let row = row?;
        if row.test_question.is_empty() {
            return Err(EvalError::InvalidCase {
                case,
                reason: "empty test question".into(),
            });
        }
        let expected = if row.expected_question == REJECT_MARKER {
            Expected::Reject
        } else {
            let key = normalize_key(&row.expected_question);
            Expected::Index(*index.get(&key).ok_or_else(|| EvalError::InvalidCase {
                case,
                reason: format!("`{}` is not a knowledge-base question", row.expected_question),
            })?)
        };
        cases.push(TestCase {
            question: row.test_question,
            expected,
        });
    }
    Ok(cases)
}

pub fn load_test_set(path: &Path, kb_questions: &[&str]) -> Result<Vec<TestCase>, EvalError> {
    read_test_set(std::fs::File::open(path)?, kb_questions)
}

fn normalize_key(text: &str) -> String {
    normalize_text([text])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_arithmetic() {
        let c = ConfusionCounts::new(3, 1, 0);
        assert_eq!(precision(&c), 0.75);
        let c = ConfusionCounts::new(119, 0, 0);
        assert_eq!(precision(&c), 1.0);
        let zero = ConfusionCounts::default();
        assert_eq!((precision(&zero), recall(&zero), f1(&zero)), (0.0, 0.0, 0.0));
        assert!((f1_from(1.0, 0.97541) - 0.987552).abs() < 1e-6);
    }

    #[test]
    fn paper_style_outcome() {
        // 116 answered correctly, 3 mappable rejected, 3 off-topic rejected
        let mut c = ConfusionCounts::default();
        for _ in 0..116 {
            c.record(Expected::Index(0), 0, true);
        }
        for _ in 0..3 {
            c.record(Expected::Index(0), 5, false);
            c.record(Expected::Reject, 5, false);
        }
        assert_eq!((c.tp, c.fp, c.fn_), (119, 0, 3));
        assert_eq!(c.answered(), 116);
        assert!((recall(&c) - 0.97541).abs() < 1e-5);
        assert_eq!(precision(&c), 1.0);
        assert!((f1(&c) - 0.987552).abs() < 1e-6);
    }

    #[test]
    fn record_table() {
        let mut c = ConfusionCounts::default();
        c.record(Expected::Index(1), 2, true);
        assert_eq!(c, ConfusionCounts::new(0, 1, 0));
        c.record(Expected::Reject, 2, true);
        assert_eq!(c, ConfusionCounts::new(0, 2, 0));
        c.record(Expected::Index(1), 1, false);
        assert_eq!(c, ConfusionCounts::new(0, 2, 1));
        c.record(Expected::Reject, 0, false);
        assert_eq!((c.tp, c.fp, c.fn_), (1, 2, 1));
        assert_eq!(c.answered(), 2);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 1.0, 101);
        assert_eq!(v.len(), 101);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[100], 1.0);
        assert!((v[75] - 0.75).abs() < 1e-15);
        assert_eq!(linspace(0.3, 1.0, 1), [0.3]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn curve_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        export_curve(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CURVE_HEADER}\n"));

        let rows: Vec<_> = [0.1, 0.5, 0.9]
            .iter()
            .map(|&t| BenchmarkResult::from_counts(t, ConfusionCounts::new(3, 1, 1)))
            .collect();
        export_curve(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        let back = read_curve(&path).unwrap();
        assert_eq!(back[1], [0.5, 0.75, 0.75, 0.75]);
    }

    #[test]
    fn test_set_parsing() {
        let kb = ["What is COVID-19?", "How does it spread?"];
        let input = "test_question,expected_question\n\
                     \"Tell me, what is covid?\",  What  is COVID-19?\n\
                     Is it airborne?,How does it spread?\n\
                     Are sunscreens regulated?,<REJECT>\n";
        let cases = read_test_set(input.as_bytes(), &kb).unwrap();
        assert_eq!(
            cases,
            [
                TestCase::new("Tell me, what is covid?", 0),
                TestCase::new("Is it airborne?", 1),
                TestCase::reject("Are sunscreens regulated?"),
            ]
        );

        let bad = "test_question,expected_question\nq,Unknown question?\n";
        assert!(matches!(
            read_test_set(bad.as_bytes(), &kb),
            Err(EvalError::InvalidCase { case: 0, .. })
        ));
    }

    #[test]
    fn best_f1_prefers_lowest_threshold_on_ties() {
        let rows = [
            BenchmarkResult::from_counts(0.1, ConfusionCounts::new(1, 1, 0)),
            BenchmarkResult::from_counts(0.2, ConfusionCounts::new(2, 0, 0)),
            BenchmarkResult::from_counts(0.3, ConfusionCounts::new(2, 0, 0)),
        ];
        assert_eq!(best_f1(&rows).unwrap().threshold, 0.2);
        assert!(best_f1(&[]).is_none());
    }
}
