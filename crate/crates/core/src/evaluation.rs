//! Trigger identification / classification scoring.
//!
//! Within each sentence, predicted triggers are matched one-to-one against
//! gold triggers. Identification pools all event types of the sentence;
//! classification also requires the event type to agree. Triggers compare
//! by text after trimming and whitespace collapse (case-sensitive), or by
//! `[start, end]` span when both sides carry one. Counts are micro-averaged.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::assembly::NONE_TARGET;
use crate::text::collapse_whitespace;

pub type Span = [usize; 2];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("prediction for unknown sentence {0:?}")]
    UnknownSentence(String),
    #[error("duplicate {side} record for sentence {sentence_id:?}, event type {event_type:?}")]
    Duplicate {
        side: &'static str,
        sentence_id: String,
        event_type: String,
    },
    #[error("gold trigger {index} of sentence {sentence_id:?} is empty")]
    EmptyGoldTrigger { sentence_id: String, index: usize },
    #[error("sentence {sentence_id:?}: {spans} spans for {triggers} triggers")]
    SpanCount {
        sentence_id: String,
        spans: usize,
        triggers: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub sentence_id: String,
    pub event_type: String,
    /// Empty only for an explicit no-event marker.
    pub triggers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Vec<Span>>,
}

impl GoldRecord {
    pub fn new(sentence_id: &str, event_type: &str, triggers: &[&str]) -> Self {
        GoldRecord {
            sentence_id: sentence_id.to_string(),
            event_type: event_type.to_string(),
            triggers: triggers.iter().map(|t| t.to_string()).collect(),
            span: None,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if let Some(index) = self.triggers.iter().position(|t| t.trim().is_empty()) {
            return Err(EvalError::EmptyGoldTrigger {
                sentence_id: self.sentence_id.clone(),
                index,
            });
        }
        check_spans(&self.sentence_id, &self.triggers, self.span.as_deref())
    }
}

fn check_spans(sentence_id: &str, triggers: &[String], span: Option<&[Span]>) -> Result<(), EvalError> {
    match span {
        Some(s) if s.len() != triggers.len() => Err(EvalError::SpanCount {
            sentence_id: sentence_id.to_string(),
            spans: s.len(),
            triggers: triggers.len(),
        }),
        _ => Ok(()),
    }
}

/// Wire form of a prediction, before `"None"` outputs are dropped.
#[derive(Debug, Clone, Deserialize)]
struct PredictionWire {
    sentence_id: String,
    event_type: String,
    triggers: Vec<String>,
    #[serde(default)]
    span: Option<Vec<Span>>,
}

/// Model output for one (sentence, event type) query. `"None"` and empty
/// triggers are removed on construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PredictionWire")]
pub struct PredictionRecord {
    pub sentence_id: String,
    pub event_type: String,
    pub triggers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Vec<Span>>,
}

fn is_none_output(t: &str) -> bool {
    let t = t.trim();
    t.is_empty() || t.eq_ignore_ascii_case(NONE_TARGET)
}

impl TryFrom<PredictionWire> for PredictionRecord {
    type Error = EvalError;

    fn try_from(w: PredictionWire) -> Result<Self, EvalError> {
        check_spans(&w.sentence_id, &w.triggers, w.span.as_deref())?;
        let keep: Vec<bool> = w.triggers.iter().map(|t| !is_none_output(t)).collect();
        let span = w.span.map(|s| {
            s.into_iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(s, _)| s)
                .collect()
        });
        let triggers = w
            .triggers
            .into_iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(t, _)| t)
            .collect();
        Ok(PredictionRecord {
            sentence_id: w.sentence_id,
            event_type: w.event_type,
            triggers,
            span,
        })
    }
}

impl PredictionRecord {
    pub fn new<S: AsRef<str>>(sentence_id: &str, event_type: &str, triggers: &[S]) -> Self {
        PredictionRecord {
            sentence_id: sentence_id.to_string(),
            event_type: event_type.to_string(),
            triggers: triggers
                .iter()
                .map(|t| t.as_ref())
                .filter(|t| !is_none_output(t))
                .map(str::to_string)
                .collect(),
            span: None,
        }
    }

    /// From raw model text, see [`parse_model_output`].
    pub fn from_output(sentence_id: &str, event_type: &str, raw: &str) -> Self {
        Self::new(sentence_id, event_type, &parse_model_output(raw))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Scores {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }

    fn add(&mut self, tp: u64, fp: u64, fn_: u64) {
        *self = Scores::from_counts(self.tp + tp, self.fp + fp, self.fn_ + fn_);
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreReport {
    pub id_scores: Scores,
    pub cls_scores: Scores,
    /// Classification scores restricted to each event type.
    pub per_event_type: BTreeMap<String, Scores>,
}

impl ScoreReport {
    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, &Scores)> = alloc::vec![
            ("identification".to_string(), &self.id_scores),
            ("classification".to_string(), &self.cls_scores),
        ];
        for (k, v) in &self.per_event_type {
            rows.push((format!("  {k}"), v));
        }
        let width = rows
            .iter()
            .map(|(k, _)| k.chars().count())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = format!(
            "{:<width$}  {:>6} {:>6} {:>6}  {:>9} {:>9} {:>9}\n",
            "scope", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        for (k, s) in rows {
            out.push_str(&format!(
                "{:<width$}  {:>6} {:>6} {:>6}  {:>9.4} {:>9.4} {:>9.4}\n",
                k, s.tp, s.fp, s.fn_, s.precision, s.recall, s.f1
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Mention<'a> {
    event_type: &'a str,
    text: String,
    span: Option<Span>,
}

fn mentions<'a>(event_type: &'a str, triggers: &[String], span: Option<&[Span]>) -> Vec<Mention<'a>> {
    triggers
        .iter()
        .enumerate()
        .map(|(i, t)| Mention {
            event_type,
            text: collapse_whitespace(t),
            span: span.and_then(|s| s.get(i).copied()),
        })
        .collect()
}

fn same_trigger(a: &Mention<'_>, b: &Mention<'_>) -> bool {
    match (a.span, b.span) {
        (Some(x), Some(y)) => x == y,
        _ => a.text == b.text,
    }
}

/// Size of a maximum one-to-one matching (augmenting paths).
fn max_matching<F>(left: usize, right: usize, compatible: F) -> u64
where
    F: Fn(usize, usize) -> bool,
{
    fn augment<F: Fn(usize, usize) -> bool>(
        l: usize,
        right: usize,
        compatible: &F,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for r in 0..right {
            if seen[r] || !compatible(l, r) {
                continue;
            }
            seen[r] = true;
            if owner[r].is_none_or(|o| augment(o, right, compatible, seen, owner)) {
                owner[r] = Some(l);
                return true;
            }
        }
        false
    }
    let mut owner = alloc::vec![None; right];
    let mut matched = 0;
    for l in 0..left {
        let mut seen = alloc::vec![false; right];
        if augment(l, right, &compatible, &mut seen, &mut owner) {
            matched += 1;
        }
    }
    matched
}

fn group<'a, R>(
    records: &'a [R],
    side: &'static str,
    key: impl Fn(&'a R) -> (&'a str, &'a str),
) -> Result<BTreeMap<&'a str, Vec<&'a R>>, EvalError> {
    let mut seen: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut out: BTreeMap<&str, Vec<&R>> = BTreeMap::new();
    for r in records {
        let (sid, ty) = key(r);
        if !seen.insert((sid, ty)) {
            return Err(EvalError::Duplicate {
                side,
                sentence_id: sid.to_string(),
                event_type: ty.to_string(),
            });
        }
        out.entry(sid).or_default().push(r);
    }
    Ok(out)
}

pub fn match_and_score(gold: &[GoldRecord], pred: &[PredictionRecord]) -> Result<ScoreReport, EvalError> {
    for g in gold {
        g.validate()?;
    }
    let gold_by = group(gold, "gold", |g| (g.sentence_id.as_str(), g.event_type.as_str()))?;
    let pred_by = group(pred, "prediction", |p| {
        (p.sentence_id.as_str(), p.event_type.as_str())
    })?;
    if let Some(unknown) = pred_by.keys().find(|sid| !gold_by.contains_key(*sid)) {
        return Err(EvalError::UnknownSentence(unknown.to_string()));
    }

    let mut report = ScoreReport::default();
    for g in gold {
        report.per_event_type.entry(g.event_type.clone()).or_default();
    }
    for p in pred {
        report.per_event_type.entry(p.event_type.clone()).or_default();
    }
    let empty = Vec::new();
    for (sid, golds) in &gold_by {
        let preds = pred_by.get(sid).unwrap_or(&empty);
        let g: Vec<Mention<'_>> = golds
            .iter()
            .flat_map(|r| mentions(&r.event_type, &r.triggers, r.span.as_deref()))
            .collect();
        let p: Vec<Mention<'_>> = preds
            .iter()
            .flat_map(|r| mentions(&r.event_type, &r.triggers, r.span.as_deref()))
            .collect();

        let id_tp = max_matching(p.len(), g.len(), |i, j| same_trigger(&p[i], &g[j]));
        report
            .id_scores
            .add(id_tp, p.len() as u64 - id_tp, g.len() as u64 - id_tp);

        // Classification edges never cross event types, so the matching
        // decomposes into one matching per type.
        let types: BTreeSet<&str> = g.iter().chain(&p).map(|m| m.event_type).collect();
        for ty in types {
            let gt: Vec<&Mention<'_>> = g.iter().filter(|m| m.event_type == ty).collect();
            let pt: Vec<&Mention<'_>> = p.iter().filter(|m| m.event_type == ty).collect();
            let tp = max_matching(pt.len(), gt.len(), |i, j| same_trigger(pt[i], gt[j]));
            let (fp, fn_) = (pt.len() as u64 - tp, gt.len() as u64 - tp);
            report.cls_scores.add(tp, fp, fn_);
            report
                .per_event_type
                .get_mut(ty)
                .expect("every type was registered")
                .add(tp, fp, fn_);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropRate {
    /// `100 * (base - ablated) / base`, 0 when the base F1 is 0.
    pub id_drop_pct: f64,
    pub cls_drop_pct: f64,
    /// `100 * (base - ablated)`, in F1 percentage points.
    pub id_drop_points: f64,
    pub cls_drop_points: f64,
    pub id_base_zero: bool,
    pub cls_base_zero: bool,
}

fn relative_drop(base: f64, ablated: f64) -> (f64, bool) {
    if base == 0.0 {
        (0.0, true)
    } else {
        ((100.0 * base - 100.0 * ablated) / base, false)
    }
}

pub fn drop_rate(baseline: &ScoreReport, ablated: &ScoreReport) -> DropRate {
    drop_rate_f1(
        baseline.id_scores.f1,
        ablated.id_scores.f1,
        baseline.cls_scores.f1,
        ablated.cls_scores.f1,
    )
}

pub fn drop_rate_f1(id_base: f64, id_ablated: f64, cls_base: f64, cls_ablated: f64) -> DropRate {
    let (id_drop_pct, id_base_zero) = relative_drop(id_base, id_ablated);
    let (cls_drop_pct, cls_base_zero) = relative_drop(cls_base, cls_ablated);
    DropRate {
        id_drop_pct,
        cls_drop_pct,
        id_drop_points: 100.0 * id_base - 100.0 * id_ablated,
        cls_drop_points: 100.0 * cls_base - 100.0 * cls_ablated,
        id_base_zero,
        cls_base_zero,
    }
}

pub const DEFAULT_DELIMITERS: &[char] = &[',', '\n'];

/// Splits on commas and newlines, trims, and drops empties and `None`.
pub fn parse_model_output(raw: &str) -> Vec<String> {
    parse_model_output_with(raw, DEFAULT_DELIMITERS)
}

pub fn parse_model_output_with(raw: &str, delimiters: &[char]) -> Vec<String> {
    raw.split(delimiters)
        .map(str::trim)
        .filter(|t| !is_none_output(t))
        .map(str::to_string)
        .collect()
}
