//! Brute-force scoring oracle and random case generator.
#![allow(dead_code)]

use dived_core::{GoldRecord, PredictionRecord};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

struct M {
    ty: String,
    text: String,
    span: Option<[usize; 2]>,
}

fn norm(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn mentions(ty: &str, triggers: &[String], span: &Option<Vec<[usize; 2]>>) -> Vec<M> {
    triggers
        .iter()
        .enumerate()
        .map(|(i, t)| M {
            ty: ty.to_string(),
            text: norm(t),
            span: span.as_ref().map(|s| s[i]),
        })
        .collect()
}

fn same(a: &M, b: &M) -> bool {
    match (a.span, b.span) {
        (Some(x), Some(y)) => x == y,
        _ => a.text == b.text,
    }
}

/// Largest one-to-one matching, by trying every assignment of each
/// prediction to an unused compatible gold mention or to nothing.
fn best(pred: &[M], gold: &[M], used: &mut Vec<bool>, i: usize, typed: bool) -> u64 {
    if i == pred.len() {
        return 0;
    }
    let mut top = best(pred, gold, used, i + 1, typed);
    for g in 0..gold.len() {
        if used[g] || !same(&pred[i], &gold[g]) || (typed && pred[i].ty != gold[g].ty) {
            continue;
        }
        used[g] = true;
        top = top.max(1 + best(pred, gold, used, i + 1, typed));
        used[g] = false;
    }
    top
}

/// Identification and classification counts over all sentences.
pub fn brute_force(gold: &[GoldRecord], pred: &[PredictionRecord]) -> (Counts, Counts) {
    let mut sids: Vec<&str> = gold.iter().map(|g| g.sentence_id.as_str()).collect();
    sids.sort();
    sids.dedup();
    let mut id = Counts::default();
    let mut cls = Counts::default();
    for sid in sids {
        let g: Vec<M> = gold
            .iter()
            .filter(|r| r.sentence_id == sid)
            .flat_map(|r| mentions(&r.event_type, &r.triggers, &r.span))
            .collect();
        let p: Vec<M> = pred
            .iter()
            .filter(|r| r.sentence_id == sid)
            .flat_map(|r| mentions(&r.event_type, &r.triggers, &r.span))
            .collect();
        for (typed, c) in [(false, &mut id), (true, &mut cls)] {
            let tp = best(&p, &g, &mut vec![false; g.len()], 0, typed);
            c.tp += tp;
            c.fp += p.len() as u64 - tp;
            c.fn_ += g.len() as u64 - tp;
        }
    }
    (id, cls)
}

pub fn prf(c: Counts) -> (f64, f64, f64) {
    let p = if c.tp + c.fp == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let r = if c.tp + c.fn_ == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

const WORDS: &[&str] = &["a", "b", "c", " a", "a  b", "a b", "A"];
const TYPES: &[&str] = &["T", "U", "V"];

fn triggers<R: Rng>(rng: &mut R, n: usize, spans: bool) -> (Vec<String>, Option<Vec<[usize; 2]>>) {
    let t: Vec<String> = (0..n).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
    let s = spans.then(|| {
        (0..n)
            .map(|_| {
                let start = rng.gen_range(0..3);
                [start, start + 1]
            })
            .collect()
    });
    (t, s)
}

/// At most five trigger mentions per side and sentence. Spans appear on a
/// random subset of records.
pub fn random_case<R: Rng>(rng: &mut R, with_spans: bool) -> (Vec<GoldRecord>, Vec<PredictionRecord>) {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for s in 0..rng.gen_range(1..4) {
        let sid = format!("s{s}");
        for is_gold in [true, false] {
            let mut budget = 5usize;
            let mut types: Vec<&str> = TYPES.to_vec();
            types.shuffle(rng);
            for ty in types.into_iter().take(rng.gen_range(0..=3)) {
                if budget == 0 {
                    break;
                }
                let n = rng.gen_range(0..=budget.min(3));
                budget -= n;
                let spans = with_spans && rng.gen_bool(0.5);
                let (t, span) = triggers(rng, n, spans);
                if is_gold {
                    if n == 0 {
                        continue;
                    }
                    gold.push(GoldRecord {
                        sentence_id: sid.clone(),
                        event_type: ty.to_string(),
                        triggers: t,
                        span,
                    });
                } else {
                    let mut p = PredictionRecord::new(&sid, ty, &t);
                    p.span = span;
                    pred.push(p);
                }
            }
        }
    }
    if gold.is_empty() {
        gold.push(GoldRecord::new("s0", "T", &["a"]));
    }
    let known: Vec<String> = gold.iter().map(|g| g.sentence_id.clone()).collect();
    pred.retain(|p| known.contains(&p.sentence_id));
    (gold, pred)
}
