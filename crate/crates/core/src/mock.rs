//! Deterministic offline generator.
//!
//! Output depends only on `(seed, template_id, variables)` and always
//! follows the record-line grammar of [`crate::curation`], so every
//! pipeline stage can run without a model. Sample triggers are built from
//! the event name, which keeps trigger sets of distinct events disjoint.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curation::{
    FIELD_DEFINITION, FIELD_PARAPHRASE, FIELD_SENTENCE, FIELD_TRIGGER, VAR_COUNT, VAR_EVENT, VAR_EVENT_NAMES,
};
use crate::generate::{AttemptError, GenRequest, GenResponse, Generate};
use crate::template::TemplateId;
use crate::text::Fnv64;

pub const MOCK_BACKEND: &str = "mock";

const SUBJECTS: &[&str] = &[
    "Local officials",
    "Witnesses",
    "The regional newspaper",
    "A government spokesperson",
    "Residents",
    "Police",
    "The broadcaster",
    "Analysts",
];
const PLACES: &[&str] = &[
    "near the harbor",
    "in the capital",
    "outside the city hall",
    "along the northern border",
    "in a small village",
    "at the central station",
    "across the valley",
    "downtown",
];
const TIMES: &[&str] = &[
    "on Monday",
    "late last night",
    "earlier this week",
    "in the early morning",
    "over the weekend",
    "on Friday afternoon",
    "two days ago",
    "this morning",
];
const QUALIFIERS: &[&str] = &[
    "deliberate",
    "sudden",
    "organized",
    "public",
    "recorded",
    "notable",
    "planned",
    "reported",
];
const OPENINGS: &[&str] = &[
    "An occurrence in which",
    "A situation where",
    "Any event where",
    "A happening in which",
    "An incident in which",
    "A case where",
    "A development in which",
    "An episode in which",
    "A circumstance where",
    "An instance in which",
];
const SUFFIXES: &[&str] = &["", "s", "ed", "ing", "er", "ers", "ment", "ments", "ion", "ive"];

fn request_seed(seed: i64, request: &GenRequest) -> u64 {
    let mut h = Fnv64::default();
    h.write(&seed.to_le_bytes());
    h.write_field(request.template_id.as_str());
    for (k, v) in &request.variables {
        h.write_field(k);
        h.write_field(v);
    }
    h.finish()
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().unwrap_or("")
}

fn stem(event: &str) -> String {
    let words: Vec<String> = event
        .split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect();
    if words.is_empty() {
        String::from("event")
    } else {
        words.join("-")
    }
}

/// Trigger `i` of an event; distinct for distinct `i`.
pub fn mock_trigger(event: &str, i: usize) -> String {
    let base = stem(event);
    let suffix = SUFFIXES[i % SUFFIXES.len()];
    match i / SUFFIXES.len() {
        0 => format!("{base}{suffix}"),
        round => format!("{base}{suffix}{round}"),
    }
}

fn count_of(request: &GenRequest) -> usize {
    request
        .variables
        .get(VAR_COUNT)
        .and_then(|c| c.trim().parse().ok())
        .unwrap_or(10)
}

fn event_names(request: &GenRequest) -> Vec<&str> {
    let names = request
        .variables
        .get(VAR_EVENT_NAMES)
        .or_else(|| request.variables.get(VAR_EVENT));
    names
        .map(|n| n.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
        .unwrap_or_default()
}

pub fn mock_text(seed: i64, request: &GenRequest) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(request_seed(seed, request));
    let mut out = String::new();
    match request.template_id {
        TemplateId::DefinitionCuration => {
            out.push_str("Here are the definitions.\n");
            for name in event_names(request) {
                let qualifier = pick(&mut rng, QUALIFIERS);
                let place = pick(&mut rng, PLACES);
                out.push_str(&format!(
                    "{name}\t{FIELD_DEFINITION}: A {qualifier} event of the type {name}, such as one reported {place}.\n"
                ));
            }
        }
        TemplateId::SampleCuration => {
            let count = count_of(request);
            for name in event_names(request) {
                for i in 0..count {
                    let trigger = mock_trigger(name, i);
                    let subject = pick(&mut rng, SUBJECTS);
                    let place = pick(&mut rng, PLACES);
                    let time = pick(&mut rng, TIMES);
                    let n: u32 = rng.gen_range(2..500);
                    out.push_str(&format!(
                        "{name}\t{FIELD_SENTENCE}: {subject} described the {trigger} {place} {time}, citing {n} accounts.\t{FIELD_TRIGGER}: {trigger}\n"
                    ));
                }
            }
        }
        TemplateId::DefinitionExpansion => {
            let count = count_of(request);
            for name in event_names(request) {
                for i in 0..count {
                    let opening = OPENINGS[i % OPENINGS.len()];
                    let qualifier = pick(&mut rng, QUALIFIERS);
                    let round = match i / OPENINGS.len() {
                        0 => String::new(),
                        r => format!(" (variant {r})"),
                    };
                    out.push_str(&format!(
                        "{name}\t{FIELD_PARAPHRASE}: {opening} a {qualifier} {name} takes place{round}.\n"
                    ));
                }
            }
        }
    }
    out
}

/// Pure mock generation for one request.
pub fn mock_generate(seed: i64, request: &GenRequest) -> GenResponse {
    GenResponse {
        text: mock_text(seed, request),
        backend: MOCK_BACKEND.into(),
        attempts: 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockGenerator {
    pub seed: i64,
}

impl MockGenerator {
    pub fn new(seed: i64) -> Self {
        MockGenerator { seed }
    }
}

impl Generate for MockGenerator {
    fn backend_name(&self) -> &str {
        MOCK_BACKEND
    }

    fn generate(&self, request: &GenRequest, _prompt: &str) -> Result<String, AttemptError> {
        Ok(mock_text(self.seed, request))
    }
}
