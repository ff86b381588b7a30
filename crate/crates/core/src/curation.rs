//! Definition curation, sample curation and definition expansion.
//!
//! Generated text is read with a line grammar: a record line is the event
//! type name, a tab, and one or more tab-separated `KEY: value` fields.
//!
//! ```text
//! attack<TAB>DEFINITION: A violent act against people or property.
//! attack<TAB>SENTENCE: Rebels attacked the convoy.<TAB>TRIGGER: attacked
//! attack<TAB>PARAPHRASE: An assault carried out against a target.
//! ```
//!
//! Lines that do not match, or that name an event type that was not
//! requested, are treated as prose and ignored.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::generate::{Backend, GenFailure, GenRequest, GenResponse};
use crate::ontology::{NodeId, Ontology};
use crate::template::TemplateId;
use crate::text::name_key;

pub const VAR_EVENTS: &str = "events";
pub const VAR_EVENT_NAMES: &str = "event_names";
pub const VAR_EVENT: &str = "event";
pub const VAR_DEFINITION: &str = "definition";
pub const VAR_ONTOLOGY: &str = "ontology";
pub const VAR_COUNT: &str = "count";
pub const VAR_EXAMPLE: &str = "example";
pub const VAR_ATTEMPT: &str = "attempt";

pub const FIELD_DEFINITION: &str = "DEFINITION";
pub const FIELD_SENTENCE: &str = "SENTENCE";
pub const FIELD_TRIGGER: &str = "TRIGGER";
pub const FIELD_PARAPHRASE: &str = "PARAPHRASE";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CurationError {
    #[error("nothing to curate: no event types selected")]
    NoEvents,
    #[error("event type {0:?} has no seed definition")]
    MissingDefinition(String),
    #[error("{0} must be a positive integer")]
    ZeroCount(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleOrigin {
    #[default]
    Generated,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SampleError {
    #[error("sentence is empty")]
    EmptySentence,
    #[error("trigger is empty")]
    EmptyTrigger,
    #[error("sentence contains a line break")]
    Newline,
    #[error("trigger {trigger:?} does not occur in the sentence")]
    TriggerNotInSentence { trigger: String },
}

/// A (sentence, trigger) pair for one event type. The trigger is always a
/// verbatim substring of the sentence; construction enforces it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedSample {
    event_name: String,
    sentence: String,
    trigger: String,
    origin: SampleOrigin,
}

impl GeneratedSample {
    pub fn new(
        event_name: impl Into<String>,
        sentence: impl Into<String>,
        trigger: impl Into<String>,
        origin: SampleOrigin,
    ) -> Result<Self, SampleError> {
        let sentence = sentence.into();
        let trigger = trigger.into();
        if sentence.trim().is_empty() {
            return Err(SampleError::EmptySentence);
        }
        if trigger.trim().is_empty() {
            return Err(SampleError::EmptyTrigger);
        }
        if sentence.contains(['\n', '\r']) {
            return Err(SampleError::Newline);
        }
        if !sentence.contains(trigger.as_str()) {
            return Err(SampleError::TriggerNotInSentence { trigger });
        }
        Ok(GeneratedSample {
            event_name: event_name.into(),
            sentence,
            trigger,
            origin,
        })
    }

    pub fn event_name(&self) -> &str {
        &self.event_name
    }

    pub fn sentence(&self) -> &str {
        &self.sentence
    }

    pub fn trigger(&self) -> &str {
        &self.trigger
    }

    pub fn origin(&self) -> SampleOrigin {
        self.origin
    }

    pub(crate) fn renamed(&self, event_name: &str) -> Self {
        GeneratedSample {
            event_name: event_name.to_string(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureReason {
    Backend(GenFailure),
    /// The response had no record line for this event, even after one retry.
    NoRecord,
    /// Fewer usable record lines than requested.
    Shortfall,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::Backend(e) => write!(f, "backend failure: {e}"),
            FailureReason::NoRecord => f.write_str("no record line in response"),
            FailureReason::Shortfall => f.write_str("fewer record lines than requested"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurationFailure {
    pub event: String,
    pub reason: FailureReason,
    /// Requested items this failure accounts for.
    pub missing: usize,
}

/// `requested == parsed + dropped_invalid + sum(failures.missing)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CurationReport {
    pub requested: usize,
    pub parsed: usize,
    pub dropped_invalid: usize,
    pub failures: Vec<CurationFailure>,
    /// Requests that were re-sent because their response was incomplete.
    pub parse_retries: usize,
}

impl CurationReport {
    pub fn backend_failures(&self) -> usize {
        self.failures
            .iter()
            .filter(|f| matches!(f.reason, FailureReason::Backend(_)))
            .count()
    }

    pub fn missing(&self) -> usize {
        self.failures.iter().map(|f| f.missing).sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.requested == self.parsed + self.dropped_invalid + self.missing()
    }

    fn fail(&mut self, event: &str, reason: FailureReason, missing: usize) {
        self.failures.push(CurationFailure {
            event: event.to_string(),
            reason,
            missing,
        });
    }

    pub fn merge(&mut self, other: CurationReport) {
        self.requested += other.requested;
        self.parsed += other.parsed;
        self.dropped_invalid += other.dropped_invalid;
        self.failures.extend(other.failures);
        self.parse_retries += other.parse_retries;
    }
}

/// One parsed record line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordLine<'a> {
    pub event: &'a str,
    pub fields: Vec<(&'a str, &'a str)>,
}

impl<'a> RecordLine<'a> {
    pub fn field(&self, key: &str) -> Option<&'a str> {
        self.fields.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }
}

fn parse_field(part: &str) -> Option<(&str, &str)> {
    let (key, value) = part.split_once(':')?;
    let key = key.trim();
    if key.is_empty() || !key.bytes().all(|b| b.is_ascii_uppercase() || b == b'_') {
        return None;
    }
    Some((key, value.trim()))
}

pub fn parse_record_line(line: &str) -> Option<RecordLine<'_>> {
    let line = line.trim_end_matches(['\r', '\n']);
    let mut parts = line.split('\t');
    let head = parts.next()?.trim();
    let head = head
        .strip_prefix("- ")
        .or_else(|| head.strip_prefix("* "))
        .unwrap_or(head)
        .trim();
    if head.is_empty() {
        return None;
    }
    let fields: Option<Vec<_>> = parts.map(parse_field).collect();
    let fields = fields?;
    if fields.is_empty() {
        return None;
    }
    Some(RecordLine { event: head, fields })
}

/// Record lines grouped by requested event (keyed by canonical name), in
/// response order.
fn attribute<'t>(text: &'t str, names: &[&str]) -> BTreeMap<String, Vec<RecordLine<'t>>> {
    let canonical: BTreeMap<String, &str> = names.iter().map(|n| (name_key(n), *n)).collect();
    let mut out: BTreeMap<String, Vec<RecordLine<'t>>> = BTreeMap::new();
    for line in text.lines() {
        if let Some(rec) = parse_record_line(line) {
            if let Some(name) = canonical.get(&name_key(rec.event)) {
                out.entry(name.to_string()).or_default().push(rec);
            }
        }
    }
    out
}

/// First non-empty `DEFINITION` per requested event.
pub fn parse_definitions(text: &str, names: &[&str]) -> BTreeMap<String, String> {
    attribute(text, names)
        .into_iter()
        .filter_map(|(name, lines)| {
            lines
                .iter()
                .filter_map(|l| l.field(FIELD_DEFINITION))
                .find(|d| !d.is_empty())
                .map(|d| (name, d.to_string()))
        })
        .collect()
}

/// Per-event outcome of sample parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedSamples {
    pub samples: Vec<GeneratedSample>,
    /// Record lines considered (at most `per_event`).
    pub considered: usize,
    pub dropped_invalid: usize,
}

/// Parses up to `per_event` sample lines per requested event. Lines
/// missing a field, or whose trigger is not in the sentence, are counted
/// as dropped.
pub fn parse_samples(text: &str, names: &[&str], per_event: usize) -> BTreeMap<String, ParsedSamples> {
    attribute(text, names)
        .into_iter()
        .map(|(name, lines)| {
            let mut parsed = ParsedSamples::default();
            for line in lines.iter().take(per_event) {
                parsed.considered += 1;
                let sample = match (line.field(FIELD_SENTENCE), line.field(FIELD_TRIGGER)) {
                    (Some(s), Some(t)) => {
                        GeneratedSample::new(name.as_str(), s, t, SampleOrigin::Generated).ok()
                    }
                    _ => None,
                };
                match sample {
                    Some(s) => parsed.samples.push(s),
                    None => parsed.dropped_invalid += 1,
                }
            }
            (name, parsed)
        })
        .collect()
}

/// `PARAPHRASE` values for `event`, in response order.
pub fn parse_paraphrases<'t>(text: &'t str, event: &str) -> Vec<&'t str> {
    attribute(text, &[event])
        .into_values()
        .flatten()
        .filter_map(|l| l.field(FIELD_PARAPHRASE))
        .collect()
}

/// Drives the generation steps against a [`Backend`].
pub struct Curator<'a> {
    backend: &'a dyn Backend,
    examples: BTreeMap<TemplateId, String>,
}

impl<'a> Curator<'a> {
    pub fn new(backend: &'a dyn Backend) -> Self {
        Curator {
            backend,
            examples: TemplateId::ALL
                .iter()
                .map(|&id| (id, id.default_example().trim_end().to_string()))
                .collect(),
        }
    }

    /// Replaces the in-context example bound to `{example}` for `id`.
    pub fn with_example(mut self, id: TemplateId, example: impl Into<String>) -> Self {
        self.examples.insert(id, example.into());
        self
    }

    fn example(&self, id: TemplateId) -> String {
        self.examples[&id].clone()
    }

    /// Sends `requests`; responses that `incomplete` flags are re-sent once.
    /// Each entry holds the first response text and, if retried, the second.
    fn send(
        &self,
        requests: &[GenRequest],
        incomplete: impl Fn(usize, &str) -> bool,
    ) -> (Vec<Result<Vec<String>, GenFailure>>, usize) {
        let first = self.backend.complete_batch(requests);
        let mut out: Vec<Result<Vec<String>, GenFailure>> = first
            .into_iter()
            .map(|r| r.map(|GenResponse { text, .. }| alloc::vec![text]))
            .collect();
        let retry: Vec<usize> = out
            .iter()
            .enumerate()
            .filter(|(i, r)| matches!(r, Ok(t) if incomplete(*i, &t[0])))
            .map(|(i, _)| i)
            .collect();
        if !retry.is_empty() {
            let again: Vec<GenRequest> = retry.iter().map(|&i| requests[i].clone()).collect();
            for (&i, resp) in retry.iter().zip(self.backend.complete_batch(&again)) {
                if let (Ok(texts), Ok(resp)) = (&mut out[i], resp) {
                    texts.push(resp.text);
                }
            }
        }
        (out, retry.len())
    }

    fn tree_events(ontology: &Ontology, roots: &[NodeId]) -> Vec<Vec<NodeId>> {
        roots.iter().map(|&r| ontology.tree(r).ids().collect()).collect()
    }

    /// One request per tree listing every event type of the tree. The
    /// parsed definition becomes `definitions[0]` of each node.
    pub fn curate_definitions(
        &self,
        ontology: &mut Ontology,
        roots: &[NodeId],
    ) -> Result<CurationReport, CurationError> {
        let groups = Self::tree_events(ontology, roots);
        if groups.iter().all(Vec::is_empty) {
            return Err(CurationError::NoEvents);
        }
        let names: Vec<Vec<String>> = groups
            .iter()
            .map(|g| g.iter().map(|&id| ontology.node(id).name().to_string()).collect())
            .collect();
        let requests: Vec<GenRequest> = groups
            .iter()
            .zip(&names)
            .map(|(ids, names)| {
                let root_depth = ontology.ancestors(ids[0]).count();
                let listing: Vec<String> = ids
                    .iter()
                    .map(|&id| {
                        let depth = ontology.ancestors(id).count() - root_depth;
                        format!("{}- {}", "  ".repeat(depth), ontology.node(id).name())
                    })
                    .collect();
                let mut v = BTreeMap::new();
                v.insert(VAR_EVENTS.into(), listing.join("\n"));
                v.insert(VAR_EVENT_NAMES.into(), names.join("\n"));
                v.insert(VAR_EXAMPLE.into(), self.example(TemplateId::DefinitionCuration));
                GenRequest::new(TemplateId::DefinitionCuration, v)
            })
            .collect();

        let name_refs: Vec<Vec<&str>> = names
            .iter()
            .map(|n| n.iter().map(String::as_str).collect())
            .collect();
        let (responses, parse_retries) = self.send(&requests, |i, text| {
            parse_definitions(text, &name_refs[i]).len() < name_refs[i].len()
        });

        let mut report = CurationReport {
            parse_retries,
            ..CurationReport::default()
        };
        for ((ids, names), response) in groups.iter().zip(&name_refs).zip(responses) {
            report.requested += ids.len();
            let texts = match response {
                Ok(t) => t,
                Err(e) => {
                    for n in names {
                        report.fail(n, FailureReason::Backend(e.clone()), 1);
                    }
                    continue;
                }
            };
            let mut found = parse_definitions(&texts[0], names);
            if let Some(second) = texts.get(1) {
                for (k, v) in parse_definitions(second, names) {
                    found.entry(k).or_insert(v);
                }
            }
            for (&id, name) in ids.iter().zip(names) {
                match found.remove(*name) {
                    Some(def) => {
                        report.parsed += 1;
                        let defs = &mut ontology.node_mut(id).definitions;
                        if defs.is_empty() {
                            defs.push(def);
                        } else {
                            defs[0] = def;
                        }
                    }
                    None => report.fail(name, FailureReason::NoRecord, 1),
                }
            }
        }
        Ok(report)
    }

    /// One request per tree asking for `per_event` samples of every event
    /// type. Valid samples come back grouped by event in pre-order.
    /// `attempt` is passed to the backend so a regeneration round can draw
    /// different text.
    pub fn curate_samples(
        &self,
        ontology: &Ontology,
        roots: &[NodeId],
        per_event: usize,
        attempt: u32,
    ) -> Result<(Vec<GeneratedSample>, CurationReport), CurationError> {
        self.curate_samples_for(ontology, &Self::tree_events(ontology, roots), per_event, attempt)
    }

    /// Like [`Curator::curate_samples`] for explicit event groups, each group
    /// being sent as one request.
    pub fn curate_samples_for(
        &self,
        ontology: &Ontology,
        groups: &[Vec<NodeId>],
        per_event: usize,
        attempt: u32,
    ) -> Result<(Vec<GeneratedSample>, CurationReport), CurationError> {
        if per_event == 0 {
            return Err(CurationError::ZeroCount("per_event"));
        }
        if groups.iter().all(Vec::is_empty) {
            return Err(CurationError::NoEvents);
        }
        for &id in groups.iter().flatten() {
            if ontology.node(id).definitions.is_empty() {
                return Err(CurationError::MissingDefinition(
                    ontology.node(id).name().to_string(),
                ));
            }
        }
        let groups: Vec<&Vec<NodeId>> = groups.iter().filter(|g| !g.is_empty()).collect();
        let names: Vec<Vec<&str>> = groups
            .iter()
            .map(|g| g.iter().map(|&id| ontology.node(id).name()).collect())
            .collect();
        let requests: Vec<GenRequest> = groups
            .iter()
            .zip(&names)
            .map(|(ids, names)| {
                let listing: Vec<String> = ids
                    .iter()
                    .map(|&id| {
                        let n = ontology.node(id);
                        format!("- {}: {}", n.name(), n.definitions[0])
                    })
                    .collect();
                let mut v = BTreeMap::new();
                v.insert(VAR_EVENTS.into(), listing.join("\n"));
                v.insert(VAR_EVENT_NAMES.into(), names.join("\n"));
                v.insert(VAR_COUNT.into(), per_event.to_string());
                v.insert(VAR_EXAMPLE.into(), self.example(TemplateId::SampleCuration));
                if attempt > 0 {
                    v.insert(VAR_ATTEMPT.into(), attempt.to_string());
                }
                GenRequest::new(TemplateId::SampleCuration, v)
            })
            .collect();

        let (responses, parse_retries) = self.send(&requests, |i, text| {
            let parsed = parse_samples(text, &names[i], per_event);
            names[i].iter().any(|n| !parsed.contains_key(*n))
        });

        let mut samples = Vec::new();
        let mut report = CurationReport {
            parse_retries,
            ..CurationReport::default()
        };
        for (names, response) in names.iter().zip(responses) {
            report.requested += names.len() * per_event;
            let texts = match response {
                Ok(t) => t,
                Err(e) => {
                    for n in names {
                        report.fail(n, FailureReason::Backend(e.clone()), per_event);
                    }
                    continue;
                }
            };
            let mut parsed = parse_samples(&texts[0], names, per_event);
            if let Some(second) = texts.get(1) {
                for (k, v) in parse_samples(second, names, per_event) {
                    parsed.entry(k).or_insert(v);
                }
            }
            for name in names {
                match parsed.remove(*name) {
                    Some(p) => {
                        report.parsed += p.samples.len();
                        report.dropped_invalid += p.dropped_invalid;
                        if p.considered < per_event {
                            report.fail(name, FailureReason::Shortfall, per_event - p.considered);
                        }
                        samples.extend(p.samples);
                    }
                    None => report.fail(name, FailureReason::NoRecord, per_event),
                }
            }
        }
        Ok((samples, report))
    }

    /// One request per node asking for `count` paraphrases of its seed
    /// definition. Exact (trimmed) duplicates of existing definitions are
    /// dropped; survivors are appended so each node ends with at most
    /// `1 + count` definitions from this call.
    pub fn expand_definitions(
        &self,
        ontology: &mut Ontology,
        ids: &[NodeId],
        count: usize,
    ) -> Result<(BTreeMap<String, Vec<String>>, CurationReport), CurationError> {
        if count == 0 {
            return Err(CurationError::ZeroCount("count"));
        }
        if ids.is_empty() {
            return Err(CurationError::NoEvents);
        }
        for &id in ids {
            if ontology.node(id).definitions.is_empty() {
                return Err(CurationError::MissingDefinition(
                    ontology.node(id).name().to_string(),
                ));
            }
        }
        let requests: Vec<GenRequest> = ids
            .iter()
            .map(|&id| {
                let node = ontology.node(id);
                let mut v = BTreeMap::new();
                v.insert(VAR_EVENT.into(), node.name().to_string());
                v.insert(VAR_EVENT_NAMES.into(), node.name().to_string());
                v.insert(VAR_DEFINITION.into(), node.definitions[0].clone());
                v.insert(VAR_ONTOLOGY.into(), ontology_summary(ontology, id));
                v.insert(VAR_COUNT.into(), count.to_string());
                v.insert(VAR_EXAMPLE.into(), self.example(TemplateId::DefinitionExpansion));
                GenRequest::new(TemplateId::DefinitionExpansion, v)
            })
            .collect();
        let names: Vec<String> = ids
            .iter()
            .map(|&id| ontology.node(id).name().to_string())
            .collect();
        let (responses, parse_retries) =
            self.send(&requests, |i, text| parse_paraphrases(text, &names[i]).is_empty());

        let mut added = BTreeMap::new();
        let mut report = CurationReport {
            parse_retries,
            ..CurationReport::default()
        };
        for ((&id, name), response) in ids.iter().zip(&names).zip(responses) {
            report.requested += count;
            let texts = match response {
                Ok(t) => t,
                Err(e) => {
                    report.fail(name, FailureReason::Backend(e), count);
                    continue;
                }
            };
            let mut lines = parse_paraphrases(&texts[0], name);
            if lines.is_empty() {
                if let Some(second) = texts.get(1) {
                    lines = parse_paraphrases(second, name);
                }
            }
            if lines.is_empty() {
                report.fail(name, FailureReason::NoRecord, count);
                continue;
            }
            let node = ontology.node_mut(id);
            let mut seen: BTreeSet<String> = node.definitions.iter().map(|d| d.trim().to_string()).collect();
            let mut fresh = Vec::new();
            let considered = lines.len().min(count);
            for line in lines.into_iter().take(count) {
                let line = line.trim();
                if line.is_empty() || !seen.insert(line.to_string()) {
                    report.dropped_invalid += 1;
                } else {
                    fresh.push(line.to_string());
                }
            }
            report.parsed += fresh.len();
            if considered < count {
                report.fail(name, FailureReason::Shortfall, count - considered);
            }
            node.definitions.extend(fresh.iter().cloned());
            added.insert(name.clone(), fresh);
        }
        Ok((added, report))
    }
}

/// Parent, siblings and children of `id`, for the expansion prompt.
pub fn ontology_summary(ontology: &Ontology, id: NodeId) -> String {
    let list = |ids: Vec<NodeId>| -> String {
        if ids.is_empty() {
            "none".to_string()
        } else {
            ids.iter()
                .map(|&i| ontology.node(i).name())
                .collect::<Vec<_>>()
                .join(", ")
        }
    };
    let node = ontology.node(id);
    let parent = node.parent().map(|p| ontology.node(p).name()).unwrap_or("none");
    format!(
        "parent: {}; siblings: {}; children: {}",
        parent,
        list(ontology.sibling_ids(id)),
        list(node.children().to_vec())
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{GenResponse, Sequential};
    use crate::mock::MockGenerator;
    use crate::ontology::tests::{rec, toy};
    use alloc::vec;
    use core::cell::RefCell;

    /// Returns canned texts in order, cycling the last one.
    struct Canned(RefCell<Vec<String>>);

    impl Canned {
        fn new(texts: &[&str]) -> Self {
            Canned(RefCell::new(texts.iter().map(|t| t.to_string()).collect()))
        }
    }

    impl Backend for Canned {
        fn complete_batch(&self, requests: &[GenRequest]) -> Vec<Result<GenResponse, GenFailure>> {
            requests
                .iter()
                .map(|_| {
                    let mut q = self.0.borrow_mut();
                    let text = if q.len() > 1 { q.remove(0) } else { q[0].clone() };
                    Ok(GenResponse {
                        text,
                        backend: "canned".into(),
                        attempts: 1,
                    })
                })
                .collect()
        }
    }

    fn three_node() -> Ontology {
        Ontology::from_records(vec![
            rec("conflict", None),
            rec("attack", Some("conflict")),
            rec("protest", Some("conflict")),
        ])
        .unwrap()
    }

    #[test]
    fn record_line_grammar() {
        let r = parse_record_line("attack\tSENTENCE: They attacked.\tTRIGGER: attacked").unwrap();
        assert_eq!(r.event, "attack");
        assert_eq!(r.field("TRIGGER"), Some("attacked"));
        assert!(parse_record_line("Here are your definitions:").is_none());
        assert!(parse_record_line("attack\tnot a field").is_none());
        assert!(parse_record_line("\tDEFINITION: x").is_none());
        assert_eq!(
            parse_record_line("- attack\tDEFINITION: x").unwrap().event,
            "attack"
        );
    }

    #[test]
    fn sample_invariant_is_enforced() {
        assert!(GeneratedSample::new("e", "They attacked.", "attacked", SampleOrigin::Generated).is_ok());
        assert_eq!(
            GeneratedSample::new("e", "They attacked.", "bombed", SampleOrigin::Generated),
            Err(SampleError::TriggerNotInSentence {
                trigger: "bombed".into()
            })
        );
        assert_eq!(
            GeneratedSample::new("e", "a\nb", "a", SampleOrigin::Generated),
            Err(SampleError::Newline)
        );
        assert_eq!(
            GeneratedSample::new("e", "abc", " ", SampleOrigin::Generated),
            Err(SampleError::EmptyTrigger)
        );
    }

    #[test]
    fn mock_definitions_for_three_nodes() {
        let backend = Sequential::new(MockGenerator::new(3));
        let mut o = three_node();
        let roots = o.roots().to_vec();
        let report = Curator::new(&backend).curate_definitions(&mut o, &roots).unwrap();
        assert_eq!(report.parsed, 3);
        assert!(report.failures.is_empty());
        for (_, n) in o.iter() {
            assert_eq!(n.definitions.len(), 1);
            assert!(!n.definitions[0].is_empty());
        }
    }

    #[test]
    fn empty_selection_is_rejected() {
        let backend = Sequential::new(MockGenerator::new(3));
        let mut o = three_node();
        assert_eq!(
            Curator::new(&backend).curate_definitions(&mut o, &[]),
            Err(CurationError::NoEvents)
        );
    }

    #[test]
    fn missing_definition_line_is_retried_then_recorded() {
        let text = "Sure!\nconflict\tDEFINITION: A clash.\nattack\tDEFINITION: A strike.\n";
        let backend = Canned::new(&[text]);
        let mut o = three_node();
        let roots = o.roots().to_vec();
        let report = Curator::new(&backend).curate_definitions(&mut o, &roots).unwrap();
        assert_eq!(report.parsed, 2);
        assert_eq!(report.parse_retries, 1);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].event, "protest");
        assert_eq!(report.failures[0].reason, FailureReason::NoRecord);
        assert!(report.is_balanced());
        assert!(o.node(o.get("protest").unwrap()).definitions.is_empty());
    }

    #[test]
    fn retry_response_fills_the_gap() {
        let first = "conflict\tDEFINITION: A clash.\n";
        let second = "attack\tDEFINITION: A strike.\nprotest\tDEFINITION: A rally.\n";
        let backend = Canned::new(&[first, second]);
        let mut o = three_node();
        let roots = o.roots().to_vec();
        let report = Curator::new(&backend).curate_definitions(&mut o, &roots).unwrap();
        assert_eq!(report.parsed, 3);
        assert!(report.failures.is_empty());
    }

    fn with_defs(mut o: Ontology) -> Ontology {
        let ids: Vec<NodeId> = o.iter().map(|(id, _)| id).collect();
        for id in ids {
            let def = format!("definition of {}", o.node(id).name());
            o.node_mut(id).definitions.push(def);
        }
        o
    }

    #[test]
    fn mock_samples_two_events() {
        let backend = Sequential::new(MockGenerator::new(11));
        let o = with_defs(
            Ontology::from_records(vec![rec("attack", None), rec("bombing", Some("attack"))]).unwrap(),
        );
        let roots = o.roots().to_vec();
        let (samples, report) = Curator::new(&backend).curate_samples(&o, &roots, 10, 0).unwrap();
        assert_eq!(samples.len(), 20);
        assert_eq!(report.parsed, 20);
        assert_eq!(report.dropped_invalid, 0);
        assert!(samples[..10].iter().all(|s| s.event_name() == "attack"));
        assert!(samples[10..].iter().all(|s| s.event_name() == "bombing"));
    }

    #[test]
    fn invalid_sample_is_dropped_and_counted() {
        let text = "attack\tSENTENCE: Rebels attacked the base.\tTRIGGER: attacked\n\
                    attack\tSENTENCE: Rebels attacked the base.\tTRIGGER: bombed\n";
        let backend = Canned::new(&[text]);
        let o = with_defs(Ontology::from_records(vec![rec("attack", None)]).unwrap());
        let roots = o.roots().to_vec();
        let (samples, report) = Curator::new(&backend).curate_samples(&o, &roots, 2, 0).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(report.dropped_invalid, 1);
        assert!(report.is_balanced());
    }

    #[test]
    fn sample_preconditions() {
        let backend = Sequential::new(MockGenerator::new(1));
        let o = three_node();
        let roots = o.roots().to_vec();
        let c = Curator::new(&backend);
        assert_eq!(
            c.curate_samples(&o, &roots, 0, 0),
            Err(CurationError::ZeroCount("per_event"))
        );
        assert!(matches!(
            c.curate_samples(&o, &roots, 10, 0),
            Err(CurationError::MissingDefinition(_))
        ));
    }

    #[test]
    fn mock_expansion_adds_ten() {
        let backend = Sequential::new(MockGenerator::new(5));
        let mut o = with_defs(toy());
        let id = o.get("attack").unwrap();
        let (added, report) = Curator::new(&backend)
            .expand_definitions(&mut o, &[id], 10)
            .unwrap();
        assert_eq!(added["attack"].len(), 10);
        assert_eq!(o.node(id).definitions.len(), 11);
        assert!(report.is_balanced());
    }

    #[test]
    fn verbatim_seed_paraphrases_are_deduplicated() {
        let line = "attack\tPARAPHRASE: definition of attack\n";
        let text: String = line.repeat(10);
        let backend = Canned::new(&[&text]);
        let mut o = with_defs(toy());
        let id = o.get("attack").unwrap();
        let (_, report) = Curator::new(&backend)
            .expand_definitions(&mut o, &[id], 10)
            .unwrap();
        assert_eq!(o.node(id).definitions.len(), 1);
        assert_eq!(report.dropped_invalid, 10);
        assert!(report.is_balanced());
    }

    #[test]
    fn expansion_count_bounds_total() {
        let backend = Sequential::new(MockGenerator::new(5));
        let mut o = with_defs(toy());
        let id = o.get("attack").unwrap();
        Curator::new(&backend)
            .expand_definitions(&mut o, &[id], 1)
            .unwrap();
        assert!(o.node(id).definitions.len() <= 2);
    }

    #[test]
    fn ontology_summary_lists_relatives() {
        let o = toy();
        assert_eq!(
            ontology_summary(&o, o.get("attack").unwrap()),
            "parent: conflict; siblings: protest; children: bombing, shooting"
        );
        assert_eq!(
            ontology_summary(&o, o.get("flight").unwrap()),
            "parent: transport; siblings: none; children: none"
        );
    }
}
