//! Training-instance assembly.
//!
//! A [`SliceSpec`] fixes how many event types, definitions per event,
//! samples per event and negatives per positive go into a dataset slice.
//! Every positive (sentence, gold event) pair is followed by its negatives:
//! the same sentence queried with an event type that has no gold sample
//! containing it, answered with `"None"`. The first `n_hard_negatives` of
//! them use sibling event types.
//!
//! Sampling is seeded per event from `(seed, event index, stream)`, so the
//! output never depends on scheduling, and changing the definition count
//! only moves the definition fields around.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curation::GeneratedSample;
use crate::dataset::Dataset;
use crate::ontology::{NodeId, Ontology};
use crate::template::{Template, TemplateError};
use crate::text::splitmix64;

pub const NONE_TARGET: &str = "None";

pub const DEFAULT_INSTANCE_TEMPLATE: &str = include_str!("../templates/instance.txt");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssemblyError {
    #[error("invalid slice: {0}")]
    InvalidSpec(&'static str),
    #[error(
        "need {requested} event types with at least {samples} samples and {definitions} definitions, \
         only {available} of {total} qualify ({short_samples} short of samples, {short_definitions} short of definitions)"
    )]
    InsufficientEvents {
        requested: usize,
        available: usize,
        total: usize,
        samples: usize,
        definitions: usize,
        short_samples: usize,
        short_definitions: usize,
    },
    #[error("negatives need at least 2 event types, the dataset has {0}")]
    NoNegativeCandidate(usize),
    #[error("event {event:?}: {needed} negatives requested, only {available} candidate event types")]
    InsufficientNegatives {
        event: String,
        needed: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Positive,
    Negative,
    HardNegative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyContext {
    pub parent: Option<String>,
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub instance_id: String,
    pub event_name: String,
    pub definition: String,
    pub ontology_context: Option<OntologyContext>,
    pub sentence: String,
    pub target: String,
    pub kind: InstanceKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("positive instance has target \"None\"")]
    PositiveWithoutTrigger,
    #[error("positive target {0:?} is not a substring of the sentence")]
    TargetNotInSentence(String),
    #[error("{kind:?} instance must have target \"None\", found {target:?}")]
    NegativeWithTrigger { kind: InstanceKind, target: String },
    #[error("empty {0}")]
    Empty(&'static str),
}

impl TrainingInstance {
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.instance_id.is_empty() {
            return Err(InstanceError::Empty("instance_id"));
        }
        if self.event_name.trim().is_empty() {
            return Err(InstanceError::Empty("event_name"));
        }
        if self.sentence.trim().is_empty() {
            return Err(InstanceError::Empty("sentence"));
        }
        match self.kind {
            InstanceKind::Positive => {
                if self.target == NONE_TARGET {
                    Err(InstanceError::PositiveWithoutTrigger)
                } else if self.target.is_empty() || !self.sentence.contains(self.target.as_str()) {
                    Err(InstanceError::TargetNotInSentence(self.target.clone()))
                } else {
                    Ok(())
                }
            }
            kind => {
                if self.target == NONE_TARGET {
                    Ok(())
                } else {
                    Err(InstanceError::NegativeWithTrigger {
                        kind,
                        target: self.target.clone(),
                    })
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SliceSpec {
    pub n_events: usize,
    pub n_definitions: usize,
    pub n_samples: usize,
    pub n_negatives: usize,
    pub n_hard_negatives: usize,
    pub with_ontology: bool,
    pub with_definition: bool,
    pub seed: i64,
}

impl Default for SliceSpec {
    /// 200 event types, 10 definitions, 10 samples, 10 negatives of which 3
    /// hard, with ontology context and definitions.
    fn default() -> Self {
        SliceSpec {
            n_events: 200,
            n_definitions: 10,
            n_samples: 10,
            n_negatives: 10,
            n_hard_negatives: 3,
            with_ontology: true,
            with_definition: true,
            seed: 0,
        }
    }
}

impl SliceSpec {
    pub fn validate(&self) -> Result<(), AssemblyError> {
        if self.n_events == 0 {
            return Err(AssemblyError::InvalidSpec("n_events must be positive"));
        }
        if self.n_definitions == 0 {
            return Err(AssemblyError::InvalidSpec("n_definitions must be positive"));
        }
        if self.n_samples == 0 {
            return Err(AssemblyError::InvalidSpec("n_samples must be positive"));
        }
        if self.n_hard_negatives > self.n_negatives {
            return Err(AssemblyError::InvalidSpec(
                "n_hard_negatives must not exceed n_negatives",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembly {
    pub instances: Vec<TrainingInstance>,
    /// Hard-negative slots filled by non-sibling events for lack of siblings.
    pub hard_negative_fallbacks: usize,
}

impl Assembly {
    pub fn count(&self, kind: InstanceKind) -> usize {
        self.instances.iter().filter(|i| i.kind == kind).count()
    }
}

/// Negative event types as (hard, fallback, plain).
type NegativePicks = (Vec<NodeId>, Vec<NodeId>, Vec<NodeId>);

const STREAM_SELECT: u64 = 0;
const STREAM_SAMPLES: u64 = 1;
const STREAM_DEFINITIONS: u64 = 2;
const STREAM_NEGATIVES: u64 = 3;

fn stream(seed: i64, item: u64, stream: u64) -> ChaCha8Rng {
    let s = splitmix64(splitmix64(seed as u64 ^ splitmix64(item)) ^ stream);
    ChaCha8Rng::seed_from_u64(s)
}

/// Picks up to `k` of `pool` uniformly without replacement, kept in pool order.
fn choose(rng: &mut ChaCha8Rng, pool: &[NodeId], k: usize) -> Vec<NodeId> {
    let k = k.min(pool.len());
    let mut picked = index::sample(rng, pool.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i]).collect()
}

fn sorted_sample(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<usize> {
    let mut v = index::sample(rng, len, k).into_vec();
    v.sort_unstable();
    v
}

fn context(o: &Ontology, id: NodeId) -> OntologyContext {
    let node = o.node(id);
    OntologyContext {
        parent: node.parent().map(|p| o.node(p).name().to_string()),
        children: node
            .children()
            .iter()
            .map(|&c| o.node(c).name().to_string())
            .collect(),
    }
}

struct Slicer<'a> {
    dataset: &'a Dataset,
    spec: &'a SliceSpec,
}

impl Slicer<'_> {
    fn ontology(&self) -> &Ontology {
        self.dataset.ontology()
    }

    fn occurs(&self, event: NodeId, sentence: &str) -> bool {
        self.dataset
            .samples(event)
            .iter()
            .any(|s| s.sentence() == sentence)
    }

    fn usable_negative(&self, event: NodeId, gold: NodeId, sentence: &str) -> bool {
        event != gold && !self.ontology().node(event).definitions.is_empty() && !self.occurs(event, sentence)
    }

    fn instance(
        &self,
        id: String,
        event: NodeId,
        definition: &str,
        sentence: &str,
        target: &str,
        kind: InstanceKind,
    ) -> TrainingInstance {
        let o = self.ontology();
        TrainingInstance {
            instance_id: id,
            event_name: o.node(event).name().to_string(),
            definition: if self.spec.with_definition {
                definition.to_string()
            } else {
                String::new()
            },
            ontology_context: self.spec.with_ontology.then(|| context(o, event)),
            sentence: sentence.to_string(),
            target: target.to_string(),
            kind,
        }
    }

    /// Negative event types for one positive.
    fn negatives(
        &self,
        rng: &mut ChaCha8Rng,
        gold: NodeId,
        sentence: &str,
    ) -> Result<NegativePicks, AssemblyError> {
        let o = self.ontology();
        let spec = self.spec;
        let siblings: Vec<NodeId> = o
            .sibling_ids(gold)
            .into_iter()
            .filter(|&s| self.usable_negative(s, gold, sentence))
            .collect();
        let hard = choose(rng, &siblings, spec.n_hard_negatives);
        let mut taken: BTreeSet<NodeId> = hard.iter().copied().collect();

        let mut fallback = Vec::new();
        let mut need = spec.n_hard_negatives - hard.len();
        if need > 0 {
            // Nearest ancestors' other descendants first, then anything.
            for ancestor in o.ancestors(gold) {
                if need == 0 {
                    break;
                }
                let pool: Vec<NodeId> = o
                    .descendants(ancestor)
                    .filter(|&x| {
                        !o.is_descendant_or_self(x, gold)
                            && !taken.contains(&x)
                            && self.usable_negative(x, gold, sentence)
                    })
                    .collect();
                let got = choose(rng, &pool, need);
                need -= got.len();
                taken.extend(got.iter().copied());
                fallback.extend(got);
            }
            if need > 0 {
                let pool: Vec<NodeId> = o
                    .iter()
                    .map(|(id, _)| id)
                    .filter(|&x| !taken.contains(&x) && self.usable_negative(x, gold, sentence))
                    .collect();
                let got = choose(rng, &pool, need);
                taken.extend(got.iter().copied());
                fallback.extend(got);
            }
        }

        let want = spec.n_negatives - spec.n_hard_negatives;
        let sibling_set: BTreeSet<NodeId> = o.sibling_ids(gold).into_iter().collect();
        let pool: Vec<NodeId> = o
            .iter()
            .map(|(id, _)| id)
            .filter(|&x| {
                !sibling_set.contains(&x) && !taken.contains(&x) && self.usable_negative(x, gold, sentence)
            })
            .collect();
        let mut plain = choose(rng, &pool, want);
        if plain.len() < want {
            taken.extend(plain.iter().copied());
            let rest: Vec<NodeId> = o
                .iter()
                .map(|(id, _)| id)
                .filter(|&x| !taken.contains(&x) && self.usable_negative(x, gold, sentence))
                .collect();
            plain.extend(choose(rng, &rest, want - plain.len()));
        }
        let assigned = hard.len() + fallback.len() + plain.len();
        if assigned < spec.n_negatives {
            return Err(AssemblyError::InsufficientNegatives {
                event: o.node(gold).name().to_string(),
                needed: spec.n_negatives,
                available: assigned,
            });
        }
        Ok((hard, fallback, plain))
    }
}

/// Builds the instances of one slice; see the module docs for the layout.
pub fn assemble(dataset: &Dataset, spec: &SliceSpec) -> Result<Assembly, AssemblyError> {
    spec.validate()?;
    let o = dataset.ontology();
    if spec.n_negatives > 0 && o.len() < 2 {
        return Err(AssemblyError::NoNegativeCandidate(o.len()));
    }
    let mut short_samples = 0;
    let mut short_definitions = 0;
    let eligible: Vec<NodeId> = o
        .iter()
        .filter(|(id, node)| {
            let enough_samples = dataset.samples(*id).len() >= spec.n_samples;
            let enough_defs = node.definitions.len() >= spec.n_definitions;
            short_samples += usize::from(!enough_samples);
            short_definitions += usize::from(!enough_defs);
            enough_samples && enough_defs
        })
        .map(|(id, _)| id)
        .collect();
    if eligible.len() < spec.n_events {
        return Err(AssemblyError::InsufficientEvents {
            requested: spec.n_events,
            available: eligible.len(),
            total: o.len(),
            samples: spec.n_samples,
            definitions: spec.n_definitions,
            short_samples,
            short_definitions,
        });
    }
    let mut select = stream(spec.seed, u64::MAX, STREAM_SELECT);
    let chosen: Vec<NodeId> = choose(&mut select, &eligible, spec.n_events);

    let slicer = Slicer { dataset, spec };
    let mut instances = Vec::with_capacity(spec.n_events * spec.n_samples * (1 + spec.n_negatives));
    let mut fallbacks = 0;
    for (ei, &gold) in chosen.iter().enumerate() {
        let item = gold.index() as u64;
        let mut sample_rng = stream(spec.seed, item, STREAM_SAMPLES);
        let mut def_rng = stream(spec.seed, item, STREAM_DEFINITIONS);
        let mut neg_rng = stream(spec.seed, item, STREAM_NEGATIVES);

        let all_samples: &[GeneratedSample] = dataset.samples(gold);
        let sample_idx = sorted_sample(&mut sample_rng, all_samples.len(), spec.n_samples);
        let defs = &o.node(gold).definitions;
        let def_idx = sorted_sample(&mut def_rng, defs.len(), spec.n_definitions);

        for (sj, &si) in sample_idx.iter().enumerate() {
            let sample = &all_samples[si];
            let definition = &defs[def_idx[sj % def_idx.len()]];
            instances.push(slicer.instance(
                format!("{ei:05}-{sj:03}-p"),
                gold,
                definition,
                sample.sentence(),
                sample.trigger(),
                InstanceKind::Positive,
            ));
            let (hard, fallback, plain) = slicer.negatives(&mut neg_rng, gold, sample.sentence())?;
            fallbacks += fallback.len();
            let kinds = hard.iter().map(|&e| (e, InstanceKind::HardNegative)).chain(
                fallback
                    .iter()
                    .chain(&plain)
                    .map(|&e| (e, InstanceKind::Negative)),
            );
            for (k, (event, kind)) in kinds.enumerate() {
                let candidates = &o.node(event).definitions;
                let usable = candidates.len().min(spec.n_definitions);
                let definition = &candidates[def_rng.gen_range(0..usable)];
                instances.push(slicer.instance(
                    format!("{ei:05}-{sj:03}-n{k:02}"),
                    event,
                    definition,
                    sample.sentence(),
                    NONE_TARGET,
                    kind,
                ));
            }
        }
    }
    Ok(Assembly {
        instances,
        hard_negative_fallbacks: fallbacks,
    })
}

fn definition_block(definition: &str) -> String {
    format!("Definition: {definition}\n")
}

fn ontology_block(ctx: &OntologyContext) -> String {
    let parent = ctx.parent.as_deref().unwrap_or("none");
    let children = if ctx.children.is_empty() {
        "none".to_string()
    } else {
        ctx.children.join(", ")
    };
    format!("Parent event: {parent}\nChild events: {children}\n")
}

/// Renders a prompt/completion pair. The template must reference
/// `{event_type}` and `{sentence}`, plus `{definition}` when the instance
/// has one and `{ontology}` when it carries ontology context.
pub fn render_instance(
    instance: &TrainingInstance,
    template: &Template,
) -> Result<(String, String), TemplateError> {
    let mut required = alloc::vec!["event_type", "sentence"];
    if !instance.definition.is_empty() {
        required.push("definition");
    }
    if instance.ontology_context.is_some() {
        required.push("ontology");
    }
    let missing: Vec<String> = required
        .into_iter()
        .filter(|r| !template.references(r))
        .map(str::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(TemplateError::MissingPlaceholders(missing));
    }
    let mut vars = alloc::collections::BTreeMap::new();
    vars.insert("event_type".to_string(), instance.event_name.clone());
    vars.insert("sentence".to_string(), instance.sentence.clone());
    vars.insert(
        "definition".to_string(),
        if instance.definition.is_empty() {
            String::new()
        } else {
            definition_block(&instance.definition)
        },
    );
    vars.insert(
        "ontology".to_string(),
        instance
            .ontology_context
            .as_ref()
            .map(ontology_block)
            .unwrap_or_default(),
    );
    let prompt = template.render(&vars)?;
    Ok((prompt, instance.target.clone()))
}
