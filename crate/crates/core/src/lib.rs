//! Allocation-only core of the diverse event definition (DivED) toolkit.
//!
//! Everything here is pure: ontology trees, prompt templates, the generation
//! backend contract and its deterministic mock, parsing of generated text,
//! trigger-overlap pruning, training-instance assembly and trigger scoring.
//! File formats, HTTP and the command line live in the `dived` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assembly;
pub mod curation;
pub mod dataset;
pub mod evaluation;
pub mod generate;
pub mod mock;
pub mod ontology;
pub mod pruning;
pub mod template;
pub mod text;

pub use assembly::{
    assemble, render_instance, Assembly, AssemblyError, InstanceKind, OntologyContext, SliceSpec,
    TrainingInstance,
};
pub use curation::{CurationError, CurationReport, Curator, GeneratedSample, SampleOrigin};
pub use dataset::{Dataset, DatasetError, EventRecord, SampleRecord};
pub use evaluation::{
    drop_rate, match_and_score, parse_model_output, DropRate, EvalError, GoldRecord, PredictionRecord,
    ScoreReport, Scores,
};
pub use generate::{
    Backend, Decoding, GenFailure, GenRequest, GenResponse, Generate, RetryPolicy, Sequential,
};
pub use mock::{mock_generate, MockGenerator};
pub use ontology::{EventTypeNode, NodeId, NodeRecord, Ontology, OntologyError, Tree};
pub use pruning::{overlap_ratio, prune, prune_tree, OverlapRecord, PruneError};
pub use template::{Template, TemplateError, TemplateId, TemplateSet};
