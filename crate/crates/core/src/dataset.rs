//! Generated dataset: an ontology whose nodes carry definitions, plus the
//! curated samples of each event type.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::curation::{GeneratedSample, SampleError, SampleOrigin};
use crate::ontology::{NodeId, NodeRecord, Ontology, OntologyBuilder, OntologyError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error("line {line}: children of {event:?} are {declared:?} but parent links give {derived:?}")]
    InconsistentChildren {
        line: usize,
        event: String,
        declared: Vec<String>,
        derived: Vec<String>,
    },
    #[error("line {line}: sample {index} of {event:?}: {source}")]
    InvalidSample {
        line: usize,
        event: String,
        index: usize,
        source: SampleError,
    },
    #[error("sample for unknown event type {0:?}")]
    UnknownEvent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginTag {
    #[default]
    Generated,
    Imported,
}

fn is_generated(o: &OriginTag) -> bool {
    *o == OriginTag::Generated
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sentence: String,
    pub trigger: String,
    #[serde(default, skip_serializing_if = "is_generated")]
    pub origin: OriginTag,
}

/// One line of the generated-dataset JSONL format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event: String,
    pub parent: Option<String>,
    pub children: Vec<String>,
    pub definitions: Vec<String>,
    pub samples: Vec<SampleRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    ontology: Ontology,
    samples: BTreeMap<String, Vec<GeneratedSample>>,
}

impl Dataset {
    pub fn new(ontology: Ontology) -> Self {
        Dataset {
            ontology,
            samples: BTreeMap::new(),
        }
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn ontology_mut(&mut self) -> &mut Ontology {
        &mut self.ontology
    }

    pub fn into_ontology(self) -> Ontology {
        self.ontology
    }

    pub fn samples(&self, id: NodeId) -> &[GeneratedSample] {
        self.samples_by_name(self.ontology.node(id).name())
    }

    pub fn samples_by_name(&self, name: &str) -> &[GeneratedSample] {
        self.samples.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Replaces the samples of every event type present in `samples`.
    pub fn set_samples(&mut self, samples: Vec<GeneratedSample>) -> Result<(), DatasetError> {
        let mut grouped: BTreeMap<String, Vec<GeneratedSample>> = BTreeMap::new();
        for s in samples {
            let id = self
                .ontology
                .get(s.event_name())
                .ok_or_else(|| DatasetError::UnknownEvent(s.event_name().to_string()))?;
            let name = self.ontology.node(id).name().to_string();
            let s = if s.event_name() == name {
                s
            } else {
                s.renamed(&name)
            };
            grouped.entry(name).or_default().push(s);
        }
        self.samples.extend(grouped);
        Ok(())
    }

    /// Appends samples for event types that already have some.
    pub fn extend_samples(&mut self, samples: Vec<GeneratedSample>) -> Result<(), DatasetError> {
        let mut existing = core::mem::take(&mut self.samples);
        let mut incoming = Dataset::new(self.ontology.clone());
        incoming.set_samples(samples)?;
        for (name, new) in incoming.samples {
            existing.entry(name).or_default().extend(new);
        }
        self.samples = existing;
        Ok(())
    }

    /// Same samples, restructured ontology (nodes that vanished lose theirs).
    pub fn with_ontology(&self, ontology: Ontology) -> Dataset {
        let samples = self
            .samples
            .iter()
            .filter(|(name, _)| ontology.get(name).is_some())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Dataset { ontology, samples }
    }

    pub fn total_samples(&self) -> usize {
        self.samples.values().map(Vec::len).sum()
    }

    pub fn total_definitions(&self) -> usize {
        self.ontology.iter().map(|(_, n)| n.definitions.len()).sum()
    }

    pub fn to_records(&self) -> Vec<EventRecord> {
        let o = &self.ontology;
        o.iter()
            .map(|(id, n)| EventRecord {
                event: n.name().to_string(),
                parent: n.parent().map(|p| o.node(p).name().to_string()),
                children: n
                    .children()
                    .iter()
                    .map(|&c| o.node(c).name().to_string())
                    .collect(),
                definitions: n.definitions.clone(),
                samples: self
                    .samples(id)
                    .iter()
                    .map(|s| SampleRecord {
                        sentence: s.sentence().to_string(),
                        trigger: s.trigger().to_string(),
                        origin: match s.origin() {
                            SampleOrigin::Generated => OriginTag::Generated,
                            SampleOrigin::Imported => OriginTag::Imported,
                        },
                    })
                    .collect(),
            })
            .collect()
    }

    /// Builds a dataset from `(line, record)` pairs, checking that each
    /// declared children list agrees with the parent links.
    pub fn from_records<I>(records: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = (usize, EventRecord)>,
    {
        let records: Vec<(usize, EventRecord)> = records.into_iter().collect();
        let mut builder = OntologyBuilder::default();
        for (line, r) in &records {
            builder.push(
                *line,
                NodeRecord {
                    name: r.event.clone(),
                    parent: r.parent.clone(),
                    external_id: None,
                },
                r.definitions.clone(),
            );
        }
        let ontology = builder.build()?;
        let mut samples = BTreeMap::new();
        for (line, r) in records {
            let id = ontology.lookup(&r.event)?;
            let node = ontology.node(id);
            let derived: Vec<String> = node
                .children()
                .iter()
                .map(|&c| ontology.node(c).name().to_string())
                .collect();
            let declared: Vec<String> = r.children.iter().map(|c| c.trim().to_string()).collect();
            if declared != derived {
                return Err(DatasetError::InconsistentChildren {
                    line,
                    event: r.event,
                    declared,
                    derived,
                });
            }
            let name = node.name().to_string();
            let mut list = Vec::with_capacity(r.samples.len());
            for (index, s) in r.samples.into_iter().enumerate() {
                let origin = match s.origin {
                    OriginTag::Generated => SampleOrigin::Generated,
                    OriginTag::Imported => SampleOrigin::Imported,
                };
                let sample =
                    GeneratedSample::new(name.as_str(), s.sentence, s.trigger, origin).map_err(|source| {
                        DatasetError::InvalidSample {
                            line,
                            event: name.clone(),
                            index,
                            source,
                        }
                    })?;
                list.push(sample);
            }
            if !list.is_empty() {
                samples.insert(name, list);
            }
        }
        Ok(Dataset { ontology, samples })
    }
}
