//! JSONL file formats.
//!
//! Every reader reports problems with the 1-based line they came from.
//! Writers emit one compact JSON object per line in struct field order, so
//! writing the same values twice yields identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dived_core::ontology::OntologyBuilder;
use dived_core::{
    Dataset, DatasetError, EventRecord, GoldRecord, NodeRecord, Ontology, OntologyError, OverlapRecord,
    PredictionRecord, TrainingInstance,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Ontology { path: PathBuf, source: OntologyError },
    #[error("{}: {source}", path.display())]
    Dataset { path: PathBuf, source: DatasetError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses every non-blank line of `path` as a `T`, paired with its line
/// number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| FormatError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

pub fn write_jsonl<'a, T, I>(path: &Path, items: I) -> Result<usize, FormatError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut n = 0;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| FormatError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
        n += 1;
    }
    w.flush().map_err(io_err(path))?;
    Ok(n)
}

pub fn sha256_file(path: &Path) -> Result<String, FormatError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn stamp(ontology: &mut Ontology, path: &Path) -> Result<(), FormatError> {
    ontology.source = path.display().to_string();
    ontology.version = sha256_file(path)?[..12].to_string();
    Ok(())
}

/// Ontology JSONL: `{"name", "parent", "external_id"}` per node.
pub fn load_ontology(path: &Path) -> Result<Ontology, FormatError> {
    let mut builder = OntologyBuilder::default();
    for (line, record) in read_jsonl::<NodeRecord>(path)? {
        builder.push(line, record, Vec::new());
    }
    let mut ontology = builder.build().map_err(|source| FormatError::Ontology {
        path: path.to_path_buf(),
        source,
    })?;
    stamp(&mut ontology, path)?;
    Ok(ontology)
}

pub fn write_ontology(path: &Path, ontology: &Ontology) -> Result<usize, FormatError> {
    write_jsonl(path, &ontology.to_records())
}

/// Generated-dataset JSONL: one [`EventRecord`] per event type.
pub fn load_dataset(path: &Path) -> Result<Dataset, FormatError> {
    let records = read_jsonl::<EventRecord>(path)?;
    let mut dataset = Dataset::from_records(records).map_err(|source| FormatError::Dataset {
        path: path.to_path_buf(),
        source,
    })?;
    stamp(dataset.ontology_mut(), path)?;
    Ok(dataset)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<usize, FormatError> {
    write_jsonl(path, &dataset.to_records())
}

/// Training instances, each checked against the instance invariants.
pub fn read_instances(path: &Path) -> Result<Vec<TrainingInstance>, FormatError> {
    read_jsonl::<TrainingInstance>(path)?
        .into_iter()
        .map(|(line, inst)| {
            inst.validate().map_err(|e| FormatError::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            Ok(inst)
        })
        .collect()
}

pub fn write_instances(path: &Path, instances: &[TrainingInstance]) -> Result<usize, FormatError> {
    write_jsonl(path, instances)
}

pub fn read_gold(path: &Path) -> Result<Vec<GoldRecord>, FormatError> {
    read_jsonl::<GoldRecord>(path)?
        .into_iter()
        .map(|(line, g)| {
            g.validate().map_err(|e| FormatError::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            Ok(g)
        })
        .collect()
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, FormatError> {
    Ok(read_jsonl(path)?.into_iter().map(|(_, p)| p).collect())
}

pub fn write_audit(path: &Path, records: &[OverlapRecord]) -> Result<usize, FormatError> {
    write_jsonl(path, records)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| FormatError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| FormatError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}
