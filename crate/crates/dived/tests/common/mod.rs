#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn dived<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_dived"))
        .args(args)
        .env_remove("DIVED_API_KEY")
        .output()
        .expect("run dived")
}

/// Runs `args`, panicking with stderr unless the exit code is 0.
pub fn ok<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = dived(args);
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub struct Pipeline {
    pub defs: PathBuf,
    pub samples: PathBuf,
    pub expanded: PathBuf,
    pub pruned: PathBuf,
    pub audit: PathBuf,
    pub instances: PathBuf,
}

impl Pipeline {
    pub fn outputs(&self) -> [&PathBuf; 6] {
        [
            &self.defs,
            &self.samples,
            &self.expanded,
            &self.pruned,
            &self.audit,
            &self.instances,
        ]
    }
}

/// Mock pipeline over the toy ontology: definitions, samples, expansion,
/// pruning, then a 12-event slice.
pub fn pipeline(dir: &Path, seed: i64, max_in_flight: usize, assemble: &[&str]) -> Pipeline {
    let p = Pipeline {
        defs: dir.join("defs.jsonl"),
        samples: dir.join("samples.jsonl"),
        expanded: dir.join("expanded.jsonl"),
        pruned: dir.join("pruned.jsonl"),
        audit: dir.join("audit.jsonl"),
        instances: dir.join("instances.jsonl"),
    };
    let seed = seed.to_string();
    let mif = max_in_flight.to_string();
    let common = [
        "--backend",
        "mock",
        "--seed",
        seed.as_str(),
        "--max-in-flight",
        mif.as_str(),
    ];
    let s = |p: &PathBuf| p.display().to_string();
    let toy = s(&fixture("ontology_toy.jsonl"));
    ok(common
        .iter()
        .copied()
        .chain(["curate-defs", "--ontology", &toy, "--output", &s(&p.defs)]));
    ok(common.iter().copied().chain([
        "curate-samples",
        "--input",
        &s(&p.defs),
        "--output",
        &s(&p.samples),
        "--per-event",
        "10",
    ]));
    ok(common.iter().copied().chain([
        "expand-defs",
        "--input",
        &s(&p.samples),
        "--output",
        &s(&p.expanded),
        "--count",
        "10",
    ]));
    ok(common.iter().copied().chain([
        "prune",
        "--input",
        &s(&p.expanded),
        "--output",
        &s(&p.pruned),
        "--audit",
        &s(&p.audit),
    ]));
    let mut args: Vec<String> = common.iter().map(|a| a.to_string()).collect();
    args.extend(["assemble", "--input", &s(&p.pruned), "--output", &s(&p.instances)].map(String::from));
    args.extend(assemble.iter().map(|a| a.to_string()));
    ok(&args);
    p
}

pub fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}
