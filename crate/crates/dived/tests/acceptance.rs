//! Acceptance checks, one PASS/FAIL line each. Exits non-zero when any
//! check fails or runs past its time limit.

mod common;
#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{fixture, lines, ok, pipeline};
use dived::io::{self, FormatError};
use dived_core::curation::SampleOrigin;
use dived_core::evaluation::drop_rate_f1;
use dived_core::{
    assemble, match_and_score, overlap_ratio, prune, Dataset, GeneratedSample, GoldRecord, InstanceKind,
    NodeRecord, Ontology, PredictionRecord, SliceSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn rec(name: &str, parent: Option<&str>) -> NodeRecord {
    NodeRecord {
        name: name.to_string(),
        parent: parent.map(str::to_string),
        external_id: None,
    }
}

fn with_triggers(records: Vec<NodeRecord>, triggers: &[(&str, Vec<String>)]) -> Dataset {
    let mut d = Dataset::new(Ontology::from_records(records).unwrap());
    let mut samples = Vec::new();
    for (event, list) in triggers {
        for t in list {
            samples.push(
                GeneratedSample::new(
                    *event,
                    format!("they saw {t} there"),
                    t.as_str(),
                    SampleOrigin::Generated,
                )
                .unwrap(),
            );
        }
    }
    d.set_samples(samples).unwrap();
    d
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn names(d: &Dataset) -> Vec<String> {
    d.ontology().iter().map(|(_, n)| n.name().to_string()).collect()
}

fn pruning_boundary() -> Result<String, String> {
    let tree = || vec![rec("a", None), rec("b", Some("a"))];
    let mut b = words("t", 3);
    b.extend(words("x", 2));
    let over = with_triggers(tree(), &[("a", words("t", 5)), ("b", b)]);
    ensure!(
        overlap_ratio(
            &words("t", 5),
            &over
                .samples_by_name("b")
                .iter()
                .map(|s| s.trigger())
                .collect::<Vec<_>>()
        )
        .unwrap()
            == 0.6,
        "ratio is not 0.6"
    );
    let (after, audit) = prune(&over, 0.5).unwrap();
    ensure!(names(&after) == ["a"], "ratio 0.6 kept {:?}", names(&after));
    ensure!(audit.len() == 1 && audit[0].event_b == "b", "audit {audit:?}");

    let mut b = words("t", 2);
    b.extend(words("x", 2));
    let edge = with_triggers(tree(), &[("a", words("t", 4)), ("b", b)]);
    let (after, audit) = prune(&edge, 0.5).unwrap();
    ensure!(
        names(&after) == ["a", "b"] && audit.is_empty(),
        "ratio 0.5 removed {audit:?}"
    );

    const VOCAB: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = 500;
    for case in 0..cases {
        let n = rng.gen_range(1..=20);
        let records: Vec<NodeRecord> = (0..n)
            .map(|i| {
                let parent = (i > 0 && rng.gen_bool(0.85)).then(|| format!("e{}", rng.gen_range(0..i)));
                rec(&format!("e{i}"), parent.as_deref())
            })
            .collect();
        let lists: Vec<(String, Vec<String>)> = (0..n)
            .map(|i| {
                (
                    format!("e{i}"),
                    (0..rng.gen_range(1..6))
                        .map(|_| format!("w{}", rng.gen_range(0..VOCAB)))
                        .collect(),
                )
            })
            .collect();
        let refs: Vec<(&str, Vec<String>)> = lists.iter().map(|(e, l)| (e.as_str(), l.clone())).collect();
        let d = with_triggers(records, &refs);
        let (after, _) = prune(&d, 0.5).unwrap();
        for t in after.ontology().trees() {
            let members: Vec<&str> = t.nodes().map(|n| n.name()).collect();
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    let ta: Vec<&str> = after.samples_by_name(a).iter().map(|s| s.trigger()).collect();
                    let tb: Vec<&str> = after.samples_by_name(b).iter().map(|s| s.trigger()).collect();
                    let r = overlap_ratio(&ta, &tb).unwrap();
                    ensure!(r <= 0.5, "case {case}: {a} and {b} survive at {r}");
                }
            }
        }
    }
    Ok(format!(
        "0.6 removed, 0.5 kept, {cases} random trees of <=20 events re-checked"
    ))
}

fn scorer_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut discrepancies = 0;
    for _ in 0..1000 {
        let (gold, pred) = oracle::random_case(&mut rng, false);
        let r = match_and_score(&gold, &pred).map_err(|e| e.to_string())?;
        let got = |s: &dived_core::Scores| oracle::Counts {
            tp: s.tp,
            fp: s.fp,
            fn_: s.fn_,
        };
        if (got(&r.id_scores), got(&r.cls_scores)) != oracle::brute_force(&gold, &pred) {
            discrepancies += 1;
        }
    }
    ensure!(discrepancies == 0, "{discrepancies} discrepancies");
    Ok("1000 cases, 0 discrepancies".into())
}

fn worked_arithmetic() -> Result<String, String> {
    let gold = [GoldRecord::new("s", "T", &["a", "b", "c"])];
    let pred = [PredictionRecord::new("s", "T", &["a", "x"])];
    let s = match_and_score(&gold, &pred).unwrap().id_scores;
    ensure!((s.precision - 0.5).abs() <= TOL, "P = {}", s.precision);
    ensure!((s.recall - 1.0 / 3.0).abs() <= TOL, "R = {}", s.recall);
    ensure!((s.f1 - 0.4).abs() <= TOL, "F1 = {}", s.f1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..1000 {
        let (gold, pred) = oracle::random_case(&mut rng, case % 2 == 1);
        let r = match_and_score(&gold, &pred).unwrap();
        ensure!(
            r.cls_scores.f1 <= r.id_scores.f1,
            "case {case}: cls {} > id {}",
            r.cls_scores.f1,
            r.id_scores.f1
        );
    }
    Ok(format!(
        "P={} R={:.12} F1={:.12}, cls<=id on 1000 cases",
        s.precision, s.recall, s.f1
    ))
}

/// Eight trees, each a sample-less root with five children carrying ten
/// samples and ten definitions.
fn sweep_fixture() -> Dataset {
    let mut records = Vec::new();
    for t in 0..8 {
        let root = format!("root{t}");
        records.push(rec(&root, None));
        for c in 0..5 {
            records.push(rec(&format!("ev{t}x{c}"), Some(&root)));
        }
    }
    let mut o = Ontology::from_records(records).unwrap();
    let ids: Vec<_> = o
        .iter()
        .filter(|(_, n)| n.parent().is_some())
        .map(|(id, _)| id)
        .collect();
    let mut samples = Vec::new();
    for id in ids {
        let name = o.node(id).name().to_string();
        o.node_mut(id).definitions = (0..10).map(|d| format!("{name} definition {d}")).collect();
        for s in 0..10 {
            let trigger = format!("{name}t{s}");
            samples.push(
                GeneratedSample::new(
                    name.as_str(),
                    format!("Reports of {trigger} came in."),
                    trigger,
                    SampleOrigin::Generated,
                )
                .unwrap(),
            );
        }
    }
    let mut d = Dataset::new(o);
    d.set_samples(samples).unwrap();
    d
}

fn assembly_counts() -> Result<String, String> {
    let d = sweep_fixture();
    let o = d.ontology();
    let mut owner = BTreeMap::new();
    for (id, n) in o.iter() {
        for s in d.samples(id) {
            owner.insert(s.sentence().to_string(), n.name().to_string());
        }
    }
    let mut points = 0;
    for e in [2, 4, 8, 16, 32] {
        for def in [1, 2, 4, 8, 10] {
            for s in [1, 5, 10] {
                for h in [0, 3] {
                    let n = 10;
                    let spec = SliceSpec {
                        n_events: e,
                        n_definitions: def,
                        n_samples: s,
                        n_negatives: n,
                        n_hard_negatives: h,
                        seed: points,
                        ..SliceSpec::default()
                    };
                    let a = assemble(&d, &spec).map_err(|err| format!("{spec:?}: {err}"))?;
                    let at = format!("E={e} D={def} S={s} H={h}");
                    ensure!(
                        a.count(InstanceKind::Positive) == e * s,
                        "{at}: positives {}",
                        a.count(InstanceKind::Positive)
                    );
                    let negatives = a.count(InstanceKind::Negative) + a.count(InstanceKind::HardNegative);
                    ensure!(negatives == e * s * n, "{at}: negatives {negatives}");
                    ensure!(
                        a.count(InstanceKind::HardNegative) == e * s * h,
                        "{at}: hard {}",
                        a.count(InstanceKind::HardNegative)
                    );
                    for i in a
                        .instances
                        .iter()
                        .filter(|i| i.kind == InstanceKind::HardNegative)
                    {
                        let gold = o.get(&owner[&i.sentence]).unwrap();
                        let neg = o.get(&i.event_name).unwrap();
                        ensure!(
                            o.sibling_ids(gold).contains(&neg),
                            "{at}: {} is not a sibling of {}",
                            i.event_name,
                            owner[&i.sentence]
                        );
                    }
                    points += 1;
                }
            }
        }
    }
    Ok(format!(
        "{points} sweep points exact, hard negatives all siblings"
    ))
}

const SLICE: &[&str] = &[
    "--events",
    "12",
    "--definitions",
    "10",
    "--samples",
    "10",
    "--negatives",
    "10",
    "--hard-negatives",
    "3",
];

fn bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn determinism() -> Result<String, String> {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let runs = [
        pipeline(dirs[0].path(), 7, 1, SLICE),
        pipeline(dirs[1].path(), 7, 1, SLICE),
        pipeline(dirs[2].path(), 7, 8, SLICE),
    ];
    for (label, other) in [("second run", &runs[1]), ("max_in_flight 8", &runs[2])] {
        for (a, b) in runs[0].outputs().iter().zip(other.outputs()) {
            ensure!(
                bytes(a) == bytes(b),
                "{label}: {} differs",
                a.file_name().unwrap().to_string_lossy()
            );
        }
    }
    Ok("6 outputs identical across reruns and max_in_flight 1 vs 8".into())
}

fn ablation() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), 11, 4, SLICE);
    let ablated = dir.path().join("ablated.jsonl");
    let mut args: Vec<String> = ["--seed", "11", "assemble", "--input"].map(String::from).to_vec();
    args.push(p.pruned.display().to_string());
    args.extend([
        "--output".to_string(),
        ablated.display().to_string(),
        "--no-definition".to_string(),
    ]);
    args.extend(SLICE.iter().map(|s| s.to_string()));
    ok(&args);
    let base = io::read_instances(&p.instances).map_err(|e| e.to_string())?;
    let abl = io::read_instances(&ablated).map_err(|e| e.to_string())?;
    ensure!(
        base.len() == abl.len(),
        "{} vs {} instances",
        base.len(),
        abl.len()
    );
    for (b, a) in base.iter().zip(&abl) {
        ensure!(
            !b.definition.is_empty() && a.definition.is_empty(),
            "{}: definitions {:?} / {:?}",
            b.instance_id,
            b.definition,
            a.definition
        );
        let mut restored = a.clone();
        restored.definition = b.definition.clone();
        ensure!(&restored == b, "{} differs beyond the definition", b.instance_id);
    }
    let d = drop_rate_f1(0.50, 0.40, 0.50, 0.40);
    ensure!(
        d.id_drop_pct == 20.0 && d.cls_drop_pct == 20.0,
        "drop rate {}",
        d.id_drop_pct
    );
    Ok(format!(
        "{} instances differ only in definition, drop_rate(0.50, 0.40) = {:?}",
        base.len(),
        d.id_drop_pct
    ))
}

fn end_to_end() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), 5, 4, SLICE);
    let load = |path: &Path| io::load_dataset(path).map_err(|e| e.to_string());
    let defs = load(&p.defs)?;
    ensure!(
        defs.ontology().len() == 12 && defs.ontology().roots().len() == 3,
        "ontology has {} nodes",
        defs.ontology().len()
    );
    ensure!(
        defs.ontology()
            .iter()
            .all(|(_, n)| n.definitions.len() == 1 && !n.definitions[0].is_empty()),
        "missing definitions"
    );
    let samples = load(&p.samples)?;
    for (id, n) in samples.ontology().iter() {
        let got = samples.samples(id);
        ensure!(got.len() == 10, "{} has {} samples", n.name(), got.len());
        ensure!(
            got.iter().all(|s| s.sentence().contains(s.trigger())),
            "{} has a trigger outside its sentence",
            n.name()
        );
    }
    let expanded = load(&p.expanded)?;
    let fewest = expanded
        .ontology()
        .iter()
        .map(|(_, n)| n.definitions.len() - 1)
        .min()
        .unwrap();
    ensure!(fewest >= 10, "only {fewest} paraphrases survive for some node");
    ensure!(p.audit.is_file(), "no prune audit");
    let pruned = load(&p.pruned)?;
    let audit = lines(&p.audit).len();
    ensure!(
        pruned.ontology().len() + audit == 12,
        "pruned {} + audit {audit} != 12",
        pruned.ontology().len()
    );
    let instances = io::read_instances(&p.instances).map_err(|e| e.to_string())?;
    let want = 12 * 10 * (1 + 10);
    ensure!(
        instances.len() == want,
        "{} instances, want {want}",
        instances.len()
    );
    let positives = instances
        .iter()
        .filter(|i| i.kind == InstanceKind::Positive)
        .count();
    ensure!(positives == 120, "{positives} positives");
    Ok(format!("12 definitions, 10 samples each, >={fewest} paraphrases, audit with {audit} rows, {want} instances (12*10*(1+10))"))
}

fn round_trips() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    io::write_ontology(&a, &io::load_ontology(&fixture("ontology_toy.jsonl")).unwrap()).unwrap();
    io::write_ontology(&b, &io::load_ontology(&a).unwrap()).unwrap();
    ensure!(bytes(&a) == bytes(&b), "ontology rewrite differs");

    let run = tempfile::tempdir().unwrap();
    let p = pipeline(run.path(), 3, 2, SLICE);
    let c = dir.path().join("c.jsonl");
    io::write_instances(&c, &io::read_instances(&p.instances).unwrap()).unwrap();
    ensure!(bytes(&c) == bytes(&p.instances), "instance rewrite differs");

    let mut rejected = Vec::new();
    match io::load_ontology(&fixture("corrupt/ontology_duplicate.jsonl")) {
        Err(e) if e.to_string().contains("line 4") => rejected.push("ontology:4"),
        other => return Err(format!("duplicate ontology: {other:?}")),
    }
    match io::read_instances(&fixture("corrupt/instances_negative_with_trigger.jsonl")) {
        Err(FormatError::Parse { line: 2, .. }) => rejected.push("instances:2"),
        other => return Err(format!("negative with trigger: {other:?}")),
    }
    match io::load_dataset(&fixture("corrupt/dataset_trigger_absent.jsonl")) {
        Err(e) if e.to_string().contains("line 2") => rejected.push("dataset:2"),
        other => return Err(format!("trigger absent: {:?}", other.map(|d| d.ontology().len()))),
    }
    Ok(format!(
        "ontology and instances byte-identical, rejected {}",
        rejected.join(" ")
    ))
}

fn main() {
    let checks: [(u32, &str, Check, u64); 8] = [
        (1, "pruning boundary", pruning_boundary, 1),
        (2, "scorer oracle equivalence", scorer_oracle, 10),
        (3, "worked arithmetic", worked_arithmetic, 10),
        (4, "assembly counts", assembly_counts, 30),
        (5, "determinism", determinism, 60),
        (6, "ablation", ablation, 60),
        (7, "end-to-end mock pipeline", end_to_end, 60),
        (8, "round-trips", round_trips, 60),
    ];
    let mut failed = 0;
    for (n, name, check, limit) in checks {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > Duration::from_secs(limit) => Err(format!("took {elapsed:.2?}")),
            r => r,
        };
        match result {
            Ok(detail) => println!("criterion {n} {name}: PASS ({detail}; {elapsed:.2?}, limit {limit}s)"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL ({why}; {elapsed:.2?}, limit {limit}s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
