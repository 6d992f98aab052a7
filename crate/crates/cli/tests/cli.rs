use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hospnet::syngen::GroundTruth;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_hospnet");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "hospnet {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generated(dir: &Path, extra: &[&str]) -> GroundTruth {
    let mut args = vec!["generate", "--seed", "7", "--patients", "1000", "--out", s(dir)];
    args.extend_from_slice(extra);
    ok(&args);
    serde_json::from_slice(&fs::read(dir.join("truth.json")).unwrap()).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn ingest_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let truth = generated(&gen, &["--no-diagnosis-rows", "4", "--malformed-rows", "6"]);
    let report = dir.path().join("out/report.json");
    ok(&["ingest", "--input", s(&gen.join("cohort.csv")), "--report", s(&report)]);
    let r = json(&report);
    assert_eq!(r["accepted"], truth.records);
    assert_eq!(r["dropped_no_diagnosis"], 4);
    assert_eq!(r["dropped_malformed"], 6);
    assert_eq!(r["total_rows"], truth.records + 10);
}

#[test]
fn region_filter_restricts_records() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    generated(&gen, &["--regions", "03,09"]);
    let report = dir.path().join("r.json");
    ok(&[
        "ingest", "--input", s(&gen.join("cohort.csv")), "--region", "03", "--report", s(&report),
    ]);
    let r = json(&report);
    let in_03 = r["per_region_counts"]["03"].as_u64().unwrap();
    assert!(in_03 > 0 && r["per_region_counts"]["09"].as_u64().unwrap() > 0);
    assert_eq!(r["filters"]["selected_records"], in_03);
}

#[test]
fn usage_errors_exit_2() {
    let out = run(&["ingest", "--input", "/nonexistent/stays.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/stays.csv"));

    let out = run(&["analyze", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = run(&["network", "--input", "x.csv", "--kind", "sideways"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["analyze", "--input", "x.csv", "--period", "2012-01-01:2011-01-01"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_generation_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["generate", "--patients", "10", "--plant-all-classes", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("cohort.csv").exists());
}

#[test]
fn headerless_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    fs::write(&input, "").unwrap();
    let out = run(&["analyze", "--input", s(&input), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_matches_planted_classes() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let truth = generated(&gen, &["--plant-all-classes"]);
    let out = dir.path().join("an");
    ok(&["analyze", "--input", s(&gen.join("cohort.csv")), "--out", s(&out)]);
    let table = json(&out.join("overlap_table.json"));
    let total: u64 = truth.planted_classes.values().sum();
    assert_eq!(table["total"], total);
    for (class, n) in &truth.planted_classes {
        let row = table["classes"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["class"] == class.to_string())
            .unwrap_or_else(|| panic!("{class} missing"));
        assert_eq!(row["count"], *n, "{class}");
    }
    let manifest = json(&out.join("manifest.json"));
    let files: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["file"].as_str().unwrap())
        .collect();
    for f in &files {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(files.contains(&"society_durations.csv"));
    assert!(files.contains(&"occupancy_6.csv"));
}

#[test]
fn analyze_period_and_empty_selection() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    generated(&gen, &[]);
    let input = gen.join("cohort.csv");
    let year = dir.path().join("y2010");
    ok(&["analyze", "--input", s(&input), "--period", "2010-01-01:2010-12-31", "--out", s(&year)]);
    let selected = json(&year.join("manifest.json"))["filters"]["selected_records"]
        .as_u64()
        .unwrap();
    let rows = fs::read_to_string(&input).unwrap();
    let expect = rows.lines().skip(1).filter(|l| l.split(',').nth(4).unwrap().starts_with("2010")).count();
    assert_eq!(selected as usize, expect);

    let none = dir.path().join("none");
    let out = ok(&["analyze", "--input", s(&input), "--period", "1990-01-01:1990-12-31", "--out", s(&none)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(
        fs::read_to_string(none.join("overlap_table.csv")).unwrap(),
        "class,count,percent\ntotal,0,—\n"
    );
}

#[test]
fn network_kind_filter_and_dot() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let truth = generated(&gen, &["--plant-all-classes"]);
    let out = dir.path().join("net");
    ok(&[
        "network", "--input", s(&gen.join("cohort.csv")), "--kind", "direct", "--format", "both",
        "--out", s(&out),
    ]);
    let csv = fs::read_to_string(out.join("edges.csv")).unwrap();
    let mut total = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[2], "direct");
        total += f[3].parse::<u64>().unwrap();
    }
    assert_eq!(total, truth.direct_transfers);

    let dot = fs::read_to_string(out.join("network.dot")).unwrap();
    assert_dot_grammar(&dot);
    assert!(!dot.contains("indirect"));
}

/// Line-level check against the subset of the DOT grammar the exporter
/// uses: a `digraph ID {` header, quoted node statements, quoted edge
/// statements with an attribute list, and a closing brace.
fn assert_dot_grammar(dot: &str) {
    let lines: Vec<&str> = dot.lines().collect();
    assert_eq!(lines.first(), Some(&"digraph transfers {"));
    assert_eq!(lines.last(), Some(&"}"));
    let quoted = |t: &str| t.len() >= 2 && t.starts_with('"') && t.ends_with('"') && !t[1..t.len() - 1].contains('"');
    for l in &lines[1..lines.len() - 1] {
        let stmt = l.trim().strip_suffix(';').expect("statement ends with ;");
        match stmt.split_once(" -> ") {
            None => assert!(quoted(stmt), "node {stmt}"),
            Some((from, rest)) => {
                assert!(quoted(from), "edge source {from}");
                let (to, attrs) = rest.split_once(" [").expect("attribute list");
                assert!(quoted(to), "edge target {to}");
                let attrs = attrs.strip_suffix(']').expect("closing ]");
                for a in attrs.split(", ") {
                    let (k, v) = a.split_once('=').expect("key=value");
                    assert!(k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'), "{k}");
                    assert!(quoted(v) || v.chars().all(|c| c.is_ascii_alphanumeric()), "{v}");
                }
            }
        }
    }
}

#[test]
fn network_max_gap_and_readmissions() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let truth = generated(&gen, &["--facilities", "5"]);
    let input = gen.join("cohort.csv");
    let sum = |out: &Path| -> u64 {
        fs::read_to_string(out.join("edges.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum()
    };
    let all = dir.path().join("all");
    ok(&["network", "--input", s(&input), "--kind", "indirect", "--out", s(&all)]);
    assert_eq!(sum(&all), truth.indirect_transfers);

    let capped = dir.path().join("capped");
    ok(&["network", "--input", s(&input), "--kind", "indirect", "--max-gap", "30", "--out", s(&capped)]);
    let within: u64 = truth.society_gaps.range(..=30).map(|(_, n)| n).sum();
    assert_eq!(sum(&capped), within);

    let noreadm = dir.path().join("noreadm");
    ok(&["network", "--input", s(&input), "--kind", "indirect", "--exclude-readmissions", "--out", s(&noreadm)]);
    let self_loops: u64 = truth
        .transfer_matrix
        .iter()
        .filter(|m| m.from == m.to && m.kind == hospnet::TransferKind::Indirect)
        .map(|m| m.count)
        .sum();
    assert!(self_loops > 0);
    assert_eq!(sum(&noreadm), truth.indirect_transfers - self_loops);
}

#[test]
fn generate_is_reproducible_and_plants_all_classes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["generate", "--seed", "7", "--patients", "1000", "--out", s(&a)]);
    ok(&["generate", "--seed", "7", "--patients", "1000", "--out", s(&b)]);
    assert_eq!(fs::read(a.join("cohort.csv")).unwrap(), fs::read(b.join("cohort.csv")).unwrap());
    assert_eq!(fs::read(a.join("truth.json")).unwrap(), fs::read(b.join("truth.json")).unwrap());

    let truth = generated(&dir.path().join("c"), &["--plant-all-classes"]);
    assert_eq!(truth.planted_classes.len(), 10);
    assert!(truth.planted_classes.values().all(|&n| n == 20));
}

#[test]
fn custom_schema_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("stays.csv");
    fs::write(
        &input,
        "pid;when_in;when_out;clinic;land;dx\n\
         a;30.06.2015;02.07.2015;F1;03;I21.0\n\
         a;02.07.2015;07.07.2015;F0;03;I21.0\n\
         b;01.01.2014;05.01.2014;F2;04;O80\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&[
        "analyze", "--input", s(&input), "--out", s(&out), "--delimiter", ";",
        "--date-format", "%d.%m.%Y",
        "--column", "patient_id=pid", "--column", "admission_date=1", "--column", "discharge_date=2",
        "--column", "facility_id=clinic", "--column", "region_code=land", "--column", "icd10_code=dx",
    ]);
    let table = fs::read_to_string(out.join("overlap_table.csv")).unwrap();
    assert!(table.contains("StandardTransfer,1,100.0"), "{table}");
    assert_eq!(json(&out.join("ingest_report.json"))["accepted"], 3);
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let truth = generated(&gen, &["--plant-all-classes"]);
    let cfg = dir.path().join("hospnet.toml");
    fs::write(
        &cfg,
        format!(
            "input = {:?}\nthreads = 2\n[network]\nkind = \"direct\"\nformat = \"dot\"\nout = {:?}\n",
            s(&gen.join("cohort.csv")),
            s(&dir.path().join("from_config")),
        ),
    )
    .unwrap();
    ok(&["network", "--config", s(&cfg)]);
    let dot = fs::read_to_string(dir.path().join("from_config/network.dot")).unwrap();
    assert!(!dot.contains("indirect"));
    assert!(truth.direct_transfers > 0 && dot.contains("kind=\"direct\""));

    // Command-line flags win over the file.
    let flagged = dir.path().join("flagged");
    ok(&["network", "--config", s(&cfg), "--format", "csv", "--out", s(&flagged)]);
    assert!(flagged.join("edges.csv").exists() && !flagged.join("network.dot").exists());

    fs::write(&cfg, "colour = \"blue\"\n").unwrap();
    assert_eq!(run(&["network", "--config", s(&cfg)]).status.code(), Some(2));
}
