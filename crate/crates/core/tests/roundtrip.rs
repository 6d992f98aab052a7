use std::collections::{BTreeMap, BTreeSet};

use hospnet::pipeline::{analyze_patients, record_stats, PipelineConfig};
use hospnet::syngen::{generate, GenConfig, PlantCounts};
use hospnet::{parse_records, OverlapClass, PatientIndex, SchemaConfig, TransferKind};

fn planted(seed: u64) -> GenConfig {
    GenConfig {
        seed,
        patients: 2_000,
        facilities: 40,
        plant: PlantCounts::uniform(25),
        no_diagnosis_rows: 17,
        malformed_rows: 9,
        ..GenConfig::default()
    }
}

fn run(cfg: &GenConfig) -> (hospnet::syngen::GroundTruth, hospnet::pipeline::PatientAnalysis, PatientIndex) {
    let (bytes, truth) = generate(cfg).unwrap();
    let (rs, report) = parse_records(&bytes[..], &SchemaConfig::default()).unwrap();
    assert_eq!(report.accepted, truth.records);
    assert_eq!(report.dropped_no_diagnosis, truth.dropped_no_diagnosis);
    assert_eq!(report.dropped_malformed, truth.dropped_malformed);
    let index = PatientIndex::from_record_set(rs);
    let pcfg = PipelineConfig {
        keep_details: true,
        ..PipelineConfig::default()
    };
    let out = analyze_patients(&index, &pcfg);
    (truth, out, index)
}

#[test]
fn planted_groups_are_recovered_exactly() {
    let (truth, out, _) = run(&planted(11));
    let expected: BTreeSet<(String, Vec<u32>, OverlapClass)> = truth
        .groups
        .iter()
        .map(|g| {
            let mut rows = g.rows.clone();
            rows.sort_unstable();
            (g.patient_id.clone(), rows, g.class)
        })
        .collect();
    let found: BTreeSet<(String, Vec<u32>, OverlapClass)> = out
        .groups
        .iter()
        .map(|cg| {
            let mut rows: Vec<u32> = cg.group.members().iter().map(|r| r.row()).collect();
            rows.sort_unstable();
            (cg.group.patient_id().to_owned(), rows, cg.class)
        })
        .collect();
    assert_eq!(expected.len(), 250);
    assert_eq!(found, expected);

    let table = out.tabulation.table();
    for (class, n) in &truth.planted_classes {
        assert_eq!(table.count(*class), *n, "{class}");
    }
    assert_eq!(truth.planted_classes.len(), 10);
}

#[test]
fn transfers_match_ground_truth() {
    let (truth, out, _) = run(&planted(12));
    let as_tuple = |e: &hospnet::TransferEvent| {
        (
            e.patient_id.to_string(),
            e.from_facility.to_string(),
            e.to_facility.to_string(),
            e.kind,
            e.day,
            e.gap_days,
        )
    };
    let mut found: Vec<_> = out.direct.iter().chain(&out.indirect).map(as_tuple).collect();
    found.sort();
    let expected: Vec<_> = truth
        .transfers
        .iter()
        .map(|e| (e.patient_id.clone(), e.from.clone(), e.to.clone(), e.kind, e.day, e.gap_days))
        .collect();
    assert_eq!(found, expected);
    assert!(truth.direct_transfers >= 100 && truth.indirect_transfers >= 100);

    let matrix: BTreeMap<(String, String, TransferKind), u64> = out
        .network
        .edge_counts()
        .into_iter()
        .map(|(k, n)| ((k.from.to_string(), k.to.to_string(), k.kind), n))
        .collect();
    let planted: BTreeMap<(String, String, TransferKind), u64> = truth
        .transfer_matrix
        .iter()
        .map(|m| ((m.from.clone(), m.to.clone(), m.kind), m.count))
        .collect();
    assert_eq!(matrix, planted);
}

#[test]
fn histograms_match_ground_truth() {
    let (truth, out, index) = run(&planted(13));
    let society: BTreeMap<u32, u64> = out.society.iter().map(|(k, v)| (*k, v)).collect();
    assert_eq!(society, truth.society_gaps);

    let stats = record_stats(index.records(), 6);
    let durations: BTreeMap<u32, u64> = stats.stay_durations.iter().map(|(k, v)| (*k, v)).collect();
    assert_eq!(durations, truth.stay_durations);
    assert_eq!(stats.admissions.per_facility, truth.facility_admissions);
    assert_eq!(stats.patients.per_facility, truth.facility_patients);

    let mut per_patient: BTreeMap<u64, u64> = BTreeMap::new();
    for (_, stays) in index.iter() {
        *per_patient.entry(stays.len() as u64).or_insert(0) += 1;
    }
    assert_eq!(per_patient, truth.records_per_patient);
}

#[test]
fn thread_count_does_not_change_results() {
    let (bytes, _) = generate(&planted(14)).unwrap();
    let (rs, _) = parse_records(&bytes[..], &SchemaConfig::default()).unwrap();
    let index = PatientIndex::from_record_set(rs);
    let cfg = PipelineConfig {
        keep_details: true,
        ..PipelineConfig::default()
    };
    let with = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| analyze_patients(&index, &cfg))
    };
    let one = with(1);
    let four = with(4);
    assert_eq!(one.direct, four.direct);
    assert_eq!(one.indirect, four.indirect);
    assert_eq!(one.tabulation.table().to_csv(), four.tabulation.table().to_csv());
    assert_eq!(one.network.edge_counts(), four.network.edge_counts());
}
