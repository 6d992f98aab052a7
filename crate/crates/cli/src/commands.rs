use std::fs;
use std::path::{Path, PathBuf};

use hospnet::ingest::{parse_records_from_path, ColumnRef};
use hospnet::network::{
    export_network, gap_histograms_csv, DirectOptions, ExportFormat, IndirectOptions,
};
use hospnet::pipeline::{analyze_patients, record_stats, PipelineConfig};
use hospnet::stats::{histogram_csv, Period};
use hospnet::syngen::{generate_to, GenConfig, GenError, PlantCounts};
use hospnet::{
    filter_region, DayIndex, DiagnosisMatch, IngestError, IngestReport, PatientIndex, RecordSet,
    RegionCode, SchemaConfig, TransferKind,
};
use serde::Serialize;
use serde_json::json;

use crate::config::resolve;
use crate::{AnalyzeArgs, Fail, GenerateArgs, IngestArgs, InputArgs, NetworkArgs};

const DEFAULT_TOP: usize = 6;
const DEFAULT_PLANT_EACH: u32 = 20;

fn set_threads(n: Option<usize>) -> Result<(), Fail> {
    if let Some(n) = n {
        if n == 0 {
            return Err(Fail::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Fail::usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn schema(args: &InputArgs) -> Result<SchemaConfig, Fail> {
    let mut schema = SchemaConfig::default();
    if let Some(d) = args.delimiter {
        schema.delimiter = d;
    }
    if let Some(f) = &args.date_format {
        schema.date_format = f.clone();
    }
    for spec in &args.column {
        let (field, column) = spec
            .split_once('=')
            .ok_or_else(|| Fail::usage(format!("--column expects FIELD=COLUMN, got `{spec}`")))?;
        let column = match column.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(column.to_owned()),
        };
        if !schema.columns.set(field, column) {
            return Err(Fail::usage(format!("--column: unknown field `{field}`")));
        }
    }
    Ok(schema)
}

fn period(text: &str) -> Result<Period, Fail> {
    let (from, to) = text
        .split_once(':')
        .ok_or_else(|| Fail::usage(format!("--period expects FROM:TO, got `{text}`")))?;
    let from: DayIndex = from.parse().map_err(Fail::usage)?;
    let to: DayIndex = to.parse().map_err(Fail::usage)?;
    if from > to {
        return Err(Fail::usage(format!("--period: {from} is after {to}")));
    }
    Ok((from, to))
}

struct Loaded {
    records: RecordSet,
    report: IngestReport,
    input: PathBuf,
}

fn load(args: &InputArgs) -> Result<Loaded, Fail> {
    let input = args
        .input
        .clone()
        .ok_or_else(|| Fail::usage("--input is required"))?;
    let schema = schema(args)?;
    let region = args
        .region
        .as_deref()
        .map(|r| r.parse::<RegionCode>().map_err(Fail::usage))
        .transpose()?;
    let period = args.period.as_deref().map(period).transpose()?;

    let (mut records, report) = parse_records_from_path(&input, &schema).map_err(|e| match e {
        IngestError::Unreadable { .. }
        | IngestError::UnknownColumn(_)
        | IngestError::InvalidSchema(_) => Fail::usage(e.to_string()),
        IngestError::MissingHeader | IngestError::Csv(_) => Fail::data(e.to_string()),
    })?;
    if let Some(region) = region {
        records = filter_region(&records, region);
    }
    if let Some((from, to)) = period {
        records = records.filter_period(from, to);
    }
    if records.is_empty() {
        eprintln!("hospnet: warning: no records left after filtering");
    }
    Ok(Loaded {
        records,
        report,
        input,
    })
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf, Fail> {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| Fail::usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Collects written files for the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<serde_json::Value>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            files: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, what: &str, bytes: impl AsRef<[u8]>) -> Result<(), Fail> {
        let bytes = bytes.as_ref();
        write_file(&self.dir.join(name), bytes)?;
        self.files
            .push(json!({ "file": name, "contents": what, "bytes": bytes.len() }));
        Ok(())
    }

    fn manifest(self, header: serde_json::Value) -> Result<(), Fail> {
        let mut m = header;
        m["outputs"] = serde_json::Value::Array(self.files);
        write_file(&self.dir.join("manifest.json"), &pretty(&m))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Fail> {
    fs::write(path, bytes).map_err(|e| Fail::usage(format!("cannot write {}: {e}", path.display())))
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serialisable");
    s.push(b'\n');
    s
}

fn filters_json(args: &InputArgs, loaded: &Loaded) -> serde_json::Value {
    json!({
        "input": loaded.input.display().to_string(),
        "region": args.region,
        "period": args.period,
        "selected_records": loaded.records.len(),
    })
}

pub fn ingest(flags: &IngestArgs) -> Result<(), Fail> {
    let args = resolve(flags, flags.input.config.as_deref(), "ingest")?;
    set_threads(args.input.threads)?;
    let loaded = load(&args.input)?;
    let report_path = match &args.report {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| {
                    Fail::usage(format!("cannot create {}: {e}", parent.display()))
                })?;
            }
            p.clone()
        }
        None => out_dir(&args.input.out)?.join("ingest_report.json"),
    };
    let mut body = serde_json::to_value(&loaded.report).expect("serialisable");
    body["filters"] = filters_json(&args.input, &loaded);
    let bytes = pretty(&body);
    write_file(&report_path, &bytes)?;
    if args.stdout {
        print!("{}", String::from_utf8_lossy(&bytes));
    }
    Ok(())
}

pub fn analyze(flags: &AnalyzeArgs) -> Result<(), Fail> {
    let args = resolve(flags, flags.input.config.as_deref(), "analyze")?;
    set_threads(args.input.threads)?;
    let diagnosis_match = match args.diagnosis_match.as_deref() {
        None | Some("exact") => DiagnosisMatch::Exact,
        Some("group") => DiagnosisMatch::Group,
        Some(other) => {
            return Err(Fail::usage(format!(
                "--diagnosis-match must be exact or group, got `{other}`"
            )))
        }
    };
    let dir = out_dir(&args.input.out)?;
    let loaded = load(&args.input)?;
    let header = json!({ "command": "analyze", "filters": filters_json(&args.input, &loaded) });
    let report = loaded.report.clone();

    let index = PatientIndex::from_record_set(loaded.records);
    let cfg = PipelineConfig {
        diagnosis_match,
        ..PipelineConfig::default()
    };
    let analysis = analyze_patients(&index, &cfg);
    let stats = record_stats(index.records(), args.top.unwrap_or(DEFAULT_TOP));
    let table = analysis.tabulation.table();

    let mut out = Outputs::new(dir);
    out.write("ingest_report.json", "row accounting", pretty(&report))?;
    out.write("overlap_table.csv", "overlap class counts", table.to_csv())?;
    out.write("overlap_table.json", "overlap class counts", pretty(&table.to_json()))?;
    out.write("pair_codes.csv", "pair code counts", analysis.tabulation.codes_csv())?;
    out.write(
        "pair_code_diagnoses.csv",
        "diagnosis group pairs per pair code",
        analysis.tabulation.code_diagnoses_csv(),
    )?;
    out.write(
        "overlap_lengths.csv",
        "overlap length histogram",
        analysis.tabulation.overlap_lengths.to_csv(),
    )?;
    out.write("admissions_per_facility.csv", "admissions per facility", stats.admissions.to_csv())?;
    out.write(
        "admissions_decades.csv",
        "facilities per admission-count decade",
        stats.admissions.decades.to_csv(),
    )?;
    out.write("patients_per_facility.csv", "distinct patients per facility", stats.patients.to_csv())?;
    out.write(
        "patients_decades.csv",
        "facilities per patient-count decade",
        stats.patients.decades.to_csv(),
    )?;
    out.write("entries_per_patient.csv", "records per patient by gender", stats.entries.to_csv())?;
    out.write("stay_durations.csv", "stay length histogram (days)", histogram_csv(&stats.stay_durations))?;
    out.write(
        "society_durations.csv",
        "days at home between episodes",
        histogram_csv(&analysis.society),
    )?;
    for (rank, series) in stats.occupancy.iter().enumerate() {
        out.write(
            &format!("occupancy_{}.csv", rank + 1),
            &format!("daily occupancy of {}", series.facility_id),
            series.to_csv(),
        )?;
    }
    out.manifest(header)
}

pub fn network(flags: &NetworkArgs) -> Result<(), Fail> {
    let args = resolve(flags, flags.input.config.as_deref(), "network")?;
    set_threads(args.input.threads)?;
    let kind = match args.kind.as_deref() {
        None | Some("both") => None,
        Some("direct") => Some(TransferKind::Direct),
        Some("indirect") => Some(TransferKind::Indirect),
        Some(other) => {
            return Err(Fail::usage(format!(
                "--kind must be direct, indirect or both, got `{other}`"
            )))
        }
    };
    let formats = match args.format.as_deref() {
        None | Some("csv") => vec![ExportFormat::Csv],
        Some("dot") => vec![ExportFormat::Dot],
        Some("both") => vec![ExportFormat::Csv, ExportFormat::Dot],
        Some(other) => {
            return Err(Fail::usage(format!("--format must be csv, dot or both, got `{other}`")))
        }
    };
    let dir = out_dir(&args.input.out)?;
    let loaded = load(&args.input)?;
    let header = json!({
        "command": "network",
        "filters": filters_json(&args.input, &loaded),
        "kind": args.kind.as_deref().unwrap_or("both"),
        "max_gap": args.max_gap,
        "temporary_round_trip": !args.no_round_trip,
        "include_readmissions": !args.exclude_readmissions,
    });

    let index = PatientIndex::from_record_set(loaded.records);
    let cfg = PipelineConfig {
        direct: DirectOptions {
            temporary_round_trip: !args.no_round_trip,
        },
        indirect: IndirectOptions {
            max_gap: args.max_gap,
            include_readmissions: !args.exclude_readmissions,
        },
        ..PipelineConfig::default()
    };
    let analysis = analyze_patients(&index, &cfg);
    let net = match kind {
        Some(k) => analysis.network.only(k),
        None => analysis.network,
    };

    let mut out = Outputs::new(dir);
    for format in formats {
        let bytes = export_network(&net, format);
        match format {
            ExportFormat::Csv => {
                if args.stdout {
                    print!("{}", String::from_utf8_lossy(&bytes));
                }
                out.write("edges.csv", "edge list from,to,kind,count", bytes)?;
            }
            ExportFormat::Dot => out.write("network.dot", "Graphviz digraph", bytes)?,
        }
    }
    if kind != Some(TransferKind::Direct) {
        out.write(
            "indirect_gaps.csv",
            "days at home per indirect edge",
            gap_histograms_csv(&net),
        )?;
    }
    out.manifest(header)
}

pub fn generate(flags: &GenerateArgs) -> Result<(), Fail> {
    let args = resolve(flags, flags.config.as_deref(), "generate")?;
    set_threads(args.threads)?;
    let mut cfg = GenConfig::default();
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.patients {
        cfg.patients = v;
    }
    cfg.records = args.records;
    if let Some(v) = args.facilities {
        cfg.facilities = v;
    }
    if let Some(v) = &args.start {
        cfg.start = v.parse().map_err(Fail::usage)?;
    }
    if let Some(v) = &args.end {
        cfg.end = v.parse().map_err(Fail::usage)?;
    }
    if args.plant_all_classes || args.plant_each.is_some() {
        cfg.plant = PlantCounts::uniform(args.plant_each.unwrap_or(DEFAULT_PLANT_EACH));
    }
    if let Some(v) = args.mean_stay_days {
        cfg.mean_stay_days = v;
    }
    if let Some(v) = args.mean_gap_days {
        cfg.mean_gap_days = v;
    }
    if let Some(v) = args.mean_episodes {
        cfg.mean_episodes = v;
    }
    if !args.regions.is_empty() {
        cfg.regions = args.regions.clone();
    }
    if let Some(v) = args.no_diagnosis_rows {
        cfg.no_diagnosis_rows = v;
    }
    if let Some(v) = args.malformed_rows {
        cfg.malformed_rows = v;
    }
    cfg.shuffle = !args.no_shuffle;
    cfg.truth_events = !args.no_truth_events;

    let dir = out_dir(&args.out)?;
    let cohort = dir.join("cohort.csv");
    let file = fs::File::create(&cohort)
        .map_err(|e| Fail::usage(format!("cannot write {}: {e}", cohort.display())))?;
    let truth = generate_to(&cfg, file).map_err(|e| {
        let _ = fs::remove_file(&cohort);
        match e {
            GenError::Io(_) => Fail::data(e.to_string()),
            _ => Fail::usage(e.to_string()),
        }
    })?;
    write_file(&dir.join("truth.json"), &pretty(&truth))
}
