//! Streaming CSV parser.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Gender, IngestError, IngestReport, RecordSet, RegionCode, StayRecord};
use crate::day::{DayIndex, ISO_FORMAT};

/// A column addressed by header name or by 0-based position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_owned())
    }
}

impl std::fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "#{i}"),
            ColumnRef::Name(n) => f.write_str(n),
        }
    }
}

/// Where each stay field lives in the input. Gender and the two diagnosis
/// columns may be absent from a file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub patient_id: ColumnRef,
    pub gender: Option<ColumnRef>,
    pub facility_id: ColumnRef,
    pub region_code: ColumnRef,
    pub admission_date: ColumnRef,
    pub discharge_date: ColumnRef,
    pub icd10_code: Option<ColumnRef>,
    pub numeric_code: Option<ColumnRef>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            patient_id: "patient_id".into(),
            gender: Some("gender".into()),
            facility_id: "facility_id".into(),
            region_code: "region_code".into(),
            admission_date: "admission_date".into(),
            discharge_date: "discharge_date".into(),
            icd10_code: Some("icd10_code".into()),
            numeric_code: Some("numeric_code".into()),
        }
    }
}

impl ColumnMap {
    /// Header of the default layout, in order.
    pub const DEFAULT_HEADER: [&'static str; 8] = [
        "patient_id",
        "gender",
        "facility_id",
        "region_code",
        "admission_date",
        "discharge_date",
        "icd10_code",
        "numeric_code",
    ];

    /// Points `field` at `column`. Returns false for an unknown field name.
    pub fn set(&mut self, field: &str, column: ColumnRef) -> bool {
        match field {
            "patient_id" => self.patient_id = column,
            "gender" => self.gender = Some(column),
            "facility_id" => self.facility_id = column,
            "region_code" => self.region_code = column,
            "admission_date" => self.admission_date = column,
            "discharge_date" => self.discharge_date = column,
            "icd10_code" => self.icd10_code = Some(column),
            "numeric_code" => self.numeric_code = Some(column),
            _ => return false,
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    pub columns: ColumnMap,
    pub delimiter: char,
    /// chrono `strftime`-style format for admission and discharge dates.
    pub date_format: String,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            columns: ColumnMap::default(),
            delimiter: ',',
            date_format: ISO_FORMAT.to_owned(),
        }
    }
}

struct Resolved {
    patient: usize,
    gender: Option<usize>,
    facility: usize,
    region: usize,
    admission: usize,
    discharge: usize,
    icd10: Option<usize>,
    numeric: Option<usize>,
}

fn resolve(header: &csv::ByteRecord, col: &ColumnRef) -> Result<usize, IngestError> {
    let found = match col {
        ColumnRef::Index(i) => (*i < header.len()).then_some(*i),
        ColumnRef::Name(name) => header
            .iter()
            .position(|h| std::str::from_utf8(h).is_ok_and(|h| h.trim() == name)),
    };
    found.ok_or_else(|| IngestError::UnknownColumn(col.to_string()))
}

impl SchemaConfig {
    fn resolve(&self, header: &csv::ByteRecord) -> Result<Resolved, IngestError> {
        let c = &self.columns;
        let defaults = ColumnMap::default();
        // An optional column left at its default name may simply be absent.
        let opt = |col: &Option<ColumnRef>, default: &Option<ColumnRef>| match col {
            None => Ok(None),
            Some(c) => match resolve(header, c) {
                Err(_) if col == default => Ok(None),
                r => r.map(Some),
            },
        };
        Ok(Resolved {
            patient: resolve(header, &c.patient_id)?,
            gender: opt(&c.gender, &defaults.gender)?,
            facility: resolve(header, &c.facility_id)?,
            region: resolve(header, &c.region_code)?,
            admission: resolve(header, &c.admission_date)?,
            discharge: resolve(header, &c.discharge_date)?,
            icd10: opt(&c.icd10_code, &defaults.icd10_code)?,
            numeric: opt(&c.numeric_code, &defaults.numeric_code)?,
        })
    }

    fn delimiter_byte(&self) -> Result<u8, IngestError> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(|b| b.is_ascii() && *b != b'"' && *b != b'\n' && *b != b'\r')
            .ok_or_else(|| {
                IngestError::InvalidSchema(format!("unsupported delimiter {:?}", self.delimiter))
            })
    }
}

/// Hands out one shared allocation per distinct string.
#[derive(Default)]
struct Interner {
    set: HashSet<Arc<str>>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> Arc<str> {
        if let Some(existing) = self.set.get(s) {
            return existing.clone();
        }
        let arc: Arc<str> = Arc::from(s);
        self.set.insert(arc.clone());
        arc
    }
}

enum RowOutcome {
    Accepted(StayRecord),
    NoDiagnosis,
    Malformed,
}

struct RowParser<'a> {
    cols: Resolved,
    date_format: &'a str,
    patients: Interner,
    facilities: Interner,
    codes: Interner,
}

impl RowParser<'_> {
    fn field(row: &csv::ByteRecord, i: usize) -> Option<&str> {
        row.get(i)
            .and_then(|b| std::str::from_utf8(b).ok())
            .map(str::trim)
    }

    fn parse(&mut self, row: &csv::ByteRecord, ordinal: u32) -> RowOutcome {
        use RowOutcome::Malformed;
        let c = &self.cols;
        let (Some(patient), Some(facility), Some(region), Some(adm), Some(dis)) = (
            Self::field(row, c.patient),
            Self::field(row, c.facility),
            Self::field(row, c.region),
            Self::field(row, c.admission),
            Self::field(row, c.discharge),
        ) else {
            return Malformed;
        };
        let optional = |i: Option<usize>| match i {
            None => Some(""),
            Some(i) => Self::field(row, i),
        };
        let (Some(gender), Some(icd10), Some(numeric)) =
            (optional(c.gender), optional(c.icd10), optional(c.numeric))
        else {
            return Malformed;
        };
        let Ok(region) = region.parse::<RegionCode>() else {
            return Malformed;
        };
        let (Some(admission), Some(discharge)) = (
            DayIndex::parse_with_format(adm, self.date_format),
            DayIndex::parse_with_format(dis, self.date_format),
        ) else {
            return Malformed;
        };
        let numeric = if numeric.is_empty() {
            None
        } else {
            match numeric.parse::<i64>() {
                Ok(n) => Some(n),
                Err(_) => return Malformed,
            }
        };
        if patient.is_empty() || facility.is_empty() || admission > discharge {
            return Malformed;
        }
        if icd10.is_empty() && numeric.is_none() {
            return RowOutcome::NoDiagnosis;
        }

        let mut record = StayRecord::new(
            self.patients.intern(patient),
            self.facilities.intern(facility),
            admission,
            discharge,
        )
        .expect("validated above")
        .with_region(region)
        .with_gender(Gender::parse_lenient(gender))
        .with_row(ordinal);
        if !icd10.is_empty() {
            record = record.with_icd10(self.codes.intern(icd10));
        }
        if let Some(n) = numeric {
            record = record.with_numeric_code(n);
        }
        RowOutcome::Accepted(record)
    }
}

/// Parses a headed CSV stream into accepted stays plus a row report.
///
/// Per-row defects (bad dates, admission after discharge, missing fields,
/// no diagnosis) are counted and skipped. Only I/O failures and schema
/// problems abort.
pub fn parse_records<R: Read>(
    source: R,
    schema: &SchemaConfig,
) -> Result<(RecordSet, IngestReport), IngestError> {
    parse_named(source, schema, "stream")
}

pub fn parse_records_from_path(
    path: &Path,
    schema: &SchemaConfig,
) -> Result<(RecordSet, IngestReport), IngestError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|cause| IngestError::Unreadable {
        source_name: name.clone(),
        cause,
    })?;
    parse_named(BufReader::with_capacity(1 << 20, file), schema, &name)
}

fn parse_named<R: Read>(
    source: R,
    schema: &SchemaConfig,
    name: &str,
) -> Result<(RecordSet, IngestReport), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .has_headers(false)
        .flexible(true)
        .from_reader(source);

    let mut row = csv::ByteRecord::new();
    let read = |reader: &mut csv::Reader<R>, row: &mut csv::ByteRecord| {
        reader.read_byte_record(row).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(cause) => IngestError::Unreadable {
                source_name: name.to_owned(),
                cause,
            },
            other => IngestError::InvalidSchema(format!("csv: {other:?}")),
        })
    };
    if !read(&mut reader, &mut row)? {
        return Err(IngestError::MissingHeader);
    }
    let cols = schema.resolve(&row)?;
    let mut parser = RowParser {
        cols,
        date_format: &schema.date_format,
        patients: Interner::default(),
        facilities: Interner::default(),
        codes: Interner::default(),
    };

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    let mut regions: BTreeMap<RegionCode, u64> = BTreeMap::new();
    while read(&mut reader, &mut row)? {
        // A lone empty line carries no record.
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        let ordinal = report.total_rows as u32;
        report.total_rows += 1;
        match parser.parse(&row, ordinal) {
            RowOutcome::Accepted(r) => {
                *regions.entry(r.region()).or_insert(0) += 1;
                records.push(r);
            }
            RowOutcome::NoDiagnosis => report.dropped_no_diagnosis += 1,
            RowOutcome::Malformed => report.dropped_malformed += 1,
        }
    }
    report.accepted = records.len() as u64;
    report.per_region_counts = regions
        .into_iter()
        .map(|(r, n)| (r.as_str().to_owned(), n))
        .collect();
    debug_assert!(report.is_balanced());
    Ok((RecordSet::new(records, name), report))
}
