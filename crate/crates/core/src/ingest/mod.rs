//! Record ingestion: the stay record model, CSV parsing, filtering and the
//! per-patient index.

mod index;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::day::DayIndex;

pub use index::{group_by_patient, PatientIndex};
pub use parse::{parse_records, parse_records_from_path, ColumnMap, ColumnRef, SchemaConfig};

/// Region code the analysis restricts to unless told otherwise.
pub const DEFAULT_REGION: &str = "03";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {source_name}: {cause}")]
    Unreadable {
        source_name: String,
        #[source]
        cause: std::io::Error,
    },
    #[error("schema references column `{0}` which is not in the header")]
    UnknownColumn(String),
    #[error("input has no header line")]
    MissingHeader,
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    /// `m`/`male` and `f`/`female` (any case); everything else is unknown.
    pub fn parse_lenient(text: &str) -> Self {
        let t = text.trim();
        if t.eq_ignore_ascii_case("m") || t.eq_ignore_ascii_case("male") {
            Gender::Male
        } else if t.eq_ignore_ascii_case("f") || t.eq_ignore_ascii_case("female") {
            Gender::Female
        } else {
            Gender::Unknown
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Gender::Male => "m",
            Gender::Female => "f",
            Gender::Unknown => "u",
        }
    }
}

/// Two-character federal-state code of a facility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionCode([u8; 2]);

impl RegionCode {
    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("region codes are ascii")
    }
}

impl FromStr for RegionCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().as_bytes() {
            &[a, b] if a.is_ascii_alphanumeric() && b.is_ascii_alphanumeric() => {
                Ok(RegionCode([a, b]))
            }
            _ => Err(format!("region code must be two alphanumeric characters, got `{s}`")),
        }
    }
}

impl fmt::Display for RegionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for RegionCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RegionCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("patient id is empty")]
    EmptyPatient,
    #[error("facility id is empty")]
    EmptyFacility,
    #[error("admission {admission} is after discharge {discharge}")]
    DischargeBeforeAdmission {
        admission: DayIndex,
        discharge: DayIndex,
    },
}

/// One hospitalisation. Admission and discharge are inclusive whole days, so
/// a one-day stay has `admission == discharge`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StayRecord {
    patient_id: Arc<str>,
    facility_id: Arc<str>,
    icd10: Option<Arc<str>>,
    numeric_code: Option<i64>,
    admission: DayIndex,
    discharge: DayIndex,
    row: u32,
    region: RegionCode,
    gender: Gender,
}

impl StayRecord {
    pub fn new(
        patient_id: impl Into<Arc<str>>,
        facility_id: impl Into<Arc<str>>,
        admission: DayIndex,
        discharge: DayIndex,
    ) -> Result<Self, RecordError> {
        let patient_id = patient_id.into();
        let facility_id = facility_id.into();
        if patient_id.is_empty() {
            return Err(RecordError::EmptyPatient);
        }
        if facility_id.is_empty() {
            return Err(RecordError::EmptyFacility);
        }
        if admission > discharge {
            return Err(RecordError::DischargeBeforeAdmission {
                admission,
                discharge,
            });
        }
        Ok(Self {
            patient_id,
            facility_id,
            icd10: None,
            numeric_code: None,
            admission,
            discharge,
            row: 0,
            region: RegionCode(*b"03"),
            gender: Gender::Unknown,
        })
    }

    pub fn with_icd10(mut self, code: impl Into<Arc<str>>) -> Self {
        let code = code.into();
        self.icd10 = (!code.is_empty()).then_some(code);
        self
    }

    pub fn with_numeric_code(mut self, code: i64) -> Self {
        self.numeric_code = Some(code);
        self
    }

    pub fn with_region(mut self, region: RegionCode) -> Self {
        self.region = region;
        self
    }

    pub fn with_gender(mut self, gender: Gender) -> Self {
        self.gender = gender;
        self
    }

    /// Data-row ordinal (0-based, header excluded) in the source file.
    pub fn with_row(mut self, row: u32) -> Self {
        self.row = row;
        self
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn patient_arc(&self) -> &Arc<str> {
        &self.patient_id
    }

    pub fn facility_id(&self) -> &str {
        &self.facility_id
    }

    pub fn facility_arc(&self) -> &Arc<str> {
        &self.facility_id
    }

    pub fn icd10(&self) -> Option<&str> {
        self.icd10.as_deref()
    }

    pub fn numeric_code(&self) -> Option<i64> {
        self.numeric_code
    }

    pub fn admission(&self) -> DayIndex {
        self.admission
    }

    pub fn discharge(&self) -> DayIndex {
        self.discharge
    }

    pub fn row(&self) -> u32 {
        self.row
    }

    pub fn region(&self) -> RegionCode {
        self.region
    }

    pub fn gender(&self) -> Gender {
        self.gender
    }

    /// Ordering used inside a patient's stay list.
    pub(crate) fn sort_key(&self) -> (DayIndex, DayIndex, &str, u32) {
        (self.admission, self.discharge, &self.facility_id, self.row)
    }
}

/// An immutable, ordered collection of accepted stays.
#[derive(Clone, Debug, Default)]
pub struct RecordSet {
    records: Arc<Vec<StayRecord>>,
    provenance: String,
}

impl RecordSet {
    pub fn new(records: Vec<StayRecord>, provenance: impl Into<String>) -> Self {
        Self {
            records: Arc::new(records),
            provenance: provenance.into(),
        }
    }

    pub fn records(&self) -> &[StayRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, StayRecord> {
        self.records.iter()
    }

    fn filtered(&self, label: String, keep: impl Fn(&StayRecord) -> bool) -> RecordSet {
        let records: Vec<_> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        RecordSet::new(records, format!("{} | {label}", self.provenance))
    }

    /// Records admitted within `[from, to]` (inclusive).
    pub fn filter_period(&self, from: DayIndex, to: DayIndex) -> RecordSet {
        self.filtered(format!("period={from}:{to}"), |r| {
            r.admission >= from && r.admission <= to
        })
    }

    /// Takes the records out, avoiding a copy when this set is the only owner.
    pub fn into_records(self) -> Vec<StayRecord> {
        match Arc::try_unwrap(self.records) {
            Ok(boxed) => boxed,
            Err(shared) => shared.as_ref().clone(),
        }
    }
}

impl<'a> IntoIterator for &'a RecordSet {
    type Item = &'a StayRecord;
    type IntoIter = std::slice::Iter<'a, StayRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Keeps only the records whose facility lies in `region`.
pub fn filter_region(rs: &RecordSet, region: RegionCode) -> RecordSet {
    rs.filtered(format!("region={region}"), |r| r.region == region)
}

/// Row accounting for one ingestion pass.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total_rows: u64,
    pub accepted: u64,
    pub dropped_no_diagnosis: u64,
    pub dropped_malformed: u64,
    pub per_region_counts: BTreeMap<String, u64>,
}

impl IngestReport {
    pub fn is_balanced(&self) -> bool {
        self.total_rows == self.accepted + self.dropped_no_diagnosis + self.dropped_malformed
    }

    /// `key=value` lines; regions appear as `region.<code>=<count>`.
    pub fn to_key_value(&self) -> String {
        let mut out = format!(
            "total_rows={}\naccepted={}\ndropped_no_diagnosis={}\ndropped_malformed={}\n",
            self.total_rows, self.accepted, self.dropped_no_diagnosis, self.dropped_malformed
        );
        for (region, n) in &self.per_region_counts {
            out.push_str(&format!("region.{region}={n}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(patient: &str, region: &str) -> StayRecord {
        StayRecord::new(patient, "F1", DayIndex(0), DayIndex(3))
            .unwrap()
            .with_region(region.parse().unwrap())
    }

    #[test]
    fn record_invariants() {
        assert_eq!(
            StayRecord::new("", "F", DayIndex(0), DayIndex(0)),
            Err(RecordError::EmptyPatient)
        );
        assert_eq!(
            StayRecord::new("p", "", DayIndex(0), DayIndex(0)),
            Err(RecordError::EmptyFacility)
        );
        assert!(matches!(
            StayRecord::new("p", "F", DayIndex(2), DayIndex(1)),
            Err(RecordError::DischargeBeforeAdmission { .. })
        ));
        assert!(StayRecord::new("p", "F", DayIndex(2), DayIndex(2)).is_ok());
    }

    #[test]
    fn region_filter_selects_matching_records() {
        let rs = RecordSet::new(
            vec![rec("a", "03"), rec("b", "02"), rec("c", "03"), rec("d", "02"), rec("e", "03")],
            "test",
        );
        let lower_saxony = filter_region(&rs, "03".parse().unwrap());
        assert_eq!(lower_saxony.len(), 3);
        assert!(lower_saxony.iter().all(|r| r.region().as_str() == "03"));
        assert_eq!(rs.len(), 5);

        let again = filter_region(&lower_saxony, "03".parse().unwrap());
        assert_eq!(again.records(), lower_saxony.records());

        assert!(filter_region(&rs, "09".parse().unwrap()).is_empty());
    }

    #[test]
    fn region_code_validation() {
        assert!("03".parse::<RegionCode>().is_ok());
        assert!("3".parse::<RegionCode>().is_err());
        assert!("003".parse::<RegionCode>().is_err());
        assert!("0-".parse::<RegionCode>().is_err());
    }

    #[test]
    fn gender_parsing() {
        assert_eq!(Gender::parse_lenient("M"), Gender::Male);
        assert_eq!(Gender::parse_lenient("female"), Gender::Female);
        assert_eq!(Gender::parse_lenient("w"), Gender::Unknown);
        assert_eq!(Gender::parse_lenient(""), Gender::Unknown);
    }

    #[test]
    fn period_filter_uses_admission_day() {
        let a = StayRecord::new("p", "F", DayIndex(5), DayIndex(20)).unwrap();
        let b = StayRecord::new("p", "F", DayIndex(15), DayIndex(16)).unwrap();
        let rs = RecordSet::new(vec![a.clone(), b], "t");
        let p = rs.filter_period(DayIndex(0), DayIndex(10));
        assert_eq!(p.records(), &[a]);
    }
}
