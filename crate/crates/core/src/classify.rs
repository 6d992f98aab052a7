//! Overlap typing, four-bit pair codes, diagnosis grouping and the tables
//! built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::histogram::Histogram;
use crate::ingest::StayRecord;
use crate::stats::OverlapLengths;
use crate::temporal::{overlap_days, stay_duration, OverlapGroup};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("stays {0} and {1} do not share a day")]
    NotOverlapping(u32, u32),
    #[error("stays belong to different patients ({0} vs {1})")]
    DifferentPatients(String, String),
}

/// Type of an overlap group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OverlapClass {
    StandardTransfer,
    FirstDayTransfer,
    LastDayTransfer,
    SimultaneousSameFacility,
    TemporaryTransfer,
    SimultaneousTwoFacilities,
    UnknownTwoFacilities,
    TwoAdmissionsSameFacility,
    /// Three or more records; carries the largest number of them present on
    /// a single day.
    UnknownMultiple(u32),
}

impl OverlapClass {
    /// The eight two-record classes.
    pub const PAIR_CLASSES: [OverlapClass; 8] = [
        OverlapClass::StandardTransfer,
        OverlapClass::FirstDayTransfer,
        OverlapClass::LastDayTransfer,
        OverlapClass::SimultaneousSameFacility,
        OverlapClass::TemporaryTransfer,
        OverlapClass::SimultaneousTwoFacilities,
        OverlapClass::UnknownTwoFacilities,
        OverlapClass::TwoAdmissionsSameFacility,
    ];

    pub fn is_same_facility(self) -> bool {
        matches!(
            self,
            OverlapClass::SimultaneousSameFacility | OverlapClass::TwoAdmissionsSameFacility
        )
    }

    fn name(self) -> &'static str {
        match self {
            OverlapClass::StandardTransfer => "StandardTransfer",
            OverlapClass::FirstDayTransfer => "FirstDayTransfer",
            OverlapClass::LastDayTransfer => "LastDayTransfer",
            OverlapClass::SimultaneousSameFacility => "SimultaneousSameFacility",
            OverlapClass::TemporaryTransfer => "TemporaryTransfer",
            OverlapClass::SimultaneousTwoFacilities => "SimultaneousTwoFacilities",
            OverlapClass::UnknownTwoFacilities => "UnknownTwoFacilities",
            OverlapClass::TwoAdmissionsSameFacility => "TwoAdmissionsSameFacility",
            OverlapClass::UnknownMultiple(_) => "UnknownMultiple",
        }
    }
}

impl fmt::Display for OverlapClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OverlapClass::UnknownMultiple(n) => write!(f, "UnknownMultiple({n})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for OverlapClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(n) = s
            .strip_prefix("UnknownMultiple(")
            .and_then(|rest| rest.strip_suffix(')'))
        {
            return n
                .parse()
                .map(OverlapClass::UnknownMultiple)
                .map_err(|_| format!("bad multiplicity in `{s}`"));
        }
        OverlapClass::PAIR_CLASSES
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown overlap class `{s}`"))
    }
}

impl Serialize for OverlapClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OverlapClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Classifies two overlapping stays of one patient.
///
/// Rules are tried in order and the first match wins:
/// 1. same facility and identical period: `SimultaneousSameFacility`
/// 2. same facility: `TwoAdmissionsSameFacility`
/// 3. identical period: `SimultaneousTwoFacilities`
/// 4. exactly one one-day stay falling on the other's admission or
///    discharge day: `FirstDayTransfer` / `LastDayTransfer`
/// 5. one stay strictly inside the other at both ends: `TemporaryTransfer`
/// 6. a single shared day and both stays longer than a day: `StandardTransfer`
/// 7. anything else: `UnknownTwoFacilities`
pub fn classify_pair(a: &StayRecord, b: &StayRecord) -> Result<OverlapClass, ClassifyError> {
    if a.patient_id() != b.patient_id() {
        return Err(ClassifyError::DifferentPatients(
            a.patient_id().to_owned(),
            b.patient_id().to_owned(),
        ));
    }
    let shared = overlap_days(a, b);
    if shared == 0 {
        return Err(ClassifyError::NotOverlapping(a.row(), b.row()));
    }
    let same_period = a.admission() == b.admission() && a.discharge() == b.discharge();
    if a.facility_id() == b.facility_id() {
        return Ok(if same_period {
            OverlapClass::SimultaneousSameFacility
        } else {
            OverlapClass::TwoAdmissionsSameFacility
        });
    }
    if same_period {
        return Ok(OverlapClass::SimultaneousTwoFacilities);
    }

    let (da, db) = (stay_duration(a), stay_duration(b));
    if (da == 1) != (db == 1) {
        let (short, long) = if da == 1 { (a, b) } else { (b, a) };
        if short.admission() == long.admission() {
            return Ok(OverlapClass::FirstDayTransfer);
        }
        if short.admission() == long.discharge() {
            return Ok(OverlapClass::LastDayTransfer);
        }
    }
    if strictly_inside(a, b) || strictly_inside(b, a) {
        return Ok(OverlapClass::TemporaryTransfer);
    }
    if shared == 1 && da > 1 && db > 1 {
        return Ok(OverlapClass::StandardTransfer);
    }
    Ok(OverlapClass::UnknownTwoFacilities)
}

/// `inner` starts after and ends before `outer`.
pub(crate) fn strictly_inside(inner: &StayRecord, outer: &StayRecord) -> bool {
    inner.admission() > outer.admission() && inner.discharge() < outer.discharge()
}

/// Two-member groups get their pair class; larger ones are
/// `UnknownMultiple` with the group's peak daily multiplicity.
pub fn classify_group(g: &OverlapGroup) -> OverlapClass {
    match g.members() {
        [a, b] => classify_pair(a, b).expect("group members share a day"),
        _ => OverlapClass::UnknownMultiple(g.max_multiplicity()),
    }
}

/// An overlap group together with its class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassifiedGroup {
    pub group: OverlapGroup,
    pub class: OverlapClass,
}

impl ClassifiedGroup {
    pub fn classify(group: OverlapGroup) -> Self {
        let class = classify_group(&group);
        Self { group, class }
    }
}

/// How the second pair-code bit decides that two diagnoses are the same.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosisMatch {
    /// Full ICD-10 strings; numeric codes when either record lacks one.
    #[default]
    Exact,
    /// Diagnosis group indices.
    Group,
}

/// Four equality bits for a two-record overlap: facility, diagnosis,
/// admission day, discharge day. Rendered most significant first, e.g. `1100`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairCode(u8);

impl PairCode {
    pub fn new(
        same_facility: bool,
        same_diagnosis: bool,
        same_admission: bool,
        same_discharge: bool,
    ) -> Self {
        PairCode(
            (u8::from(same_facility) << 3)
                | (u8::from(same_diagnosis) << 2)
                | (u8::from(same_admission) << 1)
                | u8::from(same_discharge),
        )
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits < 16).then_some(PairCode(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = PairCode> {
        (0..16).map(PairCode)
    }

    pub fn same_facility(self) -> bool {
        self.0 & 0b1000 != 0
    }

    pub fn same_diagnosis(self) -> bool {
        self.0 & 0b0100 != 0
    }

    pub fn same_admission(self) -> bool {
        self.0 & 0b0010 != 0
    }

    pub fn same_discharge(self) -> bool {
        self.0 & 0b0001 != 0
    }
}

impl fmt::Display for PairCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04b}", self.0)
    }
}

impl FromStr for PairCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 4 && s.bytes().all(|b| b == b'0' || b == b'1') {
            Ok(PairCode(u8::from_str_radix(s, 2).expect("checked binary digits")))
        } else {
            Err(format!("pair code must be four binary digits, got `{s}`"))
        }
    }
}

impl Serialize for PairCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PairCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

pub fn pair_code(a: &StayRecord, b: &StayRecord) -> PairCode {
    pair_code_with(a, b, DiagnosisMatch::Exact)
}

pub fn pair_code_with(a: &StayRecord, b: &StayRecord, mode: DiagnosisMatch) -> PairCode {
    PairCode::new(
        a.facility_id() == b.facility_id(),
        same_diagnosis(a, b, mode),
        a.admission() == b.admission(),
        a.discharge() == b.discharge(),
    )
}

fn same_diagnosis(a: &StayRecord, b: &StayRecord, mode: DiagnosisMatch) -> bool {
    match mode {
        DiagnosisMatch::Exact => match (a.icd10(), b.icd10()) {
            (Some(x), Some(y)) => x == y,
            _ => matches!((a.numeric_code(), b.numeric_code()), (Some(x), Some(y)) if x == y),
        },
        DiagnosisMatch::Group => {
            let group = |r: &StayRecord| r.icd10().and_then(|c| diagnosis_group(c).ok());
            matches!((group(a), group(b)), (Some(x), Some(y)) if x == y)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("diagnosis code `{code}` maps to no diagnosis group")]
pub struct UnclassifiedDiagnosis {
    pub code: String,
}

/// Diagnosis group index: ICD-10 chapters 1 to 19 and 21. External causes
/// (chapter 20) and special-purpose codes have no group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct DiagnosisGroup(u8);

impl DiagnosisGroup {
    pub fn new(index: u8) -> Option<Self> {
        matches!(index, 1..=19 | 21).then_some(DiagnosisGroup(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for DiagnosisGroup {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        DiagnosisGroup::new(v).ok_or_else(|| format!("{v} is not a diagnosis group index"))
    }
}

impl From<DiagnosisGroup> for u8 {
    fn from(g: DiagnosisGroup) -> u8 {
        g.0
    }
}

impl fmt::Display for DiagnosisGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Maps an ICD-10 code (`I21.0`, `O80`, ...) to its chapter group. The code
/// must start with a letter followed by two digits; case is ignored.
pub fn diagnosis_group(icd10: &str) -> Result<DiagnosisGroup, UnclassifiedDiagnosis> {
    let unclassified = || UnclassifiedDiagnosis {
        code: icd10.to_owned(),
    };
    let b = icd10.trim().as_bytes();
    let (letter, category) = match b {
        [l, d1, d2, ..] if l.is_ascii_alphabetic() && d1.is_ascii_digit() && d2.is_ascii_digit() => {
            (l.to_ascii_uppercase(), (d1 - b'0') * 10 + (d2 - b'0'))
        }
        _ => return Err(unclassified()),
    };
    let index = match (letter, category) {
        (b'A' | b'B', _) => 1,
        (b'C', _) | (b'D', 0..=49) => 2,
        (b'D', 50..=89) => 3,
        (b'E', _) => 4,
        (b'F', _) => 5,
        (b'G', _) => 6,
        (b'H', 0..=59) => 7,
        (b'H', 60..=95) => 8,
        (b'I', _) => 9,
        (b'J', _) => 10,
        (b'K', _) => 11,
        (b'L', _) => 12,
        (b'M', _) => 13,
        (b'N', _) => 14,
        (b'O', _) => 15,
        (b'P', _) => 16,
        (b'Q', _) => 17,
        (b'R', _) => 18,
        (b'S' | b'T', _) => 19,
        (b'Z', _) => 21,
        _ => return Err(unclassified()),
    };
    Ok(DiagnosisGroup(index))
}

/// Ascending pair of diagnosis groups, rendered `[i, j]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiagnosisPair(DiagnosisGroup, DiagnosisGroup);

impl DiagnosisPair {
    pub fn new(a: DiagnosisGroup, b: DiagnosisGroup) -> Self {
        if a <= b {
            DiagnosisPair(a, b)
        } else {
            DiagnosisPair(b, a)
        }
    }

    pub fn low(self) -> DiagnosisGroup {
        self.0
    }

    pub fn high(self) -> DiagnosisGroup {
        self.1
    }
}

impl fmt::Display for DiagnosisPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.0, self.1)
    }
}

impl Serialize for DiagnosisPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn diagnosis_pair(
    a: &StayRecord,
    b: &StayRecord,
) -> Result<DiagnosisPair, UnclassifiedDiagnosis> {
    let group = |r: &StayRecord| diagnosis_group(r.icd10().unwrap_or(""));
    Ok(DiagnosisPair::new(group(a)?, group(b)?))
}

/// Counts per overlap class.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OverlapTable {
    counts: BTreeMap<OverlapClass, u64>,
    total: u64,
}

impl OverlapTable {
    pub fn count(&self, class: OverlapClass) -> u64 {
        self.counts.get(&class).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<OverlapClass, u64> {
        &self.counts
    }

    /// Share of all groups in percent; `None` for an empty table.
    pub fn percentage(&self, class: OverlapClass) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.count(class) as f64 / self.total as f64)
    }

    /// Percentage with one decimal, or `—` when undefined.
    pub fn percentage_label(&self, class: OverlapClass) -> String {
        match self.percentage(class) {
            Some(p) => format!("{p:.1}"),
            None => "—".to_owned(),
        }
    }

    /// `class,count,percent` rows, most frequent class first.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<_> = self.counts.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let mut out = String::from("class,count,percent\n");
        for (class, n) in rows {
            out.push_str(&format!("{class},{n},{}\n", self.percentage_label(*class)));
        }
        out.push_str(&format!(
            "total,{},{}\n",
            self.total,
            if self.total > 0 { "100.0" } else { "—" }
        ));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let classes: Vec<_> = self
            .counts
            .iter()
            .map(|(class, n)| {
                serde_json::json!({
                    "class": class.to_string(),
                    "count": n,
                    "percent": self.percentage(*class),
                })
            })
            .collect();
        serde_json::json!({ "total": self.total, "classes": classes })
    }
}

/// Everything tabulated from classified overlap groups. Merging two
/// tabulations built on disjoint patients equals tabulating them together.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tabulation {
    pub mode: DiagnosisMatch,
    pub classes: Histogram<OverlapClass>,
    /// Two-record groups only.
    pub codes: Histogram<PairCode>,
    pub code_diagnoses: BTreeMap<PairCode, Histogram<DiagnosisPair>>,
    /// Two-record groups whose diagnoses have no group, per code.
    pub code_unclassified: Histogram<PairCode>,
    pub overlap_lengths: OverlapLengths,
}

impl Tabulation {
    pub fn new(mode: DiagnosisMatch) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn add(&mut self, group: &OverlapGroup, class: OverlapClass) {
        self.classes.add(class);
        self.overlap_lengths.add_group(group);
        if let [a, b] = group.members() {
            let code = pair_code_with(a, b, self.mode);
            self.codes.add(code);
            match diagnosis_pair(a, b) {
                Ok(pair) => self.code_diagnoses.entry(code).or_default().add(pair),
                Err(_) => self.code_unclassified.add(code),
            }
        }
    }

    pub fn merge(&mut self, other: Tabulation) {
        self.classes.merge(other.classes);
        self.codes.merge(other.codes);
        for (code, h) in other.code_diagnoses {
            self.code_diagnoses.entry(code).or_default().merge(h);
        }
        self.code_unclassified.merge(other.code_unclassified);
        self.overlap_lengths.merge(other.overlap_lengths);
    }

    pub fn table(&self) -> OverlapTable {
        OverlapTable {
            counts: self.classes.as_map().clone(),
            total: self.classes.total(),
        }
    }

    /// `code,count` rows in code order.
    pub fn codes_csv(&self) -> String {
        let mut out = String::from("code,count\n");
        for (code, n) in self.codes.iter() {
            out.push_str(&format!("{code},{n}\n"));
        }
        out
    }

    /// `code,diagnosis_pair,count`, most frequent pair first within a code.
    /// Pairs without a diagnosis group are reported as `unclassified`.
    pub fn code_diagnoses_csv(&self) -> String {
        let mut out = String::from("code,diagnosis_pair,count\n");
        for code in PairCode::all() {
            if let Some(h) = self.code_diagnoses.get(&code) {
                let mut rows: Vec<_> = h.iter().collect();
                rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
                for (pair, n) in rows {
                    out.push_str(&format!("{code},\"{pair}\",{n}\n"));
                }
            }
            let u = self.code_unclassified.get(&code);
            if u > 0 {
                out.push_str(&format!("{code},unclassified,{u}\n"));
            }
        }
        out
    }
}

/// Classifies and tabulates a batch of groups.
pub fn tabulate(groups: &[OverlapGroup], mode: DiagnosisMatch) -> Tabulation {
    let mut t = Tabulation::new(mode);
    for g in groups {
        t.add(g, classify_group(g));
    }
    t
}
