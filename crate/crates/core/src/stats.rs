//! Descriptive statistics over stays.
//!
//! Every aggregate here is a [`Histogram`] or a map of counts, so partial
//! results computed over disjoint patients merge by addition.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::day::DayIndex;
use crate::histogram::Histogram;
use crate::ingest::{Gender, PatientIndex, StayRecord};
use crate::temporal::{episode_gaps, overlap_days, stay_duration, OverlapGroup};

/// Inclusive admission-day window.
pub type Period = (DayIndex, DayIndex);

fn in_period(r: &StayRecord, period: Option<Period>) -> bool {
    period.is_none_or(|(from, to)| r.admission() >= from && r.admission() <= to)
}

/// Decade index of a positive count: `floor(log10(n))`.
pub fn decade_bin(n: u64) -> u32 {
    assert!(n > 0, "decade bins are defined for positive counts");
    n.ilog10()
}

/// Facilities binned by the order of magnitude of a count; bin `k` holds
/// counts in `[10^k, 10^(k+1) - 1]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct DecadeHistogram(pub Histogram<u32>);

impl DecadeHistogram {
    pub fn from_counts<'a>(counts: impl IntoIterator<Item = &'a u64>) -> Self {
        DecadeHistogram(counts.into_iter().filter(|&&n| n > 0).map(|&n| decade_bin(n)).collect())
    }

    pub fn label(k: u32) -> String {
        format!("10^{k}–10^{}−1", k + 1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,count\n");
        for (k, n) in self.0.iter() {
            let _ = writeln!(out, "{},{n}", Self::label(*k));
        }
        out
    }
}

/// Per-facility counts with their decade histogram.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FacilityCounts {
    pub per_facility: BTreeMap<String, u64>,
    pub decades: DecadeHistogram,
}

impl FacilityCounts {
    fn from_map(per_facility: BTreeMap<String, u64>) -> Self {
        let decades = DecadeHistogram::from_counts(per_facility.values());
        Self {
            per_facility,
            decades,
        }
    }

    /// The `n` largest facilities, ties broken by id.
    pub fn top(&self, n: usize) -> Vec<(&str, u64)> {
        let mut v: Vec<_> = self
            .per_facility
            .iter()
            .map(|(f, &c)| (f.as_str(), c))
            .collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v.truncate(n);
        v
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("facility,count\n");
        for (f, n) in &self.per_facility {
            let _ = writeln!(out, "{},{n}", csv_field(f));
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Admissions per facility, counting records admitted within `period`.
pub fn admissions_per_facility(records: &[StayRecord], period: Option<Period>) -> FacilityCounts {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for r in records.iter().filter(|r| in_period(r, period)) {
        *counts.entry(r.facility_id()).or_insert(0) += 1;
    }
    FacilityCounts::from_map(counts.into_iter().map(|(f, n)| (f.to_owned(), n)).collect())
}

/// Distinct patients per facility, counting records admitted within `period`.
pub fn patients_per_facility(records: &[StayRecord], period: Option<Period>) -> FacilityCounts {
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for r in records.iter().filter(|r| in_period(r, period)) {
        if seen.insert((r.facility_id(), r.patient_id())) {
            *counts.entry(r.facility_id()).or_insert(0) += 1;
        }
    }
    FacilityCounts::from_map(counts.into_iter().map(|(f, n)| (f.to_owned(), n)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountSummary {
    pub patients: u64,
    pub min: u64,
    pub max: u64,
    pub median: f64,
    pub mean: f64,
}

impl CountSummary {
    pub fn from_counts(mut counts: Vec<u64>) -> Option<Self> {
        if counts.is_empty() {
            return None;
        }
        counts.sort_unstable();
        let n = counts.len();
        let median = if n % 2 == 1 {
            counts[n / 2] as f64
        } else {
            (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0
        };
        let sum: u64 = counts.iter().sum();
        Some(Self {
            patients: n as u64,
            min: counts[0],
            max: counts[n - 1],
            median,
            mean: sum as f64 / n as f64,
        })
    }
}

/// Hospitalisation counts per patient, summarised per gender. A patient's
/// gender is the one on their first record in input order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntrySummary {
    pub male: Option<CountSummary>,
    pub female: Option<CountSummary>,
    pub unknown: Option<CountSummary>,
    pub all: Option<CountSummary>,
}

impl EntrySummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gender,patients,min,max,median,mean\n");
        for (label, s) in [
            ("male", &self.male),
            ("female", &self.female),
            ("unknown", &self.unknown),
            ("all", &self.all),
        ] {
            match s {
                Some(s) => {
                    let _ = writeln!(
                        out,
                        "{label},{},{},{},{},{:.3}",
                        s.patients, s.min, s.max, s.median, s.mean
                    );
                }
                None => {
                    let _ = writeln!(out, "{label},0,,,,");
                }
            }
        }
        out
    }
}

pub fn entries_per_patient_summary(records: &[StayRecord]) -> EntrySummary {
    let mut per_patient: HashMap<&str, (Gender, u64)> = HashMap::new();
    for r in records {
        per_patient.entry(r.patient_id()).or_insert((r.gender(), 0)).1 += 1;
    }
    let mut by_gender: BTreeMap<Gender, Vec<u64>> = BTreeMap::new();
    let mut all = Vec::with_capacity(per_patient.len());
    for (gender, n) in per_patient.into_values() {
        by_gender.entry(gender).or_default().push(n);
        all.push(n);
    }
    let mut take = |g| CountSummary::from_counts(by_gender.remove(&g).unwrap_or_default());
    EntrySummary {
        male: take(Gender::Male),
        female: take(Gender::Female),
        unknown: take(Gender::Unknown),
        all: CountSummary::from_counts(all),
    }
}

pub fn stay_duration_histogram(records: &[StayRecord]) -> Histogram<u32> {
    records.iter().map(stay_duration).collect()
}

/// Days at home between consecutive episodes, overlap groups merged to
/// their spans first.
pub fn society_duration_histogram(index: &PatientIndex) -> Histogram<u32> {
    index
        .iter()
        .flat_map(|(_, stays)| episode_gaps(stays))
        .collect()
}

/// Daily head count of one facility over an inclusive day range.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OccupancySeries {
    pub facility_id: String,
    pub start: DayIndex,
    pub counts: Vec<u32>,
}

impl OccupancySeries {
    pub fn get(&self, day: DayIndex) -> u32 {
        usize::try_from(day.days_since(self.start))
            .ok()
            .and_then(|i| self.counts.get(i).copied())
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (DayIndex, u32)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &n)| (self.start.offset(i as i32), n))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("day,count\n");
        for (d, n) in self.iter() {
            let _ = writeln!(out, "{d},{n}");
        }
        out
    }
}

/// Patients present at `facility` on each day of `range`. Stays are clipped
/// to the range; an unknown facility gives an all-zero series.
pub fn occupancy_timeseries(records: &[StayRecord], facility: &str, range: Period) -> OccupancySeries {
    let (from, to) = range;
    assert!(from <= to, "occupancy range must be ordered");
    let days = (to.days_since(from) + 1) as usize;
    let mut delta = vec![0i64; days + 1];
    for r in records.iter().filter(|r| r.facility_id() == facility) {
        let lo = r.admission().max(from);
        let hi = r.discharge().min(to);
        if lo > hi {
            continue;
        }
        delta[lo.days_since(from) as usize] += 1;
        delta[hi.days_since(from) as usize + 1] -= 1;
    }
    let mut running = 0i64;
    let counts = delta[..days]
        .iter()
        .map(|d| {
            running += d;
            running as u32
        })
        .collect();
    OccupancySeries {
        facility_id: facility.to_owned(),
        start: from,
        counts,
    }
}

/// Pairwise overlap lengths. Two-record groups contribute their single
/// pair; for larger groups every intersecting member pair is counted in a
/// separate histogram.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OverlapLengths {
    pub two_record: Histogram<u32>,
    pub multi_record: Histogram<u32>,
}

impl OverlapLengths {
    pub fn add_group(&mut self, g: &OverlapGroup) {
        match g.members() {
            [a, b] => self.two_record.add(overlap_days(a, b)),
            members => {
                for (i, a) in members.iter().enumerate() {
                    for b in &members[i + 1..] {
                        let d = overlap_days(a, b);
                        if d > 0 {
                            self.multi_record.add(d);
                        }
                    }
                }
            }
        }
    }

    pub fn merge(&mut self, other: OverlapLengths) {
        self.two_record.merge(other.two_record);
        self.multi_record.merge(other.multi_record);
    }

    pub fn combined(&self) -> Histogram<u32> {
        self.two_record.clone().merged(self.multi_record.clone())
    }

    /// `length,count,source` where source is `pair` or `multi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("length,count,source\n");
        for (d, n) in self.two_record.iter() {
            let _ = writeln!(out, "{d},{n},pair");
        }
        for (d, n) in self.multi_record.iter() {
            let _ = writeln!(out, "{d},{n},multi");
        }
        out
    }
}

pub fn overlap_length_histogram(groups: &[OverlapGroup]) -> OverlapLengths {
    let mut h = OverlapLengths::default();
    for g in groups {
        h.add_group(g);
    }
    h
}

/// Two-column `bin,count` rendering.
pub fn histogram_csv<K: Ord + std::fmt::Display>(h: &Histogram<K>) -> String {
    let mut out = String::from("bin,count\n");
    for (k, n) in h.iter() {
        let _ = writeln!(out, "{k},{n}");
    }
    out
}
