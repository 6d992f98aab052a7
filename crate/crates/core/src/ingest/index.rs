use std::cmp::Ordering;
use std::ops::Range;

use rayon::prelude::*;

use super::{RecordSet, StayRecord};

/// Stays grouped per patient.
///
/// Records are held in one contiguous vector ordered by patient id and then
/// by (admission, discharge, facility id); each patient owns a contiguous
/// slice of it. Patients iterate in ascending id order.
#[derive(Clone, Debug, Default)]
pub struct PatientIndex {
    records: Vec<StayRecord>,
    spans: Vec<Range<usize>>,
}

fn index_order(a: &StayRecord, b: &StayRecord) -> Ordering {
    a.patient_id()
        .cmp(b.patient_id())
        .then_with(|| a.sort_key().cmp(&b.sort_key()))
}

impl PatientIndex {
    pub fn from_records(mut records: Vec<StayRecord>) -> Self {
        records.par_sort_by(index_order);
        let mut spans = Vec::new();
        let mut start = 0;
        for i in 1..=records.len() {
            if i == records.len() || records[i].patient_id() != records[start].patient_id() {
                spans.push(start..i);
                start = i;
            }
        }
        Self { records, spans }
    }

    pub fn from_record_set(rs: RecordSet) -> Self {
        Self::from_records(rs.into_records())
    }

    /// Number of patients.
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// All stays, patient-major.
    pub fn records(&self) -> &[StayRecord] {
        &self.records
    }

    /// The `i`-th patient's id and sorted stays.
    pub fn patient(&self, i: usize) -> (&str, &[StayRecord]) {
        let stays = &self.records[self.spans[i].clone()];
        (stays[0].patient_id(), stays)
    }

    pub fn get(&self, patient_id: &str) -> Option<&[StayRecord]> {
        self.spans
            .binary_search_by(|span| self.records[span.start].patient_id().cmp(patient_id))
            .ok()
            .map(|i| &self.records[self.spans[i].clone()])
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, &[StayRecord])> + '_ {
        (0..self.len()).map(|i| self.patient(i))
    }

    pub fn par_iter(&self) -> impl IndexedParallelIterator<Item = (&str, &[StayRecord])> + '_ {
        (0..self.len()).into_par_iter().map(|i| self.patient(i))
    }
}

/// Builds the per-patient index over a record set. The set itself is left
/// untouched.
pub fn group_by_patient(rs: &RecordSet) -> PatientIndex {
    PatientIndex::from_records(rs.records().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::day::DayIndex;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn stay(p: &str, f: &str, a: i32, d: i32) -> StayRecord {
        StayRecord::new(p, f, DayIndex(a), DayIndex(d)).unwrap()
    }

    #[test]
    fn two_patients() {
        let rs = RecordSet::new(
            vec![
                stay("b", "F1", 0, 3),
                stay("a", "F1", 5, 6),
                stay("b", "F2", 9, 9),
                stay("a", "F3", 1, 2),
                stay("b", "F1", 4, 4),
            ],
            "t",
        );
        let idx = group_by_patient(&rs);
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.get("a").unwrap().len(), 2);
        assert_eq!(idx.get("b").unwrap().len(), 3);
        assert!(idx.get("c").is_none());
        assert_eq!(idx.records().len(), rs.len());
        let ids: Vec<_> = idx.iter().map(|(p, _)| p).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn empty() {
        let idx = group_by_patient(&RecordSet::default());
        assert!(idx.is_empty());
        assert_eq!(idx.iter().count(), 0);
    }

    #[test]
    fn shuffled_input_is_sorted_per_patient() {
        let mut stays = Vec::new();
        for p in 0..5 {
            for k in 0..12 {
                let a = (k * 7 + p * 3) % 40;
                let f = format!("F{}", (k + p) % 3);
                stays.push(stay(&format!("p{p}"), &f, a, a + k % 4));
                stays.push(stay(&format!("p{p}"), "F0", a, a + k % 4));
            }
        }
        let mut oracle: std::collections::BTreeMap<String, Vec<(i32, i32, String)>> =
            Default::default();
        for s in &stays {
            oracle.entry(s.patient_id().to_owned()).or_default().push((
                s.admission().0,
                s.discharge().0,
                s.facility_id().to_owned(),
            ));
        }
        for v in oracle.values_mut() {
            v.sort();
        }

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            stays.shuffle(&mut rng);
            let idx = group_by_patient(&RecordSet::new(stays.clone(), "t"));
            let got: std::collections::BTreeMap<_, _> = idx
                .iter()
                .map(|(p, list)| {
                    let v: Vec<_> = list
                        .iter()
                        .map(|s| (s.admission().0, s.discharge().0, s.facility_id().to_owned()))
                        .collect();
                    (p.to_owned(), v)
                })
                .collect();
            assert_eq!(got, oracle);
        }
    }
}
