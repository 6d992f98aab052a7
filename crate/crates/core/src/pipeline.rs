//! End-to-end analysis over a patient index.
//!
//! Patients are independent, so the per-patient work (overlap grouping,
//! classification, transfer inference, at-home gaps) runs as a rayon fold
//! whose partial results are merged in patient order. Output is identical
//! for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{ClassifiedGroup, DiagnosisMatch, Tabulation};
use crate::histogram::Histogram;
use crate::ingest::{PatientIndex, StayRecord};
use crate::network::{
    direct_events, indirect_events, DirectOptions, FacilityNetwork, IndirectOptions, TransferEvent,
};
use crate::stats::{
    self, EntrySummary, FacilityCounts, OccupancySeries, Period,
};
use crate::temporal::{connected_overlap_groups, episode_gaps};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub diagnosis_match: DiagnosisMatch,
    pub direct: DirectOptions,
    pub indirect: IndirectOptions,
    /// Keep classified groups and transfer events, not just their aggregates.
    pub keep_details: bool,
}

/// Per-patient results folded over the whole index.
#[derive(Clone, Debug, Default)]
pub struct PatientAnalysis {
    pub tabulation: Tabulation,
    pub society: Histogram<u32>,
    pub network: FacilityNetwork,
    pub direct_count: u64,
    pub indirect_count: u64,
    /// Filled only with `keep_details`.
    pub groups: Vec<ClassifiedGroup>,
    pub direct: Vec<TransferEvent>,
    pub indirect: Vec<TransferEvent>,
}

impl PatientAnalysis {
    fn new(cfg: &PipelineConfig) -> Self {
        Self {
            tabulation: Tabulation::new(cfg.diagnosis_match),
            ..Self::default()
        }
    }

    fn add_patient(&mut self, stays: &[StayRecord], cfg: &PipelineConfig) {
        self.society.extend(episode_gaps(stays));

        let mut direct = Vec::new();
        for group in connected_overlap_groups(stays) {
            let cg = ClassifiedGroup::classify(group);
            self.tabulation.add(&cg.group, cg.class);
            direct_events(&cg, cfg.direct, &mut direct);
            if cfg.keep_details {
                self.groups.push(cg);
            }
        }
        let mut indirect = Vec::new();
        indirect_events(stays, cfg.indirect, &mut indirect);

        for e in direct.iter().chain(&indirect) {
            self.network.add_event(e);
        }
        self.direct_count += direct.len() as u64;
        self.indirect_count += indirect.len() as u64;
        if cfg.keep_details {
            self.direct.append(&mut direct);
            self.indirect.append(&mut indirect);
        }
    }

    fn merge(mut self, other: PatientAnalysis) -> Self {
        self.tabulation.merge(other.tabulation);
        self.society.merge(other.society);
        self.network.merge(other.network);
        self.direct_count += other.direct_count;
        self.indirect_count += other.indirect_count;
        self.groups.extend(other.groups);
        self.direct.extend(other.direct);
        self.indirect.extend(other.indirect);
        self
    }
}

pub fn analyze_patients(index: &PatientIndex, cfg: &PipelineConfig) -> PatientAnalysis {
    index
        .par_iter()
        .fold(
            || PatientAnalysis::new(cfg),
            |mut acc, (_, stays)| {
                acc.add_patient(stays, cfg);
                acc
            },
        )
        .reduce(|| PatientAnalysis::new(cfg), PatientAnalysis::merge)
}

/// Record-level statistics that do not need per-patient grouping.
#[derive(Clone, Debug)]
pub struct RecordStats {
    pub admissions: FacilityCounts,
    pub patients: FacilityCounts,
    pub entries: EntrySummary,
    pub stay_durations: Histogram<u32>,
    pub occupancy: Vec<OccupancySeries>,
}

/// Computes the record-level statistics; occupancy series are produced for
/// the `top_n` facilities by admissions over the records' full date span.
pub fn record_stats(records: &[StayRecord], top_n: usize) -> RecordStats {
    let admissions = stats::admissions_per_facility(records, None);
    let patients = stats::patients_per_facility(records, None);
    let entries = stats::entries_per_patient_summary(records);
    let stay_durations = stats::stay_duration_histogram(records);
    let occupancy = match date_span(records) {
        Some(span) => admissions
            .top(top_n)
            .into_iter()
            .map(|(f, _)| stats::occupancy_timeseries(records, f, span))
            .collect(),
        None => Vec::new(),
    };
    RecordStats {
        admissions,
        patients,
        entries,
        stay_durations,
        occupancy,
    }
}

/// Earliest admission and latest discharge.
pub fn date_span(records: &[StayRecord]) -> Option<Period> {
    let start = records.iter().map(|r| r.admission()).min()?;
    let end = records.iter().map(|r| r.discharge()).max()?;
    Some((start, end))
}
