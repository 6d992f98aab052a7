//! Reconstruction of an inter-facility patient transfer network from
//! anonymised hospitalisation admission/discharge records.
//!
//! The crate is organised as a pipeline:
//!
//! * [`ingest`] parses record files into an immutable [`RecordSet`], applies
//!   the diagnosis and region filters, and groups stays per patient.
//! * [`temporal`] does the day-interval arithmetic: durations, overlap
//!   lengths, connected overlap groups and per-day multiplicity.
//! * [`classify`] assigns overlap types, four-bit pair codes and diagnosis
//!   groups, and tabulates them.
//! * [`stats`] computes the descriptive statistics (per-facility counts,
//!   decade histograms, stay and at-home durations, occupancy).
//! * [`network`] infers direct and indirect transfers and exports the
//!   weighted directed facility network.
//! * [`syngen`] generates seeded synthetic cohorts with planted ground truth.
//! * [`pipeline`] wires the stages together with a per-patient parallel fold.

pub mod classify;
pub mod day;
pub mod histogram;
pub mod ingest;
pub mod network;
pub mod pipeline;
pub mod stats;
pub mod syngen;
pub mod temporal;

pub use classify::{
    classify_group, classify_pair, diagnosis_group, diagnosis_pair, pair_code, DiagnosisGroup,
    DiagnosisMatch, DiagnosisPair, OverlapClass, OverlapTable, PairCode, Tabulation,
};
pub use day::DayIndex;
pub use histogram::Histogram;
pub use ingest::{
    filter_region, group_by_patient, parse_records, Gender, IngestError, IngestReport,
    PatientIndex, RecordSet, RegionCode, SchemaConfig, StayRecord,
};
pub use network::{build_network, FacilityNetwork, TransferEvent, TransferKind};
pub use temporal::{connected_overlap_groups, overlap_days, stay_duration, OverlapGroup};
