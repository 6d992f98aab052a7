//! Seeded synthetic cohorts with planted ground truth.
//!
//! Every patient draws from its own ChaCha8 stream: the generator seeds
//! `ChaCha8Rng` with `GenConfig::seed` and selects stream number = patient
//! ordinal, so a patient's stays depend only on (seed, ordinal) and patients
//! can be produced in any order or in parallel. Row shuffling uses stream
//! `u64::MAX`. ChaCha8 output is specified bit-for-bit, so cohorts are
//! identical across platforms.
//!
//! A patient's history is a sequence of episodes separated by at least one
//! day at home. Background episodes are single stays; each of the first
//! `plant.total()` patients additionally carries one planted overlap
//! episode built from a fixed layout per class. The expected classes,
//! direct and indirect transfers and histograms are recorded in
//! [`GroundTruth`] without running any of the analysis code.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::OverlapClass;
use crate::day::DayIndex;
use crate::ingest::ColumnMap;
use crate::network::TransferKind;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("infeasible generator config: {0}")]
    Infeasible(String),
    #[error("invalid generator config: {0}")]
    Invalid(String),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Number of planted overlap episodes per class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantCounts {
    pub standard_transfer: u32,
    pub first_day_transfer: u32,
    pub last_day_transfer: u32,
    pub simultaneous_same_facility: u32,
    pub temporary_transfer: u32,
    pub simultaneous_two_facilities: u32,
    pub unknown_two_facilities: u32,
    pub two_admissions_same_facility: u32,
    pub unknown_multiple_3: u32,
    pub unknown_multiple_4: u32,
}

impl PlantCounts {
    /// `n` of each of the ten classes.
    pub fn uniform(n: u32) -> Self {
        Self {
            standard_transfer: n,
            first_day_transfer: n,
            last_day_transfer: n,
            simultaneous_same_facility: n,
            temporary_transfer: n,
            simultaneous_two_facilities: n,
            unknown_two_facilities: n,
            two_admissions_same_facility: n,
            unknown_multiple_3: n,
            unknown_multiple_4: n,
        }
    }

    fn per_template(&self) -> [(Template, u32); 10] {
        use Template::*;
        [
            (Standard, self.standard_transfer),
            (FirstDay, self.first_day_transfer),
            (LastDay, self.last_day_transfer),
            (SimultaneousSame, self.simultaneous_same_facility),
            (Temporary, self.temporary_transfer),
            (SimultaneousTwo, self.simultaneous_two_facilities),
            (UnknownTwo, self.unknown_two_facilities),
            (TwoAdmissionsSame, self.two_admissions_same_facility),
            (Multiple3, self.unknown_multiple_3),
            (Multiple4, self.unknown_multiple_4),
        ]
    }

    pub fn total(&self) -> u64 {
        self.per_template().iter().map(|(_, n)| u64::from(*n)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    /// Number of patients. Ignored when `records` is set.
    pub patients: u64,
    /// Generate patients until exactly this many valid records exist.
    pub records: Option<u64>,
    pub facilities: u32,
    /// First admissions of each patient fall in `[start, end]`.
    pub start: DayIndex,
    pub end: DayIndex,
    pub plant: PlantCounts,
    pub mean_stay_days: f64,
    pub mean_gap_days: f64,
    pub mean_episodes: f64,
    /// Relative weight per diagnosis group index; missing groups get weight 0.
    pub diagnosis_weights: BTreeMap<u8, f64>,
    /// Facility `i` lies in `regions[i % regions.len()]`.
    pub regions: Vec<String>,
    /// Extra rows without any diagnosis code.
    pub no_diagnosis_rows: u64,
    /// Extra rows with unusable dates.
    pub malformed_rows: u64,
    /// Shuffle rows instead of writing them patient by patient.
    pub shuffle: bool,
    /// List every expected transfer event in the ground truth (the transfer
    /// matrix is always present).
    pub truth_events: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            patients: 1000,
            records: None,
            facilities: 50,
            start: DayIndex::from_ymd(2008, 1, 1).unwrap(),
            end: DayIndex::from_ymd(2015, 12, 31).unwrap(),
            plant: PlantCounts::default(),
            mean_stay_days: 7.0,
            mean_gap_days: 120.0,
            mean_episodes: 3.0,
            diagnosis_weights: (1..=19).chain([21]).map(|g| (g, 1.0)).collect(),
            regions: vec!["03".to_owned()],
            no_diagnosis_rows: 0,
            malformed_rows: 0,
            shuffle: true,
            truth_events: true,
        }
    }
}

/// Overlap layouts. Offsets are days from the episode start; members name a
/// facility slot, and distinct slots map to distinct facilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Template {
    Standard,
    FirstDay,
    LastDay,
    SimultaneousSame,
    Temporary,
    SimultaneousTwo,
    UnknownTwo,
    TwoAdmissionsSame,
    Multiple3,
    Multiple4,
}

struct Layout {
    /// (facility slot, admission offset, discharge offset)
    members: &'static [(usize, i32, i32)],
    /// (from member, to member, day offset)
    direct: &'static [(usize, usize, i32)],
    class: OverlapClass,
}

impl Template {
    fn layout(self, variant: u32) -> Layout {
        use OverlapClass::*;
        match self {
            Template::Standard => Layout {
                members: &[(0, 2, 7), (1, 0, 2)],
                direct: &[(1, 0, 2)],
                class: StandardTransfer,
            },
            Template::FirstDay => Layout {
                members: &[(0, 0, 0), (1, 0, 19)],
                direct: &[(0, 1, 0)],
                class: FirstDayTransfer,
            },
            Template::LastDay => Layout {
                members: &[(0, 20, 20), (1, 0, 20)],
                direct: &[(1, 0, 20)],
                class: LastDayTransfer,
            },
            Template::SimultaneousSame => Layout {
                members: &[(0, 0, 20), (0, 0, 20)],
                direct: &[],
                class: SimultaneousSameFacility,
            },
            Template::Temporary => Layout {
                members: &[(0, 15, 19), (1, 0, 37)],
                direct: &[(1, 0, 15), (0, 1, 19)],
                class: TemporaryTransfer,
            },
            Template::SimultaneousTwo => Layout {
                members: &[(0, 0, 7), (1, 0, 7)],
                direct: &[],
                class: SimultaneousTwoFacilities,
            },
            Template::UnknownTwo if variant.is_multiple_of(2) => Layout {
                members: &[(0, 0, 6), (1, 0, 2)],
                direct: &[],
                class: UnknownTwoFacilities,
            },
            Template::UnknownTwo => Layout {
                members: &[(0, 0, 13), (1, 9, 14)],
                direct: &[],
                class: UnknownTwoFacilities,
            },
            Template::TwoAdmissionsSame => Layout {
                members: &[(0, 0, 9), (0, 5, 14)],
                direct: &[],
                class: TwoAdmissionsSameFacility,
            },
            Template::Multiple3 => Layout {
                members: &[(0, 20, 23), (1, 23, 30), (2, 0, 45)],
                direct: &[],
                class: UnknownMultiple(3),
            },
            Template::Multiple4 => Layout {
                members: &[(0, 0, 30), (1, 5, 12), (2, 10, 15), (3, 11, 20)],
                direct: &[],
                class: UnknownMultiple(4),
            },
        }
    }

    fn slots(self) -> usize {
        self.layout(0)
            .members
            .iter()
            .map(|m| m.0 + 1)
            .max()
            .unwrap_or(0)
    }
}

/// Representative ICD-10 codes per diagnosis group.
const CODES: &[(u8, &[&str])] = &[
    (1, &["A09", "A41.9", "B34.9"]),
    (2, &["C34.1", "C50.9", "D37.0"]),
    (3, &["D50.9", "D64.9"]),
    (4, &["E11.9", "E86"]),
    (5, &["F10.2", "F20.0", "F32.1"]),
    (6, &["G40.9", "G45.9"]),
    (7, &["H25.1", "H40.1"]),
    (8, &["H66.9", "H81.1"]),
    (9, &["I10", "I21.0", "I50.9", "I63.9"]),
    (10, &["J18.9", "J44.1"]),
    (11, &["K35.8", "K80.2"]),
    (12, &["L03.1", "L89.3"]),
    (13, &["M16.1", "M54.5"]),
    (14, &["N18.5", "N39.0"]),
    (15, &["O70.1", "O80"]),
    (16, &["P07.3", "P59.9"]),
    (17, &["Q21.1", "Q65.0"]),
    (18, &["R07.4", "R55"]),
    (19, &["S72.0", "T81.4"]),
    (21, &["Z38.0", "Z51.1"]),
];

#[derive(Clone, Copy, Debug)]
struct Stay {
    facility: u32,
    admission: i32,
    discharge: i32,
    code: (u8, u8),
}

struct Episode {
    stays: Vec<Stay>,
    planted: Option<(Template, u32)>,
}

struct PatientPlan {
    ordinal: u64,
    male: bool,
    episodes: Vec<Episode>,
    /// (episode index, first day at home) gaps are derived from episodes.
    planted_direct: Vec<(u32, u32, i32)>,
}

impl PatientPlan {
    fn record_count(&self) -> u64 {
        self.episodes.iter().map(|e| e.stays.len() as u64).sum()
    }
}

struct Sampler {
    stay: Geometric,
    gap: Geometric,
    episodes: Geometric,
    diagnosis: WeightedIndex<f64>,
    diagnosis_groups: Vec<usize>,
}

impl Sampler {
    fn new(cfg: &GenConfig) -> Result<Self, GenError> {
        let geometric = |mean: f64, offset: f64, what: &str| {
            let p = 1.0 / (mean + offset);
            Geometric::new(p).map_err(|_| GenError::Invalid(format!("{what} must be ≥ {}", 1.0 - offset)))
        };
        let mut groups = Vec::new();
        let mut weights = Vec::new();
        for (i, (group, _)) in CODES.iter().enumerate() {
            let w = cfg.diagnosis_weights.get(group).copied().unwrap_or(0.0);
            groups.push(i);
            weights.push(w);
        }
        let diagnosis = WeightedIndex::new(&weights)
            .map_err(|e| GenError::Invalid(format!("diagnosis weights: {e}")))?;
        Ok(Self {
            stay: geometric(cfg.mean_stay_days, 0.0, "mean_stay_days")?,
            gap: geometric(cfg.mean_gap_days, 1.0, "mean_gap_days")?,
            episodes: geometric(cfg.mean_episodes, 0.0, "mean_episodes")?,
            diagnosis,
            diagnosis_groups: groups,
        })
    }

    fn code(&self, rng: &mut ChaCha8Rng) -> (u8, u8) {
        let g = self.diagnosis_groups[self.diagnosis.sample(rng)];
        let n = CODES[g].1.len();
        (g as u8, rng.random_range(0..n) as u8)
    }
}

/// Which template, if any, the patient with this ordinal carries.
fn planted_for(plant: &PlantCounts, ordinal: u64) -> Option<(Template, u32)> {
    let mut base = 0u64;
    for (t, n) in plant.per_template() {
        if ordinal < base + u64::from(n) {
            return Some((t, (ordinal - base) as u32));
        }
        base += u64::from(n);
    }
    None
}

fn plan_patient(cfg: &GenConfig, sampler: &Sampler, ordinal: u64) -> PatientPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(ordinal);
    let male = rng.random_bool(0.5);
    let n_episodes = 1 + sampler.episodes.sample(&mut rng).min(200) as usize;
    let planted = planted_for(&cfg.plant, ordinal);
    let planted_at = planted.map(|_| rng.random_range(0..n_episodes));
    let span = (cfg.end.0 - cfg.start.0) as u32 + 1;
    let mut day = cfg.start.0 + rng.random_range(0..span) as i32;

    let mut episodes = Vec::with_capacity(n_episodes);
    let mut planted_direct = Vec::new();
    for k in 0..n_episodes {
        if k > 0 {
            day += 1 + sampler.gap.sample(&mut rng).min(5000) as i32;
        }
        let episode = match (planted, planted_at) {
            (Some((template, variant)), Some(at)) if at == k => {
                let layout = template.layout(variant);
                let facilities = distinct_facilities(&mut rng, cfg.facilities, template.slots());
                let stays: Vec<Stay> = layout
                    .members
                    .iter()
                    .map(|&(slot, a, d)| Stay {
                        facility: facilities[slot],
                        admission: day + a,
                        discharge: day + d,
                        code: sampler.code(&mut rng),
                    })
                    .collect();
                for &(from, to, offset) in layout.direct {
                    planted_direct.push((from as u32, to as u32, day + offset));
                }
                Episode {
                    stays,
                    planted: Some((template, variant)),
                }
            }
            _ => {
                let len = sampler.stay.sample(&mut rng).min(365) as i32;
                Episode {
                    stays: vec![Stay {
                        facility: rng.random_range(0..cfg.facilities),
                        admission: day,
                        discharge: day + len,
                        code: sampler.code(&mut rng),
                    }],
                    planted: None,
                }
            }
        };
        day = episode.stays.iter().map(|s| s.discharge).max().unwrap();
        episodes.push(episode);
    }
    PatientPlan {
        ordinal,
        male,
        episodes,
        planted_direct,
    }
}

fn distinct_facilities(rng: &mut ChaCha8Rng, facilities: u32, n: usize) -> Vec<u32> {
    rand::seq::index::sample(rng, facilities as usize, n)
        .into_iter()
        .map(|i| i as u32)
        .collect()
}

/// One expected overlap group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedGroup {
    pub patient_id: String,
    /// Data-row ordinals (0-based, header excluded) of the members.
    pub rows: Vec<u32>,
    pub class: OverlapClass,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpectedTransfer {
    pub patient_id: String,
    pub from: String,
    pub to: String,
    pub kind: TransferKind,
    pub day: DayIndex,
    pub gap_days: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub from: String,
    pub to: String,
    pub kind: TransferKind,
    pub count: u64,
}

/// What the pipeline must recover from a generated cohort, assuming the
/// default pipeline options (temporary transfers emit both legs; indirect
/// transfers include readmissions and have no gap cap).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub patients: u64,
    pub total_rows: u64,
    pub records: u64,
    pub dropped_no_diagnosis: u64,
    pub dropped_malformed: u64,
    pub planted_classes: BTreeMap<OverlapClass, u64>,
    pub groups: Vec<PlantedGroup>,
    /// Sorted; empty unless `truth_events` was set.
    pub transfers: Vec<ExpectedTransfer>,
    pub transfer_matrix: Vec<MatrixEntry>,
    pub direct_transfers: u64,
    pub indirect_transfers: u64,
    pub facility_admissions: BTreeMap<String, u64>,
    pub facility_patients: BTreeMap<String, u64>,
    pub stay_durations: BTreeMap<u32, u64>,
    pub society_gaps: BTreeMap<u32, u64>,
    /// Number of patients per record count.
    pub records_per_patient: BTreeMap<u64, u64>,
}

pub fn patient_name(ordinal: u64) -> String {
    format!("P{ordinal:08}")
}

pub fn facility_name(index: u32) -> String {
    format!("F{index:04}")
}

fn check(cfg: &GenConfig) -> Result<(), GenError> {
    if cfg.end < cfg.start {
        return Err(GenError::Invalid("date range end precedes start".into()));
    }
    if cfg.facilities == 0 {
        return Err(GenError::Invalid("at least one facility is required".into()));
    }
    if cfg.regions.is_empty() {
        return Err(GenError::Invalid("at least one region is required".into()));
    }
    for r in &cfg.regions {
        r.parse::<crate::ingest::RegionCode>().map_err(GenError::Invalid)?;
    }
    for (t, n) in cfg.plant.per_template() {
        if n > 0 && t.slots() > cfg.facilities as usize {
            return Err(GenError::Infeasible(format!(
                "planting {:?} needs {} distinct facilities, only {} configured",
                t,
                t.slots(),
                cfg.facilities
            )));
        }
    }
    let planted = cfg.plant.total();
    match cfg.records {
        None if planted > cfg.patients => Err(GenError::Infeasible(format!(
            "{planted} planted overlaps need as many patients, only {} configured",
            cfg.patients
        ))),
        Some(n) if n < 4 * planted => Err(GenError::Infeasible(format!(
            "{planted} planted overlaps need at least {} records, only {n} requested",
            4 * planted
        ))),
        _ => Ok(()),
    }
}

fn plan_cohort(cfg: &GenConfig, sampler: &Sampler) -> Result<Vec<PatientPlan>, GenError> {
    let Some(target) = cfg.records else {
        return Ok((0..cfg.patients)
            .into_par_iter()
            .map(|i| plan_patient(cfg, sampler, i))
            .collect());
    };
    let mut plans = Vec::new();
    let mut have = 0u64;
    let mut next = 0u64;
    const BATCH: u64 = 8192;
    while have < target {
        let batch: Vec<PatientPlan> = (next..next + BATCH)
            .into_par_iter()
            .map(|i| plan_patient(cfg, sampler, i))
            .collect();
        next += BATCH;
        for mut plan in batch {
            let remaining = target - have;
            if plan.record_count() > remaining {
                while plan.record_count() > remaining {
                    let last = plan.episodes.pop().expect("non-empty while over budget");
                    if last.planted.is_some() {
                        return Err(GenError::Infeasible(format!(
                            "record budget {target} exhausted before planted patient {} fits",
                            plan.ordinal
                        )));
                    }
                }
                // Pad with 1-stay episodes only if popping overshot (never
                // needed: background episodes are single stays).
            }
            if plan.episodes.is_empty() {
                break;
            }
            have += plan.record_count();
            plans.push(plan);
            if have == target {
                break;
            }
        }
    }
    let planted = cfg.plant.total();
    if (plans.len() as u64) < planted {
        return Err(GenError::Infeasible(format!(
            "record budget {target} covers only {} of {planted} planted patients",
            plans.len()
        )));
    }
    Ok(plans)
}

#[derive(Clone, Copy)]
enum RowBody {
    Valid {
        patient: u64,
        male: bool,
        stay: Stay,
    },
    NoDiagnosis {
        n: u64,
        facility: u32,
        day: i32,
    },
    Malformed {
        n: u64,
        facility: u32,
        day: i32,
    },
}

/// Writes a cohort CSV (default column layout) to `out` and returns its
/// ground truth.
pub fn generate_to<W: Write>(cfg: &GenConfig, out: W) -> Result<GroundTruth, GenError> {
    check(cfg)?;
    let sampler = Sampler::new(cfg)?;
    let plans = plan_cohort(cfg, &sampler)?;

    // Rows carry their position in plan order; `order` maps file position
    // to that index after shuffling.
    let mut rows: Vec<RowBody> = Vec::new();
    let mut first_row_of_patient = Vec::with_capacity(plans.len());
    for plan in &plans {
        first_row_of_patient.push(rows.len());
        for ep in &plan.episodes {
            for &stay in &ep.stays {
                rows.push(RowBody::Valid {
                    patient: plan.ordinal,
                    male: plan.male,
                    stay,
                });
            }
        }
    }
    let valid = rows.len() as u64;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(u64::MAX - 1);
    let span = (cfg.end.0 - cfg.start.0) as u32 + 1;
    for n in 0..cfg.no_diagnosis_rows {
        rows.push(RowBody::NoDiagnosis {
            n,
            facility: noise_rng.random_range(0..cfg.facilities),
            day: cfg.start.0 + noise_rng.random_range(0..span) as i32,
        });
    }
    for n in 0..cfg.malformed_rows {
        rows.push(RowBody::Malformed {
            n,
            facility: noise_rng.random_range(0..cfg.facilities),
            day: cfg.start.0 + noise_rng.random_range(0..span) as i32,
        });
    }

    let mut order: Vec<u32> = (0..rows.len() as u32).collect();
    if cfg.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        order.shuffle(&mut rng);
    }
    let mut position = vec![0u32; rows.len()];
    for (pos, &idx) in order.iter().enumerate() {
        position[idx as usize] = pos as u32;
    }

    write_rows(cfg, &rows, &order, out)?;

    let mut truth = GroundTruth {
        seed: cfg.seed,
        patients: plans.len() as u64,
        total_rows: rows.len() as u64,
        records: valid,
        dropped_no_diagnosis: cfg.no_diagnosis_rows,
        dropped_malformed: cfg.malformed_rows,
        ..GroundTruth::default()
    };
    collect_truth(cfg, &plans, &first_row_of_patient, &position, &mut truth);
    Ok(truth)
}

/// In-memory variant of [`generate_to`].
pub fn generate(cfg: &GenConfig) -> Result<(Vec<u8>, GroundTruth), GenError> {
    let mut bytes = Vec::new();
    let truth = generate_to(cfg, &mut bytes)?;
    Ok((bytes, truth))
}

fn write_rows<W: Write>(
    cfg: &GenConfig,
    rows: &[RowBody],
    order: &[u32],
    out: W,
) -> Result<(), GenError> {
    let mut w = std::io::BufWriter::with_capacity(1 << 20, out);
    writeln!(w, "{}", ColumnMap::DEFAULT_HEADER.join(","))?;
    let region = |f: u32| &cfg.regions[f as usize % cfg.regions.len()];
    let date = |d: i32| DayIndex(d).to_string();
    for &idx in order {
        match rows[idx as usize] {
            RowBody::Valid { patient, male, stay } => {
                let (group, k) = stay.code;
                let (gidx, codes) = CODES[group as usize];
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    patient_name(patient),
                    if male { "m" } else { "f" },
                    facility_name(stay.facility),
                    region(stay.facility),
                    date(stay.admission),
                    date(stay.discharge),
                    codes[k as usize],
                    u32::from(gidx) * 1000 + u32::from(k),
                )?;
            }
            RowBody::NoDiagnosis { n, facility, day } => {
                writeln!(
                    w,
                    "N{n:08},f,{},{},{},{},,",
                    facility_name(facility),
                    region(facility),
                    date(day),
                    date(day + 2),
                )?;
            }
            RowBody::Malformed { n, facility, day } => {
                // Alternate between inverted dates and an impossible date.
                let (adm, dis) = if n % 2 == 0 {
                    (date(day + 3), date(day))
                } else {
                    ("2013-02-30".to_owned(), date(day))
                };
                writeln!(
                    w,
                    "X{n:08},m,{},{},{adm},{dis},I10,9000",
                    facility_name(facility),
                    region(facility),
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn collect_truth(
    cfg: &GenConfig,
    plans: &[PatientPlan],
    first_row: &[usize],
    position: &[u32],
    truth: &mut GroundTruth,
) {
    let mut matrix: BTreeMap<(u32, u32, TransferKind), u64> = BTreeMap::new();
    let mut admissions: BTreeMap<u32, u64> = BTreeMap::new();
    let mut patients: BTreeMap<u32, u64> = BTreeMap::new();
    let mut events = Vec::new();

    for (plan, &first) in plans.iter().zip(first_row) {
        let pid = patient_name(plan.ordinal);
        *truth.records_per_patient.entry(plan.record_count()).or_insert(0) += 1;
        let mut facilities_seen: Vec<u32> = Vec::new();
        let mut row = first;
        let mut prev_exit: Option<(u32, i32)> = None;
        for ep in &plan.episodes {
            let rows: Vec<u32> = (row..row + ep.stays.len()).map(|i| position[i]).collect();
            row += ep.stays.len();
            for s in &ep.stays {
                *admissions.entry(s.facility).or_insert(0) += 1;
                facilities_seen.push(s.facility);
                *truth
                    .stay_durations
                    .entry((s.discharge - s.admission + 1) as u32)
                    .or_insert(0) += 1;
            }
            if let Some((template, variant)) = ep.planted {
                let layout = template.layout(variant);
                *truth.planted_classes.entry(layout.class).or_insert(0) += 1;
                truth.groups.push(PlantedGroup {
                    patient_id: pid.clone(),
                    rows,
                    class: layout.class,
                });
            }

            // Entry: earliest admission, then earliest discharge, then the
            // smaller facility name. Exit: latest discharge, then latest
            // admission, then the larger facility name.
            let entry = ep
                .stays
                .iter()
                .min_by_key(|s| (s.admission, s.discharge, facility_name(s.facility)))
                .unwrap();
            let exit = ep
                .stays
                .iter()
                .max_by_key(|s| (s.discharge, s.admission, facility_name(s.facility)))
                .unwrap();
            if let Some((from, end)) = prev_exit {
                let gap = (entry.admission - end - 1) as u32;
                *truth.society_gaps.entry(gap).or_insert(0) += 1;
                *matrix
                    .entry((from, entry.facility, TransferKind::Indirect))
                    .or_insert(0) += 1;
                truth.indirect_transfers += 1;
                if cfg.truth_events {
                    events.push(ExpectedTransfer {
                        patient_id: pid.clone(),
                        from: facility_name(from),
                        to: facility_name(entry.facility),
                        kind: TransferKind::Indirect,
                        day: DayIndex(entry.admission),
                        gap_days: gap,
                    });
                }
            }
            prev_exit = Some((exit.facility, exit.discharge));
        }

        if let Some(ep) = plan.episodes.iter().find(|e| e.planted.is_some()) {
            for &(from, to, day) in &plan.planted_direct {
                let (f, t) = (ep.stays[from as usize].facility, ep.stays[to as usize].facility);
                *matrix.entry((f, t, TransferKind::Direct)).or_insert(0) += 1;
                truth.direct_transfers += 1;
                if cfg.truth_events {
                    events.push(ExpectedTransfer {
                        patient_id: pid.clone(),
                        from: facility_name(f),
                        to: facility_name(t),
                        kind: TransferKind::Direct,
                        day: DayIndex(day),
                        gap_days: 0,
                    });
                }
            }
        }

        facilities_seen.sort_unstable();
        facilities_seen.dedup();
        for f in facilities_seen {
            *patients.entry(f).or_insert(0) += 1;
        }
    }

    events.sort();
    truth.transfers = events;
    truth.transfer_matrix = matrix
        .into_iter()
        .map(|((f, t, kind), count)| MatrixEntry {
            from: facility_name(f),
            to: facility_name(t),
            kind,
            count,
        })
        .collect();
    truth.transfer_matrix.sort();
    truth.facility_admissions = admissions
        .into_iter()
        .map(|(f, n)| (facility_name(f), n))
        .collect();
    truth.facility_patients = patients
        .into_iter()
        .map(|(f, n)| (facility_name(f), n))
        .collect();
}
