//! Transfer inference and the facility network.
//!
//! Direct transfers (no night at home in between) are read off classified
//! overlap groups. Indirect transfers connect consecutive hospital episodes
//! of a patient across a stay at home.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{ClassifiedGroup, OverlapClass};
use crate::day::DayIndex;
use crate::histogram::Histogram;
use crate::ingest::{PatientIndex, StayRecord};
use crate::temporal::{episodes, stay_duration};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown export format `{0}` (expected `csv` or `dot`)")]
    UnknownFormat(String),
    #[error("unknown transfer kind `{0}`")]
    UnknownKind(String),
    #[error("edge list: {0}")]
    EdgeList(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferKind {
    Direct,
    Indirect,
}

impl TransferKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransferKind::Direct => "direct",
            TransferKind::Indirect => "indirect",
        }
    }
}

impl fmt::Display for TransferKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransferKind {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(TransferKind::Direct),
            "indirect" => Ok(TransferKind::Indirect),
            other => Err(NetworkError::UnknownKind(other.to_owned())),
        }
    }
}

/// One patient movement between facilities.
///
/// `day` is the handover day for direct transfers and the destination's
/// admission day for indirect ones; `gap_days` counts full days at home and
/// is 0 for direct transfers.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransferEvent {
    pub patient_id: Arc<str>,
    pub from_facility: Arc<str>,
    pub to_facility: Arc<str>,
    pub kind: TransferKind,
    pub day: DayIndex,
    pub gap_days: u32,
}

impl TransferEvent {
    fn direct(from: &StayRecord, to: &StayRecord, day: DayIndex) -> Self {
        Self {
            patient_id: from.patient_arc().clone(),
            from_facility: from.facility_arc().clone(),
            to_facility: to.facility_arc().clone(),
            kind: TransferKind::Direct,
            day,
            gap_days: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectOptions {
    /// Emit the return leg of a temporary transfer as well as the outbound one.
    pub temporary_round_trip: bool,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            temporary_round_trip: true,
        }
    }
}

/// Direct transfers implied by one classified group, appended to `out`.
pub fn direct_events(cg: &ClassifiedGroup, opts: DirectOptions, out: &mut Vec<TransferEvent>) {
    let [a, b] = cg.group.members() else {
        return;
    };
    match cg.class {
        OverlapClass::StandardTransfer => {
            let (first, second) = if a.admission() <= b.admission() { (a, b) } else { (b, a) };
            out.push(TransferEvent::direct(first, second, second.admission()));
        }
        OverlapClass::FirstDayTransfer => {
            let (short, long) = if stay_duration(a) == 1 { (a, b) } else { (b, a) };
            out.push(TransferEvent::direct(short, long, short.admission()));
        }
        OverlapClass::LastDayTransfer => {
            let (short, long) = if stay_duration(a) == 1 { (a, b) } else { (b, a) };
            out.push(TransferEvent::direct(long, short, short.admission()));
        }
        OverlapClass::TemporaryTransfer => {
            let (inner, outer) = if crate::classify::strictly_inside(a, b) { (a, b) } else { (b, a) };
            out.push(TransferEvent::direct(outer, inner, inner.admission()));
            if opts.temporary_round_trip {
                out.push(TransferEvent::direct(inner, outer, inner.discharge()));
            }
        }
        OverlapClass::SimultaneousSameFacility
        | OverlapClass::TwoAdmissionsSameFacility
        | OverlapClass::SimultaneousTwoFacilities
        | OverlapClass::UnknownTwoFacilities
        | OverlapClass::UnknownMultiple(_) => {}
    }
}

pub fn infer_direct(groups: &[ClassifiedGroup], opts: DirectOptions) -> Vec<TransferEvent> {
    let mut out = Vec::new();
    for g in groups {
        direct_events(g, opts, &mut out);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndirectOptions {
    /// Longest stay at home, in days, still counted as a transfer.
    pub max_gap: Option<u32>,
    /// Keep readmissions to the facility the patient was discharged from.
    pub include_readmissions: bool,
}

impl Default for IndirectOptions {
    fn default() -> Self {
        Self {
            max_gap: None,
            include_readmissions: true,
        }
    }
}

/// Indirect transfers of one patient's admission-sorted stays.
///
/// Consecutive episodes are linked from the stay with the latest discharge
/// in the earlier episode to the stay with the earliest admission in the
/// later one (see [`crate::temporal::Episode`] for tie-breaking).
pub fn indirect_events(stays: &[StayRecord], opts: IndirectOptions, out: &mut Vec<TransferEvent>) {
    for w in episodes(stays).windows(2) {
        let gap = (w[1].start.days_since(w[0].end) - 1) as u32;
        if opts.max_gap.is_some_and(|m| gap > m) {
            continue;
        }
        let from = w[0].exit_stay();
        let to = w[1].entry_stay();
        if !opts.include_readmissions && from.facility_id() == to.facility_id() {
            continue;
        }
        out.push(TransferEvent {
            patient_id: from.patient_arc().clone(),
            from_facility: from.facility_arc().clone(),
            to_facility: to.facility_arc().clone(),
            kind: TransferKind::Indirect,
            day: to.admission(),
            gap_days: gap,
        });
    }
}

pub fn infer_indirect(index: &PatientIndex, opts: IndirectOptions) -> Vec<TransferEvent> {
    let mut out = Vec::new();
    for (_, stays) in index.iter() {
        indirect_events(stays, opts, &mut out);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub from: String,
    pub to: String,
    pub kind: TransferKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EdgeStats {
    pub count: u64,
    /// Days at home per transfer; empty for direct edges.
    pub gaps: Histogram<u32>,
}

/// Weighted directed multigraph of facilities, one edge per
/// (source, destination, kind).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FacilityNetwork {
    nodes: BTreeSet<String>,
    edges: BTreeMap<EdgeKey, EdgeStats>,
}

impl FacilityNetwork {
    pub fn add_event(&mut self, e: &TransferEvent) {
        let key = EdgeKey {
            from: e.from_facility.to_string(),
            to: e.to_facility.to_string(),
            kind: e.kind,
        };
        if !self.nodes.contains(&key.from) {
            self.nodes.insert(key.from.clone());
        }
        if !self.nodes.contains(&key.to) {
            self.nodes.insert(key.to.clone());
        }
        let stats = self.edges.entry(key).or_default();
        stats.count += 1;
        if e.kind == TransferKind::Indirect {
            stats.gaps.add(e.gap_days);
        }
    }

    pub fn merge(&mut self, other: FacilityNetwork) {
        self.nodes.extend(other.nodes);
        for (k, s) in other.edges {
            let mine = self.edges.entry(k).or_default();
            mine.count += s.count;
            mine.gaps.merge(s.gaps);
        }
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<EdgeKey, EdgeStats> {
        &self.edges
    }

    pub fn count(&self, from: &str, to: &str, kind: TransferKind) -> u64 {
        self.edges
            .get(&EdgeKey {
                from: from.to_owned(),
                to: to.to_owned(),
                kind,
            })
            .map_or(0, |s| s.count)
    }

    /// Sum of edge counts, i.e. the number of events the network was built from.
    pub fn total_events(&self) -> u64 {
        self.edges.values().map(|s| s.count).sum()
    }

    /// Edge counts keyed by (from, to, kind).
    pub fn edge_counts(&self) -> BTreeMap<EdgeKey, u64> {
        self.edges.iter().map(|(k, s)| (k.clone(), s.count)).collect()
    }

    /// Sub-network with only edges of `kind`; nodes are the endpoints that
    /// remain.
    pub fn only(&self, kind: TransferKind) -> FacilityNetwork {
        let edges: BTreeMap<_, _> = self
            .edges
            .iter()
            .filter(|(k, _)| k.kind == kind)
            .map(|(k, s)| (k.clone(), s.clone()))
            .collect();
        let nodes = edges
            .keys()
            .flat_map(|k| [k.from.clone(), k.to.clone()])
            .collect();
        FacilityNetwork { nodes, edges }
    }
}

pub fn build_network(events: &[TransferEvent]) -> FacilityNetwork {
    let mut net = FacilityNetwork::default();
    for e in events {
        net.add_event(e);
    }
    net
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Dot,
}

impl FromStr for ExportFormat {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "dot" => Ok(ExportFormat::Dot),
            _ => Err(NetworkError::UnknownFormat(s.to_owned())),
        }
    }
}

/// Serialises the network. Both formats are UTF-8 with LF line endings and
/// list edges in (from, to, kind) order.
pub fn export_network(net: &FacilityNetwork, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Csv => edge_list_csv(net),
        ExportFormat::Dot => dot(net).into_bytes(),
    }
}

fn edge_list_csv(net: &FacilityNetwork) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["from", "to", "kind", "count"])
        .expect("writing to memory");
    for (k, s) in &net.edges {
        w.write_record([k.from.as_str(), k.to.as_str(), k.kind.as_str(), &s.count.to_string()])
            .expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

/// Per-edge at-home durations of indirect edges: `from,to,gap,count`.
pub fn gap_histograms_csv(net: &FacilityNetwork) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["from", "to", "gap", "count"])
        .expect("writing to memory");
    for (k, s) in net.edges.iter().filter(|(k, _)| k.kind == TransferKind::Indirect) {
        for (gap, n) in s.gaps.iter() {
            w.write_record([k.from.as_str(), k.to.as_str(), &gap.to_string(), &n.to_string()])
                .expect("writing to memory");
        }
    }
    w.into_inner().expect("writing to memory")
}

fn dot_id(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn dot(net: &FacilityNetwork) -> String {
    let mut out = String::from("digraph transfers {\n");
    for n in &net.nodes {
        let _ = writeln!(out, "  {};", dot_id(n));
    }
    for (k, s) in &net.edges {
        let style = match k.kind {
            TransferKind::Direct => "solid",
            TransferKind::Indirect => "dashed",
        };
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{}\", kind=\"{}\", style={}];",
            dot_id(&k.from),
            dot_id(&k.to),
            s.count,
            k.kind,
            style
        );
    }
    out.push_str("}\n");
    out
}

/// Reads an edge list written by [`export_network`] back into edge counts.
pub fn parse_edge_list_csv(bytes: &[u8]) -> Result<BTreeMap<EdgeKey, u64>, NetworkError> {
    let mut r = csv::Reader::from_reader(bytes);
    let headers = r.headers().map_err(|e| NetworkError::EdgeList(e.to_string()))?;
    if headers != vec!["from", "to", "kind", "count"] {
        return Err(NetworkError::EdgeList(format!("unexpected header {headers:?}")));
    }
    let mut edges = BTreeMap::new();
    for row in r.records() {
        let row = row.map_err(|e| NetworkError::EdgeList(e.to_string()))?;
        let count = row[3]
            .parse()
            .map_err(|_| NetworkError::EdgeList(format!("bad count `{}`", &row[3])))?;
        let key = EdgeKey {
            from: row[0].to_owned(),
            to: row[1].to_owned(),
            kind: row[2].parse()?,
        };
        edges.insert(key, count);
    }
    Ok(edges)
}
