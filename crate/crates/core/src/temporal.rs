//! Day-interval arithmetic on stays.
//!
//! Stays cover inclusive day ranges: a stay discharged on the day another is
//! admitted shares that day with it, which is a one-day overlap.

use std::sync::Arc;

use crate::day::DayIndex;
use crate::ingest::StayRecord;

/// Inclusive number of days covered by a stay, always at least 1.
pub fn stay_duration(r: &StayRecord) -> u32 {
    (r.discharge().days_since(r.admission()) + 1) as u32
}

/// Number of days two stays share.
pub fn overlap_days(a: &StayRecord, b: &StayRecord) -> u32 {
    let lo = a.admission().max(b.admission());
    let hi = a.discharge().min(b.discharge());
    (hi.days_since(lo) + 1).max(0) as u32
}

pub fn overlaps(a: &StayRecord, b: &StayRecord) -> bool {
    a.admission() <= b.discharge() && b.admission() <= a.discharge()
}

/// A maximal set of two or more stays of one patient that are connected
/// through pairwise day intersections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapGroup {
    patient_id: Arc<str>,
    members: Vec<StayRecord>,
    span: (DayIndex, DayIndex),
    max_multiplicity: u32,
}

impl OverlapGroup {
    /// Builds a group from stays sorted by admission. Returns `None` unless
    /// there are at least two stays of one patient forming a single
    /// connected component.
    pub fn from_members(members: Vec<StayRecord>) -> Option<Self> {
        if members.len() < 2 {
            return None;
        }
        let patient_id = members[0].patient_arc().clone();
        if members.iter().any(|m| m.patient_id() != &*patient_id) {
            return None;
        }
        let mut sorted = members.clone();
        sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        if episode_runs(&sorted).len() != 1 {
            return None;
        }
        Some(Self::from_run(members))
    }

    fn from_run(members: Vec<StayRecord>) -> Self {
        let start = members.iter().map(|m| m.admission()).min().unwrap();
        let end = members.iter().map(|m| m.discharge()).max().unwrap();
        let max_multiplicity = sweep_multiplicity(&members);
        Self {
            patient_id: members[0].patient_arc().clone(),
            members,
            span: (start, end),
            max_multiplicity,
        }
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn members(&self) -> &[StayRecord] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn span(&self) -> (DayIndex, DayIndex) {
        self.span
    }

    pub fn max_multiplicity(&self) -> u32 {
        self.max_multiplicity
    }
}

/// Splits admission-sorted stays into maximal connected runs. Because the
/// input is sorted by admission, each connected component of the overlap
/// graph is a contiguous run: a stay joins the current run iff it is
/// admitted no later than the run's latest discharge.
pub fn episode_runs(stays: &[StayRecord]) -> Vec<std::ops::Range<usize>> {
    debug_assert!(stays.windows(2).all(|w| w[0].admission() <= w[1].admission()));
    let mut runs = Vec::new();
    let mut start = 0;
    let mut reach = DayIndex(i32::MIN);
    for (i, s) in stays.iter().enumerate() {
        if i > start && s.admission() > reach {
            runs.push(start..i);
            start = i;
        }
        if i == start {
            reach = s.discharge();
        } else {
            reach = reach.max(s.discharge());
        }
    }
    if !stays.is_empty() {
        runs.push(start..stays.len());
    }
    runs
}

/// One hospital episode: a lone stay or the merged span of an overlap group.
#[derive(Clone, Copy, Debug)]
pub struct Episode<'a> {
    pub members: &'a [StayRecord],
    pub start: DayIndex,
    pub end: DayIndex,
}

impl Episode<'_> {
    /// Stay the patient leaves the episode from: latest discharge, ties to
    /// the later admission and then the larger facility id.
    pub fn exit_stay(&self) -> &StayRecord {
        self.members
            .iter()
            .max_by(|a, b| {
                (a.discharge(), a.admission(), a.facility_id())
                    .cmp(&(b.discharge(), b.admission(), b.facility_id()))
            })
            .expect("episodes are non-empty")
    }

    /// Stay the patient enters the episode through: earliest admission, ties
    /// to the earlier discharge and then the smaller facility id.
    pub fn entry_stay(&self) -> &StayRecord {
        self.members
            .iter()
            .min_by(|a, b| {
                (a.admission(), a.discharge(), a.facility_id())
                    .cmp(&(b.admission(), b.discharge(), b.facility_id()))
            })
            .expect("episodes are non-empty")
    }
}

/// Episodes of one patient's admission-sorted stays, in time order.
pub fn episodes(stays: &[StayRecord]) -> Vec<Episode<'_>> {
    episode_runs(stays)
        .into_iter()
        .map(|run| {
            let members = &stays[run];
            Episode {
                members,
                start: members[0].admission(),
                end: members.iter().map(|m| m.discharge()).max().unwrap(),
            }
        })
        .collect()
}

/// Full days spent at home between consecutive episodes.
pub fn episode_gaps(stays: &[StayRecord]) -> Vec<u32> {
    episodes(stays)
        .windows(2)
        .map(|w| (w[1].start.days_since(w[0].end) - 1) as u32)
        .collect()
}

/// Maximal connected overlap components of one patient's stays, singletons
/// excluded. `stays` must be sorted by admission.
pub fn connected_overlap_groups(stays: &[StayRecord]) -> Vec<OverlapGroup> {
    episode_runs(stays)
        .into_iter()
        .filter(|run| run.len() >= 2)
        .map(|run| OverlapGroup::from_run(stays[run].to_vec()))
        .collect()
}

/// Largest number of group members covering a single day.
pub fn max_daily_multiplicity(g: &OverlapGroup) -> u32 {
    sweep_multiplicity(g.members())
}

fn sweep_multiplicity(stays: &[StayRecord]) -> u32 {
    // Leaving events (day after discharge) sort before arrivals on the same
    // day because -1 < +1.
    let mut events: Vec<(DayIndex, i32)> = stays
        .iter()
        .flat_map(|s| [(s.admission(), 1), (s.discharge().offset(1), -1)])
        .collect();
    events.sort_unstable();
    let mut current = 0i32;
    let mut best = 0i32;
    for (_, delta) in events {
        current += delta;
        best = best.max(current);
    }
    best as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stay(f: &str, a: i32, d: i32) -> StayRecord {
        StayRecord::new("p", f, DayIndex(a), DayIndex(d)).unwrap()
    }

    fn day(s: &str) -> DayIndex {
        s.parse().unwrap()
    }

    fn dated(f: &str, a: &str, d: &str) -> StayRecord {
        StayRecord::new("p", f, day(a), day(d)).unwrap()
    }

    #[test]
    fn durations() {
        assert_eq!(stay_duration(&stay("F", 4, 4)), 1);
        assert_eq!(stay_duration(&dated("F", "2013-02-01", "2013-02-21")), 21);
        assert_eq!(stay_duration(&stay("F", 10, 16)), 7);
    }

    #[test]
    fn overlap_lengths() {
        let a = dated("F1", "2015-06-30", "2015-07-02");
        let b = dated("F0", "2015-07-02", "2015-07-07");
        assert_eq!(overlap_days(&a, &b), 1);
        assert_eq!(overlap_days(&b, &a), 1);
        assert_eq!(overlap_days(&stay("F", 0, 3), &stay("F", 5, 9)), 0);
        assert_eq!(overlap_days(&stay("F", 0, 3), &stay("F", 4, 9)), 0);
        let c = stay("F", 20, 27);
        assert_eq!(overlap_days(&c, &c), 8);
    }

    #[test]
    fn groups_exclude_isolated_stays() {
        let stays = [stay("A", 0, 5), stay("B", 5, 10), stay("C", 20, 25)];
        let groups = connected_overlap_groups(&stays);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].members(), &stays[..2]);
        assert_eq!(groups[0].span(), (DayIndex(0), DayIndex(10)));
    }

    #[test]
    fn chain_is_one_group() {
        let stays = [stay("A", 0, 5), stay("B", 5, 10), stay("C", 10, 15)];
        let groups = connected_overlap_groups(&stays);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].len(), 3);
        assert_eq!(groups[0].max_multiplicity(), 2);
    }

    #[test]
    fn no_overlaps_no_groups() {
        let stays = [stay("A", 0, 5), stay("B", 6, 10), stay("C", 12, 15)];
        assert!(connected_overlap_groups(&stays).is_empty());
        assert!(connected_overlap_groups(&[]).is_empty());
    }

    #[test]
    fn containment_run_extends_reach() {
        // The long first stay keeps the run open past the short second one.
        let stays = [stay("A", 0, 30), stay("B", 2, 3), stay("C", 20, 22)];
        let groups = connected_overlap_groups(&stays);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].len(), 3);
    }

    #[test]
    fn multiplicity_of_three_stay_group() {
        let base = day("2013-07-09");
        let s = |f: &str, a: i32, d: i32| {
            StayRecord::new("p", f, base.offset(a), base.offset(d)).unwrap()
        };
        let g = OverlapGroup::from_members(vec![s("F2", 0, 45), s("F0", 20, 23), s("F1", 23, 30)])
            .unwrap();
        assert_eq!(max_daily_multiplicity(&g), 3);
    }

    #[test]
    fn multiplicity_bounds() {
        let g = OverlapGroup::from_members(vec![stay("A", 0, 5), stay("B", 5, 8)]).unwrap();
        assert_eq!(max_daily_multiplicity(&g), 2);
        let five: Vec<_> = (0..5).map(|i| stay(&format!("F{i}"), 3, 9)).collect();
        let g = OverlapGroup::from_members(five).unwrap();
        assert_eq!(max_daily_multiplicity(&g), 5);
    }

    #[test]
    fn from_members_rejects_disconnected() {
        assert!(OverlapGroup::from_members(vec![stay("A", 0, 1), stay("B", 3, 4)]).is_none());
        assert!(OverlapGroup::from_members(vec![stay("A", 0, 1)]).is_none());
    }

    #[test]
    fn gaps_between_episodes() {
        assert_eq!(episode_gaps(&[stay("A", 0, 5), stay("B", 10, 12)]), [4]);
        assert_eq!(episode_gaps(&[stay("A", 0, 5), stay("B", 6, 9)]), [0]);
        let merged = [stay("A", 0, 5), stay("B", 3, 8), stay("C", 11, 11)];
        assert_eq!(episode_gaps(&merged), [2]);
    }

    #[test]
    fn episode_representatives() {
        let stays = [stay("B", 0, 5), stay("A", 0, 9), stay("C", 9, 9)];
        let eps = episodes(&stays);
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].entry_stay().facility_id(), "B");
        assert_eq!(eps[0].exit_stay().facility_id(), "C");
    }
}
