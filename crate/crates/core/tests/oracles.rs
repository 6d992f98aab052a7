//! Brute-force oracles for the interval arithmetic, overlap grouping and the
//! aggregate invariants.

use std::collections::{BTreeMap, BTreeSet};

use hospnet::classify::ClassifiedGroup;
use hospnet::network::{direct_events, indirect_events, DirectOptions, IndirectOptions};
use hospnet::stats;
use hospnet::temporal::{episode_gaps, max_daily_multiplicity};
use hospnet::{
    build_network, connected_overlap_groups, overlap_days, DayIndex, DiagnosisMatch, PatientIndex,
    StayRecord, Tabulation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stay(p: &str, f: u32, a: i32, d: i32, row: u32) -> StayRecord {
    StayRecord::new(p, format!("F{f}").as_str(), DayIndex(a), DayIndex(d))
        .unwrap()
        .with_icd10(["I10", "I21.0", "O80", "J18.9"][(row % 4) as usize])
        .with_row(row)
}

fn days(r: &StayRecord) -> BTreeSet<i32> {
    (r.admission().0..=r.discharge().0).collect()
}

#[test]
fn overlap_days_matches_day_set_intersection() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..10_000 {
        let a0 = rng.random_range(0..200);
        let b0 = rng.random_range(0..200);
        let a = stay("p", 0, a0, a0 + rng.random_range(0..60), 0);
        let b = stay("p", 1, b0, b0 + rng.random_range(0..60), 1);
        let expect = days(&a).intersection(&days(&b)).count() as u32;
        assert_eq!(overlap_days(&a, &b), expect, "case {i}");
        assert_eq!(overlap_days(&b, &a), expect);
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let root = self.find(self.0[x]);
            self.0[x] = root;
        }
        self.0[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

/// Components of size ≥ 2 under pairwise day-set intersection, as sorted
/// row lists.
fn union_find_groups(stays: &[StayRecord]) -> BTreeSet<Vec<u32>> {
    let mut uf = UnionFind((0..stays.len()).collect());
    let sets: Vec<_> = stays.iter().map(days).collect();
    for i in 0..stays.len() {
        for j in i + 1..stays.len() {
            if !sets[i].is_disjoint(&sets[j]) {
                uf.union(i, j);
            }
        }
    }
    let mut comps: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for (i, s) in stays.iter().enumerate() {
        comps.entry(uf.find(i)).or_default().push(s.row());
    }
    comps
        .into_values()
        .filter(|c| c.len() > 1)
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect()
}

fn random_patient(rng: &mut ChaCha8Rng, id: &str, max_stays: usize) -> Vec<StayRecord> {
    let n = rng.random_range(1..=max_stays);
    let horizon = rng.random_range(20..400);
    let mut stays: Vec<StayRecord> = (0..n)
        .map(|k| {
            let a = rng.random_range(0..horizon);
            stay(id, rng.random_range(0..5), a, a + rng.random_range(0..15), k as u32)
        })
        .collect();
    stays.sort_by_key(|s| (s.admission(), s.discharge(), s.facility_id().to_owned(), s.row()));
    stays
}

#[test]
fn grouping_matches_union_find() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..1_000 {
        let stays = random_patient(&mut rng, "p", 50);
        let found: BTreeSet<Vec<u32>> = connected_overlap_groups(&stays)
            .iter()
            .map(|g| {
                let mut rows: Vec<u32> = g.members().iter().map(|r| r.row()).collect();
                rows.sort_unstable();
                rows
            })
            .collect();
        assert_eq!(found, union_find_groups(&stays), "patient {i}");
    }
}

#[test]
fn multiplicity_matches_day_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let stays = random_patient(&mut rng, "p", 20);
        for g in connected_overlap_groups(&stays) {
            let mut per_day: BTreeMap<i32, u32> = BTreeMap::new();
            for m in g.members() {
                for d in days(m) {
                    *per_day.entry(d).or_insert(0) += 1;
                }
            }
            let expect = per_day.values().copied().max().unwrap();
            assert_eq!(max_daily_multiplicity(&g), expect);
            assert_eq!(g.max_multiplicity(), expect);
        }
    }
}

#[test]
fn gaps_match_day_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let stays = random_patient(&mut rng, "p", 20);
        let covered: BTreeSet<i32> = stays.iter().flat_map(days).collect();
        // Maximal runs of uncovered days strictly between covered days.
        let mut expect = Vec::new();
        let mut prev: Option<i32> = None;
        for &d in &covered {
            if let Some(p) = prev {
                if d > p + 1 {
                    expect.push((d - p - 1) as u32);
                } else {
                    // Touching-but-disjoint episodes have a gap of 0.
                    let ends_at_p = stays.iter().any(|s| s.discharge().0 == p);
                    let starts_at_d = stays.iter().any(|s| s.admission().0 == d);
                    let bridged = stays
                        .iter()
                        .any(|s| s.admission().0 <= p && s.discharge().0 >= d);
                    if ends_at_p && starts_at_d && !bridged {
                        expect.push(0);
                    }
                }
            }
            prev = Some(d);
        }
        assert_eq!(episode_gaps(&stays), expect);
    }
}

#[test]
fn conservation_on_fuzzed_cohorts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for run in 0..1_000 {
        let n_patients = rng.random_range(1..12);
        let mut records = Vec::new();
        for p in 0..n_patients {
            records.extend(random_patient(&mut rng, &format!("P{p}"), 12));
        }
        let index = PatientIndex::from_records(records.clone());

        let mut tab = Tabulation::new(DiagnosisMatch::Exact);
        let mut events = Vec::new();
        let mut n_groups = 0u64;
        let mut n_gaps = 0u64;
        let mut n_episodes = 0u64;
        for (_, stays) in index.iter() {
            let groups = connected_overlap_groups(stays);
            let grouped: usize = groups.iter().map(|g| g.len()).sum();
            n_episodes += (stays.len() - grouped + groups.len()) as u64;
            for g in groups {
                n_groups += 1;
                let cg = ClassifiedGroup::classify(g);
                tab.add(&cg.group, cg.class);
                direct_events(&cg, DirectOptions::default(), &mut events);
            }
            n_gaps += episode_gaps(stays).len() as u64;
            indirect_events(stays, IndirectOptions::default(), &mut events);
        }
        let table = tab.table();
        assert_eq!(table.total(), n_groups, "run {run}");
        assert_eq!(table.counts().values().sum::<u64>(), n_groups);
        assert_eq!(n_gaps, n_episodes - index.len() as u64);

        let net = build_network(&events);
        assert_eq!(net.total_events(), events.len() as u64);
        assert_eq!(net.edge_counts().values().sum::<u64>(), events.len() as u64);

        let n = records.len() as u64;
        assert_eq!(stats::stay_duration_histogram(&records).total(), n);
        let adm = stats::admissions_per_facility(&records, None);
        assert_eq!(adm.per_facility.values().sum::<u64>(), n);
        assert_eq!(adm.decades.0.total(), adm.per_facility.len() as u64);
        let summary = stats::entries_per_patient_summary(&records);
        assert_eq!(summary.all.as_ref().map_or(0, |s| s.patients), index.len() as u64);
    }
}
