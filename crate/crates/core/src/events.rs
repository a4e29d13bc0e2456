//! Grouping outages into resilience events by temporal overlap.
//!
//! An event starts with an outage that begins while every component is in
//! service and ends at the first instant all components are restored again.
//! The customer performance curve of an event is the step function of total
//! customers out versus time; its area is the event's customer-hours lost.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::{OutageRecord, UnixSeconds};

/// Snapshot of one member outage inside an event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMember {
    pub id: String,
    pub start: UnixSeconds,
    pub restore: UnixSeconds,
    pub customers: u64,
}

impl EventMember {
    pub fn area_customer_seconds(&self) -> u128 {
        self.customers as u128 * (self.restore - self.start).max(0) as u128
    }
}

/// A maximal group of outages connected by temporal overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceEvent {
    pub members: Vec<EventMember>,
    /// Earliest member start.
    pub start: UnixSeconds,
    /// Latest member restore; the first instant everything is back.
    pub end: UnixSeconds,
}

impl ResilienceEvent {
    /// Builds an event from its members, deriving start and end.
    pub fn from_members(members: Vec<EventMember>) -> Self {
        debug_assert!(!members.is_empty());
        let start = members.iter().map(|m| m.start).min().unwrap_or(0);
        let end = members.iter().map(|m| m.restore).max().unwrap_or(0);
        ResilienceEvent {
            members,
            start,
            end,
        }
    }

    pub fn n_outages(&self) -> usize {
        self.members.len()
    }

    /// Area under the performance curve in exact integer customer-seconds.
    /// Equal to the sum of each member's customers x duration.
    pub fn area_customer_seconds(&self) -> u128 {
        self.members
            .iter()
            .map(EventMember::area_customer_seconds)
            .sum()
    }

    /// Customer-hours lost in the event (A_event).
    pub fn area_customer_hours(&self) -> f64 {
        self.area_customer_seconds() as f64 / 3600.0
    }
}

/// Groups filtered outages into resilience events.
///
/// Sorts by start time and sweeps with a running maximum restore: an outage
/// starting strictly before the current maximum joins the open event; an
/// outage starting at or after it closes the event and opens a new one (at
/// equality the all-restored instant has occurred).
pub fn extract_events(outages: &[OutageRecord]) -> Vec<ResilienceEvent> {
    let mut sorted: Vec<&OutageRecord> = outages.iter().collect();
    sorted.sort_by(|a, b| {
        (a.start, a.restore, a.id.as_str()).cmp(&(b.start, b.restore, b.id.as_str()))
    });

    let mut events = Vec::new();
    let mut current: Vec<EventMember> = Vec::new();
    let mut max_restore = UnixSeconds::MIN;
    for outage in sorted {
        if !current.is_empty() && outage.start >= max_restore {
            events.push(ResilienceEvent::from_members(std::mem::take(&mut current)));
        }
        current.push(EventMember {
            id: outage.id.clone(),
            start: outage.start,
            restore: outage.restore,
            customers: outage.customers,
        });
        max_restore = max_restore.max(outage.restore);
    }
    if !current.is_empty() {
        events.push(ResilienceEvent::from_members(current));
    }
    events
}

/// Step function P(t): customers out versus time within one event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceCurve {
    /// `(timestamp, level)` pairs: the curve attains `level` at `timestamp`
    /// and holds it until the next breakpoint. Zero before the first
    /// breakpoint; the last breakpoint always returns to level zero.
    pub breakpoints: Vec<(UnixSeconds, u64)>,
}

impl PerformanceCurve {
    /// Customers out at time `t`.
    pub fn level_at(&self, t: UnixSeconds) -> u64 {
        let idx = self.breakpoints.partition_point(|&(ts, _)| ts <= t);
        if idx == 0 {
            0
        } else {
            self.breakpoints[idx - 1].1
        }
    }

    /// Exact integral of the step function in customer-seconds.
    pub fn integral_customer_seconds(&self) -> u128 {
        let mut total: u128 = 0;
        for pair in self.breakpoints.windows(2) {
            let ((t0, level), (t1, _)) = (pair[0], pair[1]);
            total += level as u128 * (t1 - t0) as u128;
        }
        total
    }
}

/// Builds the performance curve of an event: +customers at each member start,
/// -customers at each member restore.
pub fn performance_curve(event: &ResilienceEvent) -> PerformanceCurve {
    let mut deltas: BTreeMap<UnixSeconds, i128> = BTreeMap::new();
    for m in &event.members {
        *deltas.entry(m.start).or_insert(0) += m.customers as i128;
        *deltas.entry(m.restore).or_insert(0) -= m.customers as i128;
    }
    let mut breakpoints = Vec::with_capacity(deltas.len());
    let mut level: i128 = 0;
    for (t, delta) in deltas {
        level += delta;
        debug_assert!(level >= 0);
        breakpoints.push((t, level.max(0) as u64));
    }
    PerformanceCurve { breakpoints }
}

/// Customer-hours lost in the event: sum over members of
/// customers x duration, converted from exact customer-seconds.
pub fn event_area(event: &ResilienceEvent) -> f64 {
    event.area_customer_hours()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::OutageRecord;
    use proptest::{prop_assert_eq, proptest};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn outage(id: &str, start: i64, restore: i64, customers: u64) -> OutageRecord {
        OutageRecord {
            id: id.to_string(),
            start,
            restore,
            customers,
            cause: String::new(),
            scheduled: false,
            lat: None,
            lon: None,
            station: None,
        }
    }

    const H: i64 = 3600;

    #[test]
    fn isolated_outage_is_one_event() {
        let events = extract_events(&[outage("a", 0, 2 * H, 50)]);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].n_outages(), 1);
        assert_eq!(events[0].start, 0);
        assert_eq!(events[0].end, 2 * H);
    }

    #[test]
    fn overlap_chain_merges_into_one_event() {
        let events = extract_events(&[
            outage("a", 0, 2 * H, 10),
            outage("b", H, 3 * H, 10),
            outage("c", 5 * H / 2, 4 * H, 10),
        ]);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].n_outages(), 3);
        assert_eq!(events[0].start, 0);
        assert_eq!(events[0].end, 4 * H);
    }

    #[test]
    fn restore_equal_to_start_splits_events() {
        // P(t) reaches zero exactly at t = 100, so the second outage opens a
        // new event.
        let events = extract_events(&[outage("a", 0, 100, 5), outage("b", 100, 200, 5)]);
        assert_eq!(events.len(), 2);
    }

    #[test]
    fn empty_input_is_empty_output() {
        assert!(extract_events(&[]).is_empty());
    }

    // Brute-force counter-sweep oracle on the merged breakpoint grid. An
    // event is a connected run of grid gaps with outages in progress; two
    // adjacent gaps stay connected only if some outage strictly straddles the
    // grid point between them, so a restore coinciding with a start splits
    // the run (the all-restored instant has occurred).
    fn oracle_grouping(outages: &[OutageRecord]) -> Vec<Vec<String>> {
        if outages.is_empty() {
            return Vec::new();
        }
        let mut times: Vec<i64> = outages
            .iter()
            .flat_map(|o| [o.start, o.restore])
            .collect();
        times.sort_unstable();
        times.dedup();
        // Component id per gap (times[i], times[i+1]).
        let mut component = vec![usize::MAX; times.len() - 1];
        let mut next_component = 0usize;
        for i in 0..times.len() - 1 {
            let (t0, t1) = (times[i], times[i + 1]);
            let covered = outages.iter().any(|o| o.start <= t0 && o.restore >= t1);
            if !covered {
                continue;
            }
            let straddles_t0 = outages.iter().any(|o| o.start < t0 && o.restore > t0);
            if i > 0 && component[i - 1] != usize::MAX && straddles_t0 {
                component[i] = component[i - 1];
            } else {
                component[i] = next_component;
                next_component += 1;
            }
        }
        let mut groups: Vec<Vec<String>> = vec![Vec::new(); next_component];
        for o in outages {
            let gap = times.partition_point(|&t| t <= o.start) - 1;
            groups[component[gap]].push(o.id.clone());
        }
        for g in &mut groups {
            g.sort();
        }
        groups
    }

    fn random_instance(rng: &mut ChaCha8Rng, max_n: usize) -> Vec<OutageRecord> {
        let n = rng.gen_range(1..=max_n);
        (0..n)
            .map(|i| {
                let start = rng.gen_range(0..500);
                let duration = rng.gen_range(1..120);
                outage(
                    &format!("o{i}"),
                    start,
                    start + duration,
                    rng.gen_range(0..100),
                )
            })
            .collect()
    }

    #[test]
    fn grouping_matches_counter_sweep_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let outages = random_instance(&mut rng, 50);
            let events = extract_events(&outages);
            let got: Vec<Vec<String>> = events
                .iter()
                .map(|e| {
                    let mut ids: Vec<String> = e.members.iter().map(|m| m.id.clone()).collect();
                    ids.sort();
                    ids
                })
                .collect();
            assert_eq!(got, oracle_grouping(&outages));
        }
    }

    #[test]
    fn curve_of_single_outage() {
        let events = extract_events(&[outage("a", 0, 2 * H, 50)]);
        let curve = performance_curve(&events[0]);
        assert_eq!(curve.breakpoints, vec![(0, 50), (2 * H, 0)]);
        assert_eq!(curve.level_at(-1), 0);
        assert_eq!(curve.level_at(0), 50);
        assert_eq!(curve.level_at(2 * H - 1), 50);
        assert_eq!(curve.level_at(2 * H), 0);
    }

    #[test]
    fn overlapping_outages_sum_to_plateau() {
        let events = extract_events(&[outage("a", 0, H, 10), outage("b", 0, H, 20)]);
        let curve = performance_curve(&events[0]);
        assert_eq!(curve.level_at(H / 2), 30);
        assert_eq!(curve.breakpoints, vec![(0, 30), (H, 0)]);
    }

    #[test]
    fn fifty_customers_for_two_hours_is_one_hundred() {
        let events = extract_events(&[outage("a", 0, 2 * H, 50)]);
        assert_eq!(event_area(&events[0]), 100.0);
    }

    #[test]
    fn zero_customers_contribute_nothing() {
        let events = extract_events(&[outage("a", 0, 2 * H, 0)]);
        assert_eq!(event_area(&events[0]), 0.0);
    }

    #[test]
    fn area_equals_curve_integral_on_random_events() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..100 {
            let outages = random_instance(&mut rng, 30);
            for event in extract_events(&outages) {
                let direct = event.area_customer_seconds();
                let integrated = performance_curve(&event).integral_customer_seconds();
                assert_eq!(direct, integrated);
                let hours = event_area(&event);
                let expect = integrated as f64 / 3600.0;
                let rel = if expect == 0.0 {
                    (hours - expect).abs()
                } else {
                    ((hours - expect) / expect).abs()
                };
                assert!(rel < 1e-12);
            }
        }
    }

    #[test]
    fn union_of_member_intervals_is_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let outages = random_instance(&mut rng, 30);
            for event in extract_events(&outages) {
                // Merge member intervals, joining only on strict overlap
                // (touching intervals split events); one event must reduce to
                // the single interval [start, end].
                let mut intervals: Vec<(i64, i64)> =
                    event.members.iter().map(|m| (m.start, m.restore)).collect();
                intervals.sort_unstable();
                let mut merged: Vec<(i64, i64)> = Vec::new();
                for (s, e) in intervals {
                    match merged.last_mut() {
                        Some(last) if s < last.1 => last.1 = last.1.max(e),
                        _ => merged.push((s, e)),
                    }
                }
                assert_eq!(merged, vec![(event.start, event.end)]);
                let curve = performance_curve(&event);
                assert_eq!(curve.level_at(event.end), 0);
                assert_eq!(curve.breakpoints.first().unwrap().0, event.start);
                assert_eq!(curve.breakpoints.last().unwrap().0, event.end);
            }
        }
    }

    proptest! {
        #[test]
        fn partition_and_order_invariance(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut outages = random_instance(&mut rng, 40);
            let events = extract_events(&outages);
            // Every outage lands in exactly one event.
            let total: usize = events.iter().map(|e| e.n_outages()).sum();
            prop_assert_eq!(total, outages.len());
            // Additivity: event area is the sum of member areas.
            for event in &events {
                let sum: u128 = event.members.iter().map(|m| m.area_customer_seconds()).sum();
                prop_assert_eq!(sum, event.area_customer_seconds());
            }
            // Permuting the input changes nothing.
            outages.shuffle(&mut rng);
            prop_assert_eq!(extract_events(&outages), events);
        }
    }
}
