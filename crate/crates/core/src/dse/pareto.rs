use super::ResultRow;

/// Chiplet-area overhead of `row` relative to `baseline` (0.16 = 16% more).
pub fn area_overhead(row: &ResultRow, baseline: &ResultRow) -> Option<f64> {
    Some(row.chiplet_area_mm2? / baseline.chiplet_area_mm2? - 1.0)
}

/// First successful mesh-like row: a mesh, or an SHG without upgrades.
pub fn find_baseline(rows: &[ResultRow]) -> Option<&ResultRow> {
    rows.iter().filter(|r| r.is_ok() && r.chiplet_area_mm2.is_some()).find(|r| {
        r.topology == "mesh" || (r.topology == "shg" && !r.shg_bits.is_empty() && r.shg_bits.chars().all(|c| c == '0'))
    })
}

/// Indices (into `rows`) of feasible rows that no other feasible row beats on
/// latency (lower is better) and throughput (higher is better). A row is
/// feasible when it evaluated successfully and, given a baseline, its area
/// overhead does not exceed `max_overhead`.
pub fn pareto_front(rows: &[ResultRow], baseline: Option<&ResultRow>, max_overhead: f64) -> Vec<usize> {
    let mut feasible: Vec<(usize, f64, f64)> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_ok())
        .filter_map(|(i, r)| {
            let (lat, tp) = (r.latency_cycles?, r.throughput_units?);
            if let Some(b) = baseline {
                if area_overhead(r, b)? > max_overhead + 1e-12 {
                    return None;
                }
            }
            Some((i, lat, tp))
        })
        .collect();
    // Sort by latency, best throughput first within equal latency. A row is
    // dominated when a strictly faster row has at least its throughput, or
    // an equally fast row has more.
    feasible.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.2.total_cmp(&a.2)));
    let mut front = Vec::new();
    let mut best_faster = f64::NEG_INFINITY;
    let mut g = 0;
    while g < feasible.len() {
        let lat = feasible[g].1;
        let end = feasible[g..].iter().position(|x| x.1 != lat).map_or(feasible.len(), |k| g + k);
        let group_best = feasible[g].2;
        for &(i, _, tp) in &feasible[g..end] {
            if tp == group_best && tp > best_faster {
                front.push(i);
            }
        }
        best_faster = best_faster.max(group_best);
        g = end;
    }
    front.sort_unstable();
    front
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dse::PointSpec;
    use crate::netgen::{RoutingAlgorithm, TopologyKind, TrafficPattern};
    use proptest::prelude::*;

    fn row(i: usize, lat: f64, tp: f64, area: f64) -> ResultRow {
        let spec = PointSpec {
            topology: TopologyKind::Mesh,
            rows: 2,
            cols: 2,
            shg_bits: None,
            traffic: TrafficPattern::Uniform,
            routing: RoutingAlgorithm::LowestId,
            seed: 0,
            packaging: 0,
            chiplet: 0,
        };
        let mut r = ResultRow::from_spec(i, &spec);
        r.latency_cycles = Some(lat);
        r.throughput_units = Some(tp);
        r.chiplet_area_mm2 = Some(area);
        r
    }

    fn dominates(a: &ResultRow, b: &ResultRow) -> bool {
        let (la, ta) = (a.latency_cycles.unwrap(), a.throughput_units.unwrap());
        let (lb, tb) = (b.latency_cycles.unwrap(), b.throughput_units.unwrap());
        la <= lb && ta >= tb && (la < lb || ta > tb)
    }

    #[test]
    fn single_row() {
        assert_eq!(pareto_front(&[row(0, 5.0, 1.0, 1.0)], None, 0.0), vec![0]);
    }

    #[test]
    fn dominator_survives_alone() {
        let rows = [row(0, 5.0, 1.0, 1.0), row(1, 4.0, 2.0, 1.0)];
        assert_eq!(pareto_front(&rows, None, 0.0), vec![1]);
    }

    #[test]
    fn area_constraint() {
        let rows = [row(0, 5.0, 1.0, 100.0), row(1, 4.0, 2.0, 120.0)];
        assert_eq!(pareto_front(&rows, Some(&rows[0]), 0.1), vec![0]);
        assert_eq!(pareto_front(&rows, Some(&rows[0]), 0.2), vec![1]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(points in prop::collection::vec((0u8..12, 0u8..12, 0u8..4), 1..100), limit in 0u8..4) {
            let rows: Vec<ResultRow> = points
                .iter()
                .enumerate()
                .map(|(i, &(l, t, a))| row(i, l as f64, t as f64, 10.0 + a as f64))
                .collect();
            let base = row(999, 0.0, 0.0, 10.0);
            let max = limit as f64 / 10.0;
            let front = pareto_front(&rows, Some(&base), max);
            let feasible: Vec<usize> = (0..rows.len())
                .filter(|&i| area_overhead(&rows[i], &base).unwrap() <= max + 1e-12)
                .collect();
            let brute: Vec<usize> = feasible
                .iter()
                .copied()
                .filter(|&i| !feasible.iter().any(|&j| dominates(&rows[j], &rows[i])))
                .collect();
            prop_assert_eq!(&front, &brute);
            for &i in &feasible {
                if !front.contains(&i) {
                    prop_assert!(front.iter().any(|&j| dominates(&rows[j], &rows[i])));
                }
            }
        }
    }
}
