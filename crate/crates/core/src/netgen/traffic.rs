use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GenError;
use crate::model::{Traffic, TrafficEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficPattern {
    Uniform,
    Transpose,
    Permutation,
    Hotspot,
}

impl TrafficPattern {
    pub fn name(self) -> &'static str {
        match self {
            TrafficPattern::Uniform => "uniform",
            TrafficPattern::Transpose => "transpose",
            TrafficPattern::Permutation => "permutation",
            TrafficPattern::Hotspot => "hotspot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HotspotParams {
    pub count: usize,
    pub share: f64,
}

impl Default for HotspotParams {
    fn default() -> Self {
        HotspotParams { count: 4, share: 0.5 }
    }
}

pub fn generate_traffic(
    pattern: TrafficPattern,
    rows: usize,
    cols: usize,
    seed: u64,
    hotspot: HotspotParams,
) -> Result<Traffic, GenError> {
    let n = rows * cols;
    if n < 2 {
        return Err(GenError::Unsupported("traffic needs at least two chiplets".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = match pattern {
        TrafficPattern::Uniform => (0..n)
            .flat_map(|s| (0..n).filter(move |&d| d != s).map(move |d| TrafficEntry { src: s, dst: d, amount: 1.0 }))
            .collect(),
        TrafficPattern::Transpose => {
            if rows != cols {
                return Err(GenError::Unsupported(format!("transpose traffic needs a square grid, got {rows}x{cols}")));
            }
            (0..n)
                .filter_map(|s| {
                    let (r, c) = (s / cols, s % cols);
                    let d = c * cols + r;
                    (d != s).then_some(TrafficEntry { src: s, dst: d, amount: 1.0 })
                })
                .collect()
        }
        TrafficPattern::Permutation => {
            let perm = derangement(n, &mut rng);
            perm.into_iter()
                .enumerate()
                .map(|(s, d)| TrafficEntry { src: s, dst: d, amount: 1.0 })
                .collect()
        }
        TrafficPattern::Hotspot => hotspot_entries(n, hotspot, &mut rng)?,
    };
    Ok(Traffic { entries })
}

/// Uniformly random permutation without fixed points (rejection sampling).
pub fn derangement(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    assert!(n >= 2);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return perm;
        }
    }
}

/// `share` of the total amount goes to the hotspots (spread evenly over all
/// senders), the rest is spread evenly over pairs with a non-hotspot
/// destination.
fn hotspot_entries(n: usize, params: HotspotParams, rng: &mut ChaCha8Rng) -> Result<Vec<TrafficEntry>, GenError> {
    if params.count == 0 || params.count >= n {
        return Err(GenError::Unsupported(format!(
            "hotspot traffic needs 0 < hotspots < chiplets, got {} of {n}",
            params.count
        )));
    }
    if !(0.0..=1.0).contains(&params.share) {
        return Err(GenError::Unsupported(format!("hotspot share must be in [0, 1], got {}", params.share)));
    }
    let mut hot = vec![false; n];
    for i in index::sample(rng, n, params.count) {
        hot[i] = true;
    }
    let total = (n * (n - 1)) as f64;
    let hot_pairs = (params.count * (n - 1)) as f64;
    let cold_pairs = ((n - params.count) * (n - 1)) as f64;
    let hot_amount = params.share * total / hot_pairs;
    let cold_amount = (1.0 - params.share) * total / cold_pairs;
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for s in 0..n {
        for d in (0..n).filter(|&d| d != s) {
            *merged.entry((s, d)).or_default() += if hot[d] { hot_amount } else { cold_amount };
        }
    }
    Ok(merged
        .into_iter()
        .filter(|&(_, a)| a > 0.0)
        .map(|((src, dst), amount)| TrafficEntry { src, dst, amount })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn uniform_counts() {
        let t = generate_traffic(TrafficPattern::Uniform, 1, 3, 0, HotspotParams::default()).unwrap();
        assert_eq!(t.entries.len(), 6);
        assert!(t.entries.iter().all(|e| e.amount == 1.0));
    }

    #[test]
    fn transpose_mapping() {
        let t = generate_traffic(TrafficPattern::Transpose, 3, 3, 0, HotspotParams::default()).unwrap();
        assert!(t.entries.contains(&TrafficEntry { src: 1, dst: 3, amount: 1.0 }));
        let senders: BTreeSet<usize> = t.entries.iter().map(|e| e.src).collect();
        for diag in [0, 4, 8] {
            assert!(!senders.contains(&diag));
        }
        assert!(generate_traffic(TrafficPattern::Transpose, 2, 3, 0, HotspotParams::default()).is_err());
    }

    #[test]
    fn permutation_is_a_derangement() {
        for seed in 0..20 {
            let t = generate_traffic(TrafficPattern::Permutation, 4, 4, seed, HotspotParams::default()).unwrap();
            let dsts: BTreeSet<usize> = t.entries.iter().map(|e| e.dst).collect();
            assert_eq!(dsts.len(), 16);
            assert!(t.entries.iter().all(|e| e.src != e.dst));
        }
    }

    #[test]
    fn hotspot_share() {
        let t = generate_traffic(TrafficPattern::Hotspot, 4, 4, 7, HotspotParams::default()).unwrap();
        let mut into: BTreeMap<usize, f64> = BTreeMap::new();
        for e in &t.entries {
            *into.entry(e.dst).or_default() += e.amount;
        }
        let mut loads: Vec<f64> = into.values().copied().collect();
        loads.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let top4: f64 = loads[..4].iter().sum();
        assert!((top4 / t.total() - 0.5).abs() < 1e-12);
        assert!(loads[3] > loads[4]);
        assert!(generate_traffic(TrafficPattern::Hotspot, 2, 2, 0, HotspotParams::default()).is_err());
    }
}
