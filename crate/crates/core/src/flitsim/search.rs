/// Coarse-to-fine saturation search over injection rates in per-mille.
///
/// Rates rise in steps of 100, 10 and finally 1 per-mille; each phase starts
/// from the highest stable rate seen so far and stops at the first saturated
/// probe. Rates already known to saturate are never probed twice. `probe`
/// returns true when the rate saturates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    /// Highest stable rate found, in per-mille (0 if the first probe saturated).
    pub stable_permille: u32,
    /// Probed rates in order, with whether each saturated.
    pub attempts: Vec<(u32, bool)>,
}

pub const MAX_PERMILLE: u32 = 1000;

pub fn search_saturation<F: FnMut(u32) -> bool>(mut probe: F) -> SearchOutcome {
    let mut attempts = Vec::new();
    let mut stable = 0;
    let mut saturated_at = MAX_PERMILLE + 1;
    for step in [100, 10, 1] {
        let mut rate = stable + step;
        while rate < saturated_at && rate <= MAX_PERMILLE {
            let saturated = probe(rate);
            attempts.push((rate, saturated));
            if saturated {
                saturated_at = rate;
                break;
            }
            stable = rate;
            rate += step;
        }
        if stable == 0 && saturated_at == step {
            log::warn!("network saturates at the first probed rate; reporting 0");
            break;
        }
    }
    SearchOutcome {
        stable_permille: stable,
        attempts,
    }
}
