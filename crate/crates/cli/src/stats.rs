use byzcount::engine::ExperimentResult;

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile(sorted: &[u32], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] as f64 * (1.0 - frac) + sorted[hi] as f64 * frac)
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// Pooled statistics over the trials of one config.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub trials_ok: usize,
    pub estimate_q1: Option<f64>,
    pub estimate_median: Option<f64>,
    pub estimate_q3: Option<f64>,
    pub success_mean: Option<f64>,
    pub byz_safe_success_mean: Option<f64>,
    pub rounds_mean: Option<f64>,
    pub messages_mean: Option<f64>,
    pub crashed_honest_mean: Option<f64>,
    pub all_decided: usize,
}

impl Aggregate {
    pub fn of(results: &[ExperimentResult]) -> Self {
        let mut est: Vec<u32> = results.iter().flat_map(|r| r.estimates()).collect();
        est.sort_unstable();
        Aggregate {
            trials_ok: results.len(),
            estimate_q1: quantile(&est, 0.25),
            estimate_median: quantile(&est, 0.5),
            estimate_q3: quantile(&est, 0.75),
            success_mean: mean(results.iter().map(|r| r.metrics.success_fraction)),
            byz_safe_success_mean: mean(results.iter().filter_map(|r| r.metrics.byz_safe_success_fraction)),
            rounds_mean: mean(results.iter().map(|r| r.rounds_total as f64)),
            messages_mean: mean(results.iter().map(|r| r.messages_total as f64)),
            crashed_honest_mean: mean(results.iter().map(|r| r.metrics.crashed_honest as f64)),
            all_decided: results
                .iter()
                .filter(|r| r.status == byzcount::engine::Termination::AllDecided)
                .count(),
        }
    }
}
