use super::TuningConfig;

/// Early-stopping rule over the evaluation-loss trace.
///
/// Stops once the latest step is past the warmup and its loss is strictly
/// greater than the maximum of the `stopping_window` evaluations before it.
/// Ties keep training.
pub fn should_stop(trace: &[(u64, f64)], cfg: &TuningConfig) -> bool {
    let Some((&(step, latest), earlier)) = trace.split_last() else {
        return false;
    };
    if step <= cfg.warmup_steps_before_stopping || earlier.len() < cfg.stopping_window {
        return false;
    }
    let window = &earlier[earlier.len() - cfg.stopping_window..];
    let max = window
        .iter()
        .map(|&(_, l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    latest > max
}
