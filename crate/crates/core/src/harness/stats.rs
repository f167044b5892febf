//! Sample statistics for timing measurements.

/// Quantile `p` of an ascending-sorted, non-empty sample, by linear
/// interpolation between order statistics (Hyndman & Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// First and third quartiles of an unsorted, non-empty sample.
pub fn quartiles(samples: &[f64]) -> (f64, f64) {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    (quantile_sorted(&sorted, 0.25), quantile_sorted(&sorted, 0.75))
}

/// Drops samples outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`, keeping input order.
pub fn filter_outliers(samples: &[f64]) -> Vec<f64> {
    if samples.len() < 2 {
        return samples.to_vec();
    }
    let (q1, q3) = quartiles(samples);
    let iqr = q3 - q1;
    let (low, high) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    samples.iter().copied().filter(|&x| x >= low && x <= high).collect()
}

pub fn mean(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        None
    } else {
        Some(samples.iter().sum::<f64>() / samples.len() as f64)
    }
}
