//! Per-sample learning rate, momentum and epoch count.

use super::network::logistic;

/// Base rate for the `k`-th accepted sample (1-based): `max(ideal, s(-sqrt k))`.
pub fn base_learning_rate(k: u64, ideal_lr: f64) -> f64 {
    ideal_lr.max(logistic(-(k as f64).sqrt()))
}

/// Scales the base rate by how surprising the sample is.
///
/// `previous_errors` are the errors of earlier samples (the current one
/// excluded); an empty or all-zero history leaves the error factor at 1.
/// `anomalies` holds the current score followed by earlier ones; at most
/// `window` are used and missing entries count as 0.
pub fn boosted_learning_rate(
    base: f64,
    error: f64,
    previous_errors: &[f64],
    anomalies: &[f64],
    window: usize,
) -> f64 {
    let mean = if previous_errors.is_empty() {
        0.0
    } else {
        previous_errors.iter().sum::<f64>() / previous_errors.len() as f64
    };
    let error_factor = if mean > 0.0 {
        (error / mean).max(1.0)
    } else {
        1.0
    };
    let anomaly_factor: f64 = (0..window)
        .map(|i| 2.0 * logistic(anomalies.get(i).copied().unwrap_or(0.0)))
        .product();
    base * error_factor * anomaly_factor
}

/// `min(ideal_momentum, ideal_lr / boosted)`.
pub fn momentum_for(boosted: f64, ideal_lr: f64, ideal_momentum: f64) -> f64 {
    ideal_momentum.min(ideal_lr / boosted)
}

/// `floor(1 + ln(boosted / ideal_lr))`, never below one.
pub fn epochs_for(boosted: f64, ideal_lr: f64) -> u32 {
    let ratio = (boosted / ideal_lr).max(1.0);
    (1.0 + ratio.ln()).floor() as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_sample_rate() {
        let expect = 1.0 / (1.0 + 1f64.exp());
        assert!((base_learning_rate(1, 0.001) - expect).abs() < 1e-12);
        assert!((expect - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn base_rate_bottoms_out() {
        assert_eq!(base_learning_rate(1_000_000, 0.001), 0.001);
        let mut prev = f64::INFINITY;
        for k in 1..500 {
            let r = base_learning_rate(k, 0.001);
            assert!(r <= prev);
            prev = r;
        }
    }

    #[test]
    fn quiet_stream_keeps_base_rate() {
        let r = boosted_learning_rate(0.001, 0.05, &[0.1; 10], &[0.0; 10], 10);
        assert!((r - 0.001).abs() < 1e-15);
        // Cold start: no history at all.
        assert!((boosted_learning_rate(0.2, 0.5, &[], &[], 10) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn full_anomaly_window() {
        let r = boosted_learning_rate(1.0, 0.0, &[1.0], &[1.0; 10], 10);
        let expect = (2.0 * logistic(1.0)).powi(10);
        assert!((r - expect).abs() < 1e-9);
        assert!((expect - 44.7).abs() < 0.05);
    }

    #[test]
    fn error_ratio_only_boosts() {
        let r = boosted_learning_rate(1.0, 0.3, &[0.1, 0.1], &[], 10);
        assert!((r - 3.0).abs() < 1e-12);
        assert_eq!(boosted_learning_rate(1.0, 0.05, &[0.1, 0.1], &[], 10), 1.0);
    }

    #[test]
    fn momentum_examples() {
        assert_eq!(momentum_for(0.001, 0.001, 0.9), 0.9);
        assert!((momentum_for(0.01, 0.001, 0.9) - 0.1).abs() < 1e-15);
        assert!((momentum_for(0.002, 0.001, 0.9) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn epoch_examples() {
        assert_eq!(epochs_for(0.001, 0.001), 1);
        assert_eq!(epochs_for(0.001 * std::f64::consts::E * 1.000001, 0.001), 2);
        assert_eq!(epochs_for(0.3, 0.001), 6);
        assert_eq!(epochs_for(0.0001, 0.001), 1);
    }
}
