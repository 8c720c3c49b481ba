use super::scenario::WorkloadProfile;

/// Total users at simulated time `t` (seconds): a staircase from
/// `initial_users` up to `max_users`.
pub fn generate_workload(profile: &WorkloadProfile, t: f64) -> u32 {
    let steps = (t.max(0.0) / profile.step_interval_seconds).floor() as u64;
    let users = profile.initial_users as u64 + profile.step_users as u64 * steps;
    users.min(profile.max_users as u64) as u32
}

/// Splits `total` users by `weights` with the largest-remainder method.
///
/// Remainder ties go to the lower index. The result always sums to `total`.
pub fn assign_users(total: u32, weights: &[f64]) -> Vec<u32> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order
        .iter()
        .cycle()
        .take(total.saturating_sub(assigned) as usize)
    {
        out[i] += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ramp_examples() {
        let p = WorkloadProfile::default();
        assert_eq!(generate_workload(&p, 0.0), 30);
        assert_eq!(generate_workload(&p, 359.9), 30);
        assert_eq!(generate_workload(&p, 360.0), 40);
        assert_eq!(generate_workload(&p, 221.0 * 60.0), 390);
        assert_eq!(generate_workload(&p, 222.0 * 60.0), 400);
        assert_eq!(generate_workload(&p, 1e6), 400);
    }

    #[test]
    fn apportionment_examples() {
        assert_eq!(assign_users(57, &[1.0]), vec![57]);
        assert_eq!(assign_users(100, &[0.25, 0.75]), vec![25, 75]);
        assert_eq!(assign_users(10, &[1.0 / 3.0, 2.0 / 3.0]), vec![3, 7]);
        assert_eq!(assign_users(1, &[0.5, 0.5]), vec![1, 0]);
    }

    proptest! {
        #[test]
        fn apportionment_conserves_users(
            total in 0u32..5000,
            weights in prop::collection::vec(0.1f64..5.0, 1..12),
        ) {
            let out = assign_users(total, &weights);
            prop_assert_eq!(out.iter().sum::<u32>(), total);
            let sum: f64 = weights.iter().sum();
            for (o, w) in out.iter().zip(&weights) {
                let quota = total as f64 * w / sum;
                prop_assert!((*o as f64 - quota).abs() < 1.0 + 1e-9);
            }
        }
    }
}
