use crate::ppo::buffer::Trajectory;

/// Generalized advantage estimation.
///
/// Returns `(advantages, returns)` with `returns = advantages + values`.
/// The recursion restarts at every `done` record; a trailing non-terminal
/// record bootstraps from `traj.bootstrap_value`. With `lambda = 1` the
/// advantages are discounted Monte-Carlo returns minus values.
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = traj.len();
    let mut advantages = vec![0.0; n];
    let mut next_value = traj.bootstrap_value;
    let mut next_advantage = 0.0;
    for t in (0..n).rev() {
        let record = &traj.records[t];
        let not_done = if record.done { 0.0 } else { 1.0 };
        let delta = record.reward + gamma * next_value * not_done - record.value;
        let advantage = delta + gamma * lambda * not_done * next_advantage;
        advantages[t] = advantage;
        next_value = record.value;
        next_advantage = advantage;
    }
    let returns = advantages
        .iter()
        .zip(&traj.records)
        .map(|(a, r)| a + r.value)
        .collect();
    (advantages, returns)
}

/// Shifts and scales to zero mean and unit variance. A constant input maps to zeros.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = (*v - mean) / (std + 1e-8);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Action;
    use crate::ppo::buffer::TrajectoryRecord;
    use crate::ppo::policy::SampledAction;

    pub(crate) fn record(reward: f64, value: f64, done: bool) -> TrajectoryRecord {
        TrajectoryRecord {
            observation: vec![],
            action: SampledAction {
                action: Action { scm_index: vec![], power_fraction: vec![], bandwidth_fraction: vec![] },
                raw_power: vec![],
                raw_bandwidth: vec![],
            },
            log_prob: 0.0,
            value,
            reward,
            done,
        }
    }

    fn traj(records: Vec<TrajectoryRecord>) -> Trajectory {
        Trajectory { records, bootstrap_value: 0.0 }
    }

    #[test]
    fn single_terminal_step() {
        for gamma in [0.0, 0.5, 0.995] {
            let (adv, ret) = compute_gae(&traj(vec![record(1.0, 0.0, true)]), gamma, 0.95);
            assert_eq!(adv, vec![1.0]);
            assert_eq!(ret, vec![1.0]);
        }
    }

    #[test]
    fn zero_rewards_and_values() {
        let t = traj((0..6).map(|i| record(0.0, 0.0, i == 5)).collect());
        let (adv, ret) = compute_gae(&t, 0.99, 0.95);
        assert!(adv.iter().chain(&ret).all(|&x| x == 0.0));
    }

    #[test]
    fn lambda_one_is_discounted_return_minus_value() {
        let rewards = [1.0, -2.0, 0.5, 3.0, 0.25];
        let values = [0.3, -0.1, 0.7, 1.1, -0.4];
        let gamma = 0.9;
        let t = traj((0..5).map(|i| record(rewards[i], values[i], i == 4)).collect());
        let (adv, _) = compute_gae(&t, gamma, 1.0);
        for s in 0..5 {
            let g: f64 = (s..5).map(|k| gamma.powi((k - s) as i32) * rewards[k]).sum();
            assert!((adv[s] - (g - values[s])).abs() < 1e-12);
        }
    }

    #[test]
    fn resets_at_episode_boundary_and_bootstraps() {
        let mut t = traj(vec![record(1.0, 0.0, true), record(2.0, 0.5, false)]);
        t.bootstrap_value = 4.0;
        let (adv, ret) = compute_gae(&t, 0.5, 1.0);
        assert_eq!(adv[0], 1.0);
        assert_eq!(adv[1], 2.0 + 0.5 * 4.0 - 0.5);
        assert_eq!(ret[1], 4.0);
    }

    #[test]
    fn normalize_moments() {
        let mut v = vec![1.0, 2.0, 3.0, 4.0];
        normalize(&mut v);
        let mean: f64 = v.iter().sum::<f64>() / 4.0;
        let var: f64 = v.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-6);
        let mut c = vec![5.0; 3];
        normalize(&mut c);
        assert!(c.iter().all(|&x| x == 0.0));
    }
}
