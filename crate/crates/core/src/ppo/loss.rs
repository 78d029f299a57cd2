//! PPO losses and their gradients with respect to both networks.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::{GradientTape, Mlp};
use crate::ppo::policy::{HybridPolicyOutput, SampledAction};

/// Mean over samples of `-min(rho A, clip(rho, 1 - eps, 1 + eps) A)`.
pub fn clipped_policy_loss(new_logp: &[f64], old_logp: &[f64], advantages: &[f64], clip: f64) -> f64 {
    let n = new_logp.len();
    if n == 0 {
        return 0.0;
    }
    new_logp
        .iter()
        .zip(old_logp)
        .zip(advantages)
        .map(|((new, old), a)| {
            let ratio = (new - old).exp();
            -(ratio * a).min(ratio.clamp(1.0 - clip, 1.0 + clip) * a)
        })
        .sum::<f64>()
        / n as f64
}

/// Mean squared error between value estimates and returns.
pub fn value_loss(values: &[f64], returns: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values
        .iter()
        .zip(returns)
        .map(|(v, g)| (v - g) * (v - g))
        .sum::<f64>()
        / values.len() as f64
}

/// `policy + c * value - entropy_weight * entropy`.
pub fn total_loss(policy_loss: f64, value_loss: f64, entropy: f64, c: f64, entropy_weight: f64) -> f64 {
    policy_loss + c * value_loss - entropy_weight * entropy
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub clip_range: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// A minibatch of stored transitions with precomputed advantage targets.
#[derive(Debug, Clone)]
pub struct Minibatch<'a> {
    /// One observation per row.
    pub observations: Array2<f64>,
    pub actions: Vec<&'a SampledAction>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch<'_> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Loss components for one minibatch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Evaluates the total loss on `batch` and its exact gradients with respect
/// to the policy and value parameters.
pub fn ppo_loss_and_gradients(
    policy: &Mlp,
    value: &Mlp,
    batch: &Minibatch<'_>,
    num_users: usize,
    num_scms: usize,
    weights: LossWeights,
) -> Result<(LossBreakdown, GradientTape, GradientTape)> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty minibatch".into()));
    }
    let nf = n as f64;
    let (policy_out, policy_cache) = policy.forward_batch(batch.observations.view())?;
    let (value_out, value_cache) = value.forward_batch(batch.observations.view())?;

    let mut policy_grad = Array2::<f64>::zeros(policy_out.raw_dim());
    let mut new_logp = Vec::with_capacity(n);
    let mut entropy = 0.0;
    let mut approx_kl = 0.0;
    let mut clipped = 0usize;
    let eps = weights.clip_range;

    for i in 0..n {
        let row = policy_out.row(i);
        let head = HybridPolicyOutput::from_row(row.as_slice().expect("standard layout"), num_users, num_scms)?;
        let sample = batch.actions[i];
        let logp = head.log_prob(sample);
        let log_ratio = logp - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let a = batch.advantages[i];
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }
        // The unclipped branch carries the gradient whenever it is the minimum.
        let d_loss_d_logp = if ratio * a <= ratio.clamp(1.0 - eps, 1.0 + eps) * a {
            -ratio * a / nf
        } else {
            0.0
        };
        let mut grad_row = policy_grad.row_mut(i);
        head.accumulate_output_grad(
            sample,
            d_loss_d_logp,
            -weights.entropy_coef / nf,
            grad_row.as_slice_mut().expect("standard layout"),
        );
        entropy += head.entropy();
        approx_kl += (ratio - 1.0) - log_ratio;
        new_logp.push(logp);
    }
    entropy /= nf;
    approx_kl /= nf;

    let values: Vec<f64> = value_out.column(0).to_vec();
    let v_loss = value_loss(&values, &batch.returns);
    let value_grad = Array2::from_shape_fn((n, 1), |(i, _)| {
        weights.value_coef * 2.0 * (values[i] - batch.returns[i]) / nf
    });

    let p_loss = clipped_policy_loss(&new_logp, &batch.old_log_probs, &batch.advantages, eps);
    let total = total_loss(p_loss, v_loss, entropy, weights.value_coef, weights.entropy_coef);
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "total loss {total} (policy {p_loss}, value {v_loss}, entropy {entropy})"
        )));
    }

    let policy_tape = policy.backward(&policy_cache, policy_grad.view())?;
    let value_tape = value.backward(&value_cache, value_grad.view())?;
    Ok((
        LossBreakdown {
            total,
            policy: p_loss,
            value: v_loss,
            entropy,
            approx_kl,
            clip_fraction: clipped as f64 / nf,
        },
        policy_tape,
        value_tape,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_one_gives_negative_mean_advantage() {
        let logp = [0.1, -0.4, 2.0];
        let adv = [1.0, -3.0, 0.5];
        let loss = clipped_policy_loss(&logp, &logp, &adv, 0.2);
        assert!((loss - (-(1.0 - 3.0 + 0.5) / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn clipped_branch_binds() {
        let l = clipped_policy_loss(&[1.5f64.ln()], &[0.0], &[1.0], 0.2);
        assert!((l - -1.2).abs() < 1e-12);
        let l = clipped_policy_loss(&[0.5f64.ln()], &[0.0], &[-1.0], 0.2);
        assert!((l - 0.8).abs() < 1e-12);
    }

    #[test]
    fn value_loss_examples() {
        assert_eq!(value_loss(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(value_loss(&[0.0], &[2.0]), 4.0);
    }

    #[test]
    fn total_loss_examples() {
        assert_eq!(total_loss(-1.2, 4.0, 0.0, 0.0, 0.0), -1.2);
        assert!((total_loss(-1.2, 4.0, 0.0, 0.5, 0.0) - 0.8).abs() < 1e-15);
        assert!(total_loss(0.3, 1.0, 2.0, 0.5, 0.01) < total_loss(0.3, 1.0, 1.0, 0.5, 0.01));
    }

    use crate::nn::{Activation, Mlp};
    use crate::ppo::policy::{output_dim, sample_from_output};
    use crate::rng::seeded;

    struct Fixture {
        policy: Mlp,
        value: Mlp,
        observations: Array2<f64>,
        actions: Vec<SampledAction>,
        new_logp: Vec<f64>,
    }

    fn fixture(n: usize) -> Fixture {
        let mut rng = seeded(3);
        let policy = Mlp::new(&[2, 6, output_dim(1, 3)], Activation::Tanh, 0.5, &mut rng).unwrap();
        let value = Mlp::new(&[2, 6, 1], Activation::Tanh, 1.0, &mut rng).unwrap();
        let observations = Array2::from_shape_fn((n, 2), |(i, j)| (i as f64 - 1.0) * 0.3 + j as f64 * 0.2);
        let mut actions = Vec::new();
        let mut new_logp = Vec::new();
        for i in 0..n {
            let row = policy.predict(observations.row(i).as_slice().unwrap()).unwrap();
            let head = HybridPolicyOutput::from_row(&row, 1, 3).unwrap();
            let a = sample_from_output(&head, false, &mut rng);
            new_logp.push(head.log_prob(&a));
            actions.push(a);
        }
        Fixture { policy, value, observations, actions, new_logp }
    }

    fn batch<'a>(f: &'a Fixture, old_logp: Vec<f64>, advantages: Vec<f64>) -> Minibatch<'a> {
        let n = f.actions.len();
        Minibatch {
            observations: f.observations.clone(),
            actions: f.actions.iter().collect(),
            old_log_probs: old_logp,
            advantages,
            returns: vec![0.0; n],
        }
    }

    #[test]
    fn clipped_samples_carry_no_policy_gradient() {
        let f = fixture(3);
        let no_entropy = LossWeights { clip_range: 0.2, value_coef: 0.5, entropy_coef: 0.0 };
        // Ratio e^1 with a positive advantage: the clip binds for every sample.
        let old: Vec<f64> = f.new_logp.iter().map(|l| l - 1.0).collect();
        let mb = batch(&f, old, vec![1.0, 2.0, 0.5]);
        let (loss, tape, _) = ppo_loss_and_gradients(&f.policy, &f.value, &mb, 1, 3, no_entropy).unwrap();
        assert_eq!(loss.clip_fraction, 1.0);
        assert!((loss.policy - -1.2 * 3.5 / 3.0).abs() < 1e-12);
        assert!(tape.values().all(|g| g == 0.0));

        // Same ratio with a negative advantage takes the unclipped branch.
        let old: Vec<f64> = f.new_logp.iter().map(|l| l - 1.0).collect();
        let mb = batch(&f, old, vec![-1.0, -2.0, -0.5]);
        let (_, tape, _) = ppo_loss_and_gradients(&f.policy, &f.value, &mb, 1, 3, no_entropy).unwrap();
        assert!(tape.norm() > 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let f = fixture(4);
        let weights = LossWeights { clip_range: 0.2, value_coef: 0.5, entropy_coef: 0.01 };
        let old: Vec<f64> = f.new_logp.iter().zip([0.05, -0.1, 0.5, -0.5]).map(|(l, d)| l + d).collect();
        let mut mb = batch(&f, old, vec![1.0, -0.7, 0.3, -1.5]);
        mb.returns = vec![0.4, -0.2, 1.0, 0.0];
        let (_, pt, vt) = ppo_loss_and_gradients(&f.policy, &f.value, &mb, 1, 3, weights).unwrap();
        let loss = |p: &Mlp, v: &Mlp| ppo_loss_and_gradients(p, v, &mb, 1, 3, weights).unwrap().0.total;
        let h = 1e-6;
        for (i, g) in pt.values().enumerate() {
            let mut plus = f.policy.clone();
            *plus.parameter_mut(i).unwrap() += h;
            let mut minus = f.policy.clone();
            *minus.parameter_mut(i).unwrap() -= h;
            let fd = (loss(&plus, &f.value) - loss(&minus, &f.value)) / (2.0 * h);
            assert!((g - fd).abs() <= 1e-6 * g.abs().max(fd.abs()).max(1.0), "policy {i}: {g} vs {fd}");
        }
        for (i, g) in vt.values().enumerate() {
            let mut plus = f.value.clone();
            *plus.parameter_mut(i).unwrap() += h;
            let mut minus = f.value.clone();
            *minus.parameter_mut(i).unwrap() -= h;
            let fd = (loss(&f.policy, &plus) - loss(&f.policy, &minus)) / (2.0 * h);
            assert!((g - fd).abs() <= 1e-6 * g.abs().max(fd.abs()).max(1.0), "value {i}: {g} vs {fd}");
        }
    }
}
