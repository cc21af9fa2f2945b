//! Generalized advantage estimation.

/// GAE(gamma, lambda) advantages and returns for a flat rollout.
///
/// `dones[t]` marks the last step of an episode: no value is bootstrapped
/// across it. `bootstrap_value` is V(s_T) for a rollout cut mid-episode and is
/// ignored when the final step is terminal. Returns are `advantages + values`.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
    bootstrap_value: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n, "values length");
    assert_eq!(dones.len(), n, "dones length");
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 == n { bootstrap_value } else { values[t + 1] };
        let (next_value, carry) = if dones[t] { (0.0, 0.0) } else { (next_value, running) };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * carry;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
pub fn normalize(values: &mut [f64]) {
    let n = values.len();
    if n < 2 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v -= mean;
        if std > 1e-12 {
            *v /= std;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [1.0, -0.5, 2.0, 0.25];
        let v = [0.5, 0.1, -0.2, 0.3];
        let d = [false, false, false, false];
        let (adv, ret) = gae_advantages(&r, &v, &d, 0.9, 0.0, 0.7);
        let next = [0.1, -0.2, 0.3, 0.7];
        for t in 0..4 {
            assert_eq!(adv[t], r[t] + 0.9 * next[t] - v[t]);
            assert_eq!(ret[t], adv[t] + v[t]);
        }
    }

    #[test]
    fn lambda_one_zero_values_is_reward_to_go() {
        let r = [1.0, 2.0, 4.0, 8.0];
        let (adv, _) = gae_advantages(&r, &[0.0; 4], &[false, false, false, true], 0.5, 1.0, 99.0);
        // 1 + .5*2 + .25*4 + .125*8, ...
        assert_eq!(adv, vec![4.0, 6.0, 8.0, 8.0]);
    }

    #[test]
    fn no_bootstrap_across_done() {
        let (adv, _) = gae_advantages(&[1.0, 1.0], &[0.0, 5.0], &[true, true], 0.9, 0.9, 3.0);
        assert_eq!(adv, vec![1.0, -4.0]);
    }

    #[test]
    fn normalization_moments() {
        let mut v = vec![1.0, 5.0, -3.0, 0.5, 2.0];
        normalize(&mut v);
        let mean = v.iter().sum::<f64>() / 5.0;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-12);
        assert!((var.sqrt() - 1.0).abs() < 1e-12);
    }
}
