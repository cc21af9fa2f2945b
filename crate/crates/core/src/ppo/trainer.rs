use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::engine::Color;
use crate::env::{Actor, OpponentSpec, SingleAgentEnv, Transition};
use crate::error::TrainError;
use crate::metrics::MetricsRow;
use crate::net::optim::Optimizer;
use crate::net::{Network, Phase};

use super::gae::{gae_advantages, normalize};
use super::loss::{ppo_loss, RolloutBatch};
use super::PpoConfig;

/// The side the learner plays and who it plays against.
#[derive(Debug, Clone)]
pub struct EnvSource {
    pub opponent: OpponentSpec,
    pub color: Color,
}

/// A network under training with its optimizer state and counters.
#[derive(Debug, Clone)]
pub struct Learner {
    pub net: Network<f32>,
    pub optimizer: Optimizer<f32>,
    /// Environment steps consumed so far.
    pub steps: u64,
    /// Optimizer steps taken so far.
    pub updates: u64,
}

impl Learner {
    pub fn new(net: Network<f32>, config: &PpoConfig) -> Self {
        Learner {
            net,
            optimizer: Optimizer::new(config.optimizer, config.learning_rate),
            steps: 0,
            updates: 0,
        }
    }
}

/// Steps gathered by a [`Collector`].
#[derive(Debug, Clone, Default)]
pub struct Collected {
    pub transitions: Vec<Transition>,
    /// V of the state after the last step if its episode is still running, else 0.
    pub bootstrap_value: f64,
    /// Learner return of every episode that finished inside this batch.
    pub episode_rewards: Vec<f64>,
    /// Plies of every episode that finished inside this batch.
    pub episode_lengths: Vec<u32>,
}

/// Runs the learner in a [`SingleAgentEnv`]; episodes continue across batches.
pub struct Collector {
    source: EnvSource,
    env: Option<SingleAgentEnv>,
    episode_reward: f64,
}

impl Collector {
    pub fn new(source: EnvSource) -> Self {
        Collector {
            source,
            env: None,
            episode_reward: 0.0,
        }
    }

    /// Samples `steps` learner moves from `net`.
    pub fn collect(&mut self, net: &Network<f32>, steps: usize, rng: &mut ChaCha8Rng) -> Collected {
        let mut out = Collected {
            transitions: Vec::with_capacity(steps),
            ..Default::default()
        };
        let learner = Actor::Sample(net);
        for _ in 0..steps {
            let env = match &mut self.env {
                Some(env) => env,
                slot => {
                    self.episode_reward = 0.0;
                    slot.insert(SingleAgentEnv::new(self.source.opponent.clone(), self.source.color, rng))
                }
            };
            let obs = env.observe();
            let d = learner.act(&obs, rng);
            let step = env.step(d.action, rng).expect("sampled action is legal");
            self.episode_reward += step.reward;
            out.transitions.push(Transition {
                obs,
                action: d.action,
                log_prob: d.log_prob,
                value_est: d.value,
                reward: step.reward,
                done: step.done,
            });
            if step.done {
                out.episode_rewards.push(self.episode_reward);
                out.episode_lengths.push(env.board().half_moves());
                self.env = None;
            }
        }
        out.bootstrap_value = match &self.env {
            Some(env) => net.evaluate(&env.observe().plane).1,
            None => 0.0,
        };
        out
    }
}

/// GAE and (optionally) advantage normalization over one collected batch.
pub fn prepare_batch(collected: Collected, config: &PpoConfig) -> RolloutBatch {
    let t = &collected.transitions;
    let rewards: Vec<f64> = t.iter().map(|x| x.reward).collect();
    let values: Vec<f64> = t.iter().map(|x| x.value_est).collect();
    let dones: Vec<bool> = t.iter().map(|x| x.done).collect();
    let (mut advantages, returns) = gae_advantages(
        &rewards,
        &values,
        &dones,
        config.gamma,
        config.lambda,
        collected.bootstrap_value,
    );
    if config.normalize_advantages {
        normalize(&mut advantages);
    }
    RolloutBatch {
        transitions: collected.transitions,
        advantages,
        returns,
    }
}

/// Averages over every minibatch of one [`update`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub kl_estimate: f64,
    /// max |ratio - 1| on the first minibatch, before any parameter change.
    pub initial_ratio_deviation: f64,
    pub minibatches: usize,
}

/// `epochs_per_batch` shuffled passes of minibatch steps over `batch`.
pub fn update(
    learner: &mut Learner,
    batch: &RolloutBatch,
    config: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats, TrainError> {
    let mut stats = UpdateStats::default();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    for _ in 0..config.epochs_per_batch {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch) {
            let out = ppo_loss(&learner.net, batch, chunk, config).map_err(|e| match e {
                TrainError::NonFiniteLoss {
                    policy_loss,
                    value_loss,
                    entropy,
                    ..
                } => TrainError::NonFiniteLoss {
                    update: learner.updates,
                    policy_loss,
                    value_loss,
                    entropy,
                },
                other => other,
            })?;
            if stats.minibatches == 0 {
                stats.initial_ratio_deviation = out.ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
            }
            learner.optimizer.step(&mut learner.net.params, &out.grads);
            learner.updates += 1;
            stats.policy_loss += out.policy_loss;
            stats.value_loss += out.value_loss;
            stats.entropy += out.entropy;
            stats.kl_estimate += out.kl_estimate;
            stats.minibatches += 1;
        }
    }
    let n = stats.minibatches.max(1) as f64;
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
    stats.kl_estimate /= n;
    Ok(stats)
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> Option<f64> {
    let n = xs.len();
    (n > 0).then(|| xs.sum::<f64>() / n as f64)
}

/// One training iteration: `iteration_steps / train_batch` rounds of
/// collect, GAE, update. Returns one metrics row per round.
pub fn train_iteration(
    learner: &mut Learner,
    source: &EnvSource,
    config: &PpoConfig,
    iteration: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<MetricsRow>, TrainError> {
    config.validate()?;
    let mut collector = Collector::new(source.clone());
    let mut rows = Vec::with_capacity(config.batches_per_iteration());
    for _ in 0..config.batches_per_iteration() {
        let collected = collector.collect(&learner.net, config.train_batch, rng);
        learner.steps += collected.transitions.len() as u64;
        let mean_reward = mean(collected.episode_rewards.iter().copied());
        let mean_length = mean(collected.episode_lengths.iter().map(|&l| l as f64));
        let batch = prepare_batch(collected, config);
        let stats = update(learner, &batch, config, rng)?;
        rows.push(MetricsRow {
            phase: Phase::Rl,
            role: Some(source.color),
            iteration,
            steps: learner.steps,
            mean_episode_reward: mean_reward,
            mean_episode_length: mean_length,
            policy_loss: Some(stats.policy_loss),
            value_loss: stats.value_loss,
            entropy: Some(stats.entropy),
            kl_estimate: Some(stats.kl_estimate),
            validation_loss: None,
        });
    }
    Ok(rows)
}
