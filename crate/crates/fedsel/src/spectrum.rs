//! Sequential resource-block allocation: task arrivals, occupancy dynamics,
//! QoS-aware baseline allocators and a tabular Q-learning agent.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One arriving traffic task (a local model update to upload).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumTask {
    pub id: u64,
    pub length_bits: f64,
    /// Spectral efficiency eta in bits/s/Hz for this device's channel.
    pub spectral_efficiency: f64,
    pub arrival_s: f64,
    /// Maximum tolerated total delay tau in seconds.
    pub max_delay_s: f64,
}

/// Transmission delay of a task over `blocks` resource blocks.
pub fn task_delay(
    length_bits: f64,
    blocks: u32,
    block_bandwidth_hz: f64,
    spectral_efficiency: f64,
) -> Result<f64> {
    if blocks == 0 {
        return Err(Error::Domain("task_delay requires at least one block".into()));
    }
    Ok(length_bits / (blocks as f64 * block_bandwidth_hz * spectral_efficiency))
}

/// Fewest blocks that keep the transmission delay within the task's QoS
/// budget, at least 1. May exceed the blocks the system has; callers detect
/// infeasibility.
pub fn min_blocks_for_qos(task: &SpectrumTask, block_bandwidth_hz: f64) -> u32 {
    let needed =
        task.length_bits / (task.max_delay_s * block_bandwidth_hz * task.spectral_efficiency);
    (needed.ceil() as u32).max(1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Occupancy {
    blocks: u32,
    release_s: f64,
}

/// Limits on how long a zero-grant task may wait before it is dropped.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct WaitLimits {
    pub max_wait_s: f64,
    /// Fixed delay recorded for a dropped task.
    pub drop_penalty_delay_s: f64,
}

impl Default for WaitLimits {
    fn default() -> Self {
        Self {
            max_wait_s: 2.0,
            drop_penalty_delay_s: 1.0,
        }
    }
}

/// Resource-block occupancy state. Blocks are held exclusively for the
/// transmission duration and then released.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumEnv {
    pub total_blocks: u32,
    pub block_bandwidth_hz: f64,
    occupancy: Vec<Occupancy>,
    clock_s: f64,
}

/// Outcome of serving one task.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub delay_s: f64,
    pub qos_violated: bool,
    pub dropped: bool,
    pub granted_blocks: u32,
}

impl SpectrumEnv {
    pub fn new(total_blocks: u32, block_bandwidth_hz: f64) -> Self {
        Self {
            total_blocks,
            block_bandwidth_hz,
            occupancy: Vec::new(),
            clock_s: 0.0,
        }
    }

    pub fn clock_s(&self) -> f64 {
        self.clock_s
    }

    fn release_expired(&mut self) {
        let now = self.clock_s;
        self.occupancy.retain(|o| o.release_s > now);
    }

    pub fn busy_blocks(&self) -> u32 {
        self.occupancy.iter().map(|o| o.blocks).sum()
    }

    /// Free blocks once everything releasing at or before `t` has released.
    pub fn free_blocks_at(&self, t: f64) -> u32 {
        let t = t.max(self.clock_s);
        let busy: u32 = self
            .occupancy
            .iter()
            .filter(|o| o.release_s > t)
            .map(|o| o.blocks)
            .sum();
        self.total_blocks - busy
    }

    /// Serve one task: advance the clock to its arrival, wait out full
    /// occupancy if necessary, grant up to `action_blocks` of the free
    /// blocks and hold them for the transmission duration.
    ///
    /// Tasks must be fed in nondecreasing arrival order.
    pub fn step(
        &mut self,
        task: &SpectrumTask,
        action_blocks: u32,
        limits: &WaitLimits,
    ) -> Result<StepOutcome> {
        if action_blocks == 0 {
            return Err(Error::Domain("action must request at least one block".into()));
        }
        self.clock_s = self.clock_s.max(task.arrival_s);
        self.release_expired();

        loop {
            let free = self.total_blocks - self.busy_blocks();
            if free > 0 {
                let grant = action_blocks.min(free);
                let tx = task_delay(
                    task.length_bits,
                    grant,
                    self.block_bandwidth_hz,
                    task.spectral_efficiency,
                )?;
                self.occupancy.push(Occupancy {
                    blocks: grant,
                    release_s: self.clock_s + tx,
                });
                let delay = (self.clock_s - task.arrival_s) + tx;
                return Ok(StepOutcome {
                    delay_s: delay,
                    qos_violated: delay > task.max_delay_s,
                    dropped: false,
                    granted_blocks: grant,
                });
            }
            // everything is busy: wait for the earliest release
            let next_release = self
                .occupancy
                .iter()
                .map(|o| o.release_s)
                .fold(f64::INFINITY, f64::min);
            if next_release - task.arrival_s > limits.max_wait_s {
                return Ok(StepOutcome {
                    delay_s: limits.drop_penalty_delay_s,
                    qos_violated: true,
                    dropped: true,
                    granted_blocks: 0,
                });
            }
            self.clock_s = next_release;
            self.release_expired();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    MinQos,
    EqualShare,
    GreedyMax,
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BaselineKind::MinQos => "min_qos",
            BaselineKind::EqualShare => "equal_share",
            BaselineKind::GreedyMax => "greedy_max",
        };
        f.write_str(s)
    }
}

/// Block request of a baseline allocator for the arriving task.
/// `equal_share_k` is the expected-concurrency constant for EqualShare.
pub fn baseline_policy(
    kind: BaselineKind,
    env: &SpectrumEnv,
    task: &SpectrumTask,
    equal_share_k: u32,
) -> u32 {
    let free = env.free_blocks_at(task.arrival_s);
    match kind {
        BaselineKind::MinQos => min_blocks_for_qos(task, env.block_bandwidth_hz)
            .min(free)
            .max(1),
        BaselineKind::EqualShare => (free / equal_share_k.max(1)).max(1),
        BaselineKind::GreedyMax => free.max(1),
    }
}

/// Uniform bucketing of the continuous state components.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BucketConfig {
    pub eta_buckets: usize,
    pub free_buckets: usize,
    pub length_buckets: usize,
}

impl Default for BucketConfig {
    fn default() -> Self {
        Self {
            eta_buckets: 4,
            free_buckets: 5,
            length_buckets: 4,
        }
    }
}

/// Maps (eta, free blocks, task length) to a dense state index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Discretizer {
    pub buckets: BucketConfig,
    pub eta_range: (f64, f64),
    pub length_range: (f64, f64),
    pub total_blocks: u32,
}

impl Discretizer {
    pub fn n_states(&self) -> usize {
        self.buckets.eta_buckets * self.buckets.free_buckets * self.buckets.length_buckets
    }

    fn bucket(x: f64, lo: f64, hi: f64, n: usize) -> usize {
        if hi <= lo {
            return 0;
        }
        let frac = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        ((frac * n as f64) as usize).min(n - 1)
    }

    pub fn state_index(&self, eta: f64, free_blocks: u32, length_bits: f64) -> usize {
        let eb = Self::bucket(eta, self.eta_range.0, self.eta_range.1, self.buckets.eta_buckets);
        let fb = Self::bucket(
            free_blocks as f64,
            0.0,
            self.total_blocks as f64,
            self.buckets.free_buckets,
        );
        let lb = Self::bucket(
            length_bits,
            self.length_range.0,
            self.length_range.1,
            self.buckets.length_buckets,
        );
        (eb * self.buckets.free_buckets + fb) * self.buckets.length_buckets + lb
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QHyperparams {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub episodes: usize,
    /// Per-task reward is clip(1/delay, 0, r_max) minus the violation penalty.
    pub r_max: f64,
    pub violation_penalty: f64,
}

impl Default for QHyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            discount: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            episodes: 200,
            r_max: 1000.0,
            violation_penalty: 10.0,
        }
    }
}

/// Tabular action-value policy over discretized states; actions are block
/// counts 1..=x_max.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QPolicy {
    pub discretizer: Discretizer,
    pub x_max: u32,
    pub hyper: QHyperparams,
    table: Vec<f64>,
}

impl QPolicy {
    pub fn zeroed(discretizer: Discretizer, x_max: u32, hyper: QHyperparams) -> Self {
        let n = discretizer.n_states() * x_max as usize;
        Self {
            discretizer,
            x_max,
            hyper,
            table: vec![0.0; n],
        }
    }

    pub fn q(&self, state: usize, action_blocks: u32) -> f64 {
        self.table[state * self.x_max as usize + (action_blocks - 1) as usize]
    }

    pub fn max_q(&self, state: usize) -> f64 {
        let row = &self.table[state * self.x_max as usize..(state + 1) * self.x_max as usize];
        row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties break toward the smallest block count.
    pub fn greedy_action(&self, state: usize) -> u32 {
        let row = &self.table[state * self.x_max as usize..(state + 1) * self.x_max as usize];
        let mut best = 0usize;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        best as u32 + 1
    }

    pub fn values(&self) -> &[f64] {
        &self.table
    }
}

/// One-step temporal-difference update. `next_state` is `None` on episode
/// termination, in which case the target is the reward alone.
pub fn q_update(
    policy: &mut QPolicy,
    state: usize,
    action_blocks: u32,
    reward: f64,
    next_state: Option<usize>,
) {
    let idx = state * policy.x_max as usize + (action_blocks - 1) as usize;
    let bootstrap = match next_state {
        Some(s) => policy.hyper.discount * policy.max_q(s),
        None => 0.0,
    };
    let current = policy.table[idx];
    policy.table[idx] = current + policy.hyper.learning_rate * (reward + bootstrap - current);
}

/// Workload generator parameters for the allocation environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    pub total_blocks: u32,
    pub block_bandwidth_hz: f64,
    /// Poisson arrival rate in tasks per second.
    pub arrival_rate_per_s: f64,
    pub tasks_per_episode: usize,
    pub length_bits_range: (f64, f64),
    pub eta_range: (f64, f64),
    /// Uniform QoS budget tau applied to every task.
    pub max_delay_s: f64,
    pub wait_limits: WaitLimits,
    pub equal_share_k: u32,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            total_blocks: 20,
            block_bandwidth_hz: 180_000.0,
            arrival_rate_per_s: 2.0,
            tasks_per_episode: 100,
            length_bits_range: (1e5, 8e5),
            eta_range: (1.0, 4.0),
            max_delay_s: 0.5,
            wait_limits: WaitLimits::default(),
            equal_share_k: 4,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_blocks == 0 {
            return Err(Error::Config("total_blocks must be positive".into()));
        }
        if self.block_bandwidth_hz <= 0.0 || self.arrival_rate_per_s <= 0.0 {
            return Err(Error::Config(
                "bandwidth and arrival rate must be positive".into(),
            ));
        }
        if self.tasks_per_episode == 0 {
            return Err(Error::Config("tasks_per_episode must be positive".into()));
        }
        Ok(())
    }

    /// Sample one episode of tasks with Poisson arrivals.
    pub fn sample_episode<R: Rng>(&self, rng: &mut R) -> Vec<SpectrumTask> {
        let exp = Exp::new(self.arrival_rate_per_s).expect("positive rate");
        let mut t = 0.0;
        (0..self.tasks_per_episode)
            .map(|i| {
                t += exp.sample(rng);
                SpectrumTask {
                    id: i as u64,
                    length_bits: rng.gen_range(self.length_bits_range.0..=self.length_bits_range.1),
                    spectral_efficiency: rng.gen_range(self.eta_range.0..=self.eta_range.1),
                    arrival_s: t,
                    max_delay_s: self.max_delay_s,
                }
            })
            .collect()
    }

    pub fn discretizer(&self, buckets: BucketConfig) -> Discretizer {
        Discretizer {
            buckets,
            eta_range: self.eta_range,
            length_range: self.length_bits_range,
            total_blocks: self.total_blocks,
        }
    }
}

/// Per-episode statistics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_delay_s: f64,
    pub violation_rate: f64,
}

fn reward_for(outcome: &StepOutcome, hyper: &QHyperparams) -> f64 {
    let base = if outcome.delay_s > 0.0 {
        (1.0 / outcome.delay_s).clamp(0.0, hyper.r_max)
    } else {
        hyper.r_max
    };
    base - if outcome.qos_violated { hyper.violation_penalty } else { 0.0 }
}

/// Train a Q-learning agent on episodes drawn from the workload.
/// Deterministic given the RNG state.
pub fn train_agent<R: Rng>(
    workload: &WorkloadConfig,
    buckets: BucketConfig,
    hyper: QHyperparams,
    rng: &mut R,
) -> Result<(QPolicy, Vec<EpisodeStats>)> {
    workload.validate()?;
    let discretizer = workload.discretizer(buckets);
    let x_max = workload.total_blocks;
    let mut policy = QPolicy::zeroed(discretizer, x_max, hyper);
    let mut curve = Vec::with_capacity(policy.hyper.episodes);

    for episode in 0..policy.hyper.episodes {
        let eps = if policy.hyper.episodes <= 1 {
            policy.hyper.epsilon_end
        } else {
            let frac = episode as f64 / (policy.hyper.episodes - 1) as f64;
            policy.hyper.epsilon_start
                + (policy.hyper.epsilon_end - policy.hyper.epsilon_start) * frac
        };
        let tasks = workload.sample_episode(rng);
        let mut env = SpectrumEnv::new(workload.total_blocks, workload.block_bandwidth_hz);
        let mut total_delay = 0.0;
        let mut violations = 0usize;
        let mut pending: Option<(usize, u32, f64)> = None;

        for task in &tasks {
            let free = env.free_blocks_at(task.arrival_s);
            let state = policy
                .discretizer
                .state_index(task.spectral_efficiency, free, task.length_bits);
            // previous step's transition is now complete
            if let Some((ps, pa, pr)) = pending.take() {
                q_update(&mut policy, ps, pa, pr, Some(state));
            }
            let action = if rng.gen_bool(eps.clamp(0.0, 1.0)) {
                rng.gen_range(1..=x_max)
            } else {
                policy.greedy_action(state)
            };
            let outcome = env.step(task, action, &workload.wait_limits)?;
            total_delay += outcome.delay_s;
            violations += outcome.qos_violated as usize;
            pending = Some((state, action, reward_for(&outcome, &policy.hyper)));
        }
        if let Some((ps, pa, pr)) = pending.take() {
            q_update(&mut policy, ps, pa, pr, None);
        }
        curve.push(EpisodeStats {
            episode,
            mean_delay_s: total_delay / tasks.len() as f64,
            violation_rate: violations as f64 / tasks.len() as f64,
        });
    }
    Ok((policy, curve))
}

/// A policy under evaluation: the trained agent or a named baseline.
#[derive(Debug, Clone, Copy)]
pub enum PolicyRef<'a> {
    Agent(&'a QPolicy),
    Baseline(BaselineKind),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean_delay_s: f64,
    pub violation_rate: f64,
}

/// Run the workload with exploration off and report mean per-task delay and
/// the fraction of QoS violations.
pub fn evaluate_policy<R: Rng>(
    policy: PolicyRef<'_>,
    workload: &WorkloadConfig,
    episodes: usize,
    rng: &mut R,
) -> Result<EvalStats> {
    workload.validate()?;
    let mut total_delay = 0.0;
    let mut violations = 0usize;
    let mut n_tasks = 0usize;
    for _ in 0..episodes {
        let tasks = workload.sample_episode(rng);
        let mut env = SpectrumEnv::new(workload.total_blocks, workload.block_bandwidth_hz);
        for task in &tasks {
            let action = match policy {
                PolicyRef::Agent(agent) => {
                    let free = env.free_blocks_at(task.arrival_s);
                    let state = agent.discretizer.state_index(
                        task.spectral_efficiency,
                        free,
                        task.length_bits,
                    );
                    agent.greedy_action(state)
                }
                PolicyRef::Baseline(kind) => {
                    baseline_policy(kind, &env, task, workload.equal_share_k)
                }
            };
            let outcome = env.step(task, action, &workload.wait_limits)?;
            total_delay += outcome.delay_s;
            violations += outcome.qos_violated as usize;
            n_tasks += 1;
        }
    }
    Ok(EvalStats {
        mean_delay_s: total_delay / n_tasks as f64,
        violation_rate: violations as f64 / n_tasks as f64,
    })
}
