//! Tier selection as a contextual bandit.
//!
//! A one-hidden-layer softmax network maps the 28-feature week summary to a
//! likelihood per tier. Training is REINFORCE on single-step episodes: the
//! log-likelihood of the chosen tier is pushed up or down in proportion to
//! how the observed reward compares to the best reward seen so far, with L2
//! weight decay. Actions are chosen epsilon-greedily, with epsilon decaying
//! linearly to zero.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DAYS_PER_WEEK;
use crate::error::{Error, Result};
use crate::features::{PolicyState, FEATURE_ORDER, STATE_DIM};
use crate::nn::{self, Activation, Network};

pub const DEFAULT_ARMS: usize = 3;
pub const DEFAULT_HIDDEN_UNITS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyTrainConfig {
    pub episodes: usize,
    pub epsilon0: f64,
    pub epsilon_zero_episode: usize,
    pub gamma_l2: f64,
    pub learning_rate: f64,
    pub hidden_units: usize,
    pub baseline: BaselineScope,
    pub seed: u64,
}

/// Which observations feed the best-observed-reward baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineScope {
    /// One best reward per context window.
    #[default]
    PerContext,
    /// One best reward over every window.
    Global,
}

impl Default for PolicyTrainConfig {
    fn default() -> Self {
        Self {
            episodes: 6000,
            epsilon0: 0.5,
            epsilon_zero_episode: 3000,
            gamma_l2: 1e-3,
            learning_rate: 0.005,
            hidden_units: DEFAULT_HIDDEN_UNITS,
            baseline: BaselineScope::PerContext,
            seed: 17,
        }
    }
}

impl PolicyTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::InvalidArgument("episodes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon0) {
            return Err(Error::InvalidArgument("epsilon0 must lie in [0, 1]".into()));
        }
        if self.epsilon_zero_episode > self.episodes {
            return Err(Error::InvalidArgument(
                "epsilon_zero_episode cannot exceed episodes".into(),
            ));
        }
        if !(self.gamma_l2 >= 0.0 && self.gamma_l2.is_finite()) {
            return Err(Error::InvalidArgument(
                "gamma_l2 must be nonnegative".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning_rate must be positive".into(),
            ));
        }
        if self.hidden_units == 0 {
            return Err(Error::InvalidArgument(
                "hidden_units must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Probability of choosing each tier; sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Likelihoods(pub Vec<f64>);

impl Likelihoods {
    /// Index of the largest likelihood, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// A chosen tier, stored zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub index: usize,
    pub arms: usize,
}

impl Action {
    pub fn one_hot(&self) -> Vec<u8> {
        (0..self.arms).map(|k| u8::from(k == self.index)).collect()
    }

    /// One-based tier number.
    pub fn tier(&self) -> usize {
        self.index + 1
    }
}

/// With probability `epsilon` a uniformly random arm, otherwise the argmax.
/// The RNG is not touched when `epsilon` is zero.
pub fn select_action<R: Rng + ?Sized>(s: &Likelihoods, epsilon: f64, rng: &mut R) -> Action {
    let arms = s.0.len();
    let index = if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..arms)
    } else {
        s.argmax()
    };
    Action { index, arms }
}

/// Linear decay from `epsilon0` at episode 0 to zero at `epsilon_zero_episode`.
pub fn epsilon_at(episode: usize, config: &PolicyTrainConfig) -> f64 {
    if episode >= config.epsilon_zero_episode {
        return 0.0;
    }
    let frac = episode as f64 / config.epsilon_zero_episode as f64;
    (config.epsilon0 * (1.0 - frac)).clamp(0.0, config.epsilon0)
}

/// Best reward observed so far. Before the first observation the advantage
/// of a reward is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BaselineTracker {
    best: Option<f64>,
}

impl BaselineTracker {
    pub fn value(&self) -> Option<f64> {
        self.best
    }

    pub fn advantage(&self, reward: f64) -> f64 {
        reward - self.best.unwrap_or(reward)
    }

    pub fn observe(&mut self, reward: f64) {
        match self.best {
            Some(b) if reward <= b => {}
            _ => self.best = Some(reward),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    net: Network,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyHeader {
    arms: usize,
    hidden_units: usize,
    state_dim: usize,
    days: usize,
    feature_order: Vec<String>,
    hidden_activation: Activation,
}

const POLICY_PARAMS: &str = "policy.bin";
const POLICY_HEADER: &str = "policy.toml";

impl PolicyNet {
    pub fn new(arms: usize, hidden_units: usize, seed: u64) -> Result<Self> {
        let spec = nn::chain(
            &[STATE_DIM, hidden_units, arms],
            Activation::Tanh,
            Activation::Softmax,
        );
        Ok(Self {
            net: Network::init(&spec, seed)?,
        })
    }

    pub fn from_network(net: Network) -> Result<Self> {
        let spec = net.spec();
        if spec.len() != 2
            || spec[0].input_dim != STATE_DIM
            || spec[0].activation != Activation::Tanh
            || spec[1].activation != Activation::Softmax
        {
            return Err(Error::Spec(format!(
                "policy network must be {STATE_DIM} -> hidden (tanh) -> arms (softmax)"
            )));
        }
        Ok(Self { net })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn arms(&self) -> usize {
        self.net.output_dim()
    }

    pub fn likelihoods(&self, state: &PolicyState) -> Likelihoods {
        Likelihoods(
            self.net
                .predict(state.as_slice())
                .expect("state dimension is fixed by the type"),
        )
    }

    /// The deterministic choice used at evaluation time.
    pub fn greedy(&self, state: &PolicyState) -> Action {
        Action {
            index: self.likelihoods(state).argmax(),
            arms: self.arms(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = PolicyHeader {
            arms: self.arms(),
            hidden_units: self.net.layers()[0].spec().output_dim,
            state_dim: STATE_DIM,
            days: DAYS_PER_WEEK,
            feature_order: FEATURE_ORDER.iter().map(|s| s.to_string()).collect(),
            hidden_activation: Activation::Tanh,
        };
        crate::io::write_toml(&dir.join(POLICY_HEADER), &header)?;
        self.net.save(&dir.join(POLICY_PARAMS))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header_path = dir.join(POLICY_HEADER);
        let header: PolicyHeader = crate::io::read_toml(&header_path)?;
        if header.state_dim != STATE_DIM
            || header.days != DAYS_PER_WEEK
            || header.feature_order != FEATURE_ORDER
        {
            return Err(Error::format(&header_path, "unsupported feature layout"));
        }
        let params_path = dir.join(POLICY_PARAMS);
        if !params_path.exists() {
            return Err(Error::MissingArtifact(params_path));
        }
        let policy = Self::from_network(Network::load(&params_path)?)?;
        if policy.arms() != header.arms
            || policy.net.layers()[0].spec().output_dim != header.hidden_units
        {
            return Err(Error::format(
                &header_path,
                "header disagrees with parameters",
            ));
        }
        Ok(policy)
    }
}

/// One REINFORCE step on `-(R - R~) ln s[action] + (gamma / 2) ||W||^2`,
/// after which the baseline absorbs `reward`. Returns the advantage used.
pub fn reinforce_update(
    policy: &mut PolicyNet,
    state: &PolicyState,
    action: Action,
    reward: f64,
    baseline: &mut BaselineTracker,
    config: &PolicyTrainConfig,
) -> Result<f64> {
    if !reward.is_finite() {
        return Err(Error::InvalidArgument("reward must be finite".into()));
    }
    let advantage = baseline.advantage(reward);
    let trace = policy.net.infer(state.as_slice())?;
    let grads = policy
        .net
        .backward_logprob(&trace, action.index, -advantage, config.gamma_l2)?;
    policy.net.sgd_step(&grads, config.learning_rate)?;
    baseline.observe(reward);
    Ok(advantage)
}

/// Contexts with the reward each arm would earn on them.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditEnv {
    states: Vec<PolicyState>,
    rewards: Vec<Vec<f64>>,
}

impl BanditEnv {
    pub fn new(states: Vec<PolicyState>, rewards: Vec<Vec<f64>>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument(
                "bandit environment has no contexts".into(),
            ));
        }
        if states.len() != rewards.len() {
            return Err(Error::Dimension {
                expected: states.len(),
                got: rewards.len(),
            });
        }
        let arms = rewards[0].len();
        if arms == 0 {
            return Err(Error::InvalidArgument(
                "bandit environment has no arms".into(),
            ));
        }
        for row in &rewards {
            if row.len() != arms {
                return Err(Error::Dimension {
                    expected: arms,
                    got: row.len(),
                });
            }
            if row.iter().any(|r| !r.is_finite()) {
                return Err(Error::InvalidArgument("rewards must be finite".into()));
            }
        }
        Ok(Self { states, rewards })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn arms(&self) -> usize {
        self.rewards[0].len()
    }

    pub fn states(&self) -> &[PolicyState] {
        &self.states
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    /// Index of the highest-reward arm per context, lowest index on ties.
    pub fn best_arms(&self) -> Vec<usize> {
        self.rewards
            .iter()
            .map(|row| Likelihoods(row.clone()).argmax())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub window: usize,
    pub epsilon: f64,
    /// One-based tier.
    pub action: usize,
    pub reward: f64,
    /// Baseline for this window after the episode.
    pub baseline: f64,
}

/// Trains a fresh policy on `env`; fully determined by `config.seed`.
pub fn train_policy(
    env: &BanditEnv,
    config: &PolicyTrainConfig,
) -> Result<(PolicyNet, Vec<EpisodeLog>)> {
    config.validate()?;
    if env.is_empty() {
        return Err(Error::InvalidArgument(
            "bandit environment has no contexts".into(),
        ));
    }
    let mut policy = PolicyNet::new(env.arms(), config.hidden_units, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let trackers = match config.baseline {
        BaselineScope::PerContext => env.len(),
        BaselineScope::Global => 1,
    };
    let mut baselines = vec![BaselineTracker::default(); trackers];
    let mut log = Vec::with_capacity(config.episodes);
    for episode in 0..config.episodes {
        let window = rng.random_range(0..env.len());
        let state = &env.states[window];
        let epsilon = epsilon_at(episode, config);
        let action = select_action(&policy.likelihoods(state), epsilon, &mut rng);
        let reward = env.rewards[window][action.index];
        let baseline = &mut baselines[window % trackers];
        reinforce_update(&mut policy, state, action, reward, baseline, config)?;
        log.push(EpisodeLog {
            episode,
            window,
            epsilon,
            action: action.tier(),
            reward,
            baseline: baseline.value().unwrap_or(reward),
        });
    }
    Ok((policy, log))
}

/// Fraction of contexts on which the greedy policy picks a best arm.
pub fn best_arm_rate(policy: &PolicyNet, env: &BanditEnv) -> f64 {
    let hits = env
        .states
        .iter()
        .zip(&env.rewards)
        .filter(|(s, row)| {
            let chosen = policy.greedy(s).index;
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row[chosen] == best
        })
        .count();
    hits as f64 / env.len() as f64
}
