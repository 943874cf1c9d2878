use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use clickrec::agent::dqn::LossKind;
use clickrec::harness::AgentKind;
use serde::de::DeserializeOwned;
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "clickrec", version, about = "Train and compare recommender agents in a simulated click environment")]
pub struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one agent over replicated runs and write its CTR curves.
    Train(TrainArgs),
    /// Final scores of several agents over a users × items grid.
    Sweep(SweepArgs),
    /// Finite-difference check of every layer and loss.
    Gradcheck(GradcheckArgs),
    /// Play episodes with a saved agent, without training.
    Eval(EvalArgs),
}

fn parse_agent(s: &str) -> Result<AgentKind, String> {
    s.parse()
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    match s {
        "mse" => Ok(LossKind::Mse),
        "huber" => Ok(LossKind::Huber),
        _ => Err(format!("unknown loss {s:?} (expected mse or huber)")),
    }
}

/// Fills every unset field of `$dst` from `$src`.
macro_rules! overlay {
    ($dst:expr, $src:expr; $($field:ident),* $(,)?) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field; } )*
    };
}

/// Reads a JSON object whose keys are the long flag names.
fn read_config<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainArgs {
    /// JSON file of flag values; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_agent)]
    pub agent: Option<AgentKind>,
    /// DQN regression loss.
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub click_scale: Option<f64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub history_len: Option<usize>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Hidden width of the value or policy network.
    #[arg(long)]
    pub hidden_units: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub replay_capacity: Option<usize>,
    #[arg(long)]
    pub epsilon_horizon: Option<f64>,
    #[arg(long)]
    pub huber_delta: Option<f64>,
    #[arg(long)]
    pub normalize_returns: Option<bool>,
    #[arg(long)]
    pub episodes_per_update: Option<usize>,
    #[arg(long)]
    pub target_network: Option<bool>,
    #[arg(long)]
    pub target_sync_interval: Option<u64>,
    /// Allow more than 1,000 users or items.
    #[arg(long)]
    pub full_scale: bool,
    /// Run replicates one after another instead of in parallel.
    #[arg(long)]
    pub serial: bool,
}

impl TrainArgs {
    pub fn resolve(mut self) -> anyhow::Result<Self> {
        if let Some(path) = self.config.clone() {
            let file: TrainArgs = read_config(&path)?;
            overlay!(self, file; agent, loss, users, items, features, click_scale, episodes, runs,
                seed, out, gamma, lr, history_len, embedding_dim, hidden_units, batch_size,
                replay_capacity, epsilon_horizon, huber_delta, normalize_returns,
                episodes_per_update, target_network, target_sync_interval);
            self.full_scale |= file.full_scale;
            self.serial |= file.serial;
        }
        if self.agent.is_none() {
            bail!("--agent is required");
        }
        if self.out.is_none() {
            bail!("--out is required");
        }
        Ok(self)
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Comma-separated agent names.
    #[arg(long, value_delimiter = ',', value_parser = parse_agent)]
    pub agents: Option<Vec<AgentKind>>,
    #[arg(long, value_delimiter = ',')]
    pub user_axis: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub item_axis: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub click_scale: Option<f64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Allow axis values above 1,000.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long)]
    pub serial: bool,
}

impl SweepArgs {
    pub fn resolve(mut self) -> anyhow::Result<Self> {
        if let Some(path) = self.config.clone() {
            let file: SweepArgs = read_config(&path)?;
            overlay!(self, file; agents, user_axis, item_axis, loss, features, click_scale,
                episodes, runs, seed, out);
            self.full_scale |= file.full_scale;
            self.serial |= file.serial;
        }
        if self.out.is_none() {
            bail!("--out is required");
        }
        Ok(self)
    }
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Largest accepted relative error.
    #[arg(long, default_value_t = clickrec::harness::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Model file written by `train`; its agent.json must sit beside it.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub click_scale: Option<f64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional CSV of per-episode CTR.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub full_scale: bool,
}

impl EvalArgs {
    pub fn resolve(mut self) -> anyhow::Result<Self> {
        if let Some(path) = self.config.clone() {
            let file: EvalArgs = read_config(&path)?;
            overlay!(self, file; model, users, items, features, click_scale, episodes, seed, out);
            self.full_scale |= file.full_scale;
        }
        if self.model.is_none() {
            bail!("--model is required");
        }
        Ok(self)
    }
}
