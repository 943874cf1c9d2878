use std::path::PathBuf;

use log::{info, warn};

use super::csv_io::{write_aggregate, write_sweep};
use super::experiment::{run_experiment, AgentKind, ExperimentConfig};
use super::series::final_score;
use super::HarnessError;
use crate::env::EnvConfig;

/// Final score of one agent in one (users, items) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub users: usize,
    pub items: usize,
    pub agent: AgentKind,
    pub score_mean: f64,
    pub score_std: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepFailure {
    pub users: usize,
    pub items: usize,
    pub agent: AgentKind,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub user_axis: Vec<usize>,
    pub item_axis: Vec<usize>,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

impl SweepGrid {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub agents: Vec<AgentKind>,
    pub user_axis: Vec<usize>,
    pub item_axis: Vec<usize>,
    /// Settings shared by every cell; agent and catalog size are replaced per cell.
    pub template: ExperimentConfig,
    /// Receives `sweep.csv` and `cells/<users>x<items>_<agent>.csv` aggregates.
    pub output_dir: Option<PathBuf>,
}

impl SweepConfig {
    pub fn new(agents: Vec<AgentKind>, user_axis: Vec<usize>, item_axis: Vec<usize>, episodes: usize, runs: usize) -> Self {
        let mut template = ExperimentConfig::new(AgentKind::Random, EnvConfig::default(), episodes);
        template.runs = runs;
        Self {
            agents,
            user_axis,
            item_axis,
            template,
            output_dir: None,
        }
    }

    fn cell(&self, users: usize, items: usize, agent: AgentKind) -> ExperimentConfig {
        ExperimentConfig {
            agent,
            env: EnvConfig {
                num_users: users,
                num_items: items,
                ..self.template.env.clone()
            },
            output_dir: None,
            checkpoint: false,
            ..self.template.clone()
        }
    }
}

fn strictly_increasing(axis: &[usize]) -> bool {
    !axis.is_empty() && axis.windows(2).all(|w| w[0] < w[1])
}

/// Runs every (users, items, agent) combination. A failing cell is recorded
/// and the sweep moves on; only invalid axes or output errors abort it.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepGrid, HarnessError> {
    if !strictly_increasing(&config.user_axis) || !strictly_increasing(&config.item_axis) {
        return Err(HarnessError::Config("sweep axes must be non-empty and strictly increasing".into()));
    }
    if config.agents.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one agent".into()));
    }
    let mut grid = SweepGrid {
        user_axis: config.user_axis.clone(),
        item_axis: config.item_axis.clone(),
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for &users in &config.user_axis {
        for &items in &config.item_axis {
            for &agent in &config.agents {
                info!("sweep cell {users}x{items} {agent}");
                let cell = config.cell(users, items, agent);
                match run_experiment(&cell) {
                    Ok(result) => {
                        let score = final_score(&result.aggregate);
                        if let Some(dir) = &config.output_dir {
                            let name = format!("{users}x{items}_{agent}.csv");
                            write_aggregate(&result.aggregate, &dir.join("cells").join(name))?;
                        }
                        grid.rows.push(SweepRow {
                            users,
                            items,
                            agent,
                            score_mean: score.mean,
                            score_std: score.std,
                            runs: result.aggregate.runs,
                        });
                    }
                    Err(e) => {
                        warn!("sweep cell {users}x{items} {agent} failed: {e}");
                        grid.failures.push(SweepFailure {
                            users,
                            items,
                            agent,
                            error: e.to_string(),
                        });
                    }
                }
            }
        }
    }
    if let Some(dir) = &config.output_dir {
        write_sweep(&grid.rows, &dir.join("sweep.csv"))?;
    }
    Ok(grid)
}
