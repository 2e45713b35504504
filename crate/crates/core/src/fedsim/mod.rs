//! Desk-scale federated learning on a synthetic non-IID classification
//! task, with relay-side partial aggregation, the convergence-bound
//! calculators, and the NMSE comparison metric.

pub mod agg;
pub mod bounds;
pub mod data;
pub mod model;
pub mod run;

pub use agg::{global_aggregate, relay_aggregate};
pub use bounds::{bound_relay, bound_singlehop, delta_eff_sq, fedavg_bound, BoundParams};
pub use data::{make_noniid_data, Dataset, FlData};
pub use model::{accuracy, local_train, loss, ModelVector};
pub use run::{
    global_loss, ideal_schedule, run_fl, FlRunHistory, RelayGroup, RoundParticipants,
    RoundRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Synthetic classification task description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TaskSpec {
    pub classes: usize,
    pub feature_dim: usize,
    pub cluster_sep: f64,
    pub ridge: f64,
    pub test_samples: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self { classes: 10, feature_dim: 32, cluster_sep: 2.0, ridge: 1e-3, test_samples: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlScheme {
    Ideal,
    Cooperative,
    OneHop,
}

/// Federated learning configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FlConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub scheme: FlScheme,
    pub clients_per_round: usize,
    pub labels_per_sn: usize,
    pub dataset_size_range: [usize; 2],
    pub task: TaskSpec,
    pub seed: u64,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            local_epochs: 3,
            lr: 0.01,
            batch: 32,
            scheme: FlScheme::Cooperative,
            clients_per_round: 50,
            labels_per_sn: 2,
            dataset_size_range: [200, 400],
            task: TaskSpec::default(),
            seed: 1,
        }
    }
}

impl FlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.local_epochs == 0 {
            return Err(Error::Config("rounds and local_epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.labels_per_sn == 0 || self.labels_per_sn > self.task.classes {
            return Err(Error::Config("labels_per_sn must be in [1, classes]".into()));
        }
        if self.dataset_size_range[0] == 0
            || self.dataset_size_range[0] > self.dataset_size_range[1]
        {
            return Err(Error::Config("dataset_size_range must be positive with min <= max".into()));
        }
        Ok(())
    }
}

/// Normalized mean squared error of `candidate` against `reference`.
pub fn nmse(reference: &[f64], candidate: &[f64]) -> Result<f64> {
    if reference.len() != candidate.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), got: candidate.len() });
    }
    let denom: f64 = reference.iter().map(|y| y * y).sum();
    if denom == 0.0 {
        return Err(Error::Config("nmse reference series is all-zero".into()));
    }
    let num: f64 = reference.iter().zip(candidate).map(|(y, yh)| (yh - y).powi(2)).sum();
    Ok(num / denom)
}
