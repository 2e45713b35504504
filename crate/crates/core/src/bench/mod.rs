//! Experiment runner and configuration surface for the reproduction
//! studies: outage, participation, energy CDFs and sweeps, imperfect-CSI
//! comparisons, and the FL convergence comparison.

pub mod experiment;
pub mod plotdata;
pub mod schemes;

pub use experiment::{
    fl_nmse_per_seed, primary_metric, run_experiment, wilson_interval, ExperimentKind,
    ExperimentSpec, ResultRow, ResultTable,
};
pub use plotdata::{emit_plotdata, Series};
pub use schemes::{
    fixed_threshold_scheme, grouping_for, only_1hop_grouping, only_2hop_fixed_th,
    random_relay_scheme, Scheme,
};

use serde::{Deserialize, Serialize};

use crate::channel::SimConfig;
use crate::error::Result;
use crate::fedsim::FlConfig;

/// Top-level JSON configuration document: PHY, FL, and the experiment.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub fl: FlConfig,
    pub experiment: Option<ExperimentSpec>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.sim.validate()?;
        cfg.fl.validate()?;
        if let Some(spec) = &cfg.experiment {
            spec.validate()?;
        }
        Ok(cfg)
    }
}
