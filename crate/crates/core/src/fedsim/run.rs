//! The federated training loop: local SGD at participants, partial
//! aggregation at relays, global aggregation at the edge server.

use serde::Serialize;
use std::io::Write;

use super::agg::{global_aggregate, relay_aggregate};
use super::data::FlData;
use super::model::{accuracy, local_train, loss, ModelVector};
use super::FlConfig;
use crate::error::Result;
use crate::grouping::Grouping;
use crate::rng::{RngHub, StreamKind};

/// One relay and the two-hop SNs it serves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayGroup {
    pub relay: usize,
    pub clients: Vec<usize>,
}

/// Who participates in a round, and through which path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundParticipants {
    /// Everyone uploads directly (ideal / single-hop schemes).
    Flat(Vec<usize>),
    /// Two-hop SNs ride their relay's aggregate.
    Hierarchical { one_hop: Vec<usize>, groups: Vec<RelayGroup> },
}

impl RoundParticipants {
    pub fn from_grouping(g: &Grouping) -> Self {
        let groups = g
            .relays
            .iter()
            .map(|&relay| RelayGroup {
                relay,
                clients: g.two_hop.iter().filter(|(_, &k)| k == relay).map(|(&n, _)| n).collect(),
            })
            .collect();
        RoundParticipants::Hierarchical {
            one_hop: g.one_hop.iter().copied().collect(),
            groups,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            RoundParticipants::Flat(ids) => ids.len(),
            RoundParticipants::Hierarchical { one_hop, groups } => {
                one_hop.len() + groups.iter().map(|g| 1 + g.clients.len()).sum::<usize>()
            }
        }
    }

    fn normalized(&self) -> (Vec<usize>, Vec<RelayGroup>) {
        match self {
            RoundParticipants::Flat(ids) => (ids.clone(), Vec::new()),
            RoundParticipants::Hierarchical { one_hop, groups } => {
                (one_hop.clone(), groups.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub participants: usize,
}

/// Full history of one FL run.
#[derive(Debug, Clone)]
pub struct FlRunHistory {
    pub scheme: String,
    pub rows: Vec<RoundRecord>,
    pub final_model: ModelVector,
}

impl FlRunHistory {
    pub fn loss_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    pub fn accuracy_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.accuracy).collect()
    }

    pub fn mean_participants(&self) -> f64 {
        self.rows.iter().map(|r| r.participants as f64).sum::<f64>() / self.rows.len() as f64
    }

    /// CSV rows: round,scheme,loss,accuracy,participants.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "scheme", "loss", "accuracy", "participants"])?;
        for r in &self.rows {
            w.write_record(&[
                r.round.to_string(),
                self.scheme.clone(),
                r.loss.to_string(),
                r.accuracy.to_string(),
                r.participants.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Global objective: dataset-size-weighted mean of per-SN losses over
/// the whole population (not just this round's participants).
pub fn global_loss(model: &ModelVector, data: &FlData, ridge: f64) -> f64 {
    let total: f64 = data.per_sn.iter().map(|d| d.len() as f64).sum();
    data.per_sn
        .iter()
        .map(|d| d.len() as f64 / total * loss(model, d, ridge))
        .sum()
}

/// Runs federated averaging over the supplied per-round participant
/// schedule. Local training of SN n in round t draws from a stream
/// keyed by (t, n) only, so matched schemes share local randomness.
pub fn run_fl(
    cfg: &FlConfig,
    data: &FlData,
    schedule: &[RoundParticipants],
    scheme: &str,
    hub: &RngHub,
) -> Result<FlRunHistory> {
    let mut model = ModelVector::zeros(cfg.task.classes, cfg.task.feature_dim);
    let mut rows = Vec::with_capacity(schedule.len());

    for (round, participants) in schedule.iter().enumerate() {
        let (one_hop, groups) = participants.normalized();

        let train_one = |sn: usize| -> ModelVector {
            let mut rng = hub.substream(StreamKind::FlTrain, round as u64, sn as u64);
            local_train(
                &model,
                &data.per_sn[sn],
                cfg.local_epochs,
                cfg.lr,
                cfg.batch,
                cfg.task.ridge,
                &mut rng,
            )
        };

        if participants.count() > 0 {
            let one_hop_parts: Vec<(ModelVector, f64)> = one_hop
                .iter()
                .map(|&sn| (train_one(sn), data.per_sn[sn].len() as f64))
                .collect();
            let relay_parts: Vec<(ModelVector, f64)> = groups
                .iter()
                .map(|g| {
                    let client_models: Vec<ModelVector> =
                        g.clients.iter().map(|&sn| train_one(sn)).collect();
                    let client_sizes: Vec<f64> =
                        g.clients.iter().map(|&sn| data.per_sn[sn].len() as f64).collect();
                    relay_aggregate(
                        &client_models,
                        &client_sizes,
                        &train_one(g.relay),
                        data.per_sn[g.relay].len() as f64,
                    )
                })
                .collect::<Result<_>>()?;
            model = global_aggregate(&one_hop_parts, &relay_parts)?;
        }

        rows.push(RoundRecord {
            round,
            loss: global_loss(&model, data, cfg.task.ridge),
            accuracy: accuracy(&model, &data.test),
            participants: participants.count(),
        });
    }

    Ok(FlRunHistory { scheme: scheme.to_string(), rows, final_model: model })
}

/// Uniform client sampling for the ideal scheme.
pub fn ideal_schedule(
    cfg: &FlConfig,
    n_sns: usize,
    hub: &RngHub,
) -> Vec<RoundParticipants> {
    use rand::seq::SliceRandom;
    (0..cfg.rounds)
        .map(|round| {
            let mut rng = hub.substream(StreamKind::SchemeRandom, round as u64, 1 << 20);
            let mut ids: Vec<usize> = (0..n_sns).collect();
            ids.shuffle(&mut rng);
            ids.truncate(cfg.clients_per_round.min(n_sns));
            ids.sort_unstable();
            RoundParticipants::Flat(ids)
        })
        .collect()
}
