//! Dataset-size-weighted model aggregation: partial aggregation at
//! relays and the global merge at the edge server.

use super::model::ModelVector;
use crate::error::{Error, Result};

fn weighted_mean(parts: &[(&ModelVector, f64)]) -> Result<ModelVector> {
    let (first, _) = parts.first().ok_or(Error::Config("nothing to aggregate".into()))?;
    let mut out = ModelVector::zeros(first.classes, first.features);
    let mut total = 0.0;
    for (m, w) in parts {
        if !(*w > 0.0) {
            return Err(Error::Config(format!("aggregation weight must be positive, got {w}")));
        }
        if m.dim() != out.dim() {
            return Err(Error::DimensionMismatch { expected: out.dim(), got: m.dim() });
        }
        for (acc, v) in out.weights.iter_mut().zip(&m.weights) {
            *acc += w * v;
        }
        total += w;
    }
    for acc in &mut out.weights {
        *acc /= total;
    }
    Ok(out)
}

/// Partial aggregation at a relay: size-weighted mean of the client
/// models and the relay's own model. The effective size of the result
/// is the sum of all contributing sizes.
pub fn relay_aggregate(
    models: &[ModelVector],
    sizes: &[f64],
    relay_model: &ModelVector,
    relay_size: f64,
) -> Result<(ModelVector, f64)> {
    if models.len() != sizes.len() {
        return Err(Error::DimensionMismatch { expected: models.len(), got: sizes.len() });
    }
    let mut parts: Vec<(&ModelVector, f64)> =
        models.iter().zip(sizes.iter().copied()).collect();
    parts.push((relay_model, relay_size));
    let merged = weighted_mean(&parts)?;
    Ok((merged, sizes.iter().sum::<f64>() + relay_size))
}

/// Global aggregation over single-hop models (raw sizes) and relay
/// aggregates (effective sizes). With no relays this is plain FedAvg.
pub fn global_aggregate(
    one_hop: &[(ModelVector, f64)],
    relay_aggregates: &[(ModelVector, f64)],
) -> Result<ModelVector> {
    let parts: Vec<(&ModelVector, f64)> = one_hop
        .iter()
        .chain(relay_aggregates)
        .map(|(m, w)| (m, *w))
        .collect();
    weighted_mean(&parts)
}
