//! Grouping baselines the experiments compare against.

use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

use crate::airtime::AggregationMode;
use crate::error::{Error, Result};
use crate::grouping::{
    classify, ternary_search_threshold, Grouping, GroupingContext, TernarySearchConfig,
};
use serde::{Deserialize, Serialize};

/// Transmission scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Ternary-search threshold, best-relay selection.
    Proposed,
    /// Classification at the mean direct gain.
    FixedTh,
    /// Every non-relay SN is forced through its best relay.
    #[serde(rename = "only_2hop_fixed_th")]
    Only2hopFixedTh,
    /// Direct transmission for everyone.
    #[serde(rename = "only_1hop")]
    Only1hop,
    /// Relay set at the mean gain, candidate relay drawn at random.
    RandomRelay,
    /// Proposed grouping, relays forward unaggregated packets.
    TwoHopWoPa,
    /// Direct transmission at maximum power, no power optimization.
    OneHopPmax,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::FixedTh => "fixed_th",
            Scheme::Only2hopFixedTh => "only_2hop_fixed_th",
            Scheme::Only1hop => "only_1hop",
            Scheme::RandomRelay => "random_relay",
            Scheme::TwoHopWoPa => "two_hop_wo_pa",
            Scheme::OneHopPmax => "one_hop_pmax",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "proposed" => Ok(Scheme::Proposed),
            "fixed_th" => Ok(Scheme::FixedTh),
            "only_2hop_fixed_th" => Ok(Scheme::Only2hopFixedTh),
            "only_1hop" => Ok(Scheme::Only1hop),
            "random_relay" => Ok(Scheme::RandomRelay),
            "two_hop_wo_pa" => Ok(Scheme::TwoHopWoPa),
            "one_hop_pmax" => Ok(Scheme::OneHopPmax),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }

    /// Whether relays merge their clients' packets.
    pub fn aggregation(&self) -> AggregationMode {
        match self {
            Scheme::TwoHopWoPa => AggregationMode::None,
            _ => AggregationMode::Partial,
        }
    }

    /// Whether transmit powers are optimized after pruning.
    pub fn optimizes_power(&self) -> bool {
        !matches!(self, Scheme::OneHopPmax)
    }
}

fn mean_direct_gain(ctx: &GroupingContext) -> f64 {
    let n = ctx.rates.n_sns();
    (0..n).map(|i| ctx.direct_gain_sq(i)).sum::<f64>() / n as f64
}

/// Classification at the average direct-channel gain (no search).
pub fn fixed_threshold_scheme(ctx: &GroupingContext) -> Grouping {
    classify(mean_direct_gain(ctx), ctx)
}

/// Everyone transmits directly.
pub fn only_1hop_grouping(ctx: &GroupingContext) -> Grouping {
    classify(f64::INFINITY, ctx)
}

/// Relay set at the mean gain; every non-relay SN rides its best relay
/// even when the direct path would be faster. Degenerates to all-direct
/// when the relay set is empty.
pub fn only_2hop_fixed_th(ctx: &GroupingContext) -> Grouping {
    let threshold = mean_direct_gain(ctx);
    let n = ctx.rates.n_sns();
    let relays: BTreeSet<usize> = (0..n).filter(|&i| ctx.direct_gain_sq(i) > threshold).collect();
    if relays.is_empty() {
        return only_1hop_grouping(ctx);
    }
    let mut two_hop = BTreeMap::new();
    let mut delay_table = BTreeMap::new();
    for sn in 0..n {
        if relays.contains(&sn) {
            continue;
        }
        let (best, delay) = relays
            .iter()
            .map(|&k| {
                let d = 1.0 / ctx.rates.rate_pair(sn, k, ctx.p_uniform).max(crate::airtime::MIN_RATE)
                    + 1.0 / ctx.rates.rate_direct(k, ctx.p_uniform).max(crate::airtime::MIN_RATE);
                (k, d)
            })
            .fold(None::<(usize, f64)>, |acc, (k, d)| match acc {
                Some((_, bd)) if bd <= d => acc,
                _ => Some((k, d)),
            })
            .expect("relay set nonempty");
        two_hop.insert(sn, best);
        delay_table.insert(sn, delay);
    }
    Grouping { one_hop: BTreeSet::new(), two_hop, relays, delay_table, threshold }
}

/// Relay set at the mean gain; each non-relay SN compares the direct
/// path against one uniformly drawn candidate relay.
pub fn random_relay_scheme<R: Rng + ?Sized>(ctx: &GroupingContext, rng: &mut R) -> Grouping {
    let threshold = mean_direct_gain(ctx);
    let n = ctx.rates.n_sns();
    let relays: BTreeSet<usize> = (0..n).filter(|&i| ctx.direct_gain_sq(i) > threshold).collect();
    let relay_vec: Vec<usize> = relays.iter().copied().collect();

    let mut one_hop = BTreeSet::new();
    let mut two_hop = BTreeMap::new();
    let mut delay_table = BTreeMap::new();
    for sn in 0..n {
        if relays.contains(&sn) {
            continue;
        }
        let direct = 1.0 / ctx.rates.rate_direct(sn, ctx.p_uniform).max(crate::airtime::MIN_RATE);
        let candidate = if relay_vec.is_empty() {
            None
        } else {
            let k = relay_vec[rng.random_range(0..relay_vec.len())];
            let d = 1.0 / ctx.rates.rate_pair(sn, k, ctx.p_uniform).max(crate::airtime::MIN_RATE)
                + 1.0 / ctx.rates.rate_direct(k, ctx.p_uniform).max(crate::airtime::MIN_RATE);
            Some((k, d))
        };
        match candidate {
            Some((k, d)) if d < direct => {
                two_hop.insert(sn, k);
                delay_table.insert(sn, d);
            }
            _ => {
                one_hop.insert(sn);
                delay_table.insert(sn, direct);
            }
        }
    }
    Grouping { one_hop, two_hop, relays, delay_table, threshold }
}

/// Produces the scheme's grouping at uniform power.
pub fn grouping_for<R: Rng + ?Sized>(
    scheme: Scheme,
    ctx: &GroupingContext,
    rng: &mut R,
) -> Result<Grouping> {
    Ok(match scheme {
        Scheme::Proposed | Scheme::TwoHopWoPa => {
            ternary_search_threshold(ctx, &TernarySearchConfig::default_for(ctx))?.grouping
        }
        Scheme::FixedTh => fixed_threshold_scheme(ctx),
        Scheme::Only2hopFixedTh => only_2hop_fixed_th(ctx),
        Scheme::Only1hop | Scheme::OneHopPmax => only_1hop_grouping(ctx),
        Scheme::RandomRelay => random_relay_scheme(ctx, rng),
    })
}
