//! SN classification into single-hop and two-hop roles with relay
//! selection (threshold ternary search), and greedy deadline pruning to
//! maximize round participation.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::airtime::{AggregationMode, RateModel, MIN_RATE};
use crate::error::{Error, Result};

/// Inputs the classifier works with: a rate model, the noise power that
/// converts normalized gains back to raw channel gains, and the uniform
/// power level every SN is assumed to use during classification.
#[derive(Debug, Clone, Copy)]
pub struct GroupingContext<'a> {
    pub rates: &'a RateModel,
    pub sigma0: f64,
    pub p_uniform: f64,
}

impl<'a> GroupingContext<'a> {
    pub fn new(rates: &'a RateModel, sigma0: f64, p_uniform: f64) -> Self {
        Self { rates, sigma0, p_uniform }
    }

    /// Raw channel gain |h_n^a|^2 used for relay eligibility.
    pub fn direct_gain_sq(&self, n: usize) -> f64 {
        self.rates.a_direct[n] * self.sigma0
    }

    fn inv_rate_direct(&self, n: usize) -> f64 {
        inv(self.rates.rate_direct(n, self.p_uniform))
    }

    fn inv_rate_pair(&self, src: usize, dst: usize) -> f64 {
        inv(self.rates.rate_pair(src, dst, self.p_uniform))
    }
}

fn inv(rate: f64) -> f64 {
    if rate < MIN_RATE {
        f64::INFINITY
    } else {
        1.0 / rate
    }
}

/// Partition of SNs into transmission roles, with the per-SN normalized
/// delay (1/rate terms, before the |B|/W scale) used for pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub one_hop: BTreeSet<usize>,
    pub two_hop: BTreeMap<usize, usize>,
    pub relays: BTreeSet<usize>,
    pub delay_table: BTreeMap<usize, f64>,
    pub threshold: f64,
}

impl Grouping {
    pub fn n_participants(&self) -> usize {
        self.one_hop.len() + self.two_hop.len() + self.relays.len()
    }

    /// All SNs whose model reaches the ES this round, ascending.
    pub fn participants(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .one_hop
            .iter()
            .chain(self.two_hop.keys())
            .chain(self.relays.iter())
            .copied()
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn clients_of(&self, relay: usize) -> usize {
        self.two_hop.values().filter(|&&k| k == relay).count()
    }

    pub fn is_empty(&self) -> bool {
        self.n_participants() == 0
    }

    pub fn export(&self, t_ul_s: f64) -> GroupingExport {
        GroupingExport {
            threshold: self.threshold,
            one_hop: self.one_hop.iter().copied().collect(),
            two_hop: self.two_hop.clone(),
            relays: self.relays.iter().copied().collect(),
            t_ul_s,
        }
    }
}

/// JSON surface of a grouping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupingExport {
    pub threshold: f64,
    pub one_hop: Vec<usize>,
    pub two_hop: BTreeMap<usize, usize>,
    pub relays: Vec<usize>,
    pub t_ul_s: f64,
}

/// Normalized uplink time of a grouping (sum of 1/rate slot terms);
/// multiply by |B|/W for seconds. Infinite when any slot is dead.
pub fn normalized_uplink_time(g: &Grouping, ctx: &GroupingContext, mode: AggregationMode) -> f64 {
    let mut t = 0.0;
    for &n in &g.one_hop {
        t += ctx.inv_rate_direct(n);
    }
    for (&n, &k) in &g.two_hop {
        t += ctx.inv_rate_pair(n, k);
    }
    for &k in &g.relays {
        t += mode.relay_packets(g.clients_of(k)) * ctx.inv_rate_direct(k);
    }
    t
}

/// Per-relay two-hop delay options for one SN: 1/r1(n,k) + 1/r2(k) for
/// every relay k, in the iteration order of `relays`.
pub fn delay_vector(sn: usize, ctx: &GroupingContext, relays: &BTreeSet<usize>) -> Result<Vec<f64>> {
    if relays.is_empty() {
        return Err(Error::EmptyRelaySet { sn });
    }
    Ok(relays
        .iter()
        .map(|&k| ctx.inv_rate_pair(sn, k) + ctx.inv_rate_direct(k))
        .collect())
}

fn best_relay(sn: usize, ctx: &GroupingContext, relays: &BTreeSet<usize>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &k in relays {
        let d = ctx.inv_rate_pair(sn, k) + ctx.inv_rate_direct(k);
        // Strict < keeps the lowest relay id on ties.
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((k, d));
        }
    }
    best
}

/// Classifies SNs at a fixed relay-eligibility threshold on the raw
/// direct-channel gain. Non-relay SNs take the path (direct or via the
/// best relay) with the smaller delay; ties go single-hop.
pub fn classify(threshold: f64, ctx: &GroupingContext) -> Grouping {
    let n = ctx.rates.n_sns();
    let relays: BTreeSet<usize> = (0..n).filter(|&i| ctx.direct_gain_sq(i) > threshold).collect();

    let mut one_hop = BTreeSet::new();
    let mut two_hop = BTreeMap::new();
    let mut delay_table = BTreeMap::new();
    for sn in 0..n {
        if relays.contains(&sn) {
            continue;
        }
        let direct = ctx.inv_rate_direct(sn);
        match best_relay(sn, ctx, &relays) {
            Some((k, relayed)) if relayed < direct => {
                two_hop.insert(sn, k);
                delay_table.insert(sn, relayed);
            }
            _ => {
                one_hop.insert(sn);
                delay_table.insert(sn, direct);
            }
        }
    }

    Grouping { one_hop, two_hop, relays, delay_table, threshold }
}

/// Ternary-search settings over the relay-eligibility threshold.
#[derive(Debug, Clone, Copy)]
pub struct TernarySearchConfig {
    pub th_min: f64,
    pub th_max: f64,
    pub epsilon: f64,
    /// When set, also scan this many thresholds on a uniform grid and
    /// flag the result if ternary search missed the grid optimum.
    pub validate_grid: Option<usize>,
}

impl TernarySearchConfig {
    /// Brackets the observed direct gains with a relative tolerance.
    pub fn from_gains(ctx: &GroupingContext, epsilon_rel: f64) -> Self {
        let n = ctx.rates.n_sns();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let g = ctx.direct_gain_sq(i);
            lo = lo.min(g);
            hi = hi.max(g);
        }
        // Nudge below the minimum so the all-relay grouping is reachable.
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        Self { th_min: lo * (1.0 - 1e-9), th_max: hi, epsilon: span * epsilon_rel, validate_grid: None }
    }

    pub fn default_for(ctx: &GroupingContext) -> Self {
        Self::from_gains(ctx, 1e-3)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.th_min <= self.th_max) {
            return Err(Error::Config("threshold bounds must satisfy th_min <= th_max".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("ternary search epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Grid cross-check of one ternary-search run.
#[derive(Debug, Clone, Copy)]
pub struct GridValidation {
    pub grid_best_th: f64,
    pub grid_best_t_ul: f64,
    pub ternary_t_ul: f64,
    /// True when ternary search landed measurably above the grid optimum
    /// and the optimum lies outside the final bracket, i.e. the objective
    /// was not unimodal over the scanned range.
    pub unimodality_violation: bool,
}

/// Output of the threshold search.
#[derive(Debug, Clone)]
pub struct TernaryResult {
    pub grouping: Grouping,
    /// Normalized uplink time at the returned grouping.
    pub t_ul_norm: f64,
    /// Objective evaluations spent inside the search loop.
    pub evals: usize,
    pub bracket: (f64, f64),
    pub grid: Option<GridValidation>,
}

/// Algorithm: shrink the threshold bracket by probing the uplink time at
/// the two inner third points, then classify at the bracket midpoint.
pub fn ternary_search_threshold(ctx: &GroupingContext, cfg: &TernarySearchConfig) -> Result<TernaryResult> {
    cfg.validate()?;
    let objective = |th: f64| normalized_uplink_time(&classify(th, ctx), ctx, AggregationMode::Partial);

    let mut lo = cfg.th_min;
    let mut hi = cfg.th_max;
    let mut evals = 0;
    while hi - lo > cfg.epsilon {
        let third = (hi - lo) / 3.0;
        let m1 = lo + third;
        let m2 = hi - third;
        let f1 = objective(m1);
        let f2 = objective(m2);
        evals += 2;
        if f1 > f2 {
            lo = m1;
        } else {
            hi = m2;
        }
    }

    let th_star = 0.5 * (lo + hi);
    let grouping = classify(th_star, ctx);
    let t_ul_norm = normalized_uplink_time(&grouping, ctx, AggregationMode::Partial);

    let grid = cfg.validate_grid.map(|points| {
        let points = points.max(2);
        let mut best_th = cfg.th_min;
        let mut best_t = f64::INFINITY;
        for i in 0..points {
            let th = cfg.th_min + (cfg.th_max - cfg.th_min) * i as f64 / (points - 1) as f64;
            let t = objective(th);
            if t < best_t {
                best_t = t;
                best_th = th;
            }
        }
        let tol = 1e-9 * best_t.max(1.0);
        let in_bracket = best_th >= lo && best_th <= hi;
        GridValidation {
            grid_best_th: best_th,
            grid_best_t_ul: best_t,
            ternary_t_ul: t_ul_norm,
            unimodality_violation: t_ul_norm - best_t > tol && !in_bracket,
        }
    });

    Ok(TernaryResult { grouping, t_ul_norm, evals, bracket: (lo, hi), grid })
}

/// Re-runs best-relay selection for two-hop SNs whose assigned relay has
/// left the relay set, and re-costs client-less relays as ordinary
/// single-hop transmitters (their slot carries just their own model, at
/// the same rate, so the uplink time is unchanged).
fn normalize_roles(g: &mut Grouping, ctx: &GroupingContext) {
    // Orphaned two-hop SNs pick a surviving relay or fall back to direct.
    let orphans: Vec<usize> =
        g.two_hop.iter().filter(|(_, k)| !g.relays.contains(k)).map(|(&n, _)| n).collect();
    for sn in orphans {
        g.two_hop.remove(&sn);
        let direct = ctx.inv_rate_direct(sn);
        match best_relay(sn, ctx, &g.relays) {
            Some((k, relayed)) if relayed < direct => {
                g.two_hop.insert(sn, k);
                g.delay_table.insert(sn, relayed);
            }
            _ => {
                g.one_hop.insert(sn);
                g.delay_table.insert(sn, direct);
            }
        }
    }
    // Idle relays become single-hop participants (and thus prunable).
    let idle: Vec<usize> = g.relays.iter().copied().filter(|&k| g.clients_of(k) == 0).collect();
    for k in idle {
        g.relays.remove(&k);
        g.one_hop.insert(k);
        g.delay_table.insert(k, ctx.inv_rate_direct(k));
    }
}

/// Greedy participation maximization: while the uplink time exceeds the
/// deadline, drop the participant with the largest normalized delay.
/// Relays that still serve clients keep their slot; once idle they are
/// re-costed as single-hop SNs and compete for removal like everyone
/// else. Returns an empty grouping when nobody fits the deadline.
pub fn prune_to_deadline(
    grouping: &Grouping,
    ctx: &GroupingContext,
    t_eff_s: f64,
    packet_bits: f64,
    bandwidth_hz: f64,
    mode: AggregationMode,
) -> Grouping {
    let scale = packet_bits / bandwidth_hz;
    let mut g = grouping.clone();
    normalize_roles(&mut g, ctx);

    let mut t_ul = scale * normalized_uplink_time(&g, ctx, mode);
    while t_ul > t_eff_s {
        // Largest-delay participant among prunable roles; BTreeMap order
        // makes ties resolve to the lowest id.
        let victim = g
            .delay_table
            .iter()
            .filter(|(n, _)| g.one_hop.contains(n) || g.two_hop.contains_key(n))
            .fold(None::<(usize, f64)>, |acc, (&n, &d)| match acc {
                Some((_, bd)) if bd >= d => acc,
                _ => Some((n, d)),
            });
        let Some((victim, _)) = victim else {
            return Grouping {
                one_hop: BTreeSet::new(),
                two_hop: BTreeMap::new(),
                relays: BTreeSet::new(),
                delay_table: BTreeMap::new(),
                threshold: g.threshold,
            };
        };
        g.one_hop.remove(&victim);
        g.two_hop.remove(&victim);
        g.delay_table.remove(&victim);
        normalize_roles(&mut g, ctx);

        let t_next = scale * normalized_uplink_time(&g, ctx, mode);
        debug_assert!(t_next < t_ul || g.is_empty());
        t_ul = t_next;
        if g.is_empty() {
            break;
        }
    }
    if g.is_empty() && t_ul > t_eff_s {
        // Even an empty slot table cannot violate the deadline; reaching
        // here means the last removal emptied the grouping.
        return g;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airtime::{dol_rate, RateModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// PCSI rate model from raw gains with sigma0 = 1.
    fn model(direct: Vec<f64>, pair: Vec<Vec<f64>>) -> RateModel {
        let n = direct.len();
        RateModel {
            a_direct: direct,
            b_direct: vec![0.0; n],
            a_pair: pair,
            b_pair: vec![vec![0.0; n]; n],
        }
    }

    fn random_model(n: usize, rng: &mut ChaCha12Rng) -> RateModel {
        let direct: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..100.0)).collect();
        let pair: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { rng.random_range(0.01..100.0) }).collect())
            .collect();
        model(direct, pair)
    }

    #[test]
    fn delay_vector_reference() {
        // One relay (id 1) with both hop rates = 1 at p=1: [2.0].
        let m = model(vec![0.1, 1.0], vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let relays: BTreeSet<usize> = [1].into_iter().collect();
        let d = delay_vector(0, &ctx, &relays).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0] - 2.0).abs() < 1e-12);

        // As the first hop speeds up the entry tends to 1/r2 = 1.
        let mut prev = f64::INFINITY;
        for a1 in [1e6, 1e12, 1e24, 1e300] {
            let m = model(vec![0.1, 1.0], vec![vec![0.0, a1], vec![1.0, 0.0]]);
            let ctx = GroupingContext::new(&m, 1.0, 1.0);
            let d = delay_vector(0, &ctx, &relays).unwrap();
            assert!(d[0] > 1.0 && d[0] < prev);
            prev = d[0];
        }
        assert!(prev - 1.0 < 2e-3);

        assert!(matches!(
            delay_vector(0, &ctx, &BTreeSet::new()),
            Err(Error::EmptyRelaySet { sn: 0 })
        ));
    }

    #[test]
    fn best_relay_matches_exhaustive_scan() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = random_model(5, &mut rng);
            let ctx = GroupingContext::new(&m, 1.0, 1.0);
            let relays: BTreeSet<usize> = [1, 2, 4].into_iter().collect();
            let d = delay_vector(0, &ctx, &relays).unwrap();
            let (k, best) = best_relay(0, &ctx, &relays).unwrap();
            let scan = d.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(best, scan);
            let pos = relays.iter().position(|&r| r == k).unwrap();
            assert_eq!(d[pos], best);
        }
    }

    #[test]
    fn classify_degenerate_thresholds() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let m = random_model(6, &mut rng);
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let max_gain = (0..6).map(|i| ctx.direct_gain_sq(i)).fold(f64::NEG_INFINITY, f64::max);
        let min_gain = (0..6).map(|i| ctx.direct_gain_sq(i)).fold(f64::INFINITY, f64::min);

        let g = classify(max_gain, &ctx); // strictly-above keeps none... except the max itself? gain > th
        assert!(g.relays.is_empty() || g.relays.len() <= 1);
        let g = classify(max_gain * 1.000001, &ctx);
        assert!(g.relays.is_empty());
        assert_eq!(g.one_hop.len(), 6);
        assert!(g.two_hop.is_empty());

        let g = classify(min_gain * 0.999999, &ctx);
        assert_eq!(g.relays.len(), 6);
        assert!(g.one_hop.is_empty() && g.two_hop.is_empty());
    }

    #[test]
    fn classify_matches_brute_force_choice() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let m = random_model(4, &mut rng);
            let ctx = GroupingContext::new(&m, 1.0, 1.0);
            let th = rng.random_range(0.01..100.0);
            let g = classify(th, &ctx);
            for sn in 0..4 {
                if g.relays.contains(&sn) {
                    assert!(ctx.direct_gain_sq(sn) > th);
                    continue;
                }
                assert!(ctx.direct_gain_sq(sn) <= th);
                // Brute force over direct vs every relay path.
                let direct = 1.0 / dol_rate(1.0, m.a_direct[sn], 0.0);
                let best = g
                    .relays
                    .iter()
                    .map(|&k| 1.0 / dol_rate(1.0, m.a_pair[sn][k], 0.0) + 1.0 / dol_rate(1.0, m.a_direct[k], 0.0))
                    .fold(f64::INFINITY, f64::min);
                if g.one_hop.contains(&sn) {
                    assert!(direct <= best + 1e-12);
                    assert!((g.delay_table[&sn] - direct).abs() < 1e-12);
                } else {
                    assert!(best < direct);
                    assert!((g.delay_table[&sn] - best).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn relay_set_shrinks_as_threshold_grows() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let m = random_model(8, &mut rng);
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let mut prev: Option<BTreeSet<usize>> = None;
        for i in 0..20 {
            let th = 0.01 + i as f64 * 5.0;
            let relays = classify(th, &ctx).relays;
            if let Some(p) = prev {
                assert!(relays.is_subset(&p));
            }
            prev = Some(relays);
        }
    }

    #[test]
    fn ternary_single_sn_converges_to_one_hop() {
        let m = model(vec![3.0], vec![vec![0.0]]);
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let cfg = TernarySearchConfig { th_min: 0.0, th_max: 10.0, epsilon: 1e-3, validate_grid: None };
        let res = ternary_search_threshold(&ctx, &cfg).unwrap();
        // A lone SN is either a relay carrying its own packet or a 1-hop
        // transmitter; both cost 1/r_d.
        assert!((res.t_ul_norm - 1.0 / dol_rate(1.0, 3.0, 0.0)).abs() < 1e-12);
        assert_eq!(res.grouping.n_participants(), 1);
    }

    #[test]
    fn ternary_rescues_blocked_sn() {
        // SN 0 is blocked toward the ES but has a strong link to SN 1,
        // which has a strong direct channel.
        let m = model(
            vec![1e-4, 50.0, 8.0],
            vec![vec![0.0, 80.0, 1.0], vec![80.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]],
        );
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let all_one_hop: f64 = (0..3).map(|i| 1.0 / dol_rate(1.0, m.a_direct[i], 0.0)).sum();
        let cfg = TernarySearchConfig::default_for(&ctx);
        let res = ternary_search_threshold(&ctx, &cfg).unwrap();
        assert!(res.t_ul_norm < all_one_hop, "{} !< {all_one_hop}", res.t_ul_norm);
        assert!(res.grouping.two_hop.contains_key(&0));
    }

    #[test]
    fn ternary_eval_budget() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let m = random_model(10, &mut rng);
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let cfg = TernarySearchConfig::from_gains(&ctx, 1e-3);
        let res = ternary_search_threshold(&ctx, &cfg).unwrap();
        let budget =
            2.0 * ((cfg.th_max - cfg.th_min) / cfg.epsilon).log(1.5).ceil();
        assert!(res.evals as f64 <= budget, "{} > {budget}", res.evals);
        assert!(res.bracket.1 - res.bracket.0 <= cfg.epsilon);
    }

    #[test]
    fn ternary_tracks_grid_oracle() {
        // 100 random instances, 200-point grid. Either the result is
        // within tolerance of the grid best or it is flagged.
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut violations = 0;
        for _ in 0..100 {
            let n = rng.random_range(3..=10);
            let m = random_model(n, &mut rng);
            let ctx = GroupingContext::new(&m, 1.0, 1.0);
            let mut cfg = TernarySearchConfig::from_gains(&ctx, 1e-4);
            cfg.validate_grid = Some(200);
            let res = ternary_search_threshold(&ctx, &cfg).unwrap();
            let grid = res.grid.unwrap();
            if grid.unimodality_violation {
                violations += 1;
            } else if grid.grid_best_th < res.bracket.0 || grid.grid_best_th > res.bracket.1 {
                assert!(res.t_ul_norm - grid.grid_best_t_ul <= 1e-9 * grid.grid_best_t_ul.max(1.0));
            }
            // The search never does worse than both degenerate groupings.
            let worst = normalized_uplink_time(&classify(f64::INFINITY, &ctx), &ctx, AggregationMode::Partial);
            assert!(res.t_ul_norm <= worst + 1e-9);
        }
        // The objective is piecewise constant, so occasional plateaus may
        // defeat ternary search; it must stay rare.
        assert!(violations <= 10, "{violations} unimodality violations in 100 runs");
    }

    #[test]
    fn prune_noop_when_deadline_loose() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let m = random_model(6, &mut rng);
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let g = ternary_search_threshold(&ctx, &TernarySearchConfig::default_for(&ctx)).unwrap().grouping;
        let pruned = prune_to_deadline(&g, &ctx, 1e9, 5e3, 1e8, AggregationMode::Partial);
        assert_eq!(pruned.n_participants(), g.n_participants());
    }

    #[test]
    fn prune_zero_deadline_removes_everyone() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let m = random_model(6, &mut rng);
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let g = classify(1.0, &ctx);
        let pruned = prune_to_deadline(&g, &ctx, 0.0, 5e3, 1e8, AggregationMode::Partial);
        assert!(pruned.is_empty());
    }

    #[test]
    fn prune_follows_greedy_hand_simulation() {
        // Crafted N=6: distinct delays so the removal order is forced.
        // Direct gains give rates ~ log2(1+a); SN 5 is a strong relay.
        let m = model(
            vec![0.05, 0.1, 0.3, 1.0, 3.0, 63.0],
            vec![
                vec![0.0, 0.1, 0.1, 0.1, 0.1, 15.0],
                vec![0.1, 0.0, 0.1, 0.1, 0.1, 0.1],
                vec![0.1, 0.1, 0.0, 0.1, 0.1, 0.1],
                vec![0.1, 0.1, 0.1, 0.0, 0.1, 0.1],
                vec![0.1, 0.1, 0.1, 0.1, 0.0, 0.1],
                vec![15.0, 0.1, 0.1, 0.1, 0.1, 0.0],
            ],
        );
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let g = classify(10.0, &ctx); // SN 5 is the only relay
        assert_eq!(g.relays, [5].into_iter().collect());
        assert!(g.two_hop.contains_key(&0)); // rescued via SN 5

        // Hand simulation: delays are 1/r with r = log2(1+a).
        let r = |a: f64| (1.0 + a as f64).log2();
        let d0 = 1.0 / r(15.0) + 1.0 / r(63.0); // two-hop SN 0
        let d1 = 1.0 / r(0.1);
        let d2 = 1.0 / r(0.3);
        let d3 = 1.0 / r(1.0);
        let d4 = 1.0 / r(3.0);
        assert!(d1 > d2 && d2 > d3 && d3 > d4 && d4 > d0);
        // Total normalized time includes the relay's own slot.
        let total = d0 + d1 + d2 + d3 + d4 + 1.0 / r(63.0);
        // Deadline chosen to force exactly two removals (SN 1 then SN 2).
        let scale = 5e3 / 1e8;
        let t_eff = scale * (total - d1 - d2 + 1e-9);
        let pruned = prune_to_deadline(&g, &ctx, t_eff, 5e3, 1e8, AggregationMode::Partial);
        let survivors = pruned.participants();
        assert_eq!(survivors, vec![0, 3, 4, 5]);
    }

    #[test]
    fn prune_recosts_idle_relay() {
        // One relay whose only client gets pruned; the relay then becomes
        // a 1-hop SN and is itself prunable.
        let m = model(
            vec![1e-3, 63.0],
            vec![vec![0.0, 3.0], vec![3.0, 0.0]],
        );
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let g = classify(1.0, &ctx);
        assert_eq!(g.relays, [1].into_iter().collect());
        assert_eq!(g.two_hop.get(&0), Some(&1));

        let scale = 5e3 / 1e8;
        // Deadline fits only the relay's own slot.
        let t_eff = scale * (1.0 / (64f64).log2() + 1e-12);
        let pruned = prune_to_deadline(&g, &ctx, t_eff, 5e3, 1e8, AggregationMode::Partial);
        assert!(pruned.two_hop.is_empty());
        assert!(pruned.relays.is_empty());
        assert_eq!(pruned.one_hop, [1].into_iter().collect());
    }

    #[test]
    fn orphaned_two_hop_sn_is_reassigned() {
        // Hand-built grouping pointing SN 0 at a relay that is not in the
        // relay set; normalization must repair it.
        let m = model(
            vec![1e-3, 63.0, 63.0],
            vec![
                vec![0.0, 3.0, 2.9],
                vec![3.0, 0.0, 0.1],
                vec![2.9, 0.1, 0.0],
            ],
        );
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let mut g = classify(1.0, &ctx);
        // Point SN 0 at relay 1, then drop relay 1 from the set.
        g.two_hop.insert(0, 1);
        g.relays.remove(&1);
        g.one_hop.insert(1);
        g.delay_table.insert(1, 1.0 / (64f64).log2());
        let pruned = prune_to_deadline(&g, &ctx, 1e9, 5e3, 1e8, AggregationMode::Partial);
        // SN 0 must now ride relay 2 (the only relay left).
        assert_eq!(pruned.two_hop.get(&0), Some(&2));
    }

    #[test]
    fn pruning_strictly_decreases_uplink_time() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_model(8, &mut rng);
            let ctx = GroupingContext::new(&m, 1.0, 1.0);
            let g = ternary_search_threshold(&ctx, &TernarySearchConfig::default_for(&ctx)).unwrap().grouping;
            let t_full = normalized_uplink_time(&g, &ctx, AggregationMode::Partial);
            let target = 0.3 * t_full * 5e3 / 1e8;
            let pruned = prune_to_deadline(&g, &ctx, target, 5e3, 1e8, AggregationMode::Partial);
            if !pruned.is_empty() {
                let t = 5e3 / 1e8 * normalized_uplink_time(&pruned, &ctx, AggregationMode::Partial);
                assert!(t <= target);
                assert!(pruned.n_participants() < g.n_participants());
            }
        }
    }

    #[test]
    fn grouping_roundtrips_to_json() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let m = random_model(5, &mut rng);
        let ctx = GroupingContext::new(&m, 1.0, 1.0);
        let g = classify(5.0, &ctx);
        let text = serde_json::to_string(&g.export(1.25e-4)).unwrap();
        let back: GroupingExport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.two_hop, g.two_hop);
        assert_eq!(back.relays, g.relays.iter().copied().collect::<Vec<_>>());
        assert_eq!(back.t_ul_s, 1.25e-4);
    }
}
