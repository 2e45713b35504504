//! SNRs, Shannon rates, TDMA phase times, transmit/computation energies,
//! and the closed-form CPU frequency that meets the round deadline.

use serde::Serialize;
use std::collections::BTreeMap;

use crate::channel::{ChannelSet, CsiModel, SimConfig};
use crate::error::{Error, Result};
use crate::grouping::Grouping;
use crate::rng::StreamKind;
use rand::Rng;

/// Rates below this are treated as zero and reported as infeasible
/// instead of producing astronomically large finite times.
pub const MIN_RATE: f64 = 1e-12;

/// Uplink rate of a direct SN-to-ES link, bits/s/Hz.
/// Uses ln_1p so deep-fade SNRs below 1e-16 still resolve.
pub fn rate_direct(p: f64, gain_sq: f64, sigma0: f64) -> f64 {
    (p * gain_sq / sigma0).ln_1p() / std::f64::consts::LN_2
}

/// First-hop rate (SN to relay). Same Shannon form as [`rate_direct`].
pub fn rate_hop1(p: f64, gain_sq: f64, sigma0: f64) -> f64 {
    rate_direct(p, gain_sq, sigma0)
}

/// Second-hop rate (relay to ES). Same Shannon form as [`rate_direct`].
pub fn rate_hop2(p: f64, gain_sq: f64, sigma0: f64) -> f64 {
    rate_direct(p, gain_sq, sigma0)
}

/// Achievable rate under channel-estimation self-interference, written
/// as a difference of logs: log2(1+(a+b)p) - log2(1+b p) with
/// a = |h_hat|^2/sigma0 and b = sigma_e/sigma0. b = 0 recovers the
/// perfect-CSI Shannon rate.
pub fn dol_rate(p: f64, a: f64, b: f64) -> f64 {
    if b == 0.0 {
        (a * p).ln_1p() / std::f64::consts::LN_2
    } else {
        (((a + b) * p).ln_1p() - (b * p).ln_1p()) / std::f64::consts::LN_2
    }
}

/// Normalized link coefficients the scheduler works with: per link,
/// `a` is the (estimated) channel power over noise and `b` the
/// estimation-error power over noise (zero under perfect CSI).
#[derive(Debug, Clone)]
pub struct RateModel {
    pub a_direct: Vec<f64>,
    pub b_direct: Vec<f64>,
    pub a_pair: Vec<Vec<f64>>,
    pub b_pair: Vec<Vec<f64>>,
}

impl RateModel {
    pub fn pcsi(ch: &ChannelSet, sigma0: f64) -> Self {
        let n = ch.n_sns();
        Self {
            a_direct: (0..n).map(|i| ch.gain_direct_sq(i) / sigma0).collect(),
            b_direct: vec![0.0; n],
            a_pair: (0..n)
                .map(|i| (0..n).map(|j| if i == j { 0.0 } else { ch.gain_pair_sq(i, j) / sigma0 }).collect())
                .collect(),
            b_pair: vec![vec![0.0; n]; n],
        }
    }

    pub fn icsi(csi: &CsiModel, sigma0: f64) -> Self {
        let n = csi.h_hat_direct.len();
        Self {
            a_direct: (0..n).map(|i| csi.h_hat_direct[i].norm_sqr() / sigma0).collect(),
            b_direct: (0..n).map(|i| csi.sigma_e_direct[i] / sigma0).collect(),
            a_pair: (0..n)
                .map(|i| (0..n).map(|j| csi.h_hat_pair[i][j].norm_sqr() / sigma0).collect())
                .collect(),
            b_pair: (0..n).map(|i| (0..n).map(|j| csi.sigma_e_pair[i][j]/ sigma0).collect()).collect(),
        }
    }

    pub fn n_sns(&self) -> usize {
        self.a_direct.len()
    }

    pub fn rate_direct(&self, n: usize, p: f64) -> f64 {
        dol_rate(p, self.a_direct[n], self.b_direct[n])
    }

    pub fn rate_pair(&self, src: usize, dst: usize, p: f64) -> f64 {
        dol_rate(p, self.a_pair[src][dst], self.b_pair[src][dst])
    }
}

/// Transmit powers, either one level for everyone or per SN.
#[derive(Debug, Clone)]
pub enum Powers {
    Uniform(f64),
    PerSn(BTreeMap<usize, f64>),
}

impl Powers {
    pub fn get(&self, sn: usize) -> f64 {
        match self {
            Powers::Uniform(p) => *p,
            Powers::PerSn(m) => *m.get(&sn).unwrap_or(&0.0),
        }
    }
}

/// Whether relays forward one merged packet or every client packet plus
/// their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    Partial,
    None,
}

impl AggregationMode {
    /// Packets a relay sends in its second-hop slot.
    pub fn relay_packets(&self, n_clients: usize) -> f64 {
        match self {
            AggregationMode::Partial => 1.0,
            AggregationMode::None => 1.0 + n_clients as f64,
        }
    }
}

/// Per-phase airtimes, achieved rates, and the transmit energy of one
/// uplink round.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    pub rate_direct: BTreeMap<usize, f64>,
    pub rate_hop1: BTreeMap<usize, f64>,
    pub rate_hop2: BTreeMap<usize, f64>,
    pub t_1h: f64,
    pub t_2h_1: f64,
    pub t_2h_2: f64,
    pub t_ul: f64,
    pub e_tx: f64,
}

fn checked_rate(r: f64, sn: usize) -> Result<f64> {
    if r < MIN_RATE {
        Err(Error::ZeroRateLink { sn })
    } else {
        Ok(r)
    }
}

/// TDMA uplink times for a grouping: single-hop slots, first-hop slots of
/// two-hop SNs, and one slot per relay sized by the aggregation mode.
pub fn uplink_times(
    grouping: &Grouping,
    powers: &Powers,
    rates: &RateModel,
    packet_bits: f64,
    bandwidth_hz: f64,
    mode: AggregationMode,
) -> Result<LinkBudget> {
    let per_packet = packet_bits / bandwidth_hz;
    let mut budget = LinkBudget {
        rate_direct: BTreeMap::new(),
        rate_hop1: BTreeMap::new(),
        rate_hop2: BTreeMap::new(),
        t_1h: 0.0,
        t_2h_1: 0.0,
        t_2h_2: 0.0,
        t_ul: 0.0,
        e_tx: 0.0,
    };

    for &n in &grouping.one_hop {
        let p = powers.get(n);
        let r = checked_rate(rates.rate_direct(n, p), n)?;
        budget.rate_direct.insert(n, r);
        let t = per_packet / r;
        budget.t_1h += t;
        budget.e_tx += p * t;
    }
    for (&n, &k) in &grouping.two_hop {
        if !grouping.relays.contains(&k) {
            return Err(Error::EmptyRelaySet { sn: n });
        }
        let p = powers.get(n);
        let r = checked_rate(rates.rate_pair(n, k, p), n)?;
        budget.rate_hop1.insert(n, r);
        let t = per_packet / r;
        budget.t_2h_1 += t;
        budget.e_tx += p * t;
    }
    for &k in &grouping.relays {
        let p = powers.get(k);
        let r = checked_rate(rates.rate_direct(k, p), k)?;
        budget.rate_hop2.insert(k, r);
        let t = per_packet * mode.relay_packets(grouping.clients_of(k)) / r;
        budget.t_2h_2 += t;
        budget.e_tx += p * t;
    }

    budget.t_ul = budget.t_1h + budget.t_2h_1 + budget.t_2h_2;
    Ok(budget)
}

/// Transmit energy of the round, computed from the power-over-rate form.
/// Consistent with power x airtime from [`uplink_times`].
pub fn tx_energy(
    grouping: &Grouping,
    powers: &Powers,
    rates: &RateModel,
    packet_bits: f64,
    bandwidth_hz: f64,
    mode: AggregationMode,
) -> Result<f64> {
    let scale = packet_bits / bandwidth_hz;
    let mut sum = 0.0;
    for &n in &grouping.one_hop {
        let p = powers.get(n);
        sum += p / checked_rate(rates.rate_direct(n, p), n)?;
    }
    for (&n, &k) in &grouping.two_hop {
        let p = powers.get(n);
        sum += p / checked_rate(rates.rate_pair(n, k, p), n)?;
    }
    for &k in &grouping.relays {
        let p = powers.get(k);
        let r = checked_rate(rates.rate_direct(k, p), k)?;
        sum += mode.relay_packets(grouping.clients_of(k)) * p / r;
    }
    Ok(scale * sum)
}

/// Local-computation model of one SN.
#[derive(Debug, Clone, Copy)]
pub struct ComputeProfile {
    pub cycles_per_sample: f64,
    pub dataset_size: f64,
    pub local_iters: f64,
    pub cpu_freq: f64,
    pub kappa: f64,
}

impl ComputeProfile {
    fn total_cycles(&self) -> f64 {
        self.local_iters * self.cycles_per_sample * self.dataset_size
    }
}

/// Local computation time: I*C*D/f.
pub fn comp_time(profile: &ComputeProfile) -> f64 {
    profile.total_cycles() / profile.cpu_freq
}

/// Local computation energy: kappa*I*C*D*f^2.
pub fn comp_energy(profile: &ComputeProfile) -> f64 {
    profile.kappa * profile.total_cycles() * profile.cpu_freq.powi(2)
}

/// Lowest CPU frequency that still meets the round deadline:
/// f* = I*C*D / (t_th - t_ul). Fails when the deadline is already spent
/// or when f* exceeds `f_max`.
pub fn optimal_frequency(profile: &ComputeProfile, t_th: f64, t_ul: f64, f_max: f64) -> Result<f64> {
    if t_ul >= t_th {
        return Err(Error::DeadlineInfeasible(format!(
            "uplink time {t_ul} s leaves no compute budget within t_th {t_th} s"
        )));
    }
    let f = profile.total_cycles() / (t_th - t_ul);
    if f > f_max {
        return Err(Error::DeadlineInfeasible(format!(
            "required frequency {f} Hz exceeds f_max {f_max} Hz"
        )));
    }
    Ok(f)
}

/// Draws per-SN compute profiles from the configured ranges.
pub fn sample_profiles(cfg: &SimConfig, local_iters: f64, trial: u64) -> Vec<ComputeProfile> {
    let mut rng = cfg.hub().stream(StreamKind::Compute, trial);
    let [c_lo, c_hi] = cfg.cycles_per_sample_range;
    let [d_lo, d_hi] = cfg.dataset_size_range;
    (0..cfg.n_sns)
        .map(|_| ComputeProfile {
            cycles_per_sample: rng.random_range(c_lo..=c_hi),
            dataset_size: rng.random_range(d_lo..=d_hi) as f64,
            local_iters,
            cpu_freq: cfg.f_max_hz,
            kappa: cfg.kappa,
        })
        .collect()
}

/// Energy and latency accounting for a full FL deployment.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyLatencyReport {
    pub e_local: f64,
    pub e_tx: f64,
    pub e_total_per_round: f64,
    pub e_total: f64,
    pub t_round: f64,
    pub t_complete: f64,
    pub global_rounds: u64,
}

/// Assembles the per-round and total energy/latency report. Compute
/// profiles are indexed by SN id; only participants contribute.
pub fn round_report(
    grouping: &Grouping,
    powers: &Powers,
    rates: &RateModel,
    profiles: &[ComputeProfile],
    cfg: &SimConfig,
    i0: u64,
) -> Result<EnergyLatencyReport> {
    let budget = uplink_times(grouping, powers, rates, cfg.packet_bits, cfg.bandwidth_hz, AggregationMode::Partial)?;
    let mut e_local = 0.0;
    let mut tau_max: f64 = 0.0;
    for n in grouping.participants() {
        let p = &profiles[n];
        e_local += comp_energy(p);
        tau_max = tau_max.max(comp_time(p));
    }
    let e_round = budget.e_tx + e_local;
    let t_round = tau_max + budget.t_ul;
    Ok(EnergyLatencyReport {
        e_local,
        e_tx: budget.e_tx,
        e_total_per_round: e_round,
        e_total: i0 as f64 * e_round,
        t_round,
        t_complete: i0 as f64 * t_round,
        global_rounds: i0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::Grouping;
    use std::collections::{BTreeMap, BTreeSet};

    fn uniform_rates(n: usize, a: f64) -> RateModel {
        RateModel {
            a_direct: vec![a; n],
            b_direct: vec![0.0; n],
            a_pair: vec![vec![a; n]; n],
            b_pair: vec![vec![0.0; n]; n],
        }
    }

    fn grouping_1h(ids: &[usize]) -> Grouping {
        Grouping {
            one_hop: ids.iter().copied().collect(),
            two_hop: BTreeMap::new(),
            relays: BTreeSet::new(),
            delay_table: ids.iter().map(|&i| (i, 1.0)).collect(),
            threshold: 0.0,
        }
    }

    #[test]
    fn shannon_rate_points() {
        assert!((rate_direct(1.0, 1.0, 1.0) - 1.0).abs() < 1e-15); // log2(2)
        assert_eq!(rate_direct(0.0, 5.0, 1.0), 0.0);
        assert!((rate_direct(3.0, 1.0, 1.0) - 2.0).abs() < 1e-15); // log2(4)
        // hop rates share the formula
        assert_eq!(rate_hop1(0.7, 2.0, 0.5), rate_direct(0.7, 2.0, 0.5));
        assert_eq!(rate_hop2(0.7, 2.0, 0.5), rate_direct(0.7, 2.0, 0.5));
    }

    #[test]
    fn rate_concave_increasing_in_power() {
        let r = |p: f64| rate_direct(p, 2.0, 1.0);
        let mut prev = r(0.0);
        let mut prev_slope = f64::INFINITY;
        for i in 1..100 {
            let p = i as f64 * 0.1;
            let v = r(p);
            assert!(v > prev);
            let slope = v - prev;
            assert!(slope < prev_slope);
            prev = v;
            prev_slope = slope;
        }
    }

    #[test]
    fn dol_rate_reduces_to_shannon() {
        for p in [0.0, 0.3, 2.0] {
            assert_eq!(dol_rate(p, 1.7, 0.0), rate_direct(p, 1.7, 1.0));
        }
        // Positive error variance strictly reduces the rate.
        assert!(dol_rate(1.0, 2.0, 0.5) < dol_rate(1.0, 2.0, 0.0));
    }

    #[test]
    fn single_one_hop_times_and_energy() {
        // r = 1 at p such that p*a = 1.
        let g = grouping_1h(&[0]);
        let rates = uniform_rates(1, 1.0);
        let powers = Powers::Uniform(1.0);
        let b = uplink_times(&g, &powers, &rates, 1e4, 1e8, AggregationMode::Partial).unwrap();
        assert!((b.t_ul - 1e-4).abs() < 1e-18);
        assert_eq!(b.t_2h_1, 0.0);
        assert_eq!(b.t_2h_2, 0.0);

        // P = 0.1 W, r = 1, |B|/W = 1e-4 -> 1e-5 J.
        let rates = uniform_rates(1, 10.0);
        let powers = Powers::Uniform(0.1);
        let e = tx_energy(&g, &powers, &rates, 1e4, 1e8, AggregationMode::Partial).unwrap();
        assert!((e - 1e-5).abs() < 1e-18);
        // Doubling |B| doubles the energy.
        let e2 = tx_energy(&g, &powers, &rates, 2e4, 1e8, AggregationMode::Partial).unwrap();
        assert!((e2 - 2.0 * e).abs() < 1e-18);
    }

    #[test]
    fn empty_network_zero_energy() {
        let g = grouping_1h(&[]);
        let rates = uniform_rates(1, 1.0);
        let e = tx_energy(&g, &Powers::Uniform(0.1), &rates, 1e4, 1e8, AggregationMode::Partial).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn two_relays_four_slots() {
        // SNs 0,1 are relays serving SNs 2,3; all rates 1.
        let g = Grouping {
            one_hop: BTreeSet::new(),
            two_hop: [(2usize, 0usize), (3, 1)].into_iter().collect(),
            relays: [0usize, 1].into_iter().collect(),
            delay_table: BTreeMap::new(),
            threshold: 0.0,
        };
        let rates = uniform_rates(4, 1.0);
        let b = uplink_times(&g, &Powers::Uniform(1.0), &rates, 1e4, 1e8, AggregationMode::Partial).unwrap();
        assert!((b.t_ul - 4.0 * 1e4 / 1e8).abs() < 1e-18);

        // Without partial aggregation each relay forwards its client's
        // packet plus its own: 2 first-hop + 2*2 relay slots.
        let b2 = uplink_times(&g, &Powers::Uniform(1.0), &rates, 1e4, 1e8, AggregationMode::None).unwrap();
        assert!((b2.t_ul - 6.0 * 1e4 / 1e8).abs() < 1e-18);
    }

    #[test]
    fn energy_matches_power_times_airtime() {
        // Random instances: Eq-form energy vs sum of P * slot time.
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = 6;
            let mut rates = uniform_rates(n, 0.0);
            for i in 0..n {
                rates.a_direct[i] = rng.random_range(0.1..50.0);
                for j in 0..n {
                    rates.a_pair[i][j] = rng.random_range(0.1..50.0);
                }
            }
            let g = Grouping {
                one_hop: [0usize, 1].into_iter().collect(),
                two_hop: [(2usize, 4usize), (3, 4)].into_iter().collect(),
                relays: [4usize, 5].into_iter().collect(),
                delay_table: BTreeMap::new(),
                threshold: 0.0,
            };
            let powers = Powers::PerSn((0..n).map(|i| (i, rng.random_range(0.01..0.2))).collect());
            for mode in [AggregationMode::Partial, AggregationMode::None] {
                let b = uplink_times(&g, &powers, &rates, 5e3, 1e8, mode).unwrap();
                let e = tx_energy(&g, &powers, &rates, 5e3, 1e8, mode).unwrap();
                assert!((e - b.e_tx).abs() <= 1e-12 * e.abs(), "{e} vs {}", b.e_tx);
            }
        }
    }

    #[test]
    fn zero_rate_link_is_an_error() {
        let g = grouping_1h(&[0]);
        let rates = uniform_rates(1, 1.0);
        let err = uplink_times(&g, &Powers::Uniform(0.0), &rates, 1e4, 1e8, AggregationMode::Partial);
        assert!(matches!(err, Err(Error::ZeroRateLink { sn: 0 })));
    }

    #[test]
    fn raising_power_shrinks_uplink_time() {
        let g = grouping_1h(&[0, 1]);
        let rates = uniform_rates(2, 3.0);
        let t = |p: f64| {
            uplink_times(&g, &Powers::Uniform(p), &rates, 1e4, 1e8, AggregationMode::Partial)
                .unwrap()
                .t_ul
        };
        assert!(t(0.2) < t(0.1));
    }

    #[test]
    fn energy_per_bit_increases_with_power() {
        // P/log2(1+cP) is strictly increasing on (0, inf); finite
        // differences stay positive all the way down.
        let c = 7.0;
        let e = |p: f64| p * std::f64::consts::LN_2 / (c * p).ln_1p();
        let mut p = 1e-8;
        while p < 10.0 {
            let d = e(p * 1.05) - e(p);
            assert!(d > 0.0, "finite difference at {p}");
            p *= 3.0;
        }
    }

    #[test]
    fn low_snr_energy_limit() {
        // P/r(P) -> ln2/c as P -> 0; at P=1e-9 within 0.1%.
        let c = 2.0;
        let e = 1e-9 / (1.0 + c * 1e-9f64).log2();
        let lim = std::f64::consts::LN_2 / c;
        assert!((e - lim).abs() < 1e-3 * lim);
    }

    #[test]
    fn compute_reference_points() {
        let p = ComputeProfile {
            cycles_per_sample: 1e4,
            dataset_size: 300.0,
            local_iters: 1.0,
            cpu_freq: 2e9,
            kappa: 1e-28,
        };
        assert!((comp_time(&p) - 1.5e-3).abs() < 1e-15);
        assert!((comp_energy(&p) - 1.2e-3).abs() < 1e-15);
        // f doubled: time halves, energy x4.
        let p2 = ComputeProfile { cpu_freq: 4e9, ..p };
        assert!((comp_time(&p2) - comp_time(&p) / 2.0).abs() < 1e-18);
        assert!((comp_energy(&p2) - 4.0 * comp_energy(&p)).abs() < 1e-12);
    }

    #[test]
    fn optimal_frequency_reference() {
        let p = ComputeProfile {
            cycles_per_sample: 1e4,
            dataset_size: 300.0,
            local_iters: 1.0,
            cpu_freq: 2e9,
            kappa: 1e-28,
        };
        let f = optimal_frequency(&p, 60.0, 0.0, 2e9).unwrap();
        assert!((f - 5e4).abs() < 1e-9);
        // Feeding f* back makes the round time hit t_th exactly.
        let tuned = ComputeProfile { cpu_freq: f, ..p };
        assert!((comp_time(&tuned) + 0.0 - 60.0).abs() < 1e-9);
        // Boundary cases.
        assert!(optimal_frequency(&p, 60.0, 60.0, 2e9).is_err());
        assert!(optimal_frequency(&p, 60.0, 59.999_999_999, 2e9).is_err()); // f* > f_max
    }

    #[test]
    fn round_report_totals() {
        let cfg = SimConfig::default();
        let g = grouping_1h(&[0]);
        let rates = uniform_rates(1, 1.0 / cfg.p_max_w());
        let profiles = vec![ComputeProfile {
            cycles_per_sample: 1e4,
            dataset_size: 300.0,
            local_iters: 1.0,
            cpu_freq: 2e9,
            kappa: 1e-28,
        }];
        let powers = Powers::Uniform(cfg.p_max_w());
        let rep = round_report(&g, &powers, &rates, &profiles, &cfg, 10).unwrap();
        let t_ul = cfg.packet_bits / cfg.bandwidth_hz; // r = 1
        assert!((rep.t_round - (1.5e-3 + t_ul)).abs() < 1e-12);
        assert!((rep.e_total - 10.0 * rep.e_total_per_round).abs() < 1e-15);
        assert!((rep.t_complete - 10.0 * rep.t_round).abs() < 1e-12);

        // i0 = 0 zeroes the totals.
        let rep0 = round_report(&g, &powers, &rates, &profiles, &cfg, 0).unwrap();
        assert_eq!(rep0.e_total, 0.0);
        assert_eq!(rep0.t_complete, 0.0);
    }

    #[test]
    fn round_time_uses_slowest_sn() {
        let cfg = SimConfig { n_sns: 3, ..Default::default() };
        let g = grouping_1h(&[0, 1, 2]);
        let rates = uniform_rates(3, 1.0);
        let mk = |f: f64| ComputeProfile {
            cycles_per_sample: 1e4,
            dataset_size: 300.0,
            local_iters: 1.0,
            cpu_freq: f,
            kappa: 1e-28,
        };
        let profiles = vec![mk(2e9), mk(1e8), mk(5e8)];
        let rep = round_report(&g, &Powers::Uniform(1.0), &rates, &profiles, &cfg, 1).unwrap();
        let tau_max = profiles.iter().map(comp_time).fold(0.0f64, f64::max);
        let t_ul = 3.0 * cfg.packet_bits / cfg.bandwidth_hz;
        assert!((rep.t_round - (tau_max + t_ul)).abs() < 1e-15);
    }
}
