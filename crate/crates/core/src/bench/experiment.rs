//! Monte-Carlo experiment runner. Trials are independent work items on
//! a rayon pool; rows merge order-insensitively and are stable-sorted
//! before emission so output does not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use super::schemes::{grouping_for, Scheme};
use crate::airtime::{
    comp_energy, optimal_frequency, sample_profiles, uplink_times, AggregationMode, Powers,
    RateModel,
};
use crate::channel::{estimate_channels, generate_channels, generate_topology_trial, SimConfig};
use crate::error::{Error, Result};
use crate::fedsim::{
    ideal_schedule, make_noniid_data, nmse, run_fl, FlConfig, RoundParticipants,
};
use crate::grouping::{prune_to_deadline, Grouping, GroupingContext};
use crate::powopt::{spca_optimize, EeProblem, PowerAllocation, DEFAULT_EPS_I, DEFAULT_I_MAX};
use crate::rng::{RngHub, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    OutageVsPmax,
    ParticipationCdf,
    EnergyCdf,
    EnergyVsLatency,
    EnergyVsN,
    CompVsComm,
    IcsiCdf,
    FlConvergence,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::OutageVsPmax => "outage_vs_pmax",
            ExperimentKind::ParticipationCdf => "participation_cdf",
            ExperimentKind::EnergyCdf => "energy_cdf",
            ExperimentKind::EnergyVsLatency => "energy_vs_latency",
            ExperimentKind::EnergyVsN => "energy_vs_n",
            ExperimentKind::CompVsComm => "comp_vs_comm",
            ExperimentKind::IcsiCdf => "icsi_cdf",
            ExperimentKind::FlConvergence => "fl_convergence",
        }
    }
}

/// One experiment request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Meaning depends on the kind: P_max dBm, T_eff ms, SN count,
    /// pilot length (0 = perfect CSI), or unused ([0]).
    #[serde(default)]
    pub sweep: Vec<f64>,
    pub trials: u64,
    #[serde(default)]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub output_path: Option<String>,
}

impl ExperimentSpec {
    pub fn default_for(kind: ExperimentKind) -> Self {
        let (sweep, trials, schemes): (Vec<f64>, u64, Vec<Scheme>) = match kind {
            ExperimentKind::OutageVsPmax => (
                (-20..=23).step_by(3).map(f64::from).collect(),
                2000,
                vec![
                    Scheme::Proposed,
                    Scheme::FixedTh,
                    Scheme::Only2hopFixedTh,
                    Scheme::Only1hop,
                    Scheme::RandomRelay,
                ],
            ),
            ExperimentKind::ParticipationCdf => {
                (vec![9.0, 15.0, 21.0], 500, vec![Scheme::Proposed, Scheme::Only1hop])
            }
            ExperimentKind::EnergyCdf => (
                vec![0.0],
                500,
                vec![Scheme::Proposed, Scheme::TwoHopWoPa, Scheme::Only1hop, Scheme::OneHopPmax],
            ),
            ExperimentKind::EnergyVsLatency => (
                (1..=7).map(|i| 2.0 * i as f64).collect(),
                200,
                vec![Scheme::Proposed, Scheme::TwoHopWoPa, Scheme::Only1hop],
            ),
            ExperimentKind::EnergyVsN => (
                vec![10.0, 25.0, 50.0, 100.0, 200.0],
                100,
                vec![Scheme::Proposed, Scheme::TwoHopWoPa, Scheme::Only1hop],
            ),
            ExperimentKind::CompVsComm => {
                (vec![10.0, 25.0, 50.0, 100.0], 100, vec![Scheme::Proposed])
            }
            ExperimentKind::IcsiCdf => {
                (vec![0.0, 1.0, 5.0, 10.0, 20.0], 200, vec![Scheme::Proposed])
            }
            ExperimentKind::FlConvergence => (vec![], 10, vec![]),
        };
        Self { kind, sweep, trials, schemes, output_path: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep.is_empty() && self.kind != ExperimentKind::FlConvergence {
            return Err(Error::Config("sweep must not be empty".into()));
        }
        Ok(())
    }
}

/// Long-format result row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub scheme: String,
    pub sweep_value: f64,
    pub trial: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (&a.experiment, &a.scheme)
                .cmp(&(&b.experiment, &b.scheme))
                .then(a.sweep_value.total_cmp(&b.sweep_value))
                .then(a.trial.cmp(&b.trial))
                .then(a.metric.cmp(&b.metric))
        });
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["experiment", "scheme", "sweep_value", "trial", "metric", "value"])?;
        for r in &self.rows {
            w.write_record(&[
                r.experiment.clone(),
                r.scheme.clone(),
                r.sweep_value.to_string(),
                r.trial.to_string(),
                r.metric.clone(),
                r.value.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push(ResultRow {
                experiment: rec[0].to_string(),
                scheme: rec[1].to_string(),
                sweep_value: rec[2].parse().map_err(|_| Error::Config("bad sweep_value".into()))?,
                trial: rec[3].parse().map_err(|_| Error::Config("bad trial".into()))?,
                metric: rec[4].to_string(),
                value: rec[5].parse().map_err(|_| Error::Config("bad value".into()))?,
            });
        }
        Ok(Self { rows })
    }

    pub fn values(&self, scheme: &str, sweep_value: f64, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| {
                r.scheme == scheme && r.metric == metric && r.sweep_value == sweep_value
            })
            .map(|r| r.value)
            .collect()
    }

    pub fn count_metric(&self, metric: &str) -> usize {
        self.rows.iter().filter(|r| r.metric == metric).count()
    }
}

/// 95% Wilson score interval for a Bernoulli rate.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// PHY realization of one trial: placement, channels, and the CSI view.
struct TrialPhy {
    rates: RateModel,
    sigma0: f64,
    t_eff_data_s: f64,
}

fn realize_trial(cfg: &SimConfig, trial: u64, pilot_len: u32) -> Result<TrialPhy> {
    let topo = generate_topology_trial(cfg, trial);
    let ch = generate_channels(cfg, &topo, trial);
    let sigma0 = cfg.sigma0_w();
    if pilot_len == 0 {
        Ok(TrialPhy { rates: RateModel::pcsi(&ch, sigma0), sigma0, t_eff_data_s: cfg.t_eff_s })
    } else {
        let pilot_snr = cfg.p_max_w() / sigma0;
        let csi = estimate_channels(cfg, &ch, pilot_len, pilot_snr, cfg.t_eff_s, trial)?;
        Ok(TrialPhy {
            rates: RateModel::icsi(&csi, sigma0),
            sigma0,
            t_eff_data_s: cfg.t_eff_s - csi.t_overhead_s,
        })
    }
}

/// Grouping + pruning + optional power optimization for one scheme on a
/// fixed realization. Returns (pruned grouping, allocation or None when
/// powers stay at P_max, e_tx joules).
fn run_scheme_pipeline(
    scheme: Scheme,
    phy: &TrialPhy,
    cfg: &SimConfig,
    trial: u64,
) -> Result<(Grouping, Option<PowerAllocation>, f64)> {
    let p_max = cfg.p_max_w();
    let ctx = GroupingContext::new(&phy.rates, phy.sigma0, p_max);
    let mut scheme_rng = cfg.hub().stream(StreamKind::SchemeRandom, trial);
    let grouping = grouping_for(scheme, &ctx, &mut scheme_rng)?;
    let mode = scheme.aggregation();
    let pruned =
        prune_to_deadline(&grouping, &ctx, phy.t_eff_data_s, cfg.packet_bits, cfg.bandwidth_hz, mode);
    if pruned.is_empty() {
        return Ok((pruned, None, 0.0));
    }
    if !scheme.optimizes_power() {
        let budget = uplink_times(
            &pruned,
            &Powers::Uniform(p_max),
            &phy.rates,
            cfg.packet_bits,
            cfg.bandwidth_hz,
            mode,
        )?;
        return Ok((pruned, None, budget.e_tx));
    }
    let problem = EeProblem::from_grouping(
        &pruned,
        &phy.rates,
        p_max,
        phy.t_eff_data_s,
        cfg.packet_bits,
        cfg.bandwidth_hz,
        mode,
    )?;
    let (alloc, _trace) = spca_optimize(&problem, DEFAULT_EPS_I, DEFAULT_I_MAX)?;
    let e = alloc.e_tx_j;
    Ok((pruned, Some(alloc), e))
}

fn row(spec: &ExperimentSpec, scheme: &str, sweep: f64, trial: u64, metric: &str, value: f64) -> ResultRow {
    ResultRow {
        experiment: spec.kind.name().to_string(),
        scheme: scheme.to_string(),
        sweep_value: sweep,
        trial,
        metric: metric.to_string(),
        value,
    }
}

/// Runs one experiment. Deterministic for a fixed (spec, cfg, seed);
/// per-trial solver failures become rows, never aborts.
pub fn run_experiment(
    spec: &ExperimentSpec,
    cfg: &SimConfig,
    fl: &FlConfig,
) -> Result<ResultTable> {
    spec.validate()?;
    cfg.validate()?;
    let mut table = match spec.kind {
        ExperimentKind::FlConvergence => fl_convergence(spec, cfg, fl)?,
        _ => monte_carlo(spec, cfg)?,
    };
    table.sort();
    Ok(table)
}

fn monte_carlo(spec: &ExperimentSpec, cfg: &SimConfig) -> Result<ResultTable> {
    let trials: Vec<u64> = (0..spec.trials).collect();
    let rows: Vec<Vec<ResultRow>> = trials
        .par_iter()
        .map(|&trial| trial_rows(spec, cfg, trial))
        .collect::<Result<_>>()?;
    Ok(ResultTable { rows: rows.into_iter().flatten().collect() })
}

fn trial_rows(spec: &ExperimentSpec, base: &SimConfig, trial: u64) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &sweep in &spec.sweep {
        // Per-kind view of the sweep value.
        let mut cfg = base.clone();
        let mut pilot_len = 0u32;
        match spec.kind {
            ExperimentKind::OutageVsPmax | ExperimentKind::ParticipationCdf => {
                cfg.p_max_dbm = sweep;
            }
            ExperimentKind::EnergyVsLatency => cfg.t_eff_s = sweep * 1e-3,
            ExperimentKind::EnergyVsN | ExperimentKind::CompVsComm => cfg.n_sns = sweep as usize,
            ExperimentKind::IcsiCdf => pilot_len = sweep as u32,
            _ => {}
        }

        let phy = match realize_trial(&cfg, trial, pilot_len) {
            Ok(phy) => phy,
            Err(e) => {
                // Infeasible pilots and the like: recorded, not fatal.
                for scheme in &spec.schemes {
                    rows.push(row(spec, scheme.name(), sweep, trial, "setup_failure", 1.0));
                    rows.push(row(spec, scheme.name(), sweep, trial, primary_metric(spec.kind), f64::NAN));
                }
                let _ = e;
                continue;
            }
        };

        for &scheme in &spec.schemes {
            match spec.kind {
                ExperimentKind::OutageVsPmax => {
                    // Uniform P_max, no pruning: outage when the round
                    // misses the deadline.
                    let ctx = GroupingContext::new(&phy.rates, phy.sigma0, cfg.p_max_w());
                    let mut scheme_rng = cfg.hub().stream(StreamKind::SchemeRandom, trial);
                    let grouping = grouping_for(scheme, &ctx, &mut scheme_rng)?;
                    let budget = uplink_times(
                        &grouping,
                        &Powers::Uniform(cfg.p_max_w()),
                        &phy.rates,
                        cfg.packet_bits,
                        cfg.bandwidth_hz,
                        scheme.aggregation(),
                    );
                    let outage = match budget {
                        Ok(b) => (b.t_ul > phy.t_eff_data_s) as u64 as f64,
                        Err(Error::ZeroRateLink { .. }) => 1.0,
                        Err(e) => return Err(e),
                    };
                    rows.push(row(spec, scheme.name(), sweep, trial, "outage", outage));
                }
                ExperimentKind::ParticipationCdf => {
                    let (pruned, _, _) = run_scheme_pipeline(scheme, &phy, &cfg, trial)?;
                    rows.push(row(
                        spec,
                        scheme.name(),
                        sweep,
                        trial,
                        "participants",
                        pruned.n_participants() as f64,
                    ));
                }
                ExperimentKind::EnergyCdf
                | ExperimentKind::EnergyVsLatency
                | ExperimentKind::EnergyVsN => {
                    match run_scheme_pipeline(scheme, &phy, &cfg, trial) {
                        Ok((pruned, _, e)) => {
                            rows.push(row(spec, scheme.name(), sweep, trial, "e_tx_j", e));
                            rows.push(row(
                                spec,
                                scheme.name(),
                                sweep,
                                trial,
                                "participants",
                                pruned.n_participants() as f64,
                            ));
                        }
                        Err(Error::Solver(_)) | Err(Error::DeadlineInfeasible(_)) => {
                            rows.push(row(spec, scheme.name(), sweep, trial, "e_tx_j", f64::NAN));
                            rows.push(row(spec, scheme.name(), sweep, trial, "solver_failure", 1.0));
                        }
                        Err(e) => return Err(e),
                    }
                }
                ExperimentKind::CompVsComm => {
                    let (pruned, alloc, e_tx) = run_scheme_pipeline(scheme, &phy, &cfg, trial)?;
                    rows.push(row(spec, scheme.name(), sweep, trial, "e_tx_j", e_tx));
                    // Lowest admissible CPU frequency given the round's
                    // uplink time; local iterations default to the FL
                    // epoch count.
                    let t_ul = alloc.as_ref().map_or(0.0, |a| a.t_ul_s);
                    let mut profiles = sample_profiles(&cfg, 3.0, trial);
                    let mut e_comp = 0.0;
                    for n in pruned.participants() {
                        let f = optimal_frequency(&profiles[n], cfg.t_th_s, t_ul, cfg.f_max_hz)
                            .unwrap_or(cfg.f_max_hz);
                        profiles[n].cpu_freq = f;
                        e_comp += comp_energy(&profiles[n]);
                    }
                    rows.push(row(spec, scheme.name(), sweep, trial, "e_comp_j", e_comp));
                    rows.push(row(
                        spec,
                        scheme.name(),
                        sweep,
                        trial,
                        "participants",
                        pruned.n_participants() as f64,
                    ));
                }
                ExperimentKind::IcsiCdf => {
                    match run_scheme_pipeline(scheme, &phy, &cfg, trial) {
                        Ok((_, _, e)) => {
                            rows.push(row(spec, scheme.name(), sweep, trial, "e_tx_j", e));
                        }
                        Err(Error::Solver(_)) | Err(Error::DeadlineInfeasible(_)) => {
                            rows.push(row(spec, scheme.name(), sweep, trial, "e_tx_j", f64::NAN));
                            rows.push(row(spec, scheme.name(), sweep, trial, "solver_failure", 1.0));
                        }
                        Err(e) => return Err(e),
                    }
                }
                ExperimentKind::FlConvergence => unreachable!("dispatched separately"),
            }
        }
    }
    Ok(rows)
}

/// Builds per-round participant schedules from the PHY pipeline with
/// fresh fading per round, then runs the three FL setups.
fn fl_convergence(spec: &ExperimentSpec, cfg: &SimConfig, fl: &FlConfig) -> Result<ResultTable> {
    fl.validate()?;
    let seeds: Vec<u64> = (0..spec.trials).collect();
    let rows: Vec<Vec<ResultRow>> = seeds
        .par_iter()
        .map(|&seed_idx| -> Result<Vec<ResultRow>> {
            let mut cfg = cfg.clone();
            cfg.seed = cfg.seed.wrapping_add(seed_idx * 0x9e37_79b9);
            let fl_hub = RngHub::new(fl.seed.wrapping_add(seed_idx));
            let data = make_noniid_data(fl, cfg.n_sns, &fl_hub);

            let topo = generate_topology_trial(&cfg, 0);
            let sigma0 = cfg.sigma0_w();
            let p_max = cfg.p_max_w();

            let mut coop = Vec::with_capacity(fl.rounds);
            let mut onehop = Vec::with_capacity(fl.rounds);
            for round in 0..fl.rounds {
                let ch = generate_channels(&cfg, &topo, round as u64);
                let rates = RateModel::pcsi(&ch, sigma0);
                let ctx = GroupingContext::new(&rates, sigma0, p_max);
                let mut rng = cfg.hub().stream(StreamKind::SchemeRandom, round as u64);

                let g = grouping_for(Scheme::Proposed, &ctx, &mut rng)?;
                let pruned = prune_to_deadline(
                    &g,
                    &ctx,
                    cfg.t_eff_s,
                    cfg.packet_bits,
                    cfg.bandwidth_hz,
                    AggregationMode::Partial,
                );
                coop.push(RoundParticipants::from_grouping(&pruned));

                let g1 = grouping_for(Scheme::Only1hop, &ctx, &mut rng)?;
                let pruned1 = prune_to_deadline(
                    &g1,
                    &ctx,
                    cfg.t_eff_s,
                    cfg.packet_bits,
                    cfg.bandwidth_hz,
                    AggregationMode::Partial,
                );
                onehop.push(RoundParticipants::Flat(pruned1.participants()));
            }
            let ideal = ideal_schedule(fl, cfg.n_sns, &fl_hub);

            let mut out = Vec::new();
            for (scheme, schedule) in
                [("ideal", &ideal), ("cooperative", &coop), ("one_hop", &onehop)]
            {
                let history = run_fl(fl, &data, schedule, scheme, &fl_hub)?;
                for r in &history.rows {
                    out.push(row(spec, scheme, r.round as f64, seed_idx, "loss", r.loss));
                    out.push(row(spec, scheme, r.round as f64, seed_idx, "accuracy", r.accuracy));
                    out.push(row(
                        spec,
                        scheme,
                        r.round as f64,
                        seed_idx,
                        "participants",
                        r.participants as f64,
                    ));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(ResultTable { rows: rows.into_iter().flatten().collect() })
}

pub fn primary_metric(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::OutageVsPmax => "outage",
        ExperimentKind::ParticipationCdf => "participants",
        ExperimentKind::EnergyCdf
        | ExperimentKind::EnergyVsLatency
        | ExperimentKind::EnergyVsN
        | ExperimentKind::CompVsComm
        | ExperimentKind::IcsiCdf => "e_tx_j",
        ExperimentKind::FlConvergence => "loss",
    }
}

/// NMSE of each non-ideal FL scheme against the ideal loss trajectory,
/// per seed.
pub fn fl_nmse_per_seed(table: &ResultTable, scheme: &str, trials: u64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for seed in 0..trials {
        let pick = |sch: &str| -> Vec<f64> {
            let mut rows: Vec<(&ResultRow, f64)> = table
                .rows
                .iter()
                .filter(|r| r.scheme == sch && r.metric == "loss" && r.trial == seed)
                .map(|r| (r, r.value))
                .collect();
            rows.sort_by(|a, b| a.0.sweep_value.total_cmp(&b.0.sweep_value));
            rows.into_iter().map(|(_, v)| v).collect()
        };
        let ideal = pick("ideal");
        let candidate = pick(scheme);
        out.push(nmse(&ideal, &candidate)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sim() -> SimConfig {
        SimConfig { n_sns: 12, packet_bits: 1e3, seed: 42, ..Default::default() }
    }

    #[test]
    fn wilson_reference_values() {
        // Wilson 95% interval for 0/100 stays below 4%.
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi < 0.04 && hi > 0.03);
        // Symmetric-ish around p for large n.
        let (lo, hi) = wilson_interval(500, 1000);
        assert!((lo - 0.469).abs() < 0.002 && (hi - 0.531).abs() < 0.002);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn smoke_outage_runs_and_counts() {
        let cfg = small_sim();
        let spec = ExperimentSpec {
            kind: ExperimentKind::OutageVsPmax,
            sweep: vec![-10.0, 10.0],
            trials: 20,
            schemes: vec![Scheme::Proposed, Scheme::Only1hop],
            output_path: None,
        };
        let t = run_experiment(&spec, &cfg, &FlConfig::default()).unwrap();
        // Exactly one outage row per (trial, scheme, sweep).
        assert_eq!(t.count_metric("outage"), 20 * 2 * 2);
        for r in &t.rows {
            assert!(r.value == 0.0 || r.value == 1.0);
        }
        // Proposed never loses to 1-hop on aggregate.
        for &p in &[-10.0, 10.0] {
            let prop: f64 = t.values("proposed", p, "outage").iter().sum();
            let one: f64 = t.values("only_1hop", p, "outage").iter().sum();
            assert!(prop <= one, "P={p}: {prop} > {one}");
        }
    }

    #[test]
    fn scheme_isolation_shares_channels() {
        // The same trial under two specs differing only in schemes
        // produces identical rows for the shared scheme.
        let cfg = small_sim();
        let mk = |schemes| ExperimentSpec {
            kind: ExperimentKind::OutageVsPmax,
            sweep: vec![0.0],
            trials: 10,
            schemes,
            output_path: None,
        };
        let a = run_experiment(&mk(vec![Scheme::Proposed]), &cfg, &FlConfig::default()).unwrap();
        let b = run_experiment(
            &mk(vec![Scheme::Proposed, Scheme::Only1hop]),
            &cfg,
            &FlConfig::default(),
        )
        .unwrap();
        let av = a.values("proposed", 0.0, "outage");
        let bv = b.values("proposed", 0.0, "outage");
        assert_eq!(av, bv);
    }

    #[test]
    fn energy_cdf_emits_energy_rows() {
        let cfg = SimConfig { n_sns: 8, seed: 3, ..Default::default() };
        let spec = ExperimentSpec {
            kind: ExperimentKind::EnergyCdf,
            sweep: vec![0.0],
            trials: 5,
            schemes: vec![Scheme::Proposed, Scheme::OneHopPmax],
            output_path: None,
        };
        let t = run_experiment(&spec, &cfg, &FlConfig::default()).unwrap();
        assert_eq!(t.count_metric("e_tx_j"), 5 * 2);
        let prop = t.values("proposed", 0.0, "e_tx_j");
        let pmax = t.values("one_hop_pmax", 0.0, "e_tx_j");
        for (a, b) in prop.iter().zip(&pmax) {
            assert!(a.is_finite() && b.is_finite());
            assert!(a > &0.0 && b > &0.0);
        }
        // Optimized proposed beats the unoptimized 1-hop baseline.
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&prop) < mean(&pmax));
    }

    #[test]
    fn csv_round_trip_preserves_rows() {
        let cfg = small_sim();
        let spec = ExperimentSpec {
            kind: ExperimentKind::ParticipationCdf,
            sweep: vec![15.0],
            trials: 8,
            schemes: vec![Scheme::Proposed],
            output_path: None,
        };
        let t = run_experiment(&spec, &cfg, &FlConfig::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("experiment,scheme,sweep_value,trial,metric,value"));
        let back = ResultTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back.rows.len(), t.rows.len());
        assert_eq!(back.rows[3].metric, t.rows[3].metric);
    }

    #[test]
    fn deterministic_rerun() {
        let cfg = small_sim();
        let spec = ExperimentSpec {
            kind: ExperimentKind::EnergyVsLatency,
            sweep: vec![2.0, 4.0],
            trials: 4,
            schemes: vec![Scheme::Proposed],
            output_path: None,
        };
        let fl = FlConfig::default();
        let mut a = Vec::new();
        run_experiment(&spec, &cfg, &fl).unwrap().write_csv(&mut a).unwrap();
        let mut b = Vec::new();
        run_experiment(&spec, &cfg, &fl).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b, "rerun must be byte-identical");
    }

    #[test]
    fn unknown_scheme_is_an_error() {
        assert!(matches!(Scheme::parse("nope"), Err(Error::UnknownScheme(_))));
    }
}
