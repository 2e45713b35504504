//! Transmit-power optimization: minimizes total uplink transmit energy
//! under the round deadline by successive parametric convex
//! approximation, with an in-repo barrier solver for the convex
//! subproblems and a brute-force grid oracle for verification.

mod barrier;
mod subproblem;

pub use barrier::{BarrierOpts, BarrierSolution};
pub use subproblem::{build_subproblem, ConstraintKind, SubProblem};

use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

use crate::airtime::dol_rate;
use crate::airtime::{AggregationMode, RateModel};
use crate::channel::CsiMode;
use crate::error::{Error, Result};
use crate::grouping::Grouping;

/// First-order lower bound of omega^2/z around the anchor
/// (anchor_omega, anchor_z): tight at the anchor, below elsewhere.
pub fn omega_surrogate(omega: f64, z: f64, anchor_omega: f64, anchor_z: f64) -> f64 {
    let r = anchor_omega / anchor_z;
    2.0 * r * omega - r * r * z
}

/// Concave lower bound of the difference-of-logs rate around
/// `anchor_p`: the first log stays exact, the second is linearized.
/// Exact everywhere when `b` is zero, and tight at the anchor.
pub fn icsi_rate_lower_bound(p: f64, a: f64, b: f64, anchor_p: f64) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    let exact = ((a + b) * p).ln_1p() / ln2;
    if b == 0.0 {
        return exact;
    }
    let at_anchor = (b * anchor_p).ln_1p() / ln2;
    let slope = b / (1.0 + b * anchor_p) / ln2;
    exact - at_anchor - slope * (p - anchor_p)
}

/// Role of a transmitter inside the TDMA round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxRole {
    OneHop,
    TwoHop { relay: usize },
    Relay,
}

/// One transmitter of the energy problem: normalized link coefficients
/// (a = gain/noise, b = estimation-error/noise) and the number of
/// packets its slot carries.
#[derive(Debug, Clone, Copy)]
pub struct Transmitter {
    pub sn: usize,
    pub role: TxRole,
    pub a: f64,
    pub b: f64,
    pub weight: f64,
}

/// Energy-efficiency problem instance: fixed grouping, link gains,
/// power cap, and the uplink deadline.
#[derive(Debug, Clone)]
pub struct EeProblem {
    pub txs: Vec<Transmitter>,
    pub p_max_w: f64,
    pub t_eff_s: f64,
    pub packet_bits: f64,
    pub bandwidth_hz: f64,
    pub csi_mode: CsiMode,
}

impl EeProblem {
    /// Builds the problem from a pruned grouping. `t_eff_s` must already
    /// have any pilot overhead subtracted.
    pub fn from_grouping(
        grouping: &Grouping,
        rates: &RateModel,
        p_max_w: f64,
        t_eff_s: f64,
        packet_bits: f64,
        bandwidth_hz: f64,
        mode: AggregationMode,
    ) -> Result<Self> {
        let mut txs = Vec::new();
        for &n in &grouping.one_hop {
            txs.push(Transmitter {
                sn: n,
                role: TxRole::OneHop,
                a: rates.a_direct[n],
                b: rates.b_direct[n],
                weight: 1.0,
            });
        }
        for (&n, &k) in &grouping.two_hop {
            if !grouping.relays.contains(&k) {
                return Err(Error::EmptyRelaySet { sn: n });
            }
            txs.push(Transmitter {
                sn: n,
                role: TxRole::TwoHop { relay: k },
                a: rates.a_pair[n][k],
                b: rates.b_pair[n][k],
                weight: 1.0,
            });
        }
        for &k in &grouping.relays {
            txs.push(Transmitter {
                sn: k,
                role: TxRole::Relay,
                a: rates.a_direct[k],
                b: rates.b_direct[k],
                weight: mode.relay_packets(grouping.clients_of(k)),
            });
        }
        let csi_mode =
            if txs.iter().all(|t| t.b == 0.0) { CsiMode::Perfect } else { CsiMode::Imperfect };
        let problem = Self { txs, p_max_w, t_eff_s, packet_bits, bandwidth_hz, csi_mode };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_max_w > 0.0
            && self.t_eff_s > 0.0
            && self.packet_bits > 0.0
            && self.bandwidth_hz > 0.0)
        {
            return Err(Error::Config("EeProblem scalars must be positive".into()));
        }
        for t in &self.txs {
            if !(t.a > 0.0) {
                return Err(Error::ZeroRateLink { sn: t.sn });
            }
            if t.b < 0.0 || t.weight <= 0.0 {
                return Err(Error::Config(format!("transmitter {} has invalid b/weight", t.sn)));
            }
        }
        Ok(())
    }

    /// Right-hand side of the deadline constraint in 1/rate units:
    /// sum of weight/rate must stay below t_eff * W / |B|.
    pub fn time_budget(&self) -> f64 {
        self.t_eff_s * self.bandwidth_hz / self.packet_bits
    }

    /// Achievable rate of transmitter `t` at power `p_w` (watts).
    pub fn rate(&self, t: usize, p_w: f64) -> f64 {
        dol_rate(p_w, self.txs[t].a, self.txs[t].b)
    }

    /// Normalized energy sum(w * P / r) at the given powers, in watts
    /// per bit/s/Hz; multiply by |B|/W for joules.
    pub fn energy_norm(&self, powers_w: &[f64]) -> f64 {
        self.txs
            .iter()
            .zip(powers_w)
            .map(|(t, &p)| t.weight * p / dol_rate(p, t.a, t.b))
            .sum()
    }

    /// Normalized uplink time sum(w / r) at the given powers.
    pub fn time_norm(&self, powers_w: &[f64]) -> f64 {
        self.txs
            .iter()
            .zip(powers_w)
            .map(|(t, &p)| t.weight / dol_rate(p, t.a, t.b))
            .sum()
    }
}

/// Iterate of the surrogate optimization.
#[derive(Debug, Clone)]
pub struct SpcaState {
    pub powers_w: Vec<f64>,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub q: Vec<f64>,
    /// SNR-bound auxiliaries (rho/psi/zeta family).
    pub aux: Vec<f64>,
    pub e_q: f64,
    pub iter: usize,
}

impl SpcaState {
    /// Anchor at uniform power: rates and auxiliaries from the true
    /// rate at `p_w`.
    pub fn at_uniform_power(problem: &EeProblem, p_w: f64) -> Self {
        let n = problem.txs.len();
        let powers_w = vec![p_w; n];
        let gamma: Vec<f64> = (0..n).map(|t| problem.rate(t, p_w)).collect();
        let omega: Vec<f64> = gamma.iter().map(|g| g.sqrt()).collect();
        let q: Vec<f64> = gamma.iter().map(|g| g / p_w).collect();
        let aux: Vec<f64> = problem.txs.iter().map(|t| t.a * p_w).collect();
        let e_q = problem.txs.iter().zip(&q).map(|(t, &q)| t.weight / q).sum();
        Self { powers_w, omega, gamma, q, aux, e_q, iter: 0 }
    }
}

/// Per-iteration diagnostics of one SPCA run.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub e_q: f64,
    pub kkt_residual: f64,
    pub inner_newton_steps: usize,
    pub feasibility_slack: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SpcaTrace {
    pub rows: Vec<TraceRow>,
}

impl SpcaTrace {
    pub fn final_e_q(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.e_q)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].e_q <= w[0].e_q + slack)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "e_q", "kkt_residual", "inner_newton_steps"])?;
        for r in &self.rows {
            w.write_record(&[
                r.iter.to_string(),
                r.e_q.to_string(),
                r.kkt_residual.to_string(),
                r.inner_newton_steps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Optimized powers with the resulting true rates, times, and energy.
#[derive(Debug, Clone)]
pub struct PowerAllocation {
    pub powers: BTreeMap<usize, f64>,
    pub rates: BTreeMap<usize, f64>,
    pub t_ul_s: f64,
    pub e_tx_j: f64,
    /// Objective in power-over-rate units (joules = e_norm * |B|/W).
    pub e_norm: f64,
}

impl PowerAllocation {
    pub fn empty() -> Self {
        Self {
            powers: BTreeMap::new(),
            rates: BTreeMap::new(),
            t_ul_s: 0.0,
            e_tx_j: 0.0,
            e_norm: 0.0,
        }
    }

    /// JSON object keyed by SN id with watts.
    pub fn powers_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.powers).expect("map of f64 serializes")
    }
}

pub const DEFAULT_EPS_I: f64 = 1e-4;
pub const DEFAULT_I_MAX: usize = 50;

/// SPCA energy minimization under perfect CSI (the surrogate problem
/// iterated to a stationary point). Requires the grouping to be feasible
/// at P_max.
pub fn spca_optimize(
    problem: &EeProblem,
    eps_i: f64,
    i_max: usize,
) -> Result<(PowerAllocation, SpcaTrace)> {
    run_spca(problem, eps_i, i_max)
}

/// ICSI variant: same outer loop, with each estimated link's rate
/// constraint replaced by the concave difference-of-logs lower bound,
/// re-anchored every iteration. Links with zero error variance keep the
/// exact perfect-CSI constraint form.
pub fn spca_optimize_icsi(
    problem: &EeProblem,
    eps_i: f64,
    i_max: usize,
) -> Result<(PowerAllocation, SpcaTrace)> {
    run_spca(problem, eps_i, i_max)
}

/// Solves one convex subproblem to the given duality-gap tolerance.
/// Map the solution back with [`SubProblem::extract_state`].
pub fn solve_subproblem(sub: &SubProblem, tol: f64) -> Result<BarrierSolution> {
    barrier::solve(sub, &BarrierOpts { gap_tol: tol, ..Default::default() })
}

/// As [`spca_optimize`] with explicit barrier solver settings.
pub fn spca_optimize_with_opts(
    problem: &EeProblem,
    eps_i: f64,
    i_max: usize,
    opts: &BarrierOpts,
) -> Result<(PowerAllocation, SpcaTrace)> {
    problem.validate()?;
    if problem.txs.is_empty() {
        return Ok((PowerAllocation::empty(), SpcaTrace::default()));
    }
    if problem.txs.len() == 1 {
        return single_tx_result(problem);
    }
    spca_iterate(problem, eps_i, i_max, opts)
}

fn run_spca(problem: &EeProblem, eps_i: f64, i_max: usize) -> Result<(PowerAllocation, SpcaTrace)> {
    problem.validate()?;
    if problem.txs.is_empty() {
        return Ok((PowerAllocation::empty(), SpcaTrace::default()));
    }
    if problem.txs.len() == 1 {
        return single_tx_result(problem);
    }
    spca_iterate(problem, eps_i, i_max, &BarrierOpts::default())
}

fn single_tx_result(problem: &EeProblem) -> Result<(PowerAllocation, SpcaTrace)> {
    let alloc = single_tx_closed_form(problem)?;
    let trace = SpcaTrace {
        rows: vec![TraceRow {
            iter: 0,
            e_q: alloc.e_norm,
            kkt_residual: 0.0,
            inner_newton_steps: 0,
            feasibility_slack: 0.0,
        }],
    };
    Ok((alloc, trace))
}

/// The iterative SPCA engine (multi-transmitter path).
pub(crate) fn spca_iterate(
    problem: &EeProblem,
    eps_i: f64,
    i_max: usize,
    opts: &BarrierOpts,
) -> Result<(PowerAllocation, SpcaTrace)> {
    let budget = problem.time_budget();
    let mut state = SpcaState::at_uniform_power(problem, problem.p_max_w);
    let t_norm: f64 = problem.txs.iter().zip(&state.gamma).map(|(t, &g)| t.weight / g).sum();
    if t_norm > budget {
        return Err(Error::DeadlineInfeasible(format!(
            "grouping misses the deadline even at P_max (needs {t_norm:.4} of {budget:.4} rate-time units); prune first"
        )));
    }

    let mut trace = SpcaTrace::default();
    trace.rows.push(TraceRow {
        iter: 0,
        e_q: state.e_q,
        kkt_residual: f64::NAN,
        inner_newton_steps: 0,
        feasibility_slack: budget - t_norm,
    });

    for i in 1..=i_max {
        let sub = build_subproblem(problem, &state)?;
        let sol = match barrier::solve(&sub, opts) {
            Ok(sol) => sol,
            Err(Error::Solver(msg)) => {
                // Keep the last accepted iterate rather than failing the
                // whole run; the trace records how far we got.
                return finalize(problem, &state, trace, Some(msg));
            }
            Err(e) => return Err(e),
        };
        let new_state = sub.extract_state(problem, &sol, i);

        // Accept only improving iterates so the trace stays monotone
        // even at solver precision.
        if !(new_state.e_q <= state.e_q + 1e-12) {
            break;
        }
        let delta = state.e_q - new_state.e_q;
        state = new_state;
        trace.rows.push(TraceRow {
            iter: i,
            e_q: state.e_q,
            kkt_residual: sol.kkt_residual,
            inner_newton_steps: sol.newton_steps,
            feasibility_slack: sol.feasibility_slack,
        });
        if delta.abs() < eps_i {
            break;
        }
    }
    finalize(problem, &state, trace, None)
}

fn finalize(
    problem: &EeProblem,
    state: &SpcaState,
    trace: SpcaTrace,
    solver_warning: Option<String>,
) -> Result<(PowerAllocation, SpcaTrace)> {
    let alloc = allocation_from_powers(problem, &state.powers_w)?;
    // The gamma variables lower-bound true rates by construction, so the
    // deadline must hold when re-evaluated with true rates.
    if alloc.t_ul_s > problem.t_eff_s * (1.0 + 1e-9) {
        return Err(Error::Solver(format!(
            "final allocation violates the deadline: {} s > {} s{}",
            alloc.t_ul_s,
            problem.t_eff_s,
            solver_warning.map(|m| format!(" (solver: {m})")).unwrap_or_default()
        )));
    }
    Ok((alloc, trace))
}

/// Evaluates an allocation with true rates.
pub fn allocation_from_powers(problem: &EeProblem, powers_w: &[f64]) -> Result<PowerAllocation> {
    if powers_w.len() != problem.txs.len() {
        return Err(Error::DimensionMismatch { expected: problem.txs.len(), got: powers_w.len() });
    }
    let scale = problem.packet_bits / problem.bandwidth_hz;
    let mut powers = BTreeMap::new();
    let mut rates = BTreeMap::new();
    for (t, &p) in problem.txs.iter().zip(powers_w) {
        powers.insert(t.sn, p);
        rates.insert(t.sn, dol_rate(p, t.a, t.b));
    }
    let e_norm = problem.energy_norm(powers_w);
    let t_norm = problem.time_norm(powers_w);
    Ok(PowerAllocation { powers, rates, t_ul_s: scale * t_norm, e_tx_j: scale * e_norm, e_norm })
}

/// Single transmitter: energy per bit rises with power, so the optimum
/// sits where the deadline is active; solve r(P) = w/budget by
/// bisection on the monotone rate.
fn single_tx_closed_form(problem: &EeProblem) -> Result<PowerAllocation> {
    let tx = &problem.txs[0];
    let r_req = tx.weight / problem.time_budget();
    let r_max = problem.rate(0, problem.p_max_w);
    if r_max < r_req {
        return Err(Error::DeadlineInfeasible(format!(
            "SN {} needs rate {r_req:.6} but reaches only {r_max:.6} at P_max",
            tx.sn
        )));
    }
    let mut lo = 0.0f64;
    let mut hi = problem.p_max_w;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if problem.rate(0, mid) < r_req {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    allocation_from_powers(problem, &[hi])
}

/// Exhaustive feasible-minimum search over a per-transmitter power grid.
/// Supports up to 4 transmitters; intended as a verification oracle.
pub fn brute_force_power_oracle(
    problem: &EeProblem,
    grid_points_per_dim: usize,
) -> Result<PowerAllocation> {
    const MAX_DIMS: usize = 4;
    problem.validate()?;
    let d = problem.txs.len();
    if d == 0 {
        return Ok(PowerAllocation::empty());
    }
    if d > MAX_DIMS {
        return Err(Error::DimensionTooLarge { dims: d, max: MAX_DIMS });
    }
    let m = grid_points_per_dim.max(2);
    let p_lo = problem.p_max_w * 1e-9;
    let grid: Vec<f64> =
        (0..m).map(|i| p_lo + (problem.p_max_w - p_lo) * i as f64 / (m - 1) as f64).collect();

    // Per-transmitter time and energy terms at every grid power.
    let time_terms: Vec<Vec<f64>> = (0..d)
        .map(|t| grid.iter().map(|&p| problem.txs[t].weight / problem.rate(t, p)).collect())
        .collect();
    let energy_terms: Vec<Vec<f64>> = (0..d)
        .map(|t| grid.iter().map(|&p| problem.txs[t].weight * p / problem.rate(t, p)).collect())
        .collect();

    let budget = problem.time_budget() * (1.0 + 1e-12);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut idx = vec![0usize; d];
    loop {
        let time: f64 = (0..d).map(|t| time_terms[t][idx[t]]).sum();
        if time <= budget {
            let energy: f64 = (0..d).map(|t| energy_terms[t][idx[t]]).sum();
            if best.as_ref().map_or(true, |(e, _)| energy < *e) {
                best = Some((energy, idx.clone()));
            }
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return match best {
                    Some((_, best_idx)) => {
                        let powers: Vec<f64> = (0..d).map(|t| grid[best_idx[t]]).collect();
                        allocation_from_powers(problem, &powers)
                    }
                    None => Err(Error::NoFeasiblePoint),
                };
            }
        }
    }
}
