//! Construction of the convex surrogate subproblem solved at each SPCA
//! iteration.
//!
//! Internally powers are rescaled to u = P/P_max so every box is [0,1];
//! link coefficients absorb P_max. Per transmitter the variables are
//! [u, omega, gamma, q] plus the SNR auxiliary (rho/psi/zeta) on
//! perfect-CSI links, where the exponential rate constraint is exact.
//! Estimated links with positive error variance use the concave
//! difference-of-logs lower bound instead. The accumulator E_q appears
//! in the program description; the solver eliminates it analytically
//! (the energy-accumulation constraint is active at any optimum).

use crate::airtime::dol_rate;
use crate::error::{Error, Result};

use super::barrier::BarrierSolution;
use super::{icsi_rate_lower_bound, EeProblem, SpcaState, TxRole};

/// Constraint inventory of one subproblem, for inspection and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Linearized omega^2/P lower bound vs q.
    OmegaSurrogate { tx: usize },
    /// gamma >= omega^2.
    GammaVsOmegaSq { tx: usize },
    /// SNR auxiliary bound rho <= a*P (perfect-CSI links).
    SnrLinear { tx: usize },
    /// 1 + rho - 2^gamma >= 0 (perfect-CSI links).
    RateExp { tx: usize },
    /// gamma <= concave DoL rate lower bound (estimated links).
    RateIcsi { tx: usize },
    /// 0 <= P.
    BoxLow { tx: usize },
    /// P <= P_max.
    BoxHigh { tx: usize },
    /// sum w/q <= E_q.
    EnergyAccumulation,
    /// sum w/gamma <= deadline budget.
    Deadline,
}

/// Per-transmitter block of the subproblem, in u = P/P_max units.
#[derive(Debug, Clone, Copy)]
pub struct TxBlock {
    pub sn: usize,
    pub weight: f64,
    /// Gain-over-noise coefficient scaled by P_max.
    pub a: f64,
    /// Error-over-noise coefficient scaled by P_max.
    pub b: f64,
    pub anchor_u: f64,
    /// Surrogate coefficients: Omega(omega, u) = lin*omega - quad*u.
    pub omega_lin: f64,
    pub omega_quad: f64,
    /// Exact exponential rate form (b == 0).
    pub pcsi: bool,
}

impl TxBlock {
    pub fn stride(&self) -> usize {
        if self.pcsi {
            5
        } else {
            4
        }
    }

    /// Achievable rate at u (true DoL/Shannon rate).
    pub fn rate(&self, u: f64) -> f64 {
        dol_rate(u, self.a, self.b)
    }

    /// Rate value the subproblem constraint allows at u.
    pub fn rate_bound(&self, u: f64) -> f64 {
        if self.pcsi {
            self.rate(u)
        } else {
            icsi_rate_lower_bound(u, self.a, self.b, self.anchor_u)
        }
    }
}

/// One convex SPCA subproblem.
#[derive(Debug, Clone)]
pub struct SubProblem {
    pub txs: Vec<TxBlock>,
    /// Deadline right-hand side in 1/rate units.
    pub time_budget: f64,
    pub p_max_w: f64,
    /// Variable names, per block then the accumulator E_q.
    pub variables: Vec<String>,
    pub constraints: Vec<ConstraintKind>,
}

impl SubProblem {
    pub fn n_blocks(&self) -> usize {
        self.txs.len()
    }

    /// Solver variable count (E_q is eliminated analytically).
    pub fn n_solver_vars(&self) -> usize {
        self.txs.iter().map(TxBlock::stride).sum()
    }

    pub fn offset(&self, t: usize) -> usize {
        self.txs[..t].iter().map(TxBlock::stride).sum()
    }

    /// Maps a barrier solution back to watt-scale SPCA state.
    pub fn extract_state(&self, problem: &EeProblem, sol: &BarrierSolution, iter: usize) -> SpcaState {
        let n = self.n_blocks();
        let mut powers_w = Vec::with_capacity(n);
        let mut omega = Vec::with_capacity(n);
        let mut gamma = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        let mut aux = Vec::with_capacity(n);
        let mut e_q = 0.0;
        for (t, block) in self.txs.iter().enumerate() {
            let o = self.offset(t);
            let u = sol.x[o];
            powers_w.push(u * self.p_max_w);
            omega.push(sol.x[o + 1]);
            gamma.push(sol.x[o + 2]);
            let q_scaled = sol.x[o + 3];
            q.push(q_scaled / self.p_max_w);
            aux.push(if block.pcsi { sol.x[o + 4] } else { block.a * u });
            e_q += block.weight / q_scaled;
        }
        e_q *= self.p_max_w;
        debug_assert_eq!(problem.txs.len(), n);
        SpcaState { powers_w, omega, gamma, q, aux, e_q, iter }
    }
}

/// Builds the convex subproblem around the current iterate. Fails before
/// solving when the anchor itself is infeasible (dead link, bad anchor
/// values, or an anchor that misses the deadline).
pub fn build_subproblem(problem: &EeProblem, state: &SpcaState) -> Result<SubProblem> {
    problem.validate()?;
    let n = problem.txs.len();
    if state.powers_w.len() != n || state.omega.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: state.powers_w.len() });
    }

    let p_max = problem.p_max_w;
    let mut txs = Vec::with_capacity(n);
    let mut variables = Vec::new();
    let mut constraints = Vec::new();
    let mut anchor_time = 0.0;
    for (t, tx) in problem.txs.iter().enumerate() {
        let anchor_u = state.powers_w[t] / p_max;
        let anchor_omega = state.omega[t];
        if !(anchor_u > 0.0 && anchor_u <= 1.0 + 1e-12) || !(anchor_omega > 0.0) {
            return Err(Error::Solver(format!(
                "anchor for SN {} outside the domain (u={anchor_u}, omega={anchor_omega})",
                tx.sn
            )));
        }
        let a = tx.a * p_max;
        let b = tx.b * p_max;
        let ratio = anchor_omega / anchor_u;
        let block = TxBlock {
            sn: tx.sn,
            weight: tx.weight,
            a,
            b,
            anchor_u,
            omega_lin: 2.0 * ratio,
            omega_quad: ratio * ratio,
            pcsi: tx.b == 0.0,
        };
        anchor_time += tx.weight / block.rate(anchor_u);

        let aux_name = match tx.role {
            TxRole::OneHop => "rho",
            TxRole::TwoHop { .. } => "psi",
            TxRole::Relay => "zeta",
        };
        variables.push(format!("p_{}", tx.sn));
        variables.push(format!("omega_{}", tx.sn));
        variables.push(format!("gamma_{}", tx.sn));
        variables.push(format!("q_{}", tx.sn));
        constraints.push(ConstraintKind::OmegaSurrogate { tx: t });
        constraints.push(ConstraintKind::GammaVsOmegaSq { tx: t });
        if block.pcsi {
            variables.push(format!("{aux_name}_{}", tx.sn));
            constraints.push(ConstraintKind::SnrLinear { tx: t });
            constraints.push(ConstraintKind::RateExp { tx: t });
        } else {
            constraints.push(ConstraintKind::RateIcsi { tx: t });
        }
        constraints.push(ConstraintKind::BoxLow { tx: t });
        constraints.push(ConstraintKind::BoxHigh { tx: t });

        txs.push(block);
    }
    variables.push("e_q".to_string());
    constraints.push(ConstraintKind::EnergyAccumulation);
    constraints.push(ConstraintKind::Deadline);

    let time_budget = problem.time_budget();
    if anchor_time > time_budget {
        return Err(Error::DeadlineInfeasible(format!(
            "anchor violates the deadline: {anchor_time:.6} > budget {time_budget:.6}"
        )));
    }

    Ok(SubProblem { txs, time_budget, p_max_w: p_max, variables, constraints })
}
