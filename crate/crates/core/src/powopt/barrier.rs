//! Log-barrier interior-point solver for the SPCA subproblems.
//!
//! Damped Newton with backtracking line search on the centering
//! problems, barrier parameter divided by ten per stage. The Newton
//! systems exploit the subproblem structure: the Hessian is block
//! diagonal across transmitters except for a single rank-one coupling
//! from the shared deadline constraint, so each step costs O(n) via
//! small per-block Cholesky factorizations and one Sherman-Morrison
//! correction.

use crate::error::{Error, Result};

use super::subproblem::SubProblem;

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy)]
pub struct BarrierOpts {
    /// Initial barrier weight on the objective (mu = 1/t0 = 10).
    pub t0: f64,
    /// Stage growth of the objective weight (mu divided by this).
    pub mu_factor: f64,
    /// Duality-gap target, relative to max(1, initial objective).
    pub gap_tol: f64,
    /// Newton decrement threshold (lambda^2 / 2) per centering.
    pub newton_tol: f64,
    /// Largest barrier weight; beyond this f64 gradients are noise.
    pub t_cap: f64,
    /// f64 decrement floor coefficient: tolerance is relaxed to
    /// decr_floor * t^2 at barrier weight t.
    pub decr_floor: f64,
    pub max_stage_steps: usize,
    pub max_total_steps: usize,
    pub max_stages: usize,
}

impl Default for BarrierOpts {
    fn default() -> Self {
        Self {
            t0: 0.1,
            mu_factor: 10.0,
            gap_tol: 1e-10,
            newton_tol: 1e-10,
            t_cap: 1e10,
            decr_floor: 1e-32,
            max_stage_steps: 120,
            max_total_steps: 5000,
            max_stages: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub x: Vec<f64>,
    /// Objective sum(w/q) in solver units.
    pub objective: f64,
    /// Duality-gap estimate m/t at termination.
    pub gap: f64,
    /// max(stationarity residual, gap).
    pub kkt_residual: f64,
    pub newton_steps: usize,
    /// Deadline slack (budget - sum w/gamma) at the solution.
    pub feasibility_slack: f64,
}

/// Barrier value with the objective measured against `f_ref` so line
/// search comparisons stay accurate at large barrier weights; None when
/// x is outside the domain or infeasible.
fn phi(sub: &SubProblem, t_bar: f64, x: &[f64], f_ref: f64) -> Option<f64> {
    let mut f = -f_ref;
    let mut val = 0.0;
    let mut deadline = -sub.time_budget;
    for (t, b) in sub.txs.iter().enumerate() {
        let o = sub.offset(t);
        let (u, omega, gamma, q) = (x[o], x[o + 1], x[o + 2], x[o + 3]);
        if q <= 0.0 || gamma <= 0.0 || u <= 0.0 || u >= 1.0 {
            return None;
        }
        f += b.weight / q;

        let g1 = q - b.omega_lin * omega + b.omega_quad * u;
        let g2 = omega * omega - gamma;
        if g1 >= 0.0 || g2 >= 0.0 {
            return None;
        }
        val -= (-g1).ln() + (-g2).ln();
        if b.pcsi {
            let rho = x[o + 4];
            let g3 = rho - b.a * u;
            let g4 = (gamma * LN2).exp() - 1.0 - rho;
            if g3 >= 0.0 || g4 >= 0.0 {
                return None;
            }
            val -= (-g3).ln() + (-g4).ln();
        } else {
            let g3 = gamma - b.rate_bound(u);
            if g3 >= 0.0 {
                return None;
            }
            val -= (-g3).ln();
        }
        // Boxes: 0 < u < 1 (checked above).
        val -= u.ln() + (1.0 - u).ln();
        deadline += b.weight / gamma;
    }
    if deadline >= 0.0 {
        return None;
    }
    val -= (-deadline).ln();
    Some(val + t_bar * f)
}

/// Per-block dense Hessians (up to 5x5), the gradient, and the rank-one
/// deadline coupling vector.
struct Assembled {
    grad: Vec<f64>,
    blocks: Vec<[f64; 25]>,
    coupling: Vec<f64>,
}

fn assemble(sub: &SubProblem, t_bar: f64, x: &[f64]) -> Assembled {
    let n = sub.n_solver_vars();
    let mut grad = vec![0.0; n];
    let mut blocks = Vec::with_capacity(sub.n_blocks());
    let mut coupling = vec![0.0; n];

    // Deadline residual first (shared across blocks).
    let mut deadline = -sub.time_budget;
    for (t, b) in sub.txs.iter().enumerate() {
        let o = sub.offset(t);
        deadline += b.weight / x[o + 2];
    }
    let inv_dl = 1.0 / (-deadline);

    for (t, b) in sub.txs.iter().enumerate() {
        let o = sub.offset(t);
        let s = b.stride();
        let (u, omega, gamma, q) = (x[o], x[o + 1], x[o + 2], x[o + 3]);
        let mut h = [0.0f64; 25];
        // Local indices inside the block.
        let (iu, iw, ig, iq) = (0usize, 1usize, 2usize, 3usize);
        let add_outer = |h: &mut [f64; 25], entries: &[(usize, f64)], scale: f64| {
            for &(i, gi) in entries {
                for &(j, gj) in entries {
                    h[i * 5 + j] += scale * gi * gj;
                }
            }
        };

        // Objective t*w/q.
        grad[o + iq] += -t_bar * b.weight / (q * q);
        h[iq * 5 + iq] += t_bar * 2.0 * b.weight / (q * q * q);

        // g1 = q - lin*omega + quad*u.
        let g1 = q - b.omega_lin * omega + b.omega_quad * u;
        let inv1 = 1.0 / (-g1);
        let d1 = [(iu, b.omega_quad), (iw, -b.omega_lin), (iq, 1.0)];
        for &(i, gi) in &d1 {
            grad[o + i] += inv1 * gi;
        }
        add_outer(&mut h, &d1, inv1 * inv1);

        // g2 = omega^2 - gamma.
        let g2 = omega * omega - gamma;
        let inv2 = 1.0 / (-g2);
        let d2 = [(iw, 2.0 * omega), (ig, -1.0)];
        for &(i, gi) in &d2 {
            grad[o + i] += inv2 * gi;
        }
        add_outer(&mut h, &d2, inv2 * inv2);
        h[iw * 5 + iw] += inv2 * 2.0;

        if b.pcsi {
            let ir = 4usize;
            let rho = x[o + ir];
            // g3 = rho - a*u.
            let g3 = rho - b.a * u;
            let inv3 = 1.0 / (-g3);
            let d3 = [(ir, 1.0), (iu, -b.a)];
            for &(i, gi) in &d3 {
                grad[o + i] += inv3 * gi;
            }
            add_outer(&mut h, &d3, inv3 * inv3);
            // g4 = 2^gamma - 1 - rho.
            let e = (gamma * LN2).exp();
            let g4 = e - 1.0 - rho;
            let inv4 = 1.0 / (-g4);
            let d4 = [(ig, LN2 * e), (ir, -1.0)];
            for &(i, gi) in &d4 {
                grad[o + i] += inv4 * gi;
            }
            add_outer(&mut h, &d4, inv4 * inv4);
            h[ig * 5 + ig] += inv4 * LN2 * LN2 * e;
        } else {
            // g3 = gamma - r_low(u).
            let g3 = gamma - b.rate_bound(u);
            let inv3 = 1.0 / (-g3);
            let ab = b.a + b.b;
            let drl = (ab / (1.0 + ab * u) - b.b / (1.0 + b.b * b.anchor_u)) / LN2;
            let d3 = [(ig, 1.0), (iu, -drl)];
            for &(i, gi) in &d3 {
                grad[o + i] += inv3 * gi;
            }
            add_outer(&mut h, &d3, inv3 * inv3);
            let denom = 1.0 + ab * u;
            h[iu * 5 + iu] += inv3 * ab * ab / (denom * denom * LN2);
        }

        // Boxes -u < 0 and u - 1 < 0.
        let inv_lo = 1.0 / u;
        let inv_hi = 1.0 / (1.0 - u);
        grad[o + iu] += -inv_lo + inv_hi;
        h[iu * 5 + iu] += inv_lo * inv_lo + inv_hi * inv_hi;

        // Deadline: diagonal curvature stays in the block, the outer
        // product goes through the rank-one coupling vector.
        let gd = -b.weight / (gamma * gamma);
        grad[o + ig] += inv_dl * gd;
        h[ig * 5 + ig] += inv_dl * 2.0 * b.weight / (gamma * gamma * gamma);
        coupling[o + ig] = inv_dl * gd;

        let _ = s;
        blocks.push(h);
    }

    Assembled { grad, blocks, coupling }
}

/// In-place Cholesky of the leading n x n of a 5x5 buffer.
fn chol_factor(a: &mut [f64; 25], n: usize) -> bool {
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * 5 + j];
            for k in 0..j {
                s -= a[i * 5 + k] * a[j * 5 + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return false;
                }
                a[i * 5 + i] = s.sqrt();
            } else {
                a[i * 5 + j] = s / a[j * 5 + j];
            }
        }
    }
    true
}

fn chol_solve(a: &[f64; 25], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * 5 + k] * b[k];
        }
        b[i] = s / a[i * 5 + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * 5 + i] * b[k];
        }
        b[i] = s / a[i * 5 + i];
    }
}

/// Solves (B + v v^T) d = -grad with B block diagonal.
fn newton_direction(sub: &SubProblem, asm: &Assembled) -> Result<Vec<f64>> {
    let n = sub.n_solver_vars();
    let mut factors: Vec<[f64; 25]> = Vec::with_capacity(sub.n_blocks());
    for (t, block) in asm.blocks.iter().enumerate() {
        let s = sub.txs[t].stride();
        let mut f = *block;
        let mut ridge = 0.0;
        let max_diag =
            (0..s).map(|i| block[i * 5 + i].abs()).fold(f64::MIN_POSITIVE, f64::max);
        loop {
            if chol_factor(&mut f, s) {
                break;
            }
            ridge = if ridge == 0.0 { 1e-12 * max_diag } else { ridge * 100.0 };
            if ridge > 1e-2 * max_diag {
                return Err(Error::Solver(format!(
                    "numerical failure: block {t} Hessian not positive definite"
                )));
            }
            f = *block;
            for i in 0..s {
                f[i * 5 + i] += ridge;
            }
        }
        factors.push(f);
    }

    let apply_binv = |rhs: &[f64]| -> Vec<f64> {
        let mut out = rhs.to_vec();
        for (t, f) in factors.iter().enumerate() {
            let o = sub.offset(t);
            let s = sub.txs[t].stride();
            chol_solve(f, s, &mut out[o..o + s]);
        }
        out
    };

    let neg_grad: Vec<f64> = asm.grad.iter().map(|g| -g).collect();
    let y = apply_binv(&neg_grad);
    let z = apply_binv(&asm.coupling);
    let vy: f64 = asm.coupling.iter().zip(&y).map(|(v, y)| v * y).sum();
    let vz: f64 = asm.coupling.iter().zip(&z).map(|(v, z)| v * z).sum();
    let scale = vy / (1.0 + vz);
    Ok((0..n).map(|i| y[i] - scale * z[i]).collect())
}

/// Newton centering at fixed barrier weight. Returns steps taken.
///
/// The decrement target is relaxed as t grows: gradient entries scale
/// with t, so floating point puts a floor of roughly 1e-31 * t^2 on the
/// achievable decrement. Centering quality of lambda << 0.1 is all the
/// duality-gap estimate needs.
fn center(sub: &SubProblem, t_bar: f64, x: &mut Vec<f64>, opts: &BarrierOpts) -> Result<usize> {
    let f_ref: f64 =
        sub.txs.iter().enumerate().map(|(t, b)| b.weight / x[sub.offset(t) + 3]).sum();
    let tol = opts.newton_tol.max(opts.decr_floor * t_bar * t_bar);
    let mut phi_cur =
        phi(sub, t_bar, x, f_ref).ok_or_else(|| Error::Solver("iterate left the domain".into()))?;
    let mut steps = 0;
    loop {
        if steps >= opts.max_stage_steps {
            return Err(Error::Solver(format!(
                "max inner iterations ({}) at barrier weight {t_bar:.3e}",
                opts.max_stage_steps
            )));
        }
        let asm = assemble(sub, t_bar, x);
        let d = newton_direction(sub, &asm)?;
        let decr: f64 = -asm.grad.iter().zip(&d).map(|(g, d)| g * d).sum::<f64>();
        if decr <= 2.0 * tol {
            return Ok(steps);
        }

        // Full Newton steps are admissible in the quadratic region; the
        // damped phase backtracks under an Armijo test.
        let slope = -decr;
        let quadratic_region = decr <= 0.25;
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1e-14 {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            match phi(sub, t_bar, &cand, f_ref) {
                Some(val) if quadratic_region || val <= phi_cur + 0.01 * alpha * slope => {
                    accepted = Some((cand, val));
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        steps += 1;
        match accepted {
            Some((cand, val)) => {
                // At ulp-level progress with a tiny decrement the point
                // is centered as well as f64 allows.
                let stalled = val >= phi_cur - 1e-13 * phi_cur.abs().max(1.0);
                *x = cand;
                phi_cur = val;
                if stalled && decr < 1e-4 {
                    return Ok(steps);
                }
            }
            None if decr < 1e-4 => return Ok(steps),
            None => return Err(Error::Solver("line search stalled".into())),
        }
    }
}

/// Strictly feasible start: the anchor shrunk inward with enough slack
/// on every constraint. Slack is sized from the deadline margin.
fn feasible_start(sub: &SubProblem) -> Result<Vec<f64>> {
    let anchor_time: f64 = sub.txs.iter().map(|b| b.weight / b.rate(b.anchor_u)).sum();
    let margin_rel = 1.0 - anchor_time / sub.time_budget;
    if margin_rel <= 1e-13 {
        return Err(Error::Solver("anchor has no interior deadline margin".into()));
    }

    let mut eps = (margin_rel / 8.0).min(1e-6);
    for _ in 0..32 {
        let mut x = vec![0.0; sub.n_solver_vars()];
        let mut ok = true;
        for (t, b) in sub.txs.iter().enumerate() {
            let o = sub.offset(t);
            let u = (b.anchor_u * (1.0 - eps)).min(1.0 - eps);
            let gamma = if b.pcsi {
                let rho = b.a * u * (1.0 - 0.25 * eps);
                x[o + 4] = rho;
                (rho.ln_1p() / LN2) * (1.0 - 0.25 * eps)
            } else {
                let rl = b.rate_bound(u);
                if rl <= 0.0 {
                    ok = false;
                    break;
                }
                rl * (1.0 - 0.25 * eps)
            };
            let omega = gamma.sqrt() * (1.0 - 0.25 * eps);
            let omega_cap = b.omega_lin * omega - b.omega_quad * u;
            if omega_cap <= 0.0 {
                ok = false;
                break;
            }
            x[o] = u;
            x[o + 1] = omega;
            x[o + 2] = gamma;
            x[o + 3] = omega_cap * (1.0 - 0.25 * eps);
        }
        if ok && phi(sub, 1.0, &x, 0.0).is_some() {
            return Ok(x);
        }
        eps *= 0.5;
    }
    Err(Error::Solver("could not construct a strictly feasible start".into()))
}

/// Count of barrier constraints (the eliminated accumulator excluded).
fn n_barrier_constraints(sub: &SubProblem) -> usize {
    sub.txs.iter().map(|b| if b.pcsi { 6 } else { 5 }).sum::<usize>() + 1
}

/// Enumerates constraint gradients and slacks at x:
/// calls f(sparse_gradient_entries, slack) with slack = -g > 0.
fn for_each_constraint<F: FnMut(&[(usize, f64)], f64)>(sub: &SubProblem, x: &[f64], mut f: F) {
    let mut deadline = -sub.time_budget;
    for (t, b) in sub.txs.iter().enumerate() {
        let o = sub.offset(t);
        let (u, omega, gamma, q) = (x[o], x[o + 1], x[o + 2], x[o + 3]);
        deadline += b.weight / gamma;

        let g1 = q - b.omega_lin * omega + b.omega_quad * u;
        f(&[(o, b.omega_quad), (o + 1, -b.omega_lin), (o + 3, 1.0)], -g1);
        let g2 = omega * omega - gamma;
        f(&[(o + 1, 2.0 * omega), (o + 2, -1.0)], -g2);
        if b.pcsi {
            let rho = x[o + 4];
            f(&[(o + 4, 1.0), (o, -b.a)], -(rho - b.a * u));
            let e = (gamma * LN2).exp();
            f(&[(o + 2, LN2 * e), (o + 4, -1.0)], -(e - 1.0 - rho));
        } else {
            let ab = b.a + b.b;
            let drl = (ab / (1.0 + ab * u) - b.b / (1.0 + b.b * b.anchor_u)) / LN2;
            f(&[(o + 2, 1.0), (o, -drl)], -(gamma - b.rate_bound(u)));
        }
        f(&[(o, -1.0)], u);
        f(&[(o, 1.0)], 1.0 - u);
    }
    let entries: Vec<(usize, f64)> = sub
        .txs
        .iter()
        .enumerate()
        .map(|(t, b)| {
            let gamma = x[sub.offset(t) + 2];
            (sub.offset(t) + 2, -b.weight / (gamma * gamma))
        })
        .collect();
    f(&entries, -deadline);
}

/// Tightest stationarity certificate at x: multipliers are refined by an
/// unconstrained least-squares fit over the near-active set, clamped to
/// the nonnegative orthant. Any nonnegative multiplier vector certifies
/// its own residual, so this only ever improves on the barrier estimate.
fn refined_stationarity(sub: &SubProblem, x: &[f64], t_bar: f64) -> f64 {
    let n = sub.n_solver_vars();
    let mut grad_f = vec![0.0; n];
    for (t, b) in sub.txs.iter().enumerate() {
        let iq = sub.offset(t) + 3;
        grad_f[iq] = -b.weight / (x[iq] * x[iq]);
    }

    // Gather active-ish constraints (barrier multiplier above threshold).
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut lambdas: Vec<f64> = Vec::new();
    let mut max_lambda = 0.0f64;
    for_each_constraint(sub, x, |entries, slack| {
        let lambda = 1.0 / (t_bar * slack);
        max_lambda = max_lambda.max(lambda);
        rows.push(entries.to_vec());
        lambdas.push(lambda);
    });
    let keep: Vec<usize> =
        (0..rows.len()).filter(|&i| lambdas[i] >= 1e-8 * max_lambda).collect();

    let residual = |lambda_of: &dyn Fn(usize) -> f64| -> f64 {
        let mut r = grad_f.clone();
        for (i, row) in rows.iter().enumerate() {
            let l = lambda_of(i);
            for &(j, v) in row {
                r[j] += l * v;
            }
        }
        let grad_f_inf = grad_f.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        r.iter().fold(0.0f64, |a, g| a.max(g.abs())) / (1.0 + grad_f_inf)
    };
    let barrier_res = residual(&|i| lambdas[i]);

    // Nonnegative least squares over the kept set via the classic
    // drop-negatives active-set loop on the normal equations
    // (G G^T) y = -G grad_f.
    if keep.is_empty() || keep.len() > 64 {
        return barrier_res;
    }
    let dot = |a: &[(usize, f64)], b: &[(usize, f64)]| -> f64 {
        let mut s = 0.0;
        for &(i, v) in a {
            for &(j, w) in b {
                if i == j {
                    s += v * w;
                }
            }
        }
        s
    };
    let mut active = keep;
    let mut solution: Vec<(usize, f64)> = Vec::new();
    for _ in 0..32 {
        let m = active.len();
        if m == 0 {
            break;
        }
        let mut mat = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for (ii, &i) in active.iter().enumerate() {
            for (jj, &j) in active.iter().enumerate() {
                mat[ii * m + jj] = dot(&rows[i], &rows[j]);
            }
            mat[ii * m + ii] *= 1.0 + 1e-13;
            rhs[ii] = -rows[i].iter().map(|&(k, v)| v * grad_f[k]).sum::<f64>();
        }
        if !dense_chol_solve(&mut mat, m, &mut rhs) {
            return barrier_res;
        }
        // Classic single-drop rule for small sets; batch removal keeps
        // the cost down on larger ones.
        let negatives: Vec<usize> =
            rhs.iter().enumerate().filter(|(_, v)| **v < 0.0).map(|(i, _)| i).collect();
        if !negatives.is_empty() {
            if m <= 24 {
                let worst = *negatives
                    .iter()
                    .min_by(|&&a, &&b| rhs[a].partial_cmp(&rhs[b]).unwrap())
                    .unwrap();
                active.remove(worst);
            } else {
                for &i in negatives.iter().rev() {
                    active.remove(i);
                }
            }
            continue;
        }
        solution = active.iter().copied().zip(rhs).collect();
        break;
    }
    let refined = residual(&|i| {
        solution.iter().find(|(k, _)| *k == i).map_or(0.0, |&(_, l)| l)
    });
    refined.min(barrier_res)
}

/// Dense Cholesky solve with a diagonal ridge retry; false on failure.
fn dense_chol_solve(a: &mut [f64], n: usize, b: &mut [f64]) -> bool {
    for attempt in 0..3 {
        let mut l = a.to_vec();
        let mut ok = true;
        'factor: for i in 0..n {
            for j in 0..=i {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        ok = false;
                        break 'factor;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        if !ok {
            let bump = 10f64.powi(attempt as i32 * 3) * 1e-10;
            for i in 0..n {
                a[i * n + i] *= 1.0 + bump;
                a[i * n + i] += bump;
            }
            continue;
        }
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * n + k] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
        return true;
    }
    false
}

pub fn solve(sub: &SubProblem, opts: &BarrierOpts) -> Result<BarrierSolution> {
    if sub.txs.is_empty() {
        return Err(Error::Solver("empty subproblem".into()));
    }
    let mut x = feasible_start(sub)?;
    let m = n_barrier_constraints(sub) as f64;

    let f_at = |x: &[f64]| -> f64 {
        sub.txs.iter().enumerate().map(|(t, b)| b.weight / x[sub.offset(t) + 3]).sum()
    };
    let gap_target = opts.gap_tol * f_at(&x).max(1.0);

    let mut t_bar = opts.t0;
    let mut total_steps = 0;
    for stage in 0.. {
        if stage >= opts.max_stages {
            return Err(Error::Solver("barrier stage budget exceeded".into()));
        }
        total_steps += center(sub, t_bar, &mut x, opts)?;
        if total_steps > opts.max_total_steps {
            return Err(Error::Solver("max inner iterations exceeded".into()));
        }
        if m / t_bar <= gap_target || t_bar >= opts.t_cap {
            break;
        }
        t_bar *= opts.mu_factor;
    }

    // Scaled residuals at the final centering point: stationarity of
    // grad f + J^T lambda relative to the objective gradient (with
    // least-squares-refined multipliers), and the duality gap relative
    // to the objective.
    let f_final = f_at(&x);
    let stationarity = refined_stationarity(sub, &x, t_bar);
    let gap = m / t_bar / (1.0 + f_final.abs());
    let mut slack = sub.time_budget;
    for (t, b) in sub.txs.iter().enumerate() {
        slack -= b.weight / x[sub.offset(t) + 2];
    }
    Ok(BarrierSolution {
        objective: f_final,
        x,
        gap,
        kkt_residual: stationarity.max(gap),
        newton_steps: total_steps,
        feasibility_slack: slack,
    })
}
