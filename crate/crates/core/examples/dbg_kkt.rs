use relayfl::channel::CsiMode;
use relayfl::powopt::*;
use rand::{Rng, SeedableRng};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let t_cap: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1e13);
    let newton_tol: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1e-9);
    let floor: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-31);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
    let mut worst_kkt = 0f64;
    let mut worst_gap_ratio = 0f64;
    let t0 = std::time::Instant::now();
    for _ in 0..40 {
        let n = rng.random_range(2..=3usize);
        let gains: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(1.0..5.0))).collect();
        let problem = EeProblem {
            txs: gains.iter().enumerate().map(|(i, &a)| Transmitter { sn: i, role: TxRole::OneHop, a, b: if i % 2 == 0 { a * 0.02 } else { 0.0 }, weight: 1.0 }).collect(),
            p_max_w: 0.2,
            t_eff_s: 4e-4,
            packet_bits: 5e3,
            bandwidth_hz: 1e8,
            csi_mode: CsiMode::Imperfect,
        };
        let opts = BarrierOpts { t_cap, newton_tol, decr_floor: floor, ..Default::default() };
        match spca_optimize_with_opts(&problem, 1e-8, 60, &opts) {
            Ok((alloc, trace)) => {
                let last = trace.rows.last().unwrap();
                worst_kkt = worst_kkt.max(last.kkt_residual);
                if let Ok(oracle) = brute_force_power_oracle(&problem, 200) {
                    worst_gap_ratio = worst_gap_ratio.max(alloc.e_norm / oracle.e_norm);
                }
                assert!(trace.is_monotone(1e-9), "monotonicity broke");
            }
            Err(e) => println!("ERR: {e}"),
        }
    }
    println!("t_cap={t_cap:.0e} tol={newton_tol:.0e} floor={floor:.0e}: worst kkt={worst_kkt:.2e} worst spca/oracle={worst_gap_ratio:.4} elapsed={:?}", t0.elapsed());
}
