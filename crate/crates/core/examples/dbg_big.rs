use rand::{Rng, SeedableRng};
use relayfl::channel::CsiMode;
use relayfl::powopt::*;

fn main() {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
    for &n in &[20usize, 50, 100] {
        let gains: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(1.5..5.5))).collect();
        let problem = EeProblem {
            txs: gains.iter().enumerate().map(|(i, &a)| Transmitter {
                sn: i, role: TxRole::OneHop, a,
                b: if i % 3 == 0 { a * 0.03 } else { 0.0 }, weight: if i % 7 == 0 { 2.0 } else { 1.0 },
            }).collect(),
            p_max_w: 0.2, t_eff_s: 4e-3, packet_bits: 5e3, bandwidth_hz: 1e8,
            csi_mode: CsiMode::Imperfect,
        };
        let baseline = problem.energy_norm(&vec![0.2; n]);
        let t0 = std::time::Instant::now();
        match spca_optimize_icsi(&problem, 1e-6, 50) {
            Ok((alloc, trace)) => {
                let last = trace.rows.last().unwrap();
                println!("n={n}: e {:.6e} (baseline {:.3e}, x{:.2}) iters={} kkt={:.2e} mono={} t_ul={:.4}ms/{:.1}ms in {:?}",
                    alloc.e_norm, baseline, baseline / alloc.e_norm, trace.rows.len(),
                    last.kkt_residual, trace.is_monotone(1e-9), alloc.t_ul_s * 1e3, problem.t_eff_s*1e3, t0.elapsed());
            }
            Err(e) => println!("n={n}: ERR {e}"),
        }
    }
}
