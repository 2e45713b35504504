//! Factory topology generation and wireless channel realizations.
//!
//! Large-scale gain per link combines a log-distance path loss with
//! log-normal shadowing; small-scale fading is Rician. The module also
//! models pilot-based MMSE channel estimation for the imperfect-CSI
//! regime.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{RngHub, StreamKind};
use crate::units::{db_to_lin, dbm_to_w, noise_power_w};

/// Distance floor to keep the log-distance law finite when a node lands
/// on top of the edge server.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Log-distance path loss coefficients, in dB.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PathLossCoeffs {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
    pub freq_term_db_per_decade: f64,
}

impl Default for PathLossCoeffs {
    fn default() -> Self {
        // Indoor-factory LOS parameterization; a stand-in where the
        // deployment's own measurements are unavailable.
        Self {
            intercept_db: 31.84,
            slope_db_per_decade: 21.5,
            freq_term_db_per_decade: 19.0,
        }
    }
}

/// Physical-layer and compute-model configuration.
///
/// dB-valued fields are converted once at the boundary; every derived
/// quantity downstream is in watts/hertz/seconds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SimConfig {
    pub area_side_m: f64,
    pub n_sns: usize,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub p_max_dbm: f64,
    pub t_th_s: f64,
    pub t_eff_s: f64,
    pub packet_bits: f64,
    pub kappa: f64,
    pub f_max_hz: f64,
    pub cycles_per_sample_range: [f64; 2],
    pub dataset_size_range: [usize; 2],
    pub shadowing_sigma_db: f64,
    pub rician_k_db: f64,
    pub pathloss_coeffs: PathLossCoeffs,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            area_side_m: 100.0,
            n_sns: 50,
            bandwidth_hz: 1e8,
            carrier_hz: 1e10,
            noise_psd_dbm_hz: -174.0,
            p_max_dbm: 23.0,
            t_th_s: 60.0,
            t_eff_s: 4e-3,
            packet_bits: 5e3,
            kappa: 1e-28,
            f_max_hz: 2e9,
            cycles_per_sample_range: [1e4, 2e4],
            dataset_size_range: [200, 400],
            shadowing_sigma_db: 7.0,
            rician_k_db: 10.0,
            pathloss_coeffs: PathLossCoeffs::default(),
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_side_m", self.area_side_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_hz", self.carrier_hz),
            ("t_th_s", self.t_th_s),
            ("t_eff_s", self.t_eff_s),
            ("packet_bits", self.packet_bits),
            ("kappa", self.kappa),
            ("f_max_hz", self.f_max_hz),
            ("shadowing_sigma_db", self.shadowing_sigma_db),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if self.n_sns == 0 {
            return Err(Error::Config("n_sns must be at least 1".into()));
        }
        if self.t_eff_s >= self.t_th_s {
            return Err(Error::Config(format!(
                "t_eff_s ({}) must be below t_th_s ({})",
                self.t_eff_s, self.t_th_s
            )));
        }
        if self.cycles_per_sample_range[0] > self.cycles_per_sample_range[1]
            || self.cycles_per_sample_range[0] <= 0.0
        {
            return Err(Error::Config("cycles_per_sample_range must be positive with min <= max".into()));
        }
        if self.dataset_size_range[0] > self.dataset_size_range[1] || self.dataset_size_range[0] == 0 {
            return Err(Error::Config("dataset_size_range must be positive with min <= max".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Noise power over the configured bandwidth, in watts.
    pub fn sigma0_w(&self) -> f64 {
        noise_power_w(self.noise_psd_dbm_hz, self.bandwidth_hz)
    }

    pub fn p_max_w(&self) -> f64 {
        dbm_to_w(self.p_max_dbm)
    }

    pub fn rician_k_linear(&self) -> f64 {
        db_to_lin(self.rician_k_db)
    }

    pub fn hub(&self) -> RngHub {
        RngHub::new(self.seed)
    }
}

/// Node placement: SN positions plus the edge-server position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub sn_positions: Vec<[f64; 2]>,
    pub es_position: [f64; 2],
}

impl Topology {
    pub fn n_sns(&self) -> usize {
        self.sn_positions.len()
    }

    pub fn dist_to_es(&self, n: usize) -> f64 {
        dist(self.sn_positions[n], self.es_position)
    }

    pub fn dist_between(&self, a: usize, b: usize) -> f64 {
        dist(self.sn_positions[a], self.sn_positions[b])
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Draws SN and ES positions uniformly over the factory area.
/// Deterministic for a fixed config seed (dedicated placement stream).
pub fn generate_topology(cfg: &SimConfig) -> Topology {
    generate_topology_trial(cfg, 0)
}

/// Same as [`generate_topology`] but on the placement substream of a
/// given trial, so Monte-Carlo experiments can redraw placements.
pub fn generate_topology_trial(cfg: &SimConfig, trial: u64) -> Topology {
    let mut rng = cfg.hub().stream(StreamKind::Placement, trial);
    let side = cfg.area_side_m;
    let draw = |rng: &mut rand_chacha::ChaCha12Rng| [rng.random::<f64>() * side, rng.random::<f64>() * side];
    let sn_positions = (0..cfg.n_sns).map(|_| draw(&mut rng)).collect();
    let es_position = draw(&mut rng);
    Topology { sn_positions, es_position }
}

/// Log-distance path loss in dB at distance `distance_m`.
///
/// Distances below [`MIN_DISTANCE_M`] are clamped. Monotone nondecreasing
/// in distance.
pub fn path_loss_db(distance_m: f64, cfg: &SimConfig) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    let f_ghz = cfg.carrier_hz / 1e9;
    let c = &cfg.pathloss_coeffs;
    c.intercept_db + c.slope_db_per_decade * d.log10() + c.freq_term_db_per_decade * f_ghz.log10()
}

/// One Rician small-scale draw scaled to large-scale power gain `beta`.
///
/// `rician_k` is the linear K-factor; the mean power split is
/// K/(K+1) line-of-sight and 1/(K+1) scattered, so E{|h|^2} = beta.
pub fn sample_channel<R: Rng + ?Sized>(beta: f64, rician_k: f64, rng: &mut R) -> Complex64 {
    debug_assert!(beta > 0.0 && rician_k >= 0.0);
    let los_amp = (rician_k / (rician_k + 1.0)).sqrt();
    let scatter_amp = (1.0 / (rician_k + 1.0)).sqrt();
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    let los = Complex64::from_polar(los_amp, phase);
    let g = complex_normal(rng);
    beta.sqrt() * (los + scatter_amp * g)
}

/// Standard circularly-symmetric complex Gaussian, unit power.
fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let n = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
    Complex64::new(n.sample(rng), n.sample(rng))
}

/// All pairwise channel gains of one realization.
///
/// `h_direct[n]` is SN n to the ES; `h_pair[src][dst]` is the SN-to-SN
/// link (diagonal unused). Large-scale gains `beta` are symmetric across
/// an SN pair; small-scale draws are independent per ordered link.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub h_direct: Vec<Complex64>,
    pub beta_direct: Vec<f64>,
    pub h_pair: Vec<Vec<Complex64>>,
    pub beta_pair: Vec<Vec<f64>>,
    pub realization_seed: u64,
}

impl ChannelSet {
    pub fn n_sns(&self) -> usize {
        self.h_direct.len()
    }

    pub fn gain_direct_sq(&self, n: usize) -> f64 {
        self.h_direct[n].norm_sqr()
    }

    pub fn gain_pair_sq(&self, src: usize, dst: usize) -> f64 {
        self.h_pair[src][dst].norm_sqr()
    }

    /// Writes one CSV row per ordered link for audit:
    /// `src,dst,beta,re_h,im_h,sigma_e`. The estimation-error column is
    /// zero unless a [`CsiModel`] is supplied.
    pub fn write_csv<W: Write>(&self, out: W, csi: Option<&CsiModel>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["src", "dst", "beta", "re_h", "im_h", "sigma_e"])?;
        let n = self.n_sns();
        for src in 0..n {
            let (h, se) = match csi {
                Some(c) => (c.h_hat_direct[src], c.sigma_e_direct[src]),
                None => (self.h_direct[src], 0.0),
            };
            w.write_record(&[
                src.to_string(),
                "es".to_string(),
                self.beta_direct[src].to_string(),
                h.re.to_string(),
                h.im.to_string(),
                se.to_string(),
            ])?;
        }
        for src in 0..n {
            for dst in 0..n {
                if src == dst {
                    continue;
                }
                let (h, se) = match csi {
                    Some(c) => (c.h_hat_pair[src][dst], c.sigma_e_pair[src][dst]),
                    None => (self.h_pair[src][dst], 0.0),
                };
                w.write_record(&[
                    src.to_string(),
                    dst.to_string(),
                    self.beta_pair[src][dst].to_string(),
                    h.re.to_string(),
                    h.im.to_string(),
                    se.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path, csi: Option<&CsiModel>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(f, csi)
    }
}

/// Generates the channel realization for a topology at a given trial.
///
/// Shadowing is drawn once per unordered SN pair (and once per direct
/// link), keeping the large-scale gain reciprocal; fading is independent
/// per ordered link.
pub fn generate_channels(cfg: &SimConfig, topo: &Topology, trial: u64) -> ChannelSet {
    let hub = cfg.hub();
    let mut shadow_rng = hub.stream(StreamKind::Shadowing, trial);
    let mut fade_rng = hub.stream(StreamKind::Fading, trial);
    let n = topo.n_sns();
    let k = cfg.rician_k_linear();
    let shadow = Normal::new(0.0, cfg.shadowing_sigma_db).unwrap();

    let mut beta_direct = Vec::with_capacity(n);
    for i in 0..n {
        let pl = path_loss_db(topo.dist_to_es(i), cfg) + shadow.sample(&mut shadow_rng);
        beta_direct.push(db_to_lin(-pl));
    }
    let mut beta_pair = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let pl = path_loss_db(topo.dist_between(i, j), cfg) + shadow.sample(&mut shadow_rng);
            let b = db_to_lin(-pl);
            beta_pair[i][j] = b;
            beta_pair[j][i] = b;
        }
    }

    let h_direct = beta_direct.iter().map(|&b| sample_channel(b, k, &mut fade_rng)).collect();
    let mut h_pair = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                h_pair[i][j] = sample_channel(beta_pair[i][j], k, &mut fade_rng);
            }
        }
    }

    ChannelSet { h_direct, beta_direct, h_pair, beta_pair, realization_seed: cfg.seed ^ trial }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    Perfect,
    Imperfect,
}

/// Channel knowledge available to the scheduler.
///
/// In perfect mode the estimates equal the realization and all error
/// variances are zero. In imperfect mode each link carries an MMSE
/// estimate and its error variance, plus the pilot time taken out of the
/// uplink slot.
#[derive(Debug, Clone)]
pub struct CsiModel {
    pub mode: CsiMode,
    pub pilot_len: u32,
    pub pilot_snr: f64,
    pub h_hat_direct: Vec<Complex64>,
    pub sigma_e_direct: Vec<f64>,
    pub h_hat_pair: Vec<Vec<Complex64>>,
    pub sigma_e_pair: Vec<Vec<f64>>,
    /// Pilot overhead subtracted from the uplink slot, in seconds.
    pub t_overhead_s: f64,
}

impl CsiModel {
    /// Perfect-CSI view of a realization.
    pub fn perfect(ch: &ChannelSet) -> Self {
        let n = ch.n_sns();
        Self {
            mode: CsiMode::Perfect,
            pilot_len: 0,
            pilot_snr: 0.0,
            h_hat_direct: ch.h_direct.clone(),
            sigma_e_direct: vec![0.0; n],
            h_hat_pair: ch.h_pair.clone(),
            sigma_e_pair: vec![vec![0.0; n]; n],
            t_overhead_s: 0.0,
        }
    }
}

/// MMSE estimation error variance for a link with large-scale gain
/// `beta`, `pilot_len` pilot symbols at per-symbol SNR `pilot_snr`.
pub fn mmse_error_variance(beta: f64, pilot_len: u32, pilot_snr: f64) -> f64 {
    beta / (1.0 + pilot_len as f64 * pilot_snr * beta)
}

/// Effective SNR when transmitting at power `p` over an estimated
/// channel: estimation error acts as self-interference.
pub fn effective_snr_icsi(p: f64, h_hat_sq: f64, sigma_e: f64, sigma0: f64) -> f64 {
    p * h_hat_sq / (p * sigma_e + sigma0)
}

/// Linear-MMSE estimate of one link given the true draw `h`, its
/// large-scale gain `beta`, and an independent unit CN pilot-noise draw.
///
/// The construction keeps E{|h_hat|^2} = beta - sigma_e and the estimate
/// orthogonal to the error for any fading law with E{|h|^2} = beta.
fn mmse_estimate(h: Complex64, beta: f64, rho: f64, noise: Complex64) -> (Complex64, f64) {
    if rho == 0.0 {
        return (Complex64::new(0.0, 0.0), beta);
    }
    let denom = 1.0 + rho * beta;
    let h_hat = (rho * beta * h + rho.sqrt() * beta * noise) / denom;
    (h_hat, beta / denom)
}

/// Runs pilot-based MMSE estimation over every link of a realization.
///
/// `slot_s` is the uplink slot the pilots are carved out of; estimation
/// is infeasible when N * L_p / W meets or exceeds it.
pub fn estimate_channels(
    cfg: &SimConfig,
    ch: &ChannelSet,
    pilot_len: u32,
    pilot_snr: f64,
    slot_s: f64,
    trial: u64,
) -> Result<CsiModel> {
    if pilot_len == 0 {
        return Err(Error::Config("imperfect CSI needs pilot_len >= 1".into()));
    }
    let n = ch.n_sns();
    let symbol_s = 1.0 / cfg.bandwidth_hz;
    let t_overhead_s = n as f64 * pilot_len as f64 * symbol_s;
    if t_overhead_s >= slot_s {
        return Err(Error::InfeasiblePilot { n_sns: n, pilot_len, needed_s: t_overhead_s, slot_s });
    }

    let mut rng = cfg.hub().stream(StreamKind::Estimation, trial);
    let rho = pilot_len as f64 * pilot_snr;

    let mut h_hat_direct = Vec::with_capacity(n);
    let mut sigma_e_direct = Vec::with_capacity(n);
    for i in 0..n {
        let (h_hat, se) = mmse_estimate(ch.h_direct[i], ch.beta_direct[i], rho, complex_normal(&mut rng));
        h_hat_direct.push(h_hat);
        sigma_e_direct.push(se);
    }
    let mut h_hat_pair = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut sigma_e_pair = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (h_hat, se) =
                mmse_estimate(ch.h_pair[i][j], ch.beta_pair[i][j], rho, complex_normal(&mut rng));
            h_hat_pair[i][j] = h_hat;
            sigma_e_pair[i][j] = se;
        }
    }

    Ok(CsiModel {
        mode: CsiMode::Imperfect,
        pilot_len,
        pilot_snr,
        h_hat_direct,
        sigma_e_direct,
        h_hat_pair,
        sigma_e_pair,
        t_overhead_s,
    })
}
