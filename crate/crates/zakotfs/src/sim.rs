//! Deterministic Monte-Carlo harness: BER vs SNR (perfect and estimated CSI),
//! channel-estimation NMSE vs SNR, and per-filter energy-concentration (ESD)
//! reports.
//!
//! Determinism contract: every trial draws from its own stream, seeded by a
//! SplitMix64 hash of `(master_seed, snr_index, trial_index)`; trial results
//! are collected into a trial-indexed vector and reduced sequentially, so the
//! output is byte-identical for any degree of parallelism. Within a trial the
//! draw order is fixed (channel, data bits, data noise, pilot noise), so every
//! filter sees the same randomness at the same config — curves differ only
//! through the filter.

use crate::channel::{build_h_from_taps, draw_veh_a, TapEngine};
use crate::ddcore::LatticeArray;
use crate::filters::{
    esd_report, gaussian_filter, gaussian_sinc_filter, iota_gaussian_filter,
    iota_pswf_filter, rrc_filter, sinc_filter, EsdReport, Filter, FilterFamily,
};
use crate::grid::DDGrid;
use crate::txrx::{
    default_pilot_location, default_region, estimate_channel, make_pilot_frame,
    mmse_detect, qam_demap, qam_map, transmit, Constellation, EstimationRegion,
    NoiseModel,
};
use crate::ZakError;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Paper-default construction parameters for each family, keyed by the CSV /
/// CLI label (`sinc`, `rrc`, `gauss`, `gauss-sinc`, `iota-gauss`,
/// `iota-pswf`).
pub fn family_by_name(name: &str) -> Option<FilterFamily> {
    match name {
        "sinc" => Some(FilterFamily::Sinc),
        "rrc" => Some(FilterFamily::RootRaisedCosine { beta_tau: 0.6, beta_nu: 0.6 }),
        "gauss" => Some(FilterFamily::Gaussian { alpha_tau: 1.584, alpha_nu: 1.584 }),
        "gauss-sinc" => Some(FilterFamily::GaussianSinc {
            alpha_tau: 0.044,
            alpha_nu: 0.044,
            omega_tau: 1.0278,
            omega_nu: 1.0278,
        }),
        "iota-gauss" => Some(FilterFamily::IotaGaussian),
        "iota-pswf" => Some(FilterFamily::IotaPswf { quadrature_order: 1024 }),
        _ => None,
    }
}

/// The six default families in the fixed reporting order.
pub fn default_families() -> Vec<FilterFamily> {
    ["sinc", "rrc", "gauss", "gauss-sinc", "iota-gauss", "iota-pswf"]
        .iter()
        .map(|n| family_by_name(n).unwrap())
        .collect()
}

/// Builds the filter for a family tag on the given grid.
pub fn build_filter(grid: DDGrid, family: FilterFamily) -> Result<Filter, ZakError> {
    match family {
        FilterFamily::Sinc => sinc_filter(grid),
        FilterFamily::RootRaisedCosine { beta_tau, beta_nu } => {
            rrc_filter(grid, beta_tau, beta_nu)
        }
        FilterFamily::Gaussian { alpha_tau, alpha_nu } => {
            gaussian_filter(grid, alpha_tau, alpha_nu)
        }
        FilterFamily::GaussianSinc { alpha_tau, alpha_nu, omega_tau, omega_nu } => {
            gaussian_sinc_filter(grid, alpha_tau, alpha_nu, omega_tau, omega_nu)
        }
        FilterFamily::IotaGaussian => iota_gaussian_filter(grid),
        FilterFamily::IotaPswf { quadrature_order } => {
            iota_pswf_filter(grid, quadrature_order).map(|(f, _)| f)
        }
    }
}

/// CSI available to the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    Perfect,
    Estimated,
}

impl CsiMode {
    pub fn label(self) -> &'static str {
        match self {
            CsiMode::Perfect => "perfect",
            CsiMode::Estimated => "estimated",
        }
    }
}

/// Channel model per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    /// Veh-A scattering draw per frame (the default).
    VehA,
    /// Identity effective channel (AWGN test hook; no channel draw).
    Identity,
}

/// Monte-Carlo configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: DDGrid,
    pub family: FilterFamily,
    /// Maximum Doppler shift [Hz] of the Veh-A draw.
    pub nu_max: f64,
    /// Strictly increasing data-SNR ladder [dB].
    pub snr_db: Vec<f64>,
    pub frames_per_point: usize,
    pub csi_mode: CsiMode,
    pub channel: ChannelModel,
    pub master_seed: u64,
    pub constellation: Constellation,
    /// Pilot SNR minus data SNR [dB] (0 couples them, per the figure
    /// captions).
    pub pilot_offset_db: f64,
    /// Estimation region; `None` selects [`default_region`] for the grid.
    pub region: Option<EstimationRegion>,
}

impl SimConfig {
    /// Default configuration for a family on a grid: Veh-A at 815 Hz, 4-QAM,
    /// 2000 frames per point, perfect CSI over 0..16 dB step 2.
    pub fn new(grid: DDGrid, family: FilterFamily) -> Self {
        Self {
            grid,
            family,
            nu_max: 815.0,
            snr_db: (0..=8).map(|i| 2.0 * i as f64).collect(),
            frames_per_point: 2000,
            csi_mode: CsiMode::Perfect,
            channel: ChannelModel::VehA,
            master_seed: 0,
            constellation: Constellation::Qam4,
            pilot_offset_db: 0.0,
            region: None,
        }
    }

    /// Estimated-CSI ladder default: 0..35 dB step 5.
    pub fn estimated(mut self) -> Self {
        self.csi_mode = CsiMode::Estimated;
        self.snr_db = (0..=7).map(|i| 5.0 * i as f64).collect();
        self
    }

    pub fn validate(&self) -> Result<(), ZakError> {
        if self.frames_per_point == 0 {
            return Err(ZakError::InvalidArgument("frames_per_point must be >= 1".into()));
        }
        if self.snr_db.is_empty() || self.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ZakError::InvalidArgument(
                "SNR ladder must be non-empty and strictly increasing".into(),
            ));
        }
        if !(self.nu_max > 0.0) || self.nu_max >= self.grid.nu_p / 2.0 {
            return Err(ZakError::InvalidArgument(format!(
                "nu_max must lie in (0, nu_p / 2) (got {})",
                self.nu_max
            )));
        }
        Ok(())
    }

    fn effective_region(&self) -> EstimationRegion {
        self.region.unwrap_or_else(|| default_region(self.grid))
    }
}

/// One SNR point of a BER / NMSE curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub frames: usize,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// 95% binomial confidence half-width of `ber`.
    pub ber_ci95: f64,
    /// Estimation NMSE `sum ||h_hat - h||^2 / sum ||h||^2` over the full
    /// lattice (0 in perfect-CSI mode).
    pub nmse: f64,
    /// Standard error of the per-frame NMSE ratio (0 in perfect-CSI mode).
    pub nmse_std: f64,
    pub wall_ms: f64,
}

/// Writes curve points as CSV:
/// `filter,csi_mode,snr_db,frames,bit_errors,ber,ber_ci95,nmse,nmse_std,wall_ms`.
pub fn write_points_csv<W: std::io::Write>(
    out: &mut W,
    filter_label: &str,
    csi_mode: CsiMode,
    points: &[CurvePoint],
    header: bool,
) -> Result<(), ZakError> {
    if header {
        writeln!(
            out,
            "filter,csi_mode,snr_db,frames,bit_errors,ber,ber_ci95,nmse,nmse_std,wall_ms"
        )?;
    }
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:.1}",
            filter_label,
            csi_mode.label(),
            p.snr_db,
            p.frames,
            p.bit_errors,
            p.ber,
            p.ber_ci95,
            p.nmse,
            p.nmse_std,
            p.wall_ms
        )?;
    }
    Ok(())
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial stream seed: a SplitMix64 chain over
/// `(master_seed, snr_index, trial_index)`.
pub fn trial_seed(master_seed: u64, snr_index: usize, trial_index: usize) -> u64 {
    splitmix64(
        splitmix64(splitmix64(master_seed).wrapping_add(snr_index as u64))
            .wrapping_add(trial_index as u64),
    )
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    bit_errors: u64,
    bits: u64,
    nmse_num: f64,
    nmse_den: f64,
}

fn run_trial(
    cfg: &SimConfig,
    engine: &TapEngine,
    snr_index: usize,
    trial_index: usize,
    snr_db: f64,
) -> Result<TrialOutcome, ZakError> {
    let g = cfg.grid;
    let seed = trial_seed(cfg.master_seed, snr_index, trial_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let h = match cfg.channel {
        ChannelModel::VehA => {
            let phys = draw_veh_a(&mut rng, cfg.nu_max, g)?;
            engine.taps(&phys)?
        }
        ChannelModel::Identity => {
            let mut taps = LatticeArray::zeros(g);
            *taps.at_mut(0, 0) = Complex64::new(1.0, 0.0);
            taps
        }
    };
    let hm = build_h_from_taps(&h);

    let bps = cfg.constellation.bits_per_symbol();
    let bits: Vec<u8> = (0..g.mn() * bps).map(|_| rng.gen_range(0..2u8)).collect();
    let frame = qam_map(g, &bits, cfg.constellation)?;
    let sigma2 = 10f64.powf(-snr_db / 10.0);
    let noise = NoiseModel::white(sigma2)?;
    let y = transmit(&hm, &frame, &noise, &mut rng)?;

    let (x_hat, nmse_num, nmse_den) = match cfg.csi_mode {
        CsiMode::Perfect => (mmse_detect(&hm, &y, sigma2)?, 0.0, 0.0),
        CsiMode::Estimated => {
            let pilot_snr_db = snr_db + cfg.pilot_offset_db;
            let sigma2_p = 10f64.powf(-pilot_snr_db / 10.0);
            let ploc = default_pilot_location(g);
            let pilot = make_pilot_frame(g, ploc)?;
            let yp = transmit(&hm, &pilot, &NoiseModel::white(sigma2_p)?, &mut rng)?;
            let est = estimate_channel(g, &yp, ploc, cfg.effective_region(), pilot_snr_db)?;
            let mut num = 0.0;
            let mut den = 0.0;
            for (a, b) in est.taps_hat.taps.iter().zip(&h.taps) {
                num += (a - b).norm_sqr();
                den += b.norm_sqr();
            }
            let hd = build_h_from_taps(&est.taps_hat);
            (mmse_detect(&hd, &y, sigma2)?, num, den)
        }
    };

    let decided = qam_demap(&x_hat, cfg.constellation);
    let bit_errors =
        bits.iter().zip(&decided).filter(|(a, b)| a != b).count() as u64;
    Ok(TrialOutcome { bit_errors, bits: bits.len() as u64, nmse_num, nmse_den })
}

fn run_point(
    cfg: &SimConfig,
    engine: &TapEngine,
    snr_index: usize,
    snr_db: f64,
) -> Result<CurvePoint, ZakError> {
    let start = std::time::Instant::now();
    let outcomes: Vec<TrialOutcome> = (0..cfg.frames_per_point)
        .into_par_iter()
        .map(|t| {
            run_trial(cfg, engine, snr_index, t, snr_db).map_err(|e| {
                ZakError::Conditioning(format!(
                    "trial {t} at {snr_db} dB (seed {}): {e}",
                    trial_seed(cfg.master_seed, snr_index, t)
                ))
            })
        })
        .collect::<Result<_, _>>()?;

    // sequential, order-fixed reduction
    let mut bit_errors = 0u64;
    let mut bits = 0u64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut ratio_sum = 0.0;
    let mut ratio_sq = 0.0;
    for o in &outcomes {
        bit_errors += o.bit_errors;
        bits += o.bits;
        num += o.nmse_num;
        den += o.nmse_den;
        if o.nmse_den > 0.0 {
            let r = o.nmse_num / o.nmse_den;
            ratio_sum += r;
            ratio_sq += r * r;
        }
    }
    let frames = cfg.frames_per_point;
    let ber = bit_errors as f64 / bits as f64;
    let ber_ci95 = 1.96 * (ber * (1.0 - ber) / bits as f64).sqrt();
    let (nmse, nmse_std) = if cfg.csi_mode == CsiMode::Estimated && den > 0.0 {
        let mean = ratio_sum / frames as f64;
        let var = (ratio_sq / frames as f64 - mean * mean).max(0.0);
        (num / den, (var / frames as f64).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(CurvePoint {
        snr_db,
        frames,
        bits,
        bit_errors,
        ber,
        ber_ci95,
        nmse,
        nmse_std,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn run_curve(cfg: &SimConfig) -> Result<Vec<CurvePoint>, ZakError> {
    cfg.validate()?;
    if cfg.csi_mode == CsiMode::Estimated {
        // surface a bad region before burning Monte-Carlo time
        let probe = vec![Complex64::new(0.0, 0.0); cfg.grid.mn()];
        estimate_channel(
            cfg.grid,
            &probe,
            default_pilot_location(cfg.grid),
            cfg.effective_region(),
            0.0,
        )?;
    }
    let w = build_filter(cfg.grid, cfg.family)?;
    let engine = TapEngine::new(&w)?;
    cfg.snr_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| run_point(cfg, &engine, i, snr))
        .collect()
}

/// BER curve over the configured SNR ladder (either CSI mode).
pub fn run_ber(cfg: &SimConfig) -> Result<Vec<CurvePoint>, ZakError> {
    run_curve(cfg)
}

/// NMSE curve over the configured SNR ladder; requires estimated CSI.
pub fn run_nmse(cfg: &SimConfig) -> Result<Vec<CurvePoint>, ZakError> {
    if cfg.csi_mode != CsiMode::Estimated {
        return Err(ZakError::InvalidArgument(
            "run_nmse requires csi_mode = estimated".into(),
        ));
    }
    run_curve(cfg)
}

/// Builds every default filter family on the grid and reports its energy
/// concentration; returns `(label, report)` pairs in the fixed family order.
pub fn run_esd(grid: DDGrid) -> Result<Vec<(String, EsdReport)>, ZakError> {
    default_families()
        .into_iter()
        .map(|fam| {
            let w = build_filter(grid, fam)?;
            Ok((w.family.label().to_string(), esd_report(&w)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::collections::HashSet;

    fn small_grid() -> DDGrid {
        make_grid(3, 5, 30e3, 2).unwrap()
    }

    fn small_cfg() -> SimConfig {
        let g = small_grid();
        let mut cfg = SimConfig::new(g, FilterFamily::Sinc);
        cfg.snr_db = vec![4.0, 10.0];
        cfg.frames_per_point = 50;
        cfg.region = Some(EstimationRegion::new(-1, 1, -2, 2));
        cfg
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg();
        cfg.frames_per_point = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.snr_db = vec![4.0, 4.0];
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.nu_max = 20e3; // >= nu_p / 2
        assert!(cfg.validate().is_err());
        assert!(small_cfg().validate().is_ok());
    }

    #[test]
    fn trial_seeds_do_not_collide() {
        let cfg = small_cfg();
        let mut seen = HashSet::new();
        for p in 0..cfg.snr_db.len() {
            for t in 0..cfg.frames_per_point {
                assert!(seen.insert(trial_seed(cfg.master_seed, p, t)));
            }
        }
    }

    #[test]
    fn runs_are_deterministic_across_thread_counts() {
        let mut cfg = small_cfg();
        cfg.csi_mode = CsiMode::Estimated;
        let run_with = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ber(&cfg).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            // bit-identical apart from wall time
            assert_eq!(p.bit_errors, q.bit_errors);
            assert_eq!(p.bits, q.bits);
            assert_eq!(p.ber.to_bits(), q.ber.to_bits());
            assert_eq!(p.nmse.to_bits(), q.nmse.to_bits());
            assert_eq!(p.nmse_std.to_bits(), q.nmse_std.to_bits());
        }
    }

    #[test]
    fn identity_channel_awgn_ber_matches_analytic() {
        // 4-QAM over AWGN: per-bit error rate Q(sqrt(SNR)).
        let mut cfg = small_cfg();
        cfg.channel = ChannelModel::Identity;
        cfg.snr_db = vec![4.0];
        cfg.frames_per_point = 3500; // >= 1e5 bits at MN = 15
        let p = &run_ber(&cfg).unwrap()[0];
        let snr = 10f64.powf(0.4);
        let analytic = 0.5 * libm::erfc((snr.sqrt()) / std::f64::consts::SQRT_2);
        let sigma = (analytic * (1.0 - analytic) / p.bits as f64).sqrt();
        assert!(
            (p.ber - analytic).abs() < 3.0 * sigma,
            "ber {} vs analytic {analytic} (3 sigma {})",
            p.ber,
            3.0 * sigma
        );
    }

    #[test]
    fn perfect_csi_ber_is_monotone_on_the_ladder() {
        let mut cfg = small_cfg();
        cfg.snr_db = vec![0.0, 6.0, 12.0];
        cfg.frames_per_point = 300;
        let pts = run_ber(&cfg).unwrap();
        for w in pts.windows(2) {
            assert!(
                w[1].ber <= w[0].ber + w[0].ber_ci95 + w[1].ber_ci95,
                "BER rose: {} -> {}",
                w[0].ber,
                w[1].ber
            );
        }
    }

    #[test]
    fn estimated_mode_nmse_vanishes_without_noise() {
        let mut cfg = small_cfg();
        cfg.csi_mode = CsiMode::Estimated;
        cfg.snr_db = vec![300.0]; // sigma2 = 1e-30: effectively noiseless
        cfg.frames_per_point = 20;
        let p = &run_nmse(&cfg).unwrap()[0];
        assert!(p.nmse <= 1e-20, "nmse {}", p.nmse);
        assert_eq!(p.bit_errors, 0);
    }

    #[test]
    fn run_nmse_rejects_perfect_mode() {
        let cfg = small_cfg();
        assert!(run_nmse(&cfg).is_err());
    }

    #[test]
    fn estimated_csi_nmse_decreases_with_snr() {
        let mut cfg = small_cfg();
        cfg.csi_mode = CsiMode::Estimated;
        cfg.snr_db = vec![0.0, 10.0, 20.0];
        cfg.frames_per_point = 200;
        let pts = run_nmse(&cfg).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].nmse < w[0].nmse);
        }
    }

    #[test]
    fn csv_round_trip_shape() {
        let cfg = small_cfg();
        let pts = run_ber(&cfg).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&mut buf, "sinc", cfg.csi_mode, &pts, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), pts.len() + 1);
        assert!(lines[0].starts_with("filter,csi_mode,snr_db"));
        assert!(lines[1].starts_with("sinc,perfect,4,"));
        assert_eq!(lines[1].split(',').count(), 10);
    }

    #[test]
    fn esd_reports_for_all_defaults() {
        // Small grid: a smoke test of the construction path; the tight
        // concentration gates live with the full-size grid checks.
        let g = small_grid();
        let reports = run_esd(g).unwrap();
        let labels: Vec<&str> = reports.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(
            labels,
            ["sinc", "rrc", "gauss", "gauss-sinc", "iota-gauss", "iota-pswf"]
        );
        for (label, r) in &reports {
            assert!(r.in_band_full > 0.9, "{label}: {}", r.in_band_full);
            assert!(r.in_time_full > 0.9, "{label}: {}", r.in_time_full);
        }
    }
}
