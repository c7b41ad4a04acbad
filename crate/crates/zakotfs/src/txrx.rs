//! Transceiver chain: QAM symbol mapping, the vectorized link `y = H x + n`,
//! MMSE detection, and pilot-frame channel estimation.
//!
//! Frames are vectorized as `x[k + l * M] = X[k, l]`. Noise is white circular
//! complex Gaussian per lattice sample, which is the exact statistic for
//! lattice-orthogonal filters (the matched-filter Gram is the identity there).

use crate::channel::IOMatrix;
use crate::ddcore::LatticeArray;
use crate::grid::DDGrid;
use crate::linalg::{solve_hpd, zgemm};
use crate::{cis_turns, ZakError};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Symbol constellation; both are Gray-mapped with unit average energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    Qam4,
    Qam16,
}

impl Constellation {
    /// Bits carried per symbol.
    #[inline]
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qam4 => 2,
            Constellation::Qam16 => 4,
        }
    }

    /// Short stable name used in CSV output and CLI arguments.
    pub fn label(self) -> &'static str {
        match self {
            Constellation::Qam4 => "qam4",
            Constellation::Qam16 => "qam16",
        }
    }
}

/// Per-axis Gray-coded amplitude for two bits: `00 -> -3, 01 -> -1,
/// 11 -> +1, 10 -> +3` (in units of the 16-QAM level spacing / 2).
#[inline]
fn gray2_level(b0: u8, b1: u8) -> f64 {
    match (b0, b1) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

#[inline]
fn gray2_slice(x: f64) -> [u8; 2] {
    // Min-distance per-axis decision for the Gray levels of [`gray2_level`].
    if x < -2.0 {
        [0, 0]
    } else if x < 0.0 {
        [0, 1]
    } else if x < 2.0 {
        [1, 1]
    } else {
        [1, 0]
    }
}

/// One `M x N` frame of information symbols with its source bits.
#[derive(Debug, Clone)]
pub struct Frame {
    pub grid: DDGrid,
    pub constellation: Constellation,
    /// Vectorized symbols, `x[k + l * M]`.
    pub x: Vec<Complex64>,
    /// Source bits (one `u8` in `{0, 1}` per bit).
    pub bits: Vec<u8>,
}

/// Gray-maps `bits` onto a unit-average-energy frame.
///
/// 4-QAM: `((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`. 16-QAM: independent
/// Gray-coded 4-level axes scaled by `1 / sqrt(10)`.
pub fn qam_map(
    grid: DDGrid,
    bits: &[u8],
    constellation: Constellation,
) -> Result<Frame, ZakError> {
    let bps = constellation.bits_per_symbol();
    if bits.len() != grid.mn() * bps {
        return Err(ZakError::DimensionMismatch(format!(
            "expected {} bits for an {} x {} frame, got {}",
            grid.mn() * bps,
            grid.m,
            grid.n,
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(ZakError::InvalidArgument(format!("bit value {b} not in {{0, 1}}")));
    }
    let x = bits
        .chunks_exact(bps)
        .map(|c| match constellation {
            Constellation::Qam4 => Complex64::new(
                (1.0 - 2.0 * c[0] as f64) / std::f64::consts::SQRT_2,
                (1.0 - 2.0 * c[1] as f64) / std::f64::consts::SQRT_2,
            ),
            Constellation::Qam16 => {
                let s = 10.0f64.sqrt();
                Complex64::new(gray2_level(c[0], c[1]) / s, gray2_level(c[2], c[3]) / s)
            }
        })
        .collect();
    Ok(Frame { grid, constellation, x, bits: bits.to_vec() })
}

/// Minimum-distance hard demapping of detected symbols back to bits.
pub fn qam_demap(x_hat: &[Complex64], constellation: Constellation) -> Vec<u8> {
    let mut bits = Vec::with_capacity(x_hat.len() * constellation.bits_per_symbol());
    for v in x_hat {
        match constellation {
            Constellation::Qam4 => {
                bits.push(u8::from(v.re < 0.0));
                bits.push(u8::from(v.im < 0.0));
            }
            Constellation::Qam16 => {
                let s = 10.0f64.sqrt();
                bits.extend_from_slice(&gray2_slice(v.re * s));
                bits.extend_from_slice(&gray2_slice(v.im * s));
            }
        }
    }
    bits
}

/// White circular complex Gaussian noise, `CN(0, sigma2)` per sample.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    pub variance: f64,
}

impl NoiseModel {
    pub fn white(variance: f64) -> Result<Self, ZakError> {
        if !(variance >= 0.0) {
            return Err(ZakError::InvalidArgument(format!(
                "noise variance must be nonnegative, got {variance}"
            )));
        }
        Ok(Self { variance })
    }

    /// Draws `n` noise samples.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Complex64> {
        let s = (self.variance / 2.0).sqrt();
        (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            })
            .collect()
    }
}

/// The vectorized link: `y = H x + n`.
pub fn transmit<R: Rng + ?Sized>(
    hm: &IOMatrix,
    frame: &Frame,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<Complex64>, ZakError> {
    if frame.grid != hm.grid {
        return Err(ZakError::GridMismatch("frame grid differs from H grid".into()));
    }
    let mut y = hm.apply(&frame.x)?;
    if noise.variance > 0.0 {
        let n = noise.draw(rng, y.len());
        for (yy, nn) in y.iter_mut().zip(n) {
            *yy += nn;
        }
    }
    Ok(y)
}

/// MMSE detection `x_hat = (H^H H + sigma2 I)^{-1} H^H y` (the normal-equation
/// form of `H^H (H H^H + sigma2 I)^{-1} y`), returned in the frame
/// vectorization.
///
/// At `sigma2 = 0` this is the zero-forcing solution; a numerically singular
/// system is reported as [`ZakError::Conditioning`], never regularized
/// silently.
pub fn mmse_detect(
    hm: &IOMatrix,
    y: &[Complex64],
    sigma2: f64,
) -> Result<Vec<Complex64>, ZakError> {
    let n = hm.order();
    if y.len() != n {
        return Err(ZakError::DimensionMismatch(format!(
            "y has length {}, H has order {n}",
            y.len()
        )));
    }
    if !(sigma2 >= 0.0) {
        return Err(ZakError::InvalidArgument(format!(
            "sigma2 must be nonnegative, got {sigma2}"
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    // A = H^H H + sigma2 I
    let mut a = vec![zero; n * n];
    zgemm(b'C', b'N', n, n, n, one, &hm.h, n, &hm.h, n, zero, &mut a, n);
    for d in 0..n {
        a[d + d * n] += Complex64::new(sigma2, 0.0);
    }
    // b = H^H y
    let mut b = vec![zero; n];
    zgemm(b'C', b'N', n, 1, n, one, &hm.h, n, y, n, zero, &mut b, n);
    solve_hpd(&a, n, &b, 1).map_err(|e| {
        ZakError::Conditioning(format!(
            "MMSE system singular (sigma2 = {sigma2}): {e:?}"
        ))
    })
}

/// A pilot frame: a unit-energy lattice delta at `pilot_location`.
pub fn make_pilot_frame(
    grid: DDGrid,
    pilot_location: (usize, usize),
) -> Result<Frame, ZakError> {
    let (kp, lp) = pilot_location;
    if kp >= grid.m || lp >= grid.n {
        return Err(ZakError::InvalidArgument(format!(
            "pilot location ({kp}, {lp}) outside the {} x {} lattice",
            grid.m, grid.n
        )));
    }
    let mut x = vec![Complex64::new(0.0, 0.0); grid.mn()];
    x[kp + lp * grid.m] = Complex64::new(1.0, 0.0);
    Ok(Frame { grid, constellation: Constellation::Qam4, x, bits: Vec::new() })
}

/// Default pilot location `(ceil(M/2), ceil(N/2))`.
#[inline]
pub fn default_pilot_location(grid: DDGrid) -> (usize, usize) {
    (grid.m.div_ceil(2), grid.n.div_ceil(2))
}

/// Rectangular estimation region of delay/Doppler offsets around the pilot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimationRegion {
    pub dk_min: i64,
    pub dk_max: i64,
    pub dl_min: i64,
    pub dl_max: i64,
}

impl EstimationRegion {
    pub fn new(dk_min: i64, dk_max: i64, dl_min: i64, dl_max: i64) -> Self {
        Self { dk_min, dk_max, dl_min, dl_max }
    }

    /// Number of taps in the region.
    #[inline]
    pub fn len(&self) -> usize {
        ((self.dk_max - self.dk_min + 1) * (self.dl_max - self.dl_min + 1)) as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.dk_max < self.dk_min || self.dl_max < self.dl_min
    }

    fn validate(&self, grid: DDGrid) -> Result<(), ZakError> {
        if self.is_empty() {
            return Err(ZakError::InvalidArgument("empty estimation region".into()));
        }
        if self.dk_max - self.dk_min + 1 > grid.m as i64
            || self.dl_max - self.dl_min + 1 > grid.n as i64
        {
            return Err(ZakError::InvalidArgument(format!(
                "estimation region {self:?} exceeds one period of the {} x {} lattice",
                grid.m, grid.n
            )));
        }
        Ok(())
    }

    /// Iterates the `(dk, dl)` offsets of the region.
    pub fn offsets(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let r = *self;
        (r.dk_min..=r.dk_max).flat_map(move |dk| (r.dl_min..=r.dl_max).map(move |dl| (dk, dl)))
    }

    /// Stored lattice indices `(dk mod M, dl mod N)` covered by the region.
    pub fn stored_indices(&self, grid: DDGrid) -> Vec<(usize, usize)> {
        self.offsets()
            .map(|(dk, dl)| {
                (
                    dk.rem_euclid(grid.m as i64) as usize,
                    dl.rem_euclid(grid.n as i64) as usize,
                )
            })
            .collect()
    }
}

/// Default estimation region: delay offsets covering the Veh-A spread
/// (`ceil(B * 2.51 us) + 2` taps) plus two negative-offset rows for the
/// filter's left tail, Doppler offsets `[-2, 2]`.
pub fn default_region(grid: DDGrid) -> EstimationRegion {
    let k_max = (grid.b * 2.51e-6).ceil() as i64 + 2;
    EstimationRegion::new(-2, k_max, -2, 2)
}

/// Pilot-frame channel estimate.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// Estimated taps on the stored lattice; exactly zero outside the region.
    pub taps_hat: LatticeArray,
    pub region: EstimationRegion,
    pub pilot_location: (usize, usize),
    pub pilot_snr_db: f64,
}

/// Estimates the effective-channel taps from a received pilot frame by
/// cross-ambiguity with the pilot delta: phase-corrected reads of `y` at the
/// region offsets around the pilot.
///
/// For offset `(dk, dl)` the read is
/// `h_hat[dk mod M, dl mod N] = y[(kp+dk) mod M + ((lp+dl) mod N) M] * conj(ph)`
/// with `ph = e^{j 2 pi n lp / N} e^{j 2 pi (kp + n M)(dl mod N) / (M N)}`
/// and `n = -1` for `dk < 0`, else `0` — the quasi-periodic wrap phase of the
/// vectorized link for taps stored at negatively-offset rows.
pub fn estimate_channel(
    grid: DDGrid,
    y_pilot: &[Complex64],
    pilot_location: (usize, usize),
    region: EstimationRegion,
    pilot_snr_db: f64,
) -> Result<ChannelEstimate, ZakError> {
    if y_pilot.len() != grid.mn() {
        return Err(ZakError::DimensionMismatch(format!(
            "pilot vector has length {}, expected {}",
            y_pilot.len(),
            grid.mn()
        )));
    }
    let (kp, lp) = pilot_location;
    if kp >= grid.m || lp >= grid.n {
        return Err(ZakError::InvalidArgument(format!(
            "pilot location ({kp}, {lp}) outside the {} x {} lattice",
            grid.m, grid.n
        )));
    }
    region.validate(grid)?;
    let (m, n) = (grid.m as i64, grid.n as i64);
    let mn = grid.mn() as f64;
    let mut taps_hat = LatticeArray::zeros(grid);
    for (dk, dl) in region.offsets() {
        let nfl = if dk < 0 { -1i64 } else { 0 };
        let krow = (kp as i64 + dk).rem_euclid(m) as usize;
        let lrow = (lp as i64 + dl).rem_euclid(n) as usize;
        let dlm = dl.rem_euclid(n);
        let ph = cis_turns(nfl as f64 * lp as f64 / n as f64)
            * cis_turns((kp as i64 + nfl * m) as f64 * dlm as f64 / mn);
        *taps_hat.at_mut(dk.rem_euclid(m) as usize, dlm as usize) =
            y_pilot[krow + lrow * grid.m] * ph.conj();
    }
    Ok(ChannelEstimate { taps_hat, region, pilot_location, pilot_snr_db })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        build_h_from_taps, draw_veh_a, PathComponent, PhysicalChannel, TapEngine,
    };
    use crate::filters::sinc_filter;
    use crate::grid::make_grid;
    use crate::linalg::solve_general;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> DDGrid {
        make_grid(3, 5, 30e3, 2).unwrap()
    }

    fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.gen_range(0..2u8)).collect()
    }

    fn identity_h(grid: DDGrid) -> IOMatrix {
        let mut taps = LatticeArray::zeros(grid);
        *taps.at_mut(0, 0) = Complex64::new(1.0, 0.0);
        build_h_from_taps(&taps)
    }

    #[test]
    fn qam_roundtrip_and_energy() {
        let g = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for cons in [Constellation::Qam4, Constellation::Qam16] {
            let bits = random_bits(&mut rng, g.mn() * cons.bits_per_symbol());
            let f = qam_map(g, &bits, cons).unwrap();
            assert_eq!(qam_demap(&f.x, cons), bits);
            if cons == Constellation::Qam4 {
                for v in &f.x {
                    assert!((v.norm_sqr() - 1.0).abs() < 1e-15);
                }
            }
        }
        // full-constellation average energy is exactly 1
        for cons in [Constellation::Qam4, Constellation::Qam16] {
            let bps = cons.bits_per_symbol();
            let mut e = 0.0;
            let count = 1usize << bps;
            for word in 0..count {
                let bits: Vec<u8> =
                    (0..bps).map(|b| ((word >> b) & 1) as u8).collect();
                let g1 = make_grid(1, 1, 30e3, 1).unwrap();
                let f = qam_map(g1, &bits, cons).unwrap();
                e += f.x[0].norm_sqr();
            }
            assert!((e / count as f64 - 1.0).abs() < 1e-14, "{cons:?}");
        }
    }

    #[test]
    fn qam_demap_tolerates_sub_half_distance_noise() {
        let g = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for cons in [Constellation::Qam4, Constellation::Qam16] {
            // half minimum distance: 4-QAM levels +-1/sqrt2 -> 1/sqrt2;
            // 16-QAM spacing 2/sqrt10 -> 1/sqrt10
            let half = match cons {
                Constellation::Qam4 => std::f64::consts::FRAC_1_SQRT_2,
                Constellation::Qam16 => 1.0 / 10.0f64.sqrt(),
            };
            let bits = random_bits(&mut rng, g.mn() * cons.bits_per_symbol());
            let f = qam_map(g, &bits, cons).unwrap();
            let perturbed: Vec<Complex64> = f
                .x
                .iter()
                .map(|v| {
                    let d = 0.99 * half;
                    v + Complex64::new(
                        d * (2.0 * rng.gen::<f64>() - 1.0) / std::f64::consts::SQRT_2,
                        d * (2.0 * rng.gen::<f64>() - 1.0) / std::f64::consts::SQRT_2,
                    )
                })
                .collect();
            assert_eq!(qam_demap(&perturbed, cons), bits);
        }
    }

    #[test]
    fn qam_map_rejects_bad_input() {
        let g = small_grid();
        assert!(qam_map(g, &[0u8; 7], Constellation::Qam4).is_err());
        let mut bits = vec![0u8; g.mn() * 2];
        bits[3] = 2;
        assert!(qam_map(g, &bits, Constellation::Qam4).is_err());
    }

    #[test]
    fn transmit_noiseless_and_noise_statistics() {
        let g = small_grid();
        let hm = identity_h(g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bits = random_bits(&mut rng, g.mn() * 2);
        let f = qam_map(g, &bits, Constellation::Qam4).unwrap();
        let y0 = transmit(&hm, &f, &NoiseModel::white(0.0).unwrap(), &mut rng).unwrap();
        for (a, b) in y0.iter().zip(&f.x) {
            assert!((a - b).norm() < 1e-15);
        }
        // empirical noise variance over ~1e5 samples
        let sigma2 = 0.37;
        let noise = NoiseModel::white(sigma2).unwrap();
        let reps = 100_000 / g.mn() + 1;
        let (mut sum, mut count) = (0.0, 0usize);
        for _ in 0..reps {
            let y = transmit(&hm, &f, &noise, &mut rng).unwrap();
            for (a, b) in y.iter().zip(&f.x) {
                sum += (a - b).norm_sqr();
                count += 1;
            }
        }
        let emp = sum / count as f64;
        let tol = 3.0 * sigma2 * (2.0 / count as f64).sqrt();
        assert!((emp - sigma2).abs() < tol, "empirical {emp} vs {sigma2}");
    }

    #[test]
    fn mmse_identity_and_zero_forcing_oracle() {
        let g = make_grid(3, 4, 30e3, 1).unwrap();
        let hm = identity_h(g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<Complex64> =
            (0..g.mn()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let x = mmse_detect(&hm, &y, 0.0).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
        // random well-conditioned H: zero-forcing equals the direct solve
        let n = g.mn();
        let mut h = vec![Complex64::new(0.0, 0.0); n * n];
        for (d, v) in h.iter_mut().enumerate() {
            *v = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            if d % (n + 1) == 0 {
                *v += 2.0; // diagonally dominant, hence invertible
            }
        }
        let hm = IOMatrix { grid: g, h };
        let x = mmse_detect(&hm, &y, 0.0).unwrap();
        let direct = solve_general(&hm.h, n, &y, 1).unwrap();
        for (a, b) in x.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn mmse_matches_alternative_form() {
        let g = make_grid(3, 4, 30e3, 1).unwrap();
        let n = g.mn();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h: Vec<Complex64> = (0..n * n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let hm = IOMatrix { grid: g, h };
        let y: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let sigma2 = 0.2;
        let x = mmse_detect(&hm, &y, sigma2).unwrap();
        // x_alt = H^H (H H^H + sigma2 I)^{-1} y
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut a = vec![zero; n * n];
        zgemm(b'N', b'C', n, n, n, one, &hm.h, n, &hm.h, n, zero, &mut a, n);
        for d in 0..n {
            a[d + d * n] += Complex64::new(sigma2, 0.0);
        }
        let z = solve_hpd(&a, n, y.as_slice(), 1).unwrap();
        let mut alt = vec![zero; n];
        zgemm(b'C', b'N', n, 1, n, one, &hm.h, n, &z, n, zero, &mut alt, n);
        for (p, q) in x.iter().zip(&alt) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn mmse_singular_system_is_an_error() {
        let g = make_grid(3, 4, 30e3, 1).unwrap();
        let hm = IOMatrix {
            grid: g,
            h: vec![Complex64::new(0.0, 0.0); g.mn() * g.mn()],
        };
        let y = vec![Complex64::new(1.0, 0.0); g.mn()];
        assert!(matches!(mmse_detect(&hm, &y, 0.0), Err(ZakError::Conditioning(_))));
    }

    #[test]
    fn mmse_consistency_as_noise_vanishes() {
        let g = small_grid();
        let w = sinc_filter(g).unwrap();
        let engine = TapEngine::new(&w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let phys = draw_veh_a(&mut rng, 815.0, g).unwrap();
        let hm = build_h_from_taps(&engine.taps(&phys).unwrap());
        let bits = random_bits(&mut rng, g.mn() * 2);
        let f = qam_map(g, &bits, Constellation::Qam4).unwrap();
        let mut prev = f64::INFINITY;
        for sigma2 in [1e-2, 1e-4, 1e-6] {
            let noise = NoiseModel::white(sigma2).unwrap();
            let y = transmit(&hm, &f, &noise, &mut rng).unwrap();
            let x = mmse_detect(&hm, &y, sigma2).unwrap();
            let err: f64 =
                x.iter().zip(&f.x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < prev, "error {err} did not decrease (prev {prev})");
            prev = err;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn perfect_csi_noiseless_roundtrip() {
        let g = small_grid();
        let w = sinc_filter(g).unwrap();
        let engine = TapEngine::new(&w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let phys = draw_veh_a(&mut rng, 815.0, g).unwrap();
            let hm = build_h_from_taps(&engine.taps(&phys).unwrap());
            let bits = random_bits(&mut rng, g.mn() * 2);
            let f = qam_map(g, &bits, Constellation::Qam4).unwrap();
            let y = transmit(&hm, &f, &NoiseModel::white(0.0).unwrap(), &mut rng).unwrap();
            let x_hat = mmse_detect(&hm, &y, 0.0).unwrap();
            assert_eq!(qam_demap(&x_hat, Constellation::Qam4), bits);
        }
    }

    #[test]
    fn pilot_frame_properties() {
        let g = make_grid(17, 19, 30e3, 1).unwrap();
        assert_eq!(default_pilot_location(g), (9, 10));
        let f = make_pilot_frame(g, (9, 10)).unwrap();
        let e: f64 = f.x.iter().map(|v| v.norm_sqr()).sum();
        assert!((e - 1.0).abs() < 1e-15);
        let f2 = make_pilot_frame(g, (3, 4)).unwrap();
        let dot: Complex64 =
            f.x.iter().zip(&f2.x).map(|(a, b)| a.conj() * b).sum();
        assert_eq!(dot, Complex64::new(0.0, 0.0));
        assert!(make_pilot_frame(g, (17, 0)).is_err());
    }

    #[test]
    fn estimator_is_exact_without_noise() {
        // Region covering the whole lattice: every estimated tap must equal
        // the true effective-channel tap to machine precision. This pins the
        // taps -> H -> estimator phase conventions end to end.
        let g = small_grid();
        let w = sinc_filter(g).unwrap();
        let engine = TapEngine::new(&w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for pilot in [(2usize, 3usize), (0, 0), (1, 4)] {
            let phys = draw_veh_a(&mut rng, 815.0, g).unwrap();
            let h = engine.taps(&phys).unwrap();
            let hm = build_h_from_taps(&h);
            let f = make_pilot_frame(g, pilot).unwrap();
            let y = hm.apply(&f.x).unwrap();
            let region = EstimationRegion::new(-1, 1, -2, 2);
            let est = estimate_channel(g, &y, pilot, region, f64::INFINITY).unwrap();
            for idx in 0..g.mn() {
                let d = (est.taps_hat.taps[idx] - h.taps[idx]).norm();
                assert!(d < 1e-12, "pilot {pilot:?}, tap {idx}: diff {d}");
            }
        }
    }

    #[test]
    fn estimator_region_masks_taps() {
        let g = small_grid();
        let y = vec![Complex64::new(1.0, 1.0); g.mn()];
        let region = EstimationRegion::new(0, 1, -1, 1);
        let est = estimate_channel(g, &y, (2, 3), region, 10.0).unwrap();
        let covered = region.stored_indices(g);
        for k in 0..g.m {
            for l in 0..g.n {
                let inside = covered.contains(&(k, l));
                let v = est.taps_hat.at(k, l);
                assert_eq!(v == Complex64::new(0.0, 0.0), !inside, "({k}, {l})");
            }
        }
        // region wider than one period is rejected
        assert!(estimate_channel(g, &y, (2, 3), EstimationRegion::new(-2, 2, 0, 0), 0.0)
            .is_err());
    }

    #[test]
    fn estimator_unbiased_and_white_noise_nmse_level() {
        let g = small_grid();
        let w = sinc_filter(g).unwrap();
        let engine = TapEngine::new(&w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phys = draw_veh_a(&mut rng, 815.0, g).unwrap();
        let h = engine.taps(&phys).unwrap();
        let hm = build_h_from_taps(&h);
        let pilot = (2usize, 3usize);
        let f = make_pilot_frame(g, pilot).unwrap();
        let y0 = hm.apply(&f.x).unwrap();
        let region = EstimationRegion::new(-1, 1, -2, 2);
        let sigma2 = 1e-2;
        let noise = NoiseModel::white(sigma2).unwrap();
        let trials = 10_000;
        let mut mean = vec![Complex64::new(0.0, 0.0); g.mn()];
        let mut err2_sum = 0.0;
        for _ in 0..trials {
            let mut y = y0.clone();
            for (yy, nn) in y.iter_mut().zip(noise.draw(&mut rng, y0.len())) {
                *yy += nn;
            }
            let est = estimate_channel(g, &y, pilot, region, 20.0).unwrap();
            let mut e2 = 0.0;
            for idx in 0..g.mn() {
                mean[idx] += est.taps_hat.taps[idx];
                e2 += (est.taps_hat.taps[idx] - h.taps[idx]).norm_sqr();
            }
            err2_sum += e2;
        }
        let h_energy: f64 = h.taps.iter().map(|v| v.norm_sqr()).sum();
        // unbiasedness: 3 standard errors of the per-tap mean
        let se = 3.0 * (sigma2 / trials as f64).sqrt();
        for idx in 0..g.mn() {
            let d = (mean[idx] / trials as f64 - h.taps[idx]).norm();
            assert!(d < se, "tap {idx} biased by {d} (limit {se})");
        }
        // expected NMSE = |region| sigma2 / ||h||^2 (one white read per tap)
        let nmse = err2_sum / trials as f64 / h_energy;
        let expect = region.len() as f64 * sigma2 / h_energy;
        assert!(
            (nmse / expect - 1.0).abs() < 0.1,
            "nmse {nmse} vs expected {expect}"
        );
    }

    #[test]
    fn estimation_nmse_is_monotone_in_pilot_snr() {
        let g = small_grid();
        let w = sinc_filter(g).unwrap();
        let engine = TapEngine::new(&w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let phys = draw_veh_a(&mut rng, 815.0, g).unwrap();
        let h = engine.taps(&phys).unwrap();
        let hm = build_h_from_taps(&h);
        let pilot = (2usize, 3usize);
        let f = make_pilot_frame(g, pilot).unwrap();
        let y0 = hm.apply(&f.x).unwrap();
        let region = EstimationRegion::new(-1, 1, -2, 2);
        let h_energy: f64 = h.taps.iter().map(|v| v.norm_sqr()).sum();
        let mut prev = f64::INFINITY;
        for snr_db in [0.0, 5.0, 10.0, 15.0, 20.0] {
            let sigma2 = 10f64.powf(-snr_db / 10.0);
            let noise = NoiseModel::white(sigma2).unwrap();
            let mut err2 = 0.0;
            for _ in 0..200 {
                let mut y = y0.clone();
                for (yy, nn) in y.iter_mut().zip(noise.draw(&mut rng, y0.len())) {
                    *yy += nn;
                }
                let est = estimate_channel(g, &y, pilot, region, snr_db).unwrap();
                err2 += est
                    .taps_hat
                    .taps
                    .iter()
                    .zip(&h.taps)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>();
            }
            let nmse = err2 / 200.0 / h_energy;
            assert!(nmse <= prev, "NMSE {nmse} rose at {snr_db} dB (prev {prev})");
            prev = nmse;
        }
    }

    #[test]
    fn default_region_matches_design() {
        let g = make_grid(17, 19, 30e3, 1).unwrap();
        let r = default_region(g);
        assert_eq!((r.dk_min, r.dk_max, r.dl_min, r.dl_max), (-2, 4, -2, 2));
        assert_eq!(r.len(), 35);
    }
}
