//! Scattering channels and the effective delay-Doppler channel.
//!
//! A physical channel is a sparse sum of delay-Doppler deltas
//! `h_phy(tau, nu) = sum_i h_i delta(tau - tau_i) delta(nu - nu_i)`. Pulse
//! shaping at the transmitter and matched filtering at the receiver sandwich
//! it into the effective channel
//!
//! ```text
//! h_eff = w~ *_sigma h_phy *_sigma w
//! ```
//!
//! whose samples on the information lattice drive the `MN x MN` input-output
//! matrix `H` of the vectorized link (`y = H x + n`). The module provides the
//! Veh-A channel generator, the effective-channel computation through exact
//! lattice-shift inner products, a precomputed-ambiguity fast path for the
//! Monte-Carlo loop, and the `H` builder.

use crate::ddcore::{DDSignal, LatticeArray};
use crate::filters::{ambiguity_window, AmbiguityWindow, Filter};
use crate::grid::DDGrid;
use crate::{cis_turns, ZakError};
use num_complex::Complex64;
use rand::Rng;

/// Relative magnitude threshold below which effective-channel taps are
/// reported as outside the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

/// One scattering path of a [`PhysicalChannel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    /// Complex gain `h_i`.
    pub gain: Complex64,
    /// Delay `tau_i` [s].
    pub tau: f64,
    /// Doppler shift `nu_i` [Hz].
    pub nu: f64,
}

/// Sparse delay-Doppler scattering channel
/// `h_phy = sum_i h_i delta(tau - tau_i) delta(nu - nu_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalChannel {
    pub paths: Vec<PathComponent>,
}

impl PhysicalChannel {
    /// Validates the invariants against a grid and wraps the paths:
    /// at least one path, unit total power (`sum |h_i|^2 = 1` to 1e-12),
    /// `tau_i` within one delay period and `|nu_i| < nu_p / 2`.
    pub fn new(grid: DDGrid, paths: Vec<PathComponent>) -> Result<Self, ZakError> {
        let ch = Self { paths };
        ch.validate(grid)?;
        Ok(ch)
    }

    /// Re-checks the construction invariants (paths are public, so consumers
    /// that build the struct directly can still be validated).
    pub fn validate(&self, grid: DDGrid) -> Result<(), ZakError> {
        if self.paths.is_empty() {
            return Err(ZakError::InvalidArgument(
                "physical channel needs at least one path".into(),
            ));
        }
        let power: f64 = self.paths.iter().map(|p| p.gain.norm_sqr()).sum();
        if (power - 1.0).abs() > 1e-12 {
            return Err(ZakError::InvalidArgument(format!(
                "path powers must sum to 1 (got {power})"
            )));
        }
        for (i, p) in self.paths.iter().enumerate() {
            if !(0.0..grid.tau_p).contains(&p.tau) {
                return Err(ZakError::InvalidArgument(format!(
                    "path {i}: delay {} outside [0, tau_p)",
                    p.tau
                )));
            }
            if !(p.nu.abs() < grid.nu_p / 2.0) {
                return Err(ZakError::InvalidArgument(format!(
                    "path {i}: Doppler {} outside (-nu_p/2, nu_p/2)",
                    p.nu
                )));
            }
        }
        Ok(())
    }

    /// Paths with delay/Doppler rounded to the nearest oversampled cell,
    /// `(gain, delay cells, Doppler cells)` — the discretization used by
    /// every effective-channel computation in the crate.
    pub fn path_cells(&self, grid: DDGrid) -> Vec<(Complex64, i64, i64)> {
        self.paths
            .iter()
            .map(|p| {
                (
                    p.gain,
                    (p.tau / grid.delta_tau).round() as i64,
                    (p.nu / grid.delta_nu).round() as i64,
                )
            })
            .collect()
    }

    /// Writes the channel as `path,gain_re,gain_im,tau_seconds,nu_hz`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<(), ZakError> {
        writeln!(out, "path,gain_re,gain_im,tau_seconds,nu_hz")?;
        for (i, p) in self.paths.iter().enumerate() {
            writeln!(out, "{i},{:e},{:e},{:e},{:e}", p.gain.re, p.gain.im, p.tau, p.nu)?;
        }
        Ok(())
    }
}

/// Veh-A power-delay profile: path delays [s].
pub const VEH_A_DELAYS: [f64; 6] =
    [0.0, 0.31e-6, 0.71e-6, 1.09e-6, 1.73e-6, 2.51e-6];

/// Veh-A power-delay profile: relative path powers [dB].
pub const VEH_A_POWERS_DB: [f64; 6] = [0.0, -1.0, -9.0, -10.0, -15.0, -20.0];

/// Draws one Veh-A channel realization: fixed delays and power profile,
/// i.i.d. uniform gain phases `phi_i` in `[0, 2 pi)`, Dopplers
/// `nu_i = nu_max cos(theta_i)` with `theta_i` uniform in `[-pi, pi)`.
/// Gains are normalized so `sum |h_i|^2 = 1` exactly.
///
/// # Errors
/// `nu_max >= nu_p / 2` would alias Doppler across the period.
pub fn draw_veh_a<R: Rng + ?Sized>(
    rng: &mut R,
    nu_max: f64,
    grid: DDGrid,
) -> Result<PhysicalChannel, ZakError> {
    if !(nu_max >= 0.0) || nu_max >= grid.nu_p / 2.0 {
        return Err(ZakError::InvalidArgument(format!(
            "nu_max must lie in [0, nu_p/2) = [0, {}) (got {nu_max})",
            grid.nu_p / 2.0
        )));
    }
    let phases: Vec<f64> =
        (0..6).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
    let thetas: Vec<f64> = (0..6)
        .map(|_| (rng.gen::<f64>() - 0.5) * std::f64::consts::TAU)
        .collect();
    let linear: Vec<f64> =
        VEH_A_POWERS_DB.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let total: f64 = linear.iter().sum();
    let paths = (0..6)
        .map(|i| PathComponent {
            gain: Complex64::from_polar((linear[i] / total).sqrt(), phases[i]),
            tau: VEH_A_DELAYS[i],
            nu: nu_max * thetas[i].cos(),
        })
        .collect();
    PhysicalChannel::new(grid, paths)
}

/// The effective channel `h_eff = w~ *_sigma h_phy *_sigma w`: the oversampled
/// surface, its lattice samples, and the above-threshold support.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    pub grid: DDGrid,
    /// Oversampled `h_eff` on the centered fundamental domain.
    pub h_grid: DDSignal,
    /// `h_eff[k, l]` on the information lattice (uncentered storage, exactly
    /// the lattice samples of `h_grid`).
    pub taps: LatticeArray,
    /// Lattice indices with `|tap| > SUPPORT_THRESHOLD * max |tap|`.
    pub support: Vec<(usize, usize)>,
}

impl EffectiveChannel {
    /// Writes the lattice taps as `k,l,re,im`.
    pub fn write_taps_csv<W: std::io::Write>(&self, out: &mut W) -> Result<(), ZakError> {
        writeln!(out, "k,l,re,im")?;
        for k in 0..self.grid.m {
            for l in 0..self.grid.n {
                let v = self.taps.at(k, l);
                writeln!(out, "{k},{l},{:e},{:e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Samples a quasi-periodic surface on the information lattice into the
/// uncentered `M x N` storage.
fn sample_lattice(h_grid: &DDSignal) -> LatticeArray {
    let g = h_grid.grid;
    let q = g.q as i64;
    let mut taps = LatticeArray::zeros(g);
    for k in 0..g.m {
        for l in 0..g.n {
            *taps.at_mut(k, l) = h_grid.qp_at(k as i64 * q, l as i64 * q);
        }
    }
    taps
}

/// Self-ambiguity window of the filter covering every offset `z - u` that
/// the sandwich evaluation can request: `u` any oversampled cell (centered
/// representative) or lattice point, `z` any valid path cell (delay within
/// one period, Doppler within half a period).
fn closed_form_window(w: &Filter) -> Result<AmbiguityWindow, ZakError> {
    let g = w.grid();
    let (st, sn) = (g.st() as i64, g.sn() as i64);
    let (oi, oj) = (g.oi() as i64, g.oj() as i64);
    let yi = (oi - st)..(st + oi + 2);
    let yj = (oj - sn - sn / 2 - 2)..(oj + sn / 2 + 3);
    ambiguity_window(&w.taps, yi, yj)
}

/// The sandwich `w~ *_sigma h_phy *_sigma w` at cell `u = (ui, uj)` (centered
/// coordinates), evaluated through exact lattice-shift inner products:
///
/// ```text
/// h_eff(u) = sum_i h_i e^{j pi (z_i u_j - z_j u_i) / L}
///            e^{j 2 pi (u_i u_j - u_j z_i) / L} A(z_i - u)
/// ```
///
/// with `A(y) = <w, S_y w> dA` the precomputed self-ambiguity. This is the
/// exact discrete object (it equals the time-domain correlation of channel-
/// shifted pulsones); a Riemann-sum twisted convolution of the same sandwich
/// differs by a fundamental-domain seam error once a path shift moves filter
/// mass across the domain boundary, so the quadrature form is not used here.
fn sandwich_at(
    window: &AmbiguityWindow,
    grid: DDGrid,
    cells: &[(Complex64, i64, i64)],
    ui: i64,
    uj: i64,
) -> Complex64 {
    let l_tot = grid.cells() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for &(gain, zi, zj) in cells {
        let turns =
            (0.5 * (zi * uj - zj * ui) as f64 + (ui * uj - uj * zi) as f64) / l_tot;
        acc += gain * cis_turns(turns) * window.at(zi - ui, zj - uj);
    }
    acc
}

/// Computes the effective channel `h_eff = w~ *_sigma h_phy *_sigma w` on the
/// full oversampled grid via [`sandwich_at`], with the paths rounded to
/// oversampled cells, then samples the information lattice.
///
/// This is the reference path; the Monte-Carlo loop uses [`TapEngine`], which
/// reuses one precomputed window across realizations and evaluates lattice
/// points only.
pub fn effective_channel(
    w: &Filter,
    phys: &PhysicalChannel,
) -> Result<EffectiveChannel, ZakError> {
    let grid = w.grid();
    phys.validate(grid)?;
    let window = closed_form_window(w)?;
    let cells = phys.path_cells(grid);
    let (oi, oj) = (grid.oi() as i64, grid.oj() as i64);
    let mut h_grid = DDSignal::zeros(grid, true);
    for i in 0..grid.st() {
        let ui = i as i64 - oi;
        for j in 0..grid.sn() {
            let uj = j as i64 - oj;
            *h_grid.at_mut(i, j) = sandwich_at(&window, grid, &cells, ui, uj);
        }
    }
    let taps = sample_lattice(&h_grid);
    let support = taps.support(SUPPORT_THRESHOLD);
    Ok(EffectiveChannel { grid, h_grid, taps, support })
}

/// Fast effective-channel lattice taps from a precomputed cross-ambiguity
/// window of the filter.
///
/// For a path at cell offset `z = (z_i, z_j)` the sandwich
/// `w~ *_sigma delta_z *_sigma w` evaluated at a lattice point
/// `u = (k_c Q, l_c Q)` (centered representative) reduces to a closed form in
/// the filter's self-ambiguity `A(y) = <w, S_y w> dA`:
///
/// ```text
/// h_eff(u) = sum_i h_i e^{j pi (z_i u_j - z_j u_i) / L}
///            e^{j 2 pi (u_i u_j - u_j z_i) / L} A(z - u)
/// ```
///
/// so each frame costs `O(P * M * N)` window reads instead of an `O(S^2)`
/// quadrature. The window spans every offset `z - u` that a valid channel
/// (delay within one period, Doppler within half a period) can request.
#[derive(Debug, Clone)]
pub struct TapEngine {
    grid: DDGrid,
    window: AmbiguityWindow,
}

impl TapEngine {
    pub fn new(w: &Filter) -> Result<Self, ZakError> {
        let window = closed_form_window(w)?;
        Ok(Self { grid: w.grid(), window })
    }

    /// Lattice taps of the effective channel for one channel realization
    /// (identical to sampling `w~ *_sigma h_phy *_sigma w`, with the paths
    /// rounded to oversampled cells).
    pub fn taps(&self, phys: &PhysicalChannel) -> Result<LatticeArray, ZakError> {
        let g = self.grid;
        phys.validate(g)?;
        let q = g.q as i64;
        let cells = phys.path_cells(g);
        let mut taps = LatticeArray::zeros(g);
        for k in 0..g.m {
            let ui = crate::filters::fold_rep(k, g.m) * q;
            for l in 0..g.n {
                let uj = crate::filters::fold_rep(l, g.n) * q;
                *taps.at_mut(k, l) = sandwich_at(&self.window, g, &cells, ui, uj);
            }
        }
        // Convert centered-representative values to the stored fundamental
        // domain: delay wraps carry e^{j 2 pi n l / N}, Doppler wraps are
        // phase-free.
        for k in 0..g.m {
            if crate::filters::fold_rep(k, g.m) < 0 {
                for l in 0..g.n {
                    *taps.at_mut(k, l) *= cis_turns(l as f64 / g.n as f64);
                }
            }
        }
        Ok(taps)
    }
}

/// The `MN x MN` input-output matrix of the vectorized link `y = H x + n`,
/// stored column-major (`h[row + col * MN]`) with the frame vectorization
/// `x[k + l * M] = X[k, l]`.
#[derive(Debug, Clone)]
pub struct IOMatrix {
    pub grid: DDGrid,
    pub h: Vec<Complex64>,
}

impl IOMatrix {
    #[inline]
    pub fn order(&self) -> usize {
        self.grid.mn()
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.h[row + col * self.order()]
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>, ZakError> {
        let mn = self.order();
        if x.len() != mn {
            return Err(ZakError::DimensionMismatch(format!(
                "H is {mn} x {mn}, x has length {}",
                x.len()
            )));
        }
        let mut y = vec![Complex64::new(0.0, 0.0); mn];
        for col in 0..mn {
            let xv = x[col];
            if xv == Complex64::new(0.0, 0.0) {
                continue;
            }
            let column = &self.h[col * mn..(col + 1) * mn];
            for (acc, hv) in y.iter_mut().zip(column) {
                *acc += hv * xv;
            }
        }
        Ok(y)
    }
}

/// Builds the input-output matrix from effective-channel lattice taps:
///
/// ```text
/// H[k + lM, k' + l'M] = e^{j 2 pi n l' / N} e^{j 2 pi (k' + nM)(dl - mN)/(MN)}
///                       h_eff[dk - nM, dl - mN]
/// ```
///
/// with `dk = k - k'`, `dl = l - l'` and `(n, m)` the unique floor quotients
/// that land the index in the stored fundamental domain.
pub fn build_h_from_taps(taps: &LatticeArray) -> IOMatrix {
    let g = taps.grid;
    let (mm, nn) = (g.m as i64, g.n as i64);
    let mn = g.mn();
    let mnf = mn as f64;
    let mut h = vec![Complex64::new(0.0, 0.0); mn * mn];
    for ck in 0..g.m {
        for cl in 0..g.n {
            let col = ck + cl * g.m;
            for rk in 0..g.m {
                let dk = rk as i64 - ck as i64;
                let n = dk.div_euclid(mm);
                let hk = (dk - n * mm) as usize;
                for rl in 0..g.n {
                    let dl = rl as i64 - cl as i64;
                    let m = dl.div_euclid(nn);
                    let hl = (dl - m * nn) as usize;
                    let turns = n as f64 * cl as f64 / nn as f64
                        + (ck as i64 + n * mm) as f64 * hl as f64 / mnf;
                    let row = rk + rl * g.m;
                    h[row + col * mn] = cis_turns(turns) * taps.at(hk, hl);
                }
            }
        }
    }
    IOMatrix { grid: g, h }
}

/// [`build_h_from_taps`] on an [`EffectiveChannel`].
pub fn build_h(eff: &EffectiveChannel) -> IOMatrix {
    build_h_from_taps(&eff.taps)
}
