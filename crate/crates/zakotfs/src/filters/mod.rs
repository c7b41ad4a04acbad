//! Delay-Doppler pulse-shaping filters and localization diagnostics.
//!
//! Six filter families are provided. Four are closed-form separable profiles
//! on the centered fundamental domain:
//!
//! - sinc: `sqrt(BT) sinc(B tau) sinc(T nu)`, periodized quasi-periodically
//!   and polished to machine-precision lattice orthogonality;
//! - root-raised cosine: `rrc_{beta_tau}(B tau) rrc_{beta_nu}(T nu)` with
//!   bandwidth/time expansion `(1+beta)`;
//! - Gaussian: `e^{-alpha_tau (B tau)^2 - alpha_nu (T nu)^2}` (not orthogonal);
//! - Gaussian-sinc: `Omega^2 sinc(B tau) sinc(T nu) e^{-alpha[(B tau)^2 + (T nu)^2]}`.
//!
//! The two IOTA families orthogonalize a prototype against its information
//! lattice shifts via the Loewdin inverse-square-root of the shift Gram
//! (`R^{-1/2} G`), followed by a Gauss-Newton polish of the composite
//! ambiguity; the IOTA-PSWF prototype is the outer product of two prolate
//! spheroidal wave functions obtained by Nystroem discretization of
//! `lambda psi(t) = integral sinc(B'(t - t')) psi(t') dt'`.
//!
//! Orthogonality is measured by the composite ambiguity
//! `g = (matched w) *_sigma w` sampled on the lattice: a filter is orthogonal
//! to its lattice shifts iff `g` is the origin delta.

mod iota;
mod pswf;
mod window;

pub use iota::{lattice_gram_report, GramReport, ShiftDomain};
pub use pswf::PswfSolution;
pub use window::{ambiguity_window, AmbiguityWindow};

use crate::ddcore::{DDSignal, LatticeArray};
use crate::grid::DDGrid;
use crate::{cis_turns, ZakError};
use num_complex::Complex64;
use rustfft::FftPlanner;

const Z: Complex64 = Complex64::new(0.0, 0.0);

/// Filter family tag with the construction parameters recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterFamily {
    Sinc,
    RootRaisedCosine { beta_tau: f64, beta_nu: f64 },
    Gaussian { alpha_tau: f64, alpha_nu: f64 },
    GaussianSinc { alpha_tau: f64, alpha_nu: f64, omega_tau: f64, omega_nu: f64 },
    IotaGaussian,
    IotaPswf { quadrature_order: usize },
}

impl FilterFamily {
    /// Short stable name used in CSV output and CLI arguments.
    pub fn label(&self) -> &'static str {
        match self {
            FilterFamily::Sinc => "sinc",
            FilterFamily::RootRaisedCosine { .. } => "rrc",
            FilterFamily::Gaussian { .. } => "gauss",
            FilterFamily::GaussianSinc { .. } => "gauss-sinc",
            FilterFamily::IotaGaussian => "iota-gauss",
            FilterFamily::IotaPswf { .. } => "iota-pswf",
        }
    }
}

/// A unit-energy transmit pulse-shaping filter on the centered fundamental
/// domain.
#[derive(Debug, Clone)]
pub struct Filter {
    pub family: FilterFamily,
    /// Centered oversampled taps, unit quadrature energy.
    pub taps: DDSignal,
}

impl Filter {
    pub fn grid(&self) -> DDGrid {
        self.taps.grid
    }

    /// Dumps the taps as CSV: `tau_index,nu_index,tau_seconds,nu_hz,re,im`,
    /// row-major over the centered grid (indices are centered integers).
    pub fn write_taps_csv<W: std::io::Write>(&self, out: &mut W) -> Result<(), ZakError> {
        let g = self.taps.grid;
        writeln!(out, "tau_index,nu_index,tau_seconds,nu_hz,re,im")?;
        for i in 0..g.st() {
            let ic = i as i64 - g.oi() as i64;
            for j in 0..g.sn() {
                let jc = j as i64 - g.oj() as i64;
                let v = self.taps.at(i, j);
                writeln!(
                    out,
                    "{ic},{jc},{:e},{:e},{:e},{:e}",
                    ic as f64 * g.delta_tau,
                    jc as f64 * g.delta_nu,
                    v.re,
                    v.im
                )?;
            }
        }
        Ok(())
    }
}

/// Periodized sinc `sum_n e^{j 2 pi n theta} sinc(x - n P)` for odd integer
/// period `P`, evaluated exactly through its line spectrum: the sum equals
/// `(1/P) sum_k u_k e^{j 2 pi (k + theta) x / P}` with `u_k = 1` for
/// `|k + theta| < P/2`, `1/2` on the boundary, `0` outside.
fn folded_sinc_1d(p: usize, x: f64, theta: f64) -> Complex64 {
    let pf = p as f64;
    let kmax = (pf / 2.0).ceil() as i64 + 2;
    let mut out = Z;
    for k in -kmax..=kmax {
        let f = k as f64 + theta;
        let uk = if f.abs() < pf / 2.0 - 1e-9 {
            1.0
        } else if (f.abs() - pf / 2.0).abs() < 1e-9 {
            0.5
        } else {
            0.0
        };
        if uk > 0.0 {
            out += uk * cis_turns(f * x / pf);
        }
    }
    out / pf
}

/// Builds a centered unit-energy signal from a per-cell profile
/// `f(B tau, T nu)` in the dimensionless lattice units of the two axes.
fn separable_profile(grid: DDGrid, f: impl Fn(f64, f64) -> Complex64) -> DDSignal {
    let mut w = DDSignal::zeros(grid, true);
    for i in 0..grid.st() {
        let bt = (i as i64 - grid.oi() as i64) as f64 / grid.q as f64;
        for j in 0..grid.sn() {
            let tn = (j as i64 - grid.oj() as i64) as f64 / grid.q as f64;
            *w.at_mut(i, j) = f(bt, tn);
        }
    }
    w.normalize();
    w
}

/// Quasi-periodically folded sinc prototype before the orthogonality polish.
pub(crate) fn sinc_prototype(grid: DDGrid) -> DDSignal {
    let mut w = DDSignal::zeros(grid, true);
    let scale = (grid.b * grid.t).sqrt();
    for i in 0..grid.st() {
        let bt = (i as i64 - grid.oi() as i64) as f64 / grid.q as f64;
        for j in 0..grid.sn() {
            let jc = j as i64 - grid.oj() as i64;
            let tn = jc as f64 / grid.q as f64;
            // Doppler factor folds plainly; the delay factor picks up the
            // quasi-periodicity phase theta = nu tau_p per delay period.
            let theta = jc as f64 / grid.sn() as f64;
            let fn_ = folded_sinc_1d(grid.n, tn, 0.0);
            let ft = folded_sinc_1d(grid.m, bt, theta);
            *w.at_mut(i, j) = scale * ft * fn_;
        }
    }
    w.normalize();
    w
}

/// Discrete sinc filter: the quasi-periodically folded `sqrt(BT) sinc(B tau)
/// sinc(T nu)`, Gauss-Newton-polished to exact lattice orthogonality on the
/// discrete grid (the analytic fold alone is orthogonal only to O(1e-3) at
/// finite oversampling).
pub fn sinc_filter(grid: DDGrid) -> Result<Filter, ZakError> {
    let proto = sinc_prototype(grid);
    let taps = iota::polish_complex_joint(&proto, "sinc")?;
    Ok(Filter { family: FilterFamily::Sinc, taps })
}

/// One-dimensional unit-symbol-rate root-raised-cosine impulse response with
/// analytic values at the removable singularities `x = 0` and `|x| = 1/(4 beta)`.
fn rrc_point(x: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return sinc(x);
    }
    let pi = std::f64::consts::PI;
    if x.abs() < 1e-9 {
        return 1.0 + beta * (4.0 / pi - 1.0);
    }
    if ((4.0 * beta * x).abs() - 1.0).abs() < 1e-9 {
        let a = pi / (4.0 * beta);
        return (beta / 2f64.sqrt())
            * ((1.0 + 2.0 / pi) * a.sin() + (1.0 - 2.0 / pi) * a.cos());
    }
    ((pi * x * (1.0 - beta)).sin() + 4.0 * beta * x * (pi * x * (1.0 + beta)).cos())
        / (pi * x * (1.0 - (4.0 * beta * x).powi(2)))
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Root-raised-cosine filter `rrc_{beta_tau}(B tau) rrc_{beta_nu}(T nu)`.
/// `beta = 0` on both axes reduces exactly to [`sinc_filter`].
pub fn rrc_filter(grid: DDGrid, beta_tau: f64, beta_nu: f64) -> Result<Filter, ZakError> {
    for (name, b) in [("beta_tau", beta_tau), ("beta_nu", beta_nu)] {
        if !(0.0..=1.0).contains(&b) {
            return Err(ZakError::InvalidArgument(format!(
                "{name} must lie in [0, 1] (got {b})"
            )));
        }
    }
    if beta_tau == 0.0 && beta_nu == 0.0 {
        let taps = sinc_filter(grid)?.taps;
        return Ok(Filter { family: FilterFamily::RootRaisedCosine { beta_tau, beta_nu }, taps });
    }
    let taps = separable_profile(grid, |bt, tn| {
        Complex64::new(rrc_point(bt, beta_tau) * rrc_point(tn, beta_nu), 0.0)
    });
    Ok(Filter { family: FilterFamily::RootRaisedCosine { beta_tau, beta_nu }, taps })
}

/// Gaussian filter `e^{-alpha_tau (B tau)^2 - alpha_nu (T nu)^2}` (well
/// localized but not orthogonal to lattice shifts).
pub fn gaussian_filter(grid: DDGrid, alpha_tau: f64, alpha_nu: f64) -> Result<Filter, ZakError> {
    for (name, a) in [("alpha_tau", alpha_tau), ("alpha_nu", alpha_nu)] {
        if !(a > 0.0) {
            return Err(ZakError::InvalidArgument(format!(
                "{name} must be positive (got {a})"
            )));
        }
    }
    let taps = separable_profile(grid, |bt, tn| {
        Complex64::new((-alpha_tau * bt * bt - alpha_nu * tn * tn).exp(), 0.0)
    });
    Ok(Filter { family: FilterFamily::Gaussian { alpha_tau, alpha_nu }, taps })
}

/// Gaussian-sinc filter
/// `Omega_tau Omega_nu sinc(B tau) sinc(T nu) e^{-alpha_tau (B tau)^2 - alpha_nu (T nu)^2}`:
/// keeps the sinc's lattice zeros while taming its sidelobes.
pub fn gaussian_sinc_filter(
    grid: DDGrid,
    alpha_tau: f64,
    alpha_nu: f64,
    omega_tau: f64,
    omega_nu: f64,
) -> Result<Filter, ZakError> {
    for (name, a) in [("alpha_tau", alpha_tau), ("alpha_nu", alpha_nu)] {
        if a < 0.0 {
            return Err(ZakError::InvalidArgument(format!(
                "{name} must be non-negative (got {a})"
            )));
        }
    }
    for (name, o) in [("omega_tau", omega_tau), ("omega_nu", omega_nu)] {
        if !(o > 0.0) {
            return Err(ZakError::InvalidArgument(format!(
                "{name} must be positive (got {o})"
            )));
        }
    }
    let om = omega_tau * omega_nu;
    let taps = separable_profile(grid, |bt, tn| {
        Complex64::new(
            om * sinc(bt) * sinc(tn) * (-alpha_tau * bt * bt - alpha_nu * tn * tn).exp(),
            0.0,
        )
    });
    Ok(Filter {
        family: FilterFamily::GaussianSinc { alpha_tau, alpha_nu, omega_tau, omega_nu },
        taps,
    })
}

/// Prolate-spheroidal prototype filter: outer product of the order-0 PSWFs of
/// the delay problem (`B' = B`, `T' = tau_p`) and the Doppler problem
/// (`B' = T`, `T' = nu_p`). Returns the (non-orthogonal) filter and the
/// eigenproblem solutions.
pub fn pswf_filter(
    grid: DDGrid,
    quadrature_order: usize,
) -> Result<(Filter, PswfSolution), ZakError> {
    let (taps, solution) = pswf::pswf_prototype(grid, quadrature_order)?;
    Ok((
        Filter { family: FilterFamily::IotaPswf { quadrature_order }, taps },
        solution,
    ))
}

/// IOTA orthogonalization (Loewdin): builds the Gram `R` of the prototype's
/// `MN` information-lattice shifts (quasi-periodic wrap), forms `R^{-1/2}` by
/// Hermitian eigendecomposition with relative eigenvalue clamping at `1e-12`,
/// and returns the `(0, 0)` row of the whitened family, renormalized.
///
/// # Errors
/// Fails with [`ZakError::Conditioning`] when more than 1% of the Gram
/// eigenvalues hit the clamp floor (the prototype is too far from Riesz-basis
/// conditioning for a trustworthy inverse square root; see
/// [`iota_pswf_filter`] for the repair pipeline used in that regime).
pub fn iota_orthogonalize(prototype: &Filter, grid: DDGrid) -> Result<Filter, ZakError> {
    iota_orthogonalize_with(prototype, grid, ShiftDomain::Torus)
}

/// [`iota_orthogonalize`] with the shift-domain variant exposed: `Torus` is
/// the quasi-periodic wrap used everywhere in this crate; `Linear` builds the
/// Gram from plain zero-padded shifts for sensitivity comparison.
pub fn iota_orthogonalize_with(
    prototype: &Filter,
    grid: DDGrid,
    domain: ShiftDomain,
) -> Result<Filter, ZakError> {
    if prototype.taps.grid != grid {
        return Err(ZakError::GridMismatch("iota_orthogonalize".into()));
    }
    let (taps, report) = iota::lowdin(&prototype.taps, domain)?;
    if report.clamped * 100 > report.total {
        return Err(ZakError::Conditioning(format!(
            "lattice-shift Gram too ill-conditioned for Loewdin orthogonalization: \
             {} of {} eigenvalues clamped (range [{:.3e}, {:.3e}])",
            report.clamped, report.total, report.eig_min, report.eig_max
        )));
    }
    Ok(Filter { family: prototype.family, taps })
}

/// Effort knobs for the IOTA construction pipelines. `default()` gives the
/// full-quality filters; reduced iteration budgets trade lattice-orthogonality
/// residual (still well under the acceptance thresholds down to roughly half
/// the default budgets) for construction time.
#[derive(Debug, Clone, Copy)]
pub struct IotaBudget {
    /// Iterations of the concentration-metric (harmonic-oscillator) polish
    /// used only by the IOTA-PSWF conditioning repair.
    pub metric_iterations: usize,
    /// Iterations of each plain Gauss-Newton orthogonality polish stage.
    pub polish_iterations: usize,
    /// Residual at which polish stages stop early.
    pub tolerance: f64,
}

impl Default for IotaBudget {
    fn default() -> Self {
        Self { metric_iterations: 20, polish_iterations: 15, tolerance: 1e-12 }
    }
}

/// IOTA-Gaussian filter: Loewdin orthogonalization of the `alpha = 1.584`
/// Gaussian prototype, then Gauss-Newton polish of the composite ambiguity
/// (quadrature-form stage, then lattice-shift inner-product stages including
/// the extended shift differences).
pub fn iota_gaussian_filter(grid: DDGrid) -> Result<Filter, ZakError> {
    iota_gaussian_filter_with(grid, IotaBudget::default())
}

/// [`iota_gaussian_filter`] with an explicit effort budget.
pub fn iota_gaussian_filter_with(grid: DDGrid, budget: IotaBudget) -> Result<Filter, ZakError> {
    let proto = gaussian_filter(grid, 1.584, 1.584)?;
    let ortho = iota_orthogonalize(&proto, grid)?;
    let taps = iota::polish_orthogonal_pipeline(&ortho.taps, &budget)?;
    Ok(Filter { family: FilterFamily::IotaGaussian, taps })
}

/// IOTA-PSWF filter. The PSWF prototype's shift Gram is severely
/// ill-conditioned on the discrete grid (a third of its eigenvalues fall
/// below the clamp floor), so a direct Loewdin pass is not trustworthy;
/// instead: clamped Loewdin as an initial guess, a harmonic-oscillator-metric
/// Gauss-Newton polish that restores time-frequency concentration while
/// enforcing lattice orthogonality, plain polish stages, and a final
/// (now well-conditioned) Loewdin pass through [`iota_orthogonalize`].
pub fn iota_pswf_filter(
    grid: DDGrid,
    quadrature_order: usize,
) -> Result<(Filter, PswfSolution), ZakError> {
    iota_pswf_filter_with(grid, quadrature_order, IotaBudget::default())
}

/// [`iota_pswf_filter`] with an explicit effort budget.
pub fn iota_pswf_filter_with(
    grid: DDGrid,
    quadrature_order: usize,
    budget: IotaBudget,
) -> Result<(Filter, PswfSolution), ZakError> {
    let (proto, solution) = pswf_filter(grid, quadrature_order)?;
    let repaired = iota::repair_pipeline(&proto.taps, &budget)?;
    let final_filter = iota_orthogonalize(
        &Filter { family: FilterFamily::IotaPswf { quadrature_order }, taps: repaired },
        grid,
    )?;
    let taps = iota::polish_final(&final_filter.taps, &budget)?;
    Ok((
        Filter { family: FilterFamily::IotaPswf { quadrature_order }, taps },
        solution,
    ))
}

/// Matched filter `w~(tau, nu) = e^{j 2 pi nu tau} w*(-tau, -nu)` on the
/// centered grid (reads the reflection quasi-periodically).
pub fn matched_filter(w: &Filter) -> Filter {
    Filter { family: w.family, taps: matched_signal(&w.taps) }
}

pub(crate) fn matched_signal(w: &DDSignal) -> DDSignal {
    let g = w.grid;
    let l_tot = g.cells() as f64;
    let mut out = DDSignal::zeros(g, true);
    for i in 0..g.st() {
        let ic = i as i64 - g.oi() as i64;
        for j in 0..g.sn() {
            let jc = j as i64 - g.oj() as i64;
            *out.at_mut(i, j) =
                cis_turns((ic * jc) as f64 / l_tot) * w.qp_at(-ic, -jc).conj();
        }
    }
    out
}

/// Composite ambiguity: the twisted convolution of the matched filter with
/// the filter, `g = w~ *_sigma w`, evaluated by grid quadrature and sampled
/// on the information lattice. Stored on the uncentered fundamental domain
/// (`M x N`, index `(k, l)` holds the sample at `(k / B, l / T)`), consistent
/// with the [`LatticeArray`] quasi-periodicity rule; the quadrature itself is
/// taken at the centered representative of each lattice point.
pub fn composite_ambiguity(w: &Filter) -> LatticeArray {
    composite_ambiguity_signal(&w.taps)
}

pub(crate) fn composite_ambiguity_signal(w: &DDSignal) -> LatticeArray {
    let g = w.grid;
    let wt = matched_signal(w);
    let l_tot = g.cells() as f64;
    let d_a = g.d_a();
    let mut out = LatticeArray::zeros(g);
    for k in 0..g.m {
        let kk = fold_rep(k, g.m);
        for l in 0..g.n {
            let ll = fold_rep(l, g.n);
            let (ka, la) = (kk * g.q as i64, ll * g.q as i64);
            let mut acc = Z;
            for i in 0..g.st() {
                let ic = i as i64 - g.oi() as i64;
                let di = ka - ic;
                for j in 0..g.sn() {
                    let jc = j as i64 - g.oj() as i64;
                    acc += wt.at(i, j)
                        * w.qp_at(di, la - jc)
                        * cis_turns((jc * di) as f64 / l_tot);
                }
            }
            // The quadrature evaluates at the centered representative shift
            // (KS[k], LS[l]); convert to the stored fundamental-domain value
            // via the lattice quasi-periodicity rule (delay wraps carry
            // e^{j 2 pi n l / N}, Doppler wraps are plain).
            let wrap = if kk < 0 { cis_turns(l as f64 / g.n as f64) } else { Complex64::new(1.0, 0.0) };
            *out.at_mut(k, l) = acc * d_a * wrap;
        }
    }
    out
}

/// Centered representative of lattice index `k` modulo `m`: `k` for
/// `k <= m/2`, `k - m` beyond.
#[inline]
pub(crate) fn fold_rep(k: usize, m: usize) -> i64 {
    if k > m / 2 {
        k as i64 - m as i64
    } else {
        k as i64
    }
}

/// Largest off-origin magnitude of a lattice array (orthogonality residual of
/// a composite ambiguity).
pub fn off_origin_max(g: &LatticeArray) -> f64 {
    let mut mx = 0.0f64;
    for k in 0..g.grid.m {
        for l in 0..g.grid.n {
            if k == 0 && l == 0 {
                continue;
            }
            mx = mx.max(g.at(k, l).norm());
        }
    }
    mx
}

/// Main-lobe and sidelobe metrics of one axis cut of `|w|`.
#[derive(Debug, Clone, Copy)]
pub struct CutMetrics {
    /// Oversampled cells from the peak to the first local minimum.
    pub first_min_offset_cells: usize,
    /// Full main-lobe width in oversampled cells (twice the first-minimum
    /// offset, by even symmetry).
    pub main_lobe_width_cells: usize,
    /// Largest local maximum beyond the first minimum, relative to the peak
    /// (0 when the cut decays monotonically: no sidelobes).
    pub sidelobe_peak: f64,
}

fn cut_metrics(cut: &[f64], center: usize) -> CutMetrics {
    let peak = cut[center];
    let mut r = center;
    while r + 1 < cut.len() && cut[r + 1] < cut[r] {
        r += 1;
    }
    let sidelobe = if r + 1 < cut.len() {
        cut[r..].iter().cloned().fold(0.0, f64::max) / peak
    } else {
        0.0
    };
    CutMetrics {
        first_min_offset_cells: r - center,
        main_lobe_width_cells: 2 * (r - center),
        sidelobe_peak: sidelobe,
    }
}

/// Energy spectral density report: time/frequency densities of the filter's
/// time realization, window energy fractions, and axis-cut localization
/// metrics.
#[derive(Debug, Clone)]
pub struct EsdReport {
    /// Centered time coordinates [s] of `time_density`.
    pub time_coords: Vec<f64>,
    /// `|x(t)|^2` along the time realization.
    pub time_density: Vec<f64>,
    /// Frequency coordinates [Hz] of `freq_density`.
    pub freq_coords: Vec<f64>,
    /// `|X(f)|^2` of the time realization.
    pub freq_density: Vec<f64>,
    /// Energy fraction within `|t| <= T/2`.
    pub in_time_half: f64,
    /// Energy fraction within `|f| <= B/2`.
    pub in_band_half: f64,
    /// Energy fraction within `|t| <= T` (one frame duration either side).
    pub in_time_full: f64,
    /// Energy fraction within `|f| <= B`.
    pub in_band_full: f64,
    /// Localization of the delay axis cut `|w(tau, 0)|`.
    pub delay_cut: CutMetrics,
    /// Localization of the Doppler axis cut `|w(0, nu)|`.
    pub doppler_cut: CutMetrics,
}

impl EsdReport {
    /// CSV dump: `axis,coordinate,density` rows for both axes, then a summary
    /// comment line with the window energy fractions.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<(), ZakError> {
        writeln!(out, "axis,coordinate,density")?;
        for (c, d) in self.time_coords.iter().zip(&self.time_density) {
            writeln!(out, "time,{c:e},{d:e}")?;
        }
        for (c, d) in self.freq_coords.iter().zip(&self.freq_density) {
            writeln!(out, "frequency,{c:e},{d:e}")?;
        }
        writeln!(
            out,
            "# in_time_half={:.6} in_band_half={:.6} in_time_full={:.6} in_band_full={:.6} \
             delay_sidelobe={:.4} doppler_sidelobe={:.4}",
            self.in_time_half,
            self.in_band_half,
            self.in_time_full,
            self.in_band_full,
            self.delay_cut.sidelobe_peak,
            self.doppler_cut.sidelobe_peak
        )?;
        Ok(())
    }
}

/// Computes the [`EsdReport`] of a filter from its time realization
/// (via the inverse Zak transform over the full `Q T` span).
pub fn esd_report(w: &Filter) -> EsdReport {
    let g = w.grid();
    let x = crate::ddcore::zak_inverse(&w.taps);
    let total = x.samples.len();
    let half_span = g.sn() as f64 * g.tau_p / 2.0;

    let mut time_coords = Vec::with_capacity(total);
    let mut time_density = Vec::with_capacity(total);
    let mut e_total = 0.0;
    let (mut e_t_half, mut e_t_full) = (0.0, 0.0);
    for (s, v) in x.samples.iter().enumerate() {
        let mut t = s as f64 * g.delta_tau;
        if t >= half_span {
            t -= 2.0 * half_span;
        }
        let e = v.norm_sqr();
        time_coords.push(t);
        time_density.push(e);
        e_total += e;
        if t.abs() <= g.t / 2.0 {
            e_t_half += e;
        }
        if t.abs() <= g.t {
            e_t_full += e;
        }
    }

    let mut spectrum: Vec<Complex64> = x.samples.clone();
    FftPlanner::new().plan_fft_forward(total).process(&mut spectrum);
    let mut freq_coords = Vec::with_capacity(total);
    let mut freq_density = Vec::with_capacity(total);
    let mut ef_total = 0.0;
    let (mut e_f_half, mut e_f_full) = (0.0, 0.0);
    for (k, v) in spectrum.iter().enumerate() {
        let kk = if k < total / 2 { k as i64 } else { k as i64 - total as i64 };
        let f = kk as f64 / (total as f64 * g.delta_tau);
        let e = v.norm_sqr();
        freq_coords.push(f);
        freq_density.push(e);
        ef_total += e;
        if f.abs() <= g.b / 2.0 {
            e_f_half += e;
        }
        if f.abs() <= g.b {
            e_f_full += e;
        }
    }

    let delay_cut: Vec<f64> = (0..g.st()).map(|i| w.taps.at(i, g.oj()).norm()).collect();
    let doppler_cut: Vec<f64> = (0..g.sn()).map(|j| w.taps.at(g.oi(), j).norm()).collect();

    EsdReport {
        time_coords,
        time_density,
        freq_coords,
        freq_density,
        in_time_half: e_t_half / e_total,
        in_band_half: e_f_half / ef_total,
        in_time_full: e_t_full / e_total,
        in_band_full: e_f_full / ef_total,
        delay_cut: cut_metrics(&delay_cut, g.oi()),
        doppler_cut: cut_metrics(&doppler_cut, g.oj()),
    }
}

#[cfg(test)]
mod tests;
