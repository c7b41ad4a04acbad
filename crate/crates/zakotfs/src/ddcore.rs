//! Quasi-periodic delay-Doppler signals and the operations on them.
//!
//! A DD signal `a(tau, nu)` is quasi-periodic:
//!
//! ```text
//! a(tau + n*tau_p, nu + m*nu_p) = e^{j 2 pi n nu tau_p} a(tau, nu)
//! ```
//!
//! so one fundamental domain of `(M*Q) x (N*Q)` oversampled cells determines
//! the whole function. Lattice-sampled arrays obey the discrete counterpart
//! `x[k + n*M, l + m*N] = e^{j 2 pi n l / N} x[k, l]`.
//!
//! The module provides the twisted convolution in its lattice form (the
//! discrete composition law behind the Eq.-11 input-output matrix) and its
//! quadrature form (Riemann sum of the continuous definition
//! `(a * b)(tau, nu) = integral a(tau', nu') b(tau - tau', nu - nu')
//! e^{j 2 pi nu' (tau - tau')} dtau' dnu'`), delay-Doppler shifts with the
//! left/right delta closed forms, and the discrete Zak transform pair.

use crate::grid::DDGrid;
use crate::{cis_turns, ZakError};
use num_complex::Complex64;
use rustfft::FftPlanner;

const Z: Complex64 = Complex64::new(0.0, 0.0);

/// Folds a raw integer coordinate into the fundamental range
/// `[-offset, period - offset)`; returns `(array_index, wrap_count)`.
#[inline]
fn fold(coord: i64, offset: i64, period: i64) -> (usize, i64) {
    let n = (coord + offset).div_euclid(period);
    ((coord + offset - n * period) as usize, n)
}

/// Complex samples of a quasi-periodic DD function on one fundamental domain.
///
/// Row-major `(M*Q) x (N*Q)`; index `[i, j]` covers delay `i` and Doppler `j`
/// in oversampled steps. When `centered` is set, index `(oi, oj)` is the
/// origin and coordinates run over `[-tau_p/2, tau_p/2) x [-nu_p/2, nu_p/2)`;
/// otherwise index `(0, 0)` is the origin (frames are uncentered, filters are
/// centered).
#[derive(Debug, Clone)]
pub struct DDSignal {
    pub grid: DDGrid,
    pub samples: Vec<Complex64>,
    pub centered: bool,
}

impl DDSignal {
    pub fn zeros(grid: DDGrid, centered: bool) -> Self {
        Self { grid, samples: vec![Z; grid.cells()], centered }
    }

    pub fn from_samples(
        grid: DDGrid,
        samples: Vec<Complex64>,
        centered: bool,
    ) -> Result<Self, ZakError> {
        if samples.len() != grid.cells() {
            return Err(ZakError::DimensionMismatch(format!(
                "expected {} samples, got {}",
                grid.cells(),
                samples.len()
            )));
        }
        Ok(Self { grid, samples, centered })
    }

    /// Coordinate offsets of the stored origin: `(oi, oj)` when centered,
    /// `(0, 0)` otherwise.
    #[inline]
    fn offsets(&self) -> (i64, i64) {
        if self.centered {
            (self.grid.oi() as i64, self.grid.oj() as i64)
        } else {
            (0, 0)
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.samples[i * self.grid.sn() + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.samples[i * self.grid.sn() + j]
    }

    /// Quasi-periodic read at raw integer coordinates `(ic, jc)` in this
    /// signal's own convention (centered coordinates for centered signals).
    ///
    /// Delay wraps pick up `e^{j 2 pi n nu tau_p}`; Doppler wraps are plain.
    pub fn qp_at(&self, ic: i64, jc: i64) -> Complex64 {
        let (st, sn) = (self.grid.st() as i64, self.grid.sn() as i64);
        let (oi, oj) = self.offsets();
        let (i, n) = fold(ic, oi, st);
        let (j, m) = fold(jc, oj, sn);
        let jm = jc - m * sn; // folded Doppler coordinate
        let v = self.at(i, j);
        if n == 0 {
            v
        } else {
            v * cis_turns(n as f64 * jm as f64 / sn as f64)
        }
    }

    /// Quadrature energy `sum |a|^2 * delta_tau * delta_nu`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.d_a()
    }

    /// Scales to unit quadrature energy.
    pub fn normalize(&mut self) {
        let e = self.energy().sqrt();
        if e > 0.0 {
            let s = 1.0 / e;
            for v in &mut self.samples {
                *v *= s;
            }
        }
    }

    /// Re-expresses the signal on the uncentered fundamental domain
    /// `[0, tau_p) x [0, nu_p)` (no-op if already uncentered).
    pub fn to_uncentered(&self) -> DDSignal {
        if !self.centered {
            return self.clone();
        }
        let (st, sn) = (self.grid.st(), self.grid.sn());
        let (oi, oj) = (self.grid.oi() as i64, self.grid.oj() as i64);
        let mut out = DDSignal::zeros(self.grid, false);
        for a in 0..st {
            let ic = a as i64 - oi;
            let iu = ic.rem_euclid(st as i64);
            // tau_u = tau_c - nwrap * tau_p with nwrap in {-1, 0}
            let nwrap = (ic - iu) as f64 / st as f64;
            for b in 0..sn {
                let jc = b as i64 - oj;
                let ju = jc.rem_euclid(sn as i64) as usize;
                let ph = cis_turns(-nwrap * jc as f64 / sn as f64);
                *out.at_mut(iu as usize, ju) = ph * self.at(a, b);
            }
        }
        out
    }

    /// Re-expresses the signal on the centered fundamental domain (no-op if
    /// already centered).
    pub fn to_centered(&self) -> DDSignal {
        if self.centered {
            return self.clone();
        }
        let (st, sn) = (self.grid.st(), self.grid.sn());
        let (oi, oj) = (self.grid.oi() as i64, self.grid.oj() as i64);
        let mut out = DDSignal::zeros(self.grid, true);
        for a in 0..st {
            let ic = a as i64 - oi; // centered delay coordinate of output row a
            for b in 0..sn {
                let jc = b as i64 - oj;
                // read the uncentered representation quasi-periodically
                *out.at_mut(a, b) = self.qp_at(ic, jc);
            }
        }
        out
    }
}

/// `h_eff[k, l]` style samples on the information lattice, `M x N` row-major,
/// quasi-periodic with the discrete rule
/// `x[k + n*M, l + m*N] = e^{j 2 pi n l / N} x[k, l]`.
#[derive(Debug, Clone)]
pub struct LatticeArray {
    pub grid: DDGrid,
    pub taps: Vec<Complex64>,
}

impl LatticeArray {
    pub fn zeros(grid: DDGrid) -> Self {
        Self { grid, taps: vec![Z; grid.mn()] }
    }

    pub fn from_taps(grid: DDGrid, taps: Vec<Complex64>) -> Result<Self, ZakError> {
        if taps.len() != grid.mn() {
            return Err(ZakError::DimensionMismatch(format!(
                "expected {} taps, got {}",
                grid.mn(),
                taps.len()
            )));
        }
        Ok(Self { grid, taps })
    }

    #[inline]
    pub fn at(&self, k: usize, l: usize) -> Complex64 {
        self.taps[k * self.grid.n + l]
    }

    #[inline]
    pub fn at_mut(&mut self, k: usize, l: usize) -> &mut Complex64 {
        &mut self.taps[k * self.grid.n + l]
    }

    /// Quasi-periodic read at raw integer lattice coordinates.
    pub fn qp_at(&self, k: i64, l: i64) -> Complex64 {
        let (mm, nn) = (self.grid.m as i64, self.grid.n as i64);
        let (ki, n) = fold(k, 0, mm);
        let (li, _) = fold(l, 0, nn);
        let v = self.at(ki, li);
        if n == 0 {
            v
        } else {
            v * cis_turns(n as f64 * li as f64 / nn as f64)
        }
    }

    /// Indices of taps with `|tap| > threshold * max|tap|`.
    pub fn support(&self, threshold: f64) -> Vec<(usize, usize)> {
        let peak = self.taps.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut out = Vec::new();
        for k in 0..self.grid.m {
            for l in 0..self.grid.n {
                if self.at(k, l).norm() > threshold * peak {
                    out.push((k, l));
                }
            }
        }
        out
    }
}

/// Complex baseband time signal produced by the inverse Zak transform:
/// `M*N*Q^2` samples at rate `B*Q` (duration `Q*T`, one delay period per
/// Doppler column of the DD representation).
#[derive(Debug, Clone)]
pub struct TimeSignal {
    pub sample_rate: f64,
    pub samples: Vec<Complex64>,
    pub t0: f64,
}

/// Discrete twisted convolution on the information lattice:
///
/// ```text
/// c[k, l] = sum_{(k', l') in supp_b} a_qp[k - k', l - l'] b[k', l']
///           e^{j 2 pi l' (k - k') / (M N)}
/// ```
///
/// with `a_qp` the quasi-periodic extension and raw (unfolded) differences in
/// the phase. With `a` a symbol frame and `b` the effective channel taps this
/// reproduces the Eq.-11 matrix action exactly (`H vec(a) = vec(c)`); see the
/// equivalence oracle in the tests. The product is exactly associative when
/// the supports are small enough that no quasi-periodic wrap occurs; on the
/// folded torus the twisted-convolution phase is not periodic in `l'`, so no
/// wrapped definition can be.
pub fn twisted_conv_lattice(
    a: &LatticeArray,
    b: &LatticeArray,
    support_b: &[(usize, usize)],
) -> Result<LatticeArray, ZakError> {
    if a.grid != b.grid {
        return Err(ZakError::GridMismatch("twisted_conv_lattice".into()));
    }
    let (mm, nn) = (a.grid.m, a.grid.n);
    let mn = (mm * nn) as f64;
    let mut c = LatticeArray::zeros(a.grid);
    for &(kp, lp) in support_b {
        let bv = b.at(kp, lp);
        if bv == Z {
            continue;
        }
        for k in 0..mm {
            let dk = k as i64 - kp as i64;
            let tw = bv * cis_turns(lp as f64 * dk as f64 / mn);
            for l in 0..nn {
                let dl = l as i64 - lp as i64;
                *c.at_mut(k, l) += tw * a.qp_at(dk, dl);
            }
        }
    }
    Ok(c)
}

/// Integer-cell delay-Doppler shift with the left-delta closed form:
/// `out(u) = a_qp(u - s) e^{j 2 pi la (iu - ka) / L}` where `s = (ka, la)` in
/// oversampled cells and `L = (M Q)(N Q)`. This is the canonical
/// (quasi-periodicity-covariant) shift operator `S_{ka,la}`.
pub(crate) fn shift_left_cells(a: &DDSignal, ka: i64, la: i64) -> DDSignal {
    let (st, sn) = (a.grid.st(), a.grid.sn());
    let l_tot = (st * sn) as f64;
    let (oi, oj) = a.offsets();
    let mut out = DDSignal::zeros(a.grid, a.centered);
    for i in 0..st {
        let iu = i as i64 - oi;
        let ph = cis_turns(la as f64 * (iu - ka) as f64 / l_tot);
        for j in 0..sn {
            let ju = j as i64 - oj;
            *out.at_mut(i, j) = ph * a.qp_at(iu - ka, ju - la);
        }
    }
    out
}

/// Integer-cell shift with the right-delta closed form:
/// `out(u) = a_qp(u - s) e^{j 2 pi (ju - la) ka / L}`.
pub(crate) fn shift_right_cells(a: &DDSignal, ka: i64, la: i64) -> DDSignal {
    let (st, sn) = (a.grid.st(), a.grid.sn());
    let l_tot = (st * sn) as f64;
    let (oi, oj) = a.offsets();
    let mut out = DDSignal::zeros(a.grid, a.centered);
    for i in 0..st {
        let iu = i as i64 - oi;
        for j in 0..sn {
            let ju = j as i64 - oj;
            let ph = cis_turns((ju - la) as f64 * ka as f64 / l_tot);
            *out.at_mut(i, j) = ph * a.qp_at(iu - ka, ju - la);
        }
    }
    out
}

/// Which side the Dirac delta sits on in the twisted convolution defining a
/// physical delay-Doppler shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftSide {
    /// `gain * a(tau - tau_i, nu - nu_i) e^{j 2 pi nu_i (tau - tau_i)}`.
    Left,
    /// `gain * a(tau - tau_i, nu - nu_i) e^{j 2 pi (nu - nu_i) tau_i}`.
    Right,
}

/// Shifts `a` by `(tau_i, nu_i)` (rounded to the nearest oversampled cell)
/// with the delta-convolution phase of the chosen side, scaled by `gain`.
pub fn shift_with_phase(
    a: &DDSignal,
    tau_i: f64,
    nu_i: f64,
    side: ShiftSide,
    gain: Complex64,
) -> DDSignal {
    let ka = (tau_i / a.grid.delta_tau).round() as i64;
    let la = (nu_i / a.grid.delta_nu).round() as i64;
    let mut out = match side {
        ShiftSide::Left => shift_left_cells(a, ka, la),
        ShiftSide::Right => shift_right_cells(a, ka, la),
    };
    if gain != Complex64::new(1.0, 0.0) {
        for v in &mut out.samples {
            *v *= gain;
        }
    }
    out
}

/// Quadrature (Riemann-sum) twisted convolution on the oversampled grid:
///
/// ```text
/// c(u) = sum_v a(v) b_qp(u - v) e^{j 2 pi nu_v (tau_u - tau_v)}
///        delta_tau delta_nu
/// ```
///
/// where each sample's phase uses its declared coordinate in the shared
/// storage convention. Cost is `O(S^2)` over the `S` cells of the fundamental
/// domain; intended for oracles and small grids, not the Monte-Carlo loop.
pub fn twisted_conv_grid(a: &DDSignal, b: &DDSignal) -> Result<DDSignal, ZakError> {
    if a.grid != b.grid || a.centered != b.centered {
        return Err(ZakError::GridMismatch("twisted_conv_grid".into()));
    }
    let (st, sn) = (a.grid.st(), a.grid.sn());
    let (oi, oj) = a.offsets();
    let d_a = a.grid.d_a();
    let mut out = DDSignal::zeros(a.grid, a.centered);
    for i in 0..st {
        let iv = i as i64 - oi;
        for j in 0..sn {
            let av = a.at(i, j);
            if av == Z {
                continue;
            }
            let jv = j as i64 - oj;
            let shifted = shift_left_cells(b, iv, jv);
            let w = av * d_a;
            for (o, s) in out.samples.iter_mut().zip(shifted.samples.iter()) {
                *o += w * s;
            }
        }
    }
    Ok(out)
}

/// Inverse Zak transform `a(t) = sqrt(tau_p) * integral_0^{nu_p} a(t, nu) dnu`
/// discretized on the oversampled grid: `M*N*Q^2` samples at rate `B*Q`.
/// Sample `i + p*(M*Q)` covers `t = (i + p*M*Q) * delta_tau`, so the signal
/// spans `N*Q` delay periods (duration `Q*T`), the span that makes the
/// discrete round trip exact.
pub fn zak_inverse(a: &DDSignal) -> TimeSignal {
    let u = a.to_uncentered();
    let (st, sn) = (u.grid.st(), u.grid.sn());
    let scale = u.grid.tau_p.sqrt() * u.grid.delta_nu;
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(sn);
    let mut samples = vec![Z; st * sn];
    let mut row = vec![Z; sn];
    for i in 0..st {
        row.copy_from_slice(&u.samples[i * sn..(i + 1) * sn]);
        ifft.process(&mut row); // row[p] = sum_j u[i,j] e^{+j 2 pi p j / sn}
        for (p, v) in row.iter().enumerate() {
            samples[i + p * st] = scale * v;
        }
    }
    TimeSignal { sample_rate: u.grid.b * u.grid.q as f64, samples, t0: 0.0 }
}

/// Forward Zak transform, inverse of [`zak_inverse`] on the discrete grid:
/// `a[i, j] = sqrt(tau_p) * sum_p x[i + p*M*Q] e^{-j 2 pi p j / (N*Q)}`.
/// Returns the uncentered representation.
pub fn zak_forward(x: &TimeSignal, grid: DDGrid) -> Result<DDSignal, ZakError> {
    let (st, sn) = (grid.st(), grid.sn());
    if x.samples.len() != st * sn {
        return Err(ZakError::DimensionMismatch(format!(
            "time signal has {} samples, grid needs {}",
            x.samples.len(),
            st * sn
        )));
    }
    let scale = grid.tau_p.sqrt();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(sn);
    let mut out = DDSignal::zeros(grid, false);
    let mut col = vec![Z; sn];
    for i in 0..st {
        for p in 0..sn {
            col[p] = x.samples[i + p * st];
        }
        fft.process(&mut col); // col[j] = sum_p x[i + p st] e^{-j 2 pi p j / sn}
        for j in 0..sn {
            *out.at_mut(i, j) = scale * col[j];
        }
    }
    Ok(out)
}
