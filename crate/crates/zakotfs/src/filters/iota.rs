//! IOTA orthogonalization: Loewdin inverse-square-root of the lattice-shift
//! Gram, plus the Gauss-Newton polish stages that drive the composite
//! ambiguity to the origin delta on the discrete grid.
//!
//! A filter `w` is lattice-orthogonal when `<w, S_{(k/B, l/T)} w> = delta` for
//! all information-lattice shifts `S`. The Loewdin step whitens the shift
//! family in one linear-algebra pass but is exact only in exact arithmetic
//! (and not at all when the Gram needs eigenvalue clamping); the polish
//! stages then treat the ambiguity entries as a nonlinear least-squares
//! residual in the filter taps. Two residual forms are used:
//!
//! - the quadrature form `g = (matched w) *_sigma w` sampled on the lattice
//!   (the composite-ambiguity diagnostic itself), and
//! - the lattice-shift inner-product form `g_a = <w, S_a w>` over a
//!   configurable set of shift differences, including differences beyond the
//!   fundamental window.
//!
//! Both Jacobians are assembled exactly (the residual is bilinear in the
//! taps). Real even prototypes admit real even optima, so most stages search
//! over real perturbations and re-symmetrize each iterate; the step is either
//! a minimum-norm Gauss-Newton step (damped normal equations on `A Aᵀ`), a
//! truncated-pseudoinverse step, or a minimum-norm step in a
//! harmonic-oscillator metric whose Kronecker structure makes the metric
//! inverse cheap (used to restore time-frequency concentration when starting
//! from a clamped, distorted Loewdin guess).

use super::{fold_rep, IotaBudget};
use crate::ddcore::DDSignal;
use crate::grid::DDGrid;
use crate::linalg;
use crate::{cis_turns, ZakError};
use num_complex::Complex64;

const Z: Complex64 = Complex64::new(0.0, 0.0);

/// Shift domain used when building the Eq.-18 family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDomain {
    /// Quasi-periodic wrap on the fundamental torus (the crate convention).
    Torus,
    /// Plain zero-padded shifts, exposed for sensitivity comparison.
    Linear,
}

/// Conditioning report of a lattice-shift Gram.
#[derive(Debug, Clone, Copy)]
pub struct GramReport {
    pub eig_min: f64,
    pub eig_max: f64,
    /// Eigenvalues that hit the relative clamp floor (1e-12).
    pub clamped: usize,
    /// Total eigenvalues (`M N`).
    pub total: usize,
    /// `max |R~ - I|` of the whitened family `G~ = R^{-1/2} G`.
    pub whitened_deviation: f64,
}

/// Precomputed geometry shared by the polish engines: an exact table of the
/// `L`-th roots of unity (every phase in the ambiguity algebra is an integer
/// power of `e^{j 2 pi / L}`), the matched-filter gather, and the parity map.
struct Workspace {
    grid: DDGrid,
    st: i64,
    sn: i64,
    cells: usize,
    d_a: f64,
    /// `phase[k] = e^{j 2 pi k / L}`.
    phase: Vec<Complex64>,
    /// Flat index of the quasi-periodic reflection `(-ic, -jc)` per cell.
    parity: Vec<usize>,
    /// Matched-filter factor per cell: `wt[c] = mfac[c] * conj(w[parity[c]])`.
    mfac: Vec<Complex64>,
}

impl Workspace {
    fn new(grid: DDGrid) -> Self {
        let (st, sn) = (grid.st() as i64, grid.sn() as i64);
        let cells = grid.cells();
        let l_tot = cells as f64;
        let phase: Vec<Complex64> =
            (0..cells).map(|k| cis_turns(k as f64 / l_tot)).collect();
        let mut ws = Self { grid, st, sn, cells, d_a: grid.d_a(), phase, parity: Vec::new(), mfac: Vec::new() };
        let (oi, oj) = (grid.oi() as i64, grid.oj() as i64);
        let mut parity = Vec::with_capacity(cells);
        let mut mfac = Vec::with_capacity(cells);
        for i in 0..st {
            let ic = i - oi;
            for j in 0..sn {
                let jc = j - oj;
                let (idx, ph) = ws.fold(-ic, -jc);
                parity.push(idx);
                // e^{j 2 pi ic jc / L} * conj(fold phase of the reflection)
                mfac.push(ws.ph(ic * jc) * ph.conj());
            }
        }
        ws.parity = parity;
        ws.mfac = mfac;
        ws
    }

    /// `e^{j 2 pi k / L}` for any integer `k`.
    #[inline]
    fn ph(&self, k: i64) -> Complex64 {
        self.phase[k.rem_euclid(self.cells as i64) as usize]
    }

    /// Quasi-periodic fold of centered coordinates to (flat index, wrap
    /// phase): delay wraps pick up `e^{j 2 pi n jm / Sn}`, Doppler wraps are
    /// plain.
    #[inline]
    fn fold(&self, ic: i64, jc: i64) -> (usize, Complex64) {
        let (oi, oj) = (self.grid.oi() as i64, self.grid.oj() as i64);
        let n = (ic + oi).div_euclid(self.st);
        let i = ic + oi - n * self.st;
        let jm = (jc + oj).rem_euclid(self.sn) - oj;
        let j = jm + oj;
        let idx = (i * self.sn + j) as usize;
        if n == 0 {
            (idx, Complex64::new(1.0, 0.0))
        } else {
            // 1/Sn = St/L in turns
            (idx, self.ph(n * jm * self.st))
        }
    }

    fn matched(&self, w: &[Complex64]) -> Vec<Complex64> {
        (0..self.cells).map(|c| self.mfac[c] * w[self.parity[c]].conj()).collect()
    }

    /// Even-symmetrization used by the real-step polishes: average the real
    /// part with its reflection (the index map of the quasi-periodic parity).
    fn symmetrize(&self, w: &mut [Complex64]) {
        let re: Vec<f64> = w.iter().map(|v| v.re).collect();
        for c in 0..self.cells {
            w[c] = Complex64::new(0.5 * (re[c] + re[self.parity[c]]), 0.0);
        }
    }

    fn normalize(&self, w: &mut [Complex64]) {
        let e = (w.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.d_a).sqrt();
        if e > 0.0 {
            let s = 1.0 / e;
            for v in w.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Quadrature-form composite ambiguity over the fundamental lattice
    /// window, flattened as `a = k * N + l`.
    fn amb_quad(&self, w: &[Complex64]) -> Vec<Complex64> {
        let g = self.grid;
        let wt = self.matched(w);
        let (oi, oj) = (g.oi() as i64, g.oj() as i64);
        let q = g.q as i64;
        let mut out = vec![Z; g.mn()];
        for k in 0..g.m {
            let ka = fold_rep(k, g.m) * q;
            for l in 0..g.n {
                let la = fold_rep(l, g.n) * q;
                let mut acc = Z;
                let mut c = 0usize;
                for i in 0..self.st {
                    let ic = i - oi;
                    let di = ka - ic;
                    for j in 0..self.sn {
                        let jc = j - oj;
                        let (p2, ph2) = self.fold(di, la - jc);
                        acc += wt[c] * ph2 * w[p2] * self.ph(jc * di);
                        c += 1;
                    }
                }
                out[k * g.n + l] = acc * self.d_a;
            }
        }
        out
    }

    /// Lattice-shift inner products `g_a = <w, S_{(ka, la)} w> dA` for the
    /// given shift differences (in lattice units).
    fn s_resid(&self, w: &[Complex64], diffs: &[(i64, i64)]) -> Vec<Complex64> {
        let g = self.grid;
        let (oi, oj) = (g.oi() as i64, g.oj() as i64);
        let q = g.q as i64;
        diffs
            .iter()
            .map(|&(kk, ll)| {
                let (ka, la) = (kk * q, ll * q);
                let mut acc = Z;
                let mut c = 0usize;
                for i in 0..self.st {
                    let ic = i - oi;
                    let shift_ph = self.ph(la * (ic - ka));
                    for j in 0..self.sn {
                        let jc = j - oj;
                        let (p, phf) = self.fold(ic - ka, jc - la);
                        acc += w[c].conj() * phf * shift_ph * w[p];
                        c += 1;
                    }
                }
                acc * self.d_a
            })
            .collect()
    }

}

/// Fundamental-window shift differences `(KS[k], LS[l])`, flattened
/// `a = k * N + l` with the origin first.
fn fundamental_diffs(grid: DDGrid) -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(grid.mn());
    for k in 0..grid.m {
        for l in 0..grid.n {
            out.push((fold_rep(k, grid.m), fold_rep(l, grid.n)));
        }
    }
    out
}

/// Half of the fundamental window (excluding the origin), used by the sinc
/// polish where the residual's conjugate symmetry makes the other half
/// redundant.
fn fundamental_half_diffs(grid: DDGrid) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for k in 0..grid.m {
        for l in 0..grid.n {
            let (kk, ll) = (fold_rep(k, grid.m), fold_rep(l, grid.n));
            if kk > 0 || (kk == 0 && ll > 0) {
                out.push((kk, ll));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Loewdin orthogonalization
// ---------------------------------------------------------------------------

/// Builds the Eq.-18 family matrix G (MN x S, column-major) of lattice shifts
/// of `w`.
fn family_matrix(w: &DDSignal, domain: ShiftDomain) -> Vec<Complex64> {
    let g = w.grid;
    let (mn, s) = (g.mn(), g.cells());
    let (oi, oj) = (g.oi() as i64, g.oj() as i64);
    let q = g.q as i64;
    let mut gm = vec![Z; mn * s];
    for l0 in 0..g.n {
        let la = fold_rep(l0, g.n) * q;
        for k0 in 0..g.m {
            let ka = fold_rep(k0, g.m) * q;
            let row = k0 + l0 * g.m;
            let mut c = 0usize;
            for i in 0..g.st() as i64 {
                let ic = i - oi;
                for j in 0..g.sn() as i64 {
                    let jc = j - oj;
                    let v = match domain {
                        ShiftDomain::Torus => w.qp_at(ic - ka, jc - la),
                        ShiftDomain::Linear => {
                            let (si, sj) = (ic - ka + oi, jc - la + oj);
                            if si >= 0
                                && si < g.st() as i64
                                && sj >= 0
                                && sj < g.sn() as i64
                            {
                                w.at(si as usize, sj as usize)
                            } else {
                                Z
                            }
                        }
                    };
                    gm[row + c * mn] = v;
                    c += 1;
                }
            }
        }
    }
    gm
}

struct LowdinOutcome {
    filter: DDSignal,
    report: GramReport,
}

fn lowdin_core(w: &DDSignal, domain: ShiftDomain) -> Result<LowdinOutcome, ZakError> {
    let g = w.grid;
    let (mn, s) = (g.mn(), g.cells());
    let gm = family_matrix(w, domain);
    let one = Complex64::new(1.0, 0.0);

    // R = G G^H dA  (mn x mn)
    let mut r = vec![Z; mn * mn];
    linalg::zgemm(b'N', b'C', mn, mn, s, Complex64::new(g.d_a(), 0.0), &gm, mn, &gm, mn, Z, &mut r, mn);
    // Hermitize against rounding before the eigensolve.
    for a in 0..mn {
        for b in 0..a {
            let m = 0.5 * (r[a + b * mn] + r[b + a * mn].conj());
            r[a + b * mn] = m;
            r[b + a * mn] = m.conj();
        }
        r[a + a * mn] = Complex64::new(r[a + a * mn].re, 0.0);
    }
    let (lam, v) = linalg::eigh_hermitian(&r, mn)?;
    let eig_max = lam.last().copied().unwrap_or(0.0);
    let eig_min = lam.first().copied().unwrap_or(0.0);
    if !(eig_max > 0.0) {
        return Err(ZakError::Conditioning("lattice-shift Gram is identically zero".into()));
    }
    let floor = 1e-12 * eig_max;
    let clamped = lam.iter().filter(|&&x| x < floor).count();

    // Rm = V diag(lam_clamped^{-1/2}) V^H
    let mut vs = v.clone(); // columns scaled by lam^{-1/2}
    for (col, &x) in lam.iter().enumerate() {
        let sc = 1.0 / x.max(floor).sqrt();
        for rr in 0..mn {
            vs[rr + col * mn] *= sc;
        }
    }
    let mut rm = vec![Z; mn * mn];
    linalg::zgemm(b'N', b'C', mn, mn, mn, one, &vs, mn, &v, mn, Z, &mut rm, mn);

    // Whitened-family Gram deviation: R~ = Rm R Rm^H (Rm Hermitian).
    let mut t = vec![Z; mn * mn];
    linalg::zgemm(b'N', b'N', mn, mn, mn, one, &rm, mn, &r, mn, Z, &mut t, mn);
    let mut rt = vec![Z; mn * mn];
    linalg::zgemm(b'N', b'C', mn, mn, mn, one, &t, mn, &rm, mn, Z, &mut rt, mn);
    let mut dev = 0.0f64;
    for a in 0..mn {
        for b in 0..mn {
            let mut x = rt[a + b * mn];
            if a == b {
                x -= one;
            }
            dev = dev.max(x.norm());
        }
    }

    // Output filter: row (0,0) of G~ = Rm G, i.e. (Rm row 0) G.
    let rm0: Vec<Complex64> = (0..mn).map(|c| rm[c * mn]).collect(); // row 0 = conj of col 0... Rm Hermitian: row 0 = conj(col 0); col-major col c element row 0 is rm[0 + c*mn].
    let mut out = vec![Z; s];
    linalg::zgemm(b'T', b'N', s, 1, mn, one, &gm, mn, &rm0, mn, Z, &mut out, s);
    let mut filter = DDSignal::from_samples(g, out, true)?;
    filter.normalize();

    Ok(LowdinOutcome {
        filter,
        report: GramReport { eig_min, eig_max, clamped, total: mn, whitened_deviation: dev },
    })
}

/// Loewdin orthogonalization returning the `(0,0)` row of the whitened family
/// plus the conditioning report (no failure gate; the public
/// [`super::iota_orthogonalize`] enforces the clamp budget).
pub(crate) fn lowdin(
    w: &DDSignal,
    domain: ShiftDomain,
) -> Result<(DDSignal, GramReport), ZakError> {
    let out = lowdin_core(w, domain)?;
    Ok((out.filter, out.report))
}

/// Conditioning and whitening report of the lattice-shift Gram of `w`: for an
/// already-orthogonal filter the whitened deviation is limited only by
/// eigensolver rounding and no eigenvalue is clamped.
pub fn lattice_gram_report(w: &DDSignal) -> Result<GramReport, ZakError> {
    Ok(lowdin_core(w, ShiftDomain::Torus)?.report)
}

// ---------------------------------------------------------------------------
// Gauss-Newton polish engines
// ---------------------------------------------------------------------------

/// Kronecker-factored inverse of the harmonic-oscillator metric
/// `H = Ht (+) Hn` with `H_axis = diag(x^2) + kappa (-Laplacian)` on the
/// dimensionless axis coordinates (`x` in lattice units, step `1/Q`).
struct HoInverse {
    st: usize,
    sn: usize,
    ut: Vec<f64>,      // St x St eigenvectors, column-major
    un: Vec<f64>,      // Sn x Sn
    lam_inv: Vec<f64>, // (St x Sn) row-major: 1 / (lt_i + ln_j)
}

impl HoInverse {
    fn new(grid: DDGrid, kappa: f64) -> Result<Self, ZakError> {
        let axis = |n: usize| -> Vec<f64> {
            let h = 1.0 / grid.q as f64;
            let mut a = vec![0.0f64; n * n];
            for i in 0..n {
                let x = (i as i64 - (n / 2) as i64) as f64 * h;
                a[i + i * n] = x * x + 2.0 * kappa / (h * h);
                if i + 1 < n {
                    a[i + (i + 1) * n] = -kappa / (h * h);
                    a[(i + 1) + i * n] = -kappa / (h * h);
                }
            }
            a
        };
        let (st, sn) = (grid.st(), grid.sn());
        let (lt, ut) = linalg::eigh_real(&axis(st), st)?;
        let (ln, un) = linalg::eigh_real(&axis(sn), sn)?;
        let mut lam_inv = vec![0.0f64; st * sn];
        for i in 0..st {
            for j in 0..sn {
                lam_inv[i * sn + j] = 1.0 / (lt[i] + ln[j]);
            }
        }
        Ok(Self { st, sn, ut, un, lam_inv })
    }

    /// `H^{-1} v` for a row-major `St x Sn` real field.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let (st, sn) = (self.st, self.sn);
        // column-major copy
        let mut vc = vec![0.0f64; st * sn];
        for i in 0..st {
            for j in 0..sn {
                vc[i + j * st] = v[i * sn + j];
            }
        }
        let mut t1 = vec![0.0f64; st * sn];
        linalg::dgemm(b'T', b'N', st, sn, st, 1.0, &self.ut, st, &vc, st, 0.0, &mut t1, st);
        let mut t2 = vec![0.0f64; st * sn];
        linalg::dgemm(b'N', b'N', st, sn, sn, 1.0, &t1, st, &self.un, sn, 0.0, &mut t2, st);
        for i in 0..st {
            for j in 0..sn {
                t2[i + j * st] *= self.lam_inv[i * sn + j];
            }
        }
        let mut t3 = vec![0.0f64; st * sn];
        linalg::dgemm(b'N', b'N', st, sn, st, 1.0, &self.ut, st, &t2, st, 0.0, &mut t3, st);
        let mut t4 = vec![0.0f64; st * sn];
        linalg::dgemm(b'N', b'T', st, sn, sn, 1.0, &t3, st, &self.un, sn, 0.0, &mut t4, st);
        let mut out = vec![0.0f64; st * sn];
        for i in 0..st {
            for j in 0..sn {
                out[i * sn + j] = t4[i + j * st];
            }
        }
        out
    }
}

/// Residual and Jacobian forms shared by the polish stages. The quadrature
/// form and the shift form are different discrete functionals of the same
/// continuum orthogonality statement and vanish together only at a joint
/// optimum; the `Joint` form stacks both so Gauss-Newton drives them to zero
/// simultaneously.
enum ResidualForm<'a> {
    /// Quadrature-form composite ambiguity over the fundamental window.
    Quadrature,
    /// Lattice-shift inner products over the given shift differences
    /// (origin target applied where the difference is `(0, 0)`).
    Shifts(&'a [(i64, i64)]),
    /// Quadrature rows over the fundamental window stacked with shift rows
    /// over the given differences.
    Joint(&'a [(i64, i64)]),
}

impl ResidualForm<'_> {
    fn needs_matched(&self) -> bool {
        !matches!(self, ResidualForm::Shifts(_))
    }

    fn residual(&self, ws: &Workspace, w: &[Complex64]) -> Vec<Complex64> {
        let quad = |ws: &Workspace| {
            let mut g = ws.amb_quad(w);
            g[0] -= 1.0;
            g
        };
        let shifts = |ws: &Workspace, diffs: &[(i64, i64)]| {
            let mut g = ws.s_resid(w, diffs);
            for (v, &(kk, ll)) in g.iter_mut().zip(diffs.iter()) {
                if kk == 0 && ll == 0 {
                    *v -= 1.0;
                }
            }
            g
        };
        match self {
            ResidualForm::Quadrature => quad(ws),
            ResidualForm::Shifts(diffs) => shifts(ws, diffs),
            ResidualForm::Joint(diffs) => {
                let mut g = quad(ws);
                g.extend(shifts(ws, diffs));
                g
            }
        }
    }

    fn res_max(&self, ws: &Workspace, w: &[Complex64]) -> f64 {
        self.residual(ws, w).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn n_constraints(&self, ws: &Workspace) -> usize {
        match self {
            ResidualForm::Quadrature => ws.grid.mn(),
            ResidualForm::Shifts(diffs) => diffs.len(),
            ResidualForm::Joint(diffs) => ws.grid.mn() + diffs.len(),
        }
    }

    /// Complex Jacobian pair per constraint: `jl = dr/dw`, `jc = dr/dconj(w)`
    /// as dense rows over the cells. The caller combines them per step type.
    fn jacobian_row(
        &self,
        ws: &Workspace,
        w: &[Complex64],
        wt: &[Complex64],
        a: usize,
        jl: &mut [Complex64],
        jc: &mut [Complex64],
    ) {
        jl.fill(Z);
        jc.fill(Z);
        match self {
            ResidualForm::Quadrature => quad_row(ws, w, wt, a, jl, jc),
            ResidualForm::Shifts(diffs) => shift_row(ws, w, diffs[a], jl, jc),
            ResidualForm::Joint(diffs) => {
                let mn = ws.grid.mn();
                if a < mn {
                    quad_row(ws, w, wt, a, jl, jc);
                } else {
                    shift_row(ws, w, diffs[a - mn], jl, jc);
                }
            }
        }
    }
}

/// Jacobian row of the quadrature-form ambiguity at fundamental-window index
/// `a = k N + l` (`wt` is the matched filter of the current iterate).
fn quad_row(
    ws: &Workspace,
    w: &[Complex64],
    wt: &[Complex64],
    a: usize,
    jl: &mut [Complex64],
    jc: &mut [Complex64],
) {
    let g = ws.grid;
    let (oi, oj) = (g.oi() as i64, g.oj() as i64);
    let q = g.q as i64;
    let (k, l) = (a / g.n, a % g.n);
    let ka = fold_rep(k, g.m) * q;
    let la = fold_rep(l, g.n) * q;
    let mut c = 0usize;
    for i in 0..ws.st {
        let ic = i - oi;
        let di = ka - ic;
        for j in 0..ws.sn {
            let jc_ = j - oj;
            let (p2, ph2) = ws.fold(di, la - jc_);
            let coef = ph2 * ws.ph(jc_ * di) * ws.d_a;
            jl[p2] += wt[c] * coef;
            jc[ws.parity[c]] += ws.mfac[c] * coef * w[p2];
            c += 1;
        }
    }
}

/// Jacobian row of the lattice-shift inner product at shift difference
/// `(kk, ll)`.
fn shift_row(
    ws: &Workspace,
    w: &[Complex64],
    (kk, ll): (i64, i64),
    jl: &mut [Complex64],
    jc: &mut [Complex64],
) {
    let g = ws.grid;
    let (oi, oj) = (g.oi() as i64, g.oj() as i64);
    let q = g.q as i64;
    let (ka, la) = (kk * q, ll * q);
    let mut c = 0usize;
    for i in 0..ws.st {
        let ic = i - oi;
        let shift_ph = ws.ph(la * (ic - ka));
        for j in 0..ws.sn {
            let jc_ = j - oj;
            let (p, phf) = ws.fold(ic - ka, jc_ - la);
            let coef = phf * shift_ph * ws.d_a;
            // r_a = sum conj(w[c]) coef w[p]
            jl[p] += w[c].conj() * coef;
            jc[c] += coef * w[p];
            c += 1;
        }
    }
}

/// How the linearized step is solved.
enum StepSolver {
    /// Damped normal equations `(A Aᵀ + mu I) lam = -r`, `mu` relative 1e-12.
    Damped,
    /// Minimum-norm step in the harmonic-oscillator metric.
    Metric(HoInverse),
}

struct PolishConfig {
    label: &'static str,
    solver: StepSolver,
    max_iterations: usize,
    tolerance: f64,
    /// Line-search acceptance: new residual below
    /// `max(old, accept_floor) * accept_slack`.
    accept_floor: f64,
    accept_slack: f64,
    step_floor: f64,
}

/// Optional stderr trace of the polish iterations (set `ZAKOTFS_POLISH_TRACE`).
fn trace(label: &str, iter: usize, res: f64, t: f64) {
    if std::env::var_os("ZAKOTFS_POLISH_TRACE").is_some() {
        eprintln!("polish[{label}] it {iter}: res {res:.6e} step {t}");
    }
}

/// Real-step Gauss-Newton polish: keeps the taps real and even-symmetric and
/// searches over real perturbations. Returns the polished taps.
fn polish_real(
    ws: &Workspace,
    w0: &[Complex64],
    form: &ResidualForm,
    cfg: &PolishConfig,
) -> Result<Vec<Complex64>, ZakError> {
    let s = ws.cells;
    let ncon = form.n_constraints(ws);
    let nr = 2 * ncon;
    let mut w = w0.to_vec();
    ws.symmetrize(&mut w);
    ws.normalize(&mut w);

    let mut jl = vec![Z; s];
    let mut jc = vec![Z; s];
    let mut prev_res = f64::INFINITY;
    let mut stall = 0usize;
    for iter in 0..cfg.max_iterations {
        let r = form.residual(ws, &w);
        let res = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let metric = matches!(cfg.solver, StepSolver::Metric(_));
        if res < cfg.tolerance && !metric {
            break;
        }
        if res > 0.99 * prev_res {
            stall += 1;
            if stall >= 2 {
                break;
            }
        } else {
            stall = 0;
        }
        prev_res = res;

        // Ar (nr x s, column-major): stacked re/im of the real-direction
        // Jacobian jl + jc.
        let wt = if form.needs_matched() { ws.matched(&w) } else { Vec::new() };
        let mut ar = vec![0.0f64; nr * s];
        for a in 0..ncon {
            form.jacobian_row(ws, &w, &wt, a, &mut jl, &mut jc);
            for col in 0..s {
                let v = jl[col] + jc[col];
                ar[a + col * nr] = v.re;
                ar[a + ncon + col * nr] = v.im;
            }
        }
        let mut rr = vec![0.0f64; nr];
        for a in 0..ncon {
            rr[a] = r[a].re;
            rr[a + ncon] = r[a].im;
        }

        let d: Vec<f64> = match &cfg.solver {
            StepSolver::Damped => {
                let mut aat = vec![0.0f64; nr * nr];
                linalg::dgemm(b'N', b'T', nr, nr, s, 1.0, &ar, nr, &ar, nr, 0.0, &mut aat, nr);
                damp(&mut aat, nr);
                let neg_rr: Vec<f64> = rr.iter().map(|x| -x).collect();
                let lam = linalg::solve_spd_real(&aat, nr, &neg_rr, 1)?;
                let mut d = vec![0.0f64; s];
                linalg::dgemm(b'T', b'N', s, 1, nr, 1.0, &ar, nr, &lam, nr, 0.0, &mut d, s);
                d
            }
            StepSolver::Metric(hi) => {
                // Constrained minimum-H-norm iterate: solve
                // (A H^{-1} Aᵀ + mu I) lam = A wr - r, next = H^{-1} Aᵀ lam,
                // step d = next - wr.
                let mut hia = vec![0.0f64; s * nr]; // s x nr, column-major
                let mut row = vec![0.0f64; s];
                for rr_i in 0..nr {
                    for col in 0..s {
                        row[col] = ar[rr_i + col * nr];
                    }
                    let hrow = hi.apply(&row);
                    hia[rr_i * s..(rr_i + 1) * s].copy_from_slice(&hrow);
                }
                let mut aha = vec![0.0f64; nr * nr];
                linalg::dgemm(b'N', b'N', nr, nr, s, 1.0, &ar, nr, &hia, s, 0.0, &mut aha, nr);
                damp(&mut aha, nr);
                let wr: Vec<f64> = w.iter().map(|v| v.re).collect();
                let mut rhs = vec![0.0f64; nr];
                linalg::dgemm(b'N', b'N', nr, 1, s, 1.0, &ar, nr, &wr, s, 0.0, &mut rhs, nr);
                for a in 0..nr {
                    rhs[a] -= rr[a];
                }
                let lam = linalg::solve_spd_real(&aha, nr, &rhs, 1)?;
                let mut next = vec![0.0f64; s];
                linalg::dgemm(b'N', b'N', s, 1, nr, 1.0, &hia, s, &lam, nr, 0.0, &mut next, s);
                for c in 0..s {
                    next[c] -= wr[c];
                }
                next
            }
        };

        // Backtracking line search on the residual itself.
        let mut t = 1.0f64;
        let mut cand = w.clone();
        loop {
            for c in 0..s {
                cand[c] = Complex64::new(w[c].re + t * d[c], 0.0);
            }
            ws.symmetrize(&mut cand);
            let rn = form.res_max(ws, &cand);
            if rn < res.max(cfg.accept_floor) * cfg.accept_slack || t <= cfg.step_floor {
                break;
            }
            t /= 2.0;
        }
        trace(cfg.label, iter, res, t);
        w = cand;
    }
    ws.normalize(&mut w);
    Ok(w)
}

fn damp(aat: &mut [f64], n: usize) {
    let tr: f64 = (0..n).map(|i| aat[i + i * n]).sum();
    let mu = 1e-12 * tr / n as f64;
    for i in 0..n {
        aat[i + i * n] += mu;
    }
}

/// Solves `M x = -b` through the truncated eigen-pseudoinverse of symmetric
/// positive semidefinite `M`.
fn pinv_solve_neg(m: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>, ZakError> {
    let (lam, u) = linalg::eigh_real(m, n)?;
    let cut = lam.last().copied().unwrap_or(0.0) * 1e-12;
    let mut ub = vec![0.0f64; n];
    linalg::dgemm(b'T', b'N', n, 1, n, -1.0, &u, n, b, n, 0.0, &mut ub, n);
    for (x, &l) in ub.iter_mut().zip(lam.iter()) {
        *x = if l > cut { *x / l } else { 0.0 };
    }
    let mut out = vec![0.0f64; n];
    linalg::dgemm(b'N', b'N', n, 1, n, 1.0, &u, n, &ub, n, 0.0, &mut out, n);
    Ok(out)
}

/// Complex-step joint polish: drives the quadrature rows and the
/// lattice-shift inner products over half the fundamental window to zero with
/// truncated pseudoinverse steps. Used for the sinc filter (whose optimum is
/// genuinely complex) and as a fallback when the real-restricted IOTA polish
/// stalls (coarse grids can lack a nearby real solution).
pub(crate) fn polish_complex_joint(
    proto: &DDSignal,
    label: &'static str,
) -> Result<DDSignal, ZakError> {
    let ws = Workspace::new(proto.grid);
    let diffs = fundamental_half_diffs(proto.grid);
    if diffs.is_empty() {
        // 1 x 1 lattice: any unit-energy filter is trivially orthogonal.
        let mut w = proto.clone();
        w.normalize();
        return Ok(w);
    }
    let s = ws.cells;
    let form = ResidualForm::Joint(&diffs);
    let ncon = form.n_constraints(&ws);
    let nr = 2 * ncon;
    let mut w: Vec<Complex64> = proto.samples.clone();

    let mut jl = vec![Z; s];
    let mut jc = vec![Z; s];
    for iter in 0..25 {
        let r = form.residual(&ws, &w);
        let res = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if res < 1e-12 {
            break;
        }
        // A_ = [jl + jc, i (jl - jc)] over (Re dw, Im dw): 2S real columns.
        let wt = ws.matched(&w);
        let mut ar = vec![0.0f64; nr * 2 * s];
        for a in 0..ncon {
            form.jacobian_row(&ws, &w, &wt, a, &mut jl, &mut jc);
            for col in 0..s {
                let v1 = jl[col] + jc[col];
                let v2 = Complex64::new(0.0, 1.0) * (jl[col] - jc[col]);
                ar[a + col * nr] = v1.re;
                ar[a + ncon + col * nr] = v1.im;
                ar[a + (s + col) * nr] = v2.re;
                ar[a + ncon + (s + col) * nr] = v2.im;
            }
        }
        let mut rr = vec![0.0f64; nr];
        for a in 0..ncon {
            rr[a] = r[a].re;
            rr[a + ncon] = r[a].im;
        }
        let mut aat = vec![0.0f64; nr * nr];
        linalg::dgemm(b'N', b'T', nr, nr, 2 * s, 1.0, &ar, nr, &ar, nr, 0.0, &mut aat, nr);
        let lam = pinv_solve_neg(&aat, nr, &rr)?;
        let mut d = vec![0.0f64; 2 * s];
        linalg::dgemm(b'T', b'N', 2 * s, 1, nr, 1.0, &ar, nr, &lam, nr, 0.0, &mut d, 2 * s);

        let mut t = 1.0f64;
        let mut cand = w.clone();
        loop {
            for c in 0..s {
                cand[c] = w[c] + t * Complex64::new(d[c], d[s + c]);
            }
            let rn = form.res_max(&ws, &cand);
            if rn < res.max(5e-13) * 1.001 || t <= 1e-4 {
                break;
            }
            t /= 2.0;
        }
        trace(label, iter, res, t);
        w = cand;
    }
    ws.normalize(&mut w);
    DDSignal::from_samples(proto.grid, w, true)
}

/// Polish pipeline for an already well-conditioned Loewdin output (the
/// IOTA-Gaussian path): quadrature-form stage, fundamental-window shift
/// stage, then a joint stage over both residual forms.
pub(crate) fn polish_orthogonal_pipeline(
    w0: &DDSignal,
    budget: &IotaBudget,
) -> Result<DDSignal, ZakError> {
    let ws = Workspace::new(w0.grid);
    let damped = |label: &'static str, max_iterations: usize| PolishConfig {
        label,
        solver: StepSolver::Damped,
        max_iterations,
        tolerance: budget.tolerance,
        accept_floor: 1e-9,
        accept_slack: 1.01,
        step_floor: 1e-3,
    };
    let w1 = polish_real(
        &ws,
        &w0.samples,
        &ResidualForm::Quadrature,
        &damped("ig-quad", budget.polish_iterations.min(12)),
    )?;
    let fund = fundamental_diffs(w0.grid);
    let w2 = polish_real(
        &ws,
        &w1,
        &ResidualForm::Shifts(&fund),
        &damped("ig-fund", budget.polish_iterations.min(10)),
    )?;
    // Final joint stage: drive the quadrature form and the fundamental-window
    // shift form to zero together (they coincide only at a joint optimum).
    let form = ResidualForm::Joint(&fund);
    let w3 = polish_real(&ws, &w2, &form, &damped("ig-joint", budget.polish_iterations.max(25)))?;
    let out = DDSignal::from_samples(w0.grid, w3, true)?;
    // The real-restricted polish can stall on coarse grids where the joint
    // optimum has no nearby real representative; finish with complex steps.
    if form.res_max(&ws, &out.samples) > 1e-6 {
        return polish_complex_joint(&out, "ig-cx");
    }
    Ok(out)
}

/// Conditioning-repair pipeline for the IOTA-PSWF prototype: clamped Loewdin
/// initial guess, harmonic-oscillator-metric polish (restores concentration
/// lost to clamping while enforcing orthogonality), then plain polish stages.
pub(crate) fn repair_pipeline(
    proto: &DDSignal,
    budget: &IotaBudget,
) -> Result<DDSignal, ZakError> {
    let ws = Workspace::new(proto.grid);
    let (guess, _) = lowdin(proto, ShiftDomain::Torus)?;
    let metric = StepSolver::Metric(HoInverse::new(proto.grid, 0.1)?);
    let cfg_metric = PolishConfig {
        label: "ip-metric",
        solver: metric,
        max_iterations: budget.metric_iterations,
        tolerance: budget.tolerance,
        accept_floor: 1e-9,
        accept_slack: 1.01,
        step_floor: 1e-3,
    };
    let w1 = polish_real(&ws, &guess.samples, &ResidualForm::Quadrature, &cfg_metric)?;
    let cfg = PolishConfig {
        label: "ip-quad",
        solver: StepSolver::Damped,
        max_iterations: budget.polish_iterations,
        tolerance: budget.tolerance,
        accept_floor: 1e-9,
        accept_slack: 1.01,
        step_floor: 1e-3,
    };
    let w2 = polish_real(&ws, &w1, &ResidualForm::Quadrature, &cfg)?;
    let fund = fundamental_diffs(proto.grid);
    let cfg_fund = PolishConfig { label: "ip-fund", ..cfg };
    let w3 = polish_real(&ws, &w2, &ResidualForm::Shifts(&fund), &cfg_fund)?;
    DDSignal::from_samples(proto.grid, w3, true)
}

/// Short fundamental-window polish applied after the final Loewdin pass of
/// the IOTA-PSWF pipeline (the pass itself is a near-identity map on an
/// orthogonal filter; this removes its last-digit drift).
pub(crate) fn polish_final(w0: &DDSignal, budget: &IotaBudget) -> Result<DDSignal, ZakError> {
    let ws = Workspace::new(w0.grid);
    let fund = fundamental_diffs(w0.grid);
    let cfg = PolishConfig {
        label: "final",
        solver: StepSolver::Damped,
        max_iterations: budget.polish_iterations.min(6),
        tolerance: budget.tolerance,
        accept_floor: 1e-9,
        accept_slack: 1.01,
        step_floor: 1e-3,
    };
    let w = polish_real(&ws, &w0.samples, &ResidualForm::Shifts(&fund), &cfg)?;
    DDSignal::from_samples(w0.grid, w, true)
}
