//! Order-0 prolate spheroidal wave functions for the separable PSWF
//! prototype.
//!
//! Each axis solves the classic concentration problem on `[-1/2, 1/2]` with
//! bandwidth parameter `c` (`c = M` for the delay axis, `c = N` for the
//! Doppler axis): the top eigenfunction of the kernel
//! `K(t, t') = c sinc(c (t - t'))`. The kernel spectrum plunges from ~1 to ~0
//! around index `c`, so the top eigenvalues cluster exponentially close to 1
//! and the eigenvectors returned by a dense eigensolver are numerically
//! degenerate. The standard cure is used: restrict the commuting prolate
//! differential operator `d/ds (1 - s^2) d/ds - (pi c / 2)^2 s^2` (whose
//! spectrum is well separated) to the kernel's near-degenerate top eigenspace
//! and take its top eigenvector there. The Nystroem midpoint rule both
//! discretizes the kernel and provides the band-limited interpolation used to
//! evaluate the function on the oversampled grid.

use crate::ddcore::DDSignal;
use crate::grid::DDGrid;
use crate::linalg;
use crate::ZakError;
use num_complex::Complex64;

/// `sin(pi x) / (pi x)`.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Diagnostics of one axis eigenproblem.
#[derive(Debug, Clone, Copy)]
pub struct PswfAxisSolution {
    /// Bandwidth parameter `c` of the axis.
    pub c: f64,
    /// Concentration eigenvalue of the order-0 function (Rayleigh quotient
    /// against the sinc kernel; approaches 1 for large `c`).
    pub concentration: f64,
    /// Relative gap between the top two eigenvalues of the commuting prolate
    /// operator restricted to the kernel's top eigenspace.
    pub separation: f64,
    /// Relative kernel eigen-residual `|K v - lambda v| / (lambda |v|)`.
    pub residual: f64,
}

/// Diagnostics of the two-axis PSWF prototype solve.
#[derive(Debug, Clone, Copy)]
pub struct PswfSolution {
    pub quadrature_order: usize,
    pub delay: PswfAxisSolution,
    pub doppler: PswfAxisSolution,
}

struct Axis {
    c: f64,
    h: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    lambda0: f64,
    info: PswfAxisSolution,
}

impl Axis {
    /// Band-limited Nystroem extension of the eigenfunction to arbitrary `x`.
    fn eval(&self, x: f64) -> f64 {
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| sinc(self.c * (x - t)) * v)
            .sum();
        self.c * s * self.h / self.lambda0
    }
}

fn pswf_axis(c: f64, k: usize) -> Result<Axis, ZakError> {
    let h = 1.0 / k as f64;
    let nodes: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) * h - 0.5).collect();

    // Nystroem discretization of the sinc kernel (symmetric, column-major).
    let mut km = vec![0.0f64; k * k];
    for j in 0..k {
        for i in 0..k {
            km[i + j * k] = c * sinc(c * (nodes[i] - nodes[j])) * h;
        }
    }
    let (lam, u) = linalg::eigh_real(&km, k)?;

    // Near-degenerate top eigenspace: every eigenvalue above 1/2, at least 3.
    let r = lam.iter().filter(|&&x| x > 0.5).count().max(3).min(k);
    // Columns k-r .. k (ascending order), i.e. the top-r eigenvectors.
    let u_top = &u[(k - r) * k..];

    // Commuting prolate operator on s = 2 t: P = d/ds (1 - s^2) d/ds - cc s^2
    // with cc = (pi c / 2)^2, conservative finite differences.
    let hs = 2.0 * h;
    let cc = (std::f64::consts::PI * c / 2.0).powi(2);
    let mut p = vec![0.0f64; k * k];
    for i in 0..k {
        let s = 2.0 * nodes[i];
        if i + 1 < k {
            let sm = (s + 2.0 * nodes[i + 1]) / 2.0;
            let a = (1.0 - sm * sm) / (hs * hs);
            p[i + (i + 1) * k] += a;
            p[i + i * k] -= a;
        }
        if i > 0 {
            let sm = (s + 2.0 * nodes[i - 1]) / 2.0;
            let a = (1.0 - sm * sm) / (hs * hs);
            p[i + (i - 1) * k] += a;
            p[i + i * k] -= a;
        }
        p[i + i * k] -= cc * s * s;
    }

    // A = U^T P U on the top eigenspace, then its top eigenvector.
    let mut pu = vec![0.0f64; k * r];
    linalg::dgemm(b'N', b'N', k, r, k, 1.0, &p, k, u_top, k, 0.0, &mut pu, k);
    let mut a = vec![0.0f64; r * r];
    linalg::dgemm(b'T', b'N', r, r, k, 1.0, u_top, k, &pu, k, 0.0, &mut a, r);
    let (alam, av) = linalg::eigh_real(&a, r)?;
    let top = &av[(r - 1) * r..r * r];
    let scale = alam[r - 1].abs().max(1.0);
    let separation = (alam[r - 1] - alam[r - 2]) / scale;
    if separation <= 1e-6 {
        return Err(ZakError::Conditioning(format!(
            "prolate operator top eigenvalues not separated (gap {separation:.3e} at c = {c}); \
             increase the quadrature order"
        )));
    }
    let mut values = vec![0.0f64; k];
    linalg::dgemm(b'N', b'N', k, 1, r, 1.0, u_top, k, top, r, 0.0, &mut values, k);

    // Concentration eigenvalue by Rayleigh quotient against the kernel.
    let mut kv = vec![0.0f64; k];
    linalg::dgemm(b'N', b'N', k, 1, k, 1.0, &km, k, &values, k, 0.0, &mut kv, k);
    let vv: f64 = values.iter().map(|v| v * v).sum();
    let lambda0 = values.iter().zip(&kv).map(|(a, b)| a * b).sum::<f64>() / vv;
    let residual = values
        .iter()
        .zip(&kv)
        .map(|(&v, &w)| (w - lambda0 * v).powi(2))
        .sum::<f64>()
        .sqrt()
        / (lambda0 * vv.sqrt());

    // Unit quadrature norm, positive at the origin (k is even, so the two
    // middle nodes straddle t = 0).
    let nrm = (vv * h).sqrt();
    let mid = values[k / 2 - 1] + values[k / 2];
    let sign = if mid < 0.0 { -1.0 } else { 1.0 };
    for v in values.iter_mut() {
        *v *= sign / nrm;
    }

    Ok(Axis {
        c,
        h,
        nodes,
        values,
        lambda0,
        info: PswfAxisSolution { c, concentration: lambda0, separation, residual },
    })
}

/// Separable PSWF prototype on the oversampled grid: the order-0 delay PSWF
/// (`c = M`) evaluated at `tau / tau_p` times the order-0 Doppler PSWF
/// (`c = N`) at `nu / nu_p`, unit energy.
pub(crate) fn pswf_prototype(
    grid: DDGrid,
    quadrature_order: usize,
) -> Result<(DDSignal, PswfSolution), ZakError> {
    if quadrature_order < 64 {
        return Err(ZakError::InvalidArgument(format!(
            "PSWF quadrature order must be at least 64, got {quadrature_order}"
        )));
    }
    let delay = pswf_axis(grid.m as f64, quadrature_order)?;
    let doppler = pswf_axis(grid.n as f64, quadrature_order)?;

    let (st, sn) = (grid.st(), grid.sn());
    let (oi, oj) = (grid.oi() as i64, grid.oj() as i64);
    let ev_d: Vec<f64> = (0..st as i64)
        .map(|i| delay.eval((i - oi) as f64 / st as f64))
        .collect();
    let ev_p: Vec<f64> = (0..sn as i64)
        .map(|j| doppler.eval((j - oj) as f64 / sn as f64))
        .collect();

    let mut samples = Vec::with_capacity(grid.cells());
    for &a in &ev_d {
        for &b in &ev_p {
            samples.push(Complex64::new(a * b, 0.0));
        }
    }
    let mut w = DDSignal::from_samples(grid, samples, true)?;
    w.normalize();
    Ok((
        w,
        PswfSolution { quadrature_order, delay: delay.info, doppler: doppler.info },
    ))
}
