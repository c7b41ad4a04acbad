//! Delay-Doppler grid geometry.
//!
//! A Zak-OTFS frame lives on a delay-Doppler torus with delay period `tau_p`
//! and Doppler period `nu_p`, `tau_p * nu_p = 1`. The information lattice has
//! `M` delay bins of width `1/B` (`B = M * nu_p`) and `N` Doppler bins of width
//! `1/T` (`T = N * tau_p`), and every lattice bin is oversampled by a factor
//! `Q` along each axis, giving an `(M*Q) x (N*Q)` sample grid with steps
//! `delta_tau = 1/(B*Q)` and `delta_nu = 1/(T*Q)`.

use crate::ZakError;

/// Lattice and oversampled-grid geometry. All derived quantities are computed
/// once from `(M, N, nu_p, Q)` and the struct is immutable afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DDGrid {
    /// Delay bins per period.
    pub m: usize,
    /// Doppler bins per period.
    pub n: usize,
    /// Oversampling factor per lattice bin (same along delay and Doppler).
    pub q: usize,
    /// Doppler period [Hz].
    pub nu_p: f64,
    /// Delay period [s], `1/nu_p`.
    pub tau_p: f64,
    /// Bandwidth [Hz], `M * nu_p`.
    pub b: f64,
    /// Duration [s], `N * tau_p`.
    pub t: f64,
    /// Oversampled delay step [s], `1/(B*Q)`.
    pub delta_tau: f64,
    /// Oversampled Doppler step [Hz], `1/(T*Q)`.
    pub delta_nu: f64,
}

impl DDGrid {
    /// Oversampled rows (delay samples per period), `M*Q`.
    #[inline]
    pub fn st(&self) -> usize {
        self.m * self.q
    }

    /// Oversampled columns (Doppler samples per period), `N*Q`.
    #[inline]
    pub fn sn(&self) -> usize {
        self.n * self.q
    }

    /// Total oversampled cells per fundamental domain, `M*N*Q^2`.
    #[inline]
    pub fn cells(&self) -> usize {
        self.st() * self.sn()
    }

    /// Lattice points per frame, `M*N`.
    #[inline]
    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    /// Centered-domain delay offset: row `oi` holds delay coordinate 0.
    #[inline]
    pub fn oi(&self) -> usize {
        self.st() / 2
    }

    /// Centered-domain Doppler offset: column `oj` holds Doppler coordinate 0.
    #[inline]
    pub fn oj(&self) -> usize {
        self.sn() / 2
    }

    /// Quadrature cell area, `delta_tau * delta_nu = 1/(M*N*Q^2)`.
    #[inline]
    pub fn d_a(&self) -> f64 {
        self.delta_tau * self.delta_nu
    }
}

/// Builds a [`DDGrid`] from the four free parameters.
///
/// # Errors
/// Rejects zero `M`, `N`, `Q` and non-positive `nu_p`.
pub fn make_grid(m: usize, n: usize, nu_p: f64, q: usize) -> Result<DDGrid, ZakError> {
    if m == 0 || n == 0 || q == 0 {
        return Err(ZakError::InvalidArgument(format!(
            "grid dimensions must be positive (got M={m}, N={n}, Q={q})"
        )));
    }
    if !(nu_p > 0.0) || !nu_p.is_finite() {
        return Err(ZakError::InvalidArgument(format!(
            "Doppler period must be positive and finite (got {nu_p})"
        )));
    }
    let tau_p = 1.0 / nu_p;
    let b = m as f64 * nu_p;
    let t = n as f64 * tau_p;
    Ok(DDGrid {
        m,
        n,
        q,
        nu_p,
        tau_p,
        b,
        t,
        delta_tau: 1.0 / (b * q as f64),
        delta_nu: 1.0 / (t * q as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn paper_grid() {
        let g = make_grid(17, 19, 30e3, 8).unwrap();
        assert_relative_eq!(g.b, 510e3);
        assert_relative_eq!(g.tau_p, 33.333333333333336e-6, max_relative = 1e-12);
        assert_relative_eq!(g.t, 633.3333333333334e-6, max_relative = 1e-12);
        assert_relative_eq!(g.tau_p * g.nu_p, 1.0, max_relative = 1e-12);
        assert_relative_eq!(g.b * g.t, (17 * 19) as f64, max_relative = 1e-12);
        assert_relative_eq!(
            g.delta_tau * g.delta_nu,
            1.0 / (17.0 * 19.0 * 64.0),
            max_relative = 1e-12
        );
        assert_eq!((g.st(), g.sn()), (136, 152));
        assert_eq!((g.oi(), g.oj()), (68, 76));
    }

    #[test]
    fn trivial_grid() {
        let g = make_grid(1, 1, 1.0, 1).unwrap();
        assert_relative_eq!(g.b, 1.0);
        assert_relative_eq!(g.t, 1.0);
        assert_relative_eq!(g.tau_p, 1.0);
    }

    #[test]
    fn derived_grid() {
        let g = make_grid(4, 3, 1e3, 4).unwrap();
        assert_relative_eq!(g.b, 4e3);
        assert_relative_eq!(g.t, 3e-3);
        assert_relative_eq!(g.delta_tau, 62.5e-6, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(make_grid(0, 3, 1.0, 1).is_err());
        assert!(make_grid(3, 0, 1.0, 1).is_err());
        assert!(make_grid(3, 3, 1.0, 0).is_err());
        assert!(make_grid(3, 3, 0.0, 1).is_err());
        assert!(make_grid(3, 3, -1.0, 1).is_err());
    }
}
