//! Dense sampling of the self-ambiguity over a rectangular window of
//! delay-Doppler offsets, computed with FFT correlations along the Doppler
//! axis.
//!
//! The effective-channel construction needs the composite ambiguity not only
//! on the information lattice but at every integer grid offset reached by a
//! physical path delay/Doppler combined with a lattice shift. Evaluating
//! `A(yi, yj) = <w, S_(yi, yj) w> dA` directly costs `O(S)` per offset; here
//! the Doppler axis (which shifts cyclically without phase) is handled as one
//! cyclic cross-correlation per delay row, so a full window costs
//! `O(rows St Sn log Sn)`.

use crate::ddcore::DDSignal;
use crate::{cis_turns, ZakError};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::ops::Range;

/// Self-ambiguity samples on `yi x yj` (integer grid offsets, row-major).
#[derive(Debug, Clone)]
pub struct AmbiguityWindow {
    pub yi_start: i64,
    pub yj_start: i64,
    pub rows: usize,
    pub cols: usize,
    data: Vec<Complex64>,
}

impl AmbiguityWindow {
    /// Ambiguity at offset `(yi, yj)` grid cells; `None` outside the window.
    pub fn get(&self, yi: i64, yj: i64) -> Option<Complex64> {
        let r = yi - self.yi_start;
        let c = yj - self.yj_start;
        if r < 0 || c < 0 || r >= self.rows as i64 || c >= self.cols as i64 {
            return None;
        }
        Some(self.data[r as usize * self.cols + c as usize])
    }

    /// Panicking accessor for offsets known to lie inside the window.
    pub fn at(&self, yi: i64, yj: i64) -> Complex64 {
        self.get(yi, yj).expect("ambiguity offset outside the computed window")
    }
}

/// Computes `A(yi, yj) = <w, S_(yi, yj) w> dA` for every offset in the given
/// ranges, where `S` is the quasi-periodic shift by `(yi, yj)` grid cells
/// with the crate's delay-wrap phase convention.
pub fn ambiguity_window(
    w: &DDSignal,
    yi: Range<i64>,
    yj: Range<i64>,
) -> Result<AmbiguityWindow, ZakError> {
    if yi.is_empty() || yj.is_empty() {
        return Err(ZakError::InvalidArgument("empty ambiguity window".into()));
    }
    let g = w.grid;
    let (st, sn) = (g.st() as i64, g.sn() as i64);
    let (oi, oj) = (g.oi() as i64, g.oj() as i64);
    let l_tot = g.cells();
    let phase: Vec<Complex64> =
        (0..l_tot).map(|k| cis_turns(k as f64 / l_tot as f64)).collect();
    let ph = |k: i64| phase[k.rem_euclid(l_tot as i64) as usize];

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(sn as usize);
    let inv = planner.plan_fft_inverse(sn as usize);

    // Row-wise forward transforms of conj(w).
    let mut fw = vec![Complex64::new(0.0, 0.0); (st * sn) as usize];
    for i in 0..st as usize {
        let row = &mut fw[i * sn as usize..(i + 1) * sn as usize];
        for (j, v) in row.iter_mut().enumerate() {
            *v = w.at(i, j).conj();
        }
        fwd.process(row);
    }

    let rows = yi.clone().count();
    let cols = yj.clone().count();
    let yj_list: Vec<i64> = yj.clone().collect();
    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
    let mut vrow = vec![Complex64::new(0.0, 0.0); sn as usize];
    let mut inner = vec![Complex64::new(0.0, 0.0); sn as usize];
    let sn_inv = 1.0 / sn as f64;

    for (ii, yi_v) in yi.clone().enumerate() {
        let out = &mut data[ii * cols..(ii + 1) * cols];
        for i in 0..st {
            let ic = i - oi;
            // Quasi-periodic fold of the delay shift: row index and wrap phase.
            let shifted = ic - yi_v;
            let n = (shifted + oi).div_euclid(st);
            let pi = (shifted + oi - n * st) as usize;
            for j in 0..sn {
                let jc = j - oj;
                // conj(V[i, j]) with V = phase-wrapped shifted row of w
                vrow[j as usize] =
                    (w.at(pi, j as usize) * ph(n * jc * st)).conj();
            }
            fwd.process(&mut vrow);
            for (m, v) in inner.iter_mut().enumerate() {
                *v = fw[i as usize * sn as usize + m] * vrow[m].conj();
            }
            inv.process(&mut inner);
            for (jj, &yj_v) in yj_list.iter().enumerate() {
                let m = yj_v.rem_euclid(sn) as usize;
                out[jj] += inner[m] * sn_inv * ph(yj_v * (ic - yi_v));
            }
        }
        for v in out.iter_mut() {
            *v *= g.d_a();
        }
    }

    Ok(AmbiguityWindow {
        yi_start: yi.start,
        yj_start: yj.start,
        rows,
        cols,
        data,
    })
}
