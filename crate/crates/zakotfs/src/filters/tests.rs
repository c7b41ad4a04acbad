use super::*;
use crate::ddcore::zak_inverse;
use crate::grid::make_grid;
use approx::assert_abs_diff_eq;

fn paper_grid() -> DDGrid {
    make_grid(17, 19, 30e3, 8).unwrap()
}

fn small_grid() -> DDGrid {
    make_grid(3, 5, 30e3, 2).unwrap()
}

fn max_tap_diff(a: &DDSignal, b: &DDSignal) -> f64 {
    a.samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn folded_sinc_interpolates_integers() {
    // At integer offsets inside one period the periodized sinc is the
    // Kronecker comb (theta = 0, odd period: no boundary terms).
    for p in [3usize, 5, 17] {
        assert_abs_diff_eq!(folded_sinc_1d(p, 0.0, 0.0).re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(folded_sinc_1d(p, 0.0, 0.0).im, 0.0, epsilon = 1e-12);
        for m in 1..p {
            assert!(folded_sinc_1d(p, m as f64, 0.0).norm() < 1e-12);
        }
        // Periodicity with the quasi-periodic phase.
        let th = 0.37;
        let a = folded_sinc_1d(p, 0.25, th);
        let b = folded_sinc_1d(p, 0.25 + p as f64, th) * cis_turns(-th);
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn rrc_point_limits_and_beta_zero() {
    let pi = std::f64::consts::PI;
    // Removable singularity at the origin.
    assert_abs_diff_eq!(rrc_point(0.0, 0.6), 1.0 + 0.6 * (4.0 / pi - 1.0), epsilon = 1e-12);
    // Continuity across |4 beta x| = 1.
    let x0 = 1.0 / (4.0 * 0.6);
    let lim = rrc_point(x0, 0.6);
    assert!((rrc_point(x0 - 1e-7, 0.6) - lim).abs() < 1e-5);
    assert!((rrc_point(x0 + 1e-7, 0.6) - lim).abs() < 1e-5);
    // beta = 0 reduces to sinc pointwise.
    for &x in &[0.0, 0.3, 1.0, 2.7, -4.2] {
        assert_abs_diff_eq!(rrc_point(x, 0.0), sinc(x), epsilon = 1e-14);
    }
}

#[test]
fn rrc_zero_beta_is_sinc_filter() {
    let g = small_grid();
    let s = sinc_filter(g).unwrap();
    let r = rrc_filter(g, 0.0, 0.0).unwrap();
    assert!(max_tap_diff(&s.taps, &r.taps) < 1e-12);
    assert_eq!(r.family, FilterFamily::RootRaisedCosine { beta_tau: 0.0, beta_nu: 0.0 });
}

#[test]
fn rrc_rejects_beta_outside_range() {
    let g = small_grid();
    assert!(rrc_filter(g, -0.1, 0.5).is_err());
    assert!(rrc_filter(g, 0.5, 1.2).is_err());
    assert!(gaussian_filter(g, 0.0, 1.0).is_err());
    assert!(gaussian_sinc_filter(g, -1.0, 0.0, 1.0, 1.0).is_err());
    assert!(gaussian_sinc_filter(g, 0.1, 0.1, 0.0, 1.0).is_err());
}

#[test]
fn analytic_filters_unit_energy_and_even() {
    let g = paper_grid();
    let filters = [
        rrc_filter(g, 0.6, 0.6).unwrap(),
        gaussian_filter(g, 1.584, 1.584).unwrap(),
        gaussian_sinc_filter(g, 0.044, 0.044, 1.0278, 1.0278).unwrap(),
    ];
    for f in &filters {
        assert_abs_diff_eq!(f.taps.energy(), 1.0, epsilon = 1e-9);
        // |w| is even about the centered origin wherever the reflection stays
        // on the grid.
        let (oi, oj) = (g.oi(), g.oj());
        for i in 1..g.st() {
            for j in 1..g.sn() {
                let r = f.taps.at(2 * oi - i, 2 * oj - j).norm();
                assert_abs_diff_eq!(f.taps.at(i, j).norm(), r, epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn sinc_filter_is_lattice_orthogonal_small() {
    let g = small_grid();
    let f = sinc_filter(g).unwrap();
    let amb = composite_ambiguity(&f);
    assert_abs_diff_eq!(amb.at(0, 0).re, 1.0, epsilon = 1e-9);
    assert!(off_origin_max(&amb) < 1e-9);
}

#[test]
fn gaussian_is_not_lattice_orthogonal() {
    let g = paper_grid();
    let f = gaussian_filter(g, 1.584, 1.584).unwrap();
    assert!(off_origin_max(&composite_ambiguity(&f)) > 1e-2);
}

#[test]
fn matched_filter_is_an_involution_on_interior_cells() {
    // The matched operation swaps the quasi-periodicity structure (its output
    // is plain-periodic in delay and phase-wrapped in Doppler), so the
    // fundamental-domain involution identity holds exactly on cells whose
    // reflection stays inside the domain; the unpaired edge row/column reads
    // through the wrong extension and is excluded.
    let g = small_grid();
    for f in [
        gaussian_filter(g, 1.584, 1.584).unwrap(),
        sinc_filter(g).unwrap(),
    ] {
        let m = matched_filter(&f);
        assert_abs_diff_eq!(m.taps.energy(), f.taps.energy(), epsilon = 1e-12);
        let mm = matched_filter(&m);
        for i in 1..g.st() {
            for j in 1..g.sn() {
                assert!((mm.taps.at(i, j) - f.taps.at(i, j)).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn ambiguity_window_matches_direct_quadrature() {
    let g = small_grid();
    let w = &gaussian_filter(g, 1.0, 1.3).unwrap().taps;
    let win = ambiguity_window(w, -4..7, -6..6).unwrap();
    let l_tot = g.cells() as f64;
    for yi in -4i64..7 {
        for yj in -6i64..6 {
            let mut acc = Z;
            for i in 0..g.st() {
                let ic = i as i64 - g.oi() as i64;
                for j in 0..g.sn() {
                    let jc = j as i64 - g.oj() as i64;
                    acc += w.at(i, j).conj()
                        * w.qp_at(ic - yi, jc - yj)
                        * cis_turns((yj * (ic - yi)) as f64 / l_tot);
                }
            }
            acc *= g.d_a();
            assert!(
                (acc - win.at(yi, yj)).norm() < 1e-12,
                "window mismatch at ({yi}, {yj})"
            );
        }
    }
    assert!(win.get(7, 0).is_none());
    assert!(win.get(0, -7).is_none());
}

#[test]
fn ambiguity_window_origin_is_energy() {
    let g = small_grid();
    let w = &gaussian_sinc_filter(g, 0.044, 0.044, 1.0278, 1.0278).unwrap().taps;
    let win = ambiguity_window(w, 0..1, 0..1).unwrap();
    assert_abs_diff_eq!(win.at(0, 0).re, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(win.at(0, 0).im, 0.0, epsilon = 1e-12);
}

#[test]
fn lowdin_whitens_the_shift_family() {
    let g = small_grid();
    let proto = gaussian_filter(g, 1.584, 1.584).unwrap();
    let before = off_origin_max(&composite_ambiguity(&proto));
    let ortho = iota_orthogonalize(&proto, g).unwrap();
    let after = off_origin_max(&composite_ambiguity(&ortho));
    assert!(after < before, "Loewdin should reduce the ambiguity residual");
    let report = lattice_gram_report(&proto.taps).unwrap();
    assert_eq!(report.clamped, 0);
    assert!(report.eig_min > 0.0 && report.eig_max >= report.eig_min);
    // The whitened-family Gram is the identity up to eigensolver rounding.
    assert!(report.whitened_deviation < 1e-8);
}

#[test]
fn iota_gaussian_small_grid_orthogonal() {
    let g = small_grid();
    let f = iota_gaussian_filter(g).unwrap();
    assert_eq!(f.family, FilterFamily::IotaGaussian);
    assert!(off_origin_max(&composite_ambiguity(&f)) < 1e-8);
    assert_abs_diff_eq!(f.taps.energy(), 1.0, epsilon = 1e-9);
}

#[test]
fn pswf_prototype_is_sane() {
    let g = paper_grid();
    let (f, sol) = pswf_filter(g, 128).unwrap();
    assert_abs_diff_eq!(f.taps.energy(), 1.0, epsilon = 1e-9);
    // Order-0 concentration approaches 1 exponentially in c.
    assert!(sol.delay.concentration > 0.99 && sol.delay.concentration <= 1.0 + 1e-9);
    assert!(sol.doppler.concentration > 0.99);
    assert!(sol.delay.separation > 1e-6 && sol.doppler.separation > 1e-6);
    assert!(sol.delay.residual < 1e-6 && sol.doppler.residual < 1e-6);
    // Real and positive at the center, even magnitude.
    let c = f.taps.at(g.oi(), g.oj());
    assert!(c.re > 0.0 && c.im.abs() < 1e-12);
    for i in 1..g.st() {
        let r = f.taps.at(2 * g.oi() - i, g.oj()).norm();
        assert_abs_diff_eq!(f.taps.at(i, g.oj()).norm(), r, epsilon = 1e-9);
    }
}

#[test]
fn pswf_rejects_low_quadrature_order() {
    assert!(matches!(
        pswf_filter(paper_grid(), 32),
        Err(ZakError::InvalidArgument(_))
    ));
}

#[test]
fn esd_rrc_expands_the_band() {
    let g = paper_grid();
    // The sinc stays essentially inside |f| <= B/2; RRC with beta = 0.6
    // spills a clear fraction past B/2 but stays inside |f| <= B.
    let sinc_esd = esd_report(&Filter { family: FilterFamily::Sinc, taps: sinc_prototype(g) });
    let rrc_esd = esd_report(&rrc_filter(g, 0.6, 0.6).unwrap());
    assert!(sinc_esd.in_band_half > 0.999);
    assert!(rrc_esd.in_band_half < 0.95);
    assert!(rrc_esd.in_band_full > 0.999);
    assert!(rrc_esd.in_time_full > 0.999);
}

#[test]
fn cut_metrics_locates_first_minimum_and_sidelobe() {
    let cut = [0.1, 0.5, 1.0, 0.5, 0.2, 0.3, 0.1];
    let m = cut_metrics(&cut, 2);
    assert_eq!(m.first_min_offset_cells, 2);
    assert_eq!(m.main_lobe_width_cells, 4);
    assert_abs_diff_eq!(m.sidelobe_peak, 0.3, epsilon = 1e-12);
    // Monotone decay: no sidelobes.
    let mono = [1.0, 0.5, 0.2, 0.1];
    assert_abs_diff_eq!(cut_metrics(&mono, 0).sidelobe_peak, 0.0, epsilon = 1e-12);
}

#[test]
fn taps_csv_has_header_and_all_cells() {
    let g = small_grid();
    let f = gaussian_filter(g, 1.0, 1.0).unwrap();
    let mut buf = Vec::new();
    f.write_taps_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "tau_index,nu_index,tau_seconds,nu_hz,re,im");
    assert_eq!(lines.count(), g.cells());
}

#[test]
fn esd_csv_has_summary_line() {
    let g = small_grid();
    let f = gaussian_filter(g, 1.0, 1.0).unwrap();
    let mut buf = Vec::new();
    esd_report(&f).write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("axis,coordinate,density\n"));
    assert!(text.lines().last().unwrap().starts_with("# in_time_half="));
}

#[test]
fn time_realization_has_unit_energy() {
    let g = paper_grid();
    let f = gaussian_filter(g, 1.584, 1.584).unwrap();
    let x = zak_inverse(&f.taps);
    let e: f64 = x.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.sample_rate;
    assert_abs_diff_eq!(e, 1.0, epsilon = 1e-9);
}

#[test]
fn linear_shift_domain_differs_from_torus() {
    let g = small_grid();
    let proto = gaussian_filter(g, 1.584, 1.584).unwrap();
    let torus = iota_orthogonalize_with(&proto, g, ShiftDomain::Torus).unwrap();
    let linear = iota_orthogonalize_with(&proto, g, ShiftDomain::Linear).unwrap();
    assert!(max_tap_diff(&torus.taps, &linear.taps) > 1e-6);
}
