//! Development diagnostic: builds every filter family on the default grid
//! and prints orthogonality residuals, Gram conditioning, localization
//! metrics, and construction wall time.

use num_complex::Complex64;
use std::time::Instant;
use zakotfs::filters::{self, Filter};
use zakotfs::grid::make_grid;
use zakotfs::linalg;

fn turns(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * x)
}

fn report(name: &str, f: &Filter, t: f64) {
    let amb = filters::off_origin_max(&filters::composite_ambiguity(f));
    let esd = filters::esd_report(f);
    println!(
        "{name:11} built {t:7.2}s  amb {amb:9.3e}  time_half {:.6} band_half {:.6} \
         time_full {:.6} band_full {:.6}  lobe(d,n) ({}, {})  sidelobe(d,n) ({:.4}, {:.4})",
        esd.in_time_half,
        esd.in_band_half,
        esd.in_time_full,
        esd.in_band_full,
        esd.delay_cut.main_lobe_width_cells,
        esd.doppler_cut.main_lobe_width_cells,
        esd.delay_cut.sidelobe_peak,
        esd.doppler_cut.sidelobe_peak,
    );
}

fn main() {
    linalg::init_single_threaded_blas();
    let g = make_grid(17, 19, 30e3, 8).unwrap();

    let t0 = Instant::now();
    let sinc = filters::sinc_filter(g).unwrap();
    report("sinc", &sinc, t0.elapsed().as_secs_f64());
    let gr = filters::lattice_gram_report(&sinc.taps).unwrap();
    println!("  sinc gram: dev {:.3e} clamped {}/{}", gr.whitened_deviation, gr.clamped, gr.total);

    let t0 = Instant::now();
    let rrc = filters::rrc_filter(g, 0.6, 0.6).unwrap();
    report("rrc(0.6)", &rrc, t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let gauss = filters::gaussian_filter(g, 1.584, 1.584).unwrap();
    report("gauss", &gauss, t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let gs = filters::gaussian_sinc_filter(g, 0.044, 0.044, 1.0278, 1.0278).unwrap();
    report("gauss-sinc", &gs, t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let ig = filters::iota_gaussian_filter(g).unwrap();
    report("iota-gauss", &ig, t0.elapsed().as_secs_f64());
    let gr = filters::lattice_gram_report(&ig.taps).unwrap();
    println!("  ig gram: dev {:.3e} clamped {}/{}", gr.whitened_deviation, gr.clamped, gr.total);

    let t0 = Instant::now();
    let (ip, sol) = filters::iota_pswf_filter(g, 1024).unwrap();
    report("iota-pswf", &ip, t0.elapsed().as_secs_f64());
    let gr = filters::lattice_gram_report(&ip.taps).unwrap();
    println!("  ip gram: dev {:.3e} clamped {}/{}", gr.whitened_deviation, gr.clamped, gr.total);
    println!(
        "  pswf: conc ({:.8}, {:.8}) sep ({:.3e}, {:.3e}) resid ({:.3e}, {:.3e})",
        sol.delay.concentration, sol.doppler.concentration,
        sol.delay.separation, sol.doppler.separation,
        sol.delay.residual, sol.doppler.residual,
    );

    // Ambiguity-window cross-check against a direct quadrature oracle.
    let w = &gauss.taps;
    let win = filters::ambiguity_window(w, -5..11, -7..8).unwrap();
    let l_tot = g.cells() as f64;
    let mut worst = 0.0f64;
    for yi in [-5i64, -1, 0, 3, 10] {
        for yj in [-7i64, 0, 2, 7] {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..g.st() {
                let ic = i as i64 - g.oi() as i64;
                for j in 0..g.sn() {
                    let jc = j as i64 - g.oj() as i64;
                    acc += w.at(i, j).conj()
                        * w.qp_at(ic - yi, jc - yj)
                        * turns((yj * (ic - yi)) as f64 / l_tot);
                }
            }
            acc *= g.d_a();
            worst = worst.max((acc - win.at(yi, yj)).norm());
        }
    }
    println!("window vs oracle: max diff {worst:.3e}");
}
