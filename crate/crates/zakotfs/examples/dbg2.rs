use num_complex::Complex64;
use zakotfs::channel::{effective_channel, PathComponent, PhysicalChannel, TapEngine};
use zakotfs::filters::sinc_filter;
use zakotfs::grid::make_grid;

fn main() {
    let g = make_grid(17, 19, 30e3, 8).unwrap();
    let w = sinc_filter(g).unwrap();
    let engine = TapEngine::new(&w).unwrap();
    for (k0, l0) in [(0i64, 0i64), (1, 0), (2, -3), (4, 4)] {
        let ch = PhysicalChannel::new(
            g,
            vec![PathComponent {
                gain: Complex64::new(1.0, 0.0),
                tau: k0 as f64 / g.b,
                nu: l0 as f64 / g.t,
            }],
        )
        .unwrap();
        let taps = engine.taps(&ch).unwrap();
        let kk = k0.rem_euclid(g.m as i64) as usize;
        let ll = l0.rem_euclid(g.n as i64) as usize;
        let peak = taps.at(kk, ll);
        let mut leak = 0.0f64;
        let mut at = (0usize, 0usize);
        for k in 0..g.m {
            for l in 0..g.n {
                if (k, l) != (kk, ll) && taps.at(k, l).norm() > leak {
                    leak = taps.at(k, l).norm();
                    at = (k, l);
                }
            }
        }
        println!(
            "path ({k0},{l0}): |peak-1| {:.3e} max leak {:.3e} at {:?}",
            (peak.norm() - 1.0).abs(), leak, at
        );
    }
    // reference path once, for agreement on the paper grid
    let ch = PhysicalChannel::new(
        g,
        vec![PathComponent { gain: Complex64::new(1.0, 0.0), tau: 1.73e-6, nu: -500.0 }],
    )
    .unwrap();
    let fast = engine.taps(&ch).unwrap();
    let slow = effective_channel(&w, &ch).unwrap().taps;
    let mut d = 0.0f64;
    for i in 0..g.mn() {
        d = d.max((fast.taps[i] - slow.taps[i]).norm());
    }
    println!("paper-grid fractional path fast-vs-reference diff {d:.3e}");
}
