use zakotfs::filters::FilterFamily;
use zakotfs::grid::make_grid;
use zakotfs::sim::{run_ber, CsiMode, SimConfig};

fn main() {
    let g = make_grid(17, 19, 30e3, 8).unwrap();
    let mut cfg = SimConfig::new(g, FilterFamily::Sinc);
    cfg.csi_mode = CsiMode::Estimated;
    cfg.pilot_offset_db = 14.0;
    cfg.snr_db = vec![14.0];
    cfg.frames_per_point = 50;
    let pts = run_ber(&cfg).unwrap();
    let p = &pts[0];
    println!(
        "50 frames: wall {:.0} ms -> {:.1} ms/frame; ber {:.4} nmse {:.3e}",
        p.wall_ms,
        p.wall_ms / 50.0,
        p.ber,
        p.nmse
    );
}
