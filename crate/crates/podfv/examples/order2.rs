// Scratch local-truncation probe (not part of the deliverable).
use podfv::hfsolver::{CaseConfig, Solver};
use podfv::mesh::{generate_channel_mesh, SideBc};
use podfv::vec2::Vec2;

fn main() {
    let mesh = generate_channel_mesh(30, 10, 3.0, 1.0, None, SideBc::Wall).unwrap();
    let piso: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let outer: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let base = CaseConfig {
        nu: 0.1, u_in: 1.0, dt: 0.025, t_end: 1.0,
        convection_blend: 1.0,
        piso_correctors: piso, outer_correctors: outer,
        momentum_tol: 1e-12, pressure_tol: 1e-12,
        ..CaseConfig::default()
    };
    let warm = Solver::new(&mesh, base.clone()).unwrap();
    let mut s0 = warm.initial_state();
    for _ in 0..40 { s0 = warm.step(&s0).unwrap(); }

    // Cells at least 3 mean spacings from the inlet corners.
    let keep: Vec<usize> = (0..mesh.n_cells())
        .filter(|&c| {
            let p = mesh.cell_centers[c];
            let d1 = (p - Vec2::new(0.0, 0.0)).norm();
            let d2 = (p - Vec2::new(0.0, 1.0)).norm();
            d1 > 0.3 && d2 > 0.3
        })
        .collect();
    let probe = |dt: f64| -> f64 {
        let s_full = Solver::new(&mesh, CaseConfig { dt, ..base.clone() }).unwrap();
        let s_half = Solver::new(&mesh, CaseConfig { dt: dt / 2.0, ..base.clone() }).unwrap();
        let a = s_full.step(&s0).unwrap();
        let b = s_half.step(&s_half.step(&s0).unwrap()).unwrap();
        keep.iter()
            .map(|&c| (a.u.values[c] - b.u.values[c]).abs_max())
            .fold(0.0f64, f64::max)
    };
    let ds: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|&dt| probe(dt)).collect();
    println!("local diffs away from corners: {ds:?}");
    println!("ratios: {:.2} {:.2} {:.2}", ds[0]/ds[1], ds[1]/ds[2], ds[2]/ds[3]);
}
