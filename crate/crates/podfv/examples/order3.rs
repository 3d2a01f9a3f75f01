// Scratch probe: where does the dt-inconsistency live? (not part of the deliverable)
use podfv::hfsolver::{CaseConfig, Solver};
use podfv::mesh::{generate_channel_mesh, SideBc};
use podfv::vec2::Vec2;

fn main() {
    let mesh = generate_channel_mesh(30, 10, 3.0, 1.0, None, SideBc::Wall).unwrap();
    let base = CaseConfig {
        nu: 0.1, u_in: 1.0, dt: 0.025, t_end: 1.0,
        convection_blend: 1.0,
        ..CaseConfig::default()
    };
    let warm = Solver::new(&mesh, base.clone()).unwrap();
    let mut s0 = warm.initial_state();
    for _ in 0..40 { s0 = warm.step(&s0).unwrap(); }

    let dt = 0.05;
    let s_full = Solver::new(&mesh, CaseConfig { dt, ..base.clone() }).unwrap();
    let s_half = Solver::new(&mesh, CaseConfig { dt: dt / 2.0, ..base.clone() }).unwrap();
    let a = s_full.step(&s0).unwrap();
    let b = s_half.step(&s_half.step(&s0).unwrap()).unwrap();

    let mut worst = (0.0, 0usize);
    for i in 0..mesh.n_cells() {
        let d = (a.u.values[i] - b.u.values[i]).abs_max();
        if d > worst.0 { worst = (d, i); }
    }
    let c = mesh.cell_centers[worst.1];
    println!("max du = {:.3e} at cell {} ({:.2}, {:.2})", worst.0, worst.1, c.x, c.y);
    let mut dp = (0.0, 0usize);
    for i in 0..mesh.n_cells() {
        let d = (a.p.values[i] - b.p.values[i]).abs();
        if d > dp.0 { dp = (d, i); }
    }
    let cp = mesh.cell_centers[dp.1];
    println!("max dp = {:.3e} at ({:.2}, {:.2})", dp.0, cp.x, cp.y);
    // Profile of du along the channel at mid-height.
    for i in 0..mesh.n_cells() {
        let c = mesh.cell_centers[i];
        if (c.y - 0.45).abs() < 0.04 {
            let d = (a.u.values[i] - b.u.values[i]).abs_max();
            if i % 2 == 0 { print!("x={:.1}:{:.1e} ", c.x, d); }
        }
    }
    println!();
    let dflux: f64 = a.flux.values.iter().zip(&b.flux.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("max dF = {dflux:.3e}");
    // u component check: x or y?
    let i = worst.1;
    println!("du components: ({:.2e}, {:.2e})", (a.u.values[i] - b.u.values[i]).x.abs(), (a.u.values[i] - b.u.values[i]).y.abs());
}
