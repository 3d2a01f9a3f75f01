// Scratch convergence-order probe (not part of the deliverable).
use podfv::hfsolver::{CaseConfig, FlowState, Solver};
use podfv::mesh::{generate_channel_mesh, SideBc};
use podfv::vec2::Vec2;

fn main() {
    let outer: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mesh = generate_channel_mesh(
        36, 18, 6.0, 3.0,
        Some(podfv::mesh::Rect::new(2.0, 4.0 / 3.0, 2.5, 11.0 / 6.0)),
        SideBc::Slip,
    )
    .unwrap();
    let base = CaseConfig {
        nu: 0.05, u_in: 1.0, dt: 0.025, t_end: 1.0,
        convection_blend: 1.0, outer_correctors: outer,
        momentum_tol: 1e-11, pressure_tol: 1e-11,
        ..CaseConfig::default()
    };
    let warm = Solver::new(&mesh, base.clone()).unwrap();
    let mut s0 = warm.initial_state();
    for _ in 0..40 { s0 = warm.step(&s0).unwrap(); }

    let terminal = |dt: f64, s: &FlowState| -> Vec<Vec2> {
        let cfg = CaseConfig { dt, ..base.clone() };
        let solver = Solver::new(&mesh, cfg).unwrap();
        let mut state = s.clone();
        for _ in 0..((1.0 / dt).round() as usize) { state = solver.step(&state).unwrap(); }
        state.u.values
    };
    let reference = terminal(0.00625, &s0);
    let interior: Vec<usize> = (0..mesh.n_cells())
        .filter(|&c| mesh.cell_faces(c).iter().all(|&(f, _)| mesh.faces[f as usize].is_internal()))
        .collect();
    let err = |u: &[Vec2]| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for &c in &interior {
            num += (u[c] - reference[c]).norm_sq() * mesh.cell_volumes[c];
            den += mesh.cell_volumes[c];
        }
        (num / den).sqrt()
    };
    let es: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|&dt| err(&terminal(dt, &s0))).collect();
    println!("outer={outer} errors: {es:?}");
    println!("ratios: {:.3} {:.3} {:.3}", es[0]/es[1], es[1]/es[2], es[2]/es[3]);
}
