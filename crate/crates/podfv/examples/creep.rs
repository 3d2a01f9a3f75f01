// Scratch steady-approach probe (not part of the deliverable).
use podfv::hfsolver::{CaseConfig, Solver};
use podfv::mesh::{generate_channel_mesh, SideBc};

fn main() {
    let piso: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let mtol: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1e-7);
    let mesh = generate_channel_mesh(30, 10, 3.0, 1.0, None, SideBc::Wall).unwrap();
    let cfg = CaseConfig {
        nu: 2.0, u_in: 1.0, dt: 0.1, t_end: 40.0,
        convection_blend: 1.0, piso_correctors: piso, momentum_tol: mtol,
        ..CaseConfig::default()
    };
    let solver = Solver::new(&mesh, cfg).unwrap();
    let mut state = solver.initial_state();
    for k in 0..400 {
        let next = solver.step(&state).unwrap();
        let mut num = 0.0;
        for (a, b) in next.u.values.iter().zip(&state.u.values) {
            num += (*a - *b).norm_sq();
        }
        let d = num.sqrt();
        if k % 40 == 0 || (60..70).contains(&k) {
            println!("step {k}: delta = {d:.3e}");
        }
        state = next;
    }
}
