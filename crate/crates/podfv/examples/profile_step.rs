use podfv::hfsolver::{CaseConfig, Solver};
use podfv::mesh::{generate_channel_mesh, Rect, SideBc};
use std::time::Instant;

fn main() {
    let h = 1.0 / 6.0;
    let mesh = generate_channel_mesh(
        132, 72, 22.0, 12.0,
        Some(Rect::new(5.0, 34.0 * h, 6.0, 40.0 * h)),
        SideBc::Slip,
    ).unwrap();
    let cfg = CaseConfig { nu: 0.01, u_in: 1.0, dt: 0.1, t_end: 3.0, convection_blend: 1.0, ..CaseConfig::default() };
    let solver = Solver::new(&mesh, cfg).unwrap();
    let mut state = solver.initial_state();
    // Warm up 5 steps.
    for _ in 0..5 { state = solver.step(&state).unwrap(); }
    let mut t_mom = 0.0; let mut t_pc = 0.0;
    for _ in 0..10 {
        let t0 = Instant::now();
        let (mut u_star, mm) = solver.momentum_predict(&state).unwrap();
        t_mom += t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let mut work = state.clone();
        for _ in 0..2 {
            let (p, flux, u) = solver.pressure_correct(&work, &u_star, &mm).unwrap();
            work.p = p; work.flux = flux; u_star = u;
        }
        work.u = u_star;
        work.t += 0.1;
        t_pc += t1.elapsed().as_secs_f64();
        state = work;
    }
    println!("momentum: {:.1} ms/step, pressure (2 correctors): {:.1} ms/step", 100.0*t_mom, 100.0*t_pc);
}
