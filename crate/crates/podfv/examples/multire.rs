// Scratch multi-inlet calibration (not part of the deliverable).
use podfv::eval::psd_peak_frequency;
use podfv::hfsolver::{CaseConfig, Solver};
use podfv::mesh::{generate_channel_mesh, Mesh, Rect, SideBc};

fn mesh_b() -> Mesh {
    let h = 1.0 / 6.0;
    generate_channel_mesh(
        108,
        54,
        18.0,
        9.0,
        Some(Rect::new(4.5, 25.0 * h, 5.5, 31.0 * h)),
        SideBc::Slip,
    )
    .unwrap()
}

fn main() {
    let mesh = mesh_b();
    eprintln!("cells = {}", mesh.n_cells());
    let t_end: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(150.0);
    std::thread::scope(|scope| {
        for u_in in [1.0, 1.25, 1.5, 2.0] {
            let mesh = &mesh;
            scope.spawn(move || {
                let cfg = CaseConfig {
                    nu: 0.01,
                    u_in,
                    dt: 0.04,
                    t_end,
                    convection_blend: 1.0,
                    outer_correctors: 2,
                    n_snapshots: 120,
                    snapshot_stride: 1,
                    ..CaseConfig::default()
                };
                let solver = Solver::new(mesh, cfg).unwrap();
                let t0 = std::time::Instant::now();
                let run = solver.run_case(None).unwrap();
                let n = run.forces.lift.len();
                // Amplitude in consecutive fifths to locate saturation.
                let mut amps = Vec::new();
                for k in 0..5 {
                    let seg = &run.forces.lift[k * n / 5..(k + 1) * n / 5];
                    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
                    let amp = seg.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
                    amps.push((amp * 1000.0).round() / 1000.0);
                }
                let tail = &run.forces.lift[n / 2..];
                let f = psd_peak_frequency(tail, 0.04).unwrap_or(0.0);
                eprintln!(
                    "u_in = {u_in}: wall {:.0} s ({:.1} ms/step), amps by fifth {:?}, f(last half) = {:.4}, St = {:.4}",
                    t0.elapsed().as_secs_f64(),
                    1000.0 * t0.elapsed().as_secs_f64() / run.steps as f64,
                    amps,
                    f,
                    f / u_in
                );
            });
        }
    });
}
