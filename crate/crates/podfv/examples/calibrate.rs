// Scratch calibration harness (not part of the deliverable).
use podfv::eval::{psd_peak_frequency, zero_crossing_frequency};
use podfv::hfsolver::{CaseConfig, Solver};
use podfv::mesh::{generate_channel_mesh, Rect, SideBc};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let t_end: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(150.0);
    let blend: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let u_in: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let dt: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.1);

    let h = 1.0 / 6.0;
    let mesh = generate_channel_mesh(
        132,
        72,
        22.0,
        12.0,
        Some(Rect::new(5.0, 34.0 * h, 6.0, 40.0 * h)),
        SideBc::Slip,
    )
    .unwrap();
    eprintln!("cells = {}, faces = {}", mesh.n_cells(), mesh.n_faces());

    let cfg = CaseConfig {
        nu: 0.01,
        u_in,
        dt,
        t_end,
        convection_blend: blend,
        n_snapshots: 120,
        snapshot_stride: 1,
        ..CaseConfig::default()
    };
    let solver = Solver::new(&mesh, cfg).unwrap();
    let start = std::time::Instant::now();
    let run = solver.run_case(None).unwrap();
    let wall = start.elapsed().as_secs_f64();
    eprintln!(
        "steps = {}, wall = {:.1} s, {:.1} ms/step",
        run.steps,
        wall,
        1000.0 * wall / run.steps as f64
    );

    // Lift statistics over trailing thirds.
    let n = run.forces.lift.len();
    for (lo, hi) in [(n / 3, 2 * n / 3), (2 * n / 3, n)] {
        let seg = &run.forces.lift[lo..hi];
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        let amp = seg.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        eprintln!(
            "lift window [{:.0}, {:.0}]: mean = {:.4}, amp = {:.4}",
            run.forces.times[lo],
            run.forces.times[hi - 1],
            mean,
            amp
        );
    }
    let seg = &run.forces.lift[n / 2..];
    let tseg = &run.forces.times[n / 2..];
    match zero_crossing_frequency(tseg, seg) {
        Ok(f) => eprintln!("zero-crossing frequency (last half) = {f:.5}"),
        Err(e) => eprintln!("zero-crossing: {e}"),
    }
    match psd_peak_frequency(seg, dt) {
        Ok(f) => eprintln!("psd peak frequency (last half) = {f:.5}  St = {:.4}", f / u_in),
        Err(e) => eprintln!("psd: {e}"),
    }
    let dseg = &run.forces.drag[n * 3 / 4..];
    let dmean = dseg.iter().sum::<f64>() / dseg.len() as f64;
    eprintln!("mean drag (last quarter) = {dmean:.4}");

    // Print the tail of the lift signal for inspection.
    for k in (n.saturating_sub(2000)..n).step_by(50) {
        println!("{:.2} {:.6} {:.6}", run.forces.times[k], run.forces.lift[k], run.forces.drag[k]);
    }
}
