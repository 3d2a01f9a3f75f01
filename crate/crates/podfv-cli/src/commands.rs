//! Pipeline stages. Every stage reads its inputs from the artifact root and
//! is re-runnable in isolation; staleness is detected through the upstream
//! content hashes embedded in each archive.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use podfv::error::{Error, Result};
use podfv::eval::{
    self, psd_peak_frequency, rom_force_series, strouhal, EvalReport, SweepCase,
};
use podfv::hfsolver::{velocity_bcs, CaseConfig, SnapshotSet, Solver};
use podfv::io;
use podfv::mesh::{generate_channel_mesh, Mesh};
use podfv::pod::build_basis;
use podfv::romassembly::{assemble_blocks, compose_system};
use podfv::romsolver::{initialize, integrate, RomRunConfig};

use crate::config::PipelineConfig;

pub struct Stage<'a> {
    pub cfg: &'a PipelineConfig,
    pub root: PathBuf,
    pub jobs: usize,
}

impl<'a> Stage<'a> {
    pub fn new(cfg: &'a PipelineConfig, jobs: Option<usize>) -> Self {
        // The artifact root is the one value that may come from the
        // environment.
        let root = std::env::var_os("PODFV_ROOT")
            .map(PathBuf::from)
            .unwrap_or_else(|| cfg.paths.root.clone());
        let jobs = jobs.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
        Self {
            cfg,
            root,
            jobs: jobs.max(1),
        }
    }

    fn mesh_path(&self) -> PathBuf {
        self.root.join("mesh.txt")
    }

    fn run_dir(&self, k: usize) -> PathBuf {
        self.root.join(format!("run{k}"))
    }

    fn holdout_dir(&self) -> PathBuf {
        self.root.join("holdout")
    }

    fn basis_path(&self) -> PathBuf {
        self.root.join("basis.bin")
    }

    fn rom_path(&self) -> PathBuf {
        self.root.join("rom.bin")
    }

    fn require(&self, path: &Path, hint: &str) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("missing input {} (run `podfv {hint}` first)", path.display()),
            )))
        }
    }

    fn load_mesh(&self) -> Result<(Mesh, u64)> {
        self.require(&self.mesh_path(), "mesh-gen")?;
        let mesh = io::read_mesh(&self.mesh_path())?;
        let hash = io::file_hash(&self.mesh_path())?;
        Ok((mesh, hash))
    }

    pub fn mesh_gen(&self) -> Result<()> {
        let g = &self.cfg.geometry;
        let sides = g.side_bc().map_err(Error::Mesh)?;
        let mesh = generate_channel_mesh(g.nx, g.ny, g.lx, g.ly, g.obstacle_rect(), sides)?;
        fs::create_dir_all(&self.root)?;
        io::write_mesh(&self.mesh_path(), &mesh)?;
        println!(
            "mesh-gen: {} cells, {} faces, {} patches -> {}",
            mesh.n_cells(),
            mesh.n_faces(),
            mesh.patches.len(),
            self.mesh_path().display()
        );
        Ok(())
    }

    pub fn hf_run(&self) -> Result<()> {
        let (mesh, mesh_hash) = self.load_mesh()?;
        let u_ins = self.cfg.hf.u_in.values();
        let mut cases: Vec<(PathBuf, CaseConfig)> = u_ins
            .iter()
            .enumerate()
            .map(|(k, _)| (self.run_dir(k), self.cfg.hf.case_config(k)))
            .collect();
        if let Some(u_hold) = self.cfg.eval.holdout_u_in {
            let mut cfg = self.cfg.hf.case_config(0);
            cfg.u_in = u_hold;
            if let Some(t) = self.cfg.eval.holdout_t_end {
                cfg.t_end = t;
            }
            cases.push((self.holdout_dir(), cfg));
        }

        let next = Mutex::new(0usize);
        let failures: Mutex<Vec<Error>> = Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..self.jobs.min(cases.len()) {
                scope.spawn(|| loop {
                    let k = {
                        let mut guard = next.lock().unwrap();
                        let k = *guard;
                        *guard += 1;
                        k
                    };
                    if k >= cases.len() {
                        break;
                    }
                    let (dir, case) = &cases[k];
                    let outcome = (|| -> Result<()> {
                        let solver = Solver::new(&mesh, case.clone())?;
                        let run = solver.run_case(None)?;
                        io::write_run(dir, &run.snapshots, &run.forces, mesh_hash, run.wall_seconds)?;
                        println!(
                            "hf-run: u_in = {} -> {} ({} steps, {:.1} s, {} snapshots)",
                            case.u_in,
                            dir.display(),
                            run.steps,
                            run.wall_seconds,
                            run.snapshots.n_snapshots()
                        );
                        Ok(())
                    })();
                    if let Err(e) = outcome {
                        failures.lock().unwrap().push(e);
                    }
                });
            }
        });
        match failures.into_inner().unwrap().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn load_runs(&self, mesh_hash: u64) -> Result<Vec<SnapshotSet>> {
        let mut sets = Vec::new();
        for (k, _) in self.cfg.hf.u_in.values().iter().enumerate() {
            let dir = self.run_dir(k);
            self.require(&dir.join("velocity.snap"), "hf-run")?;
            let (set, _, meta) = io::read_run(&dir)?;
            if meta.mesh_hash != mesh_hash {
                return Err(Error::Stale(format!(
                    "{} was produced for a different mesh (hash {:x} != {:x})",
                    dir.display(),
                    meta.mesh_hash,
                    mesh_hash
                )));
            }
            sets.push(set);
        }
        Ok(sets)
    }

    pub fn pod(&self) -> Result<()> {
        let (mesh, mesh_hash) = self.load_mesh()?;
        let sets = self.load_runs(mesh_hash)?;
        let refs: Vec<&SnapshotSet> = sets.iter().collect();
        let basis = build_basis(
            &mesh,
            &refs,
            self.cfg.pod.n_u,
            self.cfg.pod.n_p,
            self.cfg.pod.reference_face,
        )?;
        io::write_basis(&self.basis_path(), &basis, mesh_hash)?;
        println!(
            "pod: {} snapshots -> {} velocity / {} pressure modes -> {}",
            basis.n_s,
            basis.n_u(),
            basis.n_p(),
            self.basis_path().display()
        );
        Ok(())
    }

    fn load_basis(&self, mesh: &Mesh, mesh_hash: u64) -> Result<podfv::PodBasis> {
        self.require(&self.basis_path(), "pod")?;
        let (basis, stored_hash) = io::read_basis(&self.basis_path(), mesh)?;
        if stored_hash != mesh_hash {
            return Err(Error::Stale(format!(
                "basis was built for mesh hash {stored_hash:x}, current mesh is {mesh_hash:x}"
            )));
        }
        Ok(basis)
    }

    pub fn assemble(&self) -> Result<()> {
        let (mesh, mesh_hash) = self.load_mesh()?;
        let basis = self.load_basis(&mesh, mesh_hash)?;
        let blocks = assemble_blocks(&mesh, &basis)?;
        let system = compose_system(blocks, self.cfg.hf.nu, self.cfg.hf.u_in.values()[0])?;
        let basis_hash = io::file_hash(&self.basis_path())?;
        io::write_rom(&self.rom_path(), &system, basis_hash)?;
        println!(
            "assemble: {}x{} system (cond D = {:.3e}, shift = {:.1e}) -> {}",
            system.n_u(),
            system.n_p(),
            system.poisson_cond,
            system.poisson_shift,
            self.rom_path().display()
        );
        Ok(())
    }

    fn load_rom(&self) -> Result<podfv::ReducedSystem> {
        self.require(&self.rom_path(), "assemble")?;
        let (system, stored_hash) = io::read_rom(&self.rom_path())?;
        let basis_hash = io::file_hash(&self.basis_path())?;
        if stored_hash != basis_hash {
            return Err(Error::Stale(format!(
                "reduced system was assembled for basis hash {stored_hash:x}, current basis is {basis_hash:x}"
            )));
        }
        Ok(system)
    }

    pub fn rom_run(&self) -> Result<()> {
        let (mesh, mesh_hash) = self.load_mesh()?;
        let basis = self.load_basis(&mesh, mesh_hash)?;
        let system = self.load_rom()?;
        let run0 = self.run_dir(0);
        self.require(&run0.join("velocity.snap"), "hf-run")?;
        let (snaps, _, meta) = io::read_run(&run0)?;
        let u_d = self.cfg.rom.u_d.unwrap_or(system.u_d);
        let rom_cfg = RomRunConfig {
            dt: self.cfg.rom.dt,
            t_end: self.cfg.rom.t_end,
            newton: self.cfg.rom.newton(),
            u_d: self.cfg.rom.u_d,
            nu: self.cfg.rom.nu,
        };
        let system_run = system.with_parameters(
            self.cfg.rom.nu.unwrap_or(system.nu),
            u_d,
        );
        let u0 = snaps.velocity_field(&mesh, 0, velocity_bcs(&mesh, u_d))?;
        let mut state0 = initialize(&mesh, &basis, &system_run, &u0)?;
        state0.t = snaps.times[0];
        let traj = integrate(&state0, &system_run, &rom_cfg)?;
        if let Some(f) = &traj.failure {
            return Err(Error::Rom(format!("reduced run aborted: {f}")));
        }
        let dir = self.root.join("rom");
        fs::create_dir_all(&dir)?;
        io::write_coeffs_csv(&dir.join("coeffs.csv"), &traj)?;
        if let Some(body) = mesh.patch_by_name("cylinder") {
            let hf_case = self.cfg.hf.case_config(0);
            let mut force_case = hf_case.clone();
            force_case.u_in = u_d;
            let forces = rom_force_series(&mesh, &basis, &traj, u_d, &force_case, body)?;
            io::write_forces_csv(&dir.join("rom_forces.csv"), &forces)?;
        }
        let horizon = traj.times.last().unwrap() - traj.times[0];
        let hf_horizon = self.cfg.hf.case_config(0).t_end;
        let per_time_speedup = if traj.wall_seconds > 0.0 && horizon > 0.0 {
            (meta.wall_seconds / hf_horizon) / (traj.wall_seconds / horizon)
        } else {
            0.0
        };
        io::write_timing_json(
            &dir.join("timing.json"),
            &[
                ("hf_wall_s", meta.wall_seconds),
                ("hf_horizon_s", hf_horizon),
                ("rom_wall_s", traj.wall_seconds),
                ("rom_horizon_s", horizon),
                ("speedup_per_unit_time", per_time_speedup),
            ],
        )?;
        println!(
            "rom-run: {} steps at u_d = {} in {:.3} s (per-unit-time speedup {:.0}) -> {}",
            traj.n_states() - 1,
            u_d,
            traj.wall_seconds,
            per_time_speedup,
            dir.display()
        );
        Ok(())
    }

    pub fn eval(&self) -> Result<()> {
        let (mesh, mesh_hash) = self.load_mesh()?;
        let basis = self.load_basis(&mesh, mesh_hash)?;
        let system = self.load_rom()?;
        let run0 = self.run_dir(0);
        self.require(&run0.join("forces.csv"), "hf-run")?;
        let (snaps, forces, _) = io::read_run(&run0)?;
        let body = mesh
            .patch_by_name("cylinder")
            .ok_or_else(|| Error::Eval("eval needs a bluff-body patch".into()))?;

        let hf_case = self.cfg.hf.case_config(0);
        let mut report = EvalReport {
            wape_denominator: "mean |hf|",
            ..EvalReport::default()
        };

        // Mode-count sweep over the training window of the first run.
        if !self.cfg.eval.sweep.is_empty() {
            let case = SweepCase {
                mesh: &mesh,
                basis: &basis,
                blocks: &system.blocks,
                nu: system.nu,
                u_d: hf_case.u_in,
                hf_cfg: &hf_case,
                body_patch: body,
                snapshots: &snaps,
                hf_forces: &forces,
                newton: self.cfg.rom.newton(),
            };
            report.sweep = eval::mode_sweep(&case, &self.cfg.eval.sweep)?;
            let lo = report.sweep.iter().map(|p| p.n).min().unwrap();
            let hi = report
                .sweep
                .iter()
                .map(|p| p.n)
                .filter(|&n| n <= 7)
                .max()
                .unwrap_or(lo);
            let get = |n: usize| report.sweep.iter().find(|p| p.n == n).map(|p| p.eps_lift);
            if let (Some(a), Some(b)) = (get(lo), get(hi)) {
                report.trend_improves = hi > lo && b < a;
            }
        }

        // Frequency comparison, against the held-out run when present.
        let window = self.cfg.eval.freq_window;
        let (ref_forces, ref_dt, target_u) = if self.cfg.eval.holdout_u_in.is_some() {
            let dir = self.holdout_dir();
            self.require(&dir.join("forces.csv"), "hf-run")?;
            let f = io::read_forces_csv(&dir.join("forces.csv"))?;
            (f, self.cfg.hf.dt, self.cfg.eval.holdout_u_in.unwrap())
        } else {
            (forces.clone(), self.cfg.hf.dt, hf_case.u_in)
        };
        if ref_forces.lift.len() >= window.max(16) {
            let tail = &ref_forces.lift[ref_forces.lift.len() - window..];
            let f_hf = psd_peak_frequency(tail, ref_dt)?;
            // Reduced run at the target inlet value over a window of equal
            // duration (equal spectral bins), after a settling stretch.
            let sys_run = system.with_parameters(system.nu, target_u);
            let u0 = snaps.velocity_field(&mesh, snaps.n_snapshots() - 1, velocity_bcs(&mesh, hf_case.u_in))?;
            let mut s0 = initialize(&mesh, &basis, &sys_run, &u0)?;
            s0.t = 0.0;
            let span = window as f64 * ref_dt;
            let settle = 0.25 * span;
            let rom_cfg = RomRunConfig {
                dt: self.cfg.rom.dt,
                t_end: settle + span,
                newton: self.cfg.rom.newton(),
                u_d: None,
                nu: None,
            };
            let traj = integrate(&s0, &sys_run, &rom_cfg)?;
            if let Some(f) = &traj.failure {
                return Err(Error::Rom(format!("frequency run aborted: {f}")));
            }
            let mut force_case = hf_case.clone();
            force_case.u_in = target_u;
            let rf = rom_force_series(&mesh, &basis, &traj, target_u, &force_case, body)?;
            let n_rom = (span / self.cfg.rom.dt).round() as usize;
            if rf.lift.len() > n_rom {
                let f_rom =
                    psd_peak_frequency(&rf.lift[rf.lift.len() - n_rom..], self.cfg.rom.dt)?;
                report.frequency_hf = Some(f_hf);
                report.frequency_rom = Some(f_rom);
                report.strouhal_hf = Some(strouhal(f_hf, target_u, hf_case.body_diameter));
                report.strouhal_rom = Some(strouhal(f_rom, target_u, hf_case.body_diameter));
                let dir = self.root.join("eval");
                fs::create_dir_all(&dir)?;
                io::write_xy(
                    &dir.join("lift_hf.xy"),
                    &ref_forces.times[ref_forces.times.len() - window..],
                    tail,
                )?;
                let nrf = rf.lift.len();
                io::write_xy(
                    &dir.join("lift_rom.xy"),
                    &rf.times[nrf - n_rom..],
                    &rf.lift[nrf - n_rom..],
                )?;
            }
        }

        // Speedup from the timing artifact when available.
        let timing = self.root.join("rom").join("timing.json");
        if timing.exists() {
            let text = fs::read_to_string(&timing)?;
            for line in text.lines() {
                if let Some(rest) = line.trim().strip_prefix("\"speedup_per_unit_time\":") {
                    let v = rest.trim_end_matches(',').trim();
                    report.speedup = v.parse().ok();
                }
            }
        }

        let dir = self.root.join("eval");
        fs::create_dir_all(&dir)?;
        let mut sweep_csv = String::from("N,eps_Lc,eps_Dc\n");
        for p in &report.sweep {
            sweep_csv.push_str(&format!("{},{},{}\n", p.n, p.eps_lift, p.eps_drag));
        }
        fs::write(dir.join("sweep.csv"), sweep_csv)?;
        let summary = report.summary_table();
        fs::write(dir.join("summary.txt"), &summary)?;
        print!("{summary}");
        Ok(())
    }

    pub fn pipeline(&self) -> Result<()> {
        self.mesh_gen()?;
        self.hf_run()?;
        self.pod()?;
        self.assemble()?;
        self.rom_run()?;
        self.eval()
    }
}
