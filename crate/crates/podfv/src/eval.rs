//! Quantitative comparison of full-order and reduced-order outputs: weighted
//! absolute percentage errors on force signals, spectral peak shedding
//! frequency, Strouhal number, mode-count sweeps and speedup.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::hfsolver::{force_coefficients, CaseConfig, FlowState, ForceSeries, SnapshotSet};
use crate::mesh::Mesh;
use crate::pod::PodBasis;
use crate::romassembly::{compose_system, ReducedBlocks};
use crate::romsolver::{self, NewtonParams, RomRunConfig, RomTrajectory};

/// A full-order and a reduced-order signal on a common time grid.
#[derive(Clone, Debug)]
pub struct SignalPair {
    pub times: Vec<f64>,
    pub hf: Vec<f64>,
    pub rom: Vec<f64>,
}

impl SignalPair {
    /// Builds a pair by linearly interpolating the reduced-order series onto
    /// the full-order time stamps. Stamps outside the reduced series range
    /// are dropped, so both signals cover the overlap only.
    pub fn resample(
        hf_times: &[f64],
        hf_values: &[f64],
        rom_times: &[f64],
        rom_values: &[f64],
    ) -> Result<Self> {
        if hf_times.len() != hf_values.len() || rom_times.len() != rom_values.len() {
            return Err(Error::Eval("signal length mismatch".into()));
        }
        if rom_times.len() < 2 {
            return Err(Error::Eval("reduced series too short to resample".into()));
        }
        let (r0, r1) = (rom_times[0], *rom_times.last().unwrap());
        let eps = 1e-9 * (r1 - r0).abs().max(1.0);
        let mut times = Vec::new();
        let mut hf = Vec::new();
        let mut rom = Vec::new();
        for (&t, &v) in hf_times.iter().zip(hf_values) {
            if t < r0 - eps || t > r1 + eps {
                continue;
            }
            let tt = t.clamp(r0, r1);
            let k = match rom_times.binary_search_by(|x| x.partial_cmp(&tt).unwrap()) {
                Ok(k) => k.min(rom_times.len() - 2),
                Err(k) => k.saturating_sub(1).min(rom_times.len() - 2),
            };
            let (t0, t1) = (rom_times[k], rom_times[k + 1]);
            let w = if t1 > t0 { (tt - t0) / (t1 - t0) } else { 0.0 };
            times.push(t);
            hf.push(v);
            rom.push(rom_values[k] * (1.0 - w) + rom_values[k + 1] * w);
        }
        if times.len() < 2 {
            return Err(Error::Eval("signals do not overlap".into()));
        }
        Ok(Self { times, hf, rom })
    }
}

/// Weighted absolute percentage error,
/// `(100/n) sum |hf_t - rom_t| / mean(|hf|)`. The denominator uses the mean
/// magnitude of the full-order signal so that zero-mean signals stay well
/// posed; reports flag this convention.
pub fn wape(pair: &SignalPair) -> Result<f64> {
    let n = pair.hf.len();
    if n == 0 {
        return Err(Error::Eval("empty signal".into()));
    }
    let denom = pair.hf.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    if denom <= 0.0 {
        return Err(Error::Eval(
            "wape: zero-magnitude reference signal; use the shifted variant".into(),
        ));
    }
    let mean_abs_err =
        pair.hf.iter().zip(&pair.rom).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
    Ok(100.0 * mean_abs_err / denom)
}

/// WAPE of the drag fluctuation: both signals shifted by the full-order
/// mean, making the metric invariant to a common constant offset.
pub fn wape_shifted_drag(pair: &SignalPair) -> Result<f64> {
    let n = pair.hf.len();
    if n == 0 {
        return Err(Error::Eval("empty signal".into()));
    }
    let mean = pair.hf.iter().sum::<f64>() / n as f64;
    let shifted = SignalPair {
        times: pair.times.clone(),
        hf: pair.hf.iter().map(|v| v - mean).collect(),
        rom: pair.rom.iter().map(|v| v - mean).collect(),
    };
    let denom = shifted.hf.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    if denom <= 1e-300 {
        return Err(Error::Eval(
            "shifted wape: the reference drag has no fluctuation".into(),
        ));
    }
    wape(&shifted)
}

/// Frequency of the periodogram peak after mean removal and a Hann taper.
/// Resolution is one bin, `1/(n dt)`.
pub fn psd_peak_frequency(signal: &[f64], sample_dt: f64) -> Result<f64> {
    let n = signal.len();
    if n < 4 {
        return Err(Error::Eval("signal too short for a spectrum".into()));
    }
    if !(sample_dt > 0.0) {
        return Err(Error::Eval("sample spacing must be positive".into()));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let spread = signal.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-300 * mean.abs().max(1.0) {
        return Err(Error::Eval("constant signal has no spectral peak".into()));
    }
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5
                * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos());
            Complex::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut best_k = 1;
    let mut best_p = 0.0;
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let p = c.norm_sqr();
        if p > best_p {
            best_p = p;
            best_k = k;
        }
    }
    Ok(best_k as f64 / (n as f64 * sample_dt))
}

/// One spectral bin width for a signal of `n` samples.
pub fn psd_bin_width(n: usize, sample_dt: f64) -> f64 {
    1.0 / (n as f64 * sample_dt)
}

/// Independent frequency estimate from upward zero crossings of the
/// mean-removed signal, with linear interpolation between samples.
pub fn zero_crossing_frequency(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::Eval("signal too short for zero crossings".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut crossings = Vec::new();
    for k in 1..values.len() {
        let (a, b) = (values[k - 1] - mean, values[k] - mean);
        if a < 0.0 && b >= 0.0 {
            let w = a / (a - b);
            crossings.push(times[k - 1] + w * (times[k] - times[k - 1]));
        }
    }
    if crossings.len() < 2 {
        return Err(Error::Eval("fewer than two upward zero crossings".into()));
    }
    let periods = crossings.len() - 1;
    Ok(periods as f64 / (crossings.last().unwrap() - crossings[0]))
}

/// Strouhal number `St = f D / U`.
pub fn strouhal(frequency: f64, u: f64, d: f64) -> f64 {
    assert!(u > 0.0 && d > 0.0, "strouhal needs positive U and D");
    frequency * d / u
}

/// One point of a mode-count sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepPoint {
    pub n: usize,
    pub eps_lift: f64,
    pub eps_drag: f64,
}

/// Evaluation summary mirroring the error-table / frequency-comparison
/// reporting layout.
#[derive(Clone, Debug, Default)]
pub struct EvalReport {
    pub sweep: Vec<SweepPoint>,
    /// Error at the largest swept dimension at most 7 is below the error at
    /// the smallest.
    pub trend_improves: bool,
    pub frequency_hf: Option<f64>,
    pub frequency_rom: Option<f64>,
    pub strouhal_hf: Option<f64>,
    pub strouhal_rom: Option<f64>,
    pub speedup: Option<f64>,
    /// WAPE denominator convention flag.
    pub wape_denominator: &'static str,
}

impl EvalReport {
    /// Plain-text summary table.
    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        s.push_str("mode sweep (WAPE %, denominator = mean |hf|):\n");
        s.push_str("      N    eps_Lc    eps_Dc'\n");
        for p in &self.sweep {
            s.push_str(&format!("{:7} {:9.3} {:9.3}\n", p.n, p.eps_lift, p.eps_drag));
        }
        if let (Some(fh), Some(fr)) = (self.frequency_hf, self.frequency_rom) {
            s.push_str(&format!(
                "shedding frequency: hf = {fh:.6}, rom = {fr:.6}, rel diff = {:.3e}\n",
                (fh - fr).abs() / fh
            ));
        }
        if let (Some(sh), Some(sr)) = (self.strouhal_hf, self.strouhal_rom) {
            s.push_str(&format!("strouhal: hf = {sh:.5}, rom = {sr:.5}\n"));
        }
        if let Some(su) = self.speedup {
            s.push_str(&format!("speedup (hf wall / rom wall): {su:.1}\n"));
        }
        s
    }
}

/// Inputs shared by all points of a mode-count sweep on one trained case.
pub struct SweepCase<'a> {
    pub mesh: &'a Mesh,
    pub basis: &'a PodBasis,
    pub blocks: &'a ReducedBlocks,
    pub nu: f64,
    pub u_d: f64,
    pub hf_cfg: &'a CaseConfig,
    pub body_patch: usize,
    /// Training-window snapshots (initial condition and time grid).
    pub snapshots: &'a SnapshotSet,
    /// Full-order force history covering at least the training window.
    pub hf_forces: &'a ForceSeries,
    pub newton: NewtonParams,
}

/// Reduced force coefficients: reconstruct the fields at every state of the
/// trajectory and apply the full-order force functional.
pub fn rom_force_series(
    mesh: &Mesh,
    basis: &PodBasis,
    traj: &RomTrajectory,
    u_d: f64,
    hf_cfg: &CaseConfig,
    body_patch: usize,
) -> Result<ForceSeries> {
    let mut out = ForceSeries::default();
    for k in 0..traj.n_states() {
        let state = traj.state(k);
        let (u, p, flux) = romsolver::reconstruct(mesh, basis, &state, u_d)?;
        let fs = FlowState {
            u,
            p,
            flux,
            t: state.t,
        };
        let (dc, lc) = force_coefficients(mesh, &fs, hf_cfg, body_patch)?;
        out.times.push(state.t);
        out.drag.push(dc);
        out.lift.push(lc);
    }
    Ok(out)
}

/// Runs the reduced model over the training window for each mode count and
/// reports both force errors. Pressure and flux spaces share the velocity
/// dimension.
pub fn mode_sweep(case: &SweepCase, n_list: &[usize]) -> Result<Vec<SweepPoint>> {
    let times = &case.snapshots.times;
    if times.len() < 2 {
        return Err(Error::Eval("training window too short".into()));
    }
    let t0 = times[0];
    let dt = case.snapshots.meta.dt_snap;
    let horizon = times.last().unwrap() - t0;

    // Full-order window.
    let mut hf_t = Vec::new();
    let mut hf_lift = Vec::new();
    let mut hf_drag = Vec::new();
    let eps = 1e-9 * dt;
    for (k, &t) in case.hf_forces.times.iter().enumerate() {
        if t >= t0 - eps && t <= t0 + horizon + eps {
            hf_t.push(t);
            hf_lift.push(case.hf_forces.lift[k]);
            hf_drag.push(case.hf_forces.drag[k]);
        }
    }

    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let blocks = case.blocks.truncated(n, n)?;
        let system = compose_system(blocks, case.nu, case.u_d)?;
        let basis_n = case.basis.truncated(n, n)?;
        let u0 = case.snapshots.velocity_field(
            case.mesh,
            0,
            crate::hfsolver::velocity_bcs(case.mesh, case.u_d),
        )?;
        let mut s0 = romsolver::initialize(case.mesh, &basis_n, &system, &u0)?;
        s0.t = t0;
        let cfg = RomRunConfig {
            dt,
            t_end: t0 + horizon,
            newton: case.newton,
            u_d: None,
            nu: None,
        };
        let traj = romsolver::integrate(&s0, &system, &cfg)?;
        if let Some(f) = &traj.failure {
            return Err(Error::Rom(format!("sweep point N = {n}: {f}")));
        }
        let forces = rom_force_series(
            case.mesh,
            &basis_n,
            &traj,
            case.u_d,
            case.hf_cfg,
            case.body_patch,
        )?;
        let lift_pair = SignalPair::resample(&hf_t, &hf_lift, &forces.times, &forces.lift)?;
        let drag_pair = SignalPair::resample(&hf_t, &hf_drag, &forces.times, &forces.drag)?;
        out.push(SweepPoint {
            n,
            eps_lift: wape(&lift_pair)?,
            eps_drag: wape_shifted_drag(&drag_pair)?,
        });
    }
    Ok(out)
}
