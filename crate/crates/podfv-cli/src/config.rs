//! Pipeline configuration: plain TOML with one section per stage.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use podfv::hfsolver::CaseConfig;
use podfv::mesh::{Rect, SideBc};
use podfv::romsolver::NewtonParams;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub paths: Paths,
    pub geometry: Geometry,
    pub hf: Hf,
    pub pod: Pod,
    pub rom: Rom,
    #[serde(default)]
    pub eval: Eval,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub root: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            root: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    /// `[x0, y0, x1, y1]`, grid-aligned and strictly inside the domain.
    pub obstacle: Option<[f64; 4]>,
    /// `"slip"` or `"wall"`.
    #[serde(default = "default_sides")]
    pub sides: String,
}

fn default_sides() -> String {
    "slip".to_string()
}

impl Geometry {
    pub fn obstacle_rect(&self) -> Option<Rect> {
        self.obstacle.map(|r| Rect::new(r[0], r[1], r[2], r[3]))
    }

    pub fn side_bc(&self) -> Result<SideBc, String> {
        match self.sides.as_str() {
            "slip" => Ok(SideBc::Slip),
            "wall" => Ok(SideBc::Wall),
            other => Err(format!("sides must be `slip` or `wall`, got `{other}`")),
        }
    }
}

/// One or more inlet velocities.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hf {
    pub nu: f64,
    pub u_in: OneOrMany,
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub dt: f64,
    pub t_end: OneOrMany,
    #[serde(default = "default_piso")]
    pub piso_correctors: usize,
    #[serde(default = "default_outer")]
    pub outer_correctors: usize,
    #[serde(default = "default_stride")]
    pub snapshot_stride: OneOrMany,
    #[serde(default = "default_n_snapshots")]
    pub n_snapshots: usize,
    pub body_diameter: f64,
    #[serde(default = "default_blend")]
    pub convection_blend: f64,
}

fn default_rho() -> f64 {
    1.0
}
fn default_piso() -> usize {
    2
}
fn default_outer() -> usize {
    1
}
fn default_stride() -> OneOrMany {
    OneOrMany::One(1.0)
}
fn default_n_snapshots() -> usize {
    120
}
fn default_blend() -> f64 {
    0.8
}

impl Hf {
    /// Per-run solver configuration; scalar entries broadcast over runs.
    pub fn case_config(&self, run: usize) -> CaseConfig {
        let pick = |v: &OneOrMany| -> f64 {
            let vs = v.values();
            if vs.len() == 1 {
                vs[0]
            } else {
                vs[run.min(vs.len() - 1)]
            }
        };
        CaseConfig {
            nu: self.nu,
            rho: self.rho,
            u_in: self.u_in.values()[run],
            dt: self.dt,
            t_end: pick(&self.t_end),
            piso_correctors: self.piso_correctors,
            outer_correctors: self.outer_correctors,
            snapshot_stride: pick(&self.snapshot_stride) as usize,
            n_snapshots: self.n_snapshots,
            body_diameter: self.body_diameter,
            convection_blend: self.convection_blend,
            ..CaseConfig::default()
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pod {
    pub n_u: usize,
    pub n_p: usize,
    pub reference_face: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rom {
    pub dt: f64,
    pub t_end: f64,
    pub u_d: Option<f64>,
    pub nu: Option<f64>,
    #[serde(default = "default_tol_abs")]
    pub newton_tol_abs: f64,
    #[serde(default = "default_tol_rel")]
    pub newton_tol_rel: f64,
    #[serde(default = "default_max_iter")]
    pub newton_max_iter: usize,
}

fn default_tol_abs() -> f64 {
    1e-10
}
fn default_tol_rel() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    25
}

impl Rom {
    pub fn newton(&self) -> NewtonParams {
        NewtonParams {
            tol_abs: self.newton_tol_abs,
            tol_rel: self.newton_tol_rel,
            max_iter: self.newton_max_iter,
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Eval {
    #[serde(default)]
    pub sweep: Vec<usize>,
    /// Extra full-order run excluded from training, used as the frequency
    /// reference for an untrained inlet velocity.
    pub holdout_u_in: Option<f64>,
    pub holdout_t_end: Option<f64>,
    /// Sample count of the spectral comparison window.
    #[serde(default = "default_freq_window")]
    pub freq_window: usize,
}

fn default_freq_window() -> usize {
    1000
}

pub fn load(path: &Path) -> Result<PipelineConfig, podfv::Error> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| podfv::Error::Format(format!("{}: {e}", path.display())))
}
