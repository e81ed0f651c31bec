//! Run configuration: flat dotted-key TOML in, validated [`RunConfig`] out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::HarnessError;
use crate::eos::{EosModel, PrimitiveState, VoidFractionModel};
use crate::field::{FluxScheme, SolverConfig, SourceScheme};
use crate::grid::{Boundary, Grid1D};

/// Initial-condition families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `(p̄, ū, α_eq(p̄))` everywhere.
    ConstantEq,
    /// `p = p̄ + A exp(−(x − x_c)²/w²)`, `u = 0`, `α = α_eq(p)`.
    Gaussian,
    /// Two equilibrium states separated at `x_split`.
    Riemann,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::ConstantEq => "constant_eq",
            Preset::Gaussian => "gaussian",
            Preset::Riemann => "riemann",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant_eq" => Ok(Preset::ConstantEq),
            "gaussian" => Ok(Preset::Gaussian),
            "riemann" => Ok(Preset::Riemann),
            other => Err(HarnessError::Config(format!(
                "unknown preset {other:?} (expected constant_eq, gaussian or riemann)"
            ))),
        }
    }
}

/// Parameters shared by the presets. Positions are absolute coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetParams {
    pub p_bar: f64,
    pub u_bar: f64,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub p_left: f64,
    pub p_right: f64,
    pub u_left: f64,
    pub u_right: f64,
    pub x_split: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            p_bar: 2.0,
            u_bar: 0.0,
            amplitude: 0.5,
            center: 0.5,
            width: 0.1,
            p_left: 3.0,
            p_right: 1.5,
            u_left: 0.0,
            u_right: 0.0,
            x_split: 0.5,
        }
    }
}

fn equilibrium_cell(p: f64, u: f64, eos: &EosModel) -> Result<PrimitiveState, crate::Error> {
    PrimitiveState::new(p, u, eos.alpha_eq(p)?)
}

/// Cell-centre profile of a preset.
pub fn preset_initial_condition(
    preset: Preset,
    params: &PresetParams,
    grid: &Grid1D,
    eos: &EosModel,
) -> crate::Result<Vec<PrimitiveState>> {
    if preset == Preset::Gaussian && !(params.width > 0.0) {
        return Err(crate::Error::Domain(format!(
            "gaussian width must be positive, got {}",
            params.width
        )));
    }
    grid.centers()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (p, u) = match preset {
                Preset::ConstantEq => (params.p_bar, params.u_bar),
                Preset::Gaussian => {
                    let z = (x - params.center) / params.width;
                    (params.p_bar + params.amplitude * (-z * z).exp(), 0.0)
                }
                Preset::Riemann if x < params.x_split => (params.p_left, params.u_left),
                Preset::Riemann => (params.p_right, params.u_right),
            };
            equilibrium_cell(p, u, eos).map_err(|e| e.in_cell(i))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub fields: bool,
    pub series: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub eps_list: Vec<f64>,
    /// When set, skip the solvers and inject errors `ε^k` with this exponent.
    pub synthetic: Option<f64>,
    pub slope_min: f64,
    pub slope_max: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            eps_list: vec![1e-2, 3.16e-3, 1e-3, 3.16e-4],
            synthetic: None,
            slope_min: 0.45,
            slope_max: 1.3,
        }
    }
}

/// Everything one command needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub seed: u64,
    pub eos: EosModel,
    pub grid: Grid1D,
    pub solver: SolverConfig,
    pub params: PresetParams,
    pub outputs: OutputSpec,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: Preset::Gaussian,
            seed: 0,
            eos: EosModel::default(),
            grid: Grid1D {
                n_cells: 400,
                x_lo: 0.0,
                x_hi: 1.0,
                boundary: Boundary::Periodic,
            },
            solver: SolverConfig::default(),
            params: PresetParams::default(),
            outputs: OutputSpec {
                dir: PathBuf::from("out"),
                fields: true,
                series: true,
            },
            sweep: SweepSpec::default(),
        }
    }
}

/// Command-line overrides, already resolved against the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub eps: Option<f64>,
    pub cells: Option<usize>,
    pub out: Option<PathBuf>,
    pub preset: Option<Preset>,
}

impl RunConfig {
    /// Checks every module invariant, including that the preset profile is valid.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let wrap = |what: &str, e: crate::Error| HarnessError::Config(format!("{what}: {e}"));
        self.eos.validate().map_err(|e| wrap("EosModel", e))?;
        self.grid.validate().map_err(|e| wrap("Grid1D", e))?;
        self.solver
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if !(self.sweep.slope_min <= self.sweep.slope_max) {
            return Err(HarnessError::Config(
                "sweep.slope_min must not exceed sweep.slope_max".into(),
            ));
        }
        if self.sweep.eps_list.iter().any(|e| !(*e > 0.0)) {
            return Err(HarnessError::Config(
                "sweep.eps_list entries must be positive".into(),
            ));
        }
        preset_initial_condition(self.preset, &self.params, &self.grid, &self.eos)
            .map_err(|e| wrap(&format!("preset {}", self.preset.name()), e))?;
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), HarnessError> {
        if let Some(p) = o.preset {
            if p == Preset::Riemann && self.preset != Preset::Riemann {
                self.grid.boundary = Boundary::Outflow;
            }
            self.preset = p;
        }
        if let Some(eps) = o.eps {
            self.solver.eps = eps;
        }
        if let Some(n) = o.cells {
            self.grid.n_cells = n;
        }
        if let Some(dir) = &o.out {
            self.outputs.dir = dir.clone();
        }
        self.validate()
    }

    pub fn initial_condition(&self) -> crate::Result<Vec<PrimitiveState>> {
        preset_initial_condition(self.preset, &self.params, &self.grid, &self.eos)
    }

    /// Canonical text form: every key, fixed order, shortest round-trip floats.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let f = |x: f64| format!("{x:?}");
        let q = |x: &str| format!("{x:?}");
        kv("preset", q(self.preset.name()));
        kv("seed", self.seed.to_string());
        let e = &self.eos;
        kv("eos.r", f(e.r));
        kv("eos.t0", f(e.t0));
        kv("eos.rho_l", f(e.rho_l));
        kv("eos.a_g", f(e.a_g));
        kv("eos.a_l", f(e.a_l));
        kv("eos.p_lo", f(e.p_lo));
        kv("eos.p_hi", f(e.p_hi));
        match e.alpha_eq {
            VoidFractionModel::AffineClamp {
                c0,
                c1,
                alpha_min,
                alpha_max,
            } => {
                kv("eos.alpha_eq.model", q("affine_clamp"));
                kv("eos.alpha_eq.c0", f(c0));
                kv("eos.alpha_eq.c1", f(c1));
                kv("eos.alpha_eq.alpha_min", f(alpha_min));
                kv("eos.alpha_eq.alpha_max", f(alpha_max));
            }
            VoidFractionModel::Logistic {
                alpha_min,
                alpha_max,
                p_mid,
                width,
            } => {
                kv("eos.alpha_eq.model", q("logistic"));
                kv("eos.alpha_eq.alpha_min", f(alpha_min));
                kv("eos.alpha_eq.alpha_max", f(alpha_max));
                kv("eos.alpha_eq.p_mid", f(p_mid));
                kv("eos.alpha_eq.width", f(width));
            }
        }
        let g = &self.grid;
        kv("grid.n_cells", g.n_cells.to_string());
        kv("grid.x_lo", f(g.x_lo));
        kv("grid.x_hi", f(g.x_hi));
        kv("grid.boundary", q(&g.boundary.to_string()));
        let c = &self.solver;
        kv("solver.eps", f(c.eps));
        kv("solver.nu", f(c.nu));
        kv("solver.cfl", f(c.cfl));
        kv("solver.t_end", f(c.t_end));
        kv("solver.flux_scheme", q("rusanov"));
        kv("solver.source_scheme", q(&c.source_scheme.to_string()));
        kv("solver.record_every", c.record_every.to_string());
        if let Some(dt) = c.record_interval {
            kv("solver.record_interval", f(dt));
        }
        let p = &self.params;
        kv("params.p_bar", f(p.p_bar));
        kv("params.u_bar", f(p.u_bar));
        kv("params.amplitude", f(p.amplitude));
        kv("params.center", f(p.center));
        kv("params.width", f(p.width));
        kv("params.p_left", f(p.p_left));
        kv("params.p_right", f(p.p_right));
        kv("params.u_left", f(p.u_left));
        kv("params.u_right", f(p.u_right));
        kv("params.x_split", f(p.x_split));
        let o = &self.outputs;
        kv("outputs.dir", q(&o.dir.to_string_lossy()));
        kv("outputs.fields", o.fields.to_string());
        kv("outputs.series", o.series.to_string());
        let w = &self.sweep;
        let list: Vec<String> = w.eps_list.iter().map(|x| f(*x)).collect();
        kv("sweep.eps_list", format!("[{}]", list.join(", ")));
        if let Some(k) = w.synthetic {
            kv("sweep.synthetic", f(k));
        }
        kv("sweep.slope_min", f(w.slope_min));
        kv("sweep.slope_max", f(w.slope_max));
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_toml()).map_err(|e| HarnessError::io(path, e))
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    seed: Option<u64>,
    eos: Option<RawEos>,
    grid: Option<RawGrid>,
    solver: Option<RawSolver>,
    params: Option<RawParams>,
    outputs: Option<RawOutputs>,
    sweep: Option<RawSweep>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEos {
    r: Option<f64>,
    t0: Option<f64>,
    rho_l: Option<f64>,
    a_g: Option<f64>,
    a_l: Option<f64>,
    p_lo: Option<f64>,
    p_hi: Option<f64>,
    alpha_eq: Option<RawAlphaEq>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAlphaEq {
    model: Option<String>,
    c0: Option<f64>,
    c1: Option<f64>,
    alpha_min: Option<f64>,
    alpha_max: Option<f64>,
    p_mid: Option<f64>,
    width: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n_cells: Option<usize>,
    x_lo: Option<f64>,
    x_hi: Option<f64>,
    boundary: Option<Boundary>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    eps: Option<f64>,
    nu: Option<f64>,
    cfl: Option<f64>,
    t_end: Option<f64>,
    flux_scheme: Option<FluxScheme>,
    source_scheme: Option<SourceScheme>,
    record_every: Option<usize>,
    record_interval: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawParams {
    p_bar: Option<f64>,
    u_bar: Option<f64>,
    amplitude: Option<f64>,
    center: Option<f64>,
    width: Option<f64>,
    p_left: Option<f64>,
    p_right: Option<f64>,
    u_left: Option<f64>,
    u_right: Option<f64>,
    x_split: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    dir: Option<PathBuf>,
    fields: Option<bool>,
    series: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    eps_list: Option<Vec<f64>>,
    synthetic: Option<f64>,
    slope_min: Option<f64>,
    slope_max: Option<f64>,
}

fn alpha_eq_from(raw: RawAlphaEq) -> Result<VoidFractionModel, HarnessError> {
    let model = raw.model.as_deref().unwrap_or("affine_clamp");
    let base = VoidFractionModel::default();
    let (def_min, def_max) = base.bounds();
    let alpha_min = raw.alpha_min.unwrap_or(def_min);
    let alpha_max = raw.alpha_max.unwrap_or(def_max);
    match model {
        "affine_clamp" => {
            if raw.p_mid.is_some() || raw.width.is_some() {
                return Err(HarnessError::Config(
                    "eos.alpha_eq.p_mid and eos.alpha_eq.width only apply to the logistic model"
                        .into(),
                ));
            }
            let VoidFractionModel::AffineClamp { c0, c1, .. } = base else {
                unreachable!("the default map is affine")
            };
            Ok(VoidFractionModel::AffineClamp {
                c0: raw.c0.unwrap_or(c0),
                c1: raw.c1.unwrap_or(c1),
                alpha_min,
                alpha_max,
            })
        }
        "logistic" => {
            if raw.c0.is_some() || raw.c1.is_some() {
                return Err(HarnessError::Config(
                    "eos.alpha_eq.c0 and eos.alpha_eq.c1 only apply to the affine_clamp model"
                        .into(),
                ));
            }
            Ok(VoidFractionModel::Logistic {
                alpha_min,
                alpha_max,
                p_mid: raw.p_mid.unwrap_or(4.0),
                width: raw.width.unwrap_or(1.0),
            })
        }
        other => Err(HarnessError::Config(format!(
            "unknown eos.alpha_eq.model {other:?} (expected affine_clamp or logistic)"
        ))),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, HarnessError> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| HarnessError::Config(e.to_string().trim_end().to_string()))?;
    let mut cfg = RunConfig::default();
    if let Some(p) = raw.preset {
        cfg.preset = p.parse()?;
    }
    if cfg.preset == Preset::Riemann {
        cfg.grid.boundary = Boundary::Outflow;
    }
    cfg.seed = raw.seed.unwrap_or(cfg.seed);

    let e = raw.eos.unwrap_or_default();
    let d = EosModel::default();
    cfg.eos = EosModel {
        r: e.r.unwrap_or(d.r),
        t0: e.t0.unwrap_or(d.t0),
        rho_l: e.rho_l.unwrap_or(d.rho_l),
        a_g: e.a_g.unwrap_or(d.a_g),
        a_l: e.a_l.unwrap_or(d.a_l),
        p_lo: e.p_lo.unwrap_or(d.p_lo),
        p_hi: e.p_hi.unwrap_or(d.p_hi),
        alpha_eq: alpha_eq_from(e.alpha_eq.unwrap_or_default())?,
    };

    let g = raw.grid.unwrap_or_default();
    cfg.grid = Grid1D {
        n_cells: g.n_cells.unwrap_or(cfg.grid.n_cells),
        x_lo: g.x_lo.unwrap_or(cfg.grid.x_lo),
        x_hi: g.x_hi.unwrap_or(cfg.grid.x_hi),
        boundary: g.boundary.unwrap_or(cfg.grid.boundary),
    };

    let s = raw.solver.unwrap_or_default();
    let d = SolverConfig::default();
    cfg.solver = SolverConfig {
        eps: s.eps.unwrap_or(d.eps),
        nu: s.nu.unwrap_or(d.nu),
        cfl: s.cfl.unwrap_or(d.cfl),
        t_end: s.t_end.unwrap_or(d.t_end),
        flux_scheme: s.flux_scheme.unwrap_or(d.flux_scheme),
        source_scheme: s.source_scheme.unwrap_or(d.source_scheme),
        record_every: s.record_every.unwrap_or(d.record_every),
        record_interval: s.record_interval,
    };

    let p = raw.params.unwrap_or_default();
    let d = PresetParams::default();
    cfg.params = PresetParams {
        p_bar: p.p_bar.unwrap_or(d.p_bar),
        u_bar: p.u_bar.unwrap_or(d.u_bar),
        amplitude: p.amplitude.unwrap_or(d.amplitude),
        center: p.center.unwrap_or(d.center),
        width: p.width.unwrap_or(d.width),
        p_left: p.p_left.unwrap_or(d.p_left),
        p_right: p.p_right.unwrap_or(d.p_right),
        u_left: p.u_left.unwrap_or(d.u_left),
        u_right: p.u_right.unwrap_or(d.u_right),
        x_split: p.x_split.unwrap_or(d.x_split),
    };

    let o = raw.outputs.unwrap_or_default();
    cfg.outputs = OutputSpec {
        dir: o.dir.unwrap_or(cfg.outputs.dir),
        fields: o.fields.unwrap_or(cfg.outputs.fields),
        series: o.series.unwrap_or(cfg.outputs.series),
    };

    let w = raw.sweep.unwrap_or_default();
    let d = SweepSpec::default();
    cfg.sweep = SweepSpec {
        eps_list: w.eps_list.unwrap_or(d.eps_list),
        synthetic: w.synthetic,
        slope_min: w.slope_min.unwrap_or(d.slope_min),
        slope_max: w.slope_max.unwrap_or(d.slope_max),
    };

    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
