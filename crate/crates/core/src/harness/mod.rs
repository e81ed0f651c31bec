//! Experiment driver behind the `twophase` command-line tool.
//!
//! Each command takes a validated [`RunConfig`], writes its data files into
//! the configured output directory and finishes with `manifest.toml`, which
//! lists every file with its SHA-256 and the verdicts of the checks that ran.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::{
    load_config, parse_config, preset_initial_condition, OutputSpec, Overrides, Preset,
    PresetParams, RunConfig, SweepSpec,
};
use output::{eq_fields_csv, to_report, OutputDir};
pub use output::{fields_csv, series_csv, sha256_hex, Check, Failure, FileRecord, RunManifest};

use crate::diagnostics::{
    pressure_equation_residual, primitive_fields, rate_study, relaxation_residual_field,
    total_entropy_series, worst_increase, NormReport, RateReport, Verdict,
};
use crate::entropy::entropy_hessian;
use crate::eos::{
    operating_grid, validate_subcharacteristic, EosModel, PrimitiveState, SubcharacteristicReport,
};
use crate::grid::Grid1D;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    Error = 1,
    /// A check ran and failed.
    ValidationFailure = 2,
    /// The refinement pre-check could not separate scheme and model error.
    Inconclusive = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn from_verdict(v: Verdict) -> Self {
        match v {
            Verdict::Pass => Exit::Pass,
            Verdict::Fail => Exit::ValidationFailure,
            Verdict::Inconclusive => Exit::Inconclusive,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit: Exit,
    /// One line per notable result, for the terminal.
    pub summary: Vec<String>,
    pub manifest: PathBuf,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn manifest(command: &str, cfg: &RunConfig, started: f64) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: started,
        exit_code: 0,
        verdict: String::new(),
        checks: Vec::new(),
        failure: None,
        files: Vec::new(),
        config: cfg.to_toml(),
    }
}

fn failure_of(e: &crate::Error) -> Failure {
    Failure {
        message: e.to_string(),
        time: e.time(),
        cell: e.cell(),
    }
}

fn finish(
    out: OutputDir,
    mut m: RunManifest,
    exit: Exit,
    verdict: &str,
    summary: Vec<String>,
) -> Result<Outcome, HarnessError> {
    m.finished = now();
    m.exit_code = exit.code();
    m.verdict = verdict.to_string();
    let manifest = out.finish(m)?;
    Ok(Outcome {
        exit,
        summary,
        manifest,
    })
}

#[derive(Debug, Serialize)]
struct RunReport {
    preset: String,
    eps: f64,
    snapshots: usize,
    final_time: f64,
    initial_total_entropy: f64,
    final_total_entropy: f64,
    worst_entropy_increase: f64,
    pressure_residual: Option<f64>,
    norms: NormReport,
}

/// One relaxation run with its diagnostics.
pub fn cmd_run(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let started = now();
    let mut out = OutputDir::create(&cfg.outputs.dir)?;
    let mut m = manifest("run", cfg, started);
    let result = cfg
        .initial_condition()
        .and_then(|ic| crate::relax::run(&ic, &cfg.solver, &cfg.grid, &cfg.eos));
    let field = match result {
        Ok(f) => f,
        Err(e) => {
            let f = failure_of(&e);
            let line = format!("run failed: {e}");
            m.failure = Some(f);
            return finish(out, m, Exit::Error, "ERROR", vec![line]);
        }
    };

    let eos = &cfg.eos;
    let eps = cfg.solver.eps;
    let report = (|| -> crate::Result<(RunReport, Option<String>, Option<String>)> {
        let entropy = total_entropy_series(&field, eos)?;
        let res = relaxation_residual_field(&field, eos)?;
        let (p, u, _) = primitive_fields(&field, eos)?;
        let dxp = p.gradient(&field.grid);
        let dxu = u.gradient(&field.grid);
        let norms = NormReport::new(&[("alpha_residual", &res), ("dx_p", &dxp), ("dx_u", &dxu)])?;
        let pressure_residual = if field.len() > 1 {
            Some(pressure_equation_residual(&field, eps, eos, true)?)
        } else {
            None
        };
        let report = RunReport {
            preset: cfg.preset.name().to_string(),
            eps,
            snapshots: field.len(),
            final_time: *field.times.last().unwrap_or(&0.0),
            initial_total_entropy: entropy[0],
            final_total_entropy: *entropy.last().unwrap_or(&entropy[0]),
            worst_entropy_increase: worst_increase(&entropy),
            pressure_residual,
            norms,
        };
        let fields = cfg
            .outputs
            .fields
            .then(|| fields_csv(&field, eos))
            .transpose()?;
        let series = cfg
            .outputs
            .series
            .then(|| series_csv(&field, eps, eos))
            .transpose()?;
        Ok((report, fields, series))
    })();
    let (report, fields, series) = match report {
        Ok(r) => r,
        Err(e) => {
            m.failure = Some(failure_of(&e));
            return finish(
                out,
                m,
                Exit::Error,
                "ERROR",
                vec![format!("diagnostics failed: {e}")],
            );
        }
    };
    if let Some(text) = fields {
        out.write("fields.csv", &text)?;
    }
    if let Some(text) = series {
        out.write("series.csv", &text)?;
    }
    out.write("report.toml", &to_report(&report)?)?;
    let summary = vec![
        format!(
            "{} run to t = {} with eps = {:e}: {} snapshots",
            report.preset, report.final_time, eps, report.snapshots
        ),
        format!(
            "total entropy {:.10e} -> {:.10e} (worst increase {:e})",
            report.initial_total_entropy, report.final_total_entropy, report.worst_entropy_increase
        ),
    ];
    finish(out, m, Exit::Pass, "PASS", summary)
}

/// Convergence-rate study over `cfg.sweep.eps_list`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let started = now();
    let mut out = OutputDir::create(&cfg.outputs.dir)?;
    let mut m = manifest("sweep", cfg, started);
    let bounds = (cfg.sweep.slope_min, cfg.sweep.slope_max);

    let study = match cfg.sweep.synthetic {
        Some(k) => RateReport::synthetic(&cfg.sweep.eps_list, k, 1.0, bounds.0, bounds.1)
            .map(|r| (r, None)),
        None => {
            let ic = |g: &Grid1D| preset_initial_condition(cfg.preset, &cfg.params, g, &cfg.eos);
            rate_study(
                &ic,
                &cfg.sweep.eps_list,
                &cfg.grid,
                &cfg.solver,
                &cfg.eos,
                bounds,
            )
            .map(|(r, s)| (r, Some(s)))
        }
    };
    let (report, sweep) = match study {
        Ok(x) => x,
        Err(e) => {
            m.failure = Some(failure_of(&e));
            return finish(
                out,
                m,
                Exit::Error,
                "ERROR",
                vec![format!("sweep failed: {e}")],
            );
        }
    };
    if let Some(sweep) = &sweep {
        let write_members = || -> crate::Result<Vec<(String, String)>> {
            let mut files = Vec::new();
            for (k, (field, eps)) in sweep.relaxation.iter().zip(&sweep.eps_values).enumerate() {
                if cfg.outputs.series {
                    files.push((
                        format!("series_eps{k}.csv"),
                        series_csv(field, *eps, &cfg.eos)?,
                    ));
                }
                if cfg.outputs.fields {
                    files.push((format!("fields_eps{k}.csv"), fields_csv(field, &cfg.eos)?));
                }
            }
            if cfg.outputs.fields {
                files.push((
                    "fields_equilibrium.csv".into(),
                    eq_fields_csv(&sweep.equilibrium, &cfg.eos)?,
                ));
            }
            Ok(files)
        };
        match write_members() {
            Ok(files) => {
                for (name, text) in files {
                    out.write(&name, &text)?;
                }
            }
            Err(e) => {
                m.failure = Some(failure_of(&e));
                return finish(
                    out,
                    m,
                    Exit::Error,
                    "ERROR",
                    vec![format!("sweep output failed: {e}")],
                );
            }
        }
    }
    out.write("report.toml", &to_report(&report)?)?;
    m.checks.push(Check {
        name: "rate_slopes".into(),
        verdict: report.verdict.to_string(),
    });
    let mut summary = vec![format!(
        "slope_p = {:.4}, slope_u = {:.4} (accepted range [{}, {}])",
        report.slope_p, report.slope_u, bounds.0, bounds.1
    )];
    if let Some(pc) = report.precheck {
        summary.push(format!(
            "refinement pre-check: scheme error {:.3e} / {:.3e} vs model error {:.3e} / {:.3e} -> {}",
            pc.scheme_error_p,
            pc.scheme_error_u,
            pc.model_error_p,
            pc.model_error_u,
            if pc.passed { "ok" } else { "scheme error dominates" }
        ));
    }
    summary.push(format!("verdict: {}", report.verdict));
    let exit = Exit::from_verdict(report.verdict);
    finish(out, m, exit, &report.verdict.to_string(), summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub samples: usize,
    pub seed: u64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `(p, u, α)` of the smallest eigenvalue.
    pub argmin: [f64; 3],
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub samples: usize,
    pub min_slope: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpotValues {
    pub p: f64,
    pub alpha: f64,
    pub frozen_sq: f64,
    pub equilibrium_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EosReport {
    pub verdict: String,
    pub subcharacteristic: SubcharacteristicReport,
    pub convexity: ConvexityReport,
    pub monotone_density: MonotoneReport,
    /// Smallest `p/(α_eq ρ_eq) − a_e²` on the grid: the margin against the
    /// fastest acoustic speed of the relaxation system itself. Informational.
    pub true_acoustic_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spot: Option<SpotValues>,
    pub warnings: Vec<String>,
}

/// Smallest and largest Hessian eigenvalue of `η` over `samples` seeded
/// random states in the operating box.
pub fn hessian_sweep(eos: &EosModel, samples: usize, seed: u64) -> crate::Result<ConvexityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a_lo, a_hi) = eos.alpha_eq.bounds();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut argmin = [f64::NAN; 3];
    for _ in 0..samples {
        let v = PrimitiveState::new(
            rng.gen_range(eos.p_lo..=eos.p_hi),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(a_lo..=a_hi),
        )?;
        let h = entropy_hessian(&eos.cons_from_prim(&v)?, eos)?;
        let ev = h.symmetric_eigenvalues();
        if ev.min() < min {
            min = ev.min();
            argmin = [v.p, v.u, v.alpha];
        }
        max = max.max(ev.max());
    }
    Ok(ConvexityReport {
        samples,
        seed,
        min_eigenvalue: min,
        max_eigenvalue: max,
        argmin,
        passed: min > 0.0,
    })
}

/// All thermodynamic checks on `eos`.
pub fn eos_report(eos: &EosModel, seed: u64) -> crate::Result<EosReport> {
    const SAMPLES: usize = 1000;
    let grid = operating_grid(eos, SAMPLES);
    let sub = validate_subcharacteristic(eos, &grid);
    let convexity = hessian_sweep(eos, SAMPLES, seed)?;
    let mut min_slope = f64::INFINITY;
    let mut true_margin = f64::INFINITY;
    for &p in &grid {
        // 1/a_e² is ρ_eq'(p)
        let ae2 = eos.equilibrium_sound_speed_sq(p);
        let slope = match ae2 {
            Ok(a) => 1.0 / a,
            Err(_) => f64::NEG_INFINITY,
        };
        min_slope = min_slope.min(slope);
        if let Ok(a) = ae2 {
            let alpha = eos.alpha_eq(p)?;
            let rho = eos.equilibrium_mixture_density(p)?;
            true_margin = true_margin.min(p / (alpha * rho) - a);
        }
    }
    let monotone = MonotoneReport {
        samples: grid.len(),
        min_slope,
        passed: min_slope > 0.0,
    };
    let spot = (eos.p_lo..=eos.p_hi)
        .contains(&2.0)
        .then(|| -> crate::Result<SpotValues> {
            let s = eos.sound_speeds(2.0, 0.4)?;
            Ok(SpotValues {
                p: 2.0,
                alpha: 0.4,
                frozen_sq: s.frozen_sq,
                equilibrium_sq: s.equilibrium_sq,
            })
        });
    let spot = spot.transpose()?;
    let mut warnings = Vec::new();
    if eos.range_crosses_equal_density() {
        warnings.push(format!(
            "WARN: operating range contains the equal-density pressure p = {} where rho_g = rho_l",
            eos.equal_density_pressure()
        ));
    }
    let passed = sub.passed && convexity.passed && monotone.passed;
    Ok(EosReport {
        verdict: if passed { "PASS" } else { "FAIL" }.into(),
        subcharacteristic: sub,
        convexity,
        monotone_density: monotone,
        true_acoustic_margin: true_margin,
        spot,
        warnings,
    })
}

/// Subcharacteristic, convexity and monotonicity checks of the closure.
pub fn cmd_validate_eos(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let started = now();
    let mut out = OutputDir::create(&cfg.outputs.dir)?;
    let mut m = manifest("validate-eos", cfg, started);
    let report = match eos_report(&cfg.eos, cfg.seed) {
        Ok(r) => r,
        Err(e) => {
            m.failure = Some(failure_of(&e));
            return finish(
                out,
                m,
                Exit::Error,
                "ERROR",
                vec![format!("validate-eos failed: {e}")],
            );
        }
    };
    out.write("report.toml", &to_report(&report)?)?;
    let pf = |b: bool| if b { "PASS" } else { "FAIL" };
    for (name, ok) in [
        ("subcharacteristic", report.subcharacteristic.passed),
        ("convexity", report.convexity.passed),
        ("monotone_density", report.monotone_density.passed),
    ] {
        m.checks.push(Check {
            name: name.into(),
            verdict: pf(ok).into(),
        });
    }
    let mut summary = vec![
        format!(
            "subcharacteristic: min(a_f^2 - a_e^2) = {:.6e} at p = {} -> {}",
            report.subcharacteristic.min_margin,
            report.subcharacteristic.argmin_p,
            pf(report.subcharacteristic.passed)
        ),
        format!(
            "convexity: Hessian eigenvalues in [{:.6e}, {:.6e}] over {} states -> {}",
            report.convexity.min_eigenvalue,
            report.convexity.max_eigenvalue,
            report.convexity.samples,
            pf(report.convexity.passed)
        ),
        format!(
            "monotone rho_eq: min slope {:.6e} -> {}",
            report.monotone_density.min_slope,
            pf(report.monotone_density.passed)
        ),
        format!(
            "true acoustic margin (informational): {:.6e}",
            report.true_acoustic_margin
        ),
    ];
    summary.extend(report.warnings.iter().cloned());
    summary.push(format!("verdict: {}", report.verdict));
    let exit = if report.verdict == "PASS" {
        Exit::Pass
    } else {
        Exit::ValidationFailure
    };
    let verdict = report.verdict.clone();
    finish(out, m, exit, &verdict, summary)
}
