//! Measurements taken on recorded solutions: norms, residuals, error fields,
//! relative entropy, the weak entropy-dissipation pairing and rate fits.
//!
//! Space integrals are cell sums (midpoint rule), time integrals use the
//! trapezoid rule over snapshots, spatial derivatives are central
//! differences and time derivatives are forward differences between
//! snapshots.

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::{entropy_density, equilibrium_entropy, equilibrium_entropy_gradient};
use crate::eos::{ConservedState, EosModel, PrimitiveState};
use crate::equilibrium::{eq_primitive, eq_run_conserved, EqState};
use crate::error::{Error, Result};
use crate::field::{SolutionField, SolverConfig};
use crate::grid::Grid1D;
use crate::relax::run_conserved;

/// A scalar per cell and snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub times: Vec<f64>,
    pub dx: f64,
    pub values: Vec<Vec<f64>>,
}

/// `∫ f(t) dt` over the snapshot times.
pub fn trapezoid(times: &[f64], f: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(f.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

impl ScalarField {
    fn from_fn<S>(field: &SolutionField<S>, mut f: impl FnMut(&S) -> Result<f64>) -> Result<Self> {
        let values = field
            .states
            .iter()
            .map(|snap| {
                snap.iter()
                    .enumerate()
                    .map(|(i, s)| f(s).map_err(|e| e.in_cell(i)))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalarField {
            times: field.times.clone(),
            dx: field.grid.dx(),
            values,
        })
    }

    /// `‖f(t)‖_{L²(x)}` per snapshot.
    pub fn l2_space(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| (v.iter().map(|x| x * x).sum::<f64>() * self.dx).sqrt())
            .collect()
    }

    /// `‖f‖_{L²(x,t)}`.
    pub fn l2_spacetime(&self) -> f64 {
        let sq: Vec<f64> = self.l2_space().iter().map(|x| x * x).collect();
        trapezoid(&self.times, &sq).sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `‖f‖_{L∞(0,T;L²)}`.
    pub fn max_l2(&self) -> f64 {
        self.l2_space().into_iter().fold(0.0, f64::max)
    }

    /// Central-difference `∂_x f`.
    pub fn gradient(&self, grid: &Grid1D) -> ScalarField {
        ScalarField {
            times: self.times.clone(),
            dx: self.dx,
            values: self.values.iter().map(|v| grid.gradient(v)).collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        if self.values.len() != other.values.len()
            || self
                .values
                .iter()
                .zip(&other.values)
                .any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::Usage("scalar fields have different shapes".into()));
        }
        Ok(ScalarField {
            times: self.times.clone(),
            dx: self.dx,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        })
    }
}

/// Norms of a set of labelled fields sharing snapshot times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// `l2_space[q][k]`: quantity `q` at snapshot `k`.
    pub l2_space: Vec<Vec<f64>>,
    pub l2_spacetime: Vec<f64>,
    pub linf: Vec<f64>,
}

impl NormReport {
    pub fn new(fields: &[(&str, &ScalarField)]) -> Result<Self> {
        let Some((_, first)) = fields.first() else {
            return Err(Error::Usage("norm report needs at least one field".into()));
        };
        if fields.iter().any(|(_, f)| f.times != first.times) {
            return Err(Error::Usage(
                "fields in a norm report must share snapshot times".into(),
            ));
        }
        Ok(NormReport {
            labels: fields.iter().map(|(l, _)| l.to_string()).collect(),
            times: first.times.clone(),
            l2_space: fields.iter().map(|(_, f)| f.l2_space()).collect(),
            l2_spacetime: fields.iter().map(|(_, f)| f.l2_spacetime()).collect(),
            linf: fields.iter().map(|(_, f)| f.linf()).collect(),
        })
    }
}

/// Pressure, velocity and void fraction of every cell and snapshot.
pub fn primitive_fields(
    field: &SolutionField<ConservedState>,
    eos: &EosModel,
) -> Result<(ScalarField, ScalarField, ScalarField)> {
    let prim = |f: fn(&PrimitiveState) -> f64| {
        ScalarField::from_fn(field, |u| Ok(f(&eos.prim_from_cons(u)?)))
    };
    Ok((prim(|v| v.p)?, prim(|v| v.u)?, prim(|v| v.alpha)?))
}

/// Pressure and velocity of an equilibrium solution.
pub fn eq_primitive_fields(
    field: &SolutionField<EqState>,
    eos: &EosModel,
) -> Result<(ScalarField, ScalarField)> {
    let mut p = Vec::with_capacity(field.len());
    let mut u = Vec::with_capacity(field.len());
    for snap in &field.states {
        let pu = eq_primitive(snap, eos)?;
        p.push(pu.iter().map(|x| x.0).collect());
        u.push(pu.iter().map(|x| x.1).collect());
    }
    let mk = |values| ScalarField {
        times: field.times.clone(),
        dx: field.grid.dx(),
        values,
    };
    Ok((mk(p), mk(u)))
}

fn residual(u: &ConservedState, eos: &EosModel) -> Result<(PrimitiveState, f64)> {
    let v = eos.prim_from_cons(u)?;
    let r = v.alpha - eos.alpha_eq.eval(v.p).0;
    Ok((v, r))
}

/// `α − α_eq(p)` per cell and snapshot.
pub fn relaxation_residual_field(
    field: &SolutionField<ConservedState>,
    eos: &EosModel,
) -> Result<ScalarField> {
    ScalarField::from_fn(field, |u| Ok(residual(u, eos)?.1))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "relaxation time must be positive, got {eps}"
        )))
    }
}

/// `R = (α − α_eq(p)) / ε` and its central-difference `∂_x R`.
pub fn r_eps_field(
    field: &SolutionField<ConservedState>,
    eps: f64,
    eos: &EosModel,
) -> Result<(ScalarField, ScalarField)> {
    check_eps(eps)?;
    let r = ScalarField::from_fn(field, |u| Ok(residual(u, eos)?.1 / eps))?;
    let dr = r.gradient(&field.grid);
    Ok((r, dr))
}

/// `Q = (ρ_g(p) − ρ_l) R`, so that `ρ_m = ρ_eq(p) + ε Q`.
pub fn q_eps_field(
    field: &SolutionField<ConservedState>,
    eps: f64,
    eos: &EosModel,
) -> Result<ScalarField> {
    check_eps(eps)?;
    ScalarField::from_fn(field, |u| {
        let (v, r) = residual(u, eos)?;
        Ok((v.p / eos.rt0() - eos.rho_l) * r / eps)
    })
}

/// `∑ η(U_i) dx` per snapshot.
pub fn total_entropy_series(
    field: &SolutionField<ConservedState>,
    eos: &EosModel,
) -> Result<Vec<f64>> {
    let dx = field.grid.dx();
    field
        .states
        .iter()
        .map(|snap| {
            let mut s = 0.0;
            for (i, u) in snap.iter().enumerate() {
                s += entropy_density(u, eos).map_err(|e| e.in_cell(i))?;
            }
            Ok(s * dx)
        })
        .collect()
}

/// Largest rise of a series above its running minimum; zero for a
/// non-increasing series.
pub fn worst_increase(series: &[f64]) -> f64 {
    let mut low = f64::INFINITY;
    let mut worst: f64 = 0.0;
    for &s in series {
        worst = worst.max(s - low);
        low = low.min(s);
    }
    worst
}

/// `(‖∂_x p‖_{L²}, ‖∂_x u‖_{L²})` per snapshot.
pub fn gradient_norm_series(
    field: &SolutionField<ConservedState>,
    eos: &EosModel,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (p, u, _) = primitive_fields(field, eos)?;
    Ok((
        p.gradient(&field.grid).l2_space(),
        u.gradient(&field.grid).l2_space(),
    ))
}

/// Forward differences between consecutive snapshots, piecewise constant in time.
fn time_derivative_norm(f: &ScalarField) -> Result<f64> {
    if f.times.len() < 2 {
        return Err(Error::Usage(
            "time derivatives need at least two snapshots".into(),
        ));
    }
    let mut total = 0.0;
    for k in 0..f.times.len() - 1 {
        let dt = f.times[k + 1] - f.times[k];
        let sq: f64 = f.values[k + 1]
            .iter()
            .zip(&f.values[k])
            .map(|(a, b)| ((a - b) / dt).powi(2))
            .sum();
        total += sq * f.dx * dt;
    }
    Ok(total.sqrt())
}

/// `(‖∂_t p‖_{L²(t,x)}, ‖∂_t u‖_{L²(t,x)})`.
pub fn time_derivative_norms(
    field: &SolutionField<ConservedState>,
    eos: &EosModel,
) -> Result<(f64, f64)> {
    if field.len() < 2 {
        return Err(Error::Usage(
            "time derivatives need at least two snapshots".into(),
        ));
    }
    let (p, u, _) = primitive_fields(field, eos)?;
    Ok((time_derivative_norm(&p)?, time_derivative_norm(&u)?))
}

/// Space-time L² norm of the residual of the pressure evolution equation
/// `∂_t p + u ∂_x p + (p/α) ∂_x u + (p/(ε α ρ_l))(1 − ρ_l R T₀/p)(α_eq − α) = 0`.
///
/// `∂_t p` is a forward difference between snapshots and the remaining
/// terms are averaged over its two ends. With `include_source = false` the
/// relaxation term is dropped.
pub fn pressure_equation_residual(
    field: &SolutionField<ConservedState>,
    eps: f64,
    eos: &EosModel,
    include_source: bool,
) -> Result<f64> {
    check_eps(eps)?;
    if field.len() < 2 {
        return Err(Error::Usage(
            "the pressure residual needs at least two snapshots".into(),
        ));
    }
    let (p, u, alpha) = primitive_fields(field, eos)?;
    let px = p.gradient(&field.grid);
    let ux = u.gradient(&field.grid);
    let rt0 = eos.rt0();
    let rhs = |k: usize, i: usize| {
        let (pp, uu, aa) = (p.values[k][i], u.values[k][i], alpha.values[k][i]);
        let mut r = -uu * px.values[k][i] - pp / aa * ux.values[k][i];
        if include_source {
            let aeq = eos.alpha_eq.eval(pp).0;
            r -= pp / (eps * aa * eos.rho_l) * (1.0 - eos.rho_l * rt0 / pp) * (aeq - aa);
        }
        r
    };
    let mut total = 0.0;
    for k in 0..field.len() - 1 {
        let dt = field.times[k + 1] - field.times[k];
        let sq: f64 = (0..field.grid.n_cells)
            .map(|i| {
                let dpdt = (p.values[k + 1][i] - p.values[k][i]) / dt;
                (dpdt - 0.5 * (rhs(k, i) + rhs(k + 1, i))).powi(2)
            })
            .sum();
        total += sq * field.grid.dx() * dt;
    }
    Ok(total.sqrt())
}

/// `(ρ_eq(p), ρ_eq(p) u)` of every relaxation state.
pub fn project_to_equilibrium(
    field: &SolutionField<ConservedState>,
    eos: &EosModel,
) -> Result<SolutionField<EqState>> {
    let states = field
        .states
        .iter()
        .map(|snap| {
            snap.iter()
                .enumerate()
                .map(|(i, u)| {
                    let v = eos.prim_from_cons(u)?;
                    EqState::from_pressure(v.p, v.u, eos).map_err(|e| e.in_cell(i))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SolutionField {
        grid: field.grid,
        times: field.times.clone(),
        states,
        config: field.config,
        eos: field.eos,
    })
}

/// Tensor-product polynomial bump `(1 − r_t²)⁴ (1 − r_x²)⁴` on
/// `|t − t_center| < t_half`, `|x − x_center| < x_half`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub t_center: f64,
    pub t_half: f64,
    pub x_center: f64,
    pub x_half: f64,
}

fn bump_1d(r: f64) -> (f64, f64) {
    if r.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - r * r;
    (s.powi(4), -8.0 * r * s.powi(3))
}

impl Bump {
    /// `(φ, ∂_t φ, ∂_x φ)`.
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let (ft, dft) = bump_1d((t - self.t_center) / self.t_half);
        let (fx, dfx) = bump_1d((x - self.x_center) / self.x_half);
        (ft * fx, dft / self.t_half * fx, ft * dfx / self.x_half)
    }

    fn check_support(&self, t0: f64, t1: f64, grid: &Grid1D) -> Result<()> {
        if !(self.t_half > 0.0 && self.x_half > 0.0) {
            return Err(Error::Usage("bump half-widths must be positive".into()));
        }
        let inside = self.t_center - self.t_half >= t0
            && self.t_center + self.t_half <= t1
            && self.x_center - self.x_half >= grid.x_lo
            && self.x_center + self.x_half <= grid.x_hi;
        if inside {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "test function support [{}, {}] x [{}, {}] leaves the domain [{t0}, {t1}] x [{}, {}]",
                self.t_center - self.t_half,
                self.t_center + self.t_half,
                self.x_center - self.x_half,
                self.x_center + self.x_half,
                grid.x_lo,
                grid.x_hi
            )))
        }
    }
}

/// Weak pairing `⟨∂_t η_eq + ∂_x q_eq, φ⟩ = −∫∫ (η_eq ∂_t φ + q_eq ∂_x φ) dx dt`.
pub fn entropy_dissipation_measure(
    field: &SolutionField<EqState>,
    phi: &Bump,
    eos: &EosModel,
) -> Result<f64> {
    let (t0, t1) = (
        field.times[0],
        *field.times.last().unwrap_or(&field.times[0]),
    );
    phi.check_support(t0, t1, &field.grid)?;
    let grid = &field.grid;
    let dx = grid.dx();
    let mut per_time = Vec::with_capacity(field.len());
    for (k, snap) in field.states.iter().enumerate() {
        let t = field.times[k];
        let mut s = 0.0;
        for (i, w) in snap.iter().enumerate() {
            let (_, dphi_t, dphi_x) = phi.eval(t, grid.center(i));
            if dphi_t == 0.0 && dphi_x == 0.0 {
                continue;
            }
            let eta = equilibrium_entropy(w.rho, w.mom, eos).map_err(|e| e.in_cell(i))?;
            s += eta * dphi_t + eta * w.velocity() * dphi_x;
        }
        per_time.push(s * dx);
    }
    Ok(-trapezoid(&field.times, &per_time))
}

fn check_same_layout<A, B>(a: &SolutionField<A>, b: &SolutionField<B>) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::Usage("fields live on different grids".into()));
    }
    let tol = 1e-9 * a.times.last().copied().unwrap_or(1.0).abs().max(1e-300);
    if a.times.len() != b.times.len()
        || a.times
            .iter()
            .zip(&b.times)
            .any(|(x, y)| (x - y).abs() > tol)
    {
        return Err(Error::Usage(format!(
            "fields have different snapshot times ({} vs {} snapshots)",
            a.times.len(),
            b.times.len()
        )));
    }
    Ok(())
}

/// `∑ [η_eq(U^ε) − η_eq(U⁰) − ∇η_eq(U⁰)·(U^ε − U⁰)] dx` per snapshot, with
/// the relaxation states projected onto equilibrium variables.
pub fn relative_entropy(
    relax: &SolutionField<ConservedState>,
    eq: &SolutionField<EqState>,
    eos: &EosModel,
) -> Result<Vec<f64>> {
    check_same_layout(relax, eq)?;
    let projected = project_to_equilibrium(relax, eos)?;
    relative_entropy_eq(&projected, eq, eos)
}

/// As [`relative_entropy`] for two fields already in equilibrium variables.
pub fn relative_entropy_eq(
    a: &SolutionField<EqState>,
    b: &SolutionField<EqState>,
    eos: &EosModel,
) -> Result<Vec<f64>> {
    check_same_layout(a, b)?;
    let dx = a.grid.dx();
    a.states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| {
            let mut s = 0.0;
            for (i, (u, v)) in sa.iter().zip(sb).enumerate() {
                let cell = |e: Error| e.in_cell(i);
                let eu = equilibrium_entropy(u.rho, u.mom, eos).map_err(cell)?;
                let ev = equilibrium_entropy(v.rho, v.mom, eos).map_err(cell)?;
                let g = equilibrium_entropy_gradient(v.rho, v.mom, eos).map_err(cell)?;
                s += eu - ev - g[0] * (u.rho - v.rho) - g[1] * (u.mom - v.mom);
            }
            Ok(s * dx)
        })
        .collect()
}

/// `‖U^ε − U⁰‖²_{L²}` per snapshot in equilibrium variables.
pub fn equilibrium_distance_sq(
    a: &SolutionField<EqState>,
    b: &SolutionField<EqState>,
) -> Result<Vec<f64>> {
    check_same_layout(a, b)?;
    let dx = a.grid.dx();
    Ok(a.states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| {
            sa.iter()
                .zip(sb)
                .map(|(u, v)| (u.rho - v.rho).powi(2) + (u.mom - v.mom).powi(2))
                .sum::<f64>()
                * dx
        })
        .collect())
}

/// Hessian of `η_eq(ρ, ρu)` by central differences of its analytic gradient.
pub fn equilibrium_entropy_hessian(w: &EqState, eos: &EosModel) -> Result<Matrix2<f64>> {
    let h_rho = 1e-6 * w.rho;
    let h_mom = 1e-6 * w.rho.max(w.mom.abs());
    let g = |r: f64, m: f64| equilibrium_entropy_gradient(r, m, eos);
    let (gr_p, gr_m) = (g(w.rho + h_rho, w.mom)?, g(w.rho - h_rho, w.mom)?);
    let (gm_p, gm_m) = (g(w.rho, w.mom + h_mom)?, g(w.rho, w.mom - h_mom)?);
    let a = (gr_p[0] - gr_m[0]) / (2.0 * h_rho);
    let b1 = (gr_p[1] - gr_m[1]) / (2.0 * h_rho);
    let b2 = (gm_p[0] - gm_m[0]) / (2.0 * h_mom);
    let d = (gm_p[1] - gm_m[1]) / (2.0 * h_mom);
    let b = 0.5 * (b1 + b2);
    Ok(Matrix2::new(a, b, b, d))
}

/// Signed extremes `(λ_min, λ_max)` of the Hessian eigenvalues of `η_eq`
/// over a grid of `(p, u)` states. Twice these values sandwich the relative
/// entropy per unit `‖U^ε − U⁰‖²` whenever the segment between the two
/// states stays in the box.
pub fn equilibrium_hessian_bounds(
    eos: &EosModel,
    p_range: (f64, f64),
    u_range: (f64, f64),
    samples: usize,
) -> Result<(f64, f64)> {
    let n = samples.max(2);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let p = p_range.0 + (p_range.1 - p_range.0) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let u = u_range.0 + (u_range.1 - u_range.0) * j as f64 / (n - 1) as f64;
            let w = EqState::from_pressure(p, u, eos)?;
            let ev = equilibrium_entropy_hessian(&w, eos)?.symmetric_eigenvalues();
            lo = lo.min(ev.min());
            hi = hi.max(ev.max());
        }
    }
    Ok((lo, hi))
}

/// Smallest `C ≥ 0` with `ℰ(t) ≤ e^{Ct} ℰ(0) + C ε (e^{Ct} − 1)` at every snapshot.
pub fn gronwall_constant(times: &[f64], rel_entropy: &[f64], eps: f64) -> Result<f64> {
    if times.len() != rel_entropy.len() || times.is_empty() {
        return Err(Error::Usage(
            "times and relative entropy must have equal, nonzero length".into(),
        ));
    }
    let e0 = rel_entropy[0];
    let holds = |c: f64| {
        times.iter().zip(rel_entropy).all(|(&t, &e)| {
            let g = (c * t).exp_m1();
            e <= (g + 1.0) * e0 + c * eps * g + 1e-14 * e.abs().max(e0.abs())
        })
    };
    if holds(0.0) {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while !holds(hi) {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Numerical(
                "no Gronwall constant below 1e8 fits the data".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Usage(
            "slope fit needs at least two paired points".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("slope fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// An equilibrium reference run and relaxation runs at several `ε`, all
/// sharing grid and snapshot times.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub eps_values: Vec<f64>,
    pub equilibrium: SolutionField<EqState>,
    pub relaxation: Vec<SolutionField<ConservedState>>,
}

/// Snapshot cadence used by paired runs when the configuration leaves it open.
pub fn paired_config(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        record_interval: Some(cfg.record_interval.unwrap_or(cfg.t_end / 50.0)),
        ..*cfg
    }
}

fn equilibrium_projection(ic: &[PrimitiveState], eos: &EosModel) -> Result<Vec<EqState>> {
    ic.iter()
        .enumerate()
        .map(|(i, v)| EqState::from_pressure(v.p, v.u, eos).map_err(|e| e.in_cell(i)))
        .collect()
}

fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.len() < 3 {
        return Err(Error::Usage(format!(
            "a rate study needs at least 3 relaxation times, got {}",
            eps_list.len()
        )));
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Usage(
            "relaxation times must be positive and strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Runs the relaxation system once per `ε` (concurrently) and the
/// equilibrium system once from the equilibrium projection of `ic`.
pub fn run_sweep(
    ic: &[PrimitiveState],
    eps_list: &[f64],
    grid: &Grid1D,
    cfg: &SolverConfig,
    eos: &EosModel,
) -> Result<Sweep> {
    let cfg = paired_config(cfg);
    let initial: Vec<ConservedState> = crate::relax::conserved_profile(ic, eos)?;
    let eq_initial = equilibrium_projection(ic, eos)?;
    let (equilibrium, relaxation) = rayon::join(
        || eq_run_conserved(eq_initial, &cfg, grid, eos),
        || {
            eps_list
                .par_iter()
                .map(|&eps| {
                    let c = SolverConfig { eps, ..cfg };
                    run_conserved(initial.clone(), &c, grid, eos)
                })
                .collect::<Result<Vec<_>>>()
        },
    );
    let equilibrium = equilibrium?;
    let relaxation = relaxation?;
    for r in &relaxation {
        check_same_layout(r, &equilibrium)?;
    }
    Ok(Sweep {
        eps_values: eps_list.to_vec(),
        equilibrium,
        relaxation,
    })
}

/// `(‖p^ε − p⁰‖_{L²(x,t)}, ‖u^ε − u⁰‖_{L²(x,t)})` for one member of a sweep.
pub fn limit_errors(
    relax: &SolutionField<ConservedState>,
    eq: &SolutionField<EqState>,
    eos: &EosModel,
) -> Result<(f64, f64)> {
    check_same_layout(relax, eq)?;
    let (p, u, _) = primitive_fields(relax, eos)?;
    let (p0, u0) = eq_primitive_fields(eq, eos)?;
    Ok((p.sub(&p0)?.l2_spacetime(), u.sub(&u0)?.l2_spacetime()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Equilibrium-solver self-difference between the grid and its half, set
/// against the model error at the largest `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreCheck {
    pub scheme_error_p: f64,
    pub scheme_error_u: f64,
    pub model_error_p: f64,
    pub model_error_u: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub eps_values: Vec<f64>,
    pub errors_p: Vec<f64>,
    pub errors_u: Vec<f64>,
    pub slope_p: f64,
    pub slope_u: f64,
    /// `‖α − α_eq‖²_{L²(x,t)} / ε` per run.
    pub residual_constant: Vec<f64>,
    pub slope_min: f64,
    pub slope_max: f64,
    pub precheck: Option<PreCheck>,
    pub verdict: Verdict,
}

impl RateReport {
    fn judge(&mut self) {
        let ok = |s: f64| s >= self.slope_min && s <= self.slope_max;
        self.verdict = match self.precheck {
            Some(pc) if !pc.passed => Verdict::Inconclusive,
            _ if ok(self.slope_p) && ok(self.slope_u) => Verdict::Pass,
            _ => Verdict::Fail,
        };
    }

    /// Report for injected errors `c ε^k` in both variables; exercises the fit
    /// and verdict logic without running a solver.
    pub fn synthetic(
        eps_list: &[f64],
        exponent: f64,
        c: f64,
        slope_min: f64,
        slope_max: f64,
    ) -> Result<Self> {
        check_eps_list(eps_list)?;
        let errors: Vec<f64> = eps_list.iter().map(|e| c * e.powf(exponent)).collect();
        let slope = fit_slope(eps_list, &errors)?;
        let mut r = RateReport {
            eps_values: eps_list.to_vec(),
            errors_p: errors.clone(),
            errors_u: errors,
            slope_p: slope,
            slope_u: slope,
            residual_constant: vec![c; eps_list.len()],
            slope_min,
            slope_max,
            precheck: None,
            verdict: Verdict::Fail,
        };
        r.judge();
        Ok(r)
    }

    /// `max / min` of the residual constants.
    pub fn residual_flatness(&self) -> f64 {
        let max = self
            .residual_constant
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let min = self
            .residual_constant
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Builds an initial profile on a given grid.
pub type ProfileFn<'a> = dyn Fn(&Grid1D) -> Result<Vec<PrimitiveState>> + Sync + 'a;

/// Equilibrium runs on `grid` and on a grid with half the cells, compared
/// after averaging pairs of fine cells.
pub fn scheme_error_estimate(
    ic: &ProfileFn,
    grid: &Grid1D,
    cfg: &SolverConfig,
    eos: &EosModel,
) -> Result<(f64, f64)> {
    if !grid.n_cells.is_multiple_of(2) {
        return Err(Error::Usage(
            "the refinement pre-check needs an even cell count".into(),
        ));
    }
    let cfg = paired_config(cfg);
    let coarse = Grid1D {
        n_cells: grid.n_cells / 2,
        ..*grid
    };
    let (fine, coarse_run) = rayon::join(
        || eq_run_conserved(equilibrium_projection(&ic(grid)?, eos)?, &cfg, grid, eos),
        || {
            eq_run_conserved(
                equilibrium_projection(&ic(&coarse)?, eos)?,
                &cfg,
                &coarse,
                eos,
            )
        },
    );
    let (pf, uf) = eq_primitive_fields(&fine?, eos)?;
    let (pc, uc) = eq_primitive_fields(&coarse_run?, eos)?;
    let restrict = |f: &ScalarField| ScalarField {
        times: f.times.clone(),
        dx: 2.0 * f.dx,
        values: f
            .values
            .iter()
            .map(|v| v.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect())
            .collect(),
    };
    if pf.times.len() != pc.times.len() {
        return Err(Error::Usage(
            "pre-check runs recorded different snapshot counts".into(),
        ));
    }
    Ok((
        restrict(&pf).sub(&pc)?.l2_spacetime(),
        restrict(&uf).sub(&uc)?.l2_spacetime(),
    ))
}

/// Measures the convergence rate of the relaxation limit.
///
/// `ic` builds the initial profile on a grid, so the refinement pre-check can
/// rerun the equilibrium solver on a coarser one.
pub fn rate_study(
    ic: &ProfileFn,
    eps_list: &[f64],
    grid: &Grid1D,
    cfg: &SolverConfig,
    eos: &EosModel,
    slope_bounds: (f64, f64),
) -> Result<(RateReport, Sweep)> {
    check_eps_list(eps_list)?;
    let profile = ic(grid)?;
    let (sweep, scheme) = rayon::join(
        || run_sweep(&profile, eps_list, grid, cfg, eos),
        || scheme_error_estimate(ic, grid, cfg, eos),
    );
    let sweep = sweep?;
    let (scheme_p, scheme_u) = scheme?;
    let mut errors_p = Vec::new();
    let mut errors_u = Vec::new();
    let mut residual_constant = Vec::new();
    for (relax, &eps) in sweep.relaxation.iter().zip(eps_list) {
        let (ep, eu) = limit_errors(relax, &sweep.equilibrium, eos)?;
        errors_p.push(ep);
        errors_u.push(eu);
        let r = relaxation_residual_field(relax, eos)?.l2_spacetime();
        residual_constant.push(r * r / eps);
    }
    let precheck = PreCheck {
        scheme_error_p: scheme_p,
        scheme_error_u: scheme_u,
        model_error_p: errors_p[0],
        model_error_u: errors_u[0],
        passed: scheme_p < errors_p[0] && scheme_u < errors_u[0],
    };
    let mut report = RateReport {
        eps_values: eps_list.to_vec(),
        slope_p: fit_slope(eps_list, &errors_p)?,
        slope_u: fit_slope(eps_list, &errors_u)?,
        errors_p,
        errors_u,
        residual_constant,
        slope_min: slope_bounds.0,
        slope_max: slope_bounds.1,
        precheck: Some(precheck),
        verdict: Verdict::Fail,
    };
    report.judge();
    Ok((report, sweep))
}
