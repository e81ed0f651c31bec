//! Finite-volume integrator for the equilibrium Euler system
//! `∂_t ρ_eq(p) + ∂_x(ρ_eq(p) u) = 0`, `∂_t(ρ_eq(p) u) + ∂_x(ρ_eq(p) u² + p) = 0`.
//!
//! Same Rusanov flux and explicit march as [`crate::relax`], with the wave
//! speed bounded by the equilibrium sound speed instead of the frozen one.

use crate::eos::EosModel;
use crate::error::{Error, Result};
use crate::field::{march, SolutionField, SolverConfig, TimeStepper};
use crate::grid::Grid1D;

/// Conservative variables `(ρ_eq(p), ρ_eq(p) u)` of the equilibrium system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EqState {
    pub rho: f64,
    pub mom: f64,
}

impl EqState {
    pub const fn new(rho: f64, mom: f64) -> Self {
        EqState { rho, mom }
    }

    /// State at pressure `p` and velocity `u`.
    pub fn from_pressure(p: f64, u: f64, eos: &EosModel) -> Result<Self> {
        let rho = eos.equilibrium_mixture_density(p)?;
        Ok(EqState::new(rho, rho * u))
    }

    pub fn velocity(&self) -> f64 {
        self.mom / self.rho
    }

    pub fn validate(&self, eos: &EosModel) -> Result<()> {
        let (lo, hi) = eos.equilibrium_density_range();
        let tol = 1e-12 * self.rho.abs();
        if !(self.rho >= lo - tol && self.rho <= hi + tol) {
            return Err(Error::InvalidState(format!(
                "equilibrium density {} outside the attainable range [{lo}, {hi}]",
                self.rho
            )));
        }
        if !self.mom.is_finite() {
            return Err(Error::InvalidState(format!(
                "momentum is not finite: {}",
                self.mom
            )));
        }
        Ok(())
    }
}

/// `(ρ u, ρ u² + p)` with `p` recovered from `ρ`.
pub fn eq_flux(w: &EqState, eos: &EosModel) -> Result<[f64; 2]> {
    let p = eos.invert_equilibrium_density(w.rho)?;
    Ok(flux_at(w, p))
}

fn flux_at(w: &EqState, p: f64) -> [f64; 2] {
    [w.mom, w.mom * w.mom / w.rho + p]
}

/// Per-cell pressures, warm-started from the previous step.
struct EqStepper<'a> {
    grid: &'a Grid1D,
    eos: &'a EosModel,
    cfg: &'a SolverConfig,
    pressure: Vec<f64>,
}

impl EqStepper<'_> {
    fn update_pressure(&mut self, field: &[EqState]) -> Result<()> {
        for (i, w) in field.iter().enumerate() {
            w.validate(self.eos).map_err(|e| e.in_cell(i))?;
            self.pressure[i] = self
                .eos
                .invert_equilibrium_density_from(w.rho, self.pressure[i])
                .map_err(|e| e.in_cell(i))?;
        }
        Ok(())
    }

    fn speeds(&self, field: &[EqState]) -> Result<Vec<f64>> {
        field
            .iter()
            .zip(&self.pressure)
            .enumerate()
            .map(|(i, (w, &p))| {
                let ae2 = self
                    .eos
                    .equilibrium_sound_speed_sq(p)
                    .map_err(|e| e.in_cell(i))?;
                Ok(w.velocity().abs() + ae2.sqrt())
            })
            .collect()
    }
}

impl TimeStepper<EqState> for EqStepper<'_> {
    fn stable_dt(&mut self, field: &[EqState]) -> Result<f64> {
        self.update_pressure(field)?;
        let s = self.speeds(field)?.into_iter().fold(0.0, f64::max);
        let dx = self.grid.dx();
        Ok(self.cfg.cfl / (s / dx + 2.0 * self.cfg.nu / (dx * dx)))
    }

    fn advance(&mut self, field: &[EqState], dt: f64) -> Result<Vec<EqState>> {
        self.update_pressure(field)?;
        let speed = self.speeds(field)?;
        let grid = self.grid;
        let n = grid.n_cells;
        let dx = grid.dx();
        let limit = dx / speed.iter().copied().fold(0.0, f64::max);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::StepSize { dt, limit });
        }

        let phys: Vec<[f64; 2]> = field
            .iter()
            .zip(&self.pressure)
            .map(|(w, &p)| flux_at(w, p))
            .collect();
        let flux: Vec<[f64; 2]> = (0..=n)
            .map(|k| {
                let l = grid.wrap(k as isize - 1);
                let r = grid.wrap(k as isize);
                let s = speed[l].max(speed[r]);
                let jump = [field[r].rho - field[l].rho, field[r].mom - field[l].mom];
                std::array::from_fn(|c| 0.5 * (phys[l][c] + phys[r][c]) - 0.5 * s * jump[c])
            })
            .collect();

        let lam = dt / dx;
        let mu = self.cfg.nu * dt / (dx * dx);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let left = field[grid.wrap(i as isize - 1)];
            let right = field[grid.wrap(i as isize + 1)];
            let w = field[i];
            let mut rho = w.rho - lam * (flux[i + 1][0] - flux[i][0]);
            let mut mom = w.mom - lam * (flux[i + 1][1] - flux[i][1]);
            if mu > 0.0 {
                rho += mu * (right.rho - 2.0 * w.rho + left.rho);
                mom += mu * (right.mom - 2.0 * w.mom + left.mom);
            }
            let new = EqState::new(rho, mom);
            new.validate(self.eos).map_err(|e| e.in_cell(i))?;
            out.push(new);
        }
        Ok(out)
    }
}

/// Marches the equilibrium system from a `(p, u)` profile. `cfg.eps` and
/// `cfg.source_scheme` are ignored.
pub fn eq_run(
    ic: &[(f64, f64)],
    cfg: &SolverConfig,
    grid: &Grid1D,
    eos: &EosModel,
) -> Result<SolutionField<EqState>> {
    let initial = ic
        .iter()
        .enumerate()
        .map(|(i, &(p, u))| EqState::from_pressure(p, u, eos).map_err(|e| e.in_cell(i)))
        .collect::<Result<Vec<_>>>()?;
    eq_run_conserved(initial, cfg, grid, eos)
}

/// As [`eq_run`], starting from conserved states.
pub fn eq_run_conserved(
    initial: Vec<EqState>,
    cfg: &SolverConfig,
    grid: &Grid1D,
    eos: &EosModel,
) -> Result<SolutionField<EqState>> {
    cfg.validate()?;
    grid.validate()?;
    eos.validate()?;
    if initial.len() != grid.n_cells {
        return Err(Error::Usage(format!(
            "initial profile has {} cells but the grid has {}",
            initial.len(),
            grid.n_cells
        )));
    }
    let mut stepper = EqStepper {
        grid,
        eos,
        cfg,
        pressure: vec![f64::NAN; grid.n_cells],
    };
    let (times, states) = march(initial, cfg, &mut stepper)?;
    Ok(SolutionField {
        grid: *grid,
        times,
        states,
        config: *cfg,
        eos: *eos,
    })
}

/// Pressure and velocity in every cell of a snapshot.
pub fn eq_primitive(field: &[EqState], eos: &EosModel) -> Result<Vec<(f64, f64)>> {
    let mut guess = f64::NAN;
    field
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let p = eos
                .invert_equilibrium_density_from(w.rho, guess)
                .map_err(|e| e.in_cell(i))?;
            guess = p;
            Ok((p, w.velocity()))
        })
        .collect()
}
