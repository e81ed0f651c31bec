//! Solver configuration, recorded solutions and the shared time-march loop.

use serde::{Deserialize, Serialize};

use crate::eos::EosModel;
use crate::error::{Error, Result};
use crate::grid::Grid1D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxScheme {
    Rusanov,
}

/// Integrator for the stiff relaxation substep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceScheme {
    /// Implicit Euler solved by safeguarded Newton.
    BackwardEuler,
    /// Closed-form solution of the cell ODE while `α_eq` is affine and
    /// unclamped along the trajectory; falls back to backward Euler otherwise.
    ExactAffine,
}

impl std::fmt::Display for SourceScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceScheme::BackwardEuler => "backward_euler",
            SourceScheme::ExactAffine => "exact_affine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Relaxation time `ε`.
    pub eps: f64,
    /// Artificial viscosity `ν`; zero on the production path.
    pub nu: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub flux_scheme: FluxScheme,
    pub source_scheme: SourceScheme,
    /// Record a snapshot every this many steps.
    pub record_every: usize,
    /// When set, record at multiples of this interval instead, shortening
    /// steps so that snapshots land exactly on them.
    pub record_interval: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps: 1e-3,
            nu: 0.0,
            cfl: 0.9,
            t_end: 0.1,
            flux_scheme: FluxScheme::Rusanov,
            source_scheme: SourceScheme::ExactAffine,
            record_every: 1,
            record_interval: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Domain(format!(
                "SolverConfig.eps must be > 0, got {}",
                self.eps
            )));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::Domain(format!(
                "SolverConfig.nu must be >= 0, got {}",
                self.nu
            )));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Domain(format!(
                "SolverConfig.cfl must lie in (0, 1), got {}",
                self.cfl
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Domain(format!(
                "SolverConfig.t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Domain(
                "SolverConfig.record_every must be >= 1".into(),
            ));
        }
        if let Some(dt) = self.record_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Domain(format!(
                    "SolverConfig.record_interval must be > 0, got {dt}"
                )));
            }
        }
        Ok(())
    }
}

/// Snapshots of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField<S> {
    pub grid: Grid1D,
    /// Strictly increasing, starting at 0.
    pub times: Vec<f64>,
    pub states: Vec<Vec<S>>,
    pub config: SolverConfig,
    pub eos: EosModel,
}

impl<S> SolutionField<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial(&self) -> &[S] {
        &self.states[0]
    }

    pub fn last(&self) -> &[S] {
        self.states
            .last()
            .expect("a solution field holds at least one snapshot")
    }

    /// Keeps every `k`-th snapshot, plus the final one.
    pub fn thinned(&self, k: usize) -> Self
    where
        S: Clone,
    {
        let k = k.max(1);
        let last = self.len() - 1;
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| i % k == 0 || i == last)
            .collect();
        SolutionField {
            grid: self.grid,
            times: keep.iter().map(|&i| self.times[i]).collect(),
            states: keep.iter().map(|&i| self.states[i].clone()).collect(),
            config: self.config,
            eos: self.eos,
        }
    }
}

/// One explicit scheme on a fixed grid.
pub(crate) trait TimeStepper<S> {
    /// Largest stable step for `states`.
    fn stable_dt(&mut self, states: &[S]) -> Result<f64>;
    fn advance(&mut self, states: &[S], dt: f64) -> Result<Vec<S>>;
}

/// Marches `initial` to `cfg.t_end`, recording snapshots per the cadence.
pub(crate) fn march<S: Clone, T: TimeStepper<S>>(
    initial: Vec<S>,
    cfg: &SolverConfig,
    stepper: &mut T,
) -> Result<(Vec<f64>, Vec<Vec<S>>)> {
    let t_end = cfg.t_end;
    let tiny = 1e-12 * t_end;
    let mut times = vec![0.0];
    let mut states = vec![initial.clone()];
    let mut current = initial;
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut next_out_k = 1usize;

    while t_end - t > tiny {
        let mut dt = stepper.stable_dt(&current).map_err(|e| e.at_time(t))?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(
                Error::Numerical(format!("non-positive stable time step {dt:e}")).at_time(t),
            );
        }
        let mut target = t_end;
        if let Some(interval) = cfg.record_interval {
            target = target.min(next_out_k as f64 * interval);
        }
        let mut lands = false;
        if t + dt >= target - tiny {
            dt = target - t;
            lands = true;
        }
        current = stepper.advance(&current, dt).map_err(|e| e.at_time(t))?;
        steps += 1;
        t = if lands { target } else { t + dt };

        let finished = t_end - t <= tiny;
        let record = match cfg.record_interval {
            Some(interval) => {
                let hit = lands && (t - next_out_k as f64 * interval).abs() <= tiny;
                if hit {
                    next_out_k += 1;
                }
                hit
            }
            None => steps.is_multiple_of(cfg.record_every),
        };
        if finished {
            t = t_end;
        }
        if record || finished {
            times.push(t);
            states.push(current.clone());
        }
    }
    Ok((times, states))
}
