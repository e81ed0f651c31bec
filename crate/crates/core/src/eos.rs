//! Thermodynamic closures of the isothermal homogeneous mixture.
//!
//! The gas phase is an isothermal ideal gas, `ρ_g(p) = p / (R T₀)`, the liquid
//! has constant density `ρ_l`, and the mixture density is the volume-weighted
//! average `ρ_m = α ρ_g(p) + (1 − α) ρ_l`. The equilibrium void fraction
//! `α_eq(p)` closes the relaxation source and defines the equilibrium density
//! `ρ_eq(p)` of the limit Euler system.
//!
//! States come in two flavours: [`PrimitiveState`] `(p, u, α)` and
//! [`ConservedState`] `(ρ_m, m, Γ)` with `m = ρ_m u` and `Γ = ρ_g α`.

use std::ops::{Add, Mul, Sub};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::newton_bisect;

/// Physical variables `(p, u, α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveState {
    pub p: f64,
    pub u: f64,
    pub alpha: f64,
}

impl PrimitiveState {
    pub fn new(p: f64, u: f64, alpha: f64) -> Result<Self> {
        let v = PrimitiveState { p, u, alpha };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidState(format!(
                "pressure must be positive, got {}",
                self.p
            )));
        }
        if !self.u.is_finite() {
            return Err(Error::InvalidState(format!(
                "velocity is not finite: {}",
                self.u
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidState(format!(
                "void fraction must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Conservative variables `(ρ_m, m, Γ)` of the relaxation system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservedState {
    pub rho_m: f64,
    pub m: f64,
    pub gamma: f64,
}

impl ConservedState {
    pub const fn new(rho_m: f64, m: f64, gamma: f64) -> Self {
        ConservedState { rho_m, m, gamma }
    }

    pub const fn to_array(self) -> [f64; 3] {
        [self.rho_m, self.m, self.gamma]
    }

    pub const fn from_array(a: [f64; 3]) -> Self {
        ConservedState::new(a[0], a[1], a[2])
    }

    /// Checks `ρ_m > 0`, `Γ > 0` and `ρ_l − ρ_m + Γ > 0`, plus `α < 1`.
    pub fn validate(&self, eos: &EosModel) -> Result<()> {
        if !(self.rho_m > 0.0 && self.rho_m.is_finite()) {
            return Err(Error::InvalidState(format!(
                "mixture density must be positive, got {}",
                self.rho_m
            )));
        }
        if !self.m.is_finite() {
            return Err(Error::InvalidState(format!(
                "momentum is not finite: {}",
                self.m
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidState(format!(
                "gas mass density must be positive, got {}",
                self.gamma
            )));
        }
        let liquid_gap = eos.rho_l - self.rho_m + self.gamma;
        if liquid_gap <= 0.0 {
            return Err(Error::InvalidState(format!(
                "rho_l - rho_m + Gamma = {liquid_gap:e} <= 0 (over-compressed liquid)"
            )));
        }
        if self.gamma >= self.rho_m {
            return Err(Error::InvalidState(format!(
                "Gamma = {} >= rho_m = {} (void fraction >= 1)",
                self.gamma, self.rho_m
            )));
        }
        Ok(())
    }
}

impl Add for ConservedState {
    type Output = ConservedState;
    fn add(self, o: Self) -> Self {
        ConservedState::new(self.rho_m + o.rho_m, self.m + o.m, self.gamma + o.gamma)
    }
}

impl Sub for ConservedState {
    type Output = ConservedState;
    fn sub(self, o: Self) -> Self {
        ConservedState::new(self.rho_m - o.rho_m, self.m - o.m, self.gamma - o.gamma)
    }
}

impl Mul<f64> for ConservedState {
    type Output = ConservedState;
    fn mul(self, s: f64) -> Self {
        ConservedState::new(self.rho_m * s, self.m * s, self.gamma * s)
    }
}

/// Parametrized equilibrium void fraction `α_eq(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum VoidFractionModel {
    /// `clamp(c0 + c1 p, alpha_min, alpha_max)`.
    AffineClamp {
        c0: f64,
        c1: f64,
        alpha_min: f64,
        alpha_max: f64,
    },
    /// `alpha_min + (alpha_max − alpha_min) / (1 + exp((p − p_mid) / width))`,
    /// smooth everywhere and strictly decreasing.
    Logistic {
        alpha_min: f64,
        alpha_max: f64,
        p_mid: f64,
        width: f64,
    },
}

impl Default for VoidFractionModel {
    fn default() -> Self {
        VoidFractionModel::AffineClamp {
            c0: 0.5,
            c1: -0.05,
            alpha_min: 0.01,
            alpha_max: 0.99,
        }
    }
}

impl VoidFractionModel {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            VoidFractionModel::AffineClamp {
                alpha_min,
                alpha_max,
                ..
            }
            | VoidFractionModel::Logistic {
                alpha_min,
                alpha_max,
                ..
            } => (alpha_min, alpha_max),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo > 0.0 && hi < 1.0 && lo < hi) {
            return Err(Error::Model(format!(
                "equilibrium void-fraction bounds must satisfy 0 < alpha_min < alpha_max < 1, got [{lo}, {hi}]"
            )));
        }
        match *self {
            VoidFractionModel::AffineClamp { c0, c1, .. }
                if !(c0.is_finite() && c1.is_finite()) =>
            {
                Err(Error::Model("affine coefficients must be finite".into()))
            }
            VoidFractionModel::Logistic { p_mid, width, .. }
                if !(width > 0.0 && p_mid.is_finite()) =>
            {
                Err(Error::Model(format!(
                    "logistic width must be positive, got {width}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Value and derivative at `p`. Defined for every finite `p`.
    pub fn eval(&self, p: f64) -> (f64, f64) {
        match *self {
            VoidFractionModel::AffineClamp {
                c0,
                c1,
                alpha_min,
                alpha_max,
            } => {
                let raw = c0 + c1 * p;
                if raw < alpha_min {
                    (alpha_min, 0.0)
                } else if raw > alpha_max {
                    (alpha_max, 0.0)
                } else {
                    (raw, c1)
                }
            }
            VoidFractionModel::Logistic {
                alpha_min,
                alpha_max,
                p_mid,
                width,
            } => {
                let span = alpha_max - alpha_min;
                let z = (p - p_mid) / width;
                // σ = 1 / (1 + e^z), written to avoid overflow for large |z|
                let sigma = if z > 0.0 {
                    let e = (-z).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + z.exp())
                };
                (
                    alpha_min + span * sigma,
                    -span * sigma * (1.0 - sigma) / width,
                )
            }
        }
    }

    /// Affine coefficients `(c0, c1)` when `p` lies strictly inside the unclamped region.
    pub(crate) fn affine_at(&self, p: f64) -> Option<(f64, f64)> {
        match *self {
            VoidFractionModel::AffineClamp {
                c0,
                c1,
                alpha_min,
                alpha_max,
            } => {
                let raw = c0 + c1 * p;
                (raw > alpha_min && raw < alpha_max).then_some((c0, c1))
            }
            VoidFractionModel::Logistic { .. } => None,
        }
    }
}

/// Frozen and equilibrium sound speeds, squared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoundSpeeds {
    /// `a_f² = R T₀ / α`.
    pub frozen_sq: f64,
    /// `a_e² = 1 / ρ_eq′(p)`.
    pub equilibrium_sq: f64,
}

impl SoundSpeeds {
    pub fn margin(&self) -> f64 {
        self.frozen_sq - self.equilibrium_sq
    }
}

/// Coefficients of the transport equation satisfied by the relaxation error
/// `R = (α − α_eq(p)) / ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportCoefficients {
    /// `Λ′(p)` with `Λ = α_eq ρ_g`.
    pub lambda_prime: f64,
    /// Multiplies `∂_x u`.
    pub a: f64,
    /// `B = −Λ′ B₁`.
    pub b: f64,
    /// Coefficient of `R` in the pressure evolution, `(p / (α ρ_l)) (1 − ρ_l R T₀ / p)`.
    pub b1: f64,
    /// `ρ_g(p)`, kept for [`TransportCoefficients::decay_rate`].
    pub rho_g: f64,
}

impl TransportCoefficients {
    /// `(B − 1) / ρ_g`; negative on a well-posed model.
    pub fn decay_rate(&self) -> f64 {
        (self.b - 1.0) / self.rho_g
    }
}

/// Constants of the isothermal mixture plus the equilibrium void-fraction map.
///
/// Immutable once built; every method is a pure function of its arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EosModel {
    pub r: f64,
    pub t0: f64,
    pub rho_l: f64,
    pub a_g: f64,
    pub a_l: f64,
    pub alpha_eq: VoidFractionModel,
    /// Lower end of the operating pressure range.
    pub p_lo: f64,
    /// Upper end of the operating pressure range.
    pub p_hi: f64,
}

impl Default for EosModel {
    fn default() -> Self {
        EosModel {
            r: 1.0,
            t0: 1.0,
            rho_l: 10.0,
            a_g: 0.0,
            a_l: 0.0,
            alpha_eq: VoidFractionModel::default(),
            p_lo: 0.5,
            p_hi: 8.0,
        }
    }
}

impl EosModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("R", self.r), ("T0", self.t0), ("rho_l", self.rho_l)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Model(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.a_g.is_finite() && self.a_l.is_finite()) {
            return Err(Error::Model("free-energy constants must be finite".into()));
        }
        if !(self.p_lo > 0.0 && self.p_lo < self.p_hi && self.p_hi.is_finite()) {
            return Err(Error::Model(format!(
                "operating range must satisfy 0 < p_lo < p_hi, got [{}, {}]",
                self.p_lo, self.p_hi
            )));
        }
        self.alpha_eq.validate()
    }

    /// Same model with a different operating range.
    pub fn with_range(mut self, p_lo: f64, p_hi: f64) -> Result<Self> {
        self.p_lo = p_lo;
        self.p_hi = p_hi;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha_eq(mut self, model: VoidFractionModel) -> Result<Self> {
        self.alpha_eq = model;
        self.validate()?;
        Ok(self)
    }

    #[inline]
    pub fn rt0(&self) -> f64 {
        self.r * self.t0
    }

    fn check_range(&self, p: f64) -> Result<()> {
        if p >= self.p_lo && p <= self.p_hi {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "pressure {p} outside the operating range [{}, {}]",
                self.p_lo, self.p_hi
            )))
        }
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "void fraction {alpha} outside (0, 1)"
            )))
        }
    }

    /// Pressure at which the gas density equals the liquid density.
    pub fn equal_density_pressure(&self) -> f64 {
        self.rho_l * self.rt0()
    }

    /// True when the operating range contains the equal-density pressure.
    pub fn range_crosses_equal_density(&self) -> bool {
        let p = self.equal_density_pressure();
        p >= self.p_lo && p <= self.p_hi
    }

    /// `ρ_g(p) = p / (R T₀)`.
    pub fn gas_density(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::Domain(format!("pressure must be positive, got {p}")));
        }
        Ok(p / self.rt0())
    }

    /// `α_eq(p)` on the operating range.
    pub fn alpha_eq(&self, p: f64) -> Result<f64> {
        self.check_range(p)?;
        Ok(self.alpha_eq.eval(p).0)
    }

    /// `α_eq′(p)` on the operating range.
    pub fn alpha_eq_slope(&self, p: f64) -> Result<f64> {
        self.check_range(p)?;
        Ok(self.alpha_eq.eval(p).1)
    }

    /// `α ρ_g(p) + (1 − α) ρ_l`.
    pub fn mixture_density(&self, p: f64, alpha: f64) -> Result<f64> {
        let rho_g = self.gas_density(p)?;
        Self::check_alpha(alpha)?;
        Ok(alpha * rho_g + (1.0 - alpha) * self.rho_l)
    }

    /// `ρ_eq(p) = α_eq(p) ρ_g(p) + (1 − α_eq(p)) ρ_l`.
    pub fn equilibrium_mixture_density(&self, p: f64) -> Result<f64> {
        self.check_range(p)?;
        Ok(self.equilibrium_density_raw(p).0)
    }

    /// `ρ_eq` and its derivative `1 / a_e²`, without range checks.
    fn equilibrium_density_raw(&self, p: f64) -> (f64, f64) {
        let (a, da) = self.alpha_eq.eval(p);
        let rho_g = p / self.rt0();
        (
            a * rho_g + (1.0 - a) * self.rho_l,
            da * (rho_g - self.rho_l) + a / self.rt0(),
        )
    }

    /// Attainable equilibrium densities `[ρ_eq(p_lo), ρ_eq(p_hi)]`.
    pub fn equilibrium_density_range(&self) -> (f64, f64) {
        (
            self.equilibrium_density_raw(self.p_lo).0,
            self.equilibrium_density_raw(self.p_hi).0,
        )
    }

    /// Pressure `p` with `ρ_eq(p) = rho`.
    pub fn invert_equilibrium_density(&self, rho: f64) -> Result<f64> {
        self.invert_equilibrium_density_from(rho, f64::NAN)
    }

    /// As [`EosModel::invert_equilibrium_density`], warm-started at `guess`.
    ///
    /// Safeguarded Newton–bisection on the operating range; converged when
    /// `|ρ_eq(p) − rho| <= 1e-12 · rho`.
    pub fn invert_equilibrium_density_from(&self, rho: f64, guess: f64) -> Result<f64> {
        const RTOL: f64 = 1e-12;
        const MAX_ITER: usize = 200;
        let (rho_lo, rho_hi) = self.equilibrium_density_range();
        let tol = RTOL * rho.abs();
        if !(rho >= rho_lo - tol && rho <= rho_hi + tol) {
            return Err(Error::Domain(format!(
                "density {rho} outside the attainable equilibrium range [{rho_lo}, {rho_hi}]"
            )));
        }
        newton_bisect(
            |p| {
                let (r, dr) = self.equilibrium_density_raw(p);
                Ok((r - rho, dr))
            },
            self.p_lo,
            self.p_hi,
            guess,
            tol,
            0.0,
            MAX_ITER,
        )
    }

    /// `(ρ_m, ρ_m u, ρ_g(p) α)`.
    pub fn cons_from_prim(&self, v: &PrimitiveState) -> Result<ConservedState> {
        v.validate()?;
        let rho_g = v.p / self.rt0();
        let rho_m = v.alpha * rho_g + (1.0 - v.alpha) * self.rho_l;
        let u = ConservedState::new(rho_m, rho_m * v.u, rho_g * v.alpha);
        u.validate(self)?;
        Ok(u)
    }

    /// Inverse of [`EosModel::cons_from_prim`]:
    /// `α = 1 − (ρ_m − Γ)/ρ_l`, `p = R T₀ Γ / α`, `u = m / ρ_m`.
    pub fn prim_from_cons(&self, u: &ConservedState) -> Result<PrimitiveState> {
        u.validate(self)?;
        let alpha = (self.rho_l - u.rho_m + u.gamma) / self.rho_l;
        Ok(PrimitiveState {
            p: self.rt0() * u.gamma / alpha,
            u: u.m / u.rho_m,
            alpha,
        })
    }

    /// `J = ∂U/∂V` for `V = (p, u, α)` and `U = (ρ_m, m, Γ)`.
    pub fn jacobian_prim_to_cons(&self, v: &PrimitiveState) -> Result<Matrix3<f64>> {
        v.validate()?;
        let rho_g = v.p / self.rt0();
        let rho_m = v.alpha * rho_g + (1.0 - v.alpha) * self.rho_l;
        let dp = v.alpha / self.rt0();
        let da = rho_g - self.rho_l;
        #[rustfmt::skip]
        let j = Matrix3::new(
            dp,       0.0,   da,
            v.u * dp, rho_m, v.u * da,
            dp,       0.0,   rho_g,
        );
        Ok(j)
    }

    /// Extremes `(σ_min, σ_max)` of the singular values of `J`, giving
    /// `(1/σ_max)‖J d‖ <= ‖d‖ <= (1/σ_min)‖J d‖` for every direction `d`.
    pub fn jacobian_singular_values(&self, v: &PrimitiveState) -> Result<(f64, f64)> {
        let j = self.jacobian_prim_to_cons(v)?;
        let sv = j.singular_values();
        Ok((sv.min(), sv.max()))
    }

    /// `a_e² = [α_eq′ (p/(R T₀) − ρ_l) + α_eq / (R T₀)]⁻¹` without range checks.
    pub(crate) fn equilibrium_sound_speed_sq_raw(&self, p: f64) -> Result<f64> {
        let (_, inv) = self.equilibrium_density_raw(p);
        if !(inv > 0.0) {
            return Err(Error::Model(format!(
                "equilibrium sound speed undefined at p = {p}: d(rho_eq)/dp = {inv:e} <= 0"
            )));
        }
        Ok(1.0 / inv)
    }

    pub fn equilibrium_sound_speed_sq(&self, p: f64) -> Result<f64> {
        self.check_range(p)?;
        self.equilibrium_sound_speed_sq_raw(p)
    }

    /// Frozen speed at the given `α` and equilibrium speed from the map at `p`.
    pub fn sound_speeds(&self, p: f64, alpha: f64) -> Result<SoundSpeeds> {
        self.check_range(p)?;
        Self::check_alpha(alpha)?;
        Ok(SoundSpeeds {
            frozen_sq: self.rt0() / alpha,
            equilibrium_sq: self.equilibrium_sound_speed_sq_raw(p)?,
        })
    }

    /// Coefficients `A`, `B`, `B₁` of the relaxation-error transport equation.
    pub fn error_transport_coefficients(
        &self,
        p: f64,
        alpha: f64,
    ) -> Result<TransportCoefficients> {
        self.check_range(p)?;
        Self::check_alpha(alpha)?;
        let rt0 = self.rt0();
        let rho_g = p / rt0;
        let (a_eq, da_eq) = self.alpha_eq.eval(p);
        let lambda_prime = a_eq / rt0 + rho_g * da_eq;
        let b1 = p / (alpha * self.rho_l) * (1.0 - self.rho_l * rt0 / p);
        Ok(TransportCoefficients {
            lambda_prime,
            a: lambda_prime * p / alpha - rho_g * a_eq,
            b: -lambda_prime * b1,
            b1,
            rho_g,
        })
    }
}

/// Outcome of [`validate_subcharacteristic`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubcharacteristicReport {
    /// Smallest `a_f² − a_e²` over the grid, evaluated at `α = α_eq(p)`.
    pub min_margin: f64,
    /// Pressure where the minimum was attained.
    pub argmin_p: f64,
    /// Number of pressures evaluated.
    pub samples: usize,
    pub passed: bool,
    /// Problems found on the way (model errors, range warnings).
    pub messages: Vec<String>,
}

/// Sweeps `a_f²(p, α_eq(p)) − a_e²(p)` over `p_grid`. Failures are reported, not returned.
pub fn validate_subcharacteristic(eos: &EosModel, p_grid: &[f64]) -> SubcharacteristicReport {
    let mut report = SubcharacteristicReport {
        min_margin: f64::INFINITY,
        argmin_p: f64::NAN,
        samples: 0,
        passed: false,
        messages: Vec::new(),
    };
    let mut failed = p_grid.is_empty();
    for &p in p_grid {
        let margin = eos
            .alpha_eq(p)
            .and_then(|a| eos.sound_speeds(p, a))
            .map(|s| s.margin());
        match margin {
            Ok(m) => {
                report.samples += 1;
                if m < report.min_margin {
                    report.min_margin = m;
                    report.argmin_p = p;
                }
            }
            Err(e) => {
                failed = true;
                report.messages.push(format!("p = {p}: {e}"));
            }
        }
    }
    if eos.range_crosses_equal_density() {
        report.messages.push(format!(
            "warning: operating range crosses the equal-density pressure p = {}",
            eos.equal_density_pressure()
        ));
    }
    report.passed = !failed && report.min_margin > 0.0;
    report
}

/// `n` equally spaced pressures covering the operating range, endpoints included.
pub fn operating_grid(eos: &EosModel, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| eos.p_lo + (eos.p_hi - eos.p_lo) * i as f64 / (n - 1) as f64)
        .collect()
}
