//! The entropy pair built from the negative Helmholtz free energy density.
//!
//! ```text
//! η(ρ_m, m, Γ) = −( Γ A_g − Γ R ln(ρ_l Γ) + Γ R ln(ρ_l − ρ_m + Γ) + (ρ_m − Γ) A_l + m²/(2ρ_m) )
//! q = η u
//! ```
//!
//! Gradient and Hessian are closed-form derivatives of `η`. The Γ-derivative
//! depends on the state only through the gas density:
//! `∂η/∂Γ = R ln ρ_g + R − R ρ_g/ρ_l − A_g + A_l`.
//! Its value on the equilibrium manifold, [`equilibrium_offset`], vanishes only
//! where the constants `A_g`, `A_l` are calibrated against `α_eq`.

use nalgebra::Matrix3;

use crate::eos::{ConservedState, EosModel};
use crate::error::{Error, Result};
use crate::roots::newton_bisect;

/// Entropy density, flux, Γ-derivative and Hessian at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEval {
    pub eta: f64,
    pub q: f64,
    pub deta_dgamma: f64,
    pub hessian: Matrix3<f64>,
}

/// Evaluates the whole pair at `u`.
pub fn evaluate(u: &ConservedState, eos: &EosModel) -> Result<EntropyEval> {
    let eta = entropy_density(u, eos)?;
    Ok(EntropyEval {
        eta,
        q: eta * u.m / u.rho_m,
        deta_dgamma: entropy_gradient(u, eos)?[2],
        hessian: entropy_hessian(u, eos)?,
    })
}

/// `s = ρ_l − ρ_m + Γ = ρ_l α`, checked positive.
fn liquid_gap(u: &ConservedState, eos: &EosModel) -> Result<f64> {
    u.validate(eos)?;
    Ok(eos.rho_l - u.rho_m + u.gamma)
}

pub fn entropy_density(u: &ConservedState, eos: &EosModel) -> Result<f64> {
    let s = liquid_gap(u, eos)?;
    let g = u.gamma;
    let free = g * eos.a_g - g * eos.r * (eos.rho_l * g).ln()
        + g * eos.r * s.ln()
        + (u.rho_m - g) * eos.a_l
        + u.m * u.m / (2.0 * u.rho_m);
    Ok(-free)
}

/// `q = η m / ρ_m`.
pub fn entropy_flux(u: &ConservedState, eos: &EosModel) -> Result<f64> {
    Ok(entropy_density(u, eos)? * u.m / u.rho_m)
}

/// `∇η` in conservative variables `(ρ_m, m, Γ)`.
pub fn entropy_gradient(u: &ConservedState, eos: &EosModel) -> Result<[f64; 3]> {
    let s = liquid_gap(u, eos)?;
    let r = eos.r;
    let vel = u.m / u.rho_m;
    let ratio = u.gamma / s; // = ρ_g / ρ_l
    Ok([
        r * ratio - eos.a_l + 0.5 * vel * vel,
        -vel,
        r * (eos.rho_l * ratio).ln() + r - r * ratio - eos.a_g + eos.a_l,
    ])
}

/// `D²η` in conservative variables.
///
/// The `ΓΓ` entry equals `R (ρ_l − ρ_g)² / (α ρ_g ρ_l²)`.
pub fn entropy_hessian(u: &ConservedState, eos: &EosModel) -> Result<Matrix3<f64>> {
    let s = liquid_gap(u, eos)?;
    let r = eos.r;
    let (rho, m, g) = (u.rho_m, u.m, u.gamma);
    let h_rr = r * g / (s * s) - m * m / (rho * rho * rho);
    let h_rm = m / (rho * rho);
    let h_rg = r * (s - g) / (s * s);
    let h_mm = -1.0 / rho;
    let h_gg = r * (s - g) * (s - g) / (g * s * s);
    #[rustfmt::skip]
    let h = Matrix3::new(
        h_rr, h_rm, h_rg,
        h_rm, h_mm, 0.0,
        h_rg, 0.0,  h_gg,
    );
    Ok(h)
}

/// `η₁ = ½ (∂_x U)ᵀ D²η(U) (∂_x U)`.
pub fn first_order_entropy_density(
    u: &ConservedState,
    du_dx: &[f64; 3],
    eos: &EosModel,
) -> Result<f64> {
    let h = entropy_hessian(u, eos)?;
    let d = nalgebra::Vector3::from_row_slice(du_dx);
    Ok(0.5 * d.dot(&(h * d)))
}

/// State on the equilibrium manifold `α = α_eq(p)` with velocity `u`.
fn equilibrium_state(p: f64, vel: f64, eos: &EosModel) -> Result<ConservedState> {
    let rho = eos.equilibrium_mixture_density(p)?;
    let gamma = eos.gas_density(p)? * eos.alpha_eq(p)?;
    Ok(ConservedState::new(rho, rho * vel, gamma))
}

/// `(η_eq, q_eq)`: the pair restricted to the equilibrium manifold.
pub fn equilibrium_entropy_pair(p: f64, vel: f64, eos: &EosModel) -> Result<(f64, f64)> {
    let eta = entropy_density(&equilibrium_state(p, vel, eos)?, eos)?;
    Ok((eta, eta * vel))
}

/// Second pair `η² = η_eq + C ρ_eq u`, `q² = q_eq + C (ρ_eq u² + p)`.
pub fn companion_entropy_pair(p: f64, vel: f64, c: f64, eos: &EosModel) -> Result<(f64, f64)> {
    let (eta, q) = equilibrium_entropy_pair(p, vel, eos)?;
    let rho = eos.equilibrium_mixture_density(p)?;
    Ok((eta + c * rho * vel, q + c * (rho * vel * vel + p)))
}

/// `η_eq` as a function of the equilibrium conservative pair `(ρ, ρ u)`.
pub fn equilibrium_entropy(rho: f64, mom: f64, eos: &EosModel) -> Result<f64> {
    let p = eos.invert_equilibrium_density(rho)?;
    Ok(equilibrium_entropy_pair(p, mom / rho, eos)?.0)
}

/// `∇η_eq` with respect to `(ρ, ρ u)`.
///
/// Chain rule through `Γ_eq(ρ) = Λ(p(ρ))`: `dΓ_eq/dρ = Λ′(p) a_e²(p)`.
pub fn equilibrium_entropy_gradient(rho: f64, mom: f64, eos: &EosModel) -> Result<[f64; 2]> {
    let p = eos.invert_equilibrium_density(rho)?;
    let vel = mom / rho;
    let state = equilibrium_state(p, vel, eos)?;
    let grad = entropy_gradient(&state, eos)?;
    let (a_eq, da_eq) = eos.alpha_eq.eval(p);
    let lambda_prime = a_eq / eos.rt0() + da_eq * p / eos.rt0();
    let dgamma_drho = lambda_prime * eos.equilibrium_sound_speed_sq(p)?;
    Ok([grad[0] + grad[2] * dgamma_drho, grad[1]])
}

/// `−(1/ε) (∂η/∂Γ) (α − α_eq(p))`, the entropy production of the relaxation source.
pub fn entropy_production_rate(u: &ConservedState, eps: f64, eos: &EosModel) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!(
            "relaxation time must be positive, got {eps}"
        )));
    }
    let v = eos.prim_from_cons(u)?;
    let deta = entropy_gradient(u, eos)?[2];
    Ok(-deta * (v.alpha - eos.alpha_eq(v.p)?) / eps)
}

/// `∂η/∂Γ` as a function of the gas density alone.
fn deta_dgamma_at(rho_g: f64, eos: &EosModel) -> f64 {
    eos.r * (rho_g.ln() + 1.0 - rho_g / eos.rho_l) - eos.a_g + eos.a_l
}

/// `δ_eq(p) = ∂η/∂Γ` evaluated at `α = α_eq(p)`.
///
/// Depends on `p` only. Zero where the free-energy constants are consistent
/// with the equilibrium map.
pub fn equilibrium_offset(p: f64, eos: &EosModel) -> Result<f64> {
    eos.alpha_eq(p)?;
    Ok(deta_dgamma_at(eos.gas_density(p)?, eos))
}

/// Value of `A_g` that makes [`equilibrium_offset`] vanish at `p_ref`.
pub fn calibrated_a_g(p_ref: f64, eos: &EosModel) -> Result<f64> {
    let off = equilibrium_offset(p_ref, eos)?;
    Ok(eos.a_g + off)
}

/// Gas density at which `∂η/∂Γ = 0`, on the branch `ρ_g < ρ_l`.
pub fn critical_gas_density(eos: &EosModel) -> Result<f64> {
    let top = deta_dgamma_at(eos.rho_l, eos);
    if !(top > 0.0) {
        return Err(Error::Domain(
            "entropy has no critical point in Gamma below the liquid density".into(),
        ));
    }
    // ∂η/∂Γ(lo) = −R (1 + lo/ρ_l) < 0
    let lo = ((eos.a_g - eos.a_l) / eos.r - 2.0).exp();
    if !(lo > 0.0 && lo < eos.rho_l) {
        return Err(Error::Domain(
            "cannot bracket the critical gas density".into(),
        ));
    }
    newton_bisect(
        |x| Ok((deta_dgamma_at(x, eos), eos.r * (1.0 / x - 1.0 / eos.rho_l))),
        lo,
        eos.rho_l,
        f64::NAN,
        1e-15,
        0.0,
        300,
    )
}

/// Critical point `Γ*` of `η` in `Γ` at fixed `(ρ_m, m)`.
///
/// `η` is strictly convex in `Γ` along this line, so `Γ*` is its unique
/// minimizer and `(∂η/∂Γ)(Γ − Γ*) >= 0`.
pub fn critical_gamma(rho_m: f64, eos: &EosModel) -> Result<f64> {
    let x = critical_gas_density(eos)?;
    let a = 1.0 - rho_m / eos.rho_l;
    let alpha = a / (1.0 - x / eos.rho_l);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "critical void fraction {alpha} outside (0, 1) at rho_m = {rho_m}"
        )));
    }
    Ok(x * alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::PrimitiveState;
    use approx::assert_relative_eq;

    const REF: ConservedState = ConservedState::new(6.8, 6.8, 0.8);

    fn eos() -> EosModel {
        EosModel::default()
    }

    #[test]
    fn density_at_reference_state() {
        let expected = -(-0.8 * 8f64.ln() + 0.8 * 4f64.ln() + 3.4);
        assert_relative_eq!(
            entropy_density(&REF, &eos()).unwrap(),
            expected,
            max_relative = 1e-14
        );
        assert_relative_eq!(expected, -2.84548, max_relative = 1e-5);
    }

    #[test]
    fn density_simple_cases() {
        let still = ConservedState::new(6.8, 0.0, 0.8);
        let kinetic =
            entropy_density(&still, &eos()).unwrap() - entropy_density(&REF, &eos()).unwrap();
        assert_relative_eq!(kinetic, 3.4, max_relative = 1e-13);
        let shifted = EosModel { a_g: 1.0, ..eos() };
        let d = entropy_density(&REF, &shifted).unwrap() - entropy_density(&REF, &eos()).unwrap();
        assert_relative_eq!(d, -0.8, max_relative = 1e-13);
    }

    #[test]
    fn flux_cases() {
        let e = eos();
        assert_relative_eq!(
            entropy_flux(&REF, &e).unwrap(),
            entropy_density(&REF, &e).unwrap()
        );
        assert_eq!(
            entropy_flux(&ConservedState::new(6.8, 0.0, 0.8), &e).unwrap(),
            0.0
        );
        let back = ConservedState::new(6.8, -6.8, 0.8);
        assert_relative_eq!(
            entropy_flux(&back, &e).unwrap(),
            -entropy_flux(&REF, &e).unwrap()
        );
    }

    #[test]
    fn gradient_zero_momentum_component() {
        let g = entropy_gradient(&ConservedState::new(6.8, 0.0, 0.8), &eos()).unwrap();
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn gamma_gamma_entry_closed_form() {
        let h = entropy_hessian(&REF, &eos()).unwrap();
        assert_relative_eq!(h[(2, 2)], 0.8, max_relative = 1e-14);
        assert_eq!(h, h.transpose());
        let v = PrimitiveState::new(3.3, -0.4, 0.27).unwrap();
        let e = eos();
        let u = e.cons_from_prim(&v).unwrap();
        let rho_g = e.gas_density(v.p).unwrap();
        let closed = e.r * (e.rho_l - rho_g).powi(2) / (v.alpha * rho_g * e.rho_l * e.rho_l);
        assert_relative_eq!(
            entropy_hessian(&u, &e).unwrap()[(2, 2)],
            closed,
            max_relative = 1e-13
        );
    }

    #[test]
    fn first_order_density_cases() {
        let e = eos();
        assert_eq!(
            first_order_entropy_density(&REF, &[0.0; 3], &e).unwrap(),
            0.0
        );
        assert_relative_eq!(
            first_order_entropy_density(&REF, &[0.0, 0.0, 1.0], &e).unwrap(),
            0.4,
            max_relative = 1e-14
        );
        let d = [0.3, -0.1, 0.05];
        let d2 = [0.6, -0.2, 0.1];
        assert_relative_eq!(
            first_order_entropy_density(&REF, &d2, &e).unwrap(),
            4.0 * first_order_entropy_density(&REF, &d, &e).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn equilibrium_pair_examples() {
        let e = eos();
        let (eta, q) = equilibrium_entropy_pair(2.0, 1.0, &e).unwrap();
        let at_ref = entropy_density(&REF, &e).unwrap();
        assert_relative_eq!(eta, at_ref, max_relative = 1e-14);
        assert_relative_eq!(q, at_ref, max_relative = 1e-14);
        assert_eq!(equilibrium_entropy_pair(2.0, 0.0, &e).unwrap().1, 0.0);

        let c = 0.7;
        let (eta2, q2) = companion_entropy_pair(2.0, 1.0, c, &e).unwrap();
        assert_relative_eq!(eta2, eta + c * 6.8, max_relative = 1e-14);
        assert_relative_eq!(q2, q + c * (6.8 + 2.0), max_relative = 1e-14);
    }

    #[test]
    fn equilibrium_gradient_matches_finite_differences() {
        let e = eos();
        for (rho, mom) in [(6.8, 6.8), (7.5, -1.2), (6.1, 0.3)] {
            let g = equilibrium_entropy_gradient(rho, mom, &e).unwrap();
            let h = 1e-6;
            let d_rho = (equilibrium_entropy(rho + h, mom, &e).unwrap()
                - equilibrium_entropy(rho - h, mom, &e).unwrap())
                / (2.0 * h);
            let d_mom = (equilibrium_entropy(rho, mom + h, &e).unwrap()
                - equilibrium_entropy(rho, mom - h, &e).unwrap())
                / (2.0 * h);
            assert_relative_eq!(g[0], d_rho, max_relative = 1e-6, epsilon = 1e-9);
            assert_relative_eq!(g[1], d_mom, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn production_rate_cases() {
        let e = eos();
        let eps = 1e-3;
        let at_eq = e
            .cons_from_prim(&PrimitiveState::new(2.0, 0.0, 0.4).unwrap())
            .unwrap();
        assert!(entropy_production_rate(&at_eq, eps, &e).unwrap().abs() < 1e-9);

        let off = e
            .cons_from_prim(&PrimitiveState::new(2.0, 0.0, 0.41).unwrap())
            .unwrap();
        let rate = entropy_production_rate(&off, eps, &e).unwrap();
        let c0 = entropy_hessian(&off, &e).unwrap()[(2, 2)];
        assert!(rate < 0.0);
        assert!(rate.abs() >= c0 * 0.01 * 0.01 / eps);
        let halved = entropy_production_rate(&off, eps / 2.0, &e).unwrap();
        assert_relative_eq!(halved, 2.0 * rate, max_relative = 1e-14);
        assert!(entropy_production_rate(&off, 0.0, &e).is_err());
    }

    #[test]
    fn offset_is_nonzero_for_default_constants_and_calibrates_away() {
        let e = eos();
        let off = equilibrium_offset(2.0, &e).unwrap();
        assert_relative_eq!(off, 2f64.ln() + 1.0 - 0.2, max_relative = 1e-14);
        let cal = EosModel {
            a_g: calibrated_a_g(2.0, &e).unwrap(),
            ..e
        };
        assert!(equilibrium_offset(2.0, &cal).unwrap().abs() < 1e-14);
    }

    #[test]
    fn critical_gamma_zeroes_the_derivative() {
        let e = eos();
        let x = critical_gas_density(&e).unwrap();
        assert!(deta_dgamma_at(x, &e).abs() < 1e-13);
        let g = critical_gamma(6.8, &e).unwrap();
        let at = ConservedState::new(6.8, 0.0, g);
        assert!(entropy_gradient(&at, &e).unwrap()[2].abs() < 1e-12);
    }
}
