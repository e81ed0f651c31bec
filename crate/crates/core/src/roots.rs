//! Scalar root finding shared by the density inversion and the implicit source step.

use crate::error::{Error, Result};

/// Safeguarded Newton iteration on a bracket `[lo, hi]` with `f(lo)` and `f(hi)`
/// of opposite sign.
///
/// Newton steps that leave the current bracket, or fail to halve the residual,
/// are replaced by bisection. Stops when `|f(x)| <= ftol` or the bracket
/// collapses below `xtol`.
pub(crate) fn newton_bisect<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    guess: f64,
    ftol: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (f_lo, _) = f(lo)?;
    if f_lo.abs() <= ftol {
        return Ok(lo);
    }
    let (f_hi, _) = f(hi)?;
    if f_hi.abs() <= ftol {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Domain(format!(
            "root not bracketed on [{lo:e}, {hi:e}] (f = {f_lo:e}, {f_hi:e})"
        )));
    }
    // orient so that f(lo) < 0 < f(hi)
    let increasing = f_lo < 0.0;
    if !increasing {
        std::mem::swap(&mut lo, &mut hi);
    }

    let mut x = if guess.is_finite() && guess > lo.min(hi) && guess < lo.max(hi) {
        guess
    } else {
        0.5 * (lo + hi)
    };
    let mut last_abs = f64::INFINITY;
    for _ in 0..max_iter {
        let (fx, dfx) = f(x)?;
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if (hi - lo).abs() <= xtol {
            return Ok(x);
        }
        let newton = x - fx / dfx;
        let inside = newton.is_finite() && newton > lo.min(hi) && newton < lo.max(hi);
        x = if inside && fx.abs() <= 0.5 * last_abs {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last_abs = fx.abs();
    }
    Err(Error::Numerical(format!(
        "safeguarded Newton did not converge in {max_iter} iterations (last x = {x:e})"
    )))
}
