//! Adaptive Simpson quadrature, used for primitives `F(x, t) = ∫_0^t f(x, s) ds`
//! when no closed form is supplied.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("integrand is not finite at s = {at}")]
    NonFinite { at: f64 },
}

/// Stopping rule for [`adaptive_simpson`]: a panel is accepted once its error
/// estimate is below `max(abs, rel * |panel estimate|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-13, max_depth: 48 }
    }
}

/// Integrates `f` over `[a, b]` (either orientation) by recursive Simpson
/// bisection with Richardson correction.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let eval = |s: f64| {
        let v = f(s);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFinite { at: s })
        }
    };
    let fa = eval(a)?;
    let fb = eval(b)?;
    let m = 0.5 * (a + b);
    let fm = eval(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&eval, a, b, fa, fm, fb, whole, tol.abs, tol.rel, tol.max_depth)
}

#[allow(clippy::too_many_arguments)]
fn recurse<E>(
    eval: &E,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    abs: f64,
    rel: f64,
    depth: u32,
) -> Result<f64, QuadratureError>
where
    E: Fn(f64) -> Result<f64, QuadratureError>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(lm)?;
    let frm = eval(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    let delta = refined - whole;
    let target = abs.max(rel * refined.abs());
    if depth == 0 || delta.abs() <= 15.0 * target {
        return Ok(refined + delta / 15.0);
    }
    let l = recurse(eval, a, m, fa, flm, fm, left, 0.5 * abs, rel, depth - 1)?;
    let r = recurse(eval, m, b, fm, frm, fb, right, 0.5 * abs, rel, depth - 1)?;
    Ok(l + r)
}

/// `∫_0^t f(s) ds` split into panels `[0, 1], [1, 2], [2, 4], ...` (mirrored
/// for `t < 0`) so that rapidly growing integrands stay well resolved.
pub fn primitive<F>(f: F, t: f64, tol: Tolerance) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    if t == 0.0 {
        return Ok(0.0);
    }
    let sign = t.signum();
    let end = t.abs();
    let mut lo = 0.0;
    let mut hi = end.min(1.0);
    let mut acc = 0.0;
    loop {
        acc += adaptive_simpson(&f, sign * lo, sign * hi, tol)?;
        if hi >= end {
            break;
        }
        lo = hi;
        hi = (2.0 * hi).min(end);
    }
    Ok(acc)
}
