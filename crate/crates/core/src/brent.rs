//! One-dimensional bracketed minimization: golden-section search with
//! parabolic-interpolation acceleration, the classic derivative-free local
//! minimizer. Used to fit a chip's splitting ratio from intensity misfit.

use crate::error::{Error, Result};

/// Reciprocal golden-ratio step used when a parabolic step is rejected.
const CGOLD: f64 = 0.381_966_011_250_105;
/// Floor on the convergence window so `tol` near machine precision is safe.
const ZEPS: f64 = 1e-12;

/// Result of a scalar minimization. `evaluations` counts only the calls made
/// inside the minimizer (the caller supplies the starting value separately).
#[derive(Clone, Copy, Debug)]
pub struct MinimizeResult {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` over `[lo, hi]` starting from `x0` (with `f0 = f(x0)`
/// already known), to an absolute tolerance `tol` in the argument.
///
/// The running best point never regresses: the returned `fx` is the minimum
/// of `f0` and every value probed. If the evaluation budget runs out first,
/// the best point so far is returned with `converged = false`.
pub fn minimize_scalar<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    x0: f64,
    f0: f64,
    tol: f64,
    max_evals: usize,
) -> Result<MinimizeResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !(lo <= x0 && x0 <= hi) {
        return Err(Error::OutOfRange(format!(
            "minimization bracket must satisfy lo < hi and lo ≤ x0 ≤ hi, got ({lo}, {x0}, {hi})"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("tolerance must be positive, got {tol}")));
    }

    let (mut a, mut b) = (lo, hi);
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (f0, f0, f0);
    // d: the step taken last iteration; e: the step before that, used to
    // judge whether parabolic interpolation is making real progress
    let mut d = 0.0_f64;
    let mut e = 0.0_f64;
    let mut evals = 0usize;

    loop {
        let xm = 0.5 * (a + b);
        let tol1 = tol + ZEPS * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(MinimizeResult { x, fx, evaluations: evals, converged: true });
        }
        if evals >= max_evals {
            return Ok(MinimizeResult { x, fx, evaluations: evals, converged: false });
        }

        let mut use_golden = true;
        if e.abs() > tol1 {
            // parabola through (x, fx), (w, fw), (v, fv)
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            // accept the parabolic step only when it stays inside the
            // bracket and shrinks faster than the step two iterations ago
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }

        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        evals += 1;

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
}
