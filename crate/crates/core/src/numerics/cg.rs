use crate::error::{ensure_finite, ensure_len, Result};

use super::{axpy_unchecked, dot_unchecked, norm};

/// A square linear operator applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `A x` into `out`. Both slices have length [`dim`](Self::dim).
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

impl<F> LinearOperator for (usize, F)
where
    F: Fn(&[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.1)(x, out)
    }
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖Ax − b‖ / ‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` for symmetric positive-definite `A`.
///
/// Stops once the relative residual drops to `tol`. After `max_iter`
/// iterations the iterate with the smallest residual is returned with
/// `converged = false`.
pub fn cg_solve<A: LinearOperator + ?Sized>(op: &A, b: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = op.dim();
    ensure_len("cg_solve rhs", n, b.len())?;
    ensure_finite("cg_solve rhs", b)?;

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs_old = dot_unchecked(&r, &r);

    let mut best_x = x.clone();
    let mut best_res = 1.0;

    for iter in 1..=max_iter {
        op.apply(&p, &mut ap);
        let pap = dot_unchecked(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            // operator is not positive definite along p (or breakdown)
            break;
        }
        let alpha = rs_old / pap;
        axpy_unchecked(alpha, &p, &mut x);
        axpy_unchecked(-alpha, &ap, &mut r);
        let rs_new = dot_unchecked(&r, &r);
        let rel = rs_new.sqrt() / b_norm;
        if rel < best_res {
            best_res = rel;
            best_x.copy_from_slice(&x);
        }
        if rel <= tol {
            return Ok(CgOutcome {
                x,
                iterations: iter,
                relative_residual: rel,
                converged: true,
            });
        }
        let beta = rs_new / rs_old;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rs_old = rs_new;
    }

    Ok(CgOutcome {
        x: best_x,
        iterations: max_iter,
        relative_residual: best_res,
        converged: false,
    })
}
