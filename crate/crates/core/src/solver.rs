//! Matrix-free Krylov solvers.
//!
//! Both solvers take an optional diagonal preconditioner. BiCGStab
//! handles the nonsymmetric soft-boundary systems; conjugate gradient the
//! symmetric positive definite hard-constraint blocks.

use alloc::vec;
use alloc::vec::Vec;

/// A square linear map applied without materializing its matrix.
pub trait LinearOperator {
    /// Dimension of the square operator.
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Stopping rule shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target relative residual `||b - Ax|| / ||b||`.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

/// Window over which the residual must drop tenfold.
pub const STAGNATION_WINDOW: usize = 50;

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    /// Iterations performed.
    pub iterations: usize,
    /// Relative residual of the returned iterate, recomputed from scratch.
    pub relative_residual: f64,
    /// Whether `tol` was reached.
    pub converged: bool,
    /// The residual failed to drop tenfold over a [`STAGNATION_WINDOW`].
    pub stagnated: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn precondition(diag: Option<&[f64]>, x: &[f64], out: &mut [f64]) {
    match diag {
        Some(d) => {
            for ((o, &xi), &di) in out.iter_mut().zip(x).zip(d) {
                *o = if di != 0.0 { xi / di } else { xi };
            }
        }
        None => out.copy_from_slice(x),
    }
}

fn residual<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Tracks the best iterate and the tenfold-per-window stagnation rule.
struct Progress {
    best_x: Vec<f64>,
    best_res: f64,
    checkpoint: f64,
    stagnated: bool,
}

impl Progress {
    fn new(x: &[f64], res: f64) -> Self {
        Self {
            best_x: x.to_vec(),
            best_res: res,
            checkpoint: res,
            stagnated: false,
        }
    }

    /// Returns `true` when the solve should stop for lack of progress.
    fn record(&mut self, iter: usize, x: &[f64], res: f64) -> bool {
        if res < self.best_res {
            self.best_res = res;
            self.best_x.copy_from_slice(x);
        }
        if iter.is_multiple_of(STAGNATION_WINDOW) {
            if self.best_res > self.checkpoint / 10.0 {
                self.stagnated = true;
                return true;
            }
            self.checkpoint = self.best_res;
        }
        false
    }
}

/// Solves `A x = b` by preconditioned BiCGStab, starting from the given `x`.
///
/// On stagnation or when the iteration cap is hit, `x` is set to the iterate
/// with the smallest residual seen.
pub fn bicgstab<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x: &mut [f64],
    diag: Option<&[f64]>,
    opts: &SolverOptions,
) -> SolveStats {
    let n = a.dim();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return SolveStats {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            stagnated: false,
        };
    }
    let mut r = vec![0.0; n];
    residual(a, b, x, &mut r);
    let mut rel = norm(&r) / b_norm;
    let mut progress = Progress::new(x, rel);
    let mut converged = rel <= opts.tol;

    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut rho = dot(&r_hat, &r);
        if rho.abs() <= 1e-30 * dot(&r_hat, &r_hat).max(f64::MIN_POSITIVE) {
            // shadow residual went orthogonal: restart from the current residual
            r_hat.copy_from_slice(&r);
            rho = dot(&r, &r);
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            rho_old = 1.0;
            alpha = 1.0;
            omega = 1.0;
        }
        let beta = (rho / rho_old) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precondition(diag, &p, &mut p_hat);
        a.apply(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            if progress.record(iterations, x, rel) {
                break;
            }
            r_hat.copy_from_slice(&r);
            rho_old = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / b_norm <= opts.tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            r.copy_from_slice(&s);
            converged = true;
            break;
        }
        precondition(diag, &s, &mut s_hat);
        a.apply(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm(&r) / b_norm;
        if rel <= opts.tol {
            converged = true;
            break;
        }
        if progress.record(iterations, x, rel) {
            break;
        }
        if omega == 0.0 {
            r_hat.copy_from_slice(&r);
            rho_old = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        rho_old = rho;
    }

    finish(a, b, x, b_norm, iterations, converged, progress)
}

fn finish<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x: &mut [f64],
    b_norm: f64,
    iterations: usize,
    converged: bool,
    progress: Progress,
) -> SolveStats {
    let mut r = vec![0.0; x.len()];
    residual(a, b, x, &mut r);
    let mut rel = norm(&r) / b_norm;
    if !converged && progress.best_res < rel {
        x.copy_from_slice(&progress.best_x);
        residual(a, b, x, &mut r);
        rel = norm(&r) / b_norm;
    }
    SolveStats {
        iterations,
        relative_residual: rel,
        converged,
        stagnated: progress.stagnated,
    }
}

/// Solves a symmetric positive definite system `A x = b` by preconditioned
/// conjugate gradient, starting from the given `x`.
pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x: &mut [f64],
    diag: Option<&[f64]>,
    opts: &SolverOptions,
) -> SolveStats {
    let n = a.dim();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return SolveStats {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            stagnated: false,
        };
    }
    let mut r = vec![0.0; n];
    residual(a, b, x, &mut r);
    let mut rel = norm(&r) / b_norm;
    let mut progress = Progress::new(x, rel);
    let mut converged = rel <= opts.tol;
    let mut z = vec![0.0; n];
    precondition(diag, &r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(&r) / b_norm;
        if rel <= opts.tol {
            converged = true;
            break;
        }
        if progress.record(iterations, x, rel) {
            break;
        }
        precondition(diag, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    finish(a, b, x, b_norm, iterations, converged, progress)
}
