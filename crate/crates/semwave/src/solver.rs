//! Sparse symmetric operators and the preconditioned conjugate gradient
//! loop used for every linear solve in the pipeline.
//!
//! All reductions run in a fixed order regardless of the rayon pool size:
//! the mat-vec parallelizes over disjoint row chunks (each row is a
//! sequential dot product) and inner products reduce fixed-size chunk
//! partials sequentially. Solves are therefore bitwise reproducible across
//! thread counts, which the determinism tests rely on.

use crate::error::{Error, Result, Routine};
use rayon::prelude::*;
use std::time::Instant;

/// Relative tolerance for potential (Laplace) solves.
pub const LAPLACE_RTOL: f64 = 1e-6;
/// Absolute floor for potential solves.
pub const LAPLACE_ATOL: f64 = 1e-15;
/// Relative tolerance for mass-matrix solves (projections).
pub const MASS_RTOL: f64 = 1e-5;
/// Absolute floor for mass-matrix solves.
pub const MASS_ATOL: f64 = 1e-15;

const DOT_CHUNK: usize = 4096;
const ROW_CHUNK: usize = 512;

/// Deterministic inner product: fixed-size chunk partials summed in order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partials: Vec<f64> = a
        .par_chunks(DOT_CHUNK)
        .zip(b.par_chunks(DOT_CHUNK))
        .map(|(ca, cb)| {
            let mut acc = 0.0;
            for (x, y) in ca.iter().zip(cb) {
                acc += x * y;
            }
            acc
        })
        .collect();
    partials.iter().sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Compressed sparse row matrix, square, column indices sorted and unique
/// within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Accumulate duplicate triplets and build sorted CSR.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut vals = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// Wrap a prebuilt CSR skeleton. Callers promise sorted, unique columns.
    pub fn from_parts(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, vals: Vec<f64>) -> Self {
        debug_assert_eq!(row_ptr.len(), n + 1);
        debug_assert_eq!(*row_ptr.last().unwrap(), col_idx.len());
        debug_assert_eq!(col_idx.len(), vals.len());
        #[cfg(debug_assertions)]
        for r in 0..n {
            for k in row_ptr[r] + 1..row_ptr[r + 1] {
                debug_assert!(col_idx[k - 1] < col_idx[k], "unsorted row {r}");
            }
        }
        SparseOperator {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn vals_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] = self.vals[k];
                }
            }
        }
        d
    }

    /// y = A x, row-parallel, bitwise independent of thread count.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let row_ptr = &self.row_ptr;
        let col_idx = &self.col_idx;
        let vals = &self.vals;
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(ci, yc)| {
            let r0 = ci * ROW_CHUNK;
            for (k, out) in yc.iter_mut().enumerate() {
                let r = r0 + k;
                let mut acc = 0.0;
                for idx in row_ptr[r]..row_ptr[r + 1] {
                    acc += vals[idx] * x[col_idx[idx]];
                }
                *out = acc;
            }
        });
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Largest relative asymmetry |a_ij - a_ji| / max|a|; 0 for symmetric.
    pub fn asymmetry(&self) -> f64 {
        let mut max_abs = 0.0_f64;
        for &v in &self.vals {
            max_abs = max_abs.max(v.abs());
        }
        if max_abs == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let v = self.vals[k];
                let mirror = self.get(c, r);
                worst = worst.max((v - mirror).abs());
            }
        }
        worst / max_abs
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Dump as coordinate-list text: one `row,col,value` line per entry.
    pub fn write_coo<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "row,col,value")?;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                writeln!(out, "{r},{},{}", self.col_idx[k], self.vals[k])?;
            }
        }
        Ok(())
    }
}

pub trait Preconditioner: Sync {
    /// z = M^{-1} r.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal (Jacobi) preconditioner. The default everywhere.
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(a: &SparseOperator) -> Result<Self> {
        let diag = a.diag();
        let mut inv_diag = vec![0.0; diag.len()];
        for (i, &d) in diag.iter().enumerate() {
            if !(d > 0.0) {
                return Err(Error::invalid(
                    "operator",
                    format!("Jacobi preconditioner needs a positive diagonal; row {i} has {d:.3e}"),
                ));
            }
            inv_diag[i] = 1.0 / d;
        }
        Ok(JacobiPreconditioner { inv_diag })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Symmetric Gauss-Seidel: M = (D + L) D^{-1} (D + U). Sequential sweeps,
/// stronger than Jacobi on stiff operators at the price of serial work.
pub struct SymmetricGaussSeidel {
    a: SparseOperator,
    diag: Vec<f64>,
}

impl SymmetricGaussSeidel {
    pub fn new(a: &SparseOperator) -> Result<Self> {
        let diag = a.diag();
        for (i, &d) in diag.iter().enumerate() {
            if !(d > 0.0) {
                return Err(Error::invalid(
                    "operator",
                    format!("Gauss-Seidel needs a positive diagonal; row {i} has {d:.3e}"),
                ));
            }
        }
        Ok(SymmetricGaussSeidel { a: a.clone(), diag })
    }
}

impl Preconditioner for SymmetricGaussSeidel {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.a.n();
        let (rp, ci, vals) = (self.a.row_ptr(), self.a.col_idx(), self.a.vals());
        // Forward: (D + L) y = r.
        for i in 0..n {
            let mut acc = r[i];
            for k in rp[i]..rp[i + 1] {
                let j = ci[k];
                if j < i {
                    acc -= vals[k] * z[j];
                }
            }
            z[i] = acc / self.diag[i];
        }
        // Scale: y <- D y, then backward: (D + U) z = y.
        for i in 0..n {
            z[i] *= self.diag[i];
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in rp[i]..rp[i + 1] {
                let j = ci[k];
                if j > i {
                    acc -= vals[k] * z[j];
                }
            }
            z[i] = acc / self.diag[i];
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverParams {
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
}

impl SolverParams {
    pub fn laplace() -> Self {
        SolverParams {
            rtol: LAPLACE_RTOL,
            atol: LAPLACE_ATOL,
            max_iter: 10_000,
        }
    }

    pub fn mass() -> Self {
        SolverParams {
            rtol: MASS_RTOL,
            atol: MASS_ATOL,
            max_iter: 5_000,
        }
    }
}

/// Outcome of one linear solve. `converged == true` guarantees the
/// explicitly recomputed residual satisfies `||b - Ax|| <= max(rtol ||b||, atol)`.
#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub routine: Routine,
    pub iterations: usize,
    pub converged: bool,
    pub rel_residual: f64,
    pub abs_residual: f64,
    pub rhs_norm: f64,
    pub seconds: f64,
}

impl SolveReport {
    pub const CSV_HEADER: &'static str =
        "routine,iterations,converged,rel_residual,abs_residual,rhs_norm,seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:e},{:e},{:e},{:.6}",
            self.routine.name(),
            self.iterations,
            self.converged,
            self.rel_residual,
            self.abs_residual,
            self.rhs_norm,
            self.seconds
        )
    }
}

/// Preconditioned conjugate gradients with warm start: `x` holds the initial
/// guess on entry and the solution on exit.
///
/// The running recurrence residual controls the iteration; on hitting the
/// target the true residual `b - Ax` is recomputed and must itself pass the
/// test before the solve is declared converged (guarding against recurrence
/// drift). Non-convergence is reported, not raised; a loss of positivity
/// (p'Ap <= 0) is an error.
pub fn cg_solve(
    a: &SparseOperator,
    b: &[f64],
    x: &mut [f64],
    precond: &dyn Preconditioner,
    params: SolverParams,
    routine: Routine,
) -> Result<SolveReport> {
    let n = a.n();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let start = Instant::now();

    let rhs_norm = norm2(b);
    let target = (params.rtol * rhs_norm).max(params.atol);

    let mut r = vec![0.0; n];
    let mut q = vec![0.0; n];
    a.matvec_into(x, &mut q);
    for i in 0..n {
        r[i] = b[i] - q[i];
    }

    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut iterations = 0usize;
    let mut converged = norm2(&r) <= target;
    let mut restart = true;
    let mut rz = 0.0;

    while !converged && iterations < params.max_iter {
        if restart {
            precond.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            restart = false;
        }
        a.matvec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::IndefiniteOperator {
                routine,
                curvature: pq,
                iteration: iterations,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        iterations += 1;
        if norm2(&r) <= target {
            // Recompute the true residual before declaring victory.
            a.matvec_into(x, &mut q);
            for i in 0..n {
                r[i] = b[i] - q[i];
            }
            if norm2(&r) <= target {
                converged = true;
            } else {
                restart = true;
            }
            continue;
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    // Final true residual for the report (also covers the 0-iteration path).
    a.matvec_into(x, &mut q);
    for i in 0..n {
        r[i] = b[i] - q[i];
    }
    let abs_residual = norm2(&r);
    let converged = abs_residual <= target;
    Ok(SolveReport {
        routine,
        iterations,
        converged,
        rel_residual: if rhs_norm > 0.0 {
            abs_residual / rhs_norm
        } else {
            abs_residual
        },
        abs_residual,
        rhs_norm,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Mass-matrix projection solve at the projection tolerances with a Jacobi
/// preconditioner.
pub fn mass_solve(
    m: &SparseOperator,
    b: &[f64],
    x: &mut [f64],
    routine: Routine,
) -> Result<SolveReport> {
    let precond = JacobiPreconditioner::new(m)?;
    cg_solve(m, b, x, &precond, SolverParams::mass(), routine)
}
