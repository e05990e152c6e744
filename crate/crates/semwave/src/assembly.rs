//! Galerkin assembly on the extruded quadrilateral mesh and the 1-D surface
//! mesh: the volume Laplace operator, volume and surface mass matrices, the
//! vertical-velocity recovery right-hand side, and the free-surface
//! right-hand sides in both the nonlinear and linearized flavours.
//!
//! Element loops run in parallel; the scatter into global storage is a
//! fixed-order sequential pass over a precomputed index map, so assembled
//! operators are bitwise reproducible for any thread count.
//!
//! Quadrature policy: volume operators and the surface mass use a Gauss rule
//! exact through degree 2p + 1, which makes them exact Galerkin matrices on
//! affine geometry. The nonlinear surface forms use a dealiasing rule exact
//! through at least 3p; the linearized forms collocate on the nodal points,
//! which reduces their projection to a plain function evaluation.

use crate::basis::{QuadratureRule, ReferenceElement};
use crate::error::{Error, Result, Routine};
use crate::mesh::{SurfaceMesh, VolumeMesh};
use crate::solver::{self, SolveReport, SparseOperator};
use rayon::prelude::*;

/// Dealiasing target for the nonlinear surface forms: integrands built from
/// triple products of degree-p data integrate exactly.
pub fn dealias_rule(p: usize) -> QuadratureRule {
    QuadratureRule::gauss_exact(3 * p)
}

/// Quadrature for volume operators: exact Galerkin integrals (degree 2p+1)
/// wherever the geometry is affine.
pub fn volume_rule(p: usize) -> QuadratureRule {
    QuadratureRule::gauss(p)
}

fn table(values: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    // Row-major flatten: entry [q * np + j].
    let (nq, np) = values.shape();
    let mut out = vec![0.0; nq * np];
    for q in 0..nq {
        for j in 0..np {
            out[q * np + j] = values[(q, j)];
        }
    }
    out
}

/// Topology-bound assembler for one volume mesh. Built once; value-only
/// reassembly after every vertical mesh update reuses the sparsity pattern
/// and the per-element scatter map.
pub struct VolumeAssembler {
    np: usize,
    nq: usize,
    nl: usize,
    rule: QuadratureRule,
    /// Basis values / derivatives at the quadrature points, `[q * np + j]`.
    b: Vec<f64>,
    bd: Vec<f64>,
    /// Reference 1-D mass on [-1, 1] (no Jacobian), `[j * np + l]`.
    ms_ref: Vec<f64>,
    n_ex: usize,
    n_ez: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Value index for each element-local (row, col) pair, `[e][a * nl + b]`.
    scatter: Vec<u32>,
    /// Global DoF per element-local node, `[e][i * np + j]`.
    elem_dofs: Vec<u32>,
}

const ELEMENT_BATCH: usize = 256;

impl VolumeAssembler {
    pub fn new(mesh: &VolumeMesh, elem: &ReferenceElement) -> Self {
        let p = mesh.order();
        assert_eq!(elem.order, p);
        let np = p + 1;
        let nl = np * np;
        let rule = volume_rule(p);
        let nq = rule.len();
        let b = table(&elem.lagrange_values_at(&rule.points));
        let bd = table(&elem.lagrange_derivs_at(&rule.points));

        // Bitwise symmetric: each unordered pair is integrated once and
        // mirrored, so transposed entries share the same rounding history.
        let mut ms_ref = vec![0.0; np * np];
        for j in 0..np {
            for l in j..np {
                let mut acc = 0.0;
                for q in 0..nq {
                    acc += rule.weights[q] * b[q * np + j] * b[q * np + l];
                }
                ms_ref[j * np + l] = acc;
                ms_ref[l * np + j] = acc;
            }
        }

        let n_ex = mesh.surface().n_elements();
        let n_ez = mesh.layers();
        let n_elems = n_ex * n_ez;
        let mut elem_dofs = vec![0u32; n_elems * nl];
        for ex in 0..n_ex {
            for ez in 0..n_ez {
                let e = ex * n_ez + ez;
                for i in 0..np {
                    for j in 0..np {
                        elem_dofs[e * nl + i * np + j] =
                            mesh.vol_dof(ex, ez, i, j) as u32;
                    }
                }
            }
        }

        // Sparsity pattern from the union of dense element blocks.
        let n = mesh.n_dofs();
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(n_elems * nl * nl);
        for e in 0..n_elems {
            let dofs = &elem_dofs[e * nl..(e + 1) * nl];
            for &ra in dofs {
                for &cb in dofs {
                    pairs.push((ra, cb));
                }
            }
        }
        pairs.par_sort_unstable();
        pairs.dedup();
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(pairs.len());
        for &(r, c) in &pairs {
            row_ptr[r as usize + 1] += 1;
            col_idx.push(c as usize);
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }

        let mut scatter = vec![0u32; n_elems * nl * nl];
        for e in 0..n_elems {
            let dofs = &elem_dofs[e * nl..(e + 1) * nl];
            for (a, &ra) in dofs.iter().enumerate() {
                let r = ra as usize;
                let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
                for (bi, &cb) in dofs.iter().enumerate() {
                    let k = cols.binary_search(&(cb as usize)).expect("pattern covers block");
                    scatter[e * nl * nl + a * nl + bi] = (row_ptr[r] + k) as u32;
                }
            }
        }

        VolumeAssembler {
            np,
            nq,
            nl,
            rule,
            b,
            bd,
            ms_ref,
            n_ex,
            n_ez,
            row_ptr,
            col_idx,
            scatter,
            elem_dofs,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.n_ex * self.n_ez
    }

    fn gather_geometry(&self, mesh: &VolumeMesh, e: usize, x: &mut [f64], z: &mut [f64]) {
        let (np, nl) = (self.np, self.nl);
        let ex = e / self.n_ez;
        let s = mesh.surface();
        for i in 0..np {
            let xi = s.local_x(ex, i);
            for j in 0..np {
                let g = self.elem_dofs[e * nl + i * np + j] as usize;
                x[i * np + j] = xi;
                z[i * np + j] = mesh.z()[g];
            }
        }
    }

    /// Local stiffness block for one element: isoparametric Jacobian per
    /// quadrature point. Column extrusion keeps `x` constant along the
    /// vertical index, so `x_s` vanishes identically and the metric needs
    /// `x_r` (function of r only) and the two z-derivatives.
    fn local_stiffness(&self, mesh: &VolumeMesh, e: usize, k_local: &mut [f64]) -> Result<()> {
        let (np, nq, nl) = (self.np, self.nq, self.nl);
        let mut z = vec![0.0; nl];
        let mut x = vec![0.0; nl];
        self.gather_geometry(mesh, e, &mut x, &mut z);

        // x(r) is shared by all vertical nodes; its derivative table is 1-D.
        let mut xr = vec![0.0; nq];
        for a in 0..nq {
            let mut acc = 0.0;
            for k in 0..np {
                acc += self.bd[a * np + k] * x[k * np];
            }
            xr[a] = acc;
        }
        // z_r(a, b) and z_s(a, b) by tensor contraction.
        let mut zr = vec![0.0; nq * nq];
        let mut zs = vec![0.0; nq * nq];
        let mut tmp_v = vec![0.0; nq * np]; // [a][l]: sum_k Bd[a][k] z[k][l]
        let mut tmp_b = vec![0.0; nq * np]; // [a][l]: sum_k B[a][k] z[k][l]
        for a in 0..nq {
            for l in 0..np {
                let mut accd = 0.0;
                let mut accb = 0.0;
                for k in 0..np {
                    accd += self.bd[a * np + k] * z[k * np + l];
                    accb += self.b[a * np + k] * z[k * np + l];
                }
                tmp_v[a * np + l] = accd;
                tmp_b[a * np + l] = accb;
            }
        }
        for a in 0..nq {
            for bq in 0..nq {
                let mut accr = 0.0;
                let mut accs = 0.0;
                for l in 0..np {
                    accr += tmp_v[a * np + l] * self.b[bq * np + l];
                    accs += tmp_b[a * np + l] * self.bd[bq * np + l];
                }
                zr[a * nq + bq] = accr;
                zs[a * nq + bq] = accs;
            }
        }

        k_local.iter_mut().for_each(|v| *v = 0.0);
        let mut gx = vec![0.0; nl];
        let mut gz = vec![0.0; nl];
        for a in 0..nq {
            for bq in 0..nq {
                let det = xr[a] * zs[a * nq + bq];
                if !(det > 0.0) {
                    return Err(Error::DegenerateGeometry(format!(
                        "non-positive Jacobian {det:.3e} in element {e}"
                    )));
                }
                let w = self.rule.weights[a] * self.rule.weights[bq] * det;
                let inv_det = 1.0 / det;
                let zr_ab = zr[a * nq + bq];
                let zs_ab = zs[a * nq + bq];
                for k in 0..np {
                    let dk = self.bd[a * np + k];
                    let vk = self.b[a * np + k];
                    for l in 0..np {
                        let nr = dk * self.b[bq * np + l];
                        let ns = vk * self.bd[bq * np + l];
                        let idx = k * np + l;
                        gx[idx] = (zs_ab * nr - zr_ab * ns) * inv_det;
                        gz[idx] = xr[a] * ns * inv_det;
                    }
                }
                for a1 in 0..nl {
                    let (gxa, gza) = (gx[a1], gz[a1]);
                    for b1 in a1..nl {
                        let v = w * (gxa * gx[b1] + gza * gz[b1]);
                        k_local[a1 * nl + b1] += v;
                    }
                }
            }
        }
        // Mirror the upper triangle.
        for a1 in 0..nl {
            for b1 in 0..a1 {
                k_local[a1 * nl + b1] = k_local[b1 * nl + a1];
            }
        }
        Ok(())
    }

    fn fill(
        &self,
        mesh: &VolumeMesh,
        local: impl Fn(&VolumeMesh, usize, &mut [f64]) -> Result<()> + Sync,
    ) -> Result<SparseOperator> {
        let mut vals = vec![0.0; self.col_idx.len()];
        self.fill_vals(mesh, local, &mut vals)?;
        Ok(SparseOperator::from_parts(
            self.row_ptr.len() - 1,
            self.row_ptr.clone(),
            self.col_idx.clone(),
            vals,
        ))
    }

    fn fill_vals(
        &self,
        mesh: &VolumeMesh,
        local: impl Fn(&VolumeMesh, usize, &mut [f64]) -> Result<()> + Sync,
        vals: &mut [f64],
    ) -> Result<()> {
        assert_eq!(vals.len(), self.col_idx.len());
        vals.fill(0.0);
        let nl = self.nl;
        let n_elems = self.n_elements();
        let mut batch_out: Vec<Result<Vec<f64>>> = Vec::new();
        for batch_start in (0..n_elems).step_by(ELEMENT_BATCH) {
            let batch_end = (batch_start + ELEMENT_BATCH).min(n_elems);
            batch_out.clear();
            (batch_start..batch_end)
                .into_par_iter()
                .map(|e| {
                    let mut k = vec![0.0; nl * nl];
                    local(mesh, e, &mut k)?;
                    Ok(k)
                })
                .collect_into_vec(&mut batch_out);
            for (off, res) in batch_out.drain(..).enumerate() {
                let e = batch_start + off;
                let k = res?;
                let map = &self.scatter[e * nl * nl..(e + 1) * nl * nl];
                for (idx, &v) in k.iter().enumerate() {
                    vals[map[idx] as usize] += v;
                }
            }
        }
        Ok(())
    }

    /// Volume Laplace (stiffness) operator on the current geometry.
    /// Symmetric positive semidefinite; constants span the kernel until
    /// Dirichlet rows are eliminated.
    pub fn assemble_laplace(&self, mesh: &VolumeMesh) -> Result<SparseOperator> {
        self.fill(mesh, |m, e, k| self.local_stiffness(m, e, k))
    }

    /// Consistent volume mass matrix. The extruded geometry keeps det J
    /// independent of the vertical coordinate inside each element, so the
    /// local block separates into (weighted r-mass) x (reference s-mass);
    /// the tests pin this against a dense isoparametric oracle.
    pub fn assemble_mass(&self, mesh: &VolumeMesh) -> Result<SparseOperator> {
        self.fill(mesh, |m, e, k| self.local_mass(m, e, k))
    }

    /// Overwrite the values of an operator previously produced by
    /// `assemble_laplace` with the current geometry. The sparsity pattern is
    /// tied to the mesh topology, which never changes under surface motion.
    pub fn assemble_laplace_into(&self, mesh: &VolumeMesh, op: &mut SparseOperator) -> Result<()> {
        assert_eq!(op.nnz(), self.col_idx.len());
        self.fill_vals(mesh, |m, e, k| self.local_stiffness(m, e, k), op.vals_mut())
    }

    /// In-place counterpart of `assemble_mass`; see `assemble_laplace_into`.
    pub fn assemble_mass_into(&self, mesh: &VolumeMesh, op: &mut SparseOperator) -> Result<()> {
        assert_eq!(op.nnz(), self.col_idx.len());
        self.fill_vals(mesh, |m, e, k| self.local_mass(m, e, k), op.vals_mut())
    }

    fn local_mass(&self, m: &VolumeMesh, e: usize, k: &mut [f64]) -> Result<()> {
        let np = self.np;
        let nq = self.nq;
        {
            let nl = self.nl;
            let mut z = vec![0.0; nl];
            let mut x = vec![0.0; nl];
            self.gather_geometry(m, e, &mut x, &mut z);
            let mut mr = vec![0.0; np * np];
            for a in 0..nq {
                // det J at (r_a, any s): x_r * z_s, both r-only.
                let mut xr = 0.0;
                let mut zb = 0.0;
                let mut zt = 0.0;
                for kk in 0..np {
                    xr += self.bd[a * np + kk] * x[kk * np];
                    zb += self.b[a * np + kk] * z[kk * np];
                    zt += self.b[a * np + kk] * z[kk * np + (np - 1)];
                }
                let det = xr * 0.5 * (zt - zb);
                if !(det > 0.0) {
                    return Err(Error::DegenerateGeometry(format!(
                        "non-positive Jacobian {det:.3e} in element {e}"
                    )));
                }
                let w = self.rule.weights[a] * det;
                for i in 0..np {
                    let wi = w * self.b[a * np + i];
                    for kk in i..np {
                        mr[i * np + kk] += wi * self.b[a * np + kk];
                    }
                }
            }
            for i in 0..np {
                for kk in 0..i {
                    mr[i * np + kk] = mr[kk * np + i];
                }
            }
            for i in 0..np {
                for j in 0..np {
                    for kk in 0..np {
                        let mik = mr[i * np + kk];
                        for l in 0..np {
                            k[(i * np + j) * nl + kk * np + l] =
                                mik * self.ms_ref[j * np + l];
                        }
                    }
                }
            }
            Ok(())
        }
    }

    /// Right-hand side of the vertical-velocity projection:
    /// `r_i = integral of basis_i * d(phi)/dz`. With vertical columns the
    /// integrand reduces to `x_r * phi_s`, polynomial in both directions,
    /// so the volume rule integrates it exactly.
    pub fn recovery_rhs(&self, mesh: &VolumeMesh, phi: &[f64]) -> Vec<f64> {
        assert_eq!(phi.len(), mesh.n_dofs());
        let (np, nq, nl) = (self.np, self.nq, self.nl);
        let n_elems = self.n_elements();
        let locals: Vec<Vec<f64>> = (0..n_elems)
            .into_par_iter()
            .map(|e| {
                let dx = mesh.surface().element_length();
                let dofs = &self.elem_dofs[e * nl..(e + 1) * nl];
                // phi_s at tensor quadrature points.
                let mut g = vec![0.0; nq * np]; // [a][l]: sum_k B[a][k] phi[k][l]
                for a in 0..nq {
                    for l in 0..np {
                        let mut acc = 0.0;
                        for k in 0..np {
                            acc += self.b[a * np + k] * phi[dofs[k * np + l] as usize];
                        }
                        g[a * np + l] = acc;
                    }
                }
                let mut phis = vec![0.0; nq * nq];
                for a in 0..nq {
                    for bq in 0..nq {
                        let mut acc = 0.0;
                        for l in 0..np {
                            acc += g[a * np + l] * self.bd[bq * np + l];
                        }
                        phis[a * nq + bq] = acc;
                    }
                }
                // r[(i,j)] = (dx/2) sum_a w_a B[a][i] sum_b w_b B[b][j] phi_s(a,b)
                let mut t = vec![0.0; nq * np]; // [a][j]
                for a in 0..nq {
                    for j in 0..np {
                        let mut acc = 0.0;
                        for bq in 0..nq {
                            acc += self.rule.weights[bq] * self.b[bq * np + j]
                                * phis[a * nq + bq];
                        }
                        t[a * np + j] = acc;
                    }
                }
                let scale = 0.5 * dx;
                let mut r = vec![0.0; nl];
                for i in 0..np {
                    for j in 0..np {
                        let mut acc = 0.0;
                        for a in 0..nq {
                            acc += self.rule.weights[a] * self.b[a * np + i] * t[a * np + j];
                        }
                        r[i * np + j] = scale * acc;
                    }
                }
                r
            })
            .collect();
        let n = self.row_ptr.len() - 1;
        let mut rhs = vec![0.0; n];
        for (e, local) in locals.iter().enumerate() {
            let dofs = &self.elem_dofs[e * nl..(e + 1) * nl];
            for (idx, &v) in local.iter().enumerate() {
                rhs[dofs[idx] as usize] += v;
            }
        }
        rhs
    }
}

/// Symmetric elimination of Dirichlet DoFs: the reduced operator keeps only
/// free rows/columns, and the eliminated columns move to the right-hand side
/// weighted by the boundary values. Structure is computed once; values are
/// re-routed from each fresh full operator.
pub struct DirichletLayout {
    n_full: usize,
    dirichlet: Vec<usize>,
    full_of_free: Vec<usize>,
    dirichlet_index: Vec<usize>, // usize::MAX for free DoFs
    red_row_ptr: Vec<usize>,
    red_col_idx: Vec<usize>,
    /// (full value index, reduced value index)
    to_reduced: Vec<(u32, u32)>,
    /// (full value index, reduced row, dirichlet list index)
    to_coupling: Vec<(u32, u32, u32)>,
}

impl DirichletLayout {
    pub fn new(a: &SparseOperator, dirichlet: &[usize]) -> Self {
        let n_full = a.n();
        let mut is_dirichlet = vec![false; n_full];
        let mut dirichlet_index = vec![usize::MAX; n_full];
        for (k, &d) in dirichlet.iter().enumerate() {
            assert!(d < n_full);
            assert!(!is_dirichlet[d], "duplicate Dirichlet DoF {d}");
            is_dirichlet[d] = true;
            dirichlet_index[d] = k;
        }
        let full_of_free: Vec<usize> =
            (0..n_full).filter(|&i| !is_dirichlet[i]).collect();
        let mut free_of_full = vec![usize::MAX; n_full];
        for (fr, &g) in full_of_free.iter().enumerate() {
            free_of_full[g] = fr;
        }

        let mut red_row_ptr = vec![0usize; full_of_free.len() + 1];
        let mut red_col_idx = Vec::new();
        let mut to_reduced = Vec::new();
        let mut to_coupling = Vec::new();
        for (fr, &g) in full_of_free.iter().enumerate() {
            for k in a.row_ptr()[g]..a.row_ptr()[g + 1] {
                let c = a.col_idx()[k];
                if is_dirichlet[c] {
                    to_coupling.push((k as u32, fr as u32, dirichlet_index[c] as u32));
                } else {
                    to_reduced.push((k as u32, red_col_idx.len() as u32));
                    red_col_idx.push(free_of_full[c]);
                    red_row_ptr[fr + 1] += 1;
                }
            }
        }
        for i in 0..full_of_free.len() {
            red_row_ptr[i + 1] += red_row_ptr[i];
        }

        DirichletLayout {
            n_full,
            dirichlet: dirichlet.to_vec(),
            full_of_free,
            dirichlet_index,
            red_row_ptr,
            red_col_idx,
            to_reduced,
            to_coupling,
        }
    }

    pub fn n_free(&self) -> usize {
        self.full_of_free.len()
    }

    /// Build the reduced system for the homogeneous-volume problem
    /// `A phi = 0` with `phi = values` on the Dirichlet set.
    pub fn reduce(&self, a: &SparseOperator, values: &[f64]) -> (SparseOperator, Vec<f64>) {
        assert_eq!(a.n(), self.n_full);
        assert_eq!(values.len(), self.dirichlet.len());
        let mut vals = vec![0.0; self.red_col_idx.len()];
        for &(src, dst) in &self.to_reduced {
            vals[dst as usize] = a.vals()[src as usize];
        }
        let mut rhs = vec![0.0; self.n_free()];
        for &(src, row, di) in &self.to_coupling {
            rhs[row as usize] -= a.vals()[src as usize] * values[di as usize];
        }
        let reduced = SparseOperator::from_parts(
            self.n_free(),
            self.red_row_ptr.clone(),
            self.red_col_idx.clone(),
            vals,
        );
        (reduced, rhs)
    }

    /// Refresh a reduced system built by `reduce` from new full-operator
    /// values and new boundary data, without reallocating the pattern.
    pub fn reduce_into(
        &self,
        a: &SparseOperator,
        values: &[f64],
        reduced: &mut SparseOperator,
        rhs: &mut [f64],
    ) {
        assert_eq!(a.n(), self.n_full);
        assert_eq!(values.len(), self.dirichlet.len());
        assert_eq!(reduced.nnz(), self.red_col_idx.len());
        assert_eq!(rhs.len(), self.n_free());
        let vals = reduced.vals_mut();
        for &(src, dst) in &self.to_reduced {
            vals[dst as usize] = a.vals()[src as usize];
        }
        rhs.fill(0.0);
        for &(src, row, di) in &self.to_coupling {
            rhs[row as usize] -= a.vals()[src as usize] * values[di as usize];
        }
    }

    /// Scatter a reduced solution and the boundary values back to the full
    /// DoF vector.
    pub fn expand_into(&self, x_red: &[f64], values: &[f64], full: &mut [f64]) {
        assert_eq!(x_red.len(), self.n_free());
        assert_eq!(full.len(), self.n_full);
        for (fr, &g) in self.full_of_free.iter().enumerate() {
            full[g] = x_red[fr];
        }
        for (k, &d) in self.dirichlet.iter().enumerate() {
            full[d] = values[k];
        }
    }

    /// Restrict a full vector to the free DoFs (warm starts).
    pub fn restrict_into(&self, full: &[f64], x_red: &mut [f64]) {
        for (fr, &g) in self.full_of_free.iter().enumerate() {
            x_red[fr] = full[g];
        }
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.dirichlet_index[dof] != usize::MAX
    }
}

/// One-shot symmetric Dirichlet application (tests, examples). The time
/// loop keeps a `DirichletLayout` instead.
pub fn apply_dirichlet(
    a: &SparseOperator,
    dirichlet_dofs: &[usize],
    values: &[f64],
) -> (SparseOperator, Vec<f64>, DirichletLayout) {
    let layout = DirichletLayout::new(a, dirichlet_dofs);
    let (reduced, rhs) = layout.reduce(a, values);
    (reduced, rhs, layout)
}

/// L2 projection of the vertical derivative of `phi` onto the basis:
/// assembles the projection right-hand side and solves the consistent mass
/// system. `w` carries the warm start in and the recovered field out.
pub fn gradient_recovery(
    assembler: &VolumeAssembler,
    mesh: &VolumeMesh,
    mass: &SparseOperator,
    phi: &[f64],
    w: &mut [f64],
) -> Result<SolveReport> {
    let rhs = assembler.recovery_rhs(mesh, phi);
    let report = solver::mass_solve(mass, &rhs, w, Routine::LaplaceSolve)?;
    if !report.converged {
        return Err(Error::SolveFailure {
            routine: Routine::LaplaceSolve,
            iterations: report.iterations,
            rel_residual: report.rel_residual,
            rtol: solver::MASS_RTOL,
        });
    }
    Ok(report)
}

/// Surface mass matrix on the 1-D free-surface mesh, assembled with the
/// given rule (pass the element's collocation rule for the diagonal
/// linearized variant, or a Gauss rule of exactness >= 2p for the exact
/// Galerkin mass).
pub fn assemble_surface_mass(
    surface: &SurfaceMesh,
    elem: &ReferenceElement,
    rule: &QuadratureRule,
) -> SparseOperator {
    let p = surface.order();
    assert_eq!(elem.order, p);
    let np = p + 1;
    let bt = table(&elem.lagrange_values_at(&rule.points));
    let jac = 0.5 * surface.element_length();
    let mut triplets = Vec::with_capacity(surface.n_elements() * np * np);
    for e in 0..surface.n_elements() {
        // One integral per unordered pair, mirrored, keeps the assembled
        // matrix bitwise symmetric.
        for i in 0..np {
            for j in i..np {
                let mut acc = 0.0;
                for q in 0..rule.len() {
                    acc += rule.weights[q] * bt[q * np + i] * bt[q * np + j];
                }
                let v = jac * acc;
                triplets.push((surface.dof(e, i), surface.dof(e, j), v));
                if i != j {
                    triplets.push((surface.dof(e, j), surface.dof(e, i), v));
                }
            }
        }
    }
    SparseOperator::from_triplets(surface.n_dofs(), &triplets)
}

/// Gauss-exact surface mass (the default for the nonlinear pipeline).
pub fn surface_mass_exact(surface: &SurfaceMesh, elem: &ReferenceElement) -> SparseOperator {
    assemble_surface_mass(surface, elem, &QuadratureRule::gauss(surface.order()))
}

/// Which free-surface right-hand sides to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceForm {
    /// Full kinematic/dynamic conditions in surface variables.
    Nonlinear,
    /// Linearized conditions about still water.
    Linear,
}

/// Weak-form right-hand sides of the two free-surface equations, evaluated
/// with the given quadrature rule. Returns `(r_kinematic, r_dynamic)`; the
/// caller projects them through the matching surface mass matrix.
pub fn assemble_fs_rhs(
    surface: &SurfaceMesh,
    elem: &ReferenceElement,
    rule: &QuadratureRule,
    form: SurfaceForm,
    gravity: f64,
    eta: &[f64],
    phi_eta: &[f64],
    w_eta: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let p = surface.order();
    let np = p + 1;
    let n = surface.n_dofs();
    assert_eq!(eta.len(), n);
    assert_eq!(phi_eta.len(), n);
    assert_eq!(w_eta.len(), n);
    let bt = table(&elem.lagrange_values_at(&rule.points));
    let bdt = table(&elem.lagrange_derivs_at(&rule.points));
    let dx = surface.element_length();
    let jac = 0.5 * dx;
    let inv_jac = 2.0 / dx;

    let nq = rule.len();
    let locals: Vec<(Vec<f64>, Vec<f64>)> = (0..surface.n_elements())
        .into_par_iter()
        .map(|e| {
            let mut rk = vec![0.0; np];
            let mut rd = vec![0.0; np];
            for q in 0..nq {
                let mut eta_q = 0.0;
                let mut eta_x = 0.0;
                let mut phi_x = 0.0;
                let mut w_q = 0.0;
                for k in 0..np {
                    let g = surface.dof(e, k);
                    eta_q += bt[q * np + k] * eta[g];
                    eta_x += bdt[q * np + k] * eta[g];
                    phi_x += bdt[q * np + k] * phi_eta[g];
                    w_q += bt[q * np + k] * w_eta[g];
                }
                eta_x *= inv_jac;
                phi_x *= inv_jac;
                let (ik, id) = match form {
                    SurfaceForm::Nonlinear => {
                        let slope = 1.0 + eta_x * eta_x;
                        (
                            -eta_x * phi_x + w_q * slope,
                            -gravity * eta_q - 0.5 * phi_x * phi_x
                                + 0.5 * w_q * w_q * slope,
                        )
                    }
                    SurfaceForm::Linear => (w_q, -gravity * eta_q),
                };
                let wq = rule.weights[q] * jac;
                for i in 0..np {
                    rk[i] += wq * ik * bt[q * np + i];
                    rd[i] += wq * id * bt[q * np + i];
                }
            }
            (rk, rd)
        })
        .collect();

    let mut r_kin = vec![0.0; n];
    let mut r_dyn = vec![0.0; n];
    for (e, (rk, rd)) in locals.iter().enumerate() {
        for i in 0..np {
            let g = surface.dof(e, i);
            r_kin[g] += rk[i];
            r_dyn[g] += rd[i];
        }
    }
    (r_kin, r_dyn)
}
