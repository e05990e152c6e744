//! One-dimensional reference interval machinery: Legendre polynomials, Gauss
//! and Gauss-Lobatto rules, the nodal/modal Vandermonde pair, collocation
//! differentiation, and the exponential modal filter.
//!
//! Everything lives on [-1, 1]. Two-dimensional operators are formed as tensor
//! products at the point of use (see `assembly`).

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Machine-precision target for Newton root polishing.
const ROOT_TOL: f64 = 1e-15;

/// Value and first derivative of the Legendre polynomial `P_n` at `x`.
///
/// Three-term recurrence for the value, the standard derivative identity
/// `P'_{n+1} = P'_{n-1} + (2n+1) P_n` carried along.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut pm1, mut dpm1) = (1.0_f64, 0.0_f64);
    let (mut p, mut dp) = (x, 1.0_f64);
    for k in 1..n {
        let kf = k as f64;
        let pnext = ((2.0 * kf + 1.0) * x * p - kf * pm1) / (kf + 1.0);
        let dpnext = dpm1 + (2.0 * kf + 1.0) * p;
        pm1 = p;
        dpm1 = dp;
        p = pnext;
        dp = dpnext;
    }
    (p, dp)
}

/// Orthonormal Legendre basis value: `psi_j = sqrt((2j+1)/2) * P_j`.
pub fn legendre_orthonormal(j: usize, x: f64) -> f64 {
    let (p, _) = legendre(j, x);
    ((2.0 * j as f64 + 1.0) / 2.0).sqrt() * p
}

fn legendre_orthonormal_pair(j: usize, x: f64) -> (f64, f64) {
    let scale = ((2.0 * j as f64 + 1.0) / 2.0).sqrt();
    let (p, dp) = legendre(j, x);
    (scale * p, scale * dp)
}

/// Gauss-Legendre nodes and weights, `n` points, exact through degree `2n-1`.
fn gauss_points(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    // Positive half by Newton, mirrored; middle root of odd rules is 0.
    for i in 0..n / 2 {
        let mut xi = (std::f64::consts::PI * (4.0 * i as f64 + 3.0) / (4.0 * n as f64 + 2.0)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, xi);
            let dx = p / dp;
            xi -= dx;
            if dx.abs() < ROOT_TOL {
                break;
            }
        }
        let (_, dp) = legendre(n, xi);
        let wi = 2.0 / ((1.0 - xi * xi) * dp * dp);
        x[n - 1 - i] = xi;
        x[i] = -xi;
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre(n, 0.0);
        x[n / 2] = 0.0;
        w[n / 2] = 2.0 / (dp * dp);
    }
    (x, w)
}

/// Gauss-Lobatto-Legendre nodes and weights with `p + 1` points: the
/// endpoints plus the roots of `P'_p`. Exact through degree `2p - 1`.
pub fn gll_points(p: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(p >= 1, "Lobatto rules need at least two points");
    let n = p + 1;
    let mut x = vec![0.0; n];
    x[0] = -1.0;
    x[p] = 1.0;
    // Interior nodes: Newton on P'_p, second derivative from the Legendre ODE
    // (1-x^2) P'' = 2 x P' - p(p+1) P.
    let interior = p - 1;
    for i in 1..=interior / 2 {
        let mut xi = (std::f64::consts::PI * i as f64 / p as f64).cos();
        for _ in 0..100 {
            let (pv, dpv) = legendre(p, xi);
            let ddp = (2.0 * xi * dpv - (p * (p + 1)) as f64 * pv) / (1.0 - xi * xi);
            let dx = dpv / ddp;
            xi -= dx;
            if dx.abs() < ROOT_TOL {
                break;
            }
        }
        x[p - i] = xi;
        x[i] = -xi;
    }
    if interior % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let scale = (p * (p + 1)) as f64;
    let mut w = vec![0.0; n];
    for i in 0..n {
        let (pv, _) = legendre(p, x[i]);
        w[i] = 2.0 / (scale * pv * pv);
    }
    (x, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Gauss,
    GaussLobatto,
}

/// A quadrature rule on [-1, 1].
///
/// The `order` follows the nodal convention used throughout: a rule of order
/// `q` carries `q + 1` points and integrates polynomials exactly through
/// degree `2q + 1` (Gauss) or `2q - 1` (Gauss-Lobatto).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub order: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss(order: usize) -> Self {
        let (points, weights) = gauss_points(order + 1);
        QuadratureRule {
            kind: RuleKind::Gauss,
            order,
            points,
            weights,
        }
    }

    pub fn gauss_lobatto(order: usize) -> Self {
        let (points, weights) = gll_points(order);
        QuadratureRule {
            kind: RuleKind::GaussLobatto,
            order,
            points,
            weights,
        }
    }

    /// Smallest Gauss rule exact through at least `degree`.
    pub fn gauss_exact(degree: usize) -> Self {
        // 2q + 1 >= degree  =>  q >= (degree - 1) / 2.
        let q = degree.saturating_sub(1).div_ceil(2);
        Self::gauss(q)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exactness(&self) -> usize {
        match self.kind {
            RuleKind::Gauss => 2 * self.order + 1,
            RuleKind::GaussLobatto => 2 * self.order - 1,
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Dump as `index,node,weight` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "index,node,weight")?;
        for (i, (x, w)) in self.points.iter().zip(&self.weights).enumerate() {
            writeln!(out, "{i},{x},{w}")?;
        }
        Ok(())
    }
}

/// Exponential modal filter parameters.
///
/// Damping factor per mode: 1 for `j <= cutoff`, else
/// `exp(-alpha * ((j - cutoff) / (p - cutoff))^exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub cutoff: usize,
    pub alpha: f64,
    pub exponent: f64,
}

impl FilterSpec {
    /// Keep every mode but the last, damp the last to machine epsilon.
    pub fn default_for_order(p: usize) -> Self {
        FilterSpec {
            cutoff: p.saturating_sub(1),
            alpha: -f64::EPSILON.ln(),
            exponent: 2.0,
        }
    }

    pub fn sigma(&self, j: usize, p: usize) -> f64 {
        if j <= self.cutoff || p <= self.cutoff {
            1.0
        } else {
            let eta = (j - self.cutoff) as f64 / (p - self.cutoff) as f64;
            (-self.alpha * eta.powf(self.exponent)).exp()
        }
    }
}

/// Nodal reference element of order `p` on [-1, 1]: Gauss-Lobatto points,
/// the orthonormal-Legendre Vandermonde pair, the collocation differentiation
/// matrix, and the nodal form of the modal filter.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub vandermonde: DMatrix<f64>,
    pub vandermonde_inv: DMatrix<f64>,
    pub diff: DMatrix<f64>,
    pub filter: FilterSpec,
    filter_nodal: DMatrix<f64>,
}

impl ReferenceElement {
    pub fn new(p: usize) -> Result<Self> {
        Self::with_filter(p, FilterSpec::default_for_order(p))
    }

    pub fn with_filter(p: usize, filter: FilterSpec) -> Result<Self> {
        if p < 1 {
            return Err(Error::invalid("order", "basis order must be at least 1"));
        }
        if filter.cutoff > p {
            return Err(Error::invalid(
                "filter.cutoff",
                format!("cutoff {} exceeds basis order {p}", filter.cutoff),
            ));
        }
        let (nodes, weights) = gll_points(p);
        let n = p + 1;
        let vandermonde = DMatrix::from_fn(n, n, |i, j| legendre_orthonormal(j, nodes[i]));
        let vandermonde_inv = vandermonde.clone().try_inverse().ok_or_else(|| {
            Error::invalid("order", format!("singular Vandermonde at order {p}"))
        })?;
        let grad = DMatrix::from_fn(n, n, |i, j| legendre_orthonormal_pair(j, nodes[i]).1);
        let diff = &grad * &vandermonde_inv;
        let sigma = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                filter.sigma(j, p)
            } else {
                0.0
            }
        });
        let filter_nodal = &vandermonde * sigma * &vandermonde_inv;
        Ok(ReferenceElement {
            order: p,
            nodes,
            weights,
            vandermonde,
            vandermonde_inv,
            diff,
            filter,
            filter_nodal,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.order + 1
    }

    /// Lagrange basis values at arbitrary points: `B[q][j] = l_j(x_q)`.
    /// Evaluated through the modal basis, which stays well conditioned at
    /// the orders used here.
    pub fn lagrange_values_at(&self, xs: &[f64]) -> DMatrix<f64> {
        let n = self.n_nodes();
        let psi = DMatrix::from_fn(xs.len(), n, |q, j| legendre_orthonormal(j, xs[q]));
        psi * &self.vandermonde_inv
    }

    /// Lagrange basis derivatives at arbitrary points: `B[q][j] = l'_j(x_q)`.
    pub fn lagrange_derivs_at(&self, xs: &[f64]) -> DMatrix<f64> {
        let n = self.n_nodes();
        let dpsi = DMatrix::from_fn(xs.len(), n, |q, j| legendre_orthonormal_pair(j, xs[q]).1);
        dpsi * &self.vandermonde_inv
    }

    /// GLL collocation rule matching the nodal points.
    pub fn collocation_rule(&self) -> QuadratureRule {
        QuadratureRule {
            kind: RuleKind::GaussLobatto,
            order: self.order,
            points: self.nodes.clone(),
            weights: self.weights.clone(),
        }
    }

    /// Nodal filter operator `V diag(sigma) V^{-1}`.
    pub fn filter_nodal(&self) -> &DMatrix<f64> {
        &self.filter_nodal
    }

    /// Modal coefficients of a nodal field on this element.
    pub fn to_modal(&self, nodal: &[f64]) -> Vec<f64> {
        let n = self.n_nodes();
        assert_eq!(nodal.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.vandermonde_inv[(i, j)] * nodal[j];
            }
            out[i] = acc;
        }
        out
    }
}

/// Apply the modal filter element by element over a C0 field, averaging the
/// result at DoFs shared between neighbouring elements.
///
/// `dof_of(e, i)` maps element-local node `i` to the global DoF index; the
/// per-element transforms run in parallel, the scatter/average pass is a
/// fixed-order sequential loop so results do not depend on thread count.
pub fn apply_modal_filter(
    elem: &ReferenceElement,
    n_elements: usize,
    dof_of: impl Fn(usize, usize) -> usize + Sync,
    field: &mut [f64],
) {
    let n = elem.n_nodes();
    let filter = elem.filter_nodal();
    let locals: Vec<Vec<f64>> = (0..n_elements)
        .into_par_iter()
        .map(|e| {
            let mut out = vec![0.0; n];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += filter[(i, j)] * field[dof_of(e, j)];
                }
                out[i] = acc;
            }
            out
        })
        .collect();
    let mut sum = vec![0.0; field.len()];
    let mut count = vec![0u32; field.len()];
    for (e, local) in locals.iter().enumerate() {
        for i in 0..n {
            let g = dof_of(e, i);
            sum[g] += local[i];
            count[g] += 1;
        }
    }
    for (f, (s, c)) in field.iter_mut().zip(sum.iter().zip(&count)) {
        if *c > 0 {
            *f = s / *c as f64;
        }
    }
}
