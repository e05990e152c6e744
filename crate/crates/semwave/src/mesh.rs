//! Structured spectral element meshes for a vertical slice of a wave flume:
//! a 1-D free-surface mesh of uniform elements and the quadrilateral volume
//! mesh obtained by extruding each surface column down to the bottom.
//!
//! The volume mesh follows the free surface by vertical repositioning only:
//! each column keeps its layer fractions `sigma` from extrusion time and the
//! node heights are recomputed as `z = sigma * (eta + h) - h`. Horizontal
//! positions never change, so columns stay vertical and element Jacobians
//! keep a zero in the upper-right corner.

use crate::basis::{self, ReferenceElement};
use crate::error::{Error, Result};

/// Uniform 1-D mesh of the still-water line with Gauss-Lobatto nodes in each
/// element. Degrees of freedom are shared at element boundaries; a periodic
/// mesh identifies the last node with the first.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    length: f64,
    n_elements: usize,
    order: usize,
    periodic: bool,
    coords: Vec<f64>,
    ref_nodes: Vec<f64>,
    dx_min: f64,
}

impl SurfaceMesh {
    pub fn new(length: f64, n_elements: usize, order: usize, periodic: bool) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid("length", "domain length must be positive"));
        }
        if n_elements == 0 {
            return Err(Error::invalid("n_elements", "need at least one element"));
        }
        if order == 0 {
            return Err(Error::invalid("order", "basis order must be at least 1"));
        }
        let (ref_nodes, _) = basis::gll_points(order);
        let dx = length / n_elements as f64;
        let n_dofs = n_elements * order + if periodic { 0 } else { 1 };
        let mut coords = vec![0.0; n_dofs];
        for e in 0..n_elements {
            let x0 = e as f64 * dx;
            for i in 0..=order {
                let g = e * order + i;
                if g < n_dofs {
                    coords[g] = x0 + 0.5 * (ref_nodes[i] + 1.0) * dx;
                }
            }
        }
        if !periodic {
            coords[n_dofs - 1] = length;
        }
        let mut dx_min = f64::INFINITY;
        for i in 1..n_dofs {
            dx_min = dx_min.min(coords[i] - coords[i - 1]);
        }
        if periodic {
            dx_min = dx_min.min(length - coords[n_dofs - 1]);
        }
        Ok(SurfaceMesh {
            length,
            n_elements,
            order,
            periodic,
            coords,
            ref_nodes,
            dx_min,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn n_dofs(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn element_length(&self) -> f64 {
        self.length / self.n_elements as f64
    }

    /// Minimum node spacing along the surface; the CFL length scale.
    pub fn dx_min(&self) -> f64 {
        self.dx_min
    }

    /// Global DoF of local node `i` in element `e` (periodic wrap included).
    #[inline]
    pub fn dof(&self, e: usize, i: usize) -> usize {
        let g = e * self.order + i;
        if self.periodic {
            g % (self.n_elements * self.order)
        } else {
            g
        }
    }

    /// Physical x of local node `i` in element `e`. Unlike `coords()[dof]`,
    /// this never wraps, so the last element of a periodic mesh reports its
    /// right edge at `x = length`.
    #[inline]
    pub fn local_x(&self, e: usize, i: usize) -> f64 {
        let dx = self.element_length();
        e as f64 * dx + 0.5 * (self.ref_nodes[i] + 1.0) * dx
    }

    /// Element index and reference coordinate containing physical `x`.
    /// Periodic meshes wrap; otherwise `x` is clamped into the domain.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let mut xl = x;
        if self.periodic {
            xl = xl.rem_euclid(self.length);
        } else {
            xl = xl.clamp(0.0, self.length);
        }
        let dx = self.element_length();
        let mut e = (xl / dx).floor() as usize;
        if e >= self.n_elements {
            e = self.n_elements - 1;
        }
        let r = 2.0 * (xl - e as f64 * dx) / dx - 1.0;
        (e, r.clamp(-1.0, 1.0))
    }

    /// Evaluate a nodal field at an arbitrary point.
    pub fn eval_field(&self, elem: &ReferenceElement, field: &[f64], x: f64) -> f64 {
        assert_eq!(field.len(), self.n_dofs());
        let (e, r) = self.locate(x);
        let row = elem.lagrange_values_at(&[r]);
        (0..=self.order).map(|j| row[(0, j)] * field[self.dof(e, j)]).sum()
    }

    /// Sample a function at the DoF nodes. On periodic meshes the function
    /// must agree at the two ends it glues together; data like `f(x) = x`
    /// is rejected rather than silently aliased.
    pub fn field_from_fn(&self, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        if self.periodic {
            let left = f(0.0);
            let right = f(self.length);
            let scale = left.abs().max(right.abs()).max(1.0);
            if (left - right).abs() > 1e-8 * scale {
                return Err(Error::invalid(
                    "field",
                    format!(
                        "incompatible periodic data: f(0) = {left:.6e} but f(L) = {right:.6e}"
                    ),
                ));
            }
        }
        Ok(self.coords.iter().map(|&x| f(x)).collect())
    }

    /// Modal filter over the whole field with shared-DoF averaging.
    pub fn filter_field(&self, elem: &ReferenceElement, field: &mut [f64]) {
        assert_eq!(elem.order, self.order);
        basis::apply_modal_filter(elem, self.n_elements, |e, i| self.dof(e, i), field);
    }

    pub fn write_coords_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "dof,x")?;
        for (i, x) in self.coords.iter().enumerate() {
            writeln!(out, "{i},{x}")?;
        }
        Ok(())
    }
}

/// How layer interfaces are distributed over the water column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerticalSpacing {
    /// Equal layer fractions.
    #[default]
    Uniform,
    /// Sine-graded fractions, clustering levels toward the free surface.
    Clustered,
}

/// Quadrilateral volume mesh: one column of `layers` vertical elements under
/// every surface DoF, same polynomial order in both directions.
///
/// DoF layout is level-major: `dof = level * n_cols + col`, level 0 at the
/// bottom. The free surface is the top level; `surface_map` gathers it.
#[derive(Debug, Clone)]
pub struct VolumeMesh {
    surface: SurfaceMesh,
    layers: usize,
    n_cols: usize,
    n_levels: usize,
    z: Vec<f64>,
    sigma: Vec<f64>,
    depth: Vec<f64>,
    surface_map: Vec<usize>,
}

impl VolumeMesh {
    /// Extrude the surface mesh down to the bathymetry `depth_of(x) > 0`.
    /// Layer fractions are fixed here and never change afterwards.
    pub fn extrude(
        surface: SurfaceMesh,
        layers: usize,
        spacing: VerticalSpacing,
        depth_of: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if layers == 0 {
            return Err(Error::invalid("layers", "need at least one vertical layer"));
        }
        let p = surface.order();
        let n_cols = surface.n_dofs();
        let n_levels = layers * p + 1;

        let depth: Vec<f64> = surface.coords().iter().map(|&x| depth_of(x)).collect();
        for (c, &h) in depth.iter().enumerate() {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::DegenerateGeometry(format!(
                    "non-positive depth {h:.6e} at x = {:.6}",
                    surface.coords()[c]
                )));
            }
        }

        // Interface fractions, then Gauss-Lobatto subdivision inside each layer.
        let interface = |j: usize| -> f64 {
            let t = j as f64 / layers as f64;
            match spacing {
                VerticalSpacing::Uniform => t,
                VerticalSpacing::Clustered => (std::f64::consts::FRAC_PI_2 * t).sin(),
            }
        };
        let (ref_nodes, _) = basis::gll_points(p);
        let mut sigma = vec![0.0; n_levels];
        for ez in 0..layers {
            let lo = interface(ez);
            let hi = interface(ez + 1);
            for (i, &r) in ref_nodes.iter().enumerate() {
                sigma[ez * p + i] = lo + 0.5 * (r + 1.0) * (hi - lo);
            }
        }
        sigma[0] = 0.0;
        sigma[n_levels - 1] = 1.0;

        let surface_map: Vec<usize> =
            (0..n_cols).map(|c| (n_levels - 1) * n_cols + c).collect();

        let mut mesh = VolumeMesh {
            surface,
            layers,
            n_cols,
            n_levels,
            z: vec![0.0; n_cols * n_levels],
            sigma,
            depth,
            surface_map,
        };
        let flat = vec![0.0; n_cols];
        mesh.update(&flat)?;
        Ok(mesh)
    }

    pub fn surface(&self) -> &SurfaceMesh {
        &self.surface
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn order(&self) -> usize {
        self.surface.order()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn n_dofs(&self) -> usize {
        self.n_cols * self.n_levels
    }

    pub fn n_elements(&self) -> usize {
        self.surface.n_elements() * self.layers
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Gather map from volume DoFs to surface DoFs (top level).
    pub fn surface_map(&self) -> &[usize] {
        &self.surface_map
    }

    #[inline]
    pub fn dof(&self, col: usize, level: usize) -> usize {
        level * self.n_cols + col
    }

    /// Global DoF of local tensor node `(i, j)` of volume element `(ex, ez)`;
    /// `i` runs horizontally, `j` vertically.
    #[inline]
    pub fn vol_dof(&self, ex: usize, ez: usize, i: usize, j: usize) -> usize {
        let p = self.order();
        let col = self.surface.dof(ex, i);
        let level = ez * p + j;
        self.dof(col, level)
    }

    /// Reposition every node under the given surface elevation. Layer
    /// fractions stay frozen; the map is affine in `eta`, the bottom stays
    /// at `z = -h` and the top lands exactly on `eta`.
    pub fn update(&mut self, eta: &[f64]) -> Result<()> {
        assert_eq!(eta.len(), self.n_cols);
        for c in 0..self.n_cols {
            let total = eta[c] + self.depth[c];
            if !(total > 0.0) || !total.is_finite() {
                return Err(Error::DegenerateGeometry(format!(
                    "water column collapsed at x = {:.6}: eta + h = {total:.6e}",
                    self.surface.coords()[c]
                )));
            }
        }
        for level in 0..self.n_levels {
            let s = self.sigma[level];
            let base = level * self.n_cols;
            if level == self.n_levels - 1 {
                // sigma = 1 must land bitwise on eta; the roundtrip through
                // (eta + h) - h loses an ulp.
                self.z[base..base + self.n_cols].copy_from_slice(eta);
            } else {
                for c in 0..self.n_cols {
                    self.z[base + c] = s * (eta[c] + self.depth[c]) - self.depth[c];
                }
            }
        }
        Ok(())
    }

    /// Direct node access so tests can manufacture broken geometry that
    /// `update` would never produce.
    #[cfg(test)]
    pub(crate) fn z_mut(&mut self) -> &mut [f64] {
        &mut self.z
    }

    /// Restrict a volume field to the free surface.
    pub fn extract_surface(&self, volume_field: &[f64]) -> Vec<f64> {
        assert_eq!(volume_field.len(), self.n_dofs());
        self.surface_map.iter().map(|&g| volume_field[g]).collect()
    }

    /// Human-readable summary of the discretization.
    pub fn summary(&self) -> String {
        let s = &self.surface;
        let hmin = self.depth.iter().cloned().fold(f64::INFINITY, f64::min);
        let hmax = self.depth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        format!(
            "domain length      {}\n\
             surface elements   {} (order {}, periodic: {})\n\
             surface dofs       {}\n\
             vertical layers    {}\n\
             volume elements    {}\n\
             volume dofs        {}\n\
             depth range        [{hmin}, {hmax}]\n\
             min node spacing   {}\n",
            s.length(),
            s.n_elements(),
            s.order(),
            s.periodic(),
            s.n_dofs(),
            self.layers,
            self.n_elements(),
            self.n_dofs(),
            s.dx_min(),
        )
    }

    pub fn write_coords_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "dof,x,z")?;
        for level in 0..self.n_levels {
            for c in 0..self.n_cols {
                let g = self.dof(c, level);
                writeln!(out, "{g},{},{}", self.surface.coords()[c], self.z[g])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn two_linear_elements_on_unit_interval() {
        let m = SurfaceMesh::new(1.0, 2, 1, false).unwrap();
        assert_eq!(m.coords(), &[0.0, 0.5, 1.0]);
        assert_eq!(m.n_dofs(), 3);
        assert_abs_diff_eq!(m.dx_min(), 0.5);
    }

    #[test]
    fn one_quadratic_element_places_midpoint_node() {
        let m = SurfaceMesh::new(1.0, 1, 2, false).unwrap();
        assert_eq!(m.coords(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn periodic_identification_drops_one_dof() {
        let m = SurfaceMesh::new(1.0, 4, 4, true).unwrap();
        assert_eq!(m.n_dofs(), 16);
        let mnp = SurfaceMesh::new(1.0, 4, 4, false).unwrap();
        assert_eq!(mnp.n_dofs(), 17);
        // Last node of the last element wraps to DoF 0.
        assert_eq!(m.dof(3, 4), 0);
        assert_eq!(m.dof(3, 3), 15);
    }

    /// dx_min against a brute-force scan over every adjacent node pair,
    /// wrap gap included.
    #[test]
    fn dx_min_matches_brute_force() {
        for (n, p, periodic) in [(4usize, 4usize, true), (4, 4, false), (3, 5, true), (7, 2, false)]
        {
            let m = SurfaceMesh::new(1.0, n, p, periodic).unwrap();
            let c = m.coords();
            let mut gaps: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
            if periodic {
                gaps.push(1.0 - c[c.len() - 1]);
            }
            let expect = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(m.dx_min(), expect, epsilon = 1e-15);
        }
        // Frozen value for the p = 4 spacing on quarter-unit elements:
        // 0.25 * (1 - sqrt(3/7)) / 2.
        let m = SurfaceMesh::new(1.0, 4, 4, true).unwrap();
        assert_abs_diff_eq!(m.dx_min(), 0.043_168_291_161_502_87, epsilon = 1e-14);
    }

    #[test]
    fn coords_strictly_increasing() {
        for p in 1..=6 {
            let m = SurfaceMesh::new(2.5, 5, p, false).unwrap();
            for w in m.coords().windows(2) {
                assert!(w[1] > w[0]);
            }
            assert_abs_diff_eq!(m.coords()[m.n_dofs() - 1], 2.5);
        }
    }

    #[test]
    fn periodic_mesh_rejects_incompatible_nodal_data() {
        let m = SurfaceMesh::new(1.0, 4, 2, true).unwrap();
        let err = m.field_from_fn(|x| x).unwrap_err();
        assert!(err.to_string().contains("incompatible periodic data"));
        // A genuinely periodic function passes.
        let f = m
            .field_from_fn(|x| (2.0 * std::f64::consts::PI * x).cos())
            .unwrap();
        assert_eq!(f.len(), 8);
    }

    #[test]
    fn locate_and_eval_reproduce_polynomials() {
        let p = 3;
        let elem = ReferenceElement::new(p).unwrap();
        let m = SurfaceMesh::new(2.0, 5, p, false).unwrap();
        let field = m.field_from_fn(|x| 1.0 - x + 0.5 * x * x * x).unwrap();
        for &x in &[0.0, 0.101, 0.4, 1.0, 1.731, 2.0] {
            let got = m.eval_field(&elem, &field, x);
            assert_abs_diff_eq!(got, 1.0 - x + 0.5 * x * x * x, epsilon = 1e-12);
        }
        let (e, r) = m.locate(0.3);
        assert_eq!(e, 0);
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn extrusion_levels_linear_case() {
        let s = SurfaceMesh::new(1.0, 2, 1, false).unwrap();
        let v = VolumeMesh::extrude(s, 2, VerticalSpacing::Uniform, |_| 1.0).unwrap();
        assert_eq!(v.n_cols(), 3);
        assert_eq!(v.n_levels(), 3);
        for (level, want) in [(0usize, -1.0), (1, -0.5), (2, 0.0)] {
            for c in 0..3 {
                assert_abs_diff_eq!(v.z()[v.dof(c, level)], want, epsilon = 1e-15);
            }
        }
        assert_eq!(v.sigma(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn layer_interfaces_present_among_levels() {
        let s = SurfaceMesh::new(1.0, 3, 2, false).unwrap();
        let v = VolumeMesh::extrude(s, 4, VerticalSpacing::Uniform, |_| 0.4).unwrap();
        // Interfaces sigma = j/4 correspond to z = -0.4 + 0.1 j at rest.
        for (level, want) in [(0usize, -0.4), (2, -0.3), (4, -0.2), (6, -0.1), (8, 0.0)] {
            assert_abs_diff_eq!(v.z()[v.dof(0, level)], want, epsilon = 1e-15);
        }
    }

    #[test]
    fn clustered_spacing_refines_toward_surface() {
        let s = SurfaceMesh::new(1.0, 2, 2, false).unwrap();
        let v = VolumeMesh::extrude(s, 4, VerticalSpacing::Clustered, |_| 1.0).unwrap();
        let sig = v.sigma();
        assert_eq!(sig[0], 0.0);
        assert_eq!(sig[sig.len() - 1], 1.0);
        // Top layer thinner than bottom layer.
        let bottom = sig[2] - sig[0];
        let top = sig[8] - sig[6];
        assert!(top < bottom);
        for w in sig.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn depth_profile_sampled_at_columns() {
        let s = SurfaceMesh::new(10.0, 5, 2, false).unwrap();
        let v =
            VolumeMesh::extrude(s, 2, VerticalSpacing::Uniform, |x| 0.4 - 0.02 * x).unwrap();
        for (c, &x) in v.surface().coords().iter().enumerate() {
            assert_abs_diff_eq!(v.depth()[c], 0.4 - 0.02 * x, epsilon = 1e-15);
            assert_abs_diff_eq!(v.z()[v.dof(c, 0)], -(0.4 - 0.02 * x), epsilon = 1e-15);
        }
    }

    #[test]
    fn extrusion_rejects_non_positive_depth() {
        let s = SurfaceMesh::new(1.0, 2, 1, false).unwrap();
        let err = VolumeMesh::extrude(s, 2, VerticalSpacing::Uniform, |x| 0.5 - x).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(_)));
    }

    #[test]
    fn update_midlevel_position_hand_checked() {
        // sigma = 1/2, eta = 0.1, h = 0.4  =>  z = 0.5 * 0.5 - 0.4 = -0.15.
        let s = SurfaceMesh::new(1.0, 1, 1, false).unwrap();
        let mut v = VolumeMesh::extrude(s, 2, VerticalSpacing::Uniform, |_| 0.4).unwrap();
        v.update(&[0.1, 0.1]).unwrap();
        assert_abs_diff_eq!(v.z()[v.dof(0, 1)], -0.15, epsilon = 1e-15);
        // Top exactly on eta, bottom exactly on -h.
        assert_abs_diff_eq!(v.z()[v.dof(0, 2)], 0.1, epsilon = 0.0);
        assert_abs_diff_eq!(v.z()[v.dof(0, 0)], -0.4, epsilon = 0.0);
    }

    #[test]
    fn update_matches_pointwise_formula() {
        let s = SurfaceMesh::new(2.0, 4, 3, true).unwrap();
        let mut v = VolumeMesh::extrude(s, 3, VerticalSpacing::Uniform, |_| 0.7).unwrap();
        let eta = v
            .surface()
            .field_from_fn(|x| 0.05 * (std::f64::consts::PI * x).cos())
            .unwrap();
        v.update(&eta).unwrap();
        for level in 0..v.n_levels() {
            for c in 0..v.n_cols() {
                let expect = v.sigma()[level] * (eta[c] + 0.7) - 0.7;
                assert_abs_diff_eq!(v.z()[v.dof(c, level)], expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn update_is_idempotent_and_returns_to_rest() {
        let s = SurfaceMesh::new(1.0, 3, 2, false).unwrap();
        let mut v = VolumeMesh::extrude(s, 2, VerticalSpacing::Uniform, |_| 0.5).unwrap();
        let rest = v.z().to_vec();
        let eta: Vec<f64> = (0..v.n_cols()).map(|c| 0.01 * c as f64).collect();
        v.update(&eta).unwrap();
        let once = v.z().to_vec();
        v.update(&eta).unwrap();
        assert_eq!(v.z(), &once[..], "repeated update must be bitwise stable");
        v.update(&vec![0.0; v.n_cols()]).unwrap();
        assert_eq!(v.z(), &rest[..], "zero elevation restores the rest state");
    }

    #[test]
    fn update_rejects_dry_column() {
        let s = SurfaceMesh::new(1.0, 2, 1, false).unwrap();
        let mut v = VolumeMesh::extrude(s, 2, VerticalSpacing::Uniform, |_| 0.4).unwrap();
        let mut eta = vec![0.0; v.n_cols()];
        eta[1] = -0.4;
        assert!(matches!(
            v.update(&eta),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn extract_surface_gathers_top_level() {
        let s = SurfaceMesh::new(1.0, 2, 2, false).unwrap();
        let mut v = VolumeMesh::extrude(s, 2, VerticalSpacing::Uniform, |_| 0.3).unwrap();
        let eta = v.surface().field_from_fn(|x| 0.02 * x).unwrap();
        v.update(&eta).unwrap();

        let ones = vec![1.5; v.n_dofs()];
        assert!(v.extract_surface(&ones).iter().all(|&s| s == 1.5));

        // The z-coordinate field restricted to the surface is eta itself.
        let got = v.extract_surface(v.z());
        for (g, e) in got.iter().zip(&eta) {
            assert_abs_diff_eq!(*g, *e, epsilon = 0.0);
        }

        // x * z against the pointwise product at the top.
        let xz: Vec<f64> = (0..v.n_dofs())
            .map(|g| {
                let c = g % v.n_cols();
                v.surface().coords()[c] * v.z()[g]
            })
            .collect();
        let got = v.extract_surface(&xz);
        for (c, g) in got.iter().enumerate() {
            assert_abs_diff_eq!(*g, v.surface().coords()[c] * eta[c], epsilon = 1e-15);
        }
    }

    proptest! {
        /// The vertical move is affine in eta: perturbing the surface by
        /// delta moves every level by sigma * delta.
        #[test]
        fn update_shift_scales_with_sigma(
            amp in -0.05_f64..0.05,
            delta in -0.03_f64..0.03,
        ) {
            let s = SurfaceMesh::new(1.0, 2, 2, false).unwrap();
            let mut v = VolumeMesh::extrude(s, 2, VerticalSpacing::Uniform, |_| 0.5).unwrap();
            let n = v.n_cols();
            let eta1 = vec![amp; n];
            let eta2 = vec![amp + delta; n];
            v.update(&eta1).unwrap();
            let z1 = v.z().to_vec();
            v.update(&eta2).unwrap();
            let z2 = v.z().to_vec();
            for level in 0..v.n_levels() {
                for c in 0..n {
                    let g = v.dof(c, level);
                    prop_assert!((z2[g] - z1[g] - v.sigma()[level] * delta).abs() < 1e-12);
                }
            }
        }

        /// Writing a surface field onto the top level and extracting it back
        /// is the identity.
        #[test]
        fn lift_then_extract_roundtrips(vals in proptest::collection::vec(-1.0_f64..1.0, 5)) {
            let s = SurfaceMesh::new(1.0, 2, 2, false).unwrap();
            let v = VolumeMesh::extrude(s, 1, VerticalSpacing::Uniform, |_| 1.0).unwrap();
            let mut vol = vec![0.0; v.n_dofs()];
            for (c, &g) in v.surface_map().iter().enumerate() {
                vol[g] = vals[c];
            }
            let back = v.extract_surface(&vol);
            prop_assert_eq!(back, vals);
        }
    }
}
