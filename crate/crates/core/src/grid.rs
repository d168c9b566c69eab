//! Truncated uniform velocity lattice, occupation fields, trilinear sampling
//! and node quadrature.
//!
//! Nodes sit at `v_ijk = (-R + iΔv, -R + jΔv, -R + kΔv)` with
//! `Δv = 2R / (n - 1)`, so both faces of the cube carry nodes. Linear storage
//! is x-fastest: `idx = i + n (j + n k)`. Quadrature treats every node as the
//! centre of a cell of volume `Δv³` (the node-cell convention), so a constant
//! field integrates to exactly `n³ Δv³`.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn norm2(v: Vec3) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

#[inline]
pub fn norm(v: Vec3) -> f64 {
    norm2(v).sqrt()
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Uniform cubic velocity lattice on `[-R, R]³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityGrid {
    n: usize,
    radius: f64,
    spacing: f64,
}

impl VelocityGrid {
    pub fn new(n_per_axis: usize, radius: f64) -> Result<Self> {
        if n_per_axis < 4 {
            return Err(Error::InvalidParameter(format!(
                "n_per_axis must be at least 4, got {n_per_axis}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive and finite, got {radius}"
            )));
        }
        let spacing = 2.0 * radius / (n_per_axis - 1) as f64;
        Ok(Self {
            n: n_per_axis,
            radius,
            spacing,
        })
    }

    #[inline]
    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing * self.spacing * self.spacing
    }

    /// Total node count `n³`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + i as f64 * self.spacing
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    #[inline]
    pub fn node(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Iterator over `(linear index, velocity)` for every node, x fastest.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, Vec3)> + '_ {
        (0..self.len()).map(move |idx| (idx, self.node(idx)))
    }

    /// Squared speed of every node, in storage order.
    pub fn speeds_squared(&self) -> Vec<f64> {
        self.nodes().map(|(_, v)| norm2(v)).collect()
    }

    /// Largest relative speed representable between two nodes (corner to corner).
    pub fn max_relative_speed(&self) -> f64 {
        2.0 * self.radius * 3f64.sqrt()
    }

    pub fn same_lattice(&self, other: &VelocityGrid) -> bool {
        self.n == other.n && self.radius == other.radius
    }

    /// Midpoint-rule sum `Σ values(v)·weight(v)·Δv³`.
    pub fn integrate_values<W: Fn(Vec3) -> f64>(&self, values: &[f64], weight: W) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let sum: f64 = self
            .nodes()
            .map(|(idx, v)| values[idx] * weight(v))
            .sum();
        sum * self.cell_volume()
    }

    /// Trilinear stencil of a point given in index coordinates. `None` outside
    /// the closed cube.
    #[inline]
    pub(crate) fn stencil(&self, p: Vec3) -> Option<Stencil> {
        let n = self.n;
        let top = (n - 1) as f64;
        let mut base = [0usize; 3];
        let mut t = [0f64; 3];
        for a in 0..3 {
            let x = p[a];
            if !(x >= -INDEX_SLACK && x <= top + INDEX_SLACK) {
                return None;
            }
            let x = x.clamp(0.0, top);
            // truncation is floor here since x >= 0
            let b = (x as usize).min(n - 2);
            base[a] = b;
            t[a] = x - b as f64;
        }
        Some(Stencil::new(n, base, t))
    }

    /// Index coordinates of a physical velocity.
    #[inline]
    pub fn to_index_coords(&self, v: Vec3) -> Vec3 {
        let inv = 1.0 / self.spacing;
        [
            (v[0] + self.radius) * inv,
            (v[1] + self.radius) * inv,
            (v[2] + self.radius) * inv,
        ]
    }
}

/// Points this close (in index units) outside the cube are snapped onto the
/// face. Guards against round-off when a post-collision velocity lands on a
/// boundary face.
pub(crate) const INDEX_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    origin: usize,
    stride_y: usize,
    stride_z: usize,
    t: Vec3,
}

impl Stencil {
    #[inline]
    pub(crate) fn new(n: usize, base: [usize; 3], t: Vec3) -> Self {
        Self {
            origin: base[0] + n * (base[1] + n * base[2]),
            stride_y: n,
            stride_z: n * n,
            t,
        }
    }

    #[inline]
    pub(crate) fn apply(&self, values: &[f64]) -> f64 {
        let o = self.origin;
        let (sy, sz) = (self.stride_y, self.stride_z);
        let [tx, ty, tz] = self.t;
        let c00 = lerp(values[o], values[o + 1], tx);
        let c10 = lerp(values[o + sy], values[o + sy + 1], tx);
        let c01 = lerp(values[o + sz], values[o + sz + 1], tx);
        let c11 = lerp(values[o + sy + sz], values[o + sy + sz + 1], tx);
        let c0 = lerp(c00, c10, ty);
        let c1 = lerp(c01, c11, ty);
        lerp(c0, c1, tz)
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Occupation numbers sampled on a [`VelocityGrid`].
///
/// Values lie in `[0, 1]`. Outside the cube the field takes its `exterior`
/// value: `0` (vacuum) for ordinary fields, `1` for the complement `1 - f` of
/// an ordinary field.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    grid: VelocityGrid,
    values: Vec<f64>,
    exterior: f64,
}

impl DistributionField {
    pub fn zeros(grid: VelocityGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: VelocityGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
            exterior: 0.0,
        }
    }

    pub fn from_values(grid: VelocityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} node values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some((idx, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::InvalidParameter(format!(
                "occupation at node {idx} is {v}, outside [0, 1]"
            )));
        }
        Ok(Self {
            grid,
            values,
            exterior: 0.0,
        })
    }

    /// Builds a field from a closure evaluated at every node. Values are
    /// validated like [`DistributionField::from_values`].
    pub fn from_fn<F: Fn(Vec3) -> f64>(grid: VelocityGrid, f: F) -> Result<Self> {
        let values = grid.nodes().map(|(_, v)| f(v)).collect();
        Self::from_values(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn exterior(&self) -> f64 {
        self.exterior
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `1 - f`, with exterior value `1 - exterior`.
    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| 1.0 - v).collect(),
            exterior: 1.0 - self.exterior,
        }
    }

    /// Replaces node values, clamping into `[0, 1]`. Used by the time
    /// integrator after its bound-preserving update.
    pub(crate) fn from_clamped(grid: VelocityGrid, mut values: Vec<f64>, exterior: f64) -> Self {
        for v in values.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        Self {
            grid,
            values,
            exterior,
        }
    }

    /// Trilinear interpolation of the eight surrounding nodes. Returns the
    /// exterior value for `v` outside `[-R, R]³`; the result is clamped to
    /// `[0, 1]`.
    pub fn sample(&self, v: Vec3) -> f64 {
        self.sample_index_coords(self.grid.to_index_coords(v))
    }

    #[inline]
    pub(crate) fn sample_index_coords(&self, p: Vec3) -> f64 {
        match self.grid.stencil(p) {
            Some(st) => st.apply(&self.values).clamp(0.0, 1.0),
            None => self.exterior,
        }
    }

    /// `Σ f(v)·weight(v)·Δv³`.
    pub fn integrate<W: Fn(Vec3) -> f64>(&self, weight: W) -> f64 {
        self.grid.integrate_values(&self.values, weight)
    }

    /// Mass carried by nodes with `|v| > 0.9 R`; a truncation diagnostic.
    pub fn boundary_mass(&self) -> f64 {
        let r = 0.9 * self.grid.radius;
        let r2 = r * r;
        self.integrate(|v| if norm2(v) > r2 { 1.0 } else { 0.0 })
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn four_nodes_spacing_two() {
        let g = VelocityGrid::new(4, 3.0).unwrap();
        assert_eq!(g.spacing(), 2.0);
        let coords: Vec<f64> = (0..4).map(|i| g.coord(i)).collect();
        assert_eq!(coords, vec![-3.0, -1.0, 1.0, 3.0]);
    }

    #[test]
    fn odd_count_has_center_at_origin() {
        let g = VelocityGrid::new(5, 2.0).unwrap();
        assert_eq!(g.node(g.index(2, 2, 2)), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(matches!(
            VelocityGrid::new(3, 1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(VelocityGrid::new(8, 0.0).is_err());
        assert!(VelocityGrid::new(8, f64::NAN).is_err());
    }

    #[test]
    fn nodes_are_symmetric() {
        let g = VelocityGrid::new(7, 1.5).unwrap();
        for i in 0..7 {
            assert_relative_eq!(g.coord(i), -g.coord(6 - i), epsilon = 1e-15);
        }
    }

    #[test]
    fn sample_reproduces_nodes_and_midpoints() {
        let g = VelocityGrid::new(6, 2.0).unwrap();
        let f = DistributionField::from_fn(g, |v| 0.5 + 0.1 * v[0] - 0.05 * v[1] * v[2]).unwrap();
        for idx in [0, 17, 100, g.len() - 1] {
            assert_relative_eq!(f.sample(g.node(idx)), f.values()[idx], epsilon = 1e-14);
        }
        let a = g.index(2, 3, 1);
        let b = g.index(3, 3, 1);
        let mid = scale(add(g.node(a), g.node(b)), 0.5);
        assert_relative_eq!(
            f.sample(mid),
            0.5 * (f.values()[a] + f.values()[b]),
            epsilon = 1e-14
        );
    }

    #[test]
    fn sample_outside_is_exterior() {
        let g = VelocityGrid::new(6, 2.0).unwrap();
        let f = DistributionField::constant(g, 0.7);
        assert_eq!(f.sample([4.0, 0.0, 0.0]), 0.0);
        assert_eq!(f.complement().sample([0.0, -4.0, 0.0]), 1.0);
        // the faces themselves are inside
        assert_relative_eq!(f.sample([2.0, 2.0, -2.0]), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn constant_field_integrates_to_node_count() {
        let g = VelocityGrid::new(9, 2.0).unwrap();
        let f = DistributionField::constant(g, 1.0);
        let expected = (9usize.pow(3)) as f64 * g.cell_volume();
        assert_relative_eq!(f.integrate(|_| 1.0), expected, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_integral_on_wide_grid() {
        // ∫ e^{-|v|²} dv = π^{3/2}
        let g = VelocityGrid::new(41, 6.0).unwrap();
        let f = DistributionField::from_fn(g, |v| (-norm2(v)).exp()).unwrap();
        let expected = std::f64::consts::PI.powf(1.5);
        assert!((f.integrate(|_| 1.0) - expected).abs() < 1e-6);
    }

    #[test]
    fn unit_ball_volume_within_two_percent() {
        let expected = 4.0 * std::f64::consts::PI / 3.0;
        let mut last_err = f64::INFINITY;
        for n in [21, 41, 61] {
            let g = VelocityGrid::new(n, 1.2).unwrap();
            let f = DistributionField::from_fn(g, |v| if norm2(v) <= 1.0 { 1.0 } else { 0.0 })
                .unwrap();
            last_err = ((f.integrate(|_| 1.0) - expected) / expected).abs();
            if last_err < 0.02 {
                break;
            }
        }
        assert!(last_err < 0.02, "relative error {last_err}");
    }

    #[test]
    fn from_values_rejects_out_of_range() {
        let g = VelocityGrid::new(4, 1.0).unwrap();
        let mut vals = vec![0.5; g.len()];
        vals[3] = 1.5;
        assert!(DistributionField::from_values(g, vals).is_err());
        let mut vals = vec![0.5; g.len()];
        vals[0] = f64::NAN;
        assert!(DistributionField::from_values(g, vals).is_err());
    }

    #[test]
    fn moment_integral_self_converges_at_second_order() {
        // ∫ e^{-|v|²}|v|², negligible at the box edge; successive differences
        // for halved spacing shrink by 4 or better.
        let weight = |v: Vec3| norm2(v);
        let value = |n: usize| {
            let g = VelocityGrid::new(n, 6.0).unwrap();
            let f = DistributionField::from_fn(g, |v| (-norm2(v)).exp()).unwrap();
            f.integrate(weight)
        };
        let a = value(9);
        let b = value(17);
        let c = value(33);
        let ratio = (a - b).abs() / (b - c).abs();
        assert!(ratio > 3.5, "self-convergence ratio {ratio}");
    }
}
