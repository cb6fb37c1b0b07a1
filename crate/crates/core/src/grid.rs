//! Uniform finite-difference grids on intervals and rectangles.
//!
//! Fields live on interior nodes only; the homogeneous Dirichlet value on
//! the boundary is implicit. All inner products use the uniform cell volume
//! `h_1 * ... * h_n` as quadrature weight, so the discrete Laplacian is
//! symmetric in the L² pairing and the edge-based gradient satisfies
//! `<-Δ_h u, w> = <∇_h u, ∇_h w>` exactly.

use std::ops::{Deref, DerefMut};

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Point in the plane; in one dimension the second coordinate is unused.
pub type Point = [f64; 2];

/// Complex values on the interior nodes of a [`Grid`].
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GridFunction(Vec<C64>);

impl GridFunction {
    pub fn zeros(len: usize) -> Self {
        GridFunction(vec![C64::new(0.0, 0.0); len])
    }

    pub fn from_vec(values: Vec<C64>) -> Self {
        GridFunction(values)
    }

    /// Samples a real function at the interior nodes.
    pub fn from_real_fn(grid: &Grid, f: impl Fn(Point) -> f64) -> Self {
        GridFunction(
            (0..grid.len())
                .map(|i| C64::new(f(grid.node(i)), 0.0))
                .collect(),
        )
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(Point) -> C64) -> Self {
        GridFunction((0..grid.len()).map(|i| f(grid.node(i))).collect())
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scaled(&self, factor: C64) -> Self {
        GridFunction(self.0.iter().map(|v| v * factor).collect())
    }
}

impl Deref for GridFunction {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl DerefMut for GridFunction {
    fn deref_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }
}

/// Complex values on the boundary face nodes of a [`Grid`], ordered as
/// [`Grid::face_nodes`].
#[derive(Clone, Debug, PartialEq, Default)]
pub struct BoundaryFunction(Vec<C64>);

impl BoundaryFunction {
    pub fn zeros(len: usize) -> Self {
        BoundaryFunction(vec![C64::new(0.0, 0.0); len])
    }

    pub fn from_vec(values: Vec<C64>) -> Self {
        BoundaryFunction(values)
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }
}

impl Deref for BoundaryFunction {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl DerefMut for BoundaryFunction {
    fn deref_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Low,
    High,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub spacing: f64,
}

impl Axis {
    /// Coordinate of interior node `i` (zero based).
    pub fn coord(&self, i: usize) -> f64 {
        self.lo + (i + 1) as f64 * self.spacing
    }
}

/// One flat side of the rectangle with its unit outward normal.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
    pub normal: Point,
}

/// A boundary node on a face, together with the two interior nodes used by
/// the one-sided normal derivative and its quadrature weight along Γ.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceNode {
    pub face: usize,
    pub coord: Point,
    pub normal: Point,
    /// Interior node adjacent to the boundary node.
    pub adjacent: usize,
    /// Next interior node along the inward normal.
    pub second: usize,
    /// Spacing normal to the face.
    pub normal_spacing: f64,
    /// Boundary quadrature weight (1 in one dimension).
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H10,
    Hm1,
}

/// Controlled part of the boundary: face nodes with `(x - x0)·ν > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gamma0 {
    pub x0: Point,
    pub mask: Vec<bool>,
}

impl Gamma0 {
    pub fn contains(&self, face_node: usize) -> bool {
        self.mask[face_node]
    }

    /// Zeroes the entries of `values` that lie off Γ0. Longer inputs are
    /// treated as consecutive blocks of face values.
    pub fn restrict(&self, values: &mut [C64]) {
        for (v, &m) in values.iter_mut().zip(self.mask.iter().cycle()) {
            if !m {
                *v = C64::new(0.0, 0.0);
            }
        }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Uniform grid on `[a_1,b_1] (x [a_2,b_2])` with `m_i` interior nodes per axis.
#[derive(Clone, Debug)]
pub struct Grid {
    axes: Vec<Axis>,
    faces: Vec<Face>,
    face_nodes: Vec<FaceNode>,
    cell_volume: f64,
    neg_laplacian: Cholesky<f64, Dyn>,
}

impl Grid {
    /// Builds a grid from per-axis extents and interior node counts.
    pub fn new(extents: &[(f64, f64)], counts: &[usize]) -> Result<Grid> {
        if extents.is_empty() || extents.len() > 2 {
            return Err(Error::config(
                "grid.extents",
                format!("dimension must be 1 or 2, got {}", extents.len()),
            ));
        }
        if counts.len() != extents.len() {
            return Err(Error::config(
                "grid.counts",
                format!(
                    "expected {} interior counts, got {}",
                    extents.len(),
                    counts.len()
                ),
            ));
        }
        let mut axes = Vec::with_capacity(extents.len());
        for (&(lo, hi), &count) in extents.iter().zip(counts) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::config(
                    "grid.extents",
                    format!("degenerate extent [{lo}, {hi}]"),
                ));
            }
            if count < 2 {
                return Err(Error::config(
                    "grid.counts",
                    format!("need at least 2 interior nodes per axis, got {count}"),
                ));
            }
            axes.push(Axis {
                lo,
                hi,
                count,
                spacing: (hi - lo) / (count + 1) as f64,
            });
        }
        let dim = axes.len();
        let cell_volume = axes.iter().map(|a| a.spacing).product();

        let mut faces = Vec::with_capacity(2 * dim);
        for axis in 0..dim {
            for side in [Side::Low, Side::High] {
                let mut normal = [0.0; 2];
                normal[axis] = if side == Side::Low { -1.0 } else { 1.0 };
                faces.push(Face { axis, side, normal });
            }
        }

        let mut grid = Grid {
            axes,
            faces,
            face_nodes: Vec::new(),
            cell_volume,
            neg_laplacian: Cholesky::new(DMatrix::<f64>::identity(1, 1)).unwrap(),
        };
        grid.face_nodes = grid.build_face_nodes();
        grid.neg_laplacian = Cholesky::new(grid.neg_laplacian_matrix()).ok_or_else(|| {
            Error::Numerical("Cholesky factorization of -Δ_h failed".to_string())
        })?;
        Ok(grid)
    }

    fn build_face_nodes(&self) -> Vec<FaceNode> {
        let dim = self.dim();
        let mut nodes = Vec::new();
        for (fi, face) in self.faces.iter().enumerate() {
            let ax = &self.axes[face.axis];
            let (edge, i_adj, i_second) = match face.side {
                Side::Low => (ax.lo, 0, 1),
                Side::High => (ax.hi, ax.count - 1, ax.count - 2),
            };
            if dim == 1 {
                nodes.push(FaceNode {
                    face: fi,
                    coord: [edge, 0.0],
                    normal: face.normal,
                    adjacent: i_adj,
                    second: i_second,
                    normal_spacing: ax.spacing,
                    weight: 1.0,
                });
                continue;
            }
            let other = 1 - face.axis;
            let oax = &self.axes[other];
            for j in 0..oax.count {
                let mut coord = [0.0; 2];
                coord[face.axis] = edge;
                coord[other] = oax.coord(j);
                let index = |i: usize| {
                    let mut multi = [0usize; 2];
                    multi[face.axis] = i;
                    multi[other] = j;
                    self.flat_index(multi)
                };
                nodes.push(FaceNode {
                    face: fi,
                    coord,
                    normal: face.normal,
                    adjacent: index(i_adj),
                    second: index(i_second),
                    normal_spacing: ax.spacing,
                    weight: oax.spacing,
                });
            }
        }
        nodes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face_nodes(&self) -> &[FaceNode] {
        &self.face_nodes
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axes[axis].spacing
    }

    /// Quadrature weight of every interior node.
    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn extents(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a.lo, a.hi)).collect()
    }

    pub fn flat_index(&self, multi: [usize; 2]) -> usize {
        if self.dim() == 1 {
            multi[0]
        } else {
            multi[0] + self.axes[0].count * multi[1]
        }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [idx, 0]
        } else {
            let m0 = self.axes[0].count;
            [idx % m0, idx / m0]
        }
    }

    /// Coordinates of interior node `idx`.
    pub fn node(&self, idx: usize) -> Point {
        let multi = self.multi_index(idx);
        let mut p = [0.0; 2];
        for (axis, ax) in self.axes.iter().enumerate() {
            p[axis] = ax.coord(multi[axis]);
        }
        p
    }

    /// Interior neighbours of `idx` along `axis`; `None` marks the boundary.
    pub fn neighbors(&self, idx: usize, axis: usize) -> (Option<usize>, Option<usize>) {
        let multi = self.multi_index(idx);
        let m = self.axes[axis].count;
        let step = if axis == 0 { 1 } else { self.axes[0].count };
        let lower = (multi[axis] > 0).then(|| idx - step);
        let upper = (multi[axis] + 1 < m).then(|| idx + step);
        (lower, upper)
    }

    /// True when `x` lies in the closed rectangle.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        self.axes
            .iter()
            .zip(x)
            .all(|(a, &xi)| xi >= a.lo && xi <= a.hi)
    }

    fn check_len(&self, context: &'static str, u: &[C64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::shape(context, self.len(), u.len()));
        }
        Ok(())
    }

    /// Five-point (three-point in 1D) Dirichlet Laplacian.
    pub fn laplacian(&self, u: &[C64]) -> Result<GridFunction> {
        self.check_len("laplacian", u)?;
        let mut out = GridFunction::zeros(self.len());
        self.laplacian_into(u, &mut out);
        Ok(out)
    }

    pub(crate) fn laplacian_into(&self, u: &[C64], out: &mut [C64]) {
        for (idx, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (axis, ax) in self.axes.iter().enumerate() {
                let (lo, hi) = self.neighbors(idx, axis);
                let left = lo.map_or(C64::new(0.0, 0.0), |j| u[j]);
                let right = hi.map_or(C64::new(0.0, 0.0), |j| u[j]);
                acc += (left - 2.0 * u[idx] + right) / (ax.spacing * ax.spacing);
            }
            *o = acc;
        }
    }

    /// Dense matrix of `-Δ_h`.
    pub fn neg_laplacian_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for idx in 0..n {
            for (axis, ax) in self.axes.iter().enumerate() {
                let w = 1.0 / (ax.spacing * ax.spacing);
                a[(idx, idx)] += 2.0 * w;
                let (lo, hi) = self.neighbors(idx, axis);
                for j in [lo, hi].into_iter().flatten() {
                    a[(idx, j)] -= w;
                }
            }
        }
        a
    }

    /// Centered difference `(u_{i+1} - u_{i-1}) / 2h` along `axis`, with
    /// zero Dirichlet extension.
    pub fn centered_derivative(&self, u: &[C64], axis: usize) -> Result<GridFunction> {
        self.check_len("centered_derivative", u)?;
        let h = self.axes[axis].spacing;
        Ok(GridFunction::from_vec(
            (0..self.len())
                .map(|idx| {
                    let (lo, hi) = self.neighbors(idx, axis);
                    let left = lo.map_or(C64::new(0.0, 0.0), |j| u[j]);
                    let right = hi.map_or(C64::new(0.0, 0.0), |j| u[j]);
                    (right - left) / (2.0 * h)
                })
                .collect(),
        ))
    }

    /// Number of gradient edges: `(m_a + 1) * prod_{b != a} m_b` per axis.
    pub fn edge_count(&self) -> usize {
        (0..self.dim()).map(|a| self.edges_on_axis(a)).sum()
    }

    fn edges_on_axis(&self, axis: usize) -> usize {
        self.axes
            .iter()
            .enumerate()
            .map(|(b, ax)| if b == axis { ax.count + 1 } else { ax.count })
            .product()
    }

    /// Forward differences across every edge, including the boundary edges
    /// where the Dirichlet value enters. Ordered axis by axis.
    pub fn edge_gradient(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.check_len("edge_gradient", u)?;
        let mut out = Vec::with_capacity(self.edge_count());
        let zero = C64::new(0.0, 0.0);
        for axis in 0..self.dim() {
            let h = self.axes[axis].spacing;
            let m = self.axes[axis].count;
            let (outer, other_count) = if self.dim() == 1 {
                (1, 1)
            } else {
                let other = 1 - axis;
                (self.axes[other].count, self.axes[other].count)
            };
            debug_assert_eq!(outer, other_count);
            for j in 0..outer {
                for e in 0..=m {
                    let at = |i: usize| {
                        let mut multi = [0usize; 2];
                        multi[axis] = i;
                        if self.dim() == 2 {
                            multi[1 - axis] = j;
                        }
                        u[self.flat_index(multi)]
                    };
                    let right = if e < m { at(e) } else { zero };
                    let left = if e > 0 { at(e - 1) } else { zero };
                    out.push((right - left) / h);
                }
            }
        }
        Ok(out)
    }

    /// Midpoints of the edges in [`Grid::edge_gradient`] order.
    pub fn edge_midpoints(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.edge_count());
        for axis in 0..self.dim() {
            let ax = &self.axes[axis];
            let outer = if self.dim() == 1 {
                1
            } else {
                self.axes[1 - axis].count
            };
            for j in 0..outer {
                for e in 0..=ax.count {
                    let mut p = [0.0; 2];
                    p[axis] = ax.lo + (e as f64 + 0.5) * ax.spacing;
                    if self.dim() == 2 {
                        p[1 - axis] = self.axes[1 - axis].coord(j);
                    }
                    out.push(p);
                }
            }
        }
        out
    }

    /// Discrete L² inner product, linear in `u` and antilinear in `w`.
    pub fn inner(&self, u: &[C64], w: &[C64]) -> C64 {
        debug_assert_eq!(u.len(), w.len());
        let s: C64 = u.iter().zip(w).map(|(a, b)| a * b.conj()).sum();
        s * self.cell_volume
    }

    /// Discrete H¹₀ inner product `<∇_h u, ∇_h w>`.
    pub fn h10_inner(&self, u: &[C64], w: &[C64]) -> Result<C64> {
        let gu = self.edge_gradient(u)?;
        let gw = self.edge_gradient(w)?;
        let s: C64 = gu.iter().zip(&gw).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.cell_volume)
    }

    /// Solves `-Δ_h v = u`.
    pub fn neg_laplacian_solve(&self, u: &[C64]) -> Result<GridFunction> {
        self.check_len("neg_laplacian_solve", u)?;
        let n = self.len();
        let rhs = DMatrix::from_fn(n, 2, |i, j| if j == 0 { u[i].re } else { u[i].im });
        let sol = self.neg_laplacian.solve(&rhs);
        Ok(GridFunction::from_vec(
            (0..n).map(|i| C64::new(sol[(i, 0)], sol[(i, 1)])).collect(),
        ))
    }

    /// Squared norm of the requested kind.
    pub fn norm_sqr(&self, u: &[C64], kind: NormKind) -> Result<f64> {
        self.check_len("norm", u)?;
        let v = match kind {
            NormKind::L2 => u.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_volume,
            NormKind::H10 => {
                self.edge_gradient(u)?
                    .iter()
                    .map(|v| v.norm_sqr())
                    .sum::<f64>()
                    * self.cell_volume
            }
            NormKind::Hm1 => {
                let v = self.neg_laplacian_solve(u)?;
                self.inner(&v, u).re
            }
        };
        Ok(v.max(0.0))
    }

    pub fn norm(&self, u: &[C64], kind: NormKind) -> Result<f64> {
        Ok(self.norm_sqr(u, kind)?.sqrt())
    }

    /// Riesz image of `z` from H¹₀ into H⁻¹: `g = -Δ_h z`, so that
    /// `<g, w>_{L²} = <z, w>_{H¹₀}` for all `w`.
    pub fn hm1_riesz(&self, z: &[C64]) -> Result<GridFunction> {
        let mut g = self.laplacian(z)?;
        for v in g.iter_mut() {
            *v = -*v;
        }
        Ok(g)
    }

    /// Selects Γ0 by the strict sign test `(x - x0)·ν(x) > 0`.
    pub fn gamma0(&self, x0: &[f64]) -> Result<Gamma0> {
        if x0.len() != self.dim() {
            return Err(Error::config(
                "weights.x0",
                format!("expected {} coordinates, got {}", self.dim(), x0.len()),
            ));
        }
        if !x0.iter().all(|v| v.is_finite()) {
            return Err(Error::config("weights.x0", "non-finite coordinate"));
        }
        if self.contains_closed(x0) {
            return Err(Error::config(
                "weights.x0",
                format!("x0 = {x0:?} must lie outside the closed domain"),
            ));
        }
        let mut p = [0.0; 2];
        p[..x0.len()].copy_from_slice(x0);
        let mask = self
            .face_nodes
            .iter()
            .map(|f| {
                let dot: f64 = (0..self.dim())
                    .map(|a| (f.coord[a] - p[a]) * f.normal[a])
                    .sum();
                dot > 0.0
            })
            .collect();
        Ok(Gamma0 { x0: p, mask })
    }

    /// One-sided second-order normal derivative at every face node,
    /// `(z_2 - 4 z_1) / 2h` using the zero boundary value.
    pub fn normal_trace(&self, u: &[C64]) -> Result<BoundaryFunction> {
        self.check_len("normal_trace", u)?;
        Ok(BoundaryFunction::from_vec(
            self.face_nodes
                .iter()
                .map(|f| (u[f.second] - 4.0 * u[f.adjacent]) / (2.0 * f.normal_spacing))
                .collect(),
        ))
    }

    /// Adjoint of [`Grid::normal_trace`] between the boundary pairing and the
    /// interior L² pairing: `<b, ∂_ν u>_Γ = <N* b, u>`.
    pub fn normal_trace_adjoint(&self, b: &[C64]) -> Result<GridFunction> {
        if b.len() != self.face_nodes.len() {
            return Err(Error::shape(
                "normal_trace_adjoint",
                self.face_nodes.len(),
                b.len(),
            ));
        }
        let mut out = GridFunction::zeros(self.len());
        for (f, &v) in self.face_nodes.iter().zip(b) {
            let scale = f.weight / (2.0 * f.normal_spacing * self.cell_volume);
            out[f.adjacent] += -4.0 * scale * v;
            out[f.second] += scale * v;
        }
        Ok(out)
    }

    /// Boundary L² pairing, optionally restricted to Γ0.
    pub fn boundary_inner(&self, a: &[C64], b: &[C64], gamma0: Option<&Gamma0>) -> C64 {
        self.face_nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| gamma0.is_none_or(|g| g.mask[*i]))
            .map(|(i, f)| a[i] * b[i].conj() * f.weight)
            .sum()
    }

    pub fn boundary_norm_sqr(&self, a: &[C64], gamma0: Option<&Gamma0>) -> f64 {
        self.boundary_inner(a, a, gamma0).re.max(0.0)
    }
}
