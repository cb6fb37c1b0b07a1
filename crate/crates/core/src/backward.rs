//! Backward stochastic Schrödinger equation on the grid × tree.
//!
//! The dual equation `i dz + Δz dt = (b1·∇z + b2 z + b3 Z) dt + Z dB` is
//! stepped backward one tree level at a time. At level `k`, node `n`, with
//! children `z^±` at level `k + 1`:
//!
//! ```text
//! ẑ = (z⁺ + z⁻)/2,   Z = i (z⁺ - z⁻)/(2√Δt)
//! ```
//!
//! The factor `i` in `Z` comes from writing the noise as `Z dB` on the
//! `i dz` side: the martingale part of `z` itself is `-i Z dB`. The drift
//! is then integrated from `ẑ` down to `t_k` with `S` θ-scheme substeps of
//! length `δ = Δt/S`, holding `Z` fixed:
//!
//! ```text
//! (I + θM) w_s = (I - (1-θ)M) w_{s+1} + iδ b3 Z,   M = iδ(Δ_h - b1·∇_h - b2)
//! ```
//!
//! from `w_S = ẑ` to `z_k = w_0`. With `S = 1`, `θ = 1` this is the plain
//! implicit Euler step `i(ẑ - z_k) + Δt Δ_h z_k = Δt (b1·∇_h z_k + b2 z_k + b3 Z)`.
//! The boundary flux is recorded at every substep state `w_0..w_{S-1}`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::coeff::CoefField;
use crate::error::{Error, Result};
use crate::grid::{Gamma0, Grid, NormKind, C64};
use crate::tree::{martingale_representation, AdaptedField, FiltrationTree, LevelField};

const I: C64 = C64::new(0.0, 1.0);

/// Cap on cached per-node factorizations, in bytes.
const FACTOR_CACHE_BUDGET: usize = 64 << 20;

/// Coefficients of the dual equation. The drift vector field is stored
/// through its real representative `c1` with `b1 = -i c1`; it is extended
/// by zero to the boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct DualCoefficients {
    pub c1: Vec<CoefField>,
    pub b2: CoefField,
    pub b3: CoefField,
}

impl DualCoefficients {
    pub fn zero(grid: &Grid) -> Self {
        DualCoefficients {
            c1: (0..grid.dim()).map(|_| CoefField::zero(grid)).collect(),
            b2: CoefField::zero(grid),
            b3: CoefField::zero(grid),
        }
    }

    pub fn validate(&self, grid: &Grid, tree: &FiltrationTree) -> Result<()> {
        if self.c1.len() != grid.dim() {
            return Err(Error::config(
                "coeff.b1",
                format!("expected {} components, got {}", grid.dim(), self.c1.len()),
            ));
        }
        for c in &self.c1 {
            c.validate(grid, tree, "coeff.b1")?;
            if !c.is_real() {
                return Err(Error::config("coeff.b1", "i·b1 must be real valued"));
            }
        }
        self.b2.validate(grid, tree, "coeff.b2")?;
        self.b3.validate(grid, tree, "coeff.b3")
    }

    pub fn is_static(&self) -> bool {
        self.c1.iter().all(CoefField::is_static) && self.b2.is_static() && self.b3.is_static()
    }

    /// `r1 = |b1|²_{W^{1,∞}} + |b2|²_{W^{1,∞}} + |b3|²_{W^{1,∞}} + 1`.
    pub fn r1(&self, grid: &Grid) -> f64 {
        let b1: f64 = self.c1.iter().map(|c| c.w1inf_norm(grid, true)).sum();
        b1.powi(2) + self.b2.w1inf_norm(grid, false).powi(2) + self.b3.w1inf_norm(grid, false).powi(2)
            + 1.0
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        let fields = self.c1.iter().chain([&self.b2, &self.b3]);
        for f in fields {
            match f {
                CoefField::Spatial(g) => {
                    0u8.hash(&mut h);
                    for v in g.iter() {
                        v.re.to_bits().hash(&mut h);
                        v.im.to_bits().hash(&mut h);
                    }
                }
                CoefField::Adapted(a) => {
                    1u8.hash(&mut h);
                    for l in a.levels() {
                        for v in l.data() {
                            v.re.to_bits().hash(&mut h);
                            v.im.to_bits().hash(&mut h);
                        }
                    }
                }
            }
        }
        h.finish()
    }
}

/// Time discretization inside one tree level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeScheme {
    /// Drift substeps per tree level.
    pub substeps: usize,
    /// Implicitness: 1 is backward Euler, 1/2 is Crank–Nicolson.
    pub theta: f64,
}

impl TimeScheme {
    pub const IMPLICIT_EULER: TimeScheme = TimeScheme {
        substeps: 1,
        theta: 1.0,
    };

    pub const MAX_SUBSTEPS: usize = 1000;

    pub fn crank_nicolson(substeps: usize) -> Self {
        TimeScheme {
            substeps,
            theta: 0.5,
        }
    }

    /// Substep length for a tree step `dt`.
    pub fn substep_dt(&self, dt: f64) -> f64 {
        dt / self.substeps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.substeps == 0 || self.substeps > Self::MAX_SUBSTEPS {
            return Err(Error::config(
                "time.substeps",
                format!("must lie in 1..={}, got {}", Self::MAX_SUBSTEPS, self.substeps),
            ));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::config(
                "time.theta",
                format!("must lie in [0.5, 1], got {}", self.theta),
            ));
        }
        Ok(())
    }
}

impl Default for TimeScheme {
    fn default() -> Self {
        Self::IMPLICIT_EULER
    }
}

/// Rejects factorizations whose pivots span more than `1/(n ε)`.
fn well_conditioned(lu: &LU<C64, Dyn, Dyn>) -> bool {
    let u = lu.u();
    let pivots = u.diagonal();
    let max = pivots.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let min = pivots.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    max.is_finite() && min > max * f64::EPSILON * pivots.len() as f64
}

struct StepFactors {
    lu: LU<C64, Dyn, Dyn>,
    lu_adj: LU<C64, Dyn, Dyn>,
    /// `I - (1-θ)M`; absent for θ = 1.
    explicit: Option<DMatrix<C64>>,
}

enum FactorCache {
    Static(StepFactors),
    PerNode(Vec<Vec<StepFactors>>),
    OnTheFly,
}

/// Solution `(z, Z)` of the dual equation with its boundary flux.
#[derive(Clone, Debug, PartialEq)]
pub struct BackwardSolution {
    /// `z` on levels `0..=τ`; level `τ` is the final datum.
    pub z: AdaptedField,
    /// `Z` on levels `0..τ`.
    pub big_z: AdaptedField,
    /// `∂z/∂ν` at every face node for each substep, levels `0..τ`; node
    /// vectors are laid out substep-major.
    pub flux: AdaptedField,
    pub meta: SolveMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveMeta {
    pub coeff_fingerprint: u64,
    pub final_level: usize,
    pub dt: f64,
    pub scheme: TimeScheme,
}

impl BackwardSolution {
    pub fn final_level(&self) -> usize {
        self.meta.final_level
    }
}

/// Energy profile `E|z(t_k)|²_{H¹₀}` and the smallest Gronwall constants
/// compatible with it.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyProfile {
    pub energies: Vec<f64>,
    /// `Σ_l Δt E|Z(t_l)|²_{H¹₀}`.
    pub z_energy: f64,
    pub r1: f64,
    /// Smallest `Ĉ ≥ 0` with `e_k ≤ exp(Ĉ r1) (e_j + z_energy)` for `j ≤ k`.
    pub c_hat_forward: f64,
    /// Smallest `Ĉ ≥ 0` with `e_j ≤ exp(Ĉ r1) (e_k + z_energy)` for `j ≤ k`.
    pub c_hat_backward: f64,
    /// The solution vanishes identically; the constants carry no information.
    pub vacuous: bool,
}

pub struct BackwardSolver {
    grid: Grid,
    tree: FiltrationTree,
    coeffs: DualCoefficients,
    scheme: TimeScheme,
    cache: FactorCache,
    fingerprint: u64,
}

impl std::fmt::Debug for BackwardSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackwardSolver")
            .field("grid_len", &self.grid.len())
            .field("levels", &self.tree.levels())
            .field("fingerprint", &self.fingerprint)
            .finish()
    }
}

impl BackwardSolver {
    pub fn new(
        grid: &Grid,
        tree: &FiltrationTree,
        coeffs: DualCoefficients,
        scheme: TimeScheme,
    ) -> Result<Self> {
        scheme.validate()?;
        coeffs.validate(grid, tree)?;
        let fingerprint = coeffs.fingerprint();
        let mut solver = BackwardSolver {
            grid: grid.clone(),
            tree: tree.clone(),
            coeffs,
            scheme,
            cache: FactorCache::OnTheFly,
            fingerprint,
        };
        let n = grid.len();
        let per_factor = 3 * n * n * std::mem::size_of::<C64>();
        solver.cache = if solver.coeffs.is_static() {
            FactorCache::Static(solver.factor(0, 0)?)
        } else if per_factor * ((1usize << tree.levels()) - 1) <= FACTOR_CACHE_BUDGET {
            let mut levels = Vec::with_capacity(tree.levels());
            for k in 0..tree.levels() {
                let row = (0..tree.node_count(k))
                    .map(|node| solver.factor(k, node))
                    .collect::<Result<Vec<_>>>()?;
                levels.push(row);
            }
            FactorCache::PerNode(levels)
        } else {
            FactorCache::OnTheFly
        };
        Ok(solver)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tree(&self) -> &FiltrationTree {
        &self.tree
    }

    pub fn coeffs(&self) -> &DualCoefficients {
        &self.coeffs
    }

    pub fn r1(&self) -> f64 {
        self.coeffs.r1(&self.grid)
    }

    pub fn scheme(&self) -> TimeScheme {
        self.scheme
    }

    /// Substep length `δ = Δt / S`.
    pub fn substep_dt(&self) -> f64 {
        self.tree.dt() / self.scheme.substeps as f64
    }

    /// Width of a flux (and boundary control) node vector: one block of
    /// face values per substep.
    pub fn flux_width(&self) -> usize {
        self.scheme.substeps * self.grid.face_nodes().len()
    }

    /// Generator `M = iδ(Δ_h - b1·∇_h - b2)` at tree node `(level, node)`.
    pub fn generator(&self, level: usize, node: usize) -> DMatrix<C64> {
        let grid = &self.grid;
        let dt = self.substep_dt();
        let n = grid.len();
        let lap = grid.neg_laplacian_matrix();
        let b2 = self.coeffs.b2.at(level, node);
        let mut m = DMatrix::<C64>::from_fn(n, n, |i, j| -I * dt * lap[(i, j)]);
        for i in 0..n {
            m[(i, i)] -= I * dt * b2[i];
        }
        // -iδ b1·∇ = -δ c1·∇ with b1 = -i c1
        for (axis, c1) in self.coeffs.c1.iter().enumerate() {
            let c = c1.at(level, node);
            let w = dt / (2.0 * grid.spacing(axis));
            for i in 0..n {
                let (lo, hi) = grid.neighbors(i, axis);
                if let Some(j) = hi {
                    m[(i, j)] -= w * c[i];
                }
                if let Some(j) = lo {
                    m[(i, j)] += w * c[i];
                }
            }
        }
        m
    }

    /// Implicit substep matrix `P = I + θM`.
    pub fn step_matrix(&self, level: usize, node: usize) -> DMatrix<C64> {
        let mut p = self.generator(level, node) * C64::new(self.scheme.theta, 0.0);
        for i in 0..p.nrows() {
            p[(i, i)] += C64::new(1.0, 0.0);
        }
        p
    }

    /// Explicit substep matrix `Q = I - (1-θ)M`.
    pub fn explicit_matrix(&self, level: usize, node: usize) -> DMatrix<C64> {
        let mut q = self.generator(level, node) * C64::new(self.scheme.theta - 1.0, 0.0);
        for i in 0..q.nrows() {
            q[(i, i)] += C64::new(1.0, 0.0);
        }
        q
    }

    fn factor(&self, level: usize, node: usize) -> Result<StepFactors> {
        let p = self.step_matrix(level, node);
        let lu_adj = p.adjoint().lu();
        let lu = p.lu();
        if !well_conditioned(&lu) || !well_conditioned(&lu_adj) {
            return Err(Error::Singular { level, node });
        }
        let explicit = (self.scheme.theta != 1.0).then(|| self.explicit_matrix(level, node));
        Ok(StepFactors {
            lu,
            lu_adj,
            explicit,
        })
    }

    fn with_factors<T>(
        &self,
        level: usize,
        node: usize,
        f: impl FnOnce(&StepFactors) -> T,
    ) -> Result<T> {
        match &self.cache {
            FactorCache::Static(s) => Ok(f(s)),
            FactorCache::PerNode(v) => Ok(f(&v[level][node])),
            FactorCache::OnTheFly => Ok(f(&self.factor(level, node)?)),
        }
    }

    /// Solves `P x = rhs` at `(level, node)`.
    pub fn step_solve(&self, level: usize, node: usize, rhs: &[C64]) -> Result<Vec<C64>> {
        let b = DVector::from_column_slice(rhs);
        self.with_factors(level, node, |f| f.lu.solve(&b))?
            .map(|x| x.as_slice().to_vec())
            .ok_or(Error::Singular { level, node })
    }

    /// Solves `Pᴴ x = rhs` at `(level, node)`.
    pub fn step_solve_adjoint(&self, level: usize, node: usize, rhs: &[C64]) -> Result<Vec<C64>> {
        let b = DVector::from_column_slice(rhs);
        self.with_factors(level, node, |f| f.lu_adj.solve(&b))?
            .map(|x| x.as_slice().to_vec())
            .ok_or(Error::Singular { level, node })
    }

    /// `Q v` at `(level, node)`.
    pub fn explicit_apply(&self, level: usize, node: usize, v: &[C64]) -> Result<Vec<C64>> {
        let b = DVector::from_column_slice(v);
        self.with_factors(level, node, |f| match &f.explicit {
            Some(q) => (q * &b).as_slice().to_vec(),
            None => v.to_vec(),
        })
    }

    /// `Qᴴ v` at `(level, node)`.
    pub fn explicit_apply_adjoint(&self, level: usize, node: usize, v: &[C64]) -> Result<Vec<C64>> {
        let b = DVector::from_column_slice(v);
        self.with_factors(level, node, |f| match &f.explicit {
            Some(q) => q.ad_mul(&b).as_slice().to_vec(),
            None => v.to_vec(),
        })
    }

    /// `Σ_s δ E<a_s, b_s>_{L²(Γ or Γ0)}` for two flux-shaped fields on one
    /// level.
    pub fn time_boundary_inner(&self, a: &LevelField, b: &LevelField, gamma0: Option<&Gamma0>) -> C64 {
        let faces = self.grid.face_nodes().len();
        let dt = self.substep_dt();
        let s: C64 = a
            .nodes()
            .zip(b.nodes())
            .map(|(x, y)| {
                x.chunks(faces)
                    .zip(y.chunks(faces))
                    .map(|(xs, ys)| self.grid.boundary_inner(xs, ys, gamma0))
                    .sum::<C64>()
            })
            .sum();
        s * dt / a.node_count() as f64
    }

    /// Runs the backward recursion from a final datum at level `τ ≥ 1`.
    pub fn solve(&self, datum: &LevelField) -> Result<BackwardSolution> {
        let tau = datum.level();
        if tau == 0 || tau > self.tree.levels() {
            return Err(Error::Domain(format!(
                "final datum level {tau} outside 1..={}",
                self.tree.levels()
            )));
        }
        if datum.width() != self.grid.len() {
            return Err(Error::shape("solve_backward", self.grid.len(), datum.width()));
        }
        if !datum.is_finite() {
            return Err(Error::NonFinite("final datum"));
        }
        let dt = self.tree.dt();
        let width = self.grid.len();
        let faces = self.grid.face_nodes().len();
        let substeps = self.scheme.substeps;
        let sub_dt = self.substep_dt();

        let mut z_levels = vec![datum.clone()];
        let mut big_z_levels = Vec::with_capacity(tau);
        let mut flux_levels = Vec::with_capacity(tau);
        for k in (0..tau).rev() {
            let next = z_levels.last().expect("level k+1 present");
            let mut zk = LevelField::zeros(k, width);
            let mut big_z = LevelField::zeros(k, width);
            let mut flux = LevelField::zeros(k, faces * substeps);
            for node in 0..self.tree.node_count(k) {
                let (up, down) = FiltrationTree::children(node);
                let (mean, integrand) = martingale_representation(next.node(up), next.node(down), dt);
                let b3 = self.coeffs.b3.at(k, node);
                let zn = big_z.node_mut(node);
                for (o, v) in zn.iter_mut().zip(integrand.iter()) {
                    *o = I * v;
                }
                let source: Vec<C64> = zn.iter().zip(b3).map(|(zv, b)| I * sub_dt * b * zv).collect();
                let mut w = mean.into_vec();
                let fluxes = flux.node_mut(node);
                for s in (0..substeps).rev() {
                    let mut rhs = self.explicit_apply(k, node, &w)?;
                    for (r, src) in rhs.iter_mut().zip(&source) {
                        *r += src;
                    }
                    w = self.step_solve(k, node, &rhs)?;
                    fluxes[s * faces..(s + 1) * faces].copy_from_slice(&self.grid.normal_trace(&w)?);
                }
                zk.node_mut(node).copy_from_slice(&w);
            }
            z_levels.push(zk);
            big_z_levels.push(big_z);
            flux_levels.push(flux);
        }
        z_levels.reverse();
        big_z_levels.reverse();
        flux_levels.reverse();
        let sol = BackwardSolution {
            z: AdaptedField::new(0, z_levels)?,
            big_z: AdaptedField::new(0, big_z_levels)?,
            flux: AdaptedField::new(0, flux_levels)?,
            meta: SolveMeta {
                coeff_fingerprint: self.fingerprint,
                final_level: tau,
                dt,
                scheme: self.scheme,
            },
        };
        if !sol.z.is_finite() {
            return Err(Error::NonFinite("backward solution"));
        }
        Ok(sol)
    }

    /// `E|z(t_k)|²_{H¹₀}` for every level plus the Gronwall constants in both
    /// time orderings.
    pub fn energy_profile(&self, sol: &BackwardSolution) -> Result<EnergyProfile> {
        let grid = &self.grid;
        let energies = sol
            .z
            .levels()
            .iter()
            .map(|l| l.expected_norm_sqr(grid, NormKind::H10))
            .collect::<Result<Vec<_>>>()?;
        let mut z_energy = 0.0;
        for l in sol.big_z.levels() {
            z_energy += sol.meta.dt * l.expected_norm_sqr(grid, NormKind::H10)?;
        }
        let r1 = self.r1();
        let vacuous = energies.iter().all(|&e| e == 0.0) && z_energy == 0.0;
        let constant = |num: f64, den: f64| -> f64 {
            if num == 0.0 {
                0.0
            } else if den == 0.0 {
                f64::INFINITY
            } else {
                ((num / den).ln() / r1).max(0.0)
            }
        };
        let mut fwd = 0.0f64;
        let mut bwd = 0.0f64;
        for k in 0..energies.len() {
            for j in 0..=k {
                fwd = fwd.max(constant(energies[k], energies[j] + z_energy));
                bwd = bwd.max(constant(energies[j], energies[k] + z_energy));
            }
        }
        Ok(EnergyProfile {
            energies,
            z_energy,
            r1,
            c_hat_forward: fwd,
            c_hat_backward: bwd,
            vacuous,
        })
    }

    /// `(Σ_{k,s} δ E|∂z/∂ν(t_k + sδ)|²_{L²(Γ)})^{1/2} / |z_τ|_{L²(Ω;H¹₀)}`; zero for a
    /// zero datum.
    pub fn hidden_regularity_ratio(&self, sol: &BackwardSolution) -> Result<f64> {
        let grid = &self.grid;
        let tau = sol.final_level();
        let datum = sol.z.level(tau).expected_norm_sqr(grid, NormKind::H10)?;
        if datum == 0.0 {
            return Ok(0.0);
        }
        let flux: f64 = sol
            .flux
            .levels()
            .iter()
            .map(|l| self.time_boundary_inner(l, l, None).re)
            .sum();
        Ok((flux / datum).sqrt())
    }
}
