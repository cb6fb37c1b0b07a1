//! Controlled forward equation, defined by transposition: each level of the
//! forward recursion is the exact adjoint of the corresponding backward
//! level, so the duality identity holds to round-off.
//!
//! At node `n` of level `k`, starting from `v_0 = y_k` and running over the
//! substeps `s = 0..S` of the backward scheme:
//!
//! ```text
//! q_s     = P⁻ᴴ (v_s + δ N*u_s + [s = 0] Δt f_k)
//! c      += -iδ conj(b3) q_s
//! v_{s+1} = Qᴴ q_s
//! y_{k+1}^± = v_S ∓ i (c + Δt g_k)/√Δt
//! ```
//!
//! where `N*` is the adjoint of the boundary flux map and `±` are the
//! children `2n` (`+√Δt`) and `2n+1` (`-√Δt`).

use rand::Rng;

use crate::backward::{BackwardSolver, DualCoefficients, TimeScheme};
use crate::coeff::CoefField;
use crate::error::{Error, Result};
use crate::grid::{Gamma0, Grid, GridFunction, NormKind, C64};
use crate::random;
use crate::tree::{AdaptedField, FiltrationTree, LevelField};

const I: C64 = C64::new(0.0, 1.0);

/// Coefficients of the controlled equation. The first-order coefficient is
/// stored as the real field `ca` with `a1 = -i ca`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCoefficients {
    pub ca: Vec<CoefField>,
    pub a2: CoefField,
    pub a3: CoefField,
}

impl ForwardCoefficients {
    pub fn zero(grid: &Grid) -> Self {
        ForwardCoefficients {
            ca: (0..grid.dim()).map(|_| CoefField::zero(grid)).collect(),
            a2: CoefField::zero(grid),
            a3: CoefField::zero(grid),
        }
    }

    /// `a1 = a2 = 0`, `a3 = 1`: the instance where boundary control is
    /// indispensable.
    pub fn noise_only(grid: &Grid) -> Self {
        ForwardCoefficients {
            a3: CoefField::constant(grid, C64::new(1.0, 0.0)),
            ..Self::zero(grid)
        }
    }

    /// Independent smooth adapted fields with every value bounded by
    /// `bound`; `ca` is real and vanishes on Γ.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        grid: &Grid,
        tree: &FiltrationTree,
        bound: f64,
    ) -> Self {
        ForwardCoefficients {
            ca: (0..grid.dim())
                .map(|_| random::adapted_field(rng, grid, tree, bound, true))
                .collect(),
            a2: random::adapted_field(rng, grid, tree, bound, false),
            a3: random::adapted_field(rng, grid, tree, bound, false),
        }
    }

    pub fn is_noise_only(&self) -> bool {
        let one = |c: &C64| *c == C64::new(1.0, 0.0);
        self.ca.iter().all(CoefField::is_zero)
            && self.a2.is_zero()
            && match &self.a3 {
                CoefField::Spatial(g) => g.iter().all(one),
                CoefField::Adapted(a) => a.levels().iter().all(|l| l.data().iter().all(one)),
            }
    }

    /// `b1 = -a1`, `b2 = -div a1 + a2`, `b3 = -a3`, with `div` by centered
    /// differences and zero extension.
    pub fn dual(&self, grid: &Grid, tree: &FiltrationTree) -> Result<DualCoefficients> {
        if self.ca.len() != grid.dim() {
            return Err(Error::config(
                "coeff.a1",
                format!("expected {} components, got {}", grid.dim(), self.ca.len()),
            ));
        }
        for c in &self.ca {
            c.validate(grid, tree, "coeff.a1")?;
            if !c.is_real() {
                return Err(Error::config("coeff.a1", "i·a1 must be real valued"));
            }
        }
        self.a2.validate(grid, tree, "coeff.a2")?;
        self.a3.validate(grid, tree, "coeff.a3")?;

        let div = |level: usize, node: usize| -> Vec<C64> {
            let mut out = vec![C64::new(0.0, 0.0); grid.len()];
            for (axis, c) in self.ca.iter().enumerate() {
                let d = grid
                    .centered_derivative(c.at(level, node), axis)
                    .expect("validated width");
                for (o, v) in out.iter_mut().zip(d.iter()) {
                    *o += v;
                }
            }
            out
        };
        let b2_at = |level: usize, node: usize| -> Vec<C64> {
            div(level, node)
                .into_iter()
                .zip(self.a2.at(level, node))
                .map(|(d, a)| I * d + a)
                .collect()
        };
        let all_static = self.ca.iter().all(CoefField::is_static) && self.a2.is_static();
        let b2 = if all_static {
            CoefField::Spatial(GridFunction::from_vec(b2_at(0, 0)))
        } else {
            let levels = (0..tree.levels())
                .map(|k| LevelField::from_fn(k, grid.len(), |n| b2_at(k, n)))
                .collect();
            CoefField::Adapted(AdaptedField::new(0, levels)?)
        };
        Ok(DualCoefficients {
            c1: self.ca.iter().map(|c| c.map(|v| -v)).collect(),
            b2,
            b3: self.a3.map(|v| -v),
        })
    }

    /// `r2 = |a1|²_{W^{1,∞}} + |a2|²_{W^{1,∞}} + |a3|²_{W^{1,∞}} + 1`.
    pub fn r2(&self, grid: &Grid) -> f64 {
        let a1: f64 = self.ca.iter().map(|c| c.w1inf_norm(grid, true)).sum();
        a1.powi(2) + self.a2.w1inf_norm(grid, false).powi(2) + self.a3.w1inf_norm(grid, false).powi(2)
            + 1.0
    }
}

/// Boundary control `u` (one block of face values per substep, zero off Γ0)
/// and internal control `g`, both on levels `0..K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPair {
    pub u: AdaptedField,
    pub g: AdaptedField,
}

impl ControlPair {
    pub fn zeros(boundary_width: usize, interior_width: usize, levels: usize) -> Self {
        ControlPair {
            u: AdaptedField::zeros(0, levels - 1, boundary_width),
            g: AdaptedField::zeros(0, levels - 1, interior_width),
        }
    }

    fn validate(&self, solver: &BackwardSolver, gamma0: &Gamma0, levels: usize) -> Result<()> {
        let grid = solver.grid();
        let faces = grid.face_nodes().len();
        for (name, f, width) in [
            ("u", &self.u, solver.flux_width()),
            ("g", &self.g, grid.len()),
        ] {
            if f.first_level() != 0 || f.last_level() + 1 < levels {
                return Err(Error::Domain(format!("control {name} must cover levels 0..{levels}")));
            }
            if f.width() != width {
                return Err(Error::shape("control", width, f.width()));
            }
            if !f.is_finite() {
                return Err(Error::NonFinite("control"));
            }
        }
        for l in self.u.levels() {
            for node in l.nodes() {
                let off = node
                    .iter()
                    .enumerate()
                    .any(|(i, v)| !gamma0.contains(i % faces) && v.norm() != 0.0);
                if off {
                    return Err(Error::Domain("boundary control nonzero off Γ0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Forward state `y` on levels `0..=τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardState {
    pub y: AdaptedField,
}

impl ForwardState {
    pub fn final_level(&self) -> usize {
        self.y.last_level()
    }

    pub fn terminal(&self) -> &LevelField {
        self.y.level(self.final_level())
    }
}

/// Both sides of the duality identity for one final datum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualityCheck {
    /// `E<y(τ), z_τ> - <y0, z(0)>`.
    pub lhs: C64,
    /// `Σ_k Δt E[<u, ∂z/∂ν>_{Γ0} + <f, z> + <g, Z>]`.
    pub rhs: C64,
    /// `|lhs - rhs|` over the sum of magnitudes of all terms.
    pub gap: f64,
}

/// Empirical well-posedness constants against `r1` and `r2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WellPosedness {
    /// `max_k |y(t_k)|_{L²(Ω; H⁻¹)}`.
    pub state_norm: f64,
    /// `|y0|_{H⁻¹} + |f|_{L²_F(L²)} + |u|_{L²_F(L²(Γ0))} + |g|_{L²_F(H⁻¹)}`.
    pub data_norm: f64,
    pub r1: f64,
    pub r2: f64,
    pub c_hat_r1: f64,
    pub c_hat_r2: f64,
}

/// Outcome of comparing `E y(T)` with the deterministic semigroup image.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanEvolution {
    pub expected: GridFunction,
    pub semigroup: GridFunction,
    /// `|expected - semigroup|_{H⁻¹}`.
    pub discrepancy: f64,
}

pub struct ForwardSolver {
    backward: BackwardSolver,
    coeffs: ForwardCoefficients,
    gamma0: Gamma0,
}

impl ForwardSolver {
    pub fn new(
        grid: &Grid,
        tree: &FiltrationTree,
        coeffs: ForwardCoefficients,
        gamma0: Gamma0,
        scheme: TimeScheme,
    ) -> Result<Self> {
        if gamma0.mask.len() != grid.face_nodes().len() {
            return Err(Error::shape("gamma0", grid.face_nodes().len(), gamma0.mask.len()));
        }
        let dual = coeffs.dual(grid, tree)?;
        Ok(ForwardSolver {
            backward: BackwardSolver::new(grid, tree, dual, scheme)?,
            coeffs,
            gamma0,
        })
    }

    pub fn backward(&self) -> &BackwardSolver {
        &self.backward
    }

    pub fn coeffs(&self) -> &ForwardCoefficients {
        &self.coeffs
    }

    pub fn gamma0(&self) -> &Gamma0 {
        &self.gamma0
    }

    pub fn grid(&self) -> &Grid {
        self.backward.grid()
    }

    pub fn tree(&self) -> &FiltrationTree {
        self.backward.tree()
    }

    pub fn r1(&self) -> f64 {
        self.backward.r1()
    }

    pub fn zero_controls(&self) -> ControlPair {
        ControlPair::zeros(
            self.backward.flux_width(),
            self.grid().len(),
            self.tree().levels(),
        )
    }

    pub fn r2(&self) -> f64 {
        self.coeffs.r2(self.grid())
    }

    /// Transposition solution on levels `0..=tau` for deterministic `y0`.
    pub fn solve(
        &self,
        y0: &[C64],
        controls: &ControlPair,
        f: Option<&AdaptedField>,
        tau: usize,
    ) -> Result<ForwardState> {
        let grid = self.grid();
        let tree = self.tree();
        let width = grid.len();
        if tau == 0 || tau > tree.levels() {
            return Err(Error::Domain(format!(
                "final level {tau} outside 1..={}",
                tree.levels()
            )));
        }
        if y0.len() != width {
            return Err(Error::shape("initial state", width, y0.len()));
        }
        if !y0.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("initial state"));
        }
        controls.validate(&self.backward, &self.gamma0, tau)?;
        if let Some(f) = f {
            if f.first_level() != 0 || f.last_level() + 1 < tau || f.width() != width {
                return Err(Error::Domain(format!("source must cover levels 0..{tau}")));
            }
            if !f.is_finite() {
                return Err(Error::NonFinite("source"));
            }
        }

        let dt = tree.dt();
        let sq = tree.sqrt_dt();
        let sub_dt = self.backward.substep_dt();
        let faces = grid.face_nodes().len();
        let b3 = &self.backward.coeffs().b3;
        let mut levels = vec![LevelField::deterministic(0, y0)];
        for k in 0..tau {
            let cur = &levels[k];
            let mut next = LevelField::zeros(k + 1, width);
            for node in 0..tree.node_count(k) {
                let b = b3.at(k, node);
                let u = controls.u.level(k).node(node);
                let mut v = cur.node(node).to_vec();
                let mut noise = vec![C64::new(0.0, 0.0); width];
                if let Some(f) = f {
                    for (vi, fi) in v.iter_mut().zip(f.level(k).node(node)) {
                        *vi += dt * fi;
                    }
                }
                for block in u.chunks(faces) {
                    let bu = grid.normal_trace_adjoint(block)?;
                    for (vi, bi) in v.iter_mut().zip(bu.iter()) {
                        *vi += sub_dt * bi;
                    }
                    let q = self.backward.step_solve_adjoint(k, node, &v)?;
                    for ((c, qi), bi) in noise.iter_mut().zip(&q).zip(b) {
                        *c -= I * sub_dt * bi.conj() * qi;
                    }
                    v = self.backward.explicit_apply_adjoint(k, node, &q)?;
                }
                let g = controls.g.level(k).node(node);
                let (up, down) = FiltrationTree::children(node);
                for i in 0..width {
                    let kick = I * (noise[i] + dt * g[i]) / sq;
                    next.node_mut(up)[i] = v[i] - kick;
                    next.node_mut(down)[i] = v[i] + kick;
                }
            }
            levels.push(next);
        }
        let y = AdaptedField::new(0, levels)?;
        if !y.is_finite() {
            return Err(Error::NonFinite("forward solution"));
        }
        Ok(ForwardState { y })
    }

    /// Evaluates both sides of the duality identity against `z_tau`, a field
    /// on the final level of `state`.
    pub fn duality_gap(
        &self,
        state: &ForwardState,
        y0: &[C64],
        controls: &ControlPair,
        f: Option<&AdaptedField>,
        z_tau: &LevelField,
    ) -> Result<DualityCheck> {
        let grid = self.grid();
        let tau = state.final_level();
        if z_tau.level() != tau {
            return Err(Error::Domain(format!(
                "final datum on level {}, state ends at {tau}",
                z_tau.level()
            )));
        }
        let sol = self.backward.solve(z_tau)?;
        let dt = self.tree().dt();
        let terminal = state.terminal().expected_inner(grid, z_tau);
        let initial = grid.inner(y0, sol.z.level(0).node(0));
        let mut magnitude = terminal.norm() + initial.norm();
        let mut rhs = C64::new(0.0, 0.0);
        for k in 0..tau {
            let mut terms = vec![
                self.backward.time_boundary_inner(
                    controls.u.level(k),
                    sol.flux.level(k),
                    Some(&self.gamma0),
                ),
                dt * controls.g.level(k).expected_inner(grid, sol.big_z.level(k)),
            ];
            if let Some(f) = f {
                terms.push(dt * f.level(k).expected_inner(grid, sol.z.level(k)));
            }
            for t in terms {
                rhs += t;
                magnitude += t.norm();
            }
        }
        let lhs = terminal - initial;
        let gap = if magnitude == 0.0 {
            0.0
        } else {
            (lhs - rhs).norm() / magnitude
        };
        Ok(DualityCheck { lhs, rhs, gap })
    }

    /// Empirical constants `Ĉ` with `max_k |y(t_k)| ≤ exp(Ĉ r)·data` for
    /// `r = r1` and `r = r2`.
    pub fn well_posedness(
        &self,
        state: &ForwardState,
        y0: &[C64],
        controls: &ControlPair,
        f: Option<&AdaptedField>,
    ) -> Result<WellPosedness> {
        let grid = self.grid();
        let dt = self.tree().dt();
        let tau = state.final_level();
        let mut state_norm = 0.0f64;
        for l in state.y.levels() {
            state_norm = state_norm.max(l.expected_norm_sqr(grid, NormKind::Hm1)?.sqrt());
        }
        let mut u2 = 0.0;
        let mut g2 = 0.0;
        let mut f2 = 0.0;
        for k in 0..tau {
            let u = controls.u.level(k);
            u2 += self.backward.time_boundary_inner(u, u, Some(&self.gamma0)).re;
            g2 += dt * controls.g.level(k).expected_norm_sqr(grid, NormKind::Hm1)?;
            if let Some(f) = f {
                f2 += dt * f.level(k).expected_norm_sqr(grid, NormKind::L2)?;
            }
        }
        let data_norm = grid.norm(y0, NormKind::Hm1)? + f2.sqrt() + u2.max(0.0).sqrt() + g2.sqrt();
        let (r1, r2) = (self.r1(), self.r2());
        let c_hat = |r: f64| {
            if state_norm == 0.0 {
                0.0
            } else if data_norm == 0.0 {
                f64::INFINITY
            } else {
                ((state_norm / data_norm).ln() / r).max(0.0)
            }
        };
        Ok(WellPosedness {
            state_norm,
            data_norm,
            r1,
            r2,
            c_hat_r1: c_hat(r1),
            c_hat_r2: c_hat(r2),
        })
    }

    /// With `a1 = a2 = 0`, `a3 = 1` and only the internal control active,
    /// compares `E y(T)` with the noise-free semigroup image of `y0`.
    pub fn mean_evolution_check(&self, y0: &[C64], g: &AdaptedField) -> Result<MeanEvolution> {
        if !self.coeffs.is_noise_only() {
            return Err(Error::config(
                "coeff",
                "mean evolution check needs a1 = a2 = 0 and a3 = 1",
            ));
        }
        let grid = self.grid();
        let tree = self.tree();
        let controls = ControlPair {
            g: g.clone(),
            ..self.zero_controls()
        };
        let state = self.solve(y0, &controls, None, tree.levels())?;
        let expected = state.terminal().mean();
        let semigroup = semigroup(grid, self.backward.scheme(), tree.dt(), y0, tree.levels())?;
        let diff: Vec<C64> = expected.iter().zip(semigroup.iter()).map(|(a, b)| a - b).collect();
        let discrepancy = grid.norm(&diff, NormKind::Hm1)?;
        Ok(MeanEvolution {
            expected,
            semigroup,
            discrepancy,
        })
    }
}

/// Noise-free Schrödinger stepper over `levels` tree levels: each level is
/// `S` substeps `y ↦ (I + iθδ(-Δ_h))⁻¹ (I - i(1-θ)δ(-Δ_h)) y`.
pub fn semigroup(
    grid: &Grid,
    scheme: TimeScheme,
    dt: f64,
    y: &[C64],
    levels: usize,
) -> Result<GridFunction> {
    if y.len() != grid.len() {
        return Err(Error::shape("semigroup", grid.len(), y.len()));
    }
    scheme.validate()?;
    let n = grid.len();
    let lap = grid.neg_laplacian_matrix();
    let d = dt / scheme.substeps as f64;
    let shifted = |w: f64| {
        nalgebra::DMatrix::<C64>::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            C64::new(id, w * d * lap[(i, j)])
        })
    };
    let lu = shifted(scheme.theta).lu();
    let explicit = shifted(scheme.theta - 1.0);
    let mut v = nalgebra::DVector::from_column_slice(y);
    for _ in 0..levels * scheme.substeps {
        v = lu
            .solve(&(&explicit * v))
            .ok_or_else(|| Error::Numerical("singular semigroup step".into()))?;
    }
    Ok(GridFunction::from_vec(v.as_slice().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_level, normal_vec, stream};
    use std::f64::consts::PI;

    fn interval(m: usize, k: usize) -> (Grid, FiltrationTree, Gamma0) {
        let g = Grid::new(&[(0.0, 1.0)], &[m]).unwrap();
        let t = FiltrationTree::new(1.0, k).unwrap();
        let g0 = g.gamma0(&[-1.0]).unwrap();
        (g, t, g0)
    }

    fn random_controls(s: &ForwardSolver, seed: u64) -> ControlPair {
        let mut rng = stream(seed, 9);
        let mut c = s.zero_controls();
        for k in 0..s.tree().levels() {
            *c.g.level_mut(k) = gaussian_level(&mut rng, k, s.grid().len());
            let mut u = gaussian_level(&mut rng, k, s.backward().flux_width());
            for n in 0..u.node_count() {
                s.gamma0().restrict(u.node_mut(n));
            }
            *c.u.level_mut(k) = u;
        }
        c
    }

    #[test]
    fn zero_data_give_zero_state() {
        let (g, t, g0) = interval(5, 3);
        let s = ForwardSolver::new(&g, &t, ForwardCoefficients::zero(&g), g0, TimeScheme::IMPLICIT_EULER).unwrap();
        let y = s
            .solve(&vec![C64::new(0.0, 0.0); 5], &s.zero_controls(), None, 3)
            .unwrap();
        assert!(y.y.is_zero());
    }

    #[test]
    fn eigenfunction_follows_adjoint_recursion() {
        let (g, t, g0) = interval(15, 4);
        let h = g.spacing(0);
        let mu = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let e = GridFunction::from_real_fn(&g, |p| (PI * p[0]).sin());
        let s = ForwardSolver::new(&g, &t, ForwardCoefficients::zero(&g), g0, TimeScheme::IMPLICIT_EULER).unwrap();
        let y = s.solve(&e, &s.zero_controls(), None, 4).unwrap();
        let factor = C64::new(1.0, t.dt() * mu).inv();
        for k in 0..4 {
            let expect = factor.powu(k as u32 + 1);
            for n in 0..t.node_count(k + 1) {
                for (a, b) in y.y.level(k + 1).node(n).iter().zip(e.iter()) {
                    assert!((a - b * expect).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn duality_identity_on_random_instance() {
        let (g, t, g0) = interval(6, 3);
        let mut rng = stream(11, 0);
        let coeffs = ForwardCoefficients::random(&mut rng, &g, &t, 1.0);
        let s = ForwardSolver::new(&g, &t, coeffs, g0.clone(), TimeScheme::IMPLICIT_EULER).unwrap();
        let y0 = normal_vec(&mut rng, 6);
        let c = random_controls(&s, 5);
        let f = AdaptedField::new(0, (0..3).map(|k| gaussian_level(&mut rng, k, 6)).collect()).unwrap();
        for tau in 1..=3 {
            let state = s.solve(&y0, &c, Some(&f), tau).unwrap();
            let z = gaussian_level(&mut rng, tau, 6);
            let d = s.duality_gap(&state, &y0, &c, Some(&f), &z).unwrap();
            assert!(d.gap < 1e-13, "tau {tau}: gap {}", d.gap);
        }
    }

    #[test]
    fn mean_is_transported_by_semigroup() {
        let (g, t, g0) = interval(7, 4);
        let s = ForwardSolver::new(&g, &t, ForwardCoefficients::noise_only(&g), g0, TimeScheme::IMPLICIT_EULER).unwrap();
        let mut rng = stream(2, 0);
        let y0 = normal_vec(&mut rng, 7);
        let gctl = AdaptedField::new(0, (0..4).map(|k| gaussian_level(&mut rng, k, 7)).collect()).unwrap();
        let m = s.mean_evolution_check(&y0, &gctl).unwrap();
        assert!(m.discrepancy < 1e-12, "{}", m.discrepancy);
    }

    #[test]
    fn mean_check_rejects_other_coefficients() {
        let (g, t, g0) = interval(4, 2);
        let s = ForwardSolver::new(&g, &t, ForwardCoefficients::zero(&g), g0, TimeScheme::IMPLICIT_EULER).unwrap();
        let gctl = AdaptedField::zeros(0, 1, 4);
        assert!(matches!(
            s.mean_evolution_check(&[C64::new(0.0, 0.0); 4], &gctl),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn boundary_control_off_gamma0_is_rejected() {
        let (g, t, g0) = interval(4, 2);
        let s = ForwardSolver::new(&g, &t, ForwardCoefficients::zero(&g), g0, TimeScheme::IMPLICIT_EULER).unwrap();
        let mut c = s.zero_controls();
        // face node 0 is x = 0, outside Γ0
        c.u.level_mut(0).node_mut(0)[0] = C64::new(1.0, 0.0);
        assert!(s.solve(&[C64::new(0.0, 0.0); 4], &c, None, 2).is_err());
    }

    #[test]
    fn well_posedness_constants_are_finite() {
        let (g, t, g0) = interval(8, 3);
        let mut rng = stream(4, 0);
        let coeffs = ForwardCoefficients::random(&mut rng, &g, &t, 0.5);
        let s = ForwardSolver::new(&g, &t, coeffs, g0.clone(), TimeScheme::IMPLICIT_EULER).unwrap();
        let y0 = normal_vec(&mut rng, 8);
        let c = random_controls(&s, 1);
        let y = s.solve(&y0, &c, None, 3).unwrap();
        let w = s.well_posedness(&y, &y0, &c, None).unwrap();
        assert!(w.c_hat_r1.is_finite() && w.c_hat_r2.is_finite());
        assert!(w.r1 >= 1.0 && w.r2 >= 1.0);
    }
}
