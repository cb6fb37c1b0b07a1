//! HUM control synthesis: the Gramian `Λ: z_T ↦ y(T)` built from a backward
//! solve followed by a forward solve driven by the observed traces, conjugate
//! gradients on `Λ z = y1 - y_free(T)`, observability statistics and the
//! internal-control-only obstruction.
//!
//! `Λ` maps dual data (`H¹₀` valued) to states (`H⁻¹` valued). CG runs in the
//! `L²(Ω; H¹₀)` inner product on `(-Δ_h)⁻¹ Λ`, which is self-adjoint and
//! positive semidefinite there; the CG residual norm is then the
//! `L²(Ω; H⁻¹)` norm of the state residual.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::backward::BackwardSolution;
use crate::error::{Error, Result};
use crate::forward::{ControlPair, ForwardSolver};
use crate::grid::{NormKind, C64};
use crate::random;
use crate::tree::LevelField;

/// Which observations drive the forward solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Observation {
    pub boundary: bool,
    pub internal: bool,
}

impl Observation {
    pub const BOTH: Observation = Observation {
        boundary: true,
        internal: true,
    };
    pub const INTERNAL_ONLY: Observation = Observation {
        boundary: false,
        internal: true,
    };
}

pub struct Gramian {
    forward: ForwardSolver,
    observation: Observation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|y(T) - y1|_{L²(Ω;H⁻¹)}` of the current iterate.
    pub residual: f64,
    /// `residual / |y1|`, or over `|y1 - y_free(T)|` when `y1 = 0`.
    pub relative_residual: f64,
    /// `½⟪Λz, z⟫ - Re⟪rhs, z⟫`, nonincreasing along CG.
    pub energy: f64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceLog {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceLog {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgStatus {
    Converged,
    MaxIterations,
    /// `⟪Λp, p⟫` vanished to round-off: the remaining residual lies (up to
    /// round-off) in a direction that is not observed.
    Stalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synthesis {
    /// Dual final datum `z_T*`.
    pub dual_datum: LevelField,
    pub controls: ControlPair,
    /// `y(T)` recomputed from scratch with the extracted controls.
    pub achieved: LevelField,
    /// Relative `H⁻¹` residual of `achieved`.
    pub relative_residual: f64,
    pub status: CgStatus,
    pub log: ConvergenceLog,
}

impl Synthesis {
    pub fn converged(&self) -> bool {
        self.status == CgStatus::Converged
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservabilityStats {
    /// `|z_T|²_{L²(Ω;H¹₀)}` over the observation energy, one per sample.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Estimate of the smallest eigenvalue of `(-Δ_h)⁻¹Λ`.
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Unreachability {
    /// `|E y1 - S_h(T) E y0|_{H⁻¹}`.
    pub lower_bound: f64,
    /// Absolute `H⁻¹` residual of every CG iterate, starting from the
    /// uncontrolled state.
    pub residuals: Vec<f64>,
    pub min_residual: f64,
    /// Every residual stays above `lower_bound - 1e-10`.
    pub bound_holds: bool,
    pub unreachable: bool,
    pub synthesis: Synthesis,
}

/// Options for [`Gramian::synthesize`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

impl Gramian {
    pub fn new(forward: ForwardSolver, observation: Observation) -> Result<Self> {
        if !observation.boundary && !observation.internal {
            return Err(Error::config("control", "at least one control must be active"));
        }
        Ok(Gramian {
            forward,
            observation,
        })
    }

    pub fn forward(&self) -> &ForwardSolver {
        &self.forward
    }

    pub fn observation(&self) -> Observation {
        self.observation
    }

    fn levels(&self) -> usize {
        self.forward.tree().levels()
    }

    /// `u = 1_{Γ0} ∂z/∂ν` and `g = -Δ_h Z` from a backward solution, each
    /// zeroed when its observation is switched off.
    pub fn controls_from(&self, sol: &BackwardSolution) -> Result<ControlPair> {
        let grid = self.forward.grid();
        let mut out = self.forward.zero_controls();
        for k in 0..self.levels() {
            if self.observation.boundary {
                let u = out.u.level_mut(k);
                u.data_mut().copy_from_slice(sol.flux.level(k).data());
                for n in 0..u.node_count() {
                    self.forward.gamma0().restrict(u.node_mut(n));
                }
            }
            if self.observation.internal {
                let z = sol.big_z.level(k);
                let g = out.g.level_mut(k);
                for n in 0..z.node_count() {
                    g.node_mut(n).copy_from_slice(&grid.hm1_riesz(z.node(n))?);
                }
            }
        }
        Ok(out)
    }

    /// `Σ_k Δt E[|∂z/∂ν|²_{L²(Γ0)} + |Z|²_{H¹₀}]` over the active observations.
    pub fn observation_energy(&self, sol: &BackwardSolution) -> Result<f64> {
        let grid = self.forward.grid();
        let dt = self.forward.tree().dt();
        let mut e = 0.0;
        for k in 0..sol.final_level() {
            if self.observation.boundary {
                let f = sol.flux.level(k);
                e += self
                    .forward
                    .backward()
                    .time_boundary_inner(f, f, Some(self.forward.gamma0()))
                    .re;
            }
            if self.observation.internal {
                e += dt * sol.big_z.level(k).expected_norm_sqr(grid, NormKind::H10)?;
            }
        }
        Ok(e)
    }

    fn check_datum(&self, z: &LevelField) -> Result<()> {
        if z.level() != self.levels() {
            return Err(Error::Domain(format!(
                "dual datum on level {}, expected {}",
                z.level(),
                self.levels()
            )));
        }
        Ok(())
    }

    /// `Λ z_T`.
    pub fn apply(&self, z: &LevelField) -> Result<LevelField> {
        self.check_datum(z)?;
        let sol = self.forward.backward().solve(z)?;
        let controls = self.controls_from(&sol)?;
        let zero = vec![C64::new(0.0, 0.0); self.forward.grid().len()];
        Ok(self
            .forward
            .solve(&zero, &controls, None, self.levels())?
            .y
            .level(self.levels())
            .clone())
    }

    /// `⟪a, b⟫ = E<a, b>_{L²}` between a state `a` and a dual datum `b`.
    pub fn pairing(&self, a: &LevelField, b: &LevelField) -> C64 {
        a.expected_inner(self.forward.grid(), b)
    }

    /// `(-Δ_h)⁻¹` applied at every node.
    fn riesz_inverse(&self, y: &LevelField) -> Result<LevelField> {
        let grid = self.forward.grid();
        let mut out = LevelField::zeros(y.level(), y.width());
        for n in 0..y.node_count() {
            out.node_mut(n).copy_from_slice(&grid.neg_laplacian_solve(y.node(n))?);
        }
        Ok(out)
    }

    /// `-Δ_h` at every node.
    fn neg_lap(&self, x: &LevelField) -> Result<LevelField> {
        let grid = self.forward.grid();
        let mut out = LevelField::zeros(x.level(), x.width());
        for n in 0..x.node_count() {
            out.node_mut(n).copy_from_slice(&grid.hm1_riesz(x.node(n))?);
        }
        Ok(out)
    }

    fn hm1_norm(&self, y: &LevelField) -> Result<f64> {
        Ok(y.expected_norm_sqr(self.forward.grid(), NormKind::Hm1)?.sqrt())
    }

    /// Uncontrolled terminal state from `y0`.
    pub fn free_state(&self, y0: &[C64]) -> Result<LevelField> {
        let zero = self.forward.zero_controls();
        Ok(self
            .forward
            .solve(y0, &zero, None, self.levels())?
            .terminal()
            .clone())
    }

    /// Conjugate gradients for `Λ z = rhs` in the `H¹₀` inner product.
    /// `on_iterate` sees the state residual `rhs - Λz` after every update.
    fn cg(
        &self,
        rhs: &LevelField,
        scale: f64,
        opts: CgOptions,
        mut on_iterate: impl FnMut(&LevelField) -> Result<()>,
    ) -> Result<(LevelField, CgStatus, ConvergenceLog)> {
        let start = Instant::now();
        let width = rhs.width();
        let level = rhs.level();
        let mut x = LevelField::zeros(level, width);
        let mut lx = LevelField::zeros(level, width);
        let mut res = rhs.clone();
        let mut r = self.riesz_inverse(&res)?;
        let mut rr = self.pairing(&res, &r).re.max(0.0);
        let mut p = r.clone();
        let mut log = ConvergenceLog::default();
        let mut max_rayleigh = 0.0f64;
        let mut restarted = false;

        let record = |it: usize, rr: f64, x: &LevelField, lx: &LevelField, log: &mut ConvergenceLog| {
            let energy = 0.5 * self.pairing(lx, x).re - self.pairing(rhs, x).re;
            let residual = rr.sqrt();
            log.records.push(IterationRecord {
                iteration: it,
                residual,
                relative_residual: residual / scale,
                energy,
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        };
        record(0, rr, &x, &lx, &mut log);
        on_iterate(&res)?;
        if rr.sqrt() <= opts.tol * scale {
            return Ok((x, CgStatus::Converged, log));
        }

        for it in 1..=opts.max_iter {
            let lp = self.apply(&p)?;
            let pp = self.pairing(&self.neg_lap(&p)?, &p).re;
            let pap = self.pairing(&lp, &p).re;
            max_rayleigh = max_rayleigh.max(pap / pp);
            if pap < -1e-10 * max_rayleigh * pp {
                return Err(Error::Numerical(format!(
                    "indefinite Gramian direction at iteration {it}: ⟪Λp,p⟫ = {pap:e}"
                )));
            }
            if pap <= 1e-13 * max_rayleigh * pp || pap <= 0.0 {
                return Ok((x, CgStatus::Stalled, log));
            }
            let alpha = rr / pap;
            x.axpy(C64::new(alpha, 0.0), &p);
            lx.axpy(C64::new(alpha, 0.0), &lp);
            res.axpy(C64::new(-alpha, 0.0), &lp);
            on_iterate(&res)?;
            r = self.riesz_inverse(&res)?;
            let rr_new = self.pairing(&res, &r).re.max(0.0);
            record(it, rr_new, &x, &lx, &mut log);
            if rr_new.sqrt() <= opts.tol * scale {
                // confirm with a freshly computed residual before stopping
                let true_res = rhs.sub(&self.apply(&x)?);
                let true_r = self.riesz_inverse(&true_res)?;
                let true_rr = self.pairing(&true_res, &true_r).re.max(0.0);
                if true_rr.sqrt() <= opts.tol * scale || restarted {
                    return Ok((x, CgStatus::Converged, log));
                }
                restarted = true;
                res = true_res;
                r = true_r;
                rr = true_rr;
                p = r.clone();
                continue;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            let mut np = r.clone();
            np.axpy(C64::new(beta, 0.0), &p);
            p = np;
        }
        Ok((x, CgStatus::MaxIterations, log))
    }

    /// Solves for the HUM controls steering `y0` to `y1`.
    pub fn synthesize(&self, y0: &[C64], y1: &LevelField, opts: CgOptions) -> Result<Synthesis> {
        self.synthesize_with(y0, y1, opts, |_| Ok(()))
    }

    fn synthesize_with(
        &self,
        y0: &[C64],
        y1: &LevelField,
        opts: CgOptions,
        on_iterate: impl FnMut(&LevelField) -> Result<()>,
    ) -> Result<Synthesis> {
        if !(opts.tol > 0.0) {
            return Err(Error::config("control.tol", "tolerance must be positive"));
        }
        self.check_datum(y1)?;
        if !y1.is_finite() {
            return Err(Error::NonFinite("target"));
        }
        let free = self.free_state(y0)?;
        let rhs = y1.sub(&free);
        let y1_norm = self.hm1_norm(y1)?;
        let rhs_norm = self.hm1_norm(&rhs)?;
        let scale = if y1_norm > 0.0 {
            y1_norm
        } else if rhs_norm > 0.0 {
            rhs_norm
        } else {
            1.0
        };
        let (z, status, log) = self.cg(&rhs, scale, opts, on_iterate)?;
        let sol = self.forward.backward().solve(&z)?;
        let controls = self.controls_from(&sol)?;
        let achieved = self
            .forward
            .solve(y0, &controls, None, self.levels())?
            .terminal()
            .clone();
        let relative_residual = self.hm1_norm(&achieved.sub(y1))? / scale;
        let status = match status {
            CgStatus::Converged if relative_residual > opts.tol => CgStatus::MaxIterations,
            s => s,
        };
        Ok(Synthesis {
            dual_datum: z,
            controls,
            achieved,
            relative_residual,
            status,
            log,
        })
    }

    /// Observability ratio `|z_T|²_{L²(Ω;H¹₀)} / observation energy`.
    pub fn observability_ratio(&self, z: &LevelField) -> Result<f64> {
        self.check_datum(z)?;
        let sol = self.forward.backward().solve(z)?;
        let energy = self.observation_energy(&sol)?;
        let norm = z.expected_norm_sqr(self.forward.grid(), NormKind::H10)?;
        Ok(if norm == 0.0 {
            0.0
        } else if energy == 0.0 {
            f64::INFINITY
        } else {
            norm / energy
        })
    }

    /// Ratios over `samples` random unit data and an inverse-iteration
    /// estimate of the smallest eigenvalue of `(-Δ_h)⁻¹Λ`.
    pub fn observability_stats<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        samples: usize,
    ) -> Result<ObservabilityStats> {
        if samples == 0 {
            return Err(Error::config("observability.samples", "need at least one sample"));
        }
        let grid = self.forward.grid();
        let mut ratios = Vec::with_capacity(samples);
        for _ in 0..samples {
            ratios.push(self.observability_ratio(&random::unit_datum(rng, grid, self.levels())?)?);
        }
        let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let start = random::unit_datum(rng, grid, self.levels())?;
        let min_eigenvalue = self.min_eigenvalue(start, 30, 1e-10)?;
        Ok(ObservabilityStats {
            ratios,
            min_ratio,
            max_ratio,
            min_eigenvalue,
        })
    }

    /// Inverse power iteration on `(-Δ_h)⁻¹Λ` with inner CG solves; returns
    /// the final Rayleigh quotient.
    pub fn min_eigenvalue(&self, start: LevelField, iterations: usize, inner_tol: f64) -> Result<f64> {
        self.check_datum(&start)?;
        let grid = self.forward.grid();
        let normalize = |v: &mut LevelField| -> Result<f64> {
            let n = v.expected_norm_sqr(grid, NormKind::H10)?.sqrt();
            if n > 0.0 {
                v.scale(C64::new(1.0 / n, 0.0));
            }
            Ok(n)
        };
        let mut x = start;
        normalize(&mut x)?;
        let mut rayleigh = self.pairing(&self.apply(&x)?, &x).re;
        for _ in 0..iterations {
            let rhs = self.neg_lap(&x)?;
            let scale = self.hm1_norm(&rhs)?;
            let opts = CgOptions {
                tol: inner_tol,
                max_iter: 4 * x.data().len(),
            };
            let (mut next, status, _) = self.cg(&rhs, scale, opts, |_| Ok(()))?;
            if normalize(&mut next)? == 0.0 {
                break;
            }
            let q = self.pairing(&self.apply(&next)?, &next).re;
            x = next;
            let settled = (q - rayleigh).abs() <= 1e-10 * rayleigh.abs();
            rayleigh = q;
            if settled || status == CgStatus::Stalled {
                break;
            }
        }
        Ok(rayleigh)
    }

    /// Dense matrix of `Λ` on the flattened leaf data (column `j` is `Λ e_j`).
    pub fn dense(&self) -> Result<DMatrix<C64>> {
        let width = self.forward.grid().len();
        let n = width << self.levels();
        let mut m = DMatrix::<C64>::zeros(n, n);
        for j in 0..n {
            let mut e = LevelField::zeros(self.levels(), width);
            e.data_mut()[j] = C64::new(1.0, 0.0);
            let col = self.apply(&e)?;
            for (i, v) in col.data().iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    /// Eigenvalues (ascending) of `(-Δ_h)⁻¹Λ` from the dense assembly,
    /// through the Cholesky factor of the leafwise `-Δ_h`.
    pub fn dense_spectrum(&self) -> Result<Vec<f64>> {
        let lam = self.dense()?;
        let grid = self.forward.grid();
        let width = grid.len();
        let chol = grid
            .neg_laplacian_matrix()
            .cholesky()
            .ok_or_else(|| Error::Numerical("-Δ_h not positive definite".into()))?;
        let linv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?
            .map(|v| C64::new(v, 0.0));
        let leaves = lam.nrows() / width;
        let mut block = DMatrix::<C64>::zeros(lam.nrows(), lam.ncols());
        for l in 0..leaves {
            block
                .view_mut((l * width, l * width), (width, width))
                .copy_from(&linv);
        }
        let c = &block * lam * block.adjoint();
        let herm = (&c + c.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// Attempts to reach `y1` from `y0` with internal control only on the
    /// noise-only instance and certifies the mean obstruction.
    pub fn unreachability_demo(&self, y0: &[C64], y1: &LevelField, opts: CgOptions) -> Result<Unreachability> {
        if self.observation != Observation::INTERNAL_ONLY {
            return Err(Error::config("control", "unreachability needs internal control only"));
        }
        if !self.forward.coeffs().is_noise_only() {
            return Err(Error::config("coeff", "unreachability needs a1 = a2 = 0 and a3 = 1"));
        }
        let grid = self.forward.grid();
        let tree = self.forward.tree();
        let mean_target = y1.mean();
        let transported =
            crate::forward::semigroup(grid, self.forward.backward().scheme(), tree.dt(), y0, tree.levels())?;
        let shift: Vec<C64> = mean_target
            .iter()
            .zip(transported.iter())
            .map(|(a, b)| a - b)
            .collect();
        let lower_bound = grid.norm(&shift, NormKind::Hm1)?;
        let mut residuals = Vec::new();
        let synthesis = self.synthesize_with(y0, y1, opts, |res| {
            residuals.push(self.hm1_norm(res)?);
            Ok(())
        })?;
        let final_residual = self.hm1_norm(&synthesis.achieved.sub(y1))?;
        residuals.push(final_residual);
        let min_residual = residuals.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Unreachability {
            lower_bound,
            bound_holds: min_residual >= lower_bound - 1e-10,
            unreachable: lower_bound > 1e-10,
            residuals,
            min_residual,
            synthesis,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backward::TimeScheme;
    use crate::forward::ForwardCoefficients;
    use crate::grid::{Grid, GridFunction};
    use crate::random::{gaussian_level, stream};
    use crate::tree::FiltrationTree;
    use std::f64::consts::PI;

    fn gramian(m: usize, k: usize, coeffs: Option<u64>, obs: Observation, scheme: TimeScheme) -> Gramian {
        let g = Grid::new(&[(0.0, 1.0)], &[m]).unwrap();
        let t = FiltrationTree::new(1.0, k).unwrap();
        let c = match coeffs {
            Some(seed) => ForwardCoefficients::random(&mut stream(seed, 0), &g, &t, 0.5),
            None if obs == Observation::INTERNAL_ONLY => ForwardCoefficients::noise_only(&g),
            None => ForwardCoefficients::zero(&g),
        };
        let f = ForwardSolver::new(&g, &t, c, g.gamma0(&[-1.0]).unwrap(), scheme).unwrap();
        Gramian::new(f, obs).unwrap()
    }

    #[test]
    fn energy_identity_and_symmetry() {
        for scheme in [TimeScheme::IMPLICIT_EULER, TimeScheme::crank_nicolson(3)] {
            energy_identity_for(scheme);
        }
    }

    fn energy_identity_for(scheme: TimeScheme) {
        let gr = gramian(5, 3, Some(3), Observation::BOTH, scheme);
        let mut rng = stream(8, 0);
        for _ in 0..5 {
            let a = gaussian_level(&mut rng, 3, 5);
            let b = gaussian_level(&mut rng, 3, 5);
            let la = gr.apply(&a).unwrap();
            let lb = gr.apply(&b).unwrap();
            let ab = gr.pairing(&la, &b);
            let ba = gr.pairing(&lb, &a).conj();
            assert!((ab - ba).norm() <= 1e-12 * ab.norm().max(1.0));
            let sol = gr.forward().backward().solve(&a).unwrap();
            let e = gr.observation_energy(&sol).unwrap();
            let q = gr.pairing(&la, &a);
            assert!((q.re - e).abs() <= 1e-12 * e && q.im.abs() <= 1e-12 * e);
        }
    }

    #[test]
    fn zero_target_needs_no_iterations() {
        let gr = gramian(4, 2, None, Observation::BOTH, TimeScheme::IMPLICIT_EULER);
        let s = gr
            .synthesize(&[C64::new(0.0, 0.0); 4], &LevelField::zeros(2, 4), CgOptions::default())
            .unwrap();
        assert_eq!(s.log.iterations(), 0);
        assert!(s.converged() && s.controls.u.is_zero() && s.controls.g.is_zero());
    }

    #[test]
    fn manufactured_target_is_reached() {
        let gr = gramian(5, 3, Some(1), Observation::BOTH, TimeScheme::crank_nicolson(8));
        let mut rng = stream(5, 0);
        let z = gaussian_level(&mut rng, 3, 5);
        let y1 = gr.apply(&z).unwrap();
        let s = gr
            .synthesize(&[C64::new(0.0, 0.0); 5], &y1, CgOptions { tol: 1e-8, max_iter: 200 })
            .unwrap();
        assert!(s.converged(), "{:?} {}", s.status, s.relative_residual);
        assert!(s.log.iterations() <= 40);
        for w in s.log.records.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12);
        }
    }

    #[test]
    fn eigenfunction_ratio_matches_closed_form() {
        let gr = gramian(9, 3, None, Observation::BOTH, TimeScheme::IMPLICIT_EULER);
        let grid = gr.forward().grid();
        let t = gr.forward().tree();
        let h = grid.spacing(0);
        let mu = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let e = GridFunction::from_real_fn(grid, |p| (PI * p[0]).sin());
        let z = LevelField::deterministic(3, &e);
        let ratio = gr.observability_ratio(&z).unwrap();
        // deterministic dual: Z = 0, z_k = e / (1 - iΔtμ)^{K-k}
        let flux = grid.normal_trace(&e).unwrap();
        let f2 = grid.boundary_norm_sqr(&flux, Some(gr.forward().gamma0()));
        let rho2 = 1.0 / (1.0 + (t.dt() * mu).powi(2));
        let energy: f64 = (0..3).map(|k| t.dt() * f2 * rho2.powi(3 - k)).sum();
        let expect = grid.norm_sqr(&e, NormKind::H10).unwrap() / energy;
        assert!((ratio - expect).abs() <= 1e-12 * expect);
        let mut z2 = z.clone();
        z2.scale(C64::new(2.0, 0.0));
        assert!((gr.observability_ratio(&z2).unwrap() - ratio).abs() <= 1e-12 * ratio);
    }

    #[test]
    fn inverse_iteration_matches_dense_spectrum() {
        let gr = gramian(3, 2, Some(7), Observation::BOTH, TimeScheme::crank_nicolson(4));
        let ev = gr.dense_spectrum().unwrap();
        assert!(ev[0] > 0.0);
        let est = gr
            .min_eigenvalue(gaussian_level(&mut stream(1, 1), 2, 3), 200, 1e-12)
            .unwrap();
        assert!((est - ev[0]).abs() <= 1e-6 * ev[0], "{est} vs {}", ev[0]);
    }

    #[test]
    fn mean_obstruction_bounds_every_iterate() {
        let gr = gramian(5, 3, None, Observation::INTERNAL_ONLY, TimeScheme::IMPLICIT_EULER);
        let y1 = LevelField::deterministic(3, &vec![C64::new(1.0, 0.0); 5]);
        let u = gr
            .unreachability_demo(&[C64::new(0.0, 0.0); 5], &y1, CgOptions::default())
            .unwrap();
        assert!(u.unreachable && u.bound_holds);
        assert!(u.lower_bound > 0.0);
    }

    #[test]
    fn mean_free_target_is_reachable_with_internal_control() {
        let gr = gramian(5, 3, None, Observation::INTERNAL_ONLY, TimeScheme::IMPLICIT_EULER);
        let mut y1 = gaussian_level(&mut stream(3, 3), 3, 5);
        let m = y1.mean();
        for n in 0..y1.node_count() {
            for (v, mv) in y1.node_mut(n).iter_mut().zip(m.iter()) {
                *v -= mv;
            }
        }
        let u = gr
            .unreachability_demo(&[C64::new(0.0, 0.0); 5], &y1, CgOptions::default())
            .unwrap();
        assert!(u.lower_bound < 1e-12);
        assert!(u.synthesis.relative_residual < 1e-6, "{}", u.synthesis.relative_residual);
    }
}
