//! Brute-force oracles: every map is assembled as one dense linear system
//! from the defining equations, independent of the recursive solvers.

#![allow(dead_code)]

use hum_core::forward::{ControlPair, ForwardCoefficients};
use hum_core::{FiltrationTree, Gamma0, Grid, LevelField, TimeScheme, C64};
use nalgebra::DMatrix;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Multi-index neighbour along `axis` by raw index arithmetic.
fn shift(grid: &Grid, idx: usize, axis: usize, step: isize) -> Option<usize> {
    let counts: Vec<usize> = grid.axes().iter().map(|a| a.count).collect();
    let mut multi = [idx % counts[0], if counts.len() > 1 { idx / counts[0] } else { 0 }];
    let moved = multi[axis] as isize + step;
    if moved < 0 || moved >= counts[axis] as isize {
        return None;
    }
    multi[axis] = moved as usize;
    Some(multi[0] + counts[0] * multi[1])
}

/// Five-point Dirichlet Laplacian.
pub fn laplacian(grid: &Grid) -> DMatrix<C64> {
    let n = grid.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for axis in 0..grid.dim() {
            let h2 = grid.spacing(axis).powi(2);
            m[(i, i)] -= c(2.0 / h2);
            for step in [-1, 1] {
                if let Some(j) = shift(grid, i, axis, step) {
                    m[(i, j)] += c(1.0 / h2);
                }
            }
        }
    }
    m
}

/// Centered first derivative with zero ghosts.
pub fn derivative(grid: &Grid, axis: usize) -> DMatrix<C64> {
    let n = grid.len();
    let h = grid.spacing(axis);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        if let Some(j) = shift(grid, i, axis, 1) {
            m[(i, j)] += c(0.5 / h);
        }
        if let Some(j) = shift(grid, i, axis, -1) {
            m[(i, j)] -= c(0.5 / h);
        }
    }
    m
}

fn find_node(grid: &Grid, p: [f64; 2]) -> usize {
    (0..grid.len())
        .find(|&i| {
            let q = grid.node(i);
            (0..grid.dim()).all(|a| (q[a] - p[a]).abs() < 1e-9)
        })
        .expect("node at point")
}

/// One-sided second-order normal derivative rows, located geometrically
/// from each face node along the inward normal.
pub fn normal_trace(grid: &Grid) -> DMatrix<C64> {
    let faces = grid.face_nodes();
    let mut m = DMatrix::zeros(faces.len(), grid.len());
    for (f, face) in faces.iter().enumerate() {
        let axis = (0..grid.dim()).find(|&a| face.normal[a] != 0.0).unwrap();
        let h = grid.spacing(axis);
        let at = |k: f64| {
            let mut p = face.coord;
            p[axis] -= k * h * face.normal[axis];
            find_node(grid, p)
        };
        m[(f, at(1.0))] += c(-4.0 / (2.0 * h));
        m[(f, at(2.0))] += c(1.0 / (2.0 * h));
    }
    m
}

fn diag(v: &[C64]) -> DMatrix<C64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}

/// Dual coefficients written out from the forward ones:
/// `c1 = -ca`, `b2 = i div(ca) + a2`, `b3 = -a3`.
pub struct DualAt<'a> {
    grid: &'a Grid,
    fwd: &'a ForwardCoefficients,
}

impl<'a> DualAt<'a> {
    pub fn new(grid: &'a Grid, fwd: &'a ForwardCoefficients) -> Self {
        DualAt { grid, fwd }
    }

    /// `L = Δ - b1·∇ - b2` with `b1 = -i c1`.
    fn operator(&self, k: usize, n: usize) -> DMatrix<C64> {
        let mut l = laplacian(self.grid);
        let mut b2: Vec<C64> = self.fwd.a2.at(k, n).to_vec();
        for (axis, ca) in self.fwd.ca.iter().enumerate() {
            let d = derivative(self.grid, axis);
            let caz = nalgebra::DVector::from_column_slice(ca.at(k, n));
            let div = &d * caz;
            for (b, dv) in b2.iter_mut().zip(div.iter()) {
                *b += I * dv;
            }
            let c1: Vec<C64> = ca.at(k, n).iter().map(|v| -v).collect();
            let b1 = diag(&c1) * (-I);
            l -= b1 * d;
        }
        l - diag(&b2)
    }

    fn b3(&self, k: usize, n: usize) -> Vec<C64> {
        self.fwd.a3.at(k, n).iter().map(|v| -v).collect()
    }
}

/// Dense solution of the whole backward recursion as one linear system.
pub struct OracleBackward {
    pub width: usize,
    pub substeps: usize,
    pub tau: usize,
    pub dt: f64,
    pub trace: DMatrix<C64>,
    /// Unknowns as a linear function of the flattened final datum.
    pub map: DMatrix<C64>,
}

/// `w[k][node][s]` is the substep state at `t_k + sδ` (`s = 0` is `z_k`);
/// `big_z[k][node]`; `z[τ]` holds the datum.
pub struct OracleSolution {
    pub z: Vec<Vec<Vec<C64>>>,
    pub w: Vec<Vec<Vec<Vec<C64>>>>,
    pub big_z: Vec<Vec<Vec<C64>>>,
    pub flux: Vec<Vec<Vec<C64>>>,
}

fn node_offset(k: usize, n: usize) -> usize {
    (1 << k) - 1 + n
}

impl OracleBackward {
    pub fn new(
        grid: &Grid,
        tree: &FiltrationTree,
        fwd: &ForwardCoefficients,
        scheme: TimeScheme,
        tau: usize,
    ) -> Self {
        let dual = DualAt::new(grid, fwd);
        let nw = grid.len();
        let ss = scheme.substeps;
        let blk = (ss + 1) * nw;
        let unknowns = ((1 << tau) - 1) * blk;
        let data = (1usize << tau) * nw;
        let mut a = DMatrix::<C64>::zeros(unknowns, unknowns);
        let mut b = DMatrix::<C64>::zeros(unknowns, data);
        let dt = tree.dt();
        let delta = dt / ss as f64;
        let sq = dt.sqrt();
        let theta = scheme.theta;
        let eye = DMatrix::<C64>::identity(nw, nw);

        // Column of a child's z-value: unknown (true, col) or datum (false, col).
        let child = |k: usize, n: usize| -> (bool, usize) {
            if k < tau {
                (true, node_offset(k, n) * blk)
            } else {
                (false, n * nw)
            }
        };
        let mut put = |row: usize, target: (bool, usize), block: &DMatrix<C64>| {
            let (unknown, col) = target;
            for i in 0..nw {
                for j in 0..nw {
                    if unknown {
                        a[(row + i, col + j)] += block[(i, j)];
                    } else {
                        b[(row + i, col + j)] -= block[(i, j)];
                    }
                }
            }
        };

        for k in 0..tau {
            for n in 0..(1 << k) {
                let base = node_offset(k, n) * blk;
                let zrow = base + ss * nw;
                let up = child(k + 1, 2 * n);
                let down = child(k + 1, 2 * n + 1);
                // Z = i (z⁺ - z⁻) / (2√Δt)
                put(zrow, (true, zrow), &eye);
                put(zrow, up, &(&eye * (-I / (2.0 * sq))));
                put(zrow, down, &(&eye * (I / (2.0 * sq))));

                let l = dual.operator(k, n);
                let b3 = diag(&dual.b3(k, n));
                for s in 0..ss {
                    let row = base + s * nw;
                    // i(w_{s+1} - w_s) + δ(θ L w_s + (1-θ) L w_{s+1}) - δ b3 Z = 0
                    let cur = &eye * (-I) + &l * c(delta * theta);
                    let next = &eye * I + &l * c(delta * (1.0 - theta));
                    put(row, (true, base + s * nw), &cur);
                    if s + 1 < ss {
                        put(row, (true, base + (s + 1) * nw), &next);
                    } else {
                        let half = &next * c(0.5);
                        put(row, up, &half);
                        put(row, down, &half);
                    }
                    put(row, (true, zrow), &(&b3 * c(-delta)));
                }
            }
        }
        let map = a.lu().solve(&b).expect("nonsingular oracle system");
        OracleBackward {
            width: nw,
            substeps: ss,
            tau,
            dt,
            trace: normal_trace(grid),
            map,
        }
    }

    pub fn data_len(&self) -> usize {
        self.map.ncols()
    }

    pub fn solve_flat(&self, datum: &[C64]) -> OracleSolution {
        let x = &self.map * nalgebra::DVector::from_column_slice(datum);
        let (nw, ss) = (self.width, self.substeps);
        let blk = (ss + 1) * nw;
        let mut sol = OracleSolution { z: vec![], w: vec![], big_z: vec![], flux: vec![] };
        for k in 0..self.tau {
            let mut zs = vec![];
            let mut ws = vec![];
            let mut bz = vec![];
            let mut fl = vec![];
            for n in 0..(1 << k) {
                let base = node_offset(k, n) * blk;
                let sub: Vec<Vec<C64>> =
                    (0..ss).map(|s| x.rows(base + s * nw, nw).iter().copied().collect()).collect();
                let mut f = vec![];
                for w in &sub {
                    let t = &self.trace * nalgebra::DVector::from_column_slice(w);
                    f.extend(t.iter().copied());
                }
                zs.push(sub[0].clone());
                ws.push(sub);
                bz.push(x.rows(base + ss * nw, nw).iter().copied().collect());
                fl.push(f);
            }
            sol.z.push(zs);
            sol.w.push(ws);
            sol.big_z.push(bz);
            sol.flux.push(fl);
        }
        sol.z.push(datum.chunks(nw).map(|c| c.to_vec()).collect());
        sol
    }

    pub fn solve(&self, datum: &LevelField) -> OracleSolution {
        self.solve_flat(datum.data())
    }

    pub fn solve_basis(&self, j: usize) -> OracleSolution {
        let mut e = vec![c(0.0); self.data_len()];
        e[j] = c(1.0);
        self.solve_flat(&e)
    }
}

fn inner(grid: &Grid, a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C64>() * grid.cell_volume()
}

/// Right side of the duality identity for one dual solution: the pairing of
/// the data `(y0, u, g, f)` against `(z, Z, ∂z/∂ν)`.
pub fn data_functional(
    grid: &Grid,
    gamma0: &Gamma0,
    ob: &OracleBackward,
    sol: &OracleSolution,
    y0: &[C64],
    controls: &ControlPair,
    f: Option<&hum_core::AdaptedField>,
) -> C64 {
    let faces = grid.face_nodes();
    let delta = ob.dt / ob.substeps as f64;
    let mut total = inner(grid, y0, &sol.z[0][0]);
    for k in 0..ob.tau {
        let p = 1.0 / (1u64 << k) as f64;
        for n in 0..(1 << k) {
            let u = controls.u.level(k).node(n);
            for s in 0..ob.substeps {
                for (fi, face) in faces.iter().enumerate() {
                    if gamma0.contains(fi) {
                        let idx = s * faces.len() + fi;
                        total += p * delta * face.weight * u[idx] * sol.flux[k][n][idx].conj();
                    }
                }
            }
            total += p * ob.dt * inner(grid, controls.g.level(k).node(n), &sol.big_z[k][n]);
            if let Some(f) = f {
                total += p * ob.dt * inner(grid, f.level(k).node(n), &sol.z[k][n]);
            }
        }
    }
    total
}

/// Transposition solution `y(τ)` entry by entry: `E<y(τ), e_j> = rhs(e_j)`.
pub fn forward_terminal(
    grid: &Grid,
    gamma0: &Gamma0,
    ob: &OracleBackward,
    y0: &[C64],
    controls: &ControlPair,
    f: Option<&hum_core::AdaptedField>,
) -> Vec<C64> {
    let p = 1.0 / (1u64 << ob.tau) as f64;
    (0..ob.data_len())
        .map(|j| {
            let sol = ob.solve_basis(j);
            data_functional(grid, gamma0, ob, &sol, y0, controls, f) / (p * grid.cell_volume())
        })
        .collect()
}

/// HUM controls from an oracle solution: `u = 1_{Γ0} ∂z/∂ν`, `g = -Δ Z`.
pub fn hum_controls(grid: &Grid, gamma0: &Gamma0, ob: &OracleBackward, sol: &OracleSolution) -> ControlPair {
    let faces = grid.face_nodes().len();
    let mut out = ControlPair::zeros(ob.substeps * faces, grid.len(), ob.tau);
    let neg_lap = laplacian(grid) * c(-1.0);
    for k in 0..ob.tau {
        for n in 0..(1 << k) {
            let u = out.u.level_mut(k).node_mut(n);
            for (i, v) in sol.flux[k][n].iter().enumerate() {
                if gamma0.contains(i % faces) {
                    u[i] = *v;
                }
            }
            let g = &neg_lap * nalgebra::DVector::from_column_slice(&sol.big_z[k][n]);
            out.g.level_mut(k).node_mut(n).copy_from_slice(g.as_slice());
        }
    }
    out
}

/// Dense Gramian: column `j` is the terminal state driven by the HUM
/// controls of the `j`-th unit datum.
pub fn gramian(grid: &Grid, gamma0: &Gamma0, ob: &OracleBackward) -> DMatrix<C64> {
    let n = ob.data_len();
    let zero = vec![c(0.0); grid.len()];
    let sols: Vec<OracleSolution> = (0..n).map(|j| ob.solve_basis(j)).collect();
    let p = 1.0 / (1u64 << ob.tau) as f64;
    let mut m = DMatrix::zeros(n, n);
    for (j, sj) in sols.iter().enumerate() {
        let controls = hum_controls(grid, gamma0, ob, sj);
        for (i, si) in sols.iter().enumerate() {
            m[(i, j)] = data_functional(grid, gamma0, ob, si, &zero, &controls, None) / (p * grid.cell_volume());
        }
    }
    m
}

pub fn max_abs(a: impl IntoIterator<Item = C64>) -> f64 {
    a.into_iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `max|a - b| / max(max|b|, tiny)`.
pub fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let d = max_abs(a.iter().zip(b).map(|(x, y)| x - y));
    d / max_abs(b.iter().copied()).max(1e-300)
}

pub fn flatten(levels: &[Vec<Vec<C64>>]) -> Vec<C64> {
    levels.iter().flatten().flatten().copied().collect()
}

pub fn adapted_flat(field: &hum_core::AdaptedField, levels: std::ops::Range<usize>) -> Vec<C64> {
    levels.flat_map(|k| field.level(k).data().to_vec()).collect()
}

/// A small random instance for brute-force comparisons.
pub struct Case {
    pub counts: Vec<usize>,
    pub levels: usize,
    pub scheme: TimeScheme,
    pub seed: u64,
}

/// Largest relative deviations of the recursive solvers from the oracles.
#[derive(Debug, Clone, Copy)]
pub struct BruteForce {
    pub backward: f64,
    pub forward: f64,
    pub gramian: f64,
}

pub fn brute_force(case: &Case) -> BruteForce {
    use hum_core::control::{Gramian, Observation};
    use hum_core::forward::ForwardSolver;
    use hum_core::random::{gaussian_level, normal_vec, stream};

    let extents: Vec<(f64, f64)> = case.counts.iter().enumerate().map(|(a, _)| (0.0, 1.0 + a as f64 * 0.5)).collect();
    let grid = Grid::new(&extents, &case.counts).unwrap();
    let tree = FiltrationTree::new(1.0, case.levels).unwrap();
    let mut rng = stream(case.seed, 0);
    let coeffs = ForwardCoefficients::random(&mut rng, &grid, &tree, 1.0);
    let x0: Vec<f64> = (0..grid.dim()).map(|a| -0.3 - 0.2 * a as f64).collect();
    let gamma0 = grid.gamma0(&x0).unwrap();
    let fwd = ForwardSolver::new(&grid, &tree, coeffs.clone(), gamma0.clone(), case.scheme).unwrap();
    let ob = OracleBackward::new(&grid, &tree, &coeffs, case.scheme, case.levels);
    let k = case.levels;

    let datum = gaussian_level(&mut rng, k, grid.len());
    let sol = fwd.backward().solve(&datum).unwrap();
    let or = ob.solve(&datum);
    let backward = [
        rel_diff(&adapted_flat(&sol.z, 0..k + 1), &flatten(&or.z)),
        rel_diff(&adapted_flat(&sol.big_z, 0..k), &flatten(&or.big_z)),
        rel_diff(&adapted_flat(&sol.flux, 0..k), &flatten(&or.flux)),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let y0 = normal_vec(&mut rng, grid.len());
    let mut controls = fwd.zero_controls();
    let faces = grid.face_nodes().len();
    let mut f = hum_core::AdaptedField::zeros(0, k - 1, grid.len());
    for lvl in 0..k {
        let u = controls.u.level_mut(lvl);
        for (i, v) in u.data_mut().iter_mut().enumerate() {
            if gamma0.contains(i % faces) {
                *v = hum_core::random::complex_normal(&mut rng);
            }
        }
        *controls.g.level_mut(lvl) = gaussian_level(&mut rng, lvl, grid.len());
        *f.level_mut(lvl) = gaussian_level(&mut rng, lvl, grid.len());
    }
    let state = fwd.solve(&y0, &controls, Some(&f), k).unwrap();
    let expect = forward_terminal(&grid, &gamma0, &ob, &y0, &controls, Some(&f));
    let forward = rel_diff(state.terminal().data(), &expect);

    let gr = Gramian::new(fwd, Observation::BOTH).unwrap();
    let dense = gr.dense().unwrap();
    let oracle = gramian(&grid, &gamma0, &ob);
    let gramian = rel_diff(dense.as_slice(), oracle.as_slice());
    BruteForce { backward, forward, gramian }
}

/// Every shape with `m ≤ 4` per axis (1D) or `m ≤ 2` per axis (2D),
/// `K ≤ 3`, under both time schemes.
pub fn brute_force_cases() -> Vec<Case> {
    let mut out = vec![];
    let mut seed = 0;
    for scheme in [TimeScheme::IMPLICIT_EULER, TimeScheme::crank_nicolson(2)] {
        for levels in 1..=3 {
            for m in 2..=4 {
                seed += 1;
                out.push(Case { counts: vec![m], levels, scheme, seed });
            }
            seed += 1;
            out.push(Case { counts: vec![2, 2], levels, scheme, seed });
        }
    }
    out
}

/// Least-squares slope of `log err` against `log h`.
pub fn loglog_slope(h: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Error of the one-sided normal derivative of `sin(πx)` at `x = 0`
/// (exact value `-π`) on grids with `2^(j+3) - 1` interior nodes.
pub fn normal_trace_errors(levels: usize) -> (Vec<f64>, Vec<f64>) {
    let mut hs = vec![];
    let mut errs = vec![];
    for j in 0..levels {
        let m = (1 << (j + 3)) - 1;
        let g = Grid::new(&[(0.0, 1.0)], &[m]).unwrap();
        let u = hum_core::GridFunction::from_real_fn(&g, |p| (std::f64::consts::PI * p[0]).sin());
        let tr = g.normal_trace(&u).unwrap();
        hs.push(g.spacing(0));
        errs.push((tr[0] - c(-std::f64::consts::PI)).norm());
    }
    (hs, errs)
}

/// Error of the centered difference of `ℓ` in time against the analytic
/// `ℓ_t`, for steps `h0 / 2^j`.
pub fn ell_t_errors(p: &hum_core::carleman::WeightParams, t: f64, x: &[f64], h0: f64, levels: usize) -> (Vec<f64>, Vec<f64>) {
    let exact = p.ell_t(t, x).unwrap();
    let mut hs = vec![];
    let mut errs = vec![];
    for j in 0..levels {
        let h = h0 / (1 << j) as f64;
        let fd = (p.weights(t + h, x).unwrap().ell - p.weights(t - h, x).unwrap().ell) / (2.0 * h);
        hs.push(h);
        errs.push((fd - exact).abs());
    }
    (hs, errs)
}
