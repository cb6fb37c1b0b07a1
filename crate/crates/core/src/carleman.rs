//! Carleman weights `ψ, ℓ, φ, θ = e^ℓ`, the coefficients of the weighted
//! identity, and an empirical Carleman constant for computed dual solutions.
//!
//! With `τ(t) = 1/(t²(T−t)²)`, `E = e^{4λψ}` and `M = |ψ|_∞`:
//! `ℓ = sτ(E − e^{5λM})`, `φ = Eτ`. Because `θ` spans hundreds of decades,
//! weighted sums are accumulated as log-sum-exp.

use crate::backward::BackwardSolution;
use crate::error::{Error, Result};
use crate::grid::{Gamma0, Grid, Point};
use crate::tree::FiltrationTree;

fn dist_sqr(x: &[f64], x0: &[f64]) -> f64 {
    x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Smallest and largest `|x − x0|²` over the closed box.
fn dist_range(extents: &[(f64, f64)], x0: &[f64]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (&(a, b), &c) in extents.iter().zip(x0) {
        let near = c.clamp(a, b);
        lo += (near - c) * (near - c);
        hi += ((a - c) * (a - c)).max((b - c) * (b - c));
    }
    (lo, hi)
}

fn outside(extents: &[(f64, f64)], x0: &[f64]) -> bool {
    extents.iter().zip(x0).any(|(&(a, b), &c)| c < a || c > b)
}

/// Smallest shift `σ ≥ 0` with `6 min ψ ≥ 5 max ψ` on the closed box.
pub fn sigma_min(extents: &[(f64, f64)], x0: &[f64]) -> Result<f64> {
    if extents.len() != x0.len() {
        return Err(Error::config(
            "weights.x0",
            format!("expected {} coordinates, got {}", extents.len(), x0.len()),
        ));
    }
    if !outside(extents, x0) {
        return Err(Error::config(
            "weights.x0",
            format!("x0 = {x0:?} must lie outside the closed domain"),
        ));
    }
    let (lo, hi) = dist_range(extents, x0);
    Ok((5.0 * hi - 6.0 * lo).max(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightParams {
    x0: Vec<f64>,
    sigma: f64,
    s: f64,
    lambda: f64,
    horizon: f64,
    psi_max: f64,
}

impl WeightParams {
    /// `sigma = None` selects [`sigma_min`].
    pub fn new(
        extents: &[(f64, f64)],
        x0: &[f64],
        sigma: Option<f64>,
        s: f64,
        lambda: f64,
        horizon: f64,
    ) -> Result<Self> {
        let floor = sigma_min(extents, x0)?;
        let sigma = sigma.unwrap_or(floor);
        if !(sigma >= floor) || !sigma.is_finite() {
            return Err(Error::config(
                "weights.sigma",
                format!("sigma = {sigma} is below the admissible minimum {floor}"),
            ));
        }
        for (key, v) in [("weights.s", s), ("weights.lambda", lambda), ("tree.T", horizon)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(key, format!("must be positive and finite, got {v}")));
            }
        }
        let (_, hi) = dist_range(extents, x0);
        Ok(WeightParams { x0: x0.to_vec(), sigma, s, lambda, horizon, psi_max: hi + sigma })
    }

    pub fn with_scales(&self, s: f64, lambda: f64) -> Result<Self> {
        for (key, v) in [("weights.s", s), ("weights.lambda", lambda)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(key, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(WeightParams { s, lambda, ..self.clone() })
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn psi_max(&self) -> f64 {
        self.psi_max
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn psi(&self, x: &[f64]) -> f64 {
        dist_sqr(x, &self.x0) + self.sigma
    }

    /// `∇ψ = 2(x − x0)`.
    pub fn grad_psi(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.x0).map(|(a, b)| 2.0 * (a - b)).collect()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t > 0.0 && t < self.horizon {
            Ok(())
        } else {
            Err(Error::Domain(format!("t = {t} outside (0, {})", self.horizon)))
        }
    }

    fn log_tau(&self, t: f64) -> f64 {
        -2.0 * (t.ln() + (self.horizon - t).ln())
    }

    /// `log(e^{5λM} − e^{4λψ})`, the magnitude of the bracket in `ℓ`.
    fn log_gap(&self, psi: f64) -> f64 {
        let top = 5.0 * self.lambda * self.psi_max;
        top + (-(4.0 * self.lambda * psi - top).exp()).ln_1p()
    }

    pub fn weights(&self, t: f64, x: &[f64]) -> Result<Weights> {
        self.check_time(t)?;
        let psi = self.psi(x);
        let log_tau = self.log_tau(t);
        let ell = -(self.s.ln() + log_tau + self.log_gap(psi)).exp();
        Ok(Weights { psi, ell, log_phi: 4.0 * self.lambda * psi + log_tau, log_theta: ell })
    }

    /// Analytic `∂ℓ/∂t`.
    pub fn ell_t(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check_time(t)?;
        let big_t = self.horizon;
        let lead = 2.0 * (2.0 * t - big_t) / (t * (big_t - t)).powi(3);
        Ok(-self.s * lead * self.log_gap(self.psi(x)).exp())
    }

    /// Analytic `∂²ℓ/∂t²`.
    pub fn ell_tt(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check_time(t)?;
        let big_t = self.horizon;
        let lead = (20.0 * t * t - 20.0 * t * big_t + 6.0 * big_t * big_t) / (t * (big_t - t)).powi(4);
        Ok(-self.s * lead * self.log_gap(self.psi(x)).exp())
    }

    pub fn coefficients(&self, t: f64, x: &[f64]) -> Result<Coefficients> {
        let w = self.weights(t, x)?;
        let n = self.dim();
        let (s, lam) = (self.s, self.lambda);
        let phi = w.phi();
        let g = self.grad_psi(x);
        let g2: f64 = g.iter().map(|v| v * v).sum();

        let a = 16.0 * s * s * lam * lam * phi * phi * g2;

        let q = 16.0 * lam * lam * g2 + 8.0 * n as f64 * lam;
        let spatial = q * q + 512.0 * lam.powi(3) * g2 + 128.0 * n as f64 * lam * lam;
        let log_common = 2.0 * s.ln() + 4.0 * lam.ln() + 2.0 * g2.ln();
        let loss = (spatial.ln() - log_common - 2.0 * w.log_phi).exp();
        let big_t = self.horizon;
        let poly = 20.0 * t * t - 20.0 * t * big_t + 6.0 * big_t * big_t;
        let log_time = poly.ln() + self.log_gap(w.psi)
            - log_common
            - 12.0 * lam * w.psi
            - self.log_tau(t);
        let d = DTerms {
            leading: 1024.0,
            gradient_gain: 512.0 / (lam * g2),
            spatial_loss: loss,
            time_loss: log_time.exp(),
            log_reference: 3.0 * s.ln() + 4.0 * lam.ln() + 3.0 * w.log_phi + 2.0 * g2.ln(),
        };

        let mut closed = vec![vec![0.0; n]; n];
        let mut from_weight = vec![vec![0.0; n]; n];
        for j in 0..n {
            for k in 0..n {
                let hess = if j == k { 2.0 } else { 0.0 };
                let outer = s * lam * lam * phi * g[j] * g[k];
                closed[j][k] = 32.0 * outer + 16.0 * s * lam * phi * hess;
                from_weight[j][k] = 32.0 * outer + 8.0 * s * lam * phi * hess;
            }
        }
        Ok(Coefficients { weights: w, a, d, c_closed: closed, c_from_weight: from_weight })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights {
    pub psi: f64,
    pub ell: f64,
    pub log_phi: f64,
    /// `log θ = ℓ`.
    pub log_theta: f64,
}

impl Weights {
    pub fn phi(&self) -> f64 {
        self.log_phi.exp()
    }
}

/// Zeroth-order coefficient `D` split into terms relative to the reference
/// `s³λ⁴φ³|∇ψ|⁴`:
/// `D / ref = leading + gradient_gain − spatial_loss − time_loss`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DTerms {
    pub leading: f64,
    pub gradient_gain: f64,
    pub spatial_loss: f64,
    /// `|ℓ_tt| / ref`; `ℓ_tt` is negative everywhere.
    pub time_loss: f64,
    pub log_reference: f64,
}

impl DTerms {
    pub fn ratio(&self) -> f64 {
        self.leading + self.gradient_gain - self.spatial_loss - self.time_loss
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub weights: Weights,
    /// `|∇ℓ|² = 16s²λ²φ²|∇ψ|²`.
    pub a: f64,
    pub d: DTerms,
    /// `32sλ²φψ_jψ_k + 16sλφψ_jk`.
    pub c_closed: Vec<Vec<f64>>,
    /// `2ℓ_jk`, what the weight actually produces once `Ψ = −Δℓ`.
    pub c_from_weight: Vec<Vec<f64>>,
}

/// `Σ_jk c_jk (v_j v̄_k + v_k v̄_j)` for a complex vector `v`.
pub fn quadratic_form(c: &[Vec<f64>], v: &[crate::grid::C64]) -> f64 {
    let mut sum = 0.0;
    for (j, row) in c.iter().enumerate() {
        for (k, &cjk) in row.iter().enumerate() {
            sum += cjk * 2.0 * (v[j] * v[k].conj()).re;
        }
    }
    sum
}

/// Interior times `Δt, 2Δt, …, T − Δt` of a tree with `levels` steps.
pub fn interior_times(horizon: f64, levels: usize) -> Vec<f64> {
    let dt = horizon / levels as f64;
    (1..levels).map(|k| k as f64 * dt).collect()
}

/// Interior and boundary nodes of the closed grid.
pub fn closed_nodes(grid: &Grid) -> Vec<Point> {
    let axes = grid.axes();
    let coords: Vec<Vec<f64>> = axes
        .iter()
        .map(|a| (0..a.count + 2).map(|i| a.lo + i as f64 * a.spacing).collect())
        .collect();
    match coords.as_slice() {
        [xs] => xs.iter().map(|&x| [x, 0.0]).collect(),
        [xs, ys] => ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect(),
        _ => unreachable!("grids are one or two dimensional"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeBounds {
    /// Smallest `Ĉ₁` with `|ℓ_t| ≤ Ĉ₁ s φ^{3/2}`.
    pub c1: f64,
    /// Smallest `Ĉ₂` with `|ℓ_tt| ≤ Ĉ₂ s φ²`.
    pub c2: f64,
}

/// Empirical time-derivative constants over a (time, point) grid.
pub fn weight_time_bounds(params: &WeightParams, times: &[f64], points: &[Point]) -> Result<TimeBounds> {
    let n = params.dim();
    let lam = params.lambda;
    let big_t = params.horizon;
    let mut out = TimeBounds { c1: 0.0, c2: 0.0 };
    for &t in times {
        params.check_time(t)?;
        // |ℓ_t|/(sφ^{3/2}) and |ℓ_tt|/(sφ²) reduce to these after cancelling τ.
        let lead1 = 2.0 * (2.0 * t - big_t).abs();
        let lead2 = 20.0 * t * t - 20.0 * t * big_t + 6.0 * big_t * big_t;
        for p in points {
            let psi = params.psi(&p[..n]);
            let gap = params.log_gap(psi);
            out.c1 = out.c1.max(lead1 * (gap - 6.0 * lam * psi).exp());
            out.c2 = out.c2.max(lead2 * (gap - 8.0 * lam * psi).exp());
        }
    }
    Ok(out)
}

/// A node where the positivity bound is tightest or fails.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Witness {
    pub s: f64,
    pub lambda: f64,
    pub t: f64,
    pub x: Point,
    pub ratio: f64,
}

/// Minimum of `D / (s³λ⁴φ³|∇ψ|⁴)` over a verification grid.
pub fn d_ratio_min(params: &WeightParams, times: &[f64], points: &[Point]) -> Result<Witness> {
    let n = params.dim();
    let mut worst = Witness { s: params.s, lambda: params.lambda, t: f64::NAN, x: [0.0; 2], ratio: f64::INFINITY };
    for &t in times {
        for p in points {
            let r = params.coefficients(t, &p[..n])?.d.ratio();
            if r < worst.ratio || r.is_nan() {
                worst = Witness { t, x: *p, ratio: r, ..worst };
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Threshold {
    /// First `(s, λ)` in (λ, then s) ascending order with ratio ≥ 1 on the
    /// whole grid; `tightest` is where the minimum is attained.
    Found { s: f64, lambda: f64, tightest: Witness },
    /// No pair passed; `witness` is the failing node for the largest pair.
    NotFound { witness: Witness },
}

/// Searches for the smallest `(s, λ)` with `D ≥ s³λ⁴φ³|∇ψ|⁴` on the grid.
pub fn positivity_threshold(
    base: &WeightParams,
    s_values: &[f64],
    lambda_values: &[f64],
    times: &[f64],
    points: &[Point],
) -> Result<Threshold> {
    if s_values.is_empty() || lambda_values.is_empty() {
        return Err(Error::config("carleman.s_values", "empty search range"));
    }
    if times.is_empty() || points.is_empty() {
        return Err(Error::config("carleman.times", "empty verification grid"));
    }
    let mut lambdas = lambda_values.to_vec();
    let mut ss = s_values.to_vec();
    lambdas.sort_by(f64::total_cmp);
    ss.sort_by(f64::total_cmp);
    let mut last = None;
    for &lambda in &lambdas {
        for &s in &ss {
            let p = base.with_scales(s, lambda)?;
            let w = d_ratio_min(&p, times, points)?;
            if w.ratio >= 1.0 {
                return Ok(Threshold::Found { s, lambda, tightest: w });
            }
            last = Some(w);
        }
    }
    Ok(Threshold::NotFound { witness: last.expect("non-empty ranges") })
}

/// Streaming `log Σ exp(x_i)`.
#[derive(Clone, Copy, Debug)]
struct LogSum {
    max: f64,
    acc: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum { max: f64::NEG_INFINITY, acc: 0.0 }
    }

    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.acc = self.acc * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.acc += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.ln()
        }
    }
}

fn log_abs_sqr(v: crate::grid::C64) -> f64 {
    v.norm_sqr().ln()
}

/// Both sides of the Carleman inequality for one dual solution, in logs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarlemanValues {
    pub log_lhs: f64,
    /// Interior part of the right side (`Z` terms).
    pub log_rhs_interior: f64,
    /// Weighted Γ0 flux term.
    pub log_rhs_flux: f64,
    pub log_rhs: f64,
    /// `LHS / RHS`; infinite when the right side vanishes but the left
    /// side does not.
    pub constant: f64,
    /// Both sides vanish.
    pub vacuous: bool,
    /// `RHS = 0 < LHS`.
    pub violation: bool,
}

/// Evaluates the weighted integrals over levels with `t ∈ [Δt, T − Δt]`;
/// endpoint levels carry zero weight.
pub fn carleman_functional(
    grid: &Grid,
    tree: &FiltrationTree,
    sol: &BackwardSolution,
    params: &WeightParams,
    gamma0: &Gamma0,
) -> Result<CarlemanValues> {
    if params.dim() != grid.dim() {
        return Err(Error::shape("carleman_functional", grid.dim(), params.dim()));
    }
    if (params.horizon - tree.horizon()).abs() > 1e-12 * tree.horizon() {
        return Err(Error::config(
            "weights.T",
            format!("weight horizon {} differs from tree horizon {}", params.horizon, tree.horizon()),
        ));
    }
    let n = grid.dim();
    let (s, lam) = (params.s, params.lambda);
    let dt = tree.dt();
    let (t_lo, t_hi) = (dt * (1.0 - 1e-12), params.horizon - dt * (1.0 - 1e-12));
    let nodes: Vec<Point> = (0..grid.len()).map(|i| grid.node(i)).collect();
    let mids = grid.edge_midpoints();
    let faces = grid.face_nodes();
    let cell = grid.cell_volume().ln();

    let mut lhs = LogSum::new();
    let mut interior = LogSum::new();
    let mut flux = LogSum::new();
    let tau = sol.final_level();
    for k in 1..tau {
        let t = tree.time(k);
        if t < t_lo || t > t_hi {
            continue;
        }
        let base = dt.ln() + cell - (k as f64) * std::f64::consts::LN_2;
        let w_nodes: Vec<Weights> = nodes.iter().map(|p| params.weights(t, &p[..n])).collect::<Result<_>>()?;
        let w_mids: Vec<Weights> = mids.iter().map(|p| params.weights(t, &p[..n])).collect::<Result<_>>()?;
        let z = sol.z.level(k);
        let big_z = sol.big_z.level(k);
        for node in 0..z.node_count() {
            let zn = z.node(node);
            let gz = grid.edge_gradient(zn)?;
            for (v, w) in zn.iter().zip(&w_nodes) {
                lhs.add(base + 2.0 * w.log_theta + (3.0 * s.ln() + 4.0 * lam.ln() + 3.0 * w.log_phi) + log_abs_sqr(*v));
            }
            for (v, w) in gz.iter().zip(&w_mids) {
                lhs.add(base + 2.0 * w.log_theta + (s.ln() + lam.ln() + w.log_phi) + log_abs_sqr(*v));
            }
            let zz = big_z.node(node);
            let gzz = grid.edge_gradient(zz)?;
            for (v, w) in zz.iter().zip(&w_nodes) {
                interior.add(base + 2.0 * w.log_theta + (2.0 * s.ln() + 2.0 * lam.ln() + 2.0 * w.log_phi) + log_abs_sqr(*v));
            }
            for (v, w) in gzz.iter().zip(&w_mids) {
                interior.add(base + 2.0 * w.log_theta + log_abs_sqr(*v));
            }
        }
    }
    let sub_dt = sol.meta.scheme.substep_dt(dt);
    for k in 0..tau {
        let fl = sol.flux.level(k);
        let per_node = fl.width() / faces.len();
        for sub in 0..per_node {
            let t = tree.time(k) + sub as f64 * sub_dt;
            if t < t_lo || t > t_hi {
                continue;
            }
            let base = sub_dt.ln() - (k as f64) * std::f64::consts::LN_2;
            for (f, face) in faces.iter().enumerate() {
                if !gamma0.contains(f) {
                    continue;
                }
                let w = params.weights(t, &face.coord[..n])?;
                let scale = base + face.weight.ln() + 2.0 * w.log_theta + s.ln() + lam.ln() + w.log_phi;
                for node in 0..fl.node_count() {
                    flux.add(scale + log_abs_sqr(fl.node(node)[sub * faces.len() + f]));
                }
            }
        }
    }

    let log_lhs = lhs.value();
    let (log_int, log_flux) = (interior.value(), flux.value());
    let mut rhs = LogSum::new();
    rhs.add(log_int);
    rhs.add(log_flux);
    let log_rhs = rhs.value();
    let vacuous = log_lhs == f64::NEG_INFINITY && log_rhs == f64::NEG_INFINITY;
    let violation = log_rhs == f64::NEG_INFINITY && log_lhs > f64::NEG_INFINITY;
    let constant = if vacuous {
        0.0
    } else if violation {
        f64::INFINITY
    } else {
        (log_lhs - log_rhs).exp()
    };
    Ok(CarlemanValues {
        log_lhs,
        log_rhs_interior: log_int,
        log_rhs_flux: log_flux,
        log_rhs,
        constant,
        vacuous,
        violation,
    })
}
