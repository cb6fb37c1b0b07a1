//! Non-recombining binary filtration tree.
//!
//! Level `k` carries `2^k` equally likely nodes. Node `n` at level `k` has
//! children `2n` (increment `+√Δt`) and `2n + 1` (increment `-√Δt`) at level
//! `k + 1`. With this layout conditional expectation and martingale
//! representation are exact finite operations.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, NormKind, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct FiltrationTree {
    horizon: f64,
    levels: usize,
    dt: f64,
    sqrt_dt: f64,
}

impl FiltrationTree {
    /// Largest admissible level count (about a million leaves).
    pub const MAX_LEVELS: usize = 20;

    pub fn new(horizon: f64, levels: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::config(
                "tree.T",
                format!("horizon must be positive, got {horizon}"),
            ));
        }
        if levels == 0 || levels > Self::MAX_LEVELS {
            return Err(Error::config(
                "tree.K",
                format!(
                    "level count must lie in 1..={}, got {levels}",
                    Self::MAX_LEVELS
                ),
            ));
        }
        let dt = horizon / levels as f64;
        Ok(FiltrationTree {
            horizon,
            levels,
            dt,
            sqrt_dt: dt.sqrt(),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of time steps `K`; leaves sit at level `K`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sqrt_dt(&self) -> f64 {
        self.sqrt_dt
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    pub fn node_count(&self, level: usize) -> usize {
        1 << level
    }

    /// Probability of each node at `level`.
    pub fn probability(&self, level: usize) -> f64 {
        (0.5f64).powi(level as i32)
    }

    pub fn children(node: usize) -> (usize, usize) {
        (2 * node, 2 * node + 1)
    }

    /// Brownian increment on the edge leading into `child`.
    pub fn increment(&self, child: usize) -> f64 {
        if child.is_multiple_of(2) {
            self.sqrt_dt
        } else {
            -self.sqrt_dt
        }
    }

    /// Value of the discrete Brownian path `B(t_level)` at `node`.
    pub fn path_sum(&self, level: usize, node: usize) -> f64 {
        (0..level).map(|j| self.increment(node >> j)).sum()
    }

    /// `E(ξ | F_k)` for a field given at level `k + 1`.
    pub fn conditional_expectation(&self, field: &LevelField) -> Result<LevelField> {
        if field.level() == 0 {
            return Err(Error::Domain(
                "conditional expectation needs a field above level 0".into(),
            ));
        }
        if field.level() > self.levels {
            return Err(Error::Domain(format!(
                "field level {} exceeds tree depth {}",
                field.level(),
                self.levels
            )));
        }
        let level = field.level() - 1;
        let width = field.width();
        let mut out = LevelField::zeros(level, width);
        for n in 0..out.node_count() {
            let (up, down) = Self::children(n);
            let (a, b) = (field.node(up), field.node(down));
            for ((o, x), y) in out.node_mut(n).iter_mut().zip(a).zip(b) {
                *o = 0.5 * (x + y);
            }
        }
        Ok(out)
    }

    /// Probability-weighted average of the node values of `field`.
    pub fn expectation(&self, field: &LevelField) -> Result<GridFunction> {
        if field.level() > self.levels {
            return Err(Error::Domain(format!(
                "field level {} exceeds tree depth {}",
                field.level(),
                self.levels
            )));
        }
        Ok(field.mean())
    }
}

/// Splits a child pair into its conditional mean and the martingale
/// integrand: `mean = (z⁺ + z⁻)/2`, `Z = (z⁺ - z⁻)/(2√Δt)`, so that
/// `z^± = mean ± Z √Δt`.
pub fn martingale_representation(
    plus: &[C64],
    minus: &[C64],
    dt: f64,
) -> (GridFunction, GridFunction) {
    debug_assert_eq!(plus.len(), minus.len());
    let scale = 1.0 / (2.0 * dt.sqrt());
    let mean = plus.iter().zip(minus).map(|(a, b)| 0.5 * (a + b)).collect();
    let z = plus.iter().zip(minus).map(|(a, b)| (a - b) * scale).collect();
    (GridFunction::from_vec(mean), GridFunction::from_vec(z))
}

/// One vector of length `width` per node of a single tree level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelField {
    level: usize,
    width: usize,
    data: Vec<C64>,
}

impl LevelField {
    pub fn zeros(level: usize, width: usize) -> Self {
        LevelField {
            level,
            width,
            data: vec![C64::new(0.0, 0.0); width << level],
        }
    }

    /// Same value at every node of the level.
    pub fn deterministic(level: usize, value: &[C64]) -> Self {
        let mut data = Vec::with_capacity(value.len() << level);
        for _ in 0..(1usize << level) {
            data.extend_from_slice(value);
        }
        LevelField {
            level,
            width: value.len(),
            data,
        }
    }

    pub fn from_fn(level: usize, width: usize, mut f: impl FnMut(usize) -> Vec<C64>) -> Self {
        let mut data = Vec::with_capacity(width << level);
        for n in 0..(1usize << level) {
            let v = f(n);
            assert_eq!(v.len(), width, "node {n} has wrong width");
            data.extend(v);
        }
        LevelField { level, width, data }
    }

    pub fn from_data(level: usize, width: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != width << level {
            return Err(Error::shape("LevelField::from_data", width << level, data.len()));
        }
        Ok(LevelField { level, width, data })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn node_count(&self) -> usize {
        1 << self.level
    }

    pub fn node(&self, n: usize) -> &[C64] {
        &self.data[n * self.width..(n + 1) * self.width]
    }

    pub fn node_mut(&mut self, n: usize) -> &mut [C64] {
        &mut self.data[n * self.width..(n + 1) * self.width]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks_exact(self.width.max(1))
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    /// Uniform average over the nodes.
    pub fn mean(&self) -> GridFunction {
        let mut out = GridFunction::zeros(self.width);
        for node in self.nodes() {
            for (o, v) in out.iter_mut().zip(node) {
                *o += v;
            }
        }
        let p = 1.0 / self.node_count() as f64;
        for o in out.iter_mut() {
            *o *= p;
        }
        out
    }

    pub fn scale(&mut self, factor: C64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: C64, other: &LevelField) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    pub fn sub(&self, other: &LevelField) -> LevelField {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other);
        out
    }

    /// `E <self, other>_{L²}` for interior fields.
    pub fn expected_inner(&self, grid: &Grid, other: &LevelField) -> C64 {
        debug_assert_eq!(self.width, grid.len());
        let s: C64 = self.nodes().zip(other.nodes()).map(|(a, b)| grid.inner(a, b)).sum();
        s / self.node_count() as f64
    }

    /// `E |self|²` in the requested grid norm.
    pub fn expected_norm_sqr(&self, grid: &Grid, kind: NormKind) -> Result<f64> {
        let mut s = 0.0;
        for node in self.nodes() {
            s += grid.norm_sqr(node, kind)?;
        }
        Ok(s / self.node_count() as f64)
    }

    /// `E <self, other>_{L²(Γ or Γ0)}` for boundary fields.
    pub fn expected_boundary_inner(
        &self,
        grid: &Grid,
        other: &LevelField,
        gamma0: Option<&crate::grid::Gamma0>,
    ) -> C64 {
        let s: C64 = self
            .nodes()
            .zip(other.nodes())
            .map(|(a, b)| grid.boundary_inner(a, b, gamma0))
            .sum();
        s / self.node_count() as f64
    }
}

/// Tree-indexed family of node vectors over a contiguous range of levels.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedField {
    first: usize,
    levels: Vec<LevelField>,
}

impl AdaptedField {
    pub fn new(first: usize, levels: Vec<LevelField>) -> Result<Self> {
        for (i, l) in levels.iter().enumerate() {
            if l.level() != first + i {
                return Err(Error::Domain(format!(
                    "adapted field level {} found where {} expected",
                    l.level(),
                    first + i
                )));
            }
            if l.width() != levels[0].width() {
                return Err(Error::shape("AdaptedField::new", levels[0].width(), l.width()));
            }
        }
        Ok(AdaptedField { first, levels })
    }

    /// Zero field on levels `first..=last`.
    pub fn zeros(first: usize, last: usize, width: usize) -> Self {
        AdaptedField {
            first,
            levels: (first..=last).map(|k| LevelField::zeros(k, width)).collect(),
        }
    }

    pub fn first_level(&self) -> usize {
        self.first
    }

    pub fn last_level(&self) -> usize {
        self.first + self.levels.len() - 1
    }

    pub fn width(&self) -> usize {
        self.levels.first().map_or(0, |l| l.width())
    }

    pub fn level(&self, k: usize) -> &LevelField {
        &self.levels[k - self.first]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut LevelField {
        &mut self.levels[k - self.first]
    }

    pub fn get(&self, k: usize) -> Option<&LevelField> {
        k.checked_sub(self.first).and_then(|i| self.levels.get(i))
    }

    pub fn levels(&self) -> &[LevelField] {
        &self.levels
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().all(LevelField::is_finite)
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().all(LevelField::is_zero)
    }

    pub fn scale(&mut self, factor: C64) {
        for l in &mut self.levels {
            l.scale(factor);
        }
    }

    pub fn axpy(&mut self, factor: C64, other: &AdaptedField) {
        assert_eq!(self.first, other.first);
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            a.axpy(factor, b);
        }
    }
}
