//! Coefficient fields: either fixed in space and time, or adapted to the
//! filtration (one vector per tree node on levels `0..K`).

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, C64};
use crate::tree::{AdaptedField, FiltrationTree, LevelField};

#[derive(Clone, Debug, PartialEq)]
pub enum CoefField {
    /// Deterministic and time independent.
    Spatial(GridFunction),
    /// One value vector per node on levels `0..=K-1`.
    Adapted(AdaptedField),
}

impl CoefField {
    pub fn constant(grid: &Grid, value: C64) -> Self {
        CoefField::Spatial(GridFunction::from_vec(vec![value; grid.len()]))
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::constant(grid, C64::new(0.0, 0.0))
    }

    /// Values at tree node `(level, node)`.
    pub fn at(&self, level: usize, node: usize) -> &[C64] {
        match self {
            CoefField::Spatial(g) => g,
            CoefField::Adapted(a) => a.level(level).node(node),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, CoefField::Spatial(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CoefField::Spatial(g) => g.iter().all(|v| v.norm() == 0.0),
            CoefField::Adapted(a) => a.is_zero(),
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = &[C64]> + '_> {
        match self {
            CoefField::Spatial(g) => Box::new(std::iter::once(&g[..])),
            CoefField::Adapted(a) => Box::new(a.levels().iter().flat_map(|l| l.nodes())),
        }
    }

    pub fn is_real(&self) -> bool {
        self.values().all(|v| v.iter().all(|c| c.im == 0.0))
    }

    /// Checks width, level coverage and finiteness.
    pub fn validate(&self, grid: &Grid, tree: &FiltrationTree, key: &str) -> Result<()> {
        match self {
            CoefField::Spatial(g) => {
                if g.len() != grid.len() {
                    return Err(Error::config(
                        key,
                        format!("expected {} values, got {}", grid.len(), g.len()),
                    ));
                }
            }
            CoefField::Adapted(a) => {
                if a.first_level() != 0 || a.last_level() + 1 < tree.levels() {
                    return Err(Error::config(
                        key,
                        format!("adapted coefficient must cover levels 0..{}", tree.levels()),
                    ));
                }
                if a.width() != grid.len() {
                    return Err(Error::config(
                        key,
                        format!("expected {} values per node, got {}", grid.len(), a.width()),
                    ));
                }
            }
        }
        if !self
            .values()
            .all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::config(key, "non-finite coefficient value"));
        }
        Ok(())
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(C64) -> C64) -> CoefField {
        match self {
            CoefField::Spatial(g) => {
                CoefField::Spatial(GridFunction::from_vec(g.iter().map(|&v| f(v)).collect()))
            }
            CoefField::Adapted(a) => {
                let levels = a
                    .levels()
                    .iter()
                    .map(|l| {
                        let data = l.data().iter().map(|&v| f(v)).collect();
                        LevelField::from_data(l.level(), l.width(), data).expect("same shape")
                    })
                    .collect();
                CoefField::Adapted(AdaptedField::new(a.first_level(), levels).expect("same levels"))
            }
        }
    }

    /// Node-vector map over the union of levels covered by `self` and
    /// `other`; the result is adapted when either input is.
    pub fn zip_nodes(
        &self,
        other: &CoefField,
        levels: usize,
        f: impl Fn(&[C64], &[C64]) -> Vec<C64>,
    ) -> CoefField {
        if self.is_static() && other.is_static() {
            return CoefField::Spatial(GridFunction::from_vec(f(self.at(0, 0), other.at(0, 0))));
        }
        let width = self.at(0, 0).len();
        let lvls = (0..levels)
            .map(|k| LevelField::from_fn(k, width, |n| f(self.at(k, n), other.at(k, n))))
            .collect();
        CoefField::Adapted(AdaptedField::new(0, lvls).expect("consecutive levels"))
    }

    /// Discrete W^{1,∞} norm: sup of values plus sup of forward difference
    /// quotients along each axis over all nodes and levels. When
    /// `zero_boundary` is set the field is extended by zero to Γ and the
    /// boundary edges are included.
    pub fn w1inf_norm(&self, grid: &Grid, zero_boundary: bool) -> f64 {
        let mut sup = 0.0f64;
        let mut dsup = vec![0.0f64; grid.dim()];
        for v in self.values() {
            for x in v {
                sup = sup.max(x.norm());
            }
            for (axis, d) in dsup.iter_mut().enumerate() {
                let h = grid.spacing(axis);
                for idx in 0..grid.len() {
                    let (lo, hi) = grid.neighbors(idx, axis);
                    match hi {
                        Some(j) => *d = d.max((v[j] - v[idx]).norm() / h),
                        None if zero_boundary => *d = d.max(v[idx].norm() / h),
                        None => {}
                    }
                    if lo.is_none() && zero_boundary {
                        *d = d.max(v[idx].norm() / h);
                    }
                }
            }
        }
        sup + dsup.iter().sum::<f64>()
    }
}
