//! Seeded random inputs. Every consumer draws from its own ChaCha stream
//! keyed by `(seed, stream)`, so results do not depend on call order across
//! streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::coeff::CoefField;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, NormKind, C64};
use crate::tree::{AdaptedField, FiltrationTree, LevelField};

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Complex normal with independent standard real and imaginary parts.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<C64> {
    (0..len).map(|_| complex_normal(rng)).collect()
}

/// Independent complex Gaussian values at every node of a level.
pub fn gaussian_level<R: Rng + ?Sized>(rng: &mut R, level: usize, width: usize) -> LevelField {
    LevelField::from_data(level, width, normal_vec(rng, width << level)).expect("matching size")
}

/// Per-leaf Gaussian datum scaled to unit `L²(Ω; H¹₀)` norm.
pub fn unit_datum<R: Rng + ?Sized>(rng: &mut R, grid: &Grid, level: usize) -> Result<LevelField> {
    let mut f = gaussian_level(rng, level, grid.len());
    let n = f.expected_norm_sqr(grid, NormKind::H10)?.sqrt();
    if n == 0.0 {
        return Err(Error::Numerical("zero random datum".into()));
    }
    f.scale(C64::new(1.0 / n, 0.0));
    Ok(f)
}

/// Smooth random field `bound · Σ_j ξ_j Π_a sin(k_{j,a} π x̂_a) / 2` with
/// `|ξ_j| ≤ 1` and two low modes, so `|value| ≤ bound`. Vanishes on Γ.
pub fn smooth_field<R: Rng + ?Sized>(rng: &mut R, grid: &Grid, bound: f64, real: bool) -> GridFunction {
    let extents = grid.extents();
    let mut terms = Vec::with_capacity(2);
    for _ in 0..2 {
        let modes: Vec<f64> = (0..grid.dim()).map(|_| rng.random_range(1..=3) as f64).collect();
        let r: f64 = rng.random_range(0.0..1.0);
        let xi = if real {
            C64::new(if rng.random_bool(0.5) { r } else { -r }, 0.0)
        } else {
            C64::from_polar(r, rng.random_range(0.0..2.0 * PI))
        };
        terms.push((modes, xi));
    }
    GridFunction::from_fn(grid, |p| {
        let mut v = C64::new(0.0, 0.0);
        for (modes, xi) in &terms {
            let mut s = 1.0;
            for (a, k) in modes.iter().enumerate() {
                let (lo, hi) = extents[a];
                s *= (k * PI * (p[a] - lo) / (hi - lo)).sin();
            }
            v += xi * s;
        }
        v * (bound / 2.0)
    })
}

/// Adapted coefficient with an independent smooth field at every node of
/// levels `0..K`.
pub fn adapted_field<R: Rng + ?Sized>(
    rng: &mut R,
    grid: &Grid,
    tree: &FiltrationTree,
    bound: f64,
    real: bool,
) -> CoefField {
    let levels = (0..tree.levels())
        .map(|k| {
            LevelField::from_fn(k, grid.len(), |_| {
                smooth_field(rng, grid, bound, real).into_vec()
            })
        })
        .collect();
    CoefField::Adapted(AdaptedField::new(0, levels).expect("consecutive levels"))
}
