//! Lᵖ, H¹ (maximal function) and dyadic BMO estimators.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::Scalar;
use crate::spectral::{Field, GridSpec, MultiplierSymbol};

/// Relative size of the mean above which H¹ membership is reported as obstructed.
pub const MEAN_OBSTRUCTION: f64 = 1e-8;

pub fn lp_norm<T: Scalar>(f: &Field<T>, p: f64) -> Result<T> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(LabError::invalid(format!("lp_norm needs finite p >= 1, got {p}")));
    }
    let dv = T::of(f.grid().cell_volume());
    let pt = T::of(p);
    let sum: T = f.values().iter().map(|v| v.norm().powf(pt)).sum();
    Ok((sum * dv).powf(T::one() / pt))
}

/// Dyadic family of Gaussian mollifier widths `t_j = t_min·2^j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub t_min: f64,
    pub levels: usize,
}

impl ScaleLadder {
    pub fn new(t_min: f64, levels: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_min > 0.0) || levels == 0 {
            return Err(LabError::invalid("ladder needs t_min > 0 and at least one level"));
        }
        Ok(Self { t_min, levels })
    }

    /// Ladder from the grid spacing up to the largest scale not exceeding `L/4`.
    pub fn for_grid(grid: &GridSpec) -> Self {
        let t_min = grid.spacing();
        let mut levels = 1;
        while t_min * 2f64.powi(levels as i32) <= grid.period() / 4.0 {
            levels += 1;
        }
        Self { t_min, levels }
    }

    pub fn scales(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.t_min * 2f64.powi(j as i32)).collect()
    }

    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        let top = self.t_min * 2f64.powi(self.levels as i32 - 1);
        if top > grid.period() / 4.0 * (1.0 + 1e-12) {
            return Err(LabError::invalid(format!(
                "largest ladder scale {top} exceeds L/4 = {}",
                grid.period() / 4.0
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Estimate {
    pub value: f64,
    /// Set when the mean is too large for the field to lie in H¹.
    pub divergent: bool,
}

/// `‖max_j |f ∗ χ_{t_j}|‖₁` over the ladder, with the nonzero-mean flag.
pub fn h1_norm<T: Scalar>(f: &Field<T>, ladder: &ScaleLadder) -> Result<H1Estimate> {
    let grid = *f.grid();
    ladder.check(&grid)?;
    let mut sup = vec![T::zero(); grid.len()];
    let mut spec = f.spectrum();
    let base = spec.clone();
    for t in ladder.scales() {
        let table = MultiplierSymbol::Gaussian(t).table::<T>(&grid)?;
        for ((s, b), m) in spec.iter_mut().zip(&base).zip(&table) {
            *s = *b * *m;
        }
        let smooth = Field::from_spectrum(grid, spec.clone());
        for (m, v) in sup.iter_mut().zip(smooth.values()) {
            *m = m.max(v.norm());
        }
    }
    let value = sup.iter().copied().sum::<T>() * T::of(grid.cell_volume());
    let norm = f.norm();
    let mean_part = f.mean().norm() * T::of(grid.volume().sqrt());
    let divergent = norm > T::zero() && mean_part > T::of(MEAN_OBSTRUCTION) * norm;
    Ok(H1Estimate { value: value.f64(), divergent })
}

fn oscillation<T: Scalar>(values: &[Complex<T>], idx: &[usize]) -> T {
    let count = T::of(idx.len() as f64);
    let mean = idx.iter().fold(Complex::new(T::zero(), T::zero()), |s, &i| s + values[i]) / count;
    idx.iter().map(|&i| (values[i] - mean).norm()).sum::<T>() / count
}

/// Largest mean oscillation over dyadic cubes of generations `0..=max_depth`.
pub fn bmo_norm<T: Scalar>(b: &Field<T>, max_depth: usize) -> Result<T> {
    let grid = *b.grid();
    let n = grid.n();
    let log_n = n.trailing_zeros() as usize;
    if max_depth > log_n {
        return Err(LabError::invalid(format!("max_depth {max_depth} exceeds log2 N = {log_n}")));
    }
    let values = b.values();
    let mut best = T::zero();
    let mut idx = Vec::with_capacity(grid.len());
    for gen in 0..=max_depth {
        let side = n >> gen;
        let cubes = 1usize << gen;
        let rows = if grid.dim() == 1 { 1 } else { cubes };
        for ci in 0..cubes {
            for cj in 0..rows {
                idx.clear();
                for a in ci * side..(ci + 1) * side {
                    if grid.dim() == 1 {
                        idx.push(a);
                    } else {
                        idx.extend((cj * side..(cj + 1) * side).map(|c| grid.flat([a, c])));
                    }
                }
                best = best.max(oscillation(values, &idx));
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn real(g: GridSpec, f: impl Fn(f64) -> f64) -> Field<f64> {
        Field::from_fn(g, |[x, _]| Complex::new(f(x), 0.0)).unwrap()
    }

    #[test]
    fn lp_of_constants_and_modes() {
        let g = GridSpec::line(32, 3.0).unwrap();
        for p in [1.0, 2.0, 3.5] {
            let one = real(g, |_| 1.0);
            assert!((lp_norm(&one, p).unwrap() - 3f64.powf(1.0 / p)).abs() < 1e-12);
            let mode = Field::from_fn(g, |[x, _]| Complex::new(0.0, 2.0 * PI * x / 3.0).exp()).unwrap();
            assert!((lp_norm(&mode, p).unwrap() - 3f64.powf(1.0 / p)).abs() < 1e-12);
            assert_eq!(lp_norm(&Field::<f64>::zeros(g), p).unwrap(), 0.0);
        }
        assert!(lp_norm(&real(g, |_| 1.0), 0.5).is_err());
    }

    #[test]
    fn ladder_respects_quarter_period() {
        let g = GridSpec::line(64, 16.0).unwrap();
        let ladder = ScaleLadder::for_grid(&g);
        assert!(ladder.check(&g).is_ok());
        assert!(*ladder.scales().last().unwrap() <= 4.0);
        assert!(ScaleLadder::new(1.0, 4).unwrap().check(&g).is_err());
    }

    #[test]
    fn constant_is_flagged() {
        let g = GridSpec::line(64, 16.0).unwrap();
        let est = h1_norm(&real(g, |_| 1.0), &ScaleLadder::for_grid(&g)).unwrap();
        assert!(est.divergent);
        let est = h1_norm(&real(g, |x| (2.0 * PI * x / 16.0).sin()), &ScaleLadder::for_grid(&g)).unwrap();
        assert!(!est.divergent && est.value > 0.0);
    }

    #[test]
    fn bmo_elementary_cases() {
        let g = GridSpec::line(64, 2.0).unwrap();
        assert_eq!(bmo_norm(&real(g, |_| 3.0), 6).unwrap(), 0.0);
        let ind = real(g, |x| if x < 0.0 { 1.0 } else { 0.0 });
        let v = bmo_norm(&ind, 6).unwrap();
        assert!(v > 0.0 && v <= 1.0);
        assert!(bmo_norm(&ind, 7).is_err());
    }

    #[test]
    fn bmo_on_plane_sees_checkerboard() {
        let g = GridSpec::plane(8, 1.0).unwrap();
        let b = Field::<f64>::from_fn(g, |[x, y]| Complex::new(if (x < 0.0) ^ (y < 0.0) { 1.0 } else { -1.0 }, 0.0)).unwrap();
        assert!((bmo_norm(&b, 0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(bmo_norm(&b, 3).unwrap(), 1.0);
    }
}
