use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Uniform periodic grid on the torus `[-L/2, L/2)^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    period: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, period: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(LabError::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(LabError::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(LabError::InvalidGrid(format!("period must be positive, got {period}")));
        }
        Ok(Self { dim, n, period })
    }

    pub fn line(n: usize, period: f64) -> Result<Self> {
        Self::new(1, n, period)
    }

    pub fn plane(n: usize, period: f64) -> Result<Self> {
        Self::new(2, n, period)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Total number of samples, `N^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Volume element `Δx^dim` of the Riemann sums.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Padded size used by the 3/2 dealiasing rule.
    pub fn padded_n(&self) -> usize {
        3 * self.n / 2
    }

    pub(crate) fn signed(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Per-axis index pair of a flat (row-major) position; axis 1 is zero in 1-D.
    pub fn axes(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.n, flat % self.n],
        }
    }

    pub fn flat(&self, axes: [usize; 2]) -> usize {
        match self.dim {
            1 => axes[0],
            _ => axes[0] * self.n + axes[1],
        }
    }

    /// Signed mode numbers `k ∈ {-N/2, …, N/2-1}` of a flat spectral position.
    pub fn mode(&self, flat: usize) -> [i64; 2] {
        let [a, b] = self.axes(flat);
        match self.dim {
            1 => [self.signed(a), 0],
            _ => [self.signed(a), self.signed(b)],
        }
    }

    /// Flat spectral position of a signed mode, if representable.
    pub fn mode_position(&self, mode: [i64; 2]) -> Option<usize> {
        let half = (self.n / 2) as i64;
        let wrap = |k: i64| -> Option<usize> {
            if k < -half || k >= half {
                None
            } else {
                Some(k.rem_euclid(self.n as i64) as usize)
            }
        };
        match self.dim {
            1 => {
                if mode[1] != 0 {
                    return None;
                }
                wrap(mode[0])
            }
            _ => {
                let a = wrap(mode[0])?;
                let b = wrap(mode[1])?;
                Some(self.flat([a, b]))
            }
        }
    }

    /// Angular frequency `ξ = 2πk/L` of a flat spectral position.
    pub fn wavevector(&self, flat: usize) -> [f64; 2] {
        let [k0, k1] = self.mode(flat);
        let s = 2.0 * PI / self.period;
        [s * k0 as f64, s * k1 as f64]
    }

    /// Whether some axis sits on the unpaired index `-N/2`.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let half = -((self.n / 2) as i64);
        let [k0, k1] = self.mode(flat);
        k0 == half || (self.dim == 2 && k1 == half)
    }

    /// Modes carried by the lab's Hilbert space: nonzero and off the Nyquist lines.
    pub fn is_active(&self, flat: usize) -> bool {
        flat != 0 && !self.is_nyquist(flat)
    }

    /// Largest |k| over axes.
    pub fn mode_radius(&self, flat: usize) -> usize {
        let [k0, k1] = self.mode(flat);
        k0.unsigned_abs().max(k1.unsigned_abs()) as usize
    }

    /// Sample coordinates `x_j = -L/2 + jΔx`.
    pub fn coords(&self, flat: usize) -> [f64; 2] {
        let [a, b] = self.axes(flat);
        let h = self.spacing();
        let x0 = -self.period / 2.0;
        match self.dim {
            1 => [x0 + a as f64 * h, 0.0],
            _ => [x0 + a as f64 * h, x0 + b as f64 * h],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(GridSpec::new(1, 4, 1.0).is_err());
        assert!(GridSpec::new(1, 24, 1.0).is_err());
        assert!(GridSpec::new(3, 8, 1.0).is_err());
        assert!(GridSpec::new(2, 8, 0.0).is_err());
        assert!(GridSpec::new(2, 8, f64::NAN).is_err());
    }

    #[test]
    fn mode_layout() {
        let g = GridSpec::plane(8, 2.0 * PI).unwrap();
        assert_eq!(g.mode(0), [0, 0]);
        assert_eq!(g.mode(g.flat([7, 1])), [-1, 1]);
        assert_eq!(g.mode(g.flat([4, 0])), [-4, 0]);
        assert!(g.is_nyquist(g.flat([4, 3])));
        assert!(g.is_nyquist(g.flat([2, 4])));
        assert!(!g.is_active(0));
        assert_eq!(g.mode_position([-1, 1]), Some(g.flat([7, 1])));
        assert_eq!(g.mode_position([4, 0]), None);
        assert_eq!(g.wavevector(g.flat([1, 7])), [1.0, -1.0]);
        let l = GridSpec::line(16, 1.0).unwrap();
        assert_eq!(l.mode_position([3, 0]), Some(3));
        assert_eq!(l.mode_position([3, 1]), None);
    }
}
