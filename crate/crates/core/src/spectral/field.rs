use num_complex::Complex;

use super::fft::transform;
use super::grid::GridSpec;
use crate::error::{LabError, Result};
use crate::scalar::Scalar;

/// Complex samples on a periodic grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: GridSpec,
    values: Vec<Complex<T>>,
}

impl<T: Scalar> Field<T> {
    pub fn new(grid: GridSpec, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(LabError::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![Complex::new(T::zero(), T::zero()); grid.len()] }
    }

    pub fn constant(grid: GridSpec, c: Complex<T>) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_real(grid: GridSpec, re: &[T]) -> Result<Self> {
        Self::new(grid, re.iter().map(|&r| Complex::new(r, T::zero())).collect())
    }

    /// Samples `f(x)` at the grid coordinates.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> Complex<T>) -> Result<Self> {
        Self::new(grid, (0..grid.len()).map(|i| f(grid.coords(i))).collect())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn re(&self) -> Vec<T> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn im(&self) -> Vec<T> {
        self.values.iter().map(|v| v.im).collect()
    }

    pub fn real_part(&self) -> Self {
        self.map(|v| Complex::new(v.re, T::zero()))
    }

    pub fn imag_part(&self) -> Self {
        self.map(|v| Complex::new(v.im, T::zero()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_imag(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.im.abs()))
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(LabError::GridMismatch)
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn scale_complex(&self, c: Complex<T>) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b * s)
    }

    /// Pointwise product on the grid, no dealiasing.
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    /// Real inner product `Re Σ f·conj(g)·Δx`.
    pub fn inner(&self, other: &Self) -> T {
        let dv = T::of(self.grid.cell_volume());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum::<T>()
            * dv
    }

    pub fn norm_sq(&self) -> T {
        self.inner(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Grid integral `Σ f·Δx`.
    pub fn integral(&self) -> Complex<T> {
        let dv = T::of(self.grid.cell_volume());
        self.values.iter().fold(Complex::new(T::zero(), T::zero()), |s, &v| s + v) * dv
    }

    /// Mean value, i.e. the zero Fourier coefficient.
    pub fn mean(&self) -> Complex<T> {
        self.integral() / T::of(self.grid.volume())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((a - b).norm()))
    }

    /// Relative L2 distance `‖self − other‖ / max(‖other‖, tiny)`.
    pub fn rel_l2_diff(&self, other: &Self) -> T {
        let num: T = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: T = other.values.iter().map(|b| b.norm_sqr()).sum();
        (num / den.max(T::min_positive_value())).sqrt()
    }

    /// Unnormalized forward DFT.
    pub fn spectrum(&self) -> Vec<Complex<T>> {
        let mut data = self.values.clone();
        transform(&mut data, self.grid.n(), self.grid.dim(), false);
        data
    }

    /// Inverse of [`Field::spectrum`].
    pub fn from_spectrum(grid: GridSpec, mut spec: Vec<Complex<T>>) -> Self {
        assert_eq!(spec.len(), grid.len());
        transform(&mut spec, grid.n(), grid.dim(), true);
        let inv = T::one() / T::of(grid.len() as f64);
        for v in spec.iter_mut() {
            *v = *v * inv;
        }
        Self { grid, values: spec }
    }

    /// Fourier coefficients `c_k` with `f(x) = Σ c_k e^{iξ_k·(x - x_0)}`.
    pub fn coefficients(&self) -> Vec<Complex<T>> {
        let inv = T::one() / T::of(self.grid.len() as f64);
        self.spectrum().into_iter().map(|v| v * inv).collect()
    }

    /// Projection onto the active modes (zero mean, no Nyquist content).
    pub fn project_active(&self) -> Self {
        let mut spec = self.spectrum();
        for (i, v) in spec.iter_mut().enumerate() {
            if !self.grid.is_active(i) {
                *v = Complex::new(T::zero(), T::zero());
            }
        }
        Self::from_spectrum(self.grid, spec)
    }

    /// Largest per-axis mode index carrying a coefficient above `rel_tol · max|c|`.
    pub fn support_radius(&self, rel_tol: T) -> usize {
        let spec = self.spectrum();
        let peak = spec.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        if peak == T::zero() {
            return 0;
        }
        spec.iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > rel_tol * peak)
            .map(|(i, _)| self.grid.mode_radius(i))
            .max()
            .unwrap_or(0)
    }

    /// Translation by whole grid cells along each axis.
    pub fn shift(&self, by: [usize; 2]) -> Self {
        let n = self.grid.n();
        let mut out = self.values.clone();
        for (i, v) in self.values.iter().enumerate() {
            let [a, b] = self.grid.axes(i);
            let target = match self.grid.dim() {
                1 => self.grid.flat([(a + by[0]) % n, 0]),
                _ => self.grid.flat([(a + by[0]) % n, (b + by[1]) % n]),
            };
            out[target] = *v;
        }
        Self { grid: self.grid, values: out }
    }

    /// Rescales to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Field<U> {
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .map(|v| Complex::new(U::of(v.re.f64()), U::of(v.im.f64())))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_non_finite_and_bad_length() {
        let g = GridSpec::line(8, 1.0).unwrap();
        let mut v = vec![Complex::new(0.0, 0.0); 8];
        v[3] = Complex::new(f64::NAN, 0.0);
        assert!(matches!(Field::new(g, v), Err(LabError::NonFinite { index: 3 })));
        assert!(Field::<f64>::new(g, vec![Complex::new(0.0, 0.0); 7]).is_err());
    }

    #[test]
    fn spectrum_round_trip_2d() {
        let g = GridSpec::plane(8, 2.0 * PI).unwrap();
        let f = Field::from_fn(g, |[x, y]| Complex::new((x + 2.0 * y).sin(), x.cos())).unwrap();
        let back = Field::from_spectrum(g, f.spectrum());
        assert!(back.max_abs_diff(&f) < 1e-13);
    }

    #[test]
    fn single_mode_lands_on_its_position() {
        let g = GridSpec::plane(16, 2.0 * PI).unwrap();
        let f = Field::<f64>::from_fn(g, |[x, y]| Complex::new(0.0, 3.0 * x - 2.0 * y).exp()).unwrap();
        let c = f.coefficients();
        let pos = g.mode_position([3, -2]).unwrap();
        assert!(c[pos].norm() > 0.99);
        let others: f64 = c.iter().enumerate().filter(|(i, _)| *i != pos).map(|(_, v)| v.norm()).sum();
        assert!(others < 1e-12);
    }

    #[test]
    fn shift_matches_translation() {
        let g = GridSpec::line(16, 2.0 * PI).unwrap();
        let f = Field::<f64>::from_fn(g, |[x, _]| Complex::new(x.sin(), 0.0)).unwrap();
        let s = f.shift([4, 0]);
        let h = g.spacing() * 4.0;
        let expect = Field::from_fn(g, |[x, _]| Complex::new((x - h).sin(), 0.0)).unwrap();
        assert!(s.max_abs_diff(&expect) < 1e-12);
    }
}
