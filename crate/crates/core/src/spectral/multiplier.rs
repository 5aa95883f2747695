//! Fourier multipliers, the Cauchy transform and the dealiased product.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;

use super::fft::transform;
use super::field::Field;
use super::grid::GridSpec;
use crate::error::{LabError, Result};
use crate::scalar::Scalar;

type SymbolFn = dyn Fn([f64; 2]) -> Complex<f64> + Send + Sync;

/// A Fourier multiplier `m(ξ)`.
///
/// Singular symbols vanish at `ξ = 0` and on the Nyquist lines, so that every
/// multiplier built from them is an exact operator on the active modes and maps
/// real fields to real fields. Smooth radial symbols keep their Nyquist values.
#[derive(Clone)]
pub enum MultiplierSymbol {
    Identity,
    /// `−i sgn ξ` (1-D).
    Hilbert,
    /// `−i ξ_j/|ξ|`, axes numbered from 1.
    Riesz(usize),
    /// `R_j R_k = −ξ_j ξ_k/|ξ|²`.
    RieszProduct(usize, usize),
    /// `ζ̄/ζ` with `ζ = ξ₁ + iξ₂`.
    Beurling,
    /// `ζ/ζ̄`.
    BeurlingConjugate,
    /// `|ξ|`.
    Lambda,
    /// `1/|ξ|`.
    LambdaInv,
    /// `iξ_j`.
    Derivative(usize),
    /// `∂_z̄ ↔ iζ/2`.
    DzBar,
    /// `∂_z ↔ iζ̄/2`.
    Dz,
    /// `exp(−t²|ξ|²/2)`, the unit-mass Gaussian of width `t`.
    Gaussian(f64),
    /// `exp(−y|ξ|)`.
    Poisson(f64),
    /// `−i sgn(ξ) exp(−y|ξ|)` (1-D).
    ConjugatePoisson(f64),
    Custom {
        name: String,
        singular: bool,
        eval: Arc<SymbolFn>,
    },
}

impl MultiplierSymbol {
    pub fn custom(
        name: impl Into<String>,
        singular: bool,
        eval: impl Fn([f64; 2]) -> Complex<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::Custom { name: name.into(), singular, eval: Arc::new(eval) }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Whether the symbol is forced to zero at the origin and on Nyquist lines.
    pub fn is_singular(&self) -> bool {
        match self {
            Self::Identity | Self::Gaussian(_) | Self::Poisson(_) | Self::Lambda | Self::LambdaInv => false,
            Self::Custom { singular, .. } => *singular,
            _ => true,
        }
    }

    /// Checks that the symbol makes sense on a grid of the given dimension.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        let ok = match self {
            Self::Hilbert | Self::ConjugatePoisson(_) => dim == 1,
            Self::Beurling | Self::BeurlingConjugate | Self::DzBar | Self::Dz => dim == 2,
            Self::Riesz(j) | Self::Derivative(j) => (1..=dim).contains(j),
            Self::RieszProduct(j, k) => (1..=dim).contains(j) && (1..=dim).contains(k),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::KindMismatch { kind: self.to_string(), dim })
        }
    }

    /// Continuum symbol at a frequency vector (zero at the origin for singular symbols).
    pub fn eval(&self, xi: [f64; 2]) -> Complex<f64> {
        let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        let zero = Complex::new(0.0, 0.0);
        let i = Complex::new(0.0, 1.0);
        if r == 0.0 {
            return match self {
                Self::Identity | Self::Gaussian(_) | Self::Poisson(_) => Complex::new(1.0, 0.0),
                Self::Custom { singular: false, eval, .. } => eval(xi),
                _ => zero,
            };
        }
        let zeta = Complex::new(xi[0], xi[1]);
        match self {
            Self::Identity => Complex::new(1.0, 0.0),
            Self::Hilbert => Complex::new(0.0, -xi[0].signum()),
            Self::Riesz(j) => Complex::new(0.0, -xi[j - 1] / r),
            Self::RieszProduct(j, k) => Complex::new(-xi[j - 1] * xi[k - 1] / (r * r), 0.0),
            Self::Beurling => zeta.conj() / zeta,
            Self::BeurlingConjugate => zeta / zeta.conj(),
            Self::Lambda => Complex::new(r, 0.0),
            Self::LambdaInv => Complex::new(1.0 / r, 0.0),
            Self::Derivative(j) => Complex::new(0.0, xi[j - 1]),
            Self::DzBar => i * zeta / 2.0,
            Self::Dz => i * zeta.conj() / 2.0,
            Self::Gaussian(t) => Complex::new((-0.5 * t * t * r * r).exp(), 0.0),
            Self::Poisson(y) => Complex::new((-y * r).exp(), 0.0),
            Self::ConjugatePoisson(y) => Complex::new(0.0, -xi[0].signum() * (-y * r).exp()),
            Self::Custom { eval, .. } => eval(xi),
        }
    }

    /// Symbol sampled on the grid's spectral layout, with the Nyquist rule applied.
    pub fn table<T: Scalar>(&self, grid: &GridSpec) -> Result<Vec<Complex<T>>> {
        self.check_dim(grid.dim())?;
        let singular = self.is_singular();
        (0..grid.len())
            .map(|p| {
                if singular && !grid.is_active(p) {
                    return Ok(Complex::new(T::zero(), T::zero()));
                }
                let v = self.eval(grid.wavevector(p));
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(LabError::NonFinite { index: p });
                }
                Ok(Complex::new(T::of(v.re), T::of(v.im)))
            })
            .collect()
    }
}

impl fmt::Debug for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiplierSymbol({self})")
    }
}

impl fmt::Display for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::Hilbert => write!(f, "hilbert"),
            Self::Riesz(j) => write!(f, "riesz({j})"),
            Self::RieszProduct(j, k) => write!(f, "riesz_product({j},{k})"),
            Self::Beurling => write!(f, "beurling"),
            Self::BeurlingConjugate => write!(f, "beurling_conjugate"),
            Self::Lambda => write!(f, "lambda"),
            Self::LambdaInv => write!(f, "lambda_inv"),
            Self::Derivative(j) => write!(f, "derivative({j})"),
            Self::DzBar => write!(f, "dzbar"),
            Self::Dz => write!(f, "dz"),
            Self::Gaussian(t) => write!(f, "gaussian({t})"),
            Self::Poisson(y) => write!(f, "poisson({y})"),
            Self::ConjugatePoisson(y) => write!(f, "conjugate_poisson({y})"),
            Self::Custom { name, .. } => write!(f, "custom:{name}"),
        }
    }
}

fn split_call(s: &str) -> (&str, Vec<&str>) {
    match s.find('(') {
        Some(open) if s.ends_with(')') => {
            let args = s[open + 1..s.len() - 1].split(',').map(str::trim).collect();
            (s[..open].trim(), args)
        }
        _ => (s.trim(), Vec::new()),
    }
}

impl FromStr for MultiplierSymbol {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::InvalidArgument(format!("unknown multiplier '{s}'"));
        let (head, args) = split_call(s);
        let index = |k: usize| -> Result<usize> { args.get(k).and_then(|a| a.parse().ok()).ok_or_else(bad) };
        let real = |k: usize| -> Result<f64> {
            args.get(k).and_then(|a| a.parse().ok()).filter(|v: &f64| v.is_finite()).ok_or_else(bad)
        };
        let sym = match (head, args.len()) {
            ("identity", 0) => Self::Identity,
            ("hilbert", 0) => Self::Hilbert,
            ("riesz", 1) => Self::Riesz(index(0)?),
            ("riesz_product", 2) => Self::RieszProduct(index(0)?, index(1)?),
            ("beurling", 0) => Self::Beurling,
            ("beurling_conjugate", 0) => Self::BeurlingConjugate,
            ("lambda", 0) => Self::Lambda,
            ("lambda_inv", 0) => Self::LambdaInv,
            ("derivative", 1) => Self::Derivative(index(0)?),
            ("dzbar", 0) => Self::DzBar,
            ("dz", 0) => Self::Dz,
            ("gaussian", 1) => Self::Gaussian(real(0)?),
            ("poisson", 1) => Self::Poisson(real(0)?),
            ("conjugate_poisson", 1) => Self::ConjugatePoisson(real(0)?),
            _ => return Err(bad()),
        };
        if let Self::Riesz(j) | Self::Derivative(j) = sym {
            if !(1..=2).contains(&j) {
                return Err(bad());
            }
        }
        if let Self::RieszProduct(j, k) = sym {
            if !(1..=2).contains(&j) || !(1..=2).contains(&k) {
                return Err(bad());
            }
        }
        Ok(sym)
    }
}

/// Multiplies a spectrum in place by a precomputed symbol table.
pub(crate) fn multiply_spectrum<T: Scalar>(spec: &mut [Complex<T>], table: &[Complex<T>]) {
    for (v, m) in spec.iter_mut().zip(table) {
        *v = *v * *m;
    }
}

/// `F⁻¹[m(ξ) f̂(ξ)]`.
pub fn apply_multiplier<T: Scalar>(f: &Field<T>, m: &MultiplierSymbol) -> Result<Field<T>> {
    if let Some(index) = f.values().iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(LabError::NonFinite { index });
    }
    let table = m.table::<T>(f.grid())?;
    Ok(apply_table(f, &table))
}

fn apply_table<T: Scalar>(f: &Field<T>, table: &[Complex<T>]) -> Field<T> {
    let mut spec = f.spectrum();
    multiply_spectrum(&mut spec, table);
    Field::from_spectrum(*f.grid(), spec)
}

/// Inverse of `∂_z̄` on mean-zero data: `û = ŵ/(iζ/2)`.
pub fn cauchy_transform<T: Scalar>(w: &Field<T>) -> Result<Field<T>> {
    let grid = *w.grid();
    if grid.dim() != 2 {
        return Err(LabError::KindMismatch { kind: "cauchy_transform".into(), dim: grid.dim() });
    }
    let mean = w.mean();
    let scale = w.max_abs().max(T::one());
    if mean.norm() > T::of(1e-12) * scale {
        return Err(LabError::NonzeroMean { mean: mean.norm().f64() });
    }
    let mut spec = w.spectrum();
    for (p, v) in spec.iter_mut().enumerate() {
        let xi = grid.wavevector(p);
        if p == 0 {
            *v = Complex::new(T::zero(), T::zero());
        } else {
            let dzbar = Complex::new(T::of(-xi[1] / 2.0), T::of(xi[0] / 2.0));
            *v = *v / dzbar;
        }
    }
    Ok(Field::from_spectrum(grid, spec))
}

/// Embeds a spectrum into the padded `(3N/2)^dim` layout as plain coefficients.
fn pad<T: Scalar>(grid: &GridSpec, spec: &[Complex<T>]) -> Vec<Complex<T>> {
    let m = grid.padded_n();
    let len = m.pow(grid.dim() as u32);
    let factor = T::one() / T::of(grid.len() as f64);
    let mut out = vec![Complex::new(T::zero(), T::zero()); len];
    for (p, v) in spec.iter().enumerate() {
        if grid.is_nyquist(p) {
            continue;
        }
        let [k0, k1] = grid.mode(p);
        let a = k0.rem_euclid(m as i64) as usize;
        let b = k1.rem_euclid(m as i64) as usize;
        let q = if grid.dim() == 1 { a } else { a * m + b };
        out[q] = *v * factor;
    }
    out
}

/// Product of two fields given by spectra, returned as a spectrum.
///
/// Inputs lose their Nyquist modes; the output keeps the modes `|k| < N/2` of the
/// exact convolution, which the 3/2 padding computes without aliasing.
pub(crate) fn product_spectrum<T: Scalar>(
    grid: &GridSpec,
    fspec: &[Complex<T>],
    gspec: &[Complex<T>],
) -> Vec<Complex<T>> {
    let m = grid.padded_n();
    let dim = grid.dim();
    let mut fp = pad(grid, fspec);
    let mut gp = pad(grid, gspec);
    transform(&mut fp, m, dim, true);
    transform(&mut gp, m, dim, true);
    let padded_len = fp.len();
    for (a, b) in fp.iter_mut().zip(&gp) {
        *a = *a * *b;
    }
    transform(&mut fp, m, dim, false);
    let norm = T::of(grid.len() as f64 / padded_len as f64);
    let mut out = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    for (p, v) in out.iter_mut().enumerate() {
        if grid.is_nyquist(p) {
            continue;
        }
        let [k0, k1] = grid.mode(p);
        let a = k0.rem_euclid(m as i64) as usize;
        let b = k1.rem_euclid(m as i64) as usize;
        let q = if dim == 1 { a } else { a * m + b };
        *v = fp[q] * norm;
    }
    out
}

/// Alias-free pointwise product by 3/2 zero padding.
pub fn dealiased_product<T: Scalar>(f: &Field<T>, g: &Field<T>) -> Result<Field<T>> {
    f.check_grid(g)?;
    let grid = *f.grid();
    let spec = product_spectrum(&grid, &f.spectrum(), &g.spectrum());
    Ok(Field::from_spectrum(grid, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random::random_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn hilbert_maps_cos_to_sin() {
        let l = 5.0;
        let g = GridSpec::line(64, l).unwrap();
        let f = Field::from_fn(g, |[x, _]| c((2.0 * PI * x / l).cos(), 0.0)).unwrap();
        let h = apply_multiplier(&f, &MultiplierSymbol::Hilbert).unwrap();
        let expect = Field::from_fn(g, |[x, _]| c((2.0 * PI * x / l).sin(), 0.0)).unwrap();
        assert!(h.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn beurling_on_single_mode() {
        let g = GridSpec::plane(16, 2.0 * PI).unwrap();
        let (k1, k2) = (2.0, -3.0);
        let f = Field::from_fn(g, |[x, y]| c(0.0, k1 * x + k2 * y).exp()).unwrap();
        let s = apply_multiplier(&f, &MultiplierSymbol::Beurling).unwrap();
        let zeta = c(k1, k2);
        let expect = f.scale_complex(zeta.conj() / zeta);
        assert!(s.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn parses_names() {
        for name in ["hilbert", "riesz(2)", "riesz_product(1,2)", "beurling", "lambda_inv", "poisson(0.5)"] {
            let m: MultiplierSymbol = name.parse().unwrap();
            assert_eq!(m.to_string(), name);
        }
        assert!("riesz(3)".parse::<MultiplierSymbol>().is_err());
        assert!("nope".parse::<MultiplierSymbol>().is_err());
    }

    #[test]
    fn rejects_wrong_dimension() {
        let g = GridSpec::line(16, 1.0).unwrap();
        let f = Field::<f64>::zeros(g);
        assert!(apply_multiplier(&f, &MultiplierSymbol::Beurling).is_err());
    }

    #[test]
    fn cauchy_inverts_dzbar_on_single_mode() {
        let g = GridSpec::plane(16, 2.0 * PI).unwrap();
        let f = Field::from_fn(g, |[x, y]| c(0.0, 3.0 * x + y).exp()).unwrap();
        let u = cauchy_transform(&f).unwrap();
        let zeta = c(3.0, 1.0);
        let expect = f.scale_complex(c(2.0, 0.0) / (c(0.0, 1.0) * zeta));
        assert!(u.max_abs_diff(&expect) < 1e-12);
        assert!(cauchy_transform(&Field::constant(g, c(1.0, 0.0))).is_err());
    }

    #[test]
    fn dealiased_product_of_modes() {
        let g = GridSpec::line(32, 2.0 * PI).unwrap();
        let f = Field::from_fn(g, |[x, _]| c(0.0, 7.0 * x).exp()).unwrap();
        let p = dealiased_product(&f, &f).unwrap();
        let expect = Field::from_fn(g, |[x, _]| c(0.0, 14.0 * x).exp()).unwrap();
        assert!(p.max_abs_diff(&expect) < 1e-12);
        let z = dealiased_product(&f, &Field::zeros(g)).unwrap();
        assert!(z.max_abs() == 0.0);
    }

    #[test]
    fn dealiased_product_matches_mode_convolution() {
        let g = GridSpec::plane(16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field::<f64, _>(&g, 3, false, &mut rng);
        let h = random_field::<f64, _>(&g, 3, false, &mut rng);
        let p = dealiased_product(&f, &h).unwrap();
        // band 3 + band 3 stays inside |k| < 8, so the naive grid product is exact too
        let naive = f.pointwise_mul(&h).unwrap();
        assert!(p.rel_l2_diff(&naive) < 1e-12);
    }
}
