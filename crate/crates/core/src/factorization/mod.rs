//! Factorization of `H¹(ℝ)` data as `ωγ − HωHγ` through Blaschke products and
//! analytic square roots in the upper half-plane.
//!
//! Given `f = Re U` with `U` analytic in `ℂ₊`, the zeros `z_k` of `U` are
//! divided out by `B(z) = Π((z − z_k)/(z − z̄_k))^{m_k}`, the zero-free quotient
//! `Φ = U/B` receives a square root, and `V = BΦ^{1/2}`, `W = Φ^{1/2}` satisfy
//! `Re(VW) = f` with `ω = Re V`, `Hω = Im V`, `γ = Re W`, `Hγ = Im W`.

mod branch;
mod rational;
mod zeros;

pub use branch::{continued_log, continued_sqrt, CayleyGrid};
pub use rational::{Blaschke, RationalFunction};
pub use zeros::{winding_number, winding_zeros, Rect, ZeroReport, MIN_BOUNDARY_MODULUS, MIN_BOX_SIDE};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::spectral::{apply_multiplier, Field, GridSpec, MultiplierSymbol};

/// Mean tolerance for boundary data, relative to `‖f‖₂ / √L`.
pub const MEAN_TOLERANCE: f64 = 1e-8;
/// Cayley-circle resolution used for the Hilbert consistency check.
pub const CAYLEY_POINTS: usize = 1 << 14;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check_line(f: &Field<f64>) -> Result<()> {
    if f.grid().dim() != 1 {
        return Err(LabError::KindMismatch { kind: "half-plane extension".into(), dim: f.grid().dim() });
    }
    Ok(())
}

fn check_mean(f: &Field<f64>) -> Result<()> {
    let m = f.mean().norm();
    if m * f.grid().volume().sqrt() > MEAN_TOLERANCE * f.norm().max(f64::MIN_POSITIVE) {
        return Err(LabError::NonzeroMean { mean: m });
    }
    Ok(())
}

/// `(f ∗ P_y, f ∗ Q_y)` for the Poisson and conjugate Poisson kernels.
pub fn poisson_extend(f: &Field<f64>, y: f64) -> Result<(Field<f64>, Field<f64>)> {
    check_line(f)?;
    if !(y > 0.0 && y.is_finite()) {
        return Err(LabError::invalid("extension height must be positive"));
    }
    if f.max_imag() > 1e3 * f64::EPSILON * f.max_abs().max(1.0) {
        return Err(LabError::invalid("boundary data must be real"));
    }
    check_mean(f)?;
    Ok((apply_multiplier(f, &MultiplierSymbol::Poisson(y))?, apply_multiplier(f, &MultiplierSymbol::ConjugatePoisson(y))?))
}

/// `U(z) = f∗P_y + i f∗Q_y` at an arbitrary point of the upper half-plane, from the
/// Fourier coefficients of periodic boundary data.
#[derive(Clone, Debug)]
pub struct SampledExtension {
    coeffs: Vec<Complex64>,
    x0: f64,
    period: f64,
}

impl SampledExtension {
    pub fn new(f: &Field<f64>) -> Result<Self> {
        check_line(f)?;
        check_mean(f)?;
        let g = f.grid();
        let cs = f.coefficients();
        let coeffs = (1..g.n() / 2).map(|k| 2.0 * cs[k]).collect();
        Ok(Self { coeffs, x0: -0.5 * g.period(), period: g.period() })
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let q = (c(0.0, 2.0 * std::f64::consts::PI / self.period) * (z - self.x0)).exp();
        self.coeffs.iter().rev().fold(c(0.0, 0.0), |acc, ck| (acc + ck) * q)
    }
}

/// Boundary data to factorize.
#[derive(Clone, Debug)]
pub enum FactorInput {
    Rational(RationalFunction),
    Sampled { f: Field<f64>, search: Option<Rect> },
}

/// Zeros of `U` inside `r`: read off exactly for rational input, by winding numbers otherwise.
pub fn find_zeros(input: &FactorInput, r: &Rect) -> Result<Vec<ZeroReport>> {
    match input {
        FactorInput::Rational(u) => {
            if u.is_zero() {
                return Ok(Vec::new());
            }
            Ok(u.zeros()
                .iter()
                .filter(|(z, _)| r.contains(*z))
                .map(|(z, m)| ZeroReport { re: z.re, im: z.im, multiplicity: *m })
                .collect())
        }
        FactorInput::Sampled { f, .. } => {
            let ext = SampledExtension::new(f)?;
            winding_zeros(&|z| ext.eval(z), r)
        }
    }
}

/// Parity report: `is_square` holds iff every zero has even multiplicity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SquareCertificate {
    pub is_square: bool,
    pub zeros: Vec<ZeroReport>,
    pub odd: Vec<ZeroReport>,
}

pub fn square_certificate(zeros: &[ZeroReport]) -> SquareCertificate {
    let odd: Vec<ZeroReport> = zeros.iter().copied().filter(|z| z.multiplicity % 2 == 1).collect();
    SquareCertificate { is_square: odd.is_empty(), zeros: zeros.to_vec(), odd }
}

/// [`square_certificate`] of a rational function over its whole upper half-plane.
pub fn rational_square_certificate(u: &RationalFunction) -> SquareCertificate {
    let zs: Vec<ZeroReport> = if u.is_zero() {
        Vec::new()
    } else {
        u.zeros().iter().map(|(z, m)| ZeroReport { re: z.re, im: z.im, multiplicity: *m }).collect()
    };
    square_certificate(&zs)
}

#[derive(Clone, Debug)]
pub struct FactorizationResult {
    pub omega: Field<f64>,
    pub gamma: Field<f64>,
    /// Boundary traces `Im V` and `Im W`, i.e. `Hω` and `Hγ`.
    pub h_omega: Field<f64>,
    pub h_gamma: Field<f64>,
    pub zero_report: Vec<ZeroReport>,
    pub blaschke_degree: u32,
    /// `‖f − (ωγ − HωHγ)‖₁ / ‖f‖₁` on the grid.
    pub residual_l1: f64,
    pub is_square: bool,
    /// Largest `‖Im V − H(Re V)‖₂ / ‖V‖₂` over `V` and `W`.
    pub hilbert_consistency: f64,
    /// Largest `||B| − 1|` over the boundary samples.
    pub blaschke_modulus_error: f64,
    /// For non-square data, `‖f − (ω² − (Hω)²)‖₁ / ‖f‖₁` for `ω = Re √U` continued along the same path.
    pub square_attempt_residual: Option<f64>,
}

/// Flips `(V, W)` together so that the largest `|ω|` sample is positive; ties go to the rightmost sample.
fn sign_gauge(v: &mut [Complex64], w: &mut [Complex64]) {
    let peak = v.iter().fold(0.0f64, |m, z| m.max(z.re.abs()));
    if peak == 0.0 {
        return;
    }
    let idx = v.iter().rposition(|z| z.re.abs() >= peak * (1.0 - 1e-9)).expect("peak exists");
    if v[idx].re < 0.0 {
        v.iter_mut().chain(w.iter_mut()).for_each(|z| *z = -*z);
    }
}

fn residual_l1(f: &[f64], v: &[Complex64], w: &[Complex64], weight: Option<&[f64]>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..f.len() {
        let wt = weight.map_or(1.0, |ws| ws[i]);
        num += (f[i] - (v[i] * w[i]).re).abs() * wt;
        den += f[i].abs() * wt;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn consistency(cg: &CayleyGrid, v: &[Complex64]) -> f64 {
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let h = cg.hilbert(&re);
    let diff: Vec<f64> = v.iter().zip(&h).map(|(z, hv)| z.im - hv).collect();
    let mags: Vec<f64> = v.iter().map(|z| z.norm()).collect();
    let n = cg.l2(&mags);
    if n == 0.0 {
        0.0
    } else {
        cg.l2(&diff) / n
    }
}

struct Traces {
    v: Vec<Complex64>,
    w: Vec<Complex64>,
}

/// `V = BΦ^{1/2}` and `W = Φ^{1/2}` on the line `Im z = y`.
fn traces(u: &dyn Fn(Complex64) -> Complex64, b: &Blaschke, z_ref: Complex64, y: f64, xs: &[f64]) -> Result<Traces> {
    let phi = |z: Complex64| u(z) / b.eval(z);
    let w = continued_sqrt(&phi, z_ref, y, xs)?;
    let v = w.iter().zip(xs).map(|(s, x)| s * b.eval(c(*x, y))).collect();
    Ok(Traces { v, w })
}

fn reference_point(zeros: &[ZeroReport]) -> Complex64 {
    c(0.0, 1.0 + zeros.iter().map(|z| z.point().norm()).fold(0.0, f64::max))
}

fn certify_zero_free(u: &dyn Fn(Complex64) -> Complex64, b: &Blaschke, r: &Rect) -> Result<()> {
    let phi = |z: Complex64| u(z) / b.eval(z);
    let w = winding_number(&phi, r)?;
    if w != 0 {
        return Err(LabError::ZeroFinding(format!("U/B still winds {w} times around the search box: a zero was missed")));
    }
    Ok(())
}

fn fields(grid: GridSpec, t: &Traces) -> Result<[Field<f64>; 4]> {
    let part = |v: &[Complex64], re: bool| -> Result<Field<f64>> {
        let vals: Vec<f64> = v.iter().map(|z| if re { z.re } else { z.im }).collect();
        Field::from_real(grid, &vals)
    };
    Ok([part(&t.v, true)?, part(&t.w, true)?, part(&t.v, false)?, part(&t.w, false)?])
}

fn zero_result(grid: GridSpec) -> FactorizationResult {
    FactorizationResult {
        omega: Field::zeros(grid),
        gamma: Field::zeros(grid),
        h_omega: Field::zeros(grid),
        h_gamma: Field::zeros(grid),
        zero_report: Vec::new(),
        blaschke_degree: 0,
        residual_l1: 0.0,
        is_square: true,
        hilbert_consistency: 0.0,
        blaschke_modulus_error: 0.0,
        square_attempt_residual: None,
    }
}

fn finish(res: FactorizationResult, tol: f64) -> Result<FactorizationResult> {
    if !(res.residual_l1 <= tol) {
        return Err(LabError::precondition(format!(
            "factorization residual {:e} exceeds tolerance {tol:e}",
            res.residual_l1
        )));
    }
    Ok(res)
}

/// Rational data: zeros are exact and the traces are evaluated on the real line itself.
fn factorize_rational(u: &RationalFunction, grid: GridSpec, tol: f64) -> Result<FactorizationResult> {
    if u.is_zero() {
        return Ok(zero_result(grid));
    }
    let eval = |z: Complex64| u.eval(z);
    let cert = rational_square_certificate(u);
    let zeros = cert.zeros.clone();
    let b = u.blaschke();
    let big = 4.0 * (1.0 + u.radius());
    certify_zero_free(&eval, &b, &Rect::new(-big, big, 1e-3, big)?)?;
    let z_ref = reference_point(&zeros);
    let xs: Vec<f64> = (0..grid.len()).map(|i| grid.coords(i)[0]).collect();
    let f: Vec<f64> = xs.iter().map(|x| u.boundary(*x)).collect();
    let mut t = traces(&eval, &b, z_ref, 0.0, &xs)?;
    sign_gauge(&mut t.v, &mut t.w);
    let residual = residual_l1(&f, &t.v, &t.w, None);
    let blaschke_modulus_error = xs.iter().map(|x| (b.eval(c(*x, 0.0)).norm() - 1.0).abs()).fold(0.0, f64::max);

    let cg = CayleyGrid::new(CAYLEY_POINTS);
    let tc = traces(&eval, &b, z_ref, 0.0, &cg.x)?;
    let hilbert_consistency = consistency(&cg, &tc.v).max(consistency(&cg, &tc.w));
    let square_attempt_residual = if cert.is_square {
        None
    } else {
        let s = continued_sqrt(&eval, z_ref, 0.0, &cg.x)?;
        let om: Vec<f64> = s.iter().map(|z| z.re).collect();
        let hom = cg.hilbert(&om);
        let fc: Vec<f64> = cg.x.iter().map(|x| u.boundary(*x)).collect();
        let diff: Vec<f64> = (0..cg.len()).map(|i| fc[i] - (om[i] * om[i] - hom[i] * hom[i])).collect();
        Some(cg.l1(&diff) / cg.l1(&fc))
    };
    let [omega, gamma, h_omega, h_gamma] = fields(grid, &t)?;
    finish(
        FactorizationResult {
            omega,
            gamma,
            h_omega,
            h_gamma,
            blaschke_degree: b.degree(),
            zero_report: zeros,
            residual_l1: residual,
            is_square: cert.is_square,
            hilbert_consistency,
            blaschke_modulus_error,
            square_attempt_residual,
        },
        tol,
    )
}

/// Default search box for sampled data: the central 90% of the period, heights `[4ε, L/4]`.
pub fn default_search_box(grid: &GridSpec) -> Rect {
    let l = grid.period();
    Rect { x0: -0.45 * l, x1: 0.45 * l, y0: 4.0 * boundary_height(grid), y1: 0.25 * l }
}

/// Extrapolation height `ε = L/(4N)` for sampled data.
pub fn boundary_height(grid: &GridSpec) -> f64 {
    grid.period() / (4.0 * grid.n() as f64)
}

/// Sampled data: traces at heights `ε` and `2ε`, combined by Richardson extrapolation `2V_ε − V_{2ε}`.
fn factorize_sampled(f: &Field<f64>, search: Option<Rect>, tol: f64) -> Result<FactorizationResult> {
    check_line(f)?;
    let grid = *f.grid();
    if f.max_imag() > 1e3 * f64::EPSILON * f.max_abs().max(1.0) {
        return Err(LabError::invalid("boundary data must be real"));
    }
    if f.max_abs() == 0.0 {
        return Ok(zero_result(grid));
    }
    let eps = boundary_height(&grid);
    let (p1, _) = poisson_extend(f, eps)?;
    let (p2, _) = poisson_extend(f, 2.0 * eps)?;
    let fv = f.re();
    let round: f64 = fv.iter().zip(p1.re().iter().zip(p2.re())).map(|(a, (b, c))| (a - (2.0 * b - c)).abs()).sum::<f64>()
        / fv.iter().map(|v| v.abs()).sum::<f64>();
    if round > tol {
        return Err(LabError::precondition(format!(
            "boundary data does not round-trip through the Poisson extension at height {eps:e} (residual {round:e})"
        )));
    }
    let ext = SampledExtension::new(f)?;
    let eval = |z: Complex64| ext.eval(z);
    let search = search.unwrap_or_else(|| default_search_box(&grid));
    let zeros = winding_zeros(&eval, &search)?;
    let cert = square_certificate(&zeros);
    let b = Blaschke::new(zeros.iter().map(|z| (z.point(), z.multiplicity)).collect());
    certify_zero_free(&eval, &b, &search)?;
    let z_ref = reference_point(&zeros);
    let xs: Vec<f64> = (0..grid.len()).map(|i| grid.coords(i)[0]).collect();
    let t1 = traces(&eval, &b, z_ref, eps, &xs)?;
    let t2 = traces(&eval, &b, z_ref, 2.0 * eps, &xs)?;
    let extrap = |a: &[Complex64], b2: &[Complex64]| -> Vec<Complex64> { a.iter().zip(b2).map(|(p, q)| 2.0 * p - q).collect() };
    let mut t = Traces { v: extrap(&t1.v, &t2.v), w: extrap(&t1.w, &t2.w) };
    sign_gauge(&mut t.v, &mut t.w);
    let residual = residual_l1(&fv, &t.v, &t.w, None);
    let blaschke_modulus_error = xs.iter().map(|x| (b.eval(c(*x, 0.0)).norm() - 1.0).abs()).fold(0.0, f64::max);
    let [omega, gamma, h_omega, h_gamma] = fields(grid, &t)?;
    let grid_consistency = |re: &Field<f64>, im: &Field<f64>| -> Result<f64> {
        let h = apply_multiplier(re, &MultiplierSymbol::Hilbert)?;
        let n = (re.norm_sq() + im.norm_sq()).sqrt();
        Ok(if n == 0.0 { 0.0 } else { h.sub(im)?.norm() / n })
    };
    let hilbert_consistency = grid_consistency(&omega, &h_omega)?.max(grid_consistency(&gamma, &h_gamma)?);
    let square_attempt_residual = if cert.is_square {
        None
    } else {
        let s1 = continued_sqrt(&eval, z_ref, eps, &xs)?;
        let s2 = continued_sqrt(&eval, z_ref, 2.0 * eps, &xs)?;
        let om: Vec<f64> = s1.iter().zip(&s2).map(|(p, q)| (2.0 * p - q).re).collect();
        let omf = Field::from_real(grid, &om)?;
        let hom = apply_multiplier(&omf, &MultiplierSymbol::Hilbert)?.re();
        let num: f64 = (0..om.len()).map(|i| (fv[i] - (om[i] * om[i] - hom[i] * hom[i])).abs()).sum();
        Some(num / fv.iter().map(|v| v.abs()).sum::<f64>())
    };
    finish(
        FactorizationResult {
            omega,
            gamma,
            h_omega,
            h_gamma,
            blaschke_degree: b.degree(),
            zero_report: zeros,
            residual_l1: residual,
            is_square: cert.is_square,
            hilbert_consistency,
            blaschke_modulus_error,
            square_attempt_residual,
        },
        tol,
    )
}

/// Factors boundary data as `f = ωγ − HωHγ`.
///
/// Rational input is sampled on `grid` (a 1-D grid); sampled input carries its
/// own grid and `grid` must match it. Fails when the reconstruction residual
/// exceeds `tol`.
pub fn factorize(input: &FactorInput, grid: &GridSpec, tol: f64) -> Result<FactorizationResult> {
    if grid.dim() != 1 {
        return Err(LabError::KindMismatch { kind: "factorization".into(), dim: grid.dim() });
    }
    match input {
        FactorInput::Rational(u) => factorize_rational(u, *grid, tol),
        FactorInput::Sampled { f, search } => {
            if f.grid() != grid {
                return Err(LabError::GridMismatch);
            }
            factorize_sampled(f, *search, tol)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_extension_of_single_mode() {
        let g = GridSpec::line(64, 2.0 * std::f64::consts::PI).unwrap();
        let f = Field::<f64>::from_fn(g, |p| c(p[0].cos(), 0.0)).unwrap();
        let y = g.spacing();
        let (p, q) = poisson_extend(&f, y).unwrap();
        let decay = (-y).exp();
        for i in 0..g.len() {
            let x = g.coords(i)[0];
            assert!((p.values()[i].re - decay * x.cos()).abs() < 1e-13);
            assert!((q.values()[i].re - decay * x.sin()).abs() < 1e-13);
        }
        let shifted = Field::<f64>::from_fn(g, |p| c(p[0].cos() + 0.1, 0.0)).unwrap();
        assert!(matches!(poisson_extend(&shifted, y), Err(LabError::NonzeroMean { .. })));
    }

    #[test]
    fn sampled_extension_matches_fft_extension() {
        let g = GridSpec::line(64, 2.0 * std::f64::consts::PI).unwrap();
        let f = Field::<f64>::from_fn(g, |p| c((2.0 * p[0]).cos() - 0.5 * p[0].sin(), 0.0)).unwrap();
        let ext = SampledExtension::new(&f).unwrap();
        let (p, q) = poisson_extend(&f, 0.3).unwrap();
        for i in 0..g.len() {
            let u = ext.eval(c(g.coords(i)[0], 0.3));
            assert!((u - c(p.values()[i].re, q.values()[i].re)).norm() < 1e-13);
        }
    }

    #[test]
    fn closed_form_factorization() {
        let g = GridSpec::line(2048, 200.0).unwrap();
        let u = RationalFunction::pole_power(c(0.0, -1.0), 2, c(1.0, 0.0)).unwrap();
        let r = factorize(&FactorInput::Rational(u), &g, 1e-8).unwrap();
        let want = Field::<f64>::from_fn(g, |p| c(p[0] / (p[0] * p[0] + 1.0), 0.0)).unwrap();
        assert!(r.omega.rel_l2_diff(&want) < 1e-12);
        assert!(r.gamma.rel_l2_diff(&want) < 1e-12);
        assert!(r.is_square && r.blaschke_degree == 0);
        assert!(r.residual_l1 < 1e-12);
        assert!(r.hilbert_consistency < 1e-10, "{}", r.hilbert_consistency);
    }

    #[test]
    fn odd_zero_is_not_a_square() {
        let g = GridSpec::line(2048, 200.0).unwrap();
        let u = RationalFunction::new(vec![(c(0.0, 1.0), 1)], vec![(c(0.0, -1.0), 3)], c(1.0, 0.0)).unwrap();
        let r = factorize(&FactorInput::Rational(u), &g, 1e-6).unwrap();
        assert!(!r.is_square);
        assert_eq!(r.blaschke_degree, 1);
        assert!(r.residual_l1 <= 1e-6);
        assert!(r.blaschke_modulus_error < 1e-12);
        let sq = r.square_attempt_residual.unwrap();
        assert!(sq >= 0.1, "{sq}");
        assert!(r.hilbert_consistency < 1e-6, "{}", r.hilbert_consistency);
    }

    #[test]
    fn zero_data() {
        let g = GridSpec::line(64, 20.0).unwrap();
        let r = factorize(&FactorInput::Sampled { f: Field::zeros(g), search: None }, &g, 1e-6).unwrap();
        assert_eq!(r.omega.max_abs(), 0.0);
        let u = RationalFunction::pole_power(c(0.0, -1.0), 2, c(0.0, 0.0)).unwrap();
        assert_eq!(factorize(&FactorInput::Rational(u), &g, 1e-6).unwrap().gamma.max_abs(), 0.0);
    }

    #[test]
    fn sampled_odd_zero() {
        // U = e^{2iz} − ½e^{iz} on the circle vanishes at z = i·ln 2.
        let g = GridSpec::line(1024, 2.0 * std::f64::consts::PI).unwrap();
        let f = Field::<f64>::from_fn(g, |p| c((2.0 * p[0]).cos() - 0.5 * p[0].cos(), 0.0)).unwrap();
        let search = Rect::new(-2.0, 2.0, 0.05, 3.0).unwrap();
        let input = FactorInput::Sampled { f, search: Some(search) };
        let zs = find_zeros(&input, &search).unwrap();
        assert_eq!(zs.len(), 1);
        assert!((zs[0].point() - c(0.0, 2f64.ln())).norm() < 1e-6);
        assert_eq!(zs[0].multiplicity, 1);
    }
}
