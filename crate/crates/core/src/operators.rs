//! The operators `T_b`, their doubling `T̃_b`, and spectral estimates.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quantities::{paracommutator_limit, QuantityDescriptor, QuantityKind, Spectral, SymbolA};
use crate::scalar::Scalar;
use crate::spectral::{Field, GridSpec, MultiplierSymbol};

/// Largest realified dimension assembled densely.
pub const DENSE_CAPACITY: usize = 4096;

/// A real-linear map on `ℝ^dim`.
pub trait RealLinearOperator<T: Scalar> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T]) -> Vec<T>;
    fn apply_transpose(&self, x: &[T]) -> Vec<T>;
}

/// Dense real matrix viewed as an operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator(pub DMatrix<f64>);

impl RealLinearOperator<f64> for DenseOperator {
    fn dim(&self) -> usize {
        self.0.ncols()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.0 * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        (self.0.transpose() * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
    }
}

/// Coordinates of a field in the realified space, scaled so that the Euclidean
/// dot product equals `⟨f, g⟩ = Re Σ f·conj(g)·Δx`.
pub fn realify<T: Scalar>(f: &Field<T>, complex: bool) -> Vec<T> {
    let s = T::of(f.grid().cell_volume().sqrt());
    let mut out: Vec<T> = f.values().iter().map(|v| v.re * s).collect();
    if complex {
        out.extend(f.values().iter().map(|v| v.im * s));
    }
    out
}

/// Inverse of [`realify`].
pub fn unrealify<T: Scalar>(grid: &GridSpec, complex: bool, x: &[T]) -> Field<T> {
    let n = grid.len();
    let s = T::one() / T::of(grid.cell_volume().sqrt());
    let values = (0..n)
        .map(|i| Complex::new(x[i] * s, if complex { x[n + i] * s } else { T::zero() }))
        .collect();
    Field::new(*grid, values).expect("finite realified vector")
}

#[derive(Clone)]
enum Repr<T> {
    Quantity {
        desc: QuantityDescriptor,
        b: Field<T>,
        b_spec: Vec<Complex<T>>,
        kernel: Option<Arc<Vec<(usize, usize, Complex<T>)>>>,
    },
    RawJacobian {
        grid: GridSpec,
        b: Field<T>,
        b_spec: Vec<Complex<T>>,
    },
    Doubled(Arc<OperatorHandle<T>>),
    Adjoint(Arc<OperatorHandle<T>>),
}

/// `T_b` for a quantity and a real symbol field `b`, or a derived operator.
#[derive(Clone)]
pub struct OperatorHandle<T> {
    repr: Repr<T>,
}

fn real_symbol<T: Scalar>(grid: &GridSpec, b: &Field<T>) -> Result<Field<T>> {
    if b.grid() != grid {
        return Err(LabError::GridMismatch);
    }
    if let Some(index) = b.values().iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(LabError::NonFinite { index });
    }
    let tol = T::epsilon() * T::of(1e3) * b.max_abs().max(T::one());
    if b.max_imag() > tol {
        return Err(LabError::invalid("symbol field b must be real"));
    }
    Ok(b.real_part())
}

/// Hermitian part `½(A(ξ,η) + conj A(η,ξ))` tabulated on active pairs with `ξ − η` representable.
fn paracommutator_kernel<T: Scalar>(grid: &GridSpec, a: &SymbolA, b_spec: &[Complex<T>]) -> Vec<(usize, usize, Complex<T>)> {
    let active: Vec<usize> = (0..grid.len()).filter(|&p| grid.is_active(p)).collect();
    let inv = 1.0 / grid.len() as f64;
    let mut out = Vec::new();
    for &p in &active {
        let kp = grid.mode(p);
        let xi = grid.wavevector(p);
        for &q in &active {
            let kq = grid.mode(q);
            let Some(r) = grid.mode_position([kp[0] - kq[0], kp[1] - kq[1]]) else {
                continue;
            };
            if grid.is_nyquist(r) {
                continue;
            }
            let bv = b_spec[r];
            if bv == Complex::new(T::zero(), T::zero()) {
                continue;
            }
            let eta = grid.wavevector(q);
            let ah = (a.eval(xi, eta) + a.eval(eta, xi).conj()) * 0.5 * inv;
            out.push((p, q, bv * Complex::new(T::of(ah.re), T::of(ah.im))));
        }
    }
    out
}

impl<T: Scalar> OperatorHandle<T> {
    /// `T_b` for the descriptor; `b` must be real.
    pub fn new(desc: &QuantityDescriptor, b: &Field<T>) -> Result<Self> {
        let b = real_symbol(desc.grid(), b)?;
        let b_spec = b.spectrum();
        let kernel = match desc.kind() {
            QuantityKind::Paracommutator(a) => {
                let limit = paracommutator_limit(desc.grid());
                let support = b.support_radius(T::of(1e-12));
                if support > limit {
                    return Err(LabError::SupportTooLarge { support, limit });
                }
                Some(Arc::new(paracommutator_kernel(desc.grid(), a, &b_spec)))
            }
            _ => None,
        };
        Ok(Self { repr: Repr::Quantity { desc: desc.clone(), b, b_spec, kernel } })
    }

    /// The antisymmetric real-notation Jacobian operator `R₁[b,R₂] − R₂[b,R₁]` on real planar fields.
    pub fn raw_jacobian(grid: &GridSpec, b: &Field<T>) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(LabError::KindMismatch { kind: "raw_jacobian".into(), dim: grid.dim() });
        }
        let b = real_symbol(grid, b)?;
        let b_spec = b.spectrum();
        Ok(Self { repr: Repr::RawJacobian { grid: *grid, b, b_spec } })
    }

    /// Same operator family with `b` replaced by `s·b`.
    pub fn scaled(&self, s: T) -> Result<Self> {
        match &self.repr {
            Repr::Quantity { desc, b, .. } => Self::new(desc, &b.scale(s)),
            Repr::RawJacobian { grid, b, .. } => Self::raw_jacobian(grid, &b.scale(s)),
            Repr::Doubled(inner) => Ok(self_adjointify(&inner.scaled(s)?)),
            Repr::Adjoint(inner) => Ok(adjoint(&inner.scaled(s)?)),
        }
    }

    pub fn descriptor(&self) -> Option<&QuantityDescriptor> {
        match &self.repr {
            Repr::Quantity { desc, .. } => Some(desc),
            _ => None,
        }
    }

    /// The symbol field `b` of the underlying family.
    pub fn symbol_field(&self) -> &Field<T> {
        match &self.repr {
            Repr::Quantity { b, .. } | Repr::RawJacobian { b, .. } => b,
            Repr::Doubled(inner) | Repr::Adjoint(inner) => inner.symbol_field(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.symbol_field().grid()
    }

    /// Whether the space consists of complex fields (before any doubling).
    pub fn is_complex(&self) -> bool {
        match &self.repr {
            Repr::Quantity { desc, .. } => desc.is_complex(),
            Repr::RawJacobian { .. } => false,
            Repr::Doubled(inner) | Repr::Adjoint(inner) => inner.is_complex(),
        }
    }

    pub fn is_doubled(&self) -> bool {
        match &self.repr {
            Repr::Doubled(_) => true,
            Repr::Adjoint(inner) => inner.is_doubled(),
            _ => false,
        }
    }

    pub fn realified_dim(&self) -> usize {
        match &self.repr {
            Repr::Doubled(inner) => 2 * inner.realified_dim(),
            Repr::Adjoint(inner) => inner.realified_dim(),
            _ => {
                if self.is_complex() {
                    2 * self.grid().len()
                } else {
                    self.grid().len()
                }
            }
        }
    }

    /// Whether `T_b` is self-adjoint by construction.
    pub fn is_self_adjoint(&self) -> bool {
        match &self.repr {
            Repr::Quantity { .. } | Repr::Doubled(_) => true,
            Repr::RawJacobian { .. } => false,
            Repr::Adjoint(inner) => inner.is_self_adjoint(),
        }
    }

    fn project(&self, w: &Field<T>) -> Result<Field<T>> {
        if w.grid() != self.grid() {
            return Err(LabError::GridMismatch);
        }
        if self.is_complex() {
            Ok(w.project_active())
        } else {
            let tol = T::epsilon() * T::of(1e3) * w.max_abs().max(T::one());
            if w.max_imag() > tol {
                return Err(LabError::invalid("operator acts on real fields"));
            }
            Ok(w.real_part().project_active())
        }
    }

    fn finish(&self, spec: Vec<Complex<T>>) -> Field<T> {
        let grid = *self.grid();
        let mut spec = spec;
        for (p, v) in spec.iter_mut().enumerate() {
            if !grid.is_active(p) {
                *v = Complex::new(T::zero(), T::zero());
            }
        }
        let f = Field::from_spectrum(grid, spec);
        if self.is_complex() {
            f
        } else {
            f.real_part()
        }
    }

    /// `T_b w` (or `T_b^* w` with `transpose`) for undoubled handles.
    fn apply_field_inner(&self, w: &Field<T>, transpose: bool) -> Result<Field<T>> {
        match &self.repr {
            Repr::Quantity { desc, b_spec, kernel, .. } => {
                let w = self.project(w)?;
                let s = w.spectrum();
                Ok(self.finish(apply_quantity(desc, b_spec, kernel.as_deref(), &s)))
            }
            Repr::RawJacobian { grid, b_spec, .. } => {
                let w = self.project(w)?;
                let sp = Spectral::new(grid);
                let s = w.spectrum();
                let mut out = riesz_sandwich(&sp, b_spec, &s, 1, 2);
                sub_into(&mut out, &riesz_sandwich(&sp, b_spec, &s, 2, 1));
                if transpose {
                    out.iter_mut().for_each(|v| *v = -*v);
                }
                Ok(self.finish(out))
            }
            Repr::Adjoint(inner) => inner.apply_field_inner(w, !transpose),
            Repr::Doubled(_) => Err(LabError::invalid("doubled operator acts on pairs; use apply_pair")),
        }
    }

    /// `T_b w`.
    pub fn apply_field(&self, w: &Field<T>) -> Result<Field<T>> {
        self.apply_field_inner(w, false)
    }

    /// `T_b^* w`.
    pub fn apply_adjoint_field(&self, w: &Field<T>) -> Result<Field<T>> {
        self.apply_field_inner(w, true)
    }

    /// `T̃_b(f, g) = (T_b^* g, T_b f)` for doubled handles.
    pub fn apply_pair(&self, f: &Field<T>, g: &Field<T>) -> Result<(Field<T>, Field<T>)> {
        match &self.repr {
            Repr::Doubled(inner) => Ok((inner.apply_adjoint_field(g)?, inner.apply_field(f)?)),
            Repr::Adjoint(inner) if inner.is_doubled() => inner.apply_pair(f, g),
            _ => Err(LabError::invalid("apply_pair needs a doubled operator")),
        }
    }

    fn apply_vec(&self, x: &[T], transpose: bool) -> Vec<T> {
        match &self.repr {
            Repr::Doubled(inner) => {
                let half = inner.realified_dim();
                let (f, g) = x.split_at(half);
                let mut out = inner.apply_vec(g, true);
                out.extend(inner.apply_vec(f, false));
                out
            }
            Repr::Adjoint(inner) => inner.apply_vec(x, !transpose),
            _ => {
                let complex = self.is_complex();
                let w = unrealify(self.grid(), complex, x);
                let y = self.apply_field_inner(&w, transpose).expect("realified input lies in the space");
                realify(&y, complex)
            }
        }
    }
}

impl<T: Scalar> RealLinearOperator<T> for OperatorHandle<T> {
    fn dim(&self) -> usize {
        self.realified_dim()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.apply_vec(x, false)
    }

    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        self.apply_vec(x, true)
    }
}

fn sub_into<T: Scalar>(acc: &mut [Complex<T>], x: &[Complex<T>]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a = *a - *v;
    }
}

fn add_into<T: Scalar>(acc: &mut [Complex<T>], x: &[Complex<T>]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a = *a + *v;
    }
}

/// `R_j M_b R_k` on a spectrum.
fn riesz_sandwich<T: Scalar>(sp: &Spectral, b: &[Complex<T>], s: &[Complex<T>], j: usize, k: usize) -> Vec<Complex<T>> {
    let inner = sp.product(b, &sp.apply(s, &MultiplierSymbol::Riesz(k)));
    sp.apply(&inner, &MultiplierSymbol::Riesz(j))
}

/// `m₁ M_b m₂` on a spectrum.
fn sandwich<T: Scalar>(
    sp: &Spectral,
    b: &[Complex<T>],
    s: &[Complex<T>],
    left: &MultiplierSymbol,
    right: &MultiplierSymbol,
) -> Vec<Complex<T>> {
    sp.apply(&sp.product(b, &sp.apply(s, right)), left)
}

/// Wu pair block `K` (or `Kᵀ`) applied to the spectrum of a real field.
fn wu_block<T: Scalar>(sp: &Spectral, kind: &QuantityKind, b: &[Complex<T>], s: &[Complex<T>], transpose: bool) -> Vec<Complex<T>> {
    match kind {
        QuantityKind::WuScalar => {
            let mut out = sp.product(b, s);
            for j in 1..=sp.grid.dim() {
                add_into(&mut out, &riesz_sandwich(sp, b, s, j, j));
            }
            out
        }
        QuantityKind::WuVector(j) => {
            let r = MultiplierSymbol::Riesz(*j);
            let mut out = sp.product(b, &sp.apply(s, &r));
            sub_into(&mut out, &sp.apply(&sp.product(b, s), &r));
            out
        }
        QuantityKind::WuBivector(j, k) => {
            let mut out = riesz_sandwich(sp, b, s, *j, *k);
            sub_into(&mut out, &riesz_sandwich(sp, b, s, *k, *j));
            if transpose {
                out.iter_mut().for_each(|v| *v = -*v);
            }
            out
        }
        _ => unreachable!("pair block requested for a non-pair kind"),
    }
}

fn apply_quantity<T: Scalar>(
    desc: &QuantityDescriptor,
    b: &[Complex<T>],
    kernel: Option<&Vec<(usize, usize, Complex<T>)>>,
    s: &[Complex<T>],
) -> Vec<Complex<T>> {
    let grid = desc.grid();
    let sp = Spectral::new(grid);
    let half = T::of(0.5);
    match desc.kind() {
        QuantityKind::PlanarJacobian => {
            // conj((𝒮 M_b − M_b 𝒮) conj(𝒮ω))
            let beurling = MultiplierSymbol::Beurling;
            let a = sp.conj(&sp.apply(s, &beurling));
            let mut u = sp.apply(&sp.product(b, &a), &beurling);
            sub_into(&mut u, &sp.product(b, &sp.apply(&a, &beurling)));
            sp.conj(&u)
        }
        QuantityKind::LineQ1 | QuantityKind::RieszCombination(_) => {
            let mut out = sp.product(b, s);
            for j in 1..=grid.dim() {
                add_into(&mut out, &riesz_sandwich(&sp, b, s, j, j));
            }
            out
        }
        QuantityKind::LineQ2 => {
            let h = MultiplierSymbol::Hilbert;
            let mut out = sp.product(b, &sp.apply(s, &h));
            sub_into(&mut out, &sp.apply(&sp.product(b, s), &h));
            out
        }
        QuantityKind::MongeAmpere => {
            let r = |j, k| MultiplierSymbol::RieszProduct(j, k);
            let mut out = sandwich(&sp, b, s, &r(1, 1), &r(2, 2));
            add_into(&mut out, &sandwich(&sp, b, s, &r(2, 2), &r(1, 1)));
            out.iter_mut().for_each(|v| *v = *v * half);
            sub_into(&mut out, &sandwich(&sp, b, s, &r(1, 2), &r(1, 2)));
            out
        }
        kind @ (QuantityKind::WuScalar | QuantityKind::WuVector(_) | QuantityKind::WuBivector(..)) => {
            // (ω, γ) ↦ (½Kᵀγ, ½Kω), encoded as ω + iγ
            let om = sp.re(s);
            let ga = sp.im(s);
            let first = wu_block(&sp, kind, b, &ga, true);
            let second = wu_block(&sp, kind, b, &om, false);
            let i_half = Complex::new(T::zero(), half);
            first.iter().zip(&second).map(|(a, c)| *a * half + *c * i_half).collect()
        }
        QuantityKind::Paracommutator(_) => {
            let mut out = vec![Complex::new(T::zero(), T::zero()); s.len()];
            for &(p, q, k) in kernel.expect("paracommutator kernel built at construction").iter() {
                out[p] = out[p] + k * s[q];
            }
            out
        }
    }
}

/// `T_b w`.
pub fn apply_tb<T: Scalar>(h: &OperatorHandle<T>, w: &Field<T>) -> Result<Field<T>> {
    h.apply_field(w)
}

/// The adjoint `T_b^*` with respect to the real inner product.
pub fn adjoint<T: Scalar>(h: &OperatorHandle<T>) -> OperatorHandle<T> {
    OperatorHandle { repr: Repr::Adjoint(Arc::new(h.clone())) }
}

/// `T̃_b(f, g) = (T_b^* g, T_b f)` on `H × H`.
pub fn self_adjointify<T: Scalar>(h: &OperatorHandle<T>) -> OperatorHandle<T> {
    OperatorHandle { repr: Repr::Doubled(Arc::new(h.clone())) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 5000, seed: 0x5EED }
    }
}

/// Result of an iterative spectral estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const WINDOW: usize = 10;

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn normalize<T: Scalar>(v: &mut [T]) -> T {
    let n = dot(v, v).sqrt();
    if n > T::zero() {
        v.iter_mut().for_each(|x| *x = *x / n);
    }
    n
}

fn start_vector<T: Scalar>(dim: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<T> = (0..dim)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            T::of(x)
        })
        .collect();
    normalize(&mut v);
    v
}

/// Power iteration for the top eigenpair of a positive semidefinite map, by Rayleigh quotients.
fn power_top<T: Scalar>(dim: usize, map: impl Fn(&[T]) -> Vec<T>, opts: &PowerOptions) -> (SpectralEstimate, Vec<T>) {
    if dim == 0 {
        return (SpectralEstimate { value: 0.0, iterations: 0, converged: true }, Vec::new());
    }
    let tol = opts.tol.max(100.0 * T::epsilon().f64());
    let mut v = start_vector::<T>(dim, opts.seed);
    let mut history: Vec<f64> = Vec::with_capacity(opts.max_iter.min(1 << 16));
    for it in 1..=opts.max_iter {
        let mut w = map(&v);
        let mu = dot(&v, &w).f64();
        let norm = normalize(&mut w);
        if norm == T::zero() {
            return (SpectralEstimate { value: 0.0, iterations: it, converged: true }, v);
        }
        history.push(mu);
        if history.len() > WINDOW {
            let old = history[history.len() - 1 - WINDOW];
            if (mu - old).abs() <= tol * mu.abs().max(f64::MIN_POSITIVE) {
                return (SpectralEstimate { value: mu, iterations: it, converged: true }, w);
            }
        }
        v = w;
    }
    let value = *history.last().unwrap_or(&0.0);
    (SpectralEstimate { value, iterations: opts.max_iter, converged: false }, v)
}

/// `‖T‖ = √λmax(TᵀT)` by power iteration from a seeded random start.
///
/// Tolerances below the scalar's resolution are raised to `100 ε`.
pub fn operator_norm<T: Scalar, O: RealLinearOperator<T> + ?Sized>(op: &O, opts: &PowerOptions) -> SpectralEstimate {
    let (est, _) = power_top(op.dim(), |x| op.apply_transpose(&op.apply(x)), opts);
    SpectralEstimate { value: est.value.max(0.0).sqrt(), ..est }
}

/// Top signed eigenvalue of `(T + Tᵀ)/2` with a unit eigenvector, by shifted power iteration.
pub fn top_eigenpair<T: Scalar, O: RealLinearOperator<T> + ?Sized>(op: &O, opts: &PowerOptions) -> (SpectralEstimate, Vec<T>) {
    let sym = |x: &[T]| -> Vec<T> {
        let a = op.apply(x);
        let b = op.apply_transpose(x);
        a.iter().zip(&b).map(|(p, q)| (*p + *q) * T::of(0.5)).collect()
    };
    let loose = PowerOptions { tol: 1e-4, max_iter: 200, ..*opts };
    let bound = power_top(op.dim(), |x| sym(&sym(x)), &loose).0.value.max(0.0).sqrt();
    if bound == 0.0 {
        let v = start_vector::<T>(op.dim(), opts.seed);
        return (SpectralEstimate { value: 0.0, iterations: 0, converged: true }, v);
    }
    let shift = T::of(1.05 * bound);
    let (est, v) = power_top(op.dim(), |x| sym(x).iter().zip(x).map(|(a, b)| *a + shift * *b).collect(), opts);
    (SpectralEstimate { value: est.value - shift.f64(), ..est }, v)
}

/// `sup_{‖f‖=1} ⟨Tf, f⟩`, the top signed eigenvalue of `(T + Tᵀ)/2`.
pub fn numerical_radius<T: Scalar, O: RealLinearOperator<T> + ?Sized>(op: &O, opts: &PowerOptions) -> SpectralEstimate {
    top_eigenpair(op, opts).0
}

/// Dense realified matrix of an operator, column by column.
pub fn assemble_dense<T: Scalar, O: RealLinearOperator<T> + ?Sized>(op: &O) -> Result<DMatrix<f64>> {
    let n = op.dim();
    if n > DENSE_CAPACITY {
        return Err(LabError::Capacity { dim: n, cap: DENSE_CAPACITY });
    }
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        let col = op.apply(&e);
        e[j] = T::zero();
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = v.f64();
        }
    }
    Ok(m)
}

/// `max |M − Mᵀ| / max |M|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

/// Eigen-decomposition of the symmetric part of a dense matrix, eigenvalues descending.
pub fn symmetric_spectrum(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Orthonormal eigenvectors of a self-adjoint operator with eigenvalue in `[1 − tol, 1 + tol]`.
pub fn fixed_vectors<T: Scalar, O: RealLinearOperator<T> + ?Sized>(op: &O, eig_tol: f64) -> Result<Vec<Vec<f64>>> {
    let m = assemble_dense(op)?;
    let asym = asymmetry(&m);
    if asym > 1e-8 {
        return Err(LabError::precondition(format!("operator is not self-adjoint (asymmetry {asym:.3e})")));
    }
    let (values, vectors) = symmetric_spectrum(&m);
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, v)| (**v - 1.0).abs() <= eig_tol)
        .map(|(c, _)| vectors.column(c).iter().copied().collect())
        .collect())
}

/// `ker(I − T_b)` as orthonormal fields, by dense assembly and a full symmetric eigensolve.
pub fn fixed_space<T: Scalar>(h: &OperatorHandle<T>, eig_tol: f64) -> Result<Vec<Field<T>>> {
    if h.is_doubled() {
        return Err(LabError::invalid("fixed_space returns fields; use fixed_vectors for doubled operators"));
    }
    let complex = h.is_complex();
    Ok(fixed_vectors(h, eig_tol)?
        .into_iter()
        .map(|v| {
            let x: Vec<T> = v.into_iter().map(T::of).collect();
            unrealify(h.grid(), complex, &x)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantities::eval_quantity;
    use crate::spectral::{random_field, random_real_field};
    use std::f64::consts::PI;

    fn single_mode_b(grid: &GridSpec) -> Field<f64> {
        Field::from_fn(*grid, |[x, y]| Complex::new((x + 2.0 * y).cos(), 0.0)).unwrap()
    }

    #[test]
    fn dense_two_by_two_norm() {
        let op = DenseOperator(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let est = operator_norm(&op, &PowerOptions::default());
        assert!((est.value - 1.0).abs() < 1e-8 && est.converged);
        let rad = numerical_radius(&op, &PowerOptions::default());
        assert!((rad.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_operator() {
        let op = DenseOperator(DMatrix::zeros(3, 3));
        assert_eq!(operator_norm(&op, &PowerOptions::default()).value, 0.0);
        assert_eq!(numerical_radius(&op, &PowerOptions::default()).value, 0.0);
    }

    #[test]
    fn simple_operator_radius() {
        let op = DenseOperator(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert!((numerical_radius(&op, &PowerOptions::default()).value - 1.0).abs() < 1e-8);
        let op = DenseOperator(DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 3.0]));
        assert!((numerical_radius(&op, &PowerOptions::default()).value - 3.0).abs() < 1e-7);
    }

    #[test]
    fn realify_round_trip_and_inner_product() {
        let g = GridSpec::plane(8, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field::<f64, _>(&g, 3, false, &mut rng);
        let h = random_field::<f64, _>(&g, 3, false, &mut rng);
        let (x, y) = (realify(&f, true), realify(&h, true));
        assert!((dot(&x, &y) - f.inner(&h)).abs() < 1e-14);
        assert!(unrealify(&g, true, &x).max_abs_diff(&f) < 1e-14);
    }

    #[test]
    fn constant_symbol_gives_zero_operator() {
        let g = GridSpec::plane(16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_field::<f64, _>(&g, 5, false, &mut rng);
        let wr = w.real_part();
        let c = Field::constant(g, Complex::new(1.7, 0.0));
        for name in ["planar_jacobian", "riesz_combination(2)", "monge_ampere", "wu_scalar", "wu_vector(1)", "wu_bivector(1,2)"] {
            let d = QuantityDescriptor::parse(name, g).unwrap();
            let h = OperatorHandle::new(&d, &c).unwrap();
            let input = if d.is_complex() { &w } else { &wr };
            assert!(h.apply_field(input).unwrap().max_abs() < 1e-12, "{name}");
        }
    }

    #[test]
    fn planar_literal_formula_is_self_adjoint_sandwich() {
        let g = GridSpec::plane(16, 2.0 * PI).unwrap();
        let d = QuantityDescriptor::parse("planar_jacobian", g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_real_field::<f64, _>(&g, 4, &mut rng);
        let w = random_field::<f64, _>(&g, 6, false, &mut rng);
        let h = OperatorHandle::new(&d, &b).unwrap();
        let s = MultiplierSymbol::Beurling;
        let sw = crate::spectral::apply_multiplier(&w, &s).unwrap();
        let bsw = crate::spectral::dealiased_product(&b, &sw).unwrap();
        let sstar = crate::spectral::apply_multiplier(&bsw, &MultiplierSymbol::BeurlingConjugate).unwrap();
        let expect = sstar.sub(&crate::spectral::dealiased_product(&b, &w).unwrap()).unwrap().project_active();
        assert!(h.apply_field(&w).unwrap().rel_l2_diff(&expect) < 1e-12);
    }

    #[test]
    fn pairing_identity_on_every_kind() {
        let plane = GridSpec::plane(16, 2.0 * PI).unwrap();
        let line = GridSpec::line(32, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (name, g) in [
            ("planar_jacobian", plane),
            ("line_q1", line),
            ("line_q2", line),
            ("riesz_combination(2)", plane),
            ("wu_scalar", line),
            ("wu_vector(2)", plane),
            ("wu_bivector(1,2)", plane),
            ("monge_ampere", plane),
            ("paracommutator:wu_m1", plane),
            ("paracommutator:commutator(hilbert)", line),
        ] {
            let d = QuantityDescriptor::parse(name, g).unwrap();
            let b = random_real_field::<f64, _>(&g, g.n() / 4, &mut rng);
            let w = random_field::<f64, _>(&g, g.n() / 2, !d.is_complex(), &mut rng);
            let h = OperatorHandle::new(&d, &b).unwrap();
            let lhs = h.apply_field(&w).unwrap().inner(&w);
            let rhs = b.inner(&eval_quantity(&d, &w).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-3), "{name}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn raw_jacobian_is_antisymmetric_and_doubles_to_bivector() {
        let g = GridSpec::plane(16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = random_real_field::<f64, _>(&g, 4, &mut rng);
        let f = random_real_field::<f64, _>(&g, 7, &mut rng);
        let k = random_real_field::<f64, _>(&g, 7, &mut rng);
        let t = OperatorHandle::raw_jacobian(&g, &b).unwrap();
        let lhs = t.apply_field(&f).unwrap().inner(&k);
        let rhs = -f.inner(&t.apply_field(&k).unwrap());
        assert!((lhs - rhs).abs() < 1e-12);
        let doubled = self_adjointify(&t);
        let (p, q) = doubled.apply_pair(&f, &k).unwrap();
        let biv = OperatorHandle::new(&QuantityDescriptor::parse("wu_bivector(1,2)", g).unwrap(), &b).unwrap();
        let w = biv.apply_field(&crate::quantities::encode_pair(&f, &k).unwrap()).unwrap();
        assert!(p.scale(0.5).max_abs_diff(&w.real_part()) < 1e-12);
        assert!(q.scale(0.5).max_abs_diff(&w.imag_part()) < 1e-12);
    }

    #[test]
    fn jacobian_norm_matches_dense() {
        let g = GridSpec::plane(8, 2.0 * PI).unwrap();
        let d = QuantityDescriptor::parse("planar_jacobian", g).unwrap();
        let h = OperatorHandle::new(&d, &single_mode_b(&g)).unwrap();
        let m = assemble_dense(&h).unwrap();
        assert!(asymmetry(&m) < 1e-12);
        let (vals, _) = symmetric_spectrum(&m);
        let dense = vals[0].abs().max(vals[vals.len() - 1].abs());
        let est = operator_norm(&h, &PowerOptions::default());
        assert!((est.value - dense).abs() < 1e-6 * dense, "{} vs {dense}", est.value);
        let rad = numerical_radius(&h, &PowerOptions::default());
        assert!((rad.value - vals[0]).abs() < 1e-6 * dense, "{} vs {}", rad.value, vals[0]);
    }

    #[test]
    fn capacity_is_enforced() {
        let g = GridSpec::plane(64, 1.0).unwrap();
        let d = QuantityDescriptor::parse("planar_jacobian", g).unwrap();
        let h = OperatorHandle::new(&d, &Field::<f64>::zeros(g)).unwrap();
        assert!(matches!(fixed_space(&h, 1e-8), Err(LabError::Capacity { dim: 8192, cap: 4096 })));
    }
}
