//! Minimum-norm solutions of `Qω = f`, Lagrange multipliers and the `X_Q`, `X_Q*` norms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::operators::{realify, top_eigenpair, unrealify, OperatorHandle, PowerOptions, RealLinearOperator, SpectralEstimate};
use crate::quantities::{eval_quantity, QuantityDescriptor, QuantityKind};
use crate::scalar::Scalar;
use crate::spectral::{random_real_field, Field};

/// A quadratic map `Q: ℝ^h → ℝ^x` together with its operator family `b ↦ T_b`.
///
/// `H` carries the Euclidean inner product. Data vectors `f` and multipliers `b`
/// live in `ℝ^x` and are paired by [`QuadraticProblem::pairing`], with
/// `pairing(b, Q(w)) = w·T_b w` and `T_b` self-adjoint.
pub trait QuadraticProblem<T: Scalar> {
    fn h_dim(&self) -> usize;
    fn x_dim(&self) -> usize;
    fn quantity(&self, w: &[T]) -> Vec<T>;
    fn apply_tb(&self, b: &[T], w: &[T]) -> Vec<T>;
    fn pairing(&self, b: &[T], f: &[T]) -> T;

    /// Picks a representative of `w` modulo the symmetries that leave `Q` unchanged.
    fn fix_gauge(&self, w: &mut [T]);

    /// Seeded sample of a data-space direction, used for multiplier search.
    fn random_x(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        (0..self.x_dim())
            .map(|_| {
                let v: f64 = StandardNormal.sample(rng);
                T::of(v)
            })
            .collect()
    }

    fn x_norm(&self, f: &[T]) -> T {
        self.pairing(f, f).max(T::zero()).sqrt()
    }
}

/// `w ↦ T_b w` for a fixed multiplier, as a linear operator.
pub struct MultiplierOperator<'a, T, P: ?Sized> {
    pub problem: &'a P,
    pub b: &'a [T],
}

impl<T: Scalar, P: QuadraticProblem<T> + ?Sized> RealLinearOperator<T> for MultiplierOperator<'_, T, P> {
    fn dim(&self) -> usize {
        self.problem.h_dim()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.problem.apply_tb(self.b, x)
    }

    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        self.problem.apply_tb(self.b, x)
    }
}

/// Grid quantity as a [`QuadraticProblem`]: `H` in realified coordinates, data as real sample values.
#[derive(Clone, Debug)]
pub struct GridProblem {
    desc: QuantityDescriptor,
}

impl GridProblem {
    pub fn new(desc: &QuantityDescriptor) -> Self {
        Self { desc: desc.clone() }
    }

    pub fn descriptor(&self) -> &QuantityDescriptor {
        &self.desc
    }

    pub fn to_h<T: Scalar>(&self, w: &Field<T>) -> Vec<T> {
        realify(w, self.desc.is_complex())
    }

    pub fn from_h<T: Scalar>(&self, x: &[T]) -> Field<T> {
        unrealify(self.desc.grid(), self.desc.is_complex(), x)
    }

    pub fn to_x<T: Scalar>(&self, f: &Field<T>) -> Vec<T> {
        f.re()
    }

    pub fn from_x<T: Scalar>(&self, f: &[T]) -> Field<T> {
        Field::from_real(*self.desc.grid(), f).expect("finite data vector")
    }
}

impl<T: Scalar> QuadraticProblem<T> for GridProblem {
    fn h_dim(&self) -> usize {
        self.desc.realified_dim()
    }

    fn x_dim(&self) -> usize {
        self.desc.grid().len()
    }

    fn quantity(&self, w: &[T]) -> Vec<T> {
        let q = eval_quantity(&self.desc, &self.from_h(w)).expect("vector lies in the space");
        q.re()
    }

    fn apply_tb(&self, b: &[T], w: &[T]) -> Vec<T> {
        let h = OperatorHandle::new(&self.desc, &self.from_x(b)).expect("valid multiplier");
        h.apply(w)
    }

    fn pairing(&self, b: &[T], f: &[T]) -> T {
        let dv = T::of(self.desc.grid().cell_volume());
        b.iter().zip(f).map(|(x, y)| *x * *y).sum::<T>() * dv
    }

    fn fix_gauge(&self, w: &mut [T]) {
        let field = self.from_h(w);
        let fixed = if self.desc.is_complex() && !self.desc.kind().is_pair() {
            rotate_to_positive_mode(&field)
        } else {
            flip_to_positive_peak(&field)
        };
        w.copy_from_slice(&self.to_h(&fixed));
    }

    fn random_x(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        let g = self.desc.grid();
        random_real_field::<T, _>(g, (g.n() / 4).max(1), rng).re()
    }
}

/// Index of the first entry within a relative `1e-6` of the largest magnitude.
fn leading_index<T: Scalar>(mags: &[T]) -> Option<usize> {
    let peak = mags.iter().fold(T::zero(), |m, v| m.max(*v));
    if peak == T::zero() {
        return None;
    }
    mags.iter().position(|v| *v >= peak * T::of(1.0 - 1e-6))
}

/// Multiplies by a unimodular constant so that the leading Fourier mode is positive real.
pub fn rotate_to_positive_mode<T: Scalar>(w: &Field<T>) -> Field<T> {
    let spec = w.spectrum();
    let mags: Vec<T> = spec.iter().map(|v| v.norm()).collect();
    match leading_index(&mags) {
        Some(p) => w.scale_complex(spec[p].conj() / mags[p]),
        None => w.clone(),
    }
}

/// Flips the sign so that the sample of largest modulus has positive real part.
pub fn flip_to_positive_peak<T: Scalar>(w: &Field<T>) -> Field<T> {
    let mags: Vec<T> = w.values().iter().map(|v| v.norm()).collect();
    match leading_index(&mags) {
        Some(p) => {
            let v = w.values()[p];
            let negative = if v.re != T::zero() { v.re < T::zero() } else { v.im < T::zero() };
            if negative {
                w.scale(-T::one())
            } else {
                w.clone()
            }
        }
        None => w.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinNormOptions {
    /// Target for `‖Qω − f‖ / ‖f‖`.
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Final inner stationarity tolerance, relative to `‖ω‖`.
    pub inner_tol: f64,
    /// Initial penalty relative to the energy of the starting point.
    pub rho0: f64,
    pub rho_max: f64,
    pub starts: usize,
    pub seed: u64,
    /// Largest `dim H + dim X` for which the final stage switches to a dense
    /// Levenberg–Marquardt solve of the stationarity system.
    pub polish_capacity: usize,
}

impl Default for MinNormOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_outer: 60,
            max_inner: 4000,
            inner_tol: 1e-10,
            rho0: 10.0,
            rho_max: 1e8,
            starts: 4,
            seed: 0x5EED,
            polish_capacity: 1536,
        }
    }
}

impl MinNormOptions {
    pub fn loose(&self) -> Self {
        Self { tol: self.tol.max(1e-4), starts: self.starts.min(2), ..*self }
    }
}

/// Minimum-norm solve result in problem coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct MinNormSolution<T> {
    pub solution: Vec<T>,
    pub multiplier: Vec<T>,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimum-norm solve result on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MinNormResult<T> {
    pub solution: Field<T>,
    pub energy: f64,
    /// `‖Qω − f‖₂ / ‖f‖₂`.
    pub residual: f64,
    /// Lagrange multiplier estimate `b`, normalized so that `T_b ω = ω` at a critical point.
    pub multiplier: Field<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn norm_sq<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|v| *v * *v).sum()
}

fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(a, b)| *a * *b).sum()
}

fn axpy<T: Scalar>(x: &[T], a: T, y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(p, q)| *p + a * *q).collect()
}

struct Lagrangian<'a, T, P: ?Sized> {
    p: &'a P,
    f: &'a [T],
    lambda: Vec<T>,
    rho: T,
}

impl<T: Scalar, P: QuadraticProblem<T> + ?Sized> Lagrangian<'_, T, P> {
    fn residual(&self, x: &[T]) -> Vec<T> {
        let q = self.p.quantity(x);
        q.iter().zip(self.f).map(|(a, b)| *a - *b).collect()
    }

    /// `‖x‖² − ⟨λ, r⟩ + ρ/2 ⟨r, r⟩`.
    fn value(&self, x: &[T], r: &[T]) -> T {
        norm_sq(x) - self.p.pairing(&self.lambda, r) + self.rho * T::of(0.5) * self.p.pairing(r, r)
    }

    /// `2x − 2T_{λ − ρr} x`.
    fn gradient(&self, x: &[T], r: &[T]) -> Vec<T> {
        let g = axpy(&self.lambda, -self.rho, r);
        let t = self.p.apply_tb(&g, x);
        x.iter().zip(&t).map(|(a, b)| T::of(2.0) * (*a - *b)).collect()
    }

    /// Limited-memory BFGS with Armijo backtracking.
    fn minimize(&self, x0: Vec<T>, max_iter: usize, tol: T) -> (Vec<T>, usize) {
        const MEMORY: usize = 12;
        let mut x = x0;
        let mut r = self.residual(&x);
        let mut val = self.value(&x, &r);
        let mut g = self.gradient(&x, &r);
        let mut hist: std::collections::VecDeque<(Vec<T>, Vec<T>, T)> = std::collections::VecDeque::new();
        for it in 0..max_iter {
            let gn = norm_sq(&g).sqrt();
            if gn <= tol * norm_sq(&x).sqrt().max(T::min_positive_value()) {
                return (x, it);
            }
            let mut d = g.clone();
            let mut alphas = Vec::with_capacity(hist.len());
            for (s, y, rho) in hist.iter().rev() {
                let a = *rho * dot(s, &d);
                d = axpy(&d, -a, y);
                alphas.push(a);
            }
            let gamma = hist.back().map_or(T::of(0.25), |(s, y, _)| dot(s, y) / norm_sq(y));
            d.iter_mut().for_each(|v| *v = *v * gamma);
            for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
                let bcoef = *rho * dot(y, &d);
                d = axpy(&d, a - bcoef, s);
            }
            let mut slope = dot(&g, &d);
            if slope <= T::zero() {
                hist.clear();
                d = g.clone();
                slope = gn * gn;
            }
            let mut step = T::one();
            let mut accepted = None;
            for _ in 0..60 {
                let trial = axpy(&x, -step, &d);
                let tr = self.residual(&trial);
                let tv = self.value(&trial, &tr);
                if tv <= val - T::of(1e-4) * step * slope {
                    accepted = Some((trial, tr, tv));
                    break;
                }
                step = step * T::of(0.5);
            }
            let Some((nx, nr, nv)) = accepted else {
                if hist.is_empty() {
                    return (x, it);
                }
                hist.clear();
                continue;
            };
            let ng = self.gradient(&nx, &nr);
            let s: Vec<T> = nx.iter().zip(&x).map(|(a, b)| *a - *b).collect();
            let y: Vec<T> = ng.iter().zip(&g).map(|(a, b)| *a - *b).collect();
            let sy = dot(&s, &y);
            if sy > T::epsilon() * norm_sq(&s).sqrt() * norm_sq(&y).sqrt() {
                if hist.len() == MEMORY {
                    hist.pop_front();
                }
                hist.push_back((s, y, T::one() / sy));
            }
            x = nx;
            g = ng;
            r = nr;
            val = nv;
        }
        let _ = r;
        (x, max_iter)
    }
}

fn random_h<T: Scalar, P: QuadraticProblem<T> + ?Sized>(p: &P, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut x: Vec<T> = (0..p.h_dim())
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            T::of(v)
        })
        .collect();
    let q = p.quantity(&x);
    let qn = p.x_norm(&q);
    if qn > T::zero() {
        let s = T::one() / qn.sqrt();
        x.iter_mut().for_each(|v| *v = *v * s);
    }
    x
}

fn trace_enabled() -> bool {
    std::env::var_os("HQLAB_TRACE").is_some()
}

/// Residual at which the augmented Lagrangian hands over to the dense polish.
const POLISH_START: f64 = 1e-4;

fn solve_from<T: Scalar, P: QuadraticProblem<T> + ?Sized>(p: &P, f: &[T], x0: Vec<T>, opts: &MinNormOptions) -> MinNormSolution<T> {
    let fnorm = p.x_norm(f);
    let energy0 = norm_sq(&x0).max(T::min_positive_value());
    let mut al = Lagrangian { p, f, lambda: vec![T::zero(); p.x_dim()], rho: T::of(opts.rho0) * energy0 / (fnorm * fnorm) };
    let rho_max = T::of(opts.rho_max) * energy0 / (fnorm * fnorm);
    let polish = p.h_dim() + p.x_dim() <= opts.polish_capacity;
    let mut x = x0;
    let mut iterations = 0;
    let mut prev_res = T::infinity();
    let mut res = T::infinity();
    let mut converged = false;
    for outer in 0..opts.max_outer {
        let inner_tol = T::of(opts.inner_tol.max(1e-2 * prev_res.f64().min(1.0)));
        let (nx, its) = al.minimize(x, opts.max_inner, inner_tol);
        x = nx;
        iterations += its;
        let r = al.residual(&x);
        res = p.x_norm(&r) / fnorm;
        if trace_enabled() {
            eprintln!("outer {outer}: inner {its}, residual {:e}, rho {:e}, energy {:e}", res.f64(), al.rho.f64(), norm_sq(&x).f64());
        }
        // λ − ρr is the multiplier of the inner stationarity condition
        al.lambda = axpy(&al.lambda, -al.rho, &r);
        if res <= T::of(opts.tol) {
            converged = true;
            break;
        }
        if polish && res <= T::of(POLISH_START.max(opts.tol)) {
            break;
        }
        if res > T::of(0.9) * prev_res {
            al.rho = (al.rho * T::of(2.0)).min(rho_max);
        }
        prev_res = res;
    }
    if polish && !converged {
        let (px, pl, pres) = newton_polish(p, f, &x, &al.lambda, opts.tol);
        if pres <= res.f64() {
            x = px;
            al.lambda = pl;
            res = T::of(pres);
            converged = pres <= opts.tol;
        }
    }
    p.fix_gauge(&mut x);
    MinNormSolution {
        energy: norm_sq(&x).f64(),
        solution: x,
        multiplier: al.lambda,
        residual: res.f64(),
        iterations,
        converged,
    }
}

/// Levenberg–Marquardt on the stationarity system `ω − T_λ ω = 0`, `Qω − f = 0`
/// with dense Jacobians. Returns the polished pair and its constraint residual.
fn newton_polish<T: Scalar, P: QuadraticProblem<T> + ?Sized>(
    p: &P,
    f: &[T],
    x: &[T],
    lambda: &[T],
    tol: f64,
) -> (Vec<T>, Vec<T>, f64) {
    use nalgebra::{DMatrix, DVector};
    let (h, m) = (p.h_dim(), p.x_dim());
    let fnorm = p.x_norm(f).f64();
    let system = |x: &[T], l: &[T]| -> (DVector<f64>, f64) {
        let t = p.apply_tb(l, x);
        let q = p.quantity(x);
        let r: Vec<T> = q.iter().zip(f).map(|(a, b)| *a - *b).collect();
        let res = p.x_norm(&r).f64() / fnorm;
        let mut out = DVector::zeros(h + m);
        for i in 0..h {
            out[i] = (x[i] - t[i]).f64();
        }
        for i in 0..m {
            out[h + i] = r[i].f64();
        }
        (out, res)
    };
    let mut xv = x.to_vec();
    let mut lv = lambda.to_vec();
    let (mut fv, mut res) = system(&xv, &lv);
    let mut mu = 1e-10;
    for _ in 0..30 {
        let xn = norm_sq(&xv).f64().sqrt();
        if res <= 0.01 * tol && fv.rows(0, h).norm() <= 1e-12 * xn {
            break;
        }
        let mut k = DMatrix::<f64>::zeros(h + m, h + m);
        let mut e = vec![T::zero(); h];
        for j in 0..h {
            e[j] = T::one();
            let tj = p.apply_tb(&lv, &e);
            let qp = p.quantity(&axpy(&xv, T::one(), &e));
            let qm = p.quantity(&axpy(&xv, -T::one(), &e));
            e[j] = T::zero();
            for i in 0..h {
                k[(i, j)] = (if i == j { 1.0 } else { 0.0 }) - tj[i].f64();
            }
            for i in 0..m {
                k[(h + i, j)] = 0.5 * (qp[i] - qm[i]).f64();
            }
        }
        let mut c = vec![T::zero(); m];
        for j in 0..m {
            c[j] = T::one();
            let g = p.apply_tb(&c, &xv);
            c[j] = T::zero();
            for i in 0..h {
                k[(i, h + j)] = -g[i].f64();
            }
        }
        let ktk = k.tr_mul(&k);
        let ktf = k.tr_mul(&fv);
        let scale = (0..h + m).map(|i| ktk[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut improved = false;
        for _ in 0..12 {
            let mut a = ktk.clone();
            for i in 0..h + m {
                a[(i, i)] += mu * scale;
            }
            let Some(ch) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let d = ch.solve(&ktf);
            let nx: Vec<T> = xv.iter().zip(d.rows(0, h).iter()).map(|(a, b)| *a - T::of(*b)).collect();
            let nl: Vec<T> = lv.iter().zip(d.rows(h, m).iter()).map(|(a, b)| *a - T::of(*b)).collect();
            let (nf, nres) = system(&nx, &nl);
            if nf.norm() < fv.norm() {
                xv = nx;
                lv = nl;
                fv = nf;
                res = nres;
                mu = (mu * 0.1).max(1e-14);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if trace_enabled() {
            eprintln!("polish: residual {res:e}, stationarity {:e}, mu {mu:e}", fv.rows(0, h).norm());
        }
        if !improved {
            break;
        }
    }
    (xv, lv, res)
}

fn better<T>(a: &MinNormSolution<T>, b: &MinNormSolution<T>, tol: f64) -> bool {
    match (a.residual <= tol, b.residual <= tol) {
        (true, true) => a.energy < b.energy,
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.residual < b.residual,
    }
}

/// Approximate minimizer of `‖ω‖²` subject to `Qω = f` by an augmented Lagrangian.
///
/// The outer loop updates `λ ← λ − ρ(Qω − f)` and doubles `ρ` whenever the
/// residual fails to drop by a factor `0.9`; the inner problem
/// `‖ω‖² − ⟨λ, Qω − f⟩ + ρ/2 ‖Qω − f‖²` is minimized by gradient descent with
/// backtracking, using `∇⟨g, Qω⟩ = 2T_g ω`. With this sign convention the
/// returned multiplier `b = λ` satisfies `T_b ω = ω` at a critical point. The
/// problem is solved for `f/‖f‖` from several seeded starts and rescaled.
pub fn min_norm_solve_problem<T: Scalar, P: QuadraticProblem<T> + ?Sized>(
    p: &P,
    f: &[T],
    opts: &MinNormOptions,
    initial: Option<&[T]>,
) -> MinNormSolution<T> {
    let fnorm = p.x_norm(f);
    if fnorm == T::zero() {
        return MinNormSolution {
            solution: vec![T::zero(); p.h_dim()],
            multiplier: vec![T::zero(); p.x_dim()],
            energy: 0.0,
            residual: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let unit: Vec<T> = f.iter().map(|v| *v / fnorm).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<MinNormSolution<T>> = None;
    let mut starts: Vec<Vec<T>> = Vec::new();
    if let Some(x0) = initial {
        let s = T::one() / fnorm.sqrt();
        starts.push(x0.iter().map(|v| *v * s).collect());
    }
    while starts.len() < opts.starts.max(1) {
        starts.push(random_h(p, &mut rng));
    }
    for x0 in starts {
        let sol = solve_from(p, &unit, x0, opts);
        if best.as_ref().map_or(true, |b| better(&sol, b, opts.tol)) {
            best = Some(sol);
        }
    }
    let mut sol = best.expect("at least one start");
    let s = fnorm.sqrt();
    sol.solution.iter_mut().for_each(|v| *v = *v * s);
    sol.energy *= fnorm.f64();
    sol
}

fn grid_data<T: Scalar>(d: &QuantityDescriptor, f: &Field<T>) -> Result<Field<T>> {
    if f.grid() != d.grid() {
        return Err(LabError::GridMismatch);
    }
    if !f.is_finite() {
        return Err(LabError::NonFinite { index: f.values().iter().position(|v| !v.re.is_finite()).unwrap_or(0) });
    }
    let tol = T::epsilon() * T::of(1e3) * f.max_abs().max(T::one());
    if f.max_imag() > tol {
        return Err(LabError::invalid("data f must be real"));
    }
    let f = f.real_part();
    let mean_free = !matches!(d.kind(), QuantityKind::Paracommutator(_));
    let mean_part = f.mean().norm() * T::of(d.grid().volume().sqrt());
    if mean_free && mean_part > T::of(1e-8) * f.norm().max(T::min_positive_value()) {
        return Err(LabError::NonzeroMean { mean: f.mean().norm().f64() });
    }
    Ok(if mean_free { f.project_active() } else { f })
}

/// Grid form of [`min_norm_solve_problem`]; `f` must be real and, for commutator-type
/// quantities, mean-zero. Nyquist content of `f` is discarded.
pub fn min_norm_solve<T: Scalar>(d: &QuantityDescriptor, f: &Field<T>, opts: &MinNormOptions) -> Result<MinNormResult<T>> {
    let f = grid_data(d, f)?;
    let p = GridProblem::new(d);
    let sol = min_norm_solve_problem(&p, &p.to_x(&f), opts, None);
    Ok(MinNormResult {
        solution: p.from_h(&sol.solution),
        energy: sol.energy,
        residual: sol.residual,
        multiplier: p.from_x(&sol.multiplier),
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// `‖T_b w − w‖ / ‖w‖`.
pub fn lagrange_residual<T: Scalar>(d: &QuantityDescriptor, b: &Field<T>, w: &Field<T>) -> Result<T> {
    let w = d.to_space(w)?;
    let n = w.norm();
    if n == T::zero() {
        return Err(LabError::invalid("lagrange_residual is undefined for w = 0"));
    }
    let h = OperatorHandle::new(d, b)?;
    Ok(h.apply_field(&w)?.sub(&w)?.norm() / n)
}

/// `‖b‖_{X_Q} = sup_{‖ω‖=1} ⟨b, Qω⟩`, the numerical radius of `T_b`.
pub fn xq_norm<T: Scalar>(d: &QuantityDescriptor, b: &Field<T>, opts: &PowerOptions) -> Result<SpectralEstimate> {
    let h = OperatorHandle::new(d, b)?;
    Ok(crate::operators::numerical_radius(&h, opts))
}

/// `λmax(T_b)` with a unit top eigenvector, for any problem.
pub fn xq_norm_problem<T: Scalar, P: QuadraticProblem<T> + ?Sized>(p: &P, b: &[T], opts: &PowerOptions) -> (SpectralEstimate, Vec<T>) {
    top_eigenpair(&MultiplierOperator { problem: p, b }, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualBudget {
    /// Random multiplier samples for the lower bound.
    pub samples: usize,
    /// Gradient-ascent steps on the best sample.
    pub ascent_steps: usize,
    /// Stopping level for the greedy decomposition residual `‖f − ΣQω_j‖/‖f‖`.
    pub tol: f64,
    pub max_terms: usize,
    pub seed: u64,
}

impl Default for DualBudget {
    fn default() -> Self {
        Self { samples: 8, ascent_steps: 40, tol: 1e-6, max_terms: 50, seed: 0x5EED }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualBounds {
    pub lower: f64,
    /// `+∞` when the greedy decomposition stagnates or exhausts its term budget.
    pub upper: f64,
    pub terms: usize,
    pub decomposition_residual: f64,
    pub stagnated: bool,
}

/// Ratio `⟨f, b⟩ / λmax(T_b)`, or `None` when `λmax ≤ 0`.
fn dual_ratio<T: Scalar, P: QuadraticProblem<T> + ?Sized>(
    p: &P,
    f: &[T],
    b: &[T],
    opts: &PowerOptions,
) -> Option<(f64, Vec<T>, f64)> {
    let (lam, v) = xq_norm_problem(p, b, opts);
    if lam.value <= 1e-14 {
        return None;
    }
    Some((p.pairing(f, b).f64() / lam.value, v, lam.value))
}

/// Lower and upper bounds on `‖f‖_{X_Q*}`.
///
/// The lower bound maximizes `⟨f, b⟩ / ‖b‖_{X_Q}` over the solver's multiplier,
/// `f` itself and seeded random directions, refined by gradient ascent using
/// `∇λmax(T_b) = Q(v)` for the top unit eigenvector `v`. The upper bound is
/// `Σ‖ω_j‖²` from a greedy decomposition `f ≈ ΣQω_j`.
pub fn xqstar_bounds_problem<T: Scalar, P: QuadraticProblem<T> + ?Sized>(
    p: &P,
    f: &[T],
    budget: &DualBudget,
    solve: &MinNormOptions,
) -> DualBounds {
    let fnorm = p.x_norm(f);
    if fnorm == T::zero() {
        return DualBounds { lower: 0.0, upper: 0.0, terms: 0, decomposition_residual: 0.0, stagnated: false };
    }
    let power = PowerOptions { seed: budget.seed, ..PowerOptions::default() };
    let first = min_norm_solve_problem(p, f, solve, None);

    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut candidates = vec![first.multiplier.clone(), f.to_vec()];
    for _ in 0..budget.samples {
        candidates.push(p.random_x(&mut rng));
    }
    let mut best: Option<(f64, Vec<T>, Vec<T>, f64)> = None;
    for b in candidates {
        if let Some((r, v, lam)) = dual_ratio(p, f, &b, &power) {
            if best.as_ref().map_or(true, |(br, ..)| r > *br) {
                best = Some((r, b, v, lam));
            }
        }
    }
    let mut lower = 0.0f64;
    if let Some((mut ratio, mut b, mut v, mut lam)) = best {
        let mut step = T::of(0.5) * p.x_norm(&b) / fnorm;
        for _ in 0..budget.ascent_steps {
            // ∇(⟨f,b⟩/λ) = f/λ − ⟨f,b⟩ Q(v)/λ²
            let qv = p.quantity(&v);
            let fb = p.pairing(f, &b);
            let l = T::of(lam);
            let grad: Vec<T> = f.iter().zip(&qv).map(|(a, q)| *a / l - fb * *q / (l * l)).collect();
            let mut improved = false;
            for _ in 0..8 {
                let trial = axpy(&b, step, &grad);
                if let Some((r, tv, tl)) = dual_ratio(p, f, &trial, &power) {
                    if r > ratio {
                        ratio = r;
                        b = trial;
                        v = tv;
                        lam = tl;
                        step = step * T::of(1.5);
                        improved = true;
                        break;
                    }
                }
                step = step * T::of(0.5);
            }
            if !improved {
                break;
            }
        }
        lower = ratio.max(0.0);
    }

    let mut remainder: Vec<T> = f.to_vec();
    let mut upper = 0.0;
    let mut terms = 0;
    let mut res = 1.0;
    let mut stagnated = false;
    let loose = solve.loose();
    while terms < budget.max_terms {
        let sol = if terms == 0 { first.clone() } else { min_norm_solve_problem(p, &remainder, &loose, None) };
        let q = p.quantity(&sol.solution);
        let next: Vec<T> = remainder.iter().zip(&q).map(|(a, b)| *a - *b).collect();
        let next_res = (p.x_norm(&next) / fnorm).f64();
        terms += 1;
        if next_res >= 0.99 * res {
            stagnated = true;
            break;
        }
        upper += sol.energy;
        remainder = next;
        res = next_res;
        if res <= budget.tol {
            break;
        }
    }
    if stagnated || res > budget.tol {
        upper = f64::INFINITY;
    }
    DualBounds { lower, upper, terms, decomposition_residual: res, stagnated }
}

/// Grid form of [`xqstar_bounds_problem`].
pub fn xqstar_bounds<T: Scalar>(
    d: &QuantityDescriptor,
    f: &Field<T>,
    budget: &DualBudget,
    solve: &MinNormOptions,
) -> Result<DualBounds> {
    let f = grid_data(d, f)?;
    let p = GridProblem::new(d);
    Ok(xqstar_bounds_problem(&p, &p.to_x(&f), budget, solve))
}

/// Rescales `b` so that `‖b‖_{X_Q} = 1`, returning the factor used.
pub fn normalize_multiplier<T: Scalar>(d: &QuantityDescriptor, b: &Field<T>, opts: &PowerOptions) -> Result<(Field<T>, f64)> {
    let est = xq_norm(d, b, opts)?;
    if est.value <= 0.0 {
        return Err(LabError::precondition("multiplier has no positive spectrum"));
    }
    Ok((b.scale(T::of(1.0 / est.value)), 1.0 / est.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{assemble_dense, symmetric_spectrum};
    use crate::spectral::{random_field, GridSpec};
    use std::f64::consts::PI;

    #[test]
    fn zero_data_gives_zero_solution() {
        let g = GridSpec::plane(8, 2.0 * PI).unwrap();
        let d = QuantityDescriptor::parse("planar_jacobian", g).unwrap();
        let r = min_norm_solve(&d, &Field::<f64>::zeros(g), &MinNormOptions::default()).unwrap();
        assert_eq!(r.energy, 0.0);
        assert!(r.converged && r.solution.max_abs() == 0.0);
    }

    #[test]
    fn lagrange_residual_of_zero_symbol_is_one() {
        let g = GridSpec::line(16, 2.0 * PI).unwrap();
        let d = QuantityDescriptor::parse("line_q1", g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_real_field::<f64, _>(&g, 5, &mut rng);
        assert_eq!(lagrange_residual(&d, &Field::zeros(g), &w).unwrap(), 1.0);
        assert!(lagrange_residual(&d, &w, &Field::zeros(g)).is_err());
    }

    #[test]
    fn planar_feasible_instance() {
        let g = GridSpec::plane(16, 2.0 * PI).unwrap();
        let d = QuantityDescriptor::parse("planar_jacobian", g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w0 = random_field::<f64, _>(&g, 3, false, &mut rng);
        let f = eval_quantity(&d, &w0).unwrap();
        let r = min_norm_solve(&d, &f, &MinNormOptions::default()).unwrap();
        eprintln!("energy {} residual {} its {}", r.energy, r.residual, r.iterations);
        assert!(r.residual <= 1e-5);
        assert!(r.energy <= w0.norm_sq() + 1e-3);
    }

    #[test]
    fn eigen_constructed_instance_is_optimal() {
        let g = GridSpec::plane(8, 2.0 * PI).unwrap();
        let d = QuantityDescriptor::parse("planar_jacobian", g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_real_field::<f64, _>(&g, 2, &mut rng);
        let h = OperatorHandle::new(&d, &b).unwrap();
        let (vals, vecs) = symmetric_spectrum(&assemble_dense(&h).unwrap());
        let b = b.scale(1.0 / vals[0]);
        let x: Vec<f64> = vecs.column(0).iter().copied().collect();
        let w = unrealify(&g, true, &x);
        let f = eval_quantity(&d, &w).unwrap();
        assert!((b.inner(&f) - 1.0).abs() < 1e-10);
        let r = min_norm_solve(&d, &f, &MinNormOptions::default()).unwrap();
        eprintln!("energy {} residual {} its {}", r.energy, r.residual, r.iterations);
        assert!((r.energy - 1.0).abs() < 1e-3);
    }
}
