//! Finite-dimensional models `T_b = Σ b_k A_k` on `H = ℝⁿ`, `X = ℝᵐ`, where
//! duality faces, extreme points and the norm formula can be computed directly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::variational::{min_norm_solve_problem, MinNormOptions, QuadraticProblem};

/// Symmetry tolerance for model matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues within this distance of 1 span the fixed space.
pub const FIXED_TOL: f64 = 1e-8;
/// Singular-value threshold for the affine dimension of a face.
pub const RANK_TOL: f64 = 1e-8;

/// How the identity `λmax(T_b) = ‖T_b‖` for all `b` is known to hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralSymmetry {
    /// Block anti-diagonal matrices: conjugation by `diag(I, −I)` negates every `A_k`.
    Chiral,
    /// An orthogonal `J` with `J² = −I` anticommutes with every `A_k`.
    ComplexStructure,
    /// Nothing is known; the model is labeled `assumption-2ii-unchecked`.
    Unchecked,
}

/// The family `{A_k}` of symmetric `n × n` matrices, `Q(ω)_k = ⟨A_k ω, ω⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelJson", into = "ModelJson")]
pub struct FinDimModel {
    n: usize,
    m: usize,
    matrices: Vec<DMatrix<f64>>,
    symmetry: SpectralSymmetry,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    n: usize,
    m: usize,
    seed: Option<u64>,
    symmetry: SpectralSymmetry,
    /// Row-major entries of each `A_k`.
    matrices: Vec<Vec<f64>>,
}

impl TryFrom<ModelJson> for FinDimModel {
    type Error = LabError;

    fn try_from(j: ModelJson) -> Result<Self> {
        if j.matrices.len() != j.m {
            return Err(LabError::invalid(format!("expected {} matrices, found {}", j.m, j.matrices.len())));
        }
        let mats = j
            .matrices
            .iter()
            .map(|v| {
                if v.len() != j.n * j.n {
                    return Err(LabError::LengthMismatch { expected: j.n * j.n, got: v.len() });
                }
                Ok(DMatrix::from_row_slice(j.n, j.n, v))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut model = FinDimModel::from_matrices(mats, j.symmetry)?;
        model.seed = j.seed;
        Ok(model)
    }
}

impl From<FinDimModel> for ModelJson {
    fn from(m: FinDimModel) -> Self {
        let matrices = m.matrices.iter().map(|a| a.transpose().iter().copied().collect()).collect();
        ModelJson { n: m.n, m: m.m, seed: m.seed, symmetry: m.symmetry, matrices }
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        v
    })
}

fn gaussian_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, rng);
    (&g + g.transpose()) * 0.5
}

fn chiral_block(c: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = c.shape();
    let mut a = DMatrix::zeros(p + q, p + q);
    a.view_mut((0, p), (p, q)).copy_from(c);
    a.view_mut((p, 0), (q, p)).copy_from(&c.transpose());
    a
}

fn is_chiral(a: &DMatrix<f64>) -> bool {
    let h = a.nrows() / 2;
    a.nrows() % 2 == 0 && a.view((0, 0), (h, h)).amax() <= SYMMETRY_TOL && a.view((h, h), (h, h)).amax() <= SYMMETRY_TOL
}

/// `J = [[0, −I], [I, 0]]`.
fn complex_structure(n: usize) -> DMatrix<f64> {
    let h = n / 2;
    let mut j = DMatrix::zeros(n, n);
    for i in 0..h {
        j[(i, h + i)] = -1.0;
        j[(h + i, i)] = 1.0;
    }
    j
}

impl FinDimModel {
    /// Validates symmetry and the claimed spectral symmetry.
    pub fn from_matrices(matrices: Vec<DMatrix<f64>>, symmetry: SpectralSymmetry) -> Result<Self> {
        let m = matrices.len();
        if m == 0 {
            return Err(LabError::invalid("a model needs at least one matrix"));
        }
        let n = matrices[0].nrows();
        for a in &matrices {
            if a.shape() != (n, n) {
                return Err(LabError::invalid("model matrices must all be n × n"));
            }
            if (a - a.transpose()).amax() > SYMMETRY_TOL * a.amax().max(1.0) {
                return Err(LabError::invalid("model matrices must be symmetric"));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(LabError::NonFinite { index: 0 });
            }
        }
        match symmetry {
            SpectralSymmetry::Chiral if !matrices.iter().all(is_chiral) => {
                return Err(LabError::invalid("chiral models need the block form [[0, C], [Cᵀ, 0]]"));
            }
            SpectralSymmetry::ComplexStructure => {
                let j = if n % 2 == 0 { complex_structure(n) } else { return Err(LabError::invalid("complex structure needs even n")) };
                if matrices.iter().any(|a| (a * &j + &j * a).amax() > SYMMETRY_TOL * a.amax().max(1.0)) {
                    return Err(LabError::invalid("matrices must anticommute with J = [[0, −I], [I, 0]]"));
                }
            }
            _ => {}
        }
        Ok(Self { n, m, matrices, symmetry, seed: None })
    }

    /// Seeded model. Chiral models draw Gaussian blocks `C_k`; otherwise the
    /// `A_k` are Gaussian symmetric matrices and spectral symmetry is unchecked.
    pub fn build(n: usize, m: usize, seed: u64, chiral: bool) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(LabError::invalid("dimensions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = if chiral {
            if n % 2 == 1 {
                return Err(LabError::invalid("chiral models need even n"));
            }
            let mats = (0..m).map(|_| chiral_block(&gaussian_matrix(n / 2, n / 2, &mut rng))).collect();
            Self::from_matrices(mats, SpectralSymmetry::Chiral)?
        } else {
            let mats = (0..m).map(|_| gaussian_symmetric(n, &mut rng)).collect();
            Self::from_matrices(mats, SpectralSymmetry::Unchecked)?
        };
        model.seed = Some(seed);
        Ok(model)
    }

    /// Seeded model `A_k = [[X_k, Y_k], [Y_k, −X_k]]`, i.e. `Q(ω)_k = Re(ζᵀ Z_k ζ)` for
    /// `ζ = ω₁ + iω₂` and complex symmetric `Z_k = X_k + iY_k`.
    pub fn build_complex(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n == 0 || n % 2 == 1 || m == 0 {
            return Err(LabError::invalid("complex models need even n > 0 and m > 0"));
        }
        let h = n / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mats = (0..m)
            .map(|_| {
                let x = gaussian_symmetric(h, &mut rng);
                let y = gaussian_symmetric(h, &mut rng);
                let mut a = DMatrix::zeros(n, n);
                a.view_mut((0, 0), (h, h)).copy_from(&x);
                a.view_mut((h, h), (h, h)).copy_from(&(-&x));
                a.view_mut((0, h), (h, h)).copy_from(&y);
                a.view_mut((h, 0), (h, h)).copy_from(&y);
                a
            })
            .collect();
        let mut model = Self::from_matrices(mats, SpectralSymmetry::ComplexStructure)?;
        model.seed = Some(seed);
        Ok(model)
    }

    /// The simple operator `Qω = ω₁² − ω₂²`, `T_b = diag(b, −b)`.
    pub fn simple() -> Self {
        Self::from_matrices(vec![DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]))], SpectralSymmetry::ComplexStructure)
            .expect("valid simple model")
    }

    /// The doubled family `Ã_k = [[0, A_k], [A_k, 0]]`, so that
    /// `T̃_b(f, g) = (T_b g, T_b f)` and `Q̃(f, g) = 2⟨A_k f, g⟩ = Q'_f g`.
    pub fn doubled(&self) -> Self {
        let mats = self.matrices.iter().map(chiral_block).collect();
        let mut d = Self::from_matrices(mats, SpectralSymmetry::Chiral).expect("doubling preserves symmetry");
        d.seed = self.seed;
        d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn symmetry(&self) -> SpectralSymmetry {
        self.symmetry
    }

    pub fn is_chiral(&self) -> bool {
        self.symmetry == SpectralSymmetry::Chiral
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// For a doubled chiral model, the map `L(f, g) = (Pg, −Pf)` with `P = diag(I, −I)`:
    /// `L ∘ L = −id`, `Q ∘ L = Q` and `Q'_ω(Lω) = 0` for every `ω`.
    pub fn structural_map(&self) -> Option<DMatrix<f64>> {
        let n = self.n;
        if n % 4 != 0 {
            return None;
        }
        let h = n / 2;
        let base: Vec<DMatrix<f64>> = self.matrices.iter().map(|a| a.view((0, h), (h, h)).into_owned()).collect();
        let p = DMatrix::from_fn(h, h, |i, j| if i != j { 0.0 } else if i < h / 2 { 1.0 } else { -1.0 });
        let doubled = self.matrices.iter().zip(&base).all(|(a, c)| {
            let scale = a.amax().max(1.0) * SYMMETRY_TOL;
            a.view((0, 0), (h, h)).amax() <= scale && a.view((h, h), (h, h)).amax() <= scale && (c - c.transpose()).amax() <= scale && (&p * c * &p + c).amax() <= scale
        });
        if !doubled {
            return None;
        }
        let mut l = DMatrix::zeros(n, n);
        l.view_mut((0, h), (h, h)).copy_from(&p);
        l.view_mut((h, 0), (h, h)).copy_from(&(-&p));
        Some(l)
    }

    pub fn labels(&self) -> Vec<&'static str> {
        match self.symmetry {
            SpectralSymmetry::Unchecked => vec!["assumption-2ii-unchecked"],
            _ => Vec::new(),
        }
    }

    pub fn tb(&self, b: &[f64]) -> DMatrix<f64> {
        assert_eq!(b.len(), self.m);
        self.matrices.iter().zip(b).fold(DMatrix::zeros(self.n, self.n), |acc, (a, bk)| acc + a * *bk)
    }

    pub fn q(&self, w: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(w);
        self.matrices.iter().map(|a| v.dot(&(a * &v))).collect()
    }

    /// `Q'_ω γ = 2B(ω, γ)`.
    pub fn q_prime(&self, w: &[f64], g: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(w);
        let u = DVector::from_column_slice(g);
        self.matrices.iter().map(|a| 2.0 * v.dot(&(a * &u))).collect()
    }

    /// Eigenvalues in descending order with matching eigenvector columns.
    pub fn spectrum(&self, b: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        crate::operators::symmetric_spectrum(&self.tb(b))
    }

    /// `‖b‖_{X_Q} = λmax(T_b)`.
    pub fn xq_norm(&self, b: &[f64]) -> f64 {
        self.spectrum(b).0[0]
    }

    pub fn operator_norm(&self, b: &[f64]) -> f64 {
        let (vals, _) = self.spectrum(b);
        vals[0].abs().max(vals[vals.len() - 1].abs())
    }

    /// Largest `|λmax(T_b) + λmin(T_b)|` over seeded Gaussian `b`, relative to `‖T_b‖`.
    pub fn spectral_symmetry_defect(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|_| {
                let b: Vec<f64> = (0..self.m).map(|_| StandardNormal.sample(&mut rng)).collect();
                let (vals, _) = self.spectrum(&b);
                (vals[0] + vals[vals.len() - 1]).abs() / vals[0].abs().max(vals[vals.len() - 1].abs()).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }

    /// `b / λmax(T_b)`; fails when `T_b` has no positive eigenvalue.
    pub fn normalize(&self, b: &[f64]) -> Result<Vec<f64>> {
        let l = self.xq_norm(b);
        if l <= 0.0 {
            return Err(LabError::precondition("T_b has no positive eigenvalue"));
        }
        Ok(b.iter().map(|v| v / l).collect())
    }
}

impl QuadraticProblem<f64> for FinDimModel {
    fn h_dim(&self) -> usize {
        self.n
    }

    fn x_dim(&self) -> usize {
        self.m
    }

    fn quantity(&self, w: &[f64]) -> Vec<f64> {
        self.q(w)
    }

    fn apply_tb(&self, b: &[f64], w: &[f64]) -> Vec<f64> {
        (self.tb(b) * DVector::from_column_slice(w)).iter().copied().collect()
    }

    fn pairing(&self, b: &[f64], f: &[f64]) -> f64 {
        b.iter().zip(f).map(|(x, y)| x * y).sum()
    }

    fn fix_gauge(&self, w: &mut [f64]) {
        sign_gauge(w);
    }
}

/// Flips `w` so that its first largest-magnitude entry is positive.
fn sign_gauge(w: &mut [f64]) {
    let peak = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(i) = w.iter().position(|v| v.abs() >= peak * (1.0 - 1e-9)) {
        if w[i] < 0.0 {
            w.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// `K` copies of a problem: `Q_K(ω_1, …, ω_K) = Σ Q(ω_j)`, used for decompositions
/// `f = Σ Qω_j` of least total energy.
pub struct Replicated<'a, P> {
    pub base: &'a P,
    pub copies: usize,
}

impl<P: QuadraticProblem<f64>> QuadraticProblem<f64> for Replicated<'_, P> {
    fn h_dim(&self) -> usize {
        self.copies * self.base.h_dim()
    }

    fn x_dim(&self) -> usize {
        self.base.x_dim()
    }

    fn quantity(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.x_dim()];
        for chunk in w.chunks(self.base.h_dim()) {
            for (o, q) in out.iter_mut().zip(self.base.quantity(chunk)) {
                *o += q;
            }
        }
        out
    }

    fn apply_tb(&self, b: &[f64], w: &[f64]) -> Vec<f64> {
        w.chunks(self.base.h_dim()).flat_map(|c| self.base.apply_tb(b, c)).collect()
    }

    fn pairing(&self, b: &[f64], f: &[f64]) -> f64 {
        self.base.pairing(b, f)
    }

    fn fix_gauge(&self, w: &mut [f64]) {
        let h = self.base.h_dim();
        for chunk in w.chunks_mut(h) {
            self.base.fix_gauge(chunk);
        }
    }

    fn random_x(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.base.random_x(rng)
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic points on the unit sphere of `ℝ^d` from a Halton sequence
/// (shifted to `[−1, 1]^d` and normalized), one representative per `±` pair.
pub fn halton_sphere(d: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(d >= 1 && d <= PRIMES.len(), "sphere dimension out of range");
    if d == 1 {
        return vec![vec![1.0]];
    }
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let mut p: Vec<f64> = (0..d).map(|k| 2.0 * radical_inverse(i, PRIMES[k]) - 1.0).collect();
        i += 1;
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(0.05..=1.0).contains(&r) {
            continue;
        }
        p.iter_mut().for_each(|v| *v /= r);
        sign_gauge(&mut p);
        out.push(p);
    }
    out
}

fn matrix_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    m.clone().svd(false, false).singular_values.iter().filter(|s| **s > tol).count()
}

/// Sampled description of `D(b) ∩ Q(𝒜) = Q(ker(I − T_b) ∩ 𝕊_H)`.
#[derive(Clone, Debug, Serialize)]
pub struct DualityFace {
    pub b: Vec<f64>,
    /// Orthonormal basis of `ker(I − T_b)`, one vector per entry.
    pub fixed_basis: Vec<Vec<f64>>,
    pub samples: Vec<Vec<f64>>,
    /// Indices into `samples` of points exposed by some support direction.
    pub hull_vertices: Vec<usize>,
    pub affine_dim: usize,
    /// Largest `|⟨b, s⟩ − 1|` over the samples.
    pub pairing_defect: f64,
}

/// Eigenvectors of `T_b` with eigenvalue within [`FIXED_TOL`] of 1, requiring `λmax = 1 ± 1e-9`.
pub fn fixed_basis(model: &FinDimModel, b: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (vals, vecs) = model.spectrum(b);
    if (vals[0] - 1.0).abs() > 1e-9 {
        return Err(LabError::precondition(format!("b must be normalized: λmax(T_b) = {}", vals[0])));
    }
    Ok(vals.iter().enumerate().filter(|(_, v)| (*v - 1.0).abs() <= FIXED_TOL).map(|(i, _)| vecs.column(i).iter().copied().collect()).collect())
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (v, c) in basis.iter().zip(coeffs) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}

/// Samples the duality face of a normalized `b`.
///
/// The affine dimension is the rank of the centred sample matrix; hull vertices are
/// the samples maximizing `⟨u, s⟩` for Halton directions `u` within the face's span.
pub fn duality_face(model: &FinDimModel, b: &[f64], n_samples: usize) -> Result<DualityFace> {
    let basis = fixed_basis(model, b)?;
    let d = basis.len();
    let coeffs = halton_sphere(d, n_samples.max(1));
    let samples: Vec<Vec<f64>> = coeffs.iter().map(|c| model.q(&combine(&basis, c))).collect();
    let pairing_defect = samples.iter().map(|s| (model.pairing(b, s) - 1.0).abs()).fold(0.0, f64::max);
    let m = model.m();
    let mean: Vec<f64> = (0..m).map(|k| samples.iter().map(|s| s[k]).sum::<f64>() / samples.len() as f64).collect();
    let centred = DMatrix::from_fn(m, samples.len(), |k, j| samples[j][k] - mean[k]);
    let affine_dim = matrix_rank(&centred, RANK_TOL);
    let mut hull_vertices: Vec<usize> = Vec::new();
    if samples.len() == 1 || affine_dim == 0 {
        hull_vertices.push(0);
    } else {
        let dirs = halton_sphere(m, 4 * samples.len());
        for u in dirs.iter().flat_map(|u| [u.clone(), u.iter().map(|v| -v).collect::<Vec<_>>()]) {
            let best = (0..samples.len())
                .max_by(|&i, &j| {
                    let a: f64 = samples[i].iter().zip(&u).map(|(x, y)| x * y).sum();
                    let c: f64 = samples[j].iter().zip(&u).map(|(x, y)| x * y).sum();
                    a.total_cmp(&c)
                })
                .expect("nonempty samples");
            if !hull_vertices.contains(&best) {
                hull_vertices.push(best);
            }
        }
        hull_vertices.sort_unstable();
    }
    Ok(DualityFace { b: b.to_vec(), fixed_basis: basis, samples, hull_vertices, affine_dim, pairing_defect })
}

/// Euclidean distance from `p` to the convex hull of `points` by Frank–Wolfe with exact line search.
pub fn hull_distance(points: &[Vec<f64>], p: &[f64], iterations: usize) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let start = (0..points.len()).min_by(|&i, &j| dist(&points[i], p).total_cmp(&dist(&points[j], p))).expect("nonempty hull");
    let mut x = points[start].clone();
    for _ in 0..iterations {
        let grad: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
        let s = points
            .iter()
            .min_by(|a, b| {
                let ga: f64 = a.iter().zip(&grad).map(|(u, g)| u * g).sum();
                let gb: f64 = b.iter().zip(&grad).map(|(u, g)| u * g).sum();
                ga.total_cmp(&gb)
            })
            .expect("nonempty hull");
        let dir: Vec<f64> = s.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dd: f64 = dir.iter().map(|v| v * v).sum();
        if dd == 0.0 {
            break;
        }
        let t = (-grad.iter().zip(&dir).map(|(g, v)| g * v).sum::<f64>() / dd).clamp(0.0, 1.0);
        if t == 0.0 {
            break;
        }
        x.iter_mut().zip(&dir).for_each(|(a, v)| *a += t * v);
    }
    dist(&x, p).sqrt()
}

/// Distances from sampled faces `D(b_j)`, `b_j = (b + δ_j u)/λmax`, to the sampled hull
/// of `D(b)`, one entry per `δ_j` in the order given.
pub fn face_semicontinuity(model: &FinDimModel, b: &[f64], deltas: &[f64], n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    let face = duality_face(model, b, n_samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..model.m()).map(|_| StandardNormal.sample(&mut rng)).collect();
    deltas
        .iter()
        .map(|d| {
            let bj = model.normalize(&b.iter().zip(&u).map(|(x, y)| x + d * y).collect::<Vec<_>>())?;
            let fj = duality_face(model, &bj, n_samples)?;
            Ok(fj.samples.iter().map(|s| hull_distance(&face.samples, s, 200)).fold(0.0, f64::max))
        })
        .collect()
}

/// Both sides of the norm formula `‖f‖_{X_Q*} = inf{Σ‖ω_j‖² : ΣQω_j = f}`.
#[derive(Clone, Debug, Serialize)]
pub struct NormCorollary {
    /// `sup{⟨b, f⟩ : λmax(T_b) ≤ 1}` from projected supergradient ascent.
    pub dual_norm: f64,
    pub dual_multiplier: Vec<f64>,
    pub dual_converged: bool,
    /// `min Σ‖ω_j‖²` over decompositions with at most `terms` pieces.
    pub decomposition_norm: f64,
    pub decomposition: Vec<Vec<f64>>,
    pub decomposition_residual: f64,
    pub decomposition_converged: bool,
}

/// Largest number of pieces in the decomposition side of [`norm_corollary_check`].
pub const MAX_TERMS: usize = 6;

/// `⟨b, f⟩/λmax(T_b)` maximized over directions `b` by ascent with the supergradient
/// `f/λ − ⟨b, f⟩Q(v)/λ²`, then rescaled so that `λmax(T_b) = 1`.
pub fn dual_norm(model: &FinDimModel, f: &[f64], seed: u64) -> (f64, Vec<f64>, bool) {
    let ratio = |b: &[f64]| -> Option<(f64, Vec<f64>, f64)> {
        let (vals, vecs) = model.spectrum(b);
        if vals[0] <= 1e-14 {
            return None;
        }
        let v: Vec<f64> = vecs.column(0).iter().copied().collect();
        Some((model.pairing(b, f) / vals[0], v, vals[0]))
    };
    let fnorm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if fnorm == 0.0 {
        return (0.0, vec![0.0; model.m()], true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Vec<f64>> = vec![f.to_vec()];
    for _ in 0..8 {
        starts.push((0..model.m()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect());
    }
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for b0 in starts {
        let Some((mut r, mut v, mut lam)) = ratio(&b0) else { continue };
        let mut b = b0;
        let mut step = 0.5;
        let mut converged = false;
        for _ in 0..4000 {
            let qv = model.q(&v);
            let fb = model.pairing(&b, f);
            let grad: Vec<f64> = f.iter().zip(&qv).map(|(a, q)| a / lam - fb * q / (lam * lam)).collect();
            let mut moved = false;
            while step > 1e-16 {
                let bn = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                let trial: Vec<f64> = b.iter().zip(&grad).map(|(x, g)| (x + step * bn * g / fnorm) / bn).collect();
                if let Some((tr, tv, tl)) = ratio(&trial) {
                    if tr > r {
                        let gain = tr - r;
                        r = tr;
                        b = trial;
                        v = tv;
                        lam = tl;
                        step *= 1.5;
                        moved = true;
                        if gain <= 1e-15 * r.abs().max(1.0) {
                            converged = true;
                        }
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                converged = true;
                break;
            }
            if converged {
                break;
            }
        }
        let b: Vec<f64> = b.iter().map(|x| x / lam).collect();
        if best.as_ref().map_or(true, |(br, ..)| r > *br) {
            best = Some((r, b, converged));
        }
    }
    best.map_or((0.0, vec![0.0; model.m()], false), |(r, b, c)| (r.max(0.0), b, c))
}

/// Least-energy decomposition `f = Σ_{j ≤ K} Qω_j` as a single minimum-norm problem on `K` copies.
pub fn decomposition_norm(model: &FinDimModel, f: &[f64], terms: usize, opts: &MinNormOptions) -> (f64, Vec<Vec<f64>>, f64, bool) {
    let rep = Replicated { base: model, copies: terms.max(1) };
    let sol = min_norm_solve_problem(&rep, f, opts, None);
    let pieces = sol.solution.chunks(model.n()).map(|c| c.to_vec()).collect();
    (sol.energy, pieces, sol.residual, sol.converged)
}

pub fn norm_corollary_check(model: &FinDimModel, f: &[f64], opts: &MinNormOptions) -> Result<NormCorollary> {
    if f.len() != model.m() {
        return Err(LabError::LengthMismatch { expected: model.m(), got: f.len() });
    }
    let (dual_norm, dual_multiplier, dual_converged) = dual_norm(model, f, opts.seed);
    let terms = MAX_TERMS.min(model.n());
    let (decomposition_norm, decomposition, decomposition_residual, decomposition_converged) = decomposition_norm(model, f, terms, opts);
    Ok(NormCorollary {
        dual_norm,
        dual_multiplier,
        dual_converged,
        decomposition_norm,
        decomposition,
        decomposition_residual,
        decomposition_converged,
    })
}

/// Outcome of [`extreme_point_check`].
#[derive(Clone, Debug, Serialize)]
pub struct ExtremeReport {
    pub extreme: bool,
    pub norm: f64,
    /// A pair of distinct unit-ball points with midpoint `f`, when one was found.
    pub midpoint_witness: Option<(Vec<f64>, Vec<f64>)>,
    /// For extreme `f`: a unit `ω` with `Qω = f`.
    pub preimage: Option<Vec<f64>>,
    pub preimage_energy: Option<f64>,
}

/// Tests whether a unit-norm `f` is an extreme point of the dual unit ball.
///
/// Ball membership of `f ± tv` is decided by the decomposition norm, for the
/// directions `s_j − f` towards the pieces of an optimal decomposition of `f`
/// and `2m` seeded random directions, over the steps `t ∈ {0.5, 0.2, 0.1, 0.05}`.
pub fn extreme_point_check(model: &FinDimModel, f: &[f64], tolerance: f64, opts: &MinNormOptions) -> Result<ExtremeReport> {
    let terms = MAX_TERMS.min(model.n());
    let norm_of = |g: &[f64]| decomposition_norm(model, g, terms, opts);
    let (norm, pieces, _, _) = norm_of(f);
    if (norm - 1.0).abs() > tolerance {
        return Err(LabError::precondition(format!("f must have unit dual norm, found {norm}")));
    }
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for w in &pieces {
        let e: f64 = w.iter().map(|v| v * v).sum();
        if e > 1e-6 {
            let s: Vec<f64> = model.q(w).iter().map(|v| v / e).collect();
            dirs.push(s.iter().zip(f).map(|(a, b)| a - b).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..2 * model.m() {
        dirs.push((0..model.m()).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    for v in &dirs {
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn <= 10.0 * tolerance {
            continue;
        }
        let v: Vec<f64> = v.iter().map(|x| x / vn).collect();
        for t in [0.5, 0.2, 0.1, 0.05] {
            let plus: Vec<f64> = f.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            let minus: Vec<f64> = f.iter().zip(&v).map(|(a, b)| a - t * b).collect();
            let (np, _, rp, _) = norm_of(&plus);
            let (nm, _, rm, _) = norm_of(&minus);
            if np <= 1.0 + tolerance && nm <= 1.0 + tolerance && rp <= 1e-8 && rm <= 1e-8 {
                return Ok(ExtremeReport { extreme: false, norm, midpoint_witness: Some((plus, minus)), preimage: None, preimage_energy: None });
            }
        }
    }
    let sol = min_norm_solve_problem(model, f, opts, None);
    if (sol.energy - 1.0).abs() > tolerance || sol.residual > 1e-8 {
        return Err(LabError::precondition(format!(
            "no unit preimage found for an extreme point (energy {}, residual {:e})",
            sol.energy, sol.residual
        )));
    }
    Ok(ExtremeReport { extreme: true, norm, midpoint_witness: None, preimage_energy: Some(sol.energy), preimage: Some(sol.solution) })
}

/// A pair `ω, γ ∈ 𝒜` with `Qω = Qγ`, `γ ≠ ±ω` and `Q'_ω γ = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub b: Vec<f64>,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `‖Qω − Qγ‖`.
    pub image_gap: f64,
    /// `‖Q'_ω γ‖`.
    pub derivative: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Assumption2Report {
    pub trials: usize,
    pub violations: Vec<Violation>,
}

impl Assumption2Report {
    pub fn summary(&self) -> String {
        if self.violations.is_empty() {
            format!("none found in {} trials", self.trials)
        } else {
            format!("{} violating pairs in {} trials", self.violations.len(), self.trials)
        }
    }
}

/// Verification level for a reported violation.
pub const VIOLATION_TOL: f64 = 1e-8;

fn verify_violation(model: &FinDimModel, b: &[f64], omega: &[f64], gamma: &[f64]) -> Option<Violation> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (vals, _) = model.spectrum(b);
    let tg: Vec<f64> = model.apply_tb(b, gamma);
    let in_face = (norm(gamma) - 1.0).abs() <= VIOLATION_TOL
        && (vals[0] - 1.0).abs() <= VIOLATION_TOL
        && norm(&tg.iter().zip(gamma).map(|(a, c)| a - c).collect::<Vec<_>>()) <= VIOLATION_TOL;
    let distinct = norm(&omega.iter().zip(gamma).map(|(a, c)| a - c).collect::<Vec<_>>()) > 1e-3
        && norm(&omega.iter().zip(gamma).map(|(a, c)| a + c).collect::<Vec<_>>()) > 1e-3;
    let qw = model.q(omega);
    let image_gap = norm(&model.q(gamma).iter().zip(&qw).map(|(a, c)| a - c).collect::<Vec<_>>());
    let derivative = norm(&model.q_prime(omega, gamma));
    (in_face && distinct && image_gap <= VIOLATION_TOL && derivative <= VIOLATION_TOL).then(|| Violation {
        b: b.to_vec(),
        omega: omega.to_vec(),
        gamma: gamma.to_vec(),
        image_gap,
        derivative,
    })
}

/// Searches for pairs `Qω = Qγ`, `Q'_ω γ = 0` with `γ ≠ ±ω` (real scalars).
///
/// Any `γ ∈ 𝒜` with `Qγ = Qω` shares the multiplier of `ω`, so each trial draws a
/// seeded `b`, normalizes it, takes a unit `ω` in `ker(I − T_b)` and minimizes
/// `‖Qγ − Qω‖² + ‖Q'_ω γ‖²` over unit `γ` in the same space orthogonal to `ω`
/// by multi-start projected gradient descent. Hits are re-verified to [`VIOLATION_TOL`].
pub fn assumption2_search(model: &FinDimModel, trials: usize, seed: u64) -> Assumption2Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let structural = model.structural_map();
    for _ in 0..trials {
        let b: Vec<f64> = (0..model.m()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let Ok(b) = model.normalize(&b) else { continue };
        let Ok(basis) = fixed_basis(model, &b) else { continue };
        if basis.len() < 2 {
            continue;
        }
        let d = basis.len();
        let c0: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n0 = c0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let c0: Vec<f64> = c0.iter().map(|v| v / n0).collect();
        let omega = combine(&basis, &c0);
        let qw = model.q(&omega);
        // coordinates of the fixed space orthogonal to ω
        let mut perp: Vec<Vec<f64>> = Vec::new();
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            let proj: f64 = e.iter().zip(&c0).map(|(a, b)| a * b).sum();
            let mut u: Vec<f64> = e.iter().zip(&c0).map(|(a, b)| a - proj * b).collect();
            for p in &perp {
                let s: f64 = u.iter().zip(p).map(|(a, b)| a * b).sum();
                u.iter_mut().zip(p).for_each(|(a, b)| *a -= s * b);
            }
            let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if un > 1e-8 {
                perp.push(u.iter().map(|v| v / un).collect());
            }
        }
        let perp_vecs: Vec<Vec<f64>> = perp.iter().map(|c| combine(&basis, c)).collect();
        let objective = |g: &[f64]| -> f64 {
            let gamma = combine(&perp_vecs, g);
            let qg = model.q(&gamma);
            let dq = model.q_prime(&omega, &gamma);
            qg.iter().zip(&qw).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + dq.iter().map(|v| v * v).sum::<f64>()
        };
        if let Some(l) = &structural {
            let gamma: Vec<f64> = (l * DVector::from_column_slice(&omega)).iter().copied().collect();
            if let Some(v) = verify_violation(model, &b, &omega, &gamma) {
                violations.push(v);
                continue;
            }
        }
        let k = perp_vecs.len();
        for s in halton_sphere(k, if k == 1 { 1 } else { 8 }) {
            let mut g = s;
            let mut val = objective(&g);
            let mut step = 0.1;
            for _ in 0..500 {
                if val < 1e-30 {
                    break;
                }
                let h = 1e-7;
                let grad: Vec<f64> = (0..k)
                    .map(|i| {
                        let mut gp = g.clone();
                        gp[i] += h;
                        let mut gm = g.clone();
                        gm[i] -= h;
                        (objective(&gp) - objective(&gm)) / (2.0 * h)
                    })
                    .collect();
                let mut moved = false;
                while step > 1e-14 {
                    let mut t: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a - step * b).collect();
                    let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
                    t.iter_mut().for_each(|v| *v /= tn);
                    let tv = objective(&t);
                    if tv < val {
                        g = t;
                        val = tv;
                        step *= 1.5;
                        moved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            if let Some(v) = verify_violation(model, &b, &omega, &combine(&perp_vecs, &g)) {
                violations.push(v);
                break;
            }
        }
    }
    Assumption2Report { trials, violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_model_spectra() {
        let s = FinDimModel::simple();
        assert_eq!(s.xq_norm(&[-3.0]), 3.0);
        assert_eq!(s.q(&[2.0, 1.0]), vec![3.0]);
    }

    #[test]
    fn chiral_models_are_reproducible_and_symmetric() {
        let a = FinDimModel::build(4, 2, 7, true).unwrap();
        let b = FinDimModel::build(4, 2, 7, true).unwrap();
        assert_eq!(a, b);
        assert!(a.spectral_symmetry_defect(100, 1) <= 1e-10);
        assert!(FinDimModel::build(3, 2, 7, true).is_err());
        let c = FinDimModel::build_complex(6, 3, 2).unwrap();
        assert!(c.spectral_symmetry_defect(100, 1) <= 1e-10);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<FinDimModel>(&json).unwrap(), a);
    }

    #[test]
    fn generic_model_can_violate_spectral_symmetry() {
        let m = FinDimModel::from_matrices(vec![DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0]))], SpectralSymmetry::Unchecked).unwrap();
        assert_eq!(m.xq_norm(&[1.0]), 2.0);
        assert_eq!(m.operator_norm(&[1.0]), 2.0);
        assert_eq!(m.xq_norm(&[-1.0]), 1.0);
        assert_eq!(m.operator_norm(&[-1.0]), 2.0);
        assert_eq!(m.labels(), vec!["assumption-2ii-unchecked"]);
    }

    #[test]
    fn simple_face_is_a_point() {
        let s = FinDimModel::simple();
        let face = duality_face(&s, &[1.0], 16).unwrap();
        assert_eq!(face.affine_dim, 0);
        assert_eq!(face.fixed_basis.len(), 1);
        assert!((face.samples[0][0] - 1.0).abs() < 1e-15);
        assert!(duality_face(&s, &[0.9], 16).is_err());
    }

    #[test]
    fn doubled_faces_respect_the_span_bound() {
        let base = FinDimModel::build(4, 2, 3, true).unwrap();
        let d = base.doubled();
        let b = d.normalize(&[0.3, -1.1]).unwrap();
        let face = duality_face(&d, &b, 64).unwrap();
        assert_eq!(face.fixed_basis.len(), 2);
        assert!(face.affine_dim <= 3);
        assert!(face.pairing_defect <= 1e-9);
    }

    #[test]
    fn simple_norm_corollary() {
        let s = FinDimModel::simple();
        let r = norm_corollary_check(&s, &[0.5], &MinNormOptions::default()).unwrap();
        assert!((r.dual_norm - 0.5).abs() < 1e-4, "{}", r.dual_norm);
        assert!((r.decomposition_norm - 0.5).abs() < 1e-4, "{}", r.decomposition_norm);
        let z = norm_corollary_check(&s, &[0.0], &MinNormOptions::default()).unwrap();
        assert_eq!((z.dual_norm, z.decomposition_norm), (0.0, 0.0));
    }

    #[test]
    fn simple_extreme_points() {
        let s = FinDimModel::simple();
        let opts = MinNormOptions::default();
        for f in [1.0, -1.0] {
            let r = extreme_point_check(&s, &[f], 1e-6, &opts).unwrap();
            assert!(r.extreme);
            let w = r.preimage.unwrap();
            assert!((s.q(&w)[0] - f).abs() < 1e-8);
        }
    }

    #[test]
    fn assumption2_on_simple_and_doubled() {
        let s = FinDimModel::simple();
        assert!(assumption2_search(&s, 20, 1).violations.is_empty());
        assert!(assumption2_search(&s, 0, 1).violations.is_empty());
        let d = FinDimModel::build(4, 2, 5, true).unwrap().doubled();
        let rep = assumption2_search(&d, 10, 1);
        assert!(!rep.violations.is_empty(), "{}", rep.summary());
        for v in &rep.violations {
            let dot: f64 = v.omega.iter().zip(&v.gamma).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-8);
        }
    }

    /// `C₁ = I`, so `b = e₁` has the eigenvalue 1 twice and `Q₂` varies over the face.
    fn degenerate_chiral() -> FinDimModel {
        let c2 = DMatrix::from_row_slice(2, 2, &[0.4, 0.3, -0.2, -0.5]);
        FinDimModel::from_matrices(vec![chiral_block(&DMatrix::identity(2, 2)), chiral_block(&c2)], SpectralSymmetry::Chiral).unwrap()
    }

    #[test]
    fn midpoint_of_a_flat_face_is_not_extreme() {
        let d = degenerate_chiral();
        let b = [1.0, 0.0];
        let face = duality_face(&d, &b, 64).unwrap();
        assert_eq!(face.fixed_basis.len(), 2);
        assert!(face.affine_dim >= 1 && face.affine_dim <= 3);
        let basis = fixed_basis(&d, &b).unwrap();
        let (s1, s2) = (d.q(&basis[0]), d.q(&basis[1]));
        let f: Vec<f64> = s1.iter().zip(&s2).map(|(a, c)| 0.5 * (a + c)).collect();
        let r = extreme_point_check(&d, &f, 1e-6, &MinNormOptions::default()).unwrap();
        assert!(!r.extreme);
    }

    #[test]
    fn structural_map_is_a_symmetry() {
        let d = FinDimModel::build(4, 2, 9, true).unwrap().doubled();
        let l = d.structural_map().unwrap();
        assert!((&l * &l + DMatrix::identity(8, 8)).amax() < 1e-15);
        let w: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let lw: Vec<f64> = (&l * DVector::from_column_slice(&w)).iter().copied().collect();
        for (a, c) in d.q(&w).iter().zip(d.q(&lw)) {
            assert!((a - c).abs() < 1e-12);
        }
        assert!(d.q_prime(&w, &lw).iter().all(|v| v.abs() < 1e-12));
        assert!(FinDimModel::build(4, 2, 9, false).unwrap().doubled().structural_map().is_none());
    }

    #[test]
    fn faces_vary_upper_semicontinuously() {
        let d = degenerate_chiral();
        let dist = face_semicontinuity(&d, &[1.0, 0.0], &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5], 256, 4).unwrap();
        assert!(dist.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{dist:?}");
        assert!(dist[4] <= 1e-3, "{dist:?}");
    }
}
