//! Quadratic quantities `Q`, their polarizations and Gâteaux derivatives.
//!
//! Every quantity acts on the lab's Hilbert space: fields with zero mean and no
//! Nyquist content. Inputs are projected onto that space before evaluation, and
//! all products are dealiased, so the pairing with the associated operators
//! holds exactly at grid level.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::scalar::Scalar;
use crate::spectral::{product_spectrum, Field, GridSpec, MultiplierSymbol};

type PairFn = dyn Fn([f64; 2], [f64; 2]) -> Complex<f64> + Send + Sync;

/// Paracommutator symbol `A(ξ, η)`.
///
/// The operator is `(T_b(A)ω)^(ξ) = Σ_η b̂(ξ−η) A(ξ,η) ω̂(η)` and the generated
/// quantity has symbol `Ã(ξ, η) = A(−η, ξ)`.
#[derive(Clone)]
pub struct SymbolA {
    tag: String,
    eval: Arc<PairFn>,
    bound: f64,
}

impl SymbolA {
    /// Wraps an evaluator and records `max |A|` over the grid lattice.
    pub fn new(
        tag: impl Into<String>,
        grid: &GridSpec,
        eval: impl Fn([f64; 2], [f64; 2]) -> Complex<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        let eval: Arc<PairFn> = Arc::new(eval);
        let modes: Vec<[f64; 2]> = (0..grid.len())
            .filter(|&p| !grid.is_nyquist(p))
            .map(|p| grid.wavevector(p))
            .collect();
        let mut bound = 0.0f64;
        for &xi in &modes {
            for &eta in &modes {
                let v = eval(xi, eta);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(LabError::invalid("symbol is not finite on the grid lattice"));
                }
                bound = bound.max(v.norm());
            }
        }
        Ok(Self { tag: tag.into(), eval, bound })
    }

    /// `A ≡ 1`: the plain product.
    pub fn one(grid: &GridSpec) -> Result<Self> {
        Self::new("one", grid, |_, _| Complex::new(1.0, 0.0))
    }

    /// `A(ξ,η) = 1 − ξ·η/(|ξ||η|)`, zero when either frequency vanishes.
    pub fn wu_m1(grid: &GridSpec) -> Result<Self> {
        Self::new("wu_m1", grid, |xi, eta| {
            let a = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            let b = (eta[0] * eta[0] + eta[1] * eta[1]).sqrt();
            if a == 0.0 || b == 0.0 {
                return Complex::new(0.0, 0.0);
            }
            Complex::new(1.0 - (xi[0] * eta[0] + xi[1] * eta[1]) / (a * b), 0.0)
        })
    }

    /// `A(ξ,η) = m(ξ) − m(η)`, the symbol of the commutator `[T_m, b]`.
    pub fn commutator(m: MultiplierSymbol, grid: &GridSpec) -> Result<Self> {
        m.check_dim(grid.dim())?;
        let tag = format!("commutator({m})");
        let singular = m.is_singular();
        let n = grid.n() as f64;
        let nyq = -std::f64::consts::PI * n / grid.period();
        let on_nyquist = move |x: [f64; 2]| x[0] <= nyq || x[1] <= nyq;
        Self::new(tag, grid, move |xi, eta| {
            let at = |x: [f64; 2]| {
                if singular && on_nyquist(x) {
                    Complex::new(0.0, 0.0)
                } else {
                    m.eval(x)
                }
            };
            at(xi) - at(eta)
        })
    }

    pub fn from_tag(tag: &str, grid: &GridSpec) -> Result<Self> {
        match tag {
            "one" => Self::one(grid),
            "wu_m1" => Self::wu_m1(grid),
            _ => {
                let inner = tag
                    .strip_prefix("commutator(")
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| LabError::invalid(format!("unknown paracommutator symbol '{tag}'")))?;
                Self::commutator(inner.parse()?, grid)
            }
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// `max |A|` over the lattice the symbol was built on.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, xi: [f64; 2], eta: [f64; 2]) -> Complex<f64> {
        (self.eval)(xi, eta)
    }

    /// Quantity symbol `Ã(ξ,η) = A(−η, ξ)`.
    pub fn eval_tilde(&self, xi: [f64; 2], eta: [f64; 2]) -> Complex<f64> {
        (self.eval)([-eta[0], -eta[1]], xi)
    }
}

impl fmt::Debug for SymbolA {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymbolA({}, bound = {})", self.tag, self.bound)
    }
}

impl PartialEq for SymbolA {
    fn eq(&self, other: &Self) -> bool {
        self.tag == other.tag
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QuantityKind {
    /// `|𝒮ω|² − |ω|²` on complex fields.
    PlanarJacobian,
    /// `ω² − (Hω)²`.
    LineQ1,
    /// `2ωHω`.
    LineQ2,
    /// `ω² − Σ_j (R_jω)²` in dimension `n`.
    RieszCombination(usize),
    /// Scalar part `ωγ − Σ_j R_jω R_jγ` of the pair product, with `ω + iγ` encoding the pair.
    WuScalar,
    /// Vector part `ωR_jγ + γR_jω`.
    WuVector(usize),
    /// Bivector part `R_jω R_kγ − R_kω R_jγ`.
    WuBivector(usize, usize),
    /// `R₁₁ω R₂₂ω − (R₁₂ω)²`.
    MongeAmpere,
    Paracommutator(SymbolA),
}

impl QuantityKind {
    /// Whether the Hilbert space consists of complex fields (planar Jacobian and pair kinds).
    pub fn is_complex(&self) -> bool {
        matches!(self, Self::PlanarJacobian | Self::WuScalar | Self::WuVector(_) | Self::WuBivector(..))
    }

    /// Whether a field encodes a pair `(ω, γ)` as `ω + iγ`.
    pub fn is_pair(&self) -> bool {
        matches!(self, Self::WuScalar | Self::WuVector(_) | Self::WuBivector(..))
    }

    fn fits(&self, dim: usize) -> bool {
        match self {
            Self::PlanarJacobian | Self::MongeAmpere => dim == 2,
            Self::LineQ1 | Self::LineQ2 => dim == 1,
            Self::RieszCombination(n) => *n == dim,
            Self::WuScalar | Self::Paracommutator(_) => true,
            Self::WuVector(j) => (1..=dim).contains(j),
            Self::WuBivector(j, k) => dim == 2 && j != k && (1..=2).contains(j) && (1..=2).contains(k),
        }
    }
}

impl fmt::Display for QuantityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PlanarJacobian => write!(f, "planar_jacobian"),
            Self::LineQ1 => write!(f, "line_q1"),
            Self::LineQ2 => write!(f, "line_q2"),
            Self::RieszCombination(n) => write!(f, "riesz_combination({n})"),
            Self::WuScalar => write!(f, "wu_scalar"),
            Self::WuVector(j) => write!(f, "wu_vector({j})"),
            Self::WuBivector(j, k) => write!(f, "wu_bivector({j},{k})"),
            Self::MongeAmpere => write!(f, "monge_ampere"),
            Self::Paracommutator(a) => write!(f, "paracommutator:{}", a.tag()),
        }
    }
}

/// A quadratic quantity bound to a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantityDescriptor {
    kind: QuantityKind,
    grid: GridSpec,
}

impl QuantityDescriptor {
    pub fn new(kind: QuantityKind, grid: GridSpec) -> Result<Self> {
        if !kind.fits(grid.dim()) {
            return Err(LabError::KindMismatch { kind: kind.to_string(), dim: grid.dim() });
        }
        Ok(Self { kind, grid })
    }

    /// Parses names such as `planar_jacobian`, `wu_bivector(1,2)` or `paracommutator:wu_m1`.
    pub fn parse(name: &str, grid: GridSpec) -> Result<Self> {
        let name = name.trim();
        let bad = || LabError::invalid(format!("unknown quantity '{name}'"));
        if let Some(tag) = name.strip_prefix("paracommutator:") {
            return Self::new(QuantityKind::Paracommutator(SymbolA::from_tag(tag.trim(), &grid)?), grid);
        }
        let (head, args) = match name.find('(') {
            Some(open) if name.ends_with(')') => (
                &name[..open],
                name[open + 1..name.len() - 1]
                    .split(',')
                    .map(|a| a.trim().parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => (name, Vec::new()),
        };
        let kind = match (head, args.as_slice()) {
            ("planar_jacobian", []) => QuantityKind::PlanarJacobian,
            ("line_q1", []) => QuantityKind::LineQ1,
            ("line_q2", []) => QuantityKind::LineQ2,
            ("riesz_combination", [n]) => QuantityKind::RieszCombination(*n),
            ("riesz_combination", []) => QuantityKind::RieszCombination(grid.dim()),
            ("wu_scalar", []) => QuantityKind::WuScalar,
            ("wu_vector", [j]) => QuantityKind::WuVector(*j),
            ("wu_bivector", [j, k]) => QuantityKind::WuBivector(*j, *k),
            ("monge_ampere", []) => QuantityKind::MongeAmpere,
            _ => return Err(bad()),
        };
        Self::new(kind, grid)
    }

    pub fn kind(&self) -> &QuantityKind {
        &self.kind
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn is_complex(&self) -> bool {
        self.kind.is_complex()
    }

    /// Dimension of the realified Hilbert space.
    pub fn realified_dim(&self) -> usize {
        if self.is_complex() {
            2 * self.grid.len()
        } else {
            self.grid.len()
        }
    }

    /// Projects a field onto the Hilbert space of this quantity.
    ///
    /// Rejects fields on other grids and, for real kinds, fields with a
    /// non-negligible imaginary part.
    pub fn to_space<T: Scalar>(&self, w: &Field<T>) -> Result<Field<T>> {
        if *w.grid() != self.grid {
            return Err(LabError::GridMismatch);
        }
        if !w.is_finite() {
            let index = w.values().iter().position(|v| !(v.re.is_finite() && v.im.is_finite())).unwrap_or(0);
            return Err(LabError::NonFinite { index });
        }
        let w = if self.is_complex() {
            w.clone()
        } else {
            let tol = T::epsilon() * T::of(1e3) * w.max_abs().max(T::one());
            if w.max_imag() > tol {
                return Err(LabError::invalid(format!("{} acts on real fields", self.kind)));
            }
            w.real_part()
        };
        Ok(w.project_active())
    }
}

impl fmt::Display for QuantityDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

impl Serialize for QuantityKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Serialize for QuantityDescriptor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("QuantityDescriptor", 2)?;
        st.serialize_field("kind", &self.kind)?;
        st.serialize_field("grid", &self.grid)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for QuantityDescriptor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            kind: String,
            grid: GridSpec,
        }
        let raw = Raw::deserialize(d)?;
        Self::parse(&raw.kind, raw.grid).map_err(serde::de::Error::custom)
    }
}

/// Spectral workspace: spectra of transformed fields and dealiased products.
pub(crate) struct Spectral<'a> {
    pub grid: &'a GridSpec,
}

impl<'a> Spectral<'a> {
    pub fn new(grid: &'a GridSpec) -> Self {
        Self { grid }
    }

    pub fn apply<T: Scalar>(&self, spec: &[Complex<T>], m: &MultiplierSymbol) -> Vec<Complex<T>> {
        let table = m.table::<T>(self.grid).expect("multiplier validated against the descriptor");
        spec.iter().zip(&table).map(|(a, b)| *a * *b).collect()
    }

    pub fn product<T: Scalar>(&self, a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
        product_spectrum(self.grid, a, b)
    }

    /// Spectrum of the complex conjugate field.
    pub fn conj<T: Scalar>(&self, spec: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.grid.n();
        (0..spec.len())
            .map(|p| {
                let [a, b] = self.grid.axes(p);
                let q = self.grid.flat([(n - a) % n, (n - b) % n]);
                spec[q].conj()
            })
            .collect()
    }

    pub fn re<T: Scalar>(&self, spec: &[Complex<T>]) -> Vec<Complex<T>> {
        let c = self.conj(spec);
        spec.iter().zip(&c).map(|(a, b)| (*a + *b) * T::of(0.5)).collect()
    }

    pub fn im<T: Scalar>(&self, spec: &[Complex<T>]) -> Vec<Complex<T>> {
        let c = self.conj(spec);
        let half = Complex::new(T::zero(), T::of(-0.5));
        spec.iter().zip(&c).map(|(a, b)| (*a - *b) * half).collect()
    }
}

fn add_into<T: Scalar>(acc: &mut [Complex<T>], s: T, x: &[Complex<T>]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a = *a + *v * s;
    }
}

fn riesz(j: usize) -> MultiplierSymbol {
    MultiplierSymbol::Riesz(j)
}

/// Pair bilinear map `B(ω, γ)` of the Wu kinds, on spectra of real fields.
fn wu_pair<T: Scalar>(sp: &Spectral, kind: &QuantityKind, om: &[Complex<T>], ga: &[Complex<T>]) -> Vec<Complex<T>> {
    let dim = sp.grid.dim();
    let one = T::one();
    match kind {
        QuantityKind::WuScalar => {
            let mut out = sp.product(om, ga);
            for j in 1..=dim {
                let a = sp.apply(om, &riesz(j));
                let b = sp.apply(ga, &riesz(j));
                add_into(&mut out, -one, &sp.product(&a, &b));
            }
            out
        }
        QuantityKind::WuVector(j) => {
            let mut out = sp.product(om, &sp.apply(ga, &riesz(*j)));
            add_into(&mut out, one, &sp.product(ga, &sp.apply(om, &riesz(*j))));
            out
        }
        QuantityKind::WuBivector(j, k) => {
            let mut out = sp.product(&sp.apply(om, &riesz(*j)), &sp.apply(ga, &riesz(*k)));
            add_into(&mut out, -one, &sp.product(&sp.apply(om, &riesz(*k)), &sp.apply(ga, &riesz(*j))));
            out
        }
        _ => unreachable!("pair map requested for a non-pair kind"),
    }
}

/// Paracommutator-generated form `Σ ω̂(ξ) γ̂(η) Ã(ξ,η) e^{i(ξ+η)·x}` on spectra.
fn paracommutator_form<T: Scalar>(grid: &GridSpec, a: &SymbolA, w: &[Complex<T>], g: &[Complex<T>]) -> Vec<Complex<T>> {
    let support = |s: &[Complex<T>]| -> Vec<usize> {
        (0..s.len()).filter(|&p| !grid.is_nyquist(p) && s[p] != Complex::new(T::zero(), T::zero())).collect()
    };
    let sw = support(w);
    let sg = support(g);
    let mut out = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let scale = T::one() / T::of(grid.len() as f64);
    for &p in &sw {
        let kp = grid.mode(p);
        let xi = grid.wavevector(p);
        for &q in &sg {
            let kq = grid.mode(q);
            let Some(r) = grid.mode_position([kp[0] + kq[0], kp[1] + kq[1]]) else {
                continue;
            };
            if grid.is_nyquist(r) {
                continue;
            }
            let s = a.eval_tilde(xi, grid.wavevector(q));
            let s = Complex::new(T::of(s.re), T::of(s.im));
            out[r] = out[r] + w[p] * g[q] * s * scale;
        }
    }
    out
}

/// Symmetric bilinear form `B(w, g)` with `B(w, w) = Q(w)`, returned as a spectrum.
fn polar_spectrum<T: Scalar>(d: &QuantityDescriptor, w: &[Complex<T>], g: &[Complex<T>]) -> Vec<Complex<T>> {
    let sp = Spectral::new(&d.grid);
    let one = T::one();
    let half = T::of(0.5);
    match &d.kind {
        QuantityKind::PlanarJacobian => {
            let sw = sp.apply(w, &MultiplierSymbol::Beurling);
            let sg = sp.apply(g, &MultiplierSymbol::Beurling);
            let mut out = sp.product(&sw, &sp.conj(&sg));
            add_into(&mut out, -one, &sp.product(w, &sp.conj(g)));
            sp.re(&out)
        }
        QuantityKind::LineQ1 | QuantityKind::RieszCombination(_) => {
            let mut out = sp.product(w, g);
            for j in 1..=d.grid.dim() {
                let a = sp.apply(w, &riesz(j));
                let b = sp.apply(g, &riesz(j));
                add_into(&mut out, -one, &sp.product(&a, &b));
            }
            out
        }
        QuantityKind::LineQ2 => {
            let mut out = sp.product(w, &sp.apply(g, &MultiplierSymbol::Hilbert));
            add_into(&mut out, one, &sp.product(g, &sp.apply(w, &MultiplierSymbol::Hilbert)));
            out
        }
        QuantityKind::MongeAmpere => {
            let r = |s: &[Complex<T>], j, k| sp.apply(s, &MultiplierSymbol::RieszProduct(j, k));
            let mut out = sp.product(&r(w, 1, 1), &r(g, 2, 2));
            add_into(&mut out, one, &sp.product(&r(g, 1, 1), &r(w, 2, 2)));
            for v in out.iter_mut() {
                *v = *v * half;
            }
            add_into(&mut out, -one, &sp.product(&r(w, 1, 2), &r(g, 1, 2)));
            out
        }
        kind @ (QuantityKind::WuScalar | QuantityKind::WuVector(_) | QuantityKind::WuBivector(..)) => {
            let (om, ga) = (sp.re(w), sp.im(w));
            let (ph, ps) = (sp.re(g), sp.im(g));
            let mut out = wu_pair(&sp, kind, &om, &ps);
            add_into(&mut out, one, &wu_pair(&sp, kind, &ph, &ga));
            for v in out.iter_mut() {
                *v = *v * half;
            }
            out
        }
        QuantityKind::Paracommutator(a) => {
            let mut out = paracommutator_form(&d.grid, a, w, g);
            add_into(&mut out, one, &paracommutator_form(&d.grid, a, g, w));
            for v in out.iter_mut() {
                *v = *v * half;
            }
            sp.re(&out)
        }
    }
}

fn real_field<T: Scalar>(grid: GridSpec, spec: Vec<Complex<T>>) -> Field<T> {
    Field::from_spectrum(grid, spec).real_part()
}

/// `B(w, g)`, the symmetric bilinear form with `B(w, w) = Q(w)`; equal to half of [`gateaux`].
pub fn bilinear<T: Scalar>(d: &QuantityDescriptor, w: &Field<T>, g: &Field<T>) -> Result<Field<T>> {
    let w = d.to_space(w)?;
    let g = d.to_space(g)?;
    Ok(real_field(d.grid, polar_spectrum(d, &w.spectrum(), &g.spectrum())))
}

/// `Q(w)` with dealiased products; real valued.
pub fn eval_quantity<T: Scalar>(d: &QuantityDescriptor, w: &Field<T>) -> Result<Field<T>> {
    let w = d.to_space(w)?;
    let s = w.spectrum();
    Ok(real_field(d.grid, polar_spectrum(d, &s, &s)))
}

/// Full Gâteaux derivative `Q'_w g = 2B(w, g)`, so `gateaux(d, w, w) = 2Q(w)`.
pub fn gateaux<T: Scalar>(d: &QuantityDescriptor, w: &Field<T>, g: &Field<T>) -> Result<Field<T>> {
    Ok(bilinear(d, w, g)?.scale(T::of(2.0)))
}

/// Pair bilinear map of a Wu kind on separate real fields `ω`, `γ`.
pub fn wu_product<T: Scalar>(d: &QuantityDescriptor, omega: &Field<T>, gamma: &Field<T>) -> Result<Field<T>> {
    if !d.kind.is_pair() {
        return Err(LabError::invalid(format!("{} is not a pair quantity", d.kind)));
    }
    let real = QuantityDescriptor { kind: QuantityKind::LineQ1, grid: d.grid };
    let om = real_checked(&real, d, omega)?;
    let ga = real_checked(&real, d, gamma)?;
    let sp = Spectral::new(&d.grid);
    Ok(real_field(d.grid, wu_pair(&sp, &d.kind, &om.spectrum(), &ga.spectrum())))
}

fn real_checked<T: Scalar>(real: &QuantityDescriptor, d: &QuantityDescriptor, f: &Field<T>) -> Result<Field<T>> {
    if *f.grid() != d.grid {
        return Err(LabError::GridMismatch);
    }
    let tol = T::epsilon() * T::of(1e3) * f.max_abs().max(T::one());
    if f.max_imag() > tol {
        return Err(LabError::invalid(format!("{} components must be real", real.kind)));
    }
    Ok(f.real_part().project_active())
}

/// Encodes a pair of real fields as `ω + iγ`.
pub fn encode_pair<T: Scalar>(omega: &Field<T>, gamma: &Field<T>) -> Result<Field<T>> {
    omega.zip_map(gamma, |a, b| Complex::new(a.re, b.re))
}

/// Splits `ω + iγ` into `(ω, γ)`.
pub fn decode_pair<T: Scalar>(w: &Field<T>) -> (Field<T>, Field<T>) {
    (w.real_part(), w.imag_part())
}

/// Largest per-axis mode index allowed for paracommutator inputs.
pub fn paracommutator_limit(grid: &GridSpec) -> usize {
    grid.n() / 3
}

/// `Q_Ã(w, g)` by a direct double sum over the supported modes.
///
/// Inputs must be band limited to `|k| ≤ N/3` per axis; the sum runs over all
/// non-Nyquist modes, including the mean.
pub fn eval_paracommutator_quantity<T: Scalar>(a: &SymbolA, w: &Field<T>, g: &Field<T>) -> Result<Field<T>> {
    w.check_grid(g)?;
    let grid = *w.grid();
    let limit = paracommutator_limit(&grid);
    for f in [w, g] {
        let support = f.support_radius(T::of(1e-12));
        if support > limit {
            return Err(LabError::SupportTooLarge { support, limit });
        }
    }
    let spec = paracommutator_form(&grid, a, &w.spectrum(), &g.spectrum());
    Ok(Field::from_spectrum(grid, spec))
}
