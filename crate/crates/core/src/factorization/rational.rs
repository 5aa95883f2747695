use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Rational `U(z) = c · Π(z − z_k)^{m_k} / Π(z − p_j)^{n_j}` analytic in the upper half-plane.
///
/// Zeros lie in the open upper half-plane and poles in the open lower half-plane.
/// The pole excess is at least two so that `U ∈ H¹(ℂ₊)` and the factors
/// `BΦ^{1/2}`, `Φ^{1/2}` lie in `H²(ℂ₊)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RationalJson", into = "RationalJson")]
pub struct RationalFunction {
    zeros: Vec<(Complex64, u32)>,
    poles: Vec<(Complex64, u32)>,
    scale: Complex64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RationalJson {
    zeros: Vec<(f64, f64, u32)>,
    poles: Vec<(f64, f64, u32)>,
    scale: (f64, f64),
}

impl TryFrom<RationalJson> for RationalFunction {
    type Error = LabError;

    fn try_from(j: RationalJson) -> Result<Self> {
        let pts = |v: Vec<(f64, f64, u32)>| v.into_iter().map(|(re, im, m)| (Complex64::new(re, im), m)).collect();
        RationalFunction::new(pts(j.zeros), pts(j.poles), Complex64::new(j.scale.0, j.scale.1))
    }
}

impl From<RationalFunction> for RationalJson {
    fn from(r: RationalFunction) -> Self {
        let pts = |v: Vec<(Complex64, u32)>| v.into_iter().map(|(z, m)| (z.re, z.im, m)).collect();
        RationalJson { zeros: pts(r.zeros), poles: pts(r.poles), scale: (r.scale.re, r.scale.im) }
    }
}

fn total(v: &[(Complex64, u32)]) -> u32 {
    v.iter().map(|(_, m)| *m).sum()
}

impl RationalFunction {
    pub fn new(zeros: Vec<(Complex64, u32)>, poles: Vec<(Complex64, u32)>, scale: Complex64) -> Result<Self> {
        if !(scale.re.is_finite() && scale.im.is_finite()) {
            return Err(LabError::invalid("scale must be finite"));
        }
        for (z, m) in &zeros {
            if *m == 0 || !z.re.is_finite() || !(z.im > 0.0 && z.im.is_finite()) {
                return Err(LabError::invalid(format!("zero {z} must lie in the open upper half-plane with multiplicity ≥ 1")));
            }
        }
        for (p, m) in &poles {
            if *m == 0 || !p.re.is_finite() || !(p.im < 0.0 && p.im.is_finite()) {
                return Err(LabError::invalid(format!("pole {p} must lie in the open lower half-plane with multiplicity ≥ 1")));
            }
        }
        if total(&poles) < total(&zeros) + 2 {
            return Err(LabError::invalid(format!(
                "pole multiplicity {} must exceed zero multiplicity {} by at least 2",
                total(&poles),
                total(&zeros)
            )));
        }
        Ok(Self { zeros, poles, scale })
    }

    /// `c · (z − p)^{−n}`.
    pub fn pole_power(p: Complex64, n: u32, scale: Complex64) -> Result<Self> {
        Self::new(Vec::new(), vec![(p, n)], scale)
    }

    pub fn zeros(&self) -> &[(Complex64, u32)] {
        &self.zeros
    }

    pub fn poles(&self) -> &[(Complex64, u32)] {
        &self.poles
    }

    pub fn scale(&self) -> Complex64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.scale == Complex64::new(0.0, 0.0)
    }

    pub fn pole_excess(&self) -> u32 {
        total(&self.poles) - total(&self.zeros)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut v = self.scale;
        for (a, m) in &self.zeros {
            v *= (z - a).powu(*m);
        }
        for (p, n) in &self.poles {
            v /= (z - p).powu(*n);
        }
        v
    }

    /// Boundary data `f(x) = Re U(x)`.
    pub fn boundary(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).re
    }

    /// Multiplies by `((z − a)/(z − ā))²`.
    pub fn with_mobius_pair(&self, a: Complex64) -> Result<Self> {
        let mut zeros = self.zeros.clone();
        let mut poles = self.poles.clone();
        zeros.push((a, 2));
        poles.push((a.conj(), 2));
        Self::new(zeros, poles, self.scale)
    }

    pub fn blaschke(&self) -> Blaschke {
        Blaschke::new(if self.is_zero() { Vec::new() } else { self.zeros.clone() })
    }

    /// `Φ^{1/2}` for `Φ = U/B` in closed form: `√c · Π(z − z̄_k)^{m_k/2} / Π(z − p_j)^{n_j/2}`
    /// with principal roots, each analytic on the closed upper half-plane. Agrees
    /// with any other analytic branch up to a global sign.
    pub fn outer_sqrt(&self, z: Complex64) -> Complex64 {
        let mut v = self.scale.sqrt();
        for (a, m) in &self.zeros {
            v *= (z - a.conj()).sqrt().powu(*m);
        }
        for (p, n) in &self.poles {
            v /= (z - p).sqrt().powu(*n);
        }
        v
    }

    /// Largest modulus among zeros and poles.
    pub fn radius(&self) -> f64 {
        self.zeros.iter().chain(&self.poles).map(|(z, _)| z.norm()).fold(0.0, f64::max)
    }
}

/// Finite Blaschke product `Π((z − z_k)/(z − z̄_k))^{m_k}` over upper half-plane zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Blaschke {
    zeros: Vec<(Complex64, u32)>,
}

impl Blaschke {
    pub fn new(zeros: Vec<(Complex64, u32)>) -> Self {
        Self { zeros }
    }

    pub fn degree(&self) -> u32 {
        total(&self.zeros)
    }

    pub fn zeros(&self) -> &[(Complex64, u32)] {
        &self.zeros
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.zeros.iter().fold(Complex64::new(1.0, 0.0), |v, (a, m)| v * ((z - a) / (z - a.conj())).powu(*m))
    }
}
