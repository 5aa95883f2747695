use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{LabError, Result};

const MAX_DEPTH: u32 = 48;
const VERTICAL_STEPS: usize = 256;

fn usable(v: Complex64) -> bool {
    v.re.is_finite() && v.im.is_finite() && v != Complex64::new(0.0, 0.0)
}

/// Continuous logarithm of a zero-free `phi`, carried along straight segments
/// with step halving whenever a step turns the phase by more than `π/2` or
/// changes the modulus by more than a factor `e`.
struct Walker<'a> {
    phi: &'a dyn Fn(Complex64) -> Complex64,
    z: Complex64,
    val: Complex64,
    log: Complex64,
}

impl<'a> Walker<'a> {
    fn start(phi: &'a dyn Fn(Complex64) -> Complex64, z: Complex64) -> Result<Self> {
        let val = phi(z);
        if !usable(val) {
            return Err(LabError::Branch(format!("function vanishes at the reference point {z}")));
        }
        Ok(Self { phi, z, val, log: val.ln() })
    }

    fn step(&mut self, zb: Complex64, depth: u32) -> Result<()> {
        let vb = (self.phi)(zb);
        if usable(vb) {
            let d = (vb / self.val).ln();
            if d.im.abs() <= FRAC_PI_2 && d.re.abs() <= 1.0 {
                self.log += d;
                self.z = zb;
                self.val = vb;
                return Ok(());
            }
        }
        if depth >= MAX_DEPTH {
            return Err(LabError::Branch(format!("continuation path passes through a zero near {zb}")));
        }
        let m = 0.5 * (self.z + zb);
        self.step(m, depth + 1)?;
        self.step(zb, depth + 1)
    }

    fn segment(&mut self, zb: Complex64, steps: usize) -> Result<()> {
        let za = self.z;
        for s in 1..=steps {
            self.step(za + (zb - za) * (s as f64 / steps as f64), 0)?;
        }
        Ok(())
    }
}

fn continue_along(phi: &dyn Fn(Complex64) -> Complex64, z_ref: Complex64, xv: f64, y0: f64, xs: &[f64]) -> Result<Vec<Complex64>> {
    let mut w = Walker::start(phi, z_ref)?;
    let top = Complex64::new(xv, z_ref.im);
    if xv != z_ref.re {
        w.segment(top, VERTICAL_STEPS)?;
    }
    w.segment(Complex64::new(xv, y0), VERTICAL_STEPS)?;
    let base = (w.z, w.val, w.log);
    let mut out = vec![Complex64::new(0.0, 0.0); xs.len()];
    let split = xs.partition_point(|x| *x < xv);
    for i in (0..split).rev() {
        w.step(Complex64::new(xs[i], y0), 0)?;
        out[i] = w.log;
    }
    (w.z, w.val, w.log) = base;
    for (i, x) in xs.iter().enumerate().skip(split) {
        w.step(Complex64::new(*x, y0), 0)?;
        out[i] = w.log;
    }
    Ok(out)
}

/// Continuous `log φ` at the points `x + i·y0` (sorted `xs`), starting from the
/// principal logarithm at `z_ref` and following a vertical descent to the
/// sample line, then horizontal sweeps outwards. If the path meets a zero the
/// vertical leg is shifted sideways (at the height of `z_ref`) and retried.
pub fn continued_log(phi: &dyn Fn(Complex64) -> Complex64, z_ref: Complex64, y0: f64, xs: &[f64]) -> Result<Vec<Complex64>> {
    if xs.windows(2).any(|w| w[0] > w[1]) {
        return Err(LabError::invalid("sample abscissae must be sorted"));
    }
    let scale = 1.0 + z_ref.norm();
    let mut last = None;
    for shift in [0.0, 0.0371, -0.0529, 0.1183] {
        match continue_along(phi, z_ref, z_ref.re + shift * scale, y0, xs) {
            Ok(v) => return Ok(v),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Square root `exp(½ log φ)` along the same continuation.
pub fn continued_sqrt(phi: &dyn Fn(Complex64) -> Complex64, z_ref: Complex64, y0: f64, xs: &[f64]) -> Result<Vec<Complex64>> {
    Ok(continued_log(phi, z_ref, y0, xs)?.into_iter().map(|l| (0.5 * l).exp()).collect())
}

/// Nodes of the Cayley map `x = −cot(θ/2)` at `θ_j = 2π(j + ½)/m`, increasing in `x`,
/// with quadrature weights `dx = (π/m)·csc²(θ_j/2)`.
pub struct CayleyGrid {
    pub x: Vec<f64>,
    pub weight: Vec<f64>,
}

impl CayleyGrid {
    pub fn new(m: usize) -> Self {
        let (x, weight) = (0..m)
            .map(|j| {
                let th = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                let s = (0.5 * th).sin();
                (-(0.5 * th).cos() / s, PI / m as f64 / (s * s))
            })
            .unzip();
        Self { x, weight }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Hilbert transform on the line through the conjugate function on the
    /// circle, normalized to vanish at `x = ±∞`.
    pub fn hilbert(&self, u: &[f64]) -> Vec<f64> {
        let m = self.len();
        assert_eq!(u.len(), m);
        let mut planner = FftPlanner::<f64>::new();
        let mut data: Vec<Complex64> = u.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        planner.plan_fft_forward(m).process(&mut data);
        let mut at_infinity = 0.0;
        let theta0 = PI / m as f64;
        for (k, v) in data.iter_mut().enumerate() {
            let signed = if k < m / 2 { k as i64 } else { k as i64 - m as i64 };
            let mult = if signed == 0 || 2 * k == m { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, -(signed.signum() as f64)) };
            *v *= mult / m as f64;
            at_infinity += (*v * Complex64::from_polar(1.0, -(signed as f64) * theta0)).re;
        }
        planner.plan_fft_inverse(m).process(&mut data);
        data.iter().map(|v| v.re - at_infinity).collect()
    }

    pub fn l1(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.weight).map(|(v, w)| v.abs() * w).sum()
    }

    pub fn l2(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.weight).map(|(v, w)| v * v * w).sum::<f64>().sqrt()
    }
}
