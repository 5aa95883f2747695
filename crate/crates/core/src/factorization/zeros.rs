use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]` in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(LabError::invalid("rectangle needs finite x0 < x1 and y0 < y1"));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (self.x0..=self.x1).contains(&z.re) && (self.y0..=self.y1).contains(&z.im)
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    fn side(&self) -> f64 {
        (self.x1 - self.x0).max(self.y1 - self.y0)
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.x0, self.y0),
            Complex64::new(self.x1, self.y0),
            Complex64::new(self.x1, self.y1),
            Complex64::new(self.x0, self.y1),
        ]
    }

    fn split(&self, frac: f64) -> [Rect; 2] {
        if self.x1 - self.x0 >= self.y1 - self.y0 {
            let xm = self.x0 + frac * (self.x1 - self.x0);
            [Rect { x1: xm, ..*self }, Rect { x0: xm, ..*self }]
        } else {
            let ym = self.y0 + frac * (self.y1 - self.y0);
            [Rect { y1: ym, ..*self }, Rect { y0: ym, ..*self }]
        }
    }
}

/// A located zero and its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub re: f64,
    pub im: f64,
    pub multiplicity: u32,
}

impl ZeroReport {
    pub fn point(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Side length at which subdivision stops.
pub const MIN_BOX_SIDE: f64 = 1e-6;
/// Relative modulus below which `U` counts as vanishing on a search boundary.
pub const MIN_BOUNDARY_MODULUS: f64 = 1e-8;

const EDGE_SAMPLES: usize = 24;
const MAX_EDGE_DEPTH: u32 = 40;

/// Accumulated argument change of `u` along a segment. A step is accepted when it
/// turns by less than `π/4` and the midpoint modulus stays within a factor `e` of
/// the endpoints' geometric mean, which also catches even-order zeros on the segment.
fn edge_argument(u: &dyn Fn(Complex64) -> Complex64, a: Complex64, ua: Complex64, b: Complex64, ub: Complex64, depth: u32) -> Option<f64> {
    let ok = |v: Complex64| v.re.is_finite() && v.im.is_finite() && v != Complex64::new(0.0, 0.0);
    if !ok(ub) {
        return None;
    }
    let m = 0.5 * (a + b);
    let um = u(m);
    if !ok(um) {
        return None;
    }
    let d1 = (um / ua).arg();
    let d2 = (ub / um).arg();
    let dip = (um.norm() / (ua.norm() * ub.norm()).sqrt()).ln();
    if d1.abs() + d2.abs() <= PI / 4.0 && dip.abs() <= 1.0 {
        return Some(d1 + d2);
    }
    if depth >= MAX_EDGE_DEPTH {
        return None;
    }
    Some(edge_argument(u, a, ua, m, um, depth + 1)? + edge_argument(u, m, um, b, ub, depth + 1)?)
}

/// Winding number of `u` around the rectangle boundary with the smallest sampled modulus.
/// `None` when the argument cannot be resolved, i.e. a zero sits on or extremely near the boundary.
fn winding(u: &dyn Fn(Complex64) -> Complex64, r: &Rect) -> Option<(i64, f64, f64)> {
    let c = r.corners();
    let mut total = 0.0;
    let mut min_mod = f64::INFINITY;
    let mut max_mod: f64 = 0.0;
    for k in 0..4 {
        let (a, b) = (c[k], c[(k + 1) % 4]);
        let mut za = a;
        let mut ua = u(za);
        if !(ua.re.is_finite() && ua.im.is_finite()) || ua == Complex64::new(0.0, 0.0) {
            return None;
        }
        for s in 1..=EDGE_SAMPLES {
            let zb = a + (b - a) * (s as f64 / EDGE_SAMPLES as f64);
            let ub = u(zb);
            total += edge_argument(u, za, ua, zb, ub, 0)?;
            min_mod = min_mod.min(ua.norm());
            max_mod = max_mod.max(ua.norm());
            za = zb;
            ua = ub;
        }
    }
    let w = total / (2.0 * PI);
    let rounded = w.round();
    if (w - rounded).abs() > 0.1 {
        return None;
    }
    Some((rounded as i64, min_mod, max_mod))
}

/// Number of zeros of `u` inside `r` by the argument principle.
pub fn winding_number(u: &dyn Fn(Complex64) -> Complex64, r: &Rect) -> Result<i64> {
    let (w, min_mod, max_mod) =
        winding(u, r).ok_or_else(|| LabError::ZeroFinding("argument along the box boundary could not be resolved".into()))?;
    if min_mod < MIN_BOUNDARY_MODULUS * max_mod {
        return Err(LabError::ZeroFinding(format!(
            "U nearly vanishes on the box boundary (min modulus {min_mod:e}, max {max_mod:e})"
        )));
    }
    Ok(w)
}

fn subdivide(u: &dyn Fn(Complex64) -> Complex64, r: Rect, count: i64, out: &mut Vec<ZeroReport>) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    if count < 0 {
        return Err(LabError::ZeroFinding(format!("negative winding {count}: U has poles inside the search box")));
    }
    if r.side() <= MIN_BOX_SIDE {
        let c = r.center();
        out.push(ZeroReport { re: c.re, im: c.im, multiplicity: count as u32 });
        return Ok(());
    }
    // Off-centre cuts keep subdivision lines away from symmetric zero positions.
    for frac in [0.5137, 0.4671, 0.5529, 0.4412] {
        let [a, b] = r.split(frac);
        let (Some((wa, ..)), Some((wb, ..))) = (winding(u, &a), winding(u, &b)) else {
            continue;
        };
        if wa + wb != count {
            continue;
        }
        subdivide(u, a, wa, out)?;
        return subdivide(u, b, wb, out);
    }
    Err(LabError::ZeroFinding(format!(
        "zero too close to every subdivision line of [{}, {}] × [{}, {}]",
        r.x0, r.x1, r.y0, r.y1
    )))
}

/// Zeros of an analytic `u` inside `r` by recursive bisection of rectangles,
/// counting with the winding number until the side drops to [`MIN_BOX_SIDE`].
/// The reported point is the centre of the final box and the multiplicity its winding number.
pub fn winding_zeros(u: &dyn Fn(Complex64) -> Complex64, r: &Rect) -> Result<Vec<ZeroReport>> {
    let w = winding_number(u, r)?;
    let mut out = Vec::new();
    subdivide(u, *r, w, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::RationalFunction;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn counts_double_zero() {
        let u = RationalFunction::new(vec![(c(0.0, 2.0), 2)], vec![(c(0.0, -2.0), 2), (c(0.0, -1.0), 3)], c(1.0, 0.0)).unwrap();
        let r = Rect::new(-5.0, 5.0, 0.1, 5.0).unwrap();
        let f = |z| u.eval(z);
        assert_eq!(winding_number(&f, &r).unwrap(), 2);
        let zs = winding_zeros(&f, &r).unwrap();
        assert_eq!(zs.len(), 1, "{zs:?}");
        assert_eq!(zs[0].multiplicity, 2);
        assert!((zs[0].point() - c(0.0, 2.0)).norm() < 1e-6);
    }

    #[test]
    fn separates_nearby_zeros() {
        let f = |z: Complex64| (z - c(0.3, 1.0)) * (z - c(0.31, 1.0)) * (z - c(-2.0, 0.5)).powu(3);
        let r = Rect::new(-3.0, 3.0, 0.2, 3.0).unwrap();
        let mut zs = winding_zeros(&f, &r).unwrap();
        zs.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        let got: Vec<u32> = zs.iter().map(|z| z.multiplicity).collect();
        assert_eq!(got, vec![3, 1, 1]);
        assert!((zs[1].point() - c(0.3, 1.0)).norm() < 1e-6);
    }

    #[test]
    fn zero_free_and_boundary_zero() {
        let u = RationalFunction::pole_power(c(0.0, -1.0), 2, c(1.0, 0.0)).unwrap();
        let f = |z| u.eval(z);
        assert!(winding_zeros(&f, &Rect::new(-4.0, 4.0, 0.1, 4.0).unwrap()).unwrap().is_empty());
        let g = |z: Complex64| z - c(0.0, 1.0);
        assert!(winding_number(&g, &Rect::new(-1.0, 1.0, 1.0, 2.0).unwrap()).is_err());
    }
}
