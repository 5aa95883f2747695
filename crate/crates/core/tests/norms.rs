use std::f64::consts::PI;

use hqlab::corpus::commutator_corpus;
use hqlab::norms::{bmo_norm, h1_norm, lp_norm, ScaleLadder};
use hqlab::quantities::{eval_quantity, QuantityDescriptor};
use hqlab::spectral::{random_field, Field, GridSpec};
use hqlab::Field64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// `a = χ[0,1) − χ[1,2)` on a torus of period `period`.
fn atom(x: f64) -> f64 {
    if (0.0..1.0).contains(&x) {
        1.0
    } else if (1.0..2.0).contains(&x) {
        -1.0
    } else {
        0.0
    }
}

/// `a ∗ χ_t` in closed form, periodized.
fn smoothed_atom(x: f64, t: f64, period: f64) -> f64 {
    let phi = Normal::new(0.0, 1.0).unwrap();
    (-2..=2)
        .map(|k| {
            let y = x + k as f64 * period;
            phi.cdf(y / t) - 2.0 * phi.cdf((y - 1.0) / t) + phi.cdf((y - 2.0) / t)
        })
        .sum()
}

/// `∫ max_j |a ∗ χ_{t_j}|` by the midpoint rule on `samples` cells.
fn atom_oracle(ladder: &ScaleLadder, period: f64, samples: usize) -> f64 {
    let h = period / samples as f64;
    (0..samples)
        .map(|i| {
            let x = -period / 2.0 + (i as f64 + 0.5) * h;
            ladder.scales().iter().map(|&t| smoothed_atom(x, t, period).abs()).fold(0.0, f64::max)
        })
        .sum::<f64>()
        * h
}

#[test]
fn dyadic_atom_matches_erf_oracle() {
    let (n, period) = (1024, 64.0);
    let g = GridSpec::line(n, period).unwrap();
    let f = Field::from_fn(g, |x| atom(x[0]).into()).unwrap();
    let ladder = ScaleLadder::for_grid(&g);
    let est = h1_norm(&f, &ladder).unwrap();
    let oracle = atom_oracle(&ladder, period, 2 * n);
    assert!(!est.divergent);
    assert!((est.value - oracle).abs() <= 0.03 * oracle, "{} vs {oracle}", est.value);
}

#[test]
fn h1_to_l1_ratio_is_stable_on_jacobians() {
    let g = GridSpec::plane(32, 2.0 * PI).unwrap();
    let d = QuantityDescriptor::parse("planar_jacobian", g).unwrap();
    let ladder = ScaleLadder::for_grid(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut ratios = Vec::new();
    for _ in 0..20 {
        let u: Field64 = random_field(&g, 4, false, &mut rng);
        let j = eval_quantity(&d, &u).unwrap();
        let h1 = h1_norm(&j, &ladder).unwrap();
        assert!(!h1.divergent);
        let l1 = lp_norm(&j, 1.0).unwrap();
        ratios.push(h1.value / l1);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    // The finest scale is one grid cell, so band-limited data is smoothed below its L¹ norm.
    assert!(lo >= 0.6 && hi <= 0.8, "{lo} {hi}");
}

fn log_sin(n: usize) -> f64 {
    let g = GridSpec::line(n, 2.0 * PI).unwrap();
    let h = g.spacing() / 2.0;
    let f = Field::from_fn(g, |x| (x[0] + h).sin().abs().ln().into()).unwrap();
    bmo_norm(&f, n.trailing_zeros() as usize).unwrap()
}

#[test]
fn bmo_of_log_singularity_is_resolution_stable() {
    let (a, b) = (log_sin(256), log_sin(512));
    assert!((a - b).abs() <= 0.02 * b, "{a} vs {b}");
    assert!(a > 0.5 && a < 2.0);
}

#[test]
fn commutator_corpus_symbols_have_unit_scale() {
    for s in commutator_corpus() {
        let b = s.symbol().unwrap();
        let depth = b.grid().n().trailing_zeros() as usize;
        let bmo = bmo_norm(&b, depth).unwrap();
        assert!(bmo > 0.0 && bmo <= 2.0, "{}: {bmo}", s.quantity);
    }
}
