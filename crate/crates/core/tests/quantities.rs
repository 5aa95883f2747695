use std::f64::consts::PI;

use hqlab::quantities::{bilinear, eval_quantity, gateaux, QuantityDescriptor};
use hqlab::spectral::{random_field, GridSpec};
use hqlab::Field64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const KINDS: [(&str, usize); 10] = [
    ("planar_jacobian", 2),
    ("line_q1", 1),
    ("line_q2", 1),
    ("riesz_combination(2)", 2),
    ("wu_scalar", 1),
    ("wu_vector(2)", 2),
    ("wu_bivector(1,2)", 2),
    ("monge_ampere", 2),
    ("paracommutator:wu_m1", 2),
    ("paracommutator:commutator(hilbert)", 1),
];

fn sample(d: &QuantityDescriptor, rng: &mut ChaCha8Rng) -> Field64 {
    random_field(d.grid(), 3, !d.is_complex(), rng)
}

#[test]
fn polarization_holds_for_every_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (name, dim) in KINDS {
        let g = GridSpec::new(dim, 16, 2.0 * PI).unwrap();
        let d = QuantityDescriptor::parse(name, g).unwrap();
        let (w, h) = (sample(&d, &mut rng), sample(&d, &mut rng));
        let plus = eval_quantity(&d, &w.add(&h).unwrap()).unwrap();
        let minus = eval_quantity(&d, &w.sub(&h).unwrap()).unwrap();
        let four_b = bilinear(&d, &w, &h).unwrap().scale(4.0);
        let diff = plus.sub(&minus).unwrap();
        assert!(diff.sub(&four_b).unwrap().norm() <= 1e-12 * (1.0 + four_b.norm()), "{name}");
        let sym = bilinear(&d, &h, &w).unwrap();
        assert!(sym.sub(&four_b.scale(0.25)).unwrap().norm() <= 1e-13, "{name}");
        let dq = gateaux(&d, &w, &h).unwrap();
        assert!(dq.sub(&four_b.scale(0.5)).unwrap().norm() <= 1e-13, "{name}");
    }
}

#[test]
fn quantities_are_quadratic_under_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (name, dim) in KINDS {
        let g = GridSpec::new(dim, 16, 3.0).unwrap();
        let d = QuantityDescriptor::parse(name, g).unwrap();
        let w = sample(&d, &mut rng);
        let q = eval_quantity(&d, &w).unwrap();
        let q3 = eval_quantity(&d, &w.scale(-3.0)).unwrap();
        assert!(q3.sub(&q.scale(9.0)).unwrap().norm() <= 1e-12 * (1.0 + q3.norm()), "{name}");
    }
}
