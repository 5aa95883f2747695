use hqlab::corpus::eigen_pair;
use hqlab::operators::{
    apply_tb, asymmetry, assemble_dense, fixed_space, numerical_radius, operator_norm, self_adjointify, symmetric_spectrum,
    OperatorHandle, PowerOptions,
};
use hqlab::quantities::QuantityDescriptor;
use hqlab::spectral::{random_real_field, GridSpec};
use hqlab::Field64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn jacobian(n: usize) -> QuantityDescriptor {
    QuantityDescriptor::parse("planar_jacobian", GridSpec::plane(n, 2.0 * std::f64::consts::PI).unwrap()).unwrap()
}

#[test]
fn fixed_space_is_orthonormal_and_fixed() {
    let d = jacobian(8);
    let (b, omega) = eigen_pair(&d, 5, 2).unwrap();
    let h = OperatorHandle::new(&d, &b).unwrap();
    let basis = fixed_space(&h, 1e-8).unwrap();
    assert!(!basis.is_empty());
    for (i, u) in basis.iter().enumerate() {
        assert!(apply_tb(&h, u).unwrap().sub(u).unwrap().norm() <= 1e-9);
        for (j, v) in basis.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((u.inner(v) - want).abs() <= 1e-10, "gram[{i}][{j}]");
        }
    }
    // The generating eigenvector lies in the span.
    let proj = basis.iter().fold(Field64::zeros(*omega.grid()), |acc, u| acc.axpy(u.inner(&omega), u).unwrap());
    assert!(proj.sub(&omega).unwrap().norm() <= 1e-8 * omega.norm());
}

#[test]
fn doubling_is_symmetric_with_mirrored_spectrum() {
    let d = jacobian(8);
    let g = *d.grid();
    let b: Field64 = random_real_field(&g, 2, &mut ChaCha8Rng::seed_from_u64(3));
    let h = OperatorHandle::new(&d, &b).unwrap();
    let doubled = self_adjointify(&h);
    let m = assemble_dense(&doubled).unwrap();
    assert!(asymmetry(&m) <= 1e-12);
    let (vals, _) = symmetric_spectrum(&m);
    let k = vals.len();
    for i in 0..k / 2 {
        assert!((vals[i] + vals[k - 1 - i]).abs() <= 1e-10, "{} vs {}", vals[i], vals[k - 1 - i]);
    }
    let opts = PowerOptions::default();
    let norm = operator_norm(&h, &opts).value;
    assert!((numerical_radius(&doubled, &opts).value - norm).abs() <= 1e-6 * norm);
    assert!((vals[0] - norm).abs() <= 1e-6 * norm);
}

#[test]
fn self_adjoint_operator_is_its_own_doubling_up_to_mirror() {
    let d = jacobian(8);
    let (b, _) = eigen_pair(&d, 11, 2).unwrap();
    let h = OperatorHandle::new(&d, &b).unwrap();
    assert!(h.is_self_adjoint());
    let (single, _) = symmetric_spectrum(&assemble_dense(&h).unwrap());
    let (double, _) = symmetric_spectrum(&assemble_dense(&self_adjointify(&h)).unwrap());
    let mut want: Vec<f64> = single.iter().flat_map(|v| [*v, -*v]).collect();
    want.sort_by(|a, b| b.total_cmp(a));
    assert_eq!(want.len(), double.len());
    for (a, b) in want.iter().zip(&double) {
        assert!((a - b).abs() <= 1e-10);
    }
}

#[test]
fn scaling_the_symbol_scales_the_operator() {
    let d = jacobian(8);
    let b: Field64 = random_real_field(d.grid(), 2, &mut ChaCha8Rng::seed_from_u64(8));
    let h = OperatorHandle::new(&d, &b).unwrap();
    let opts = PowerOptions::default();
    let n1 = operator_norm(&h, &opts).value;
    let n3 = operator_norm(&h.scaled(-3.0).unwrap(), &opts).value;
    assert!((n3 - 3.0 * n1).abs() <= 1e-7 * n3);
}
