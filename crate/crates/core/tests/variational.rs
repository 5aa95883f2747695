use hqlab::corpus::{minnorm_instances, BuiltInstance};
use hqlab::findim::FinDimModel;
use hqlab::quantities::eval_quantity;
use hqlab::variational::{lagrange_residual, min_norm_solve, min_norm_solve_problem, rotate_to_positive_mode, MinNormOptions};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn instance(name: &str) -> BuiltInstance {
    minnorm_instances().into_iter().find(|i| i.name == name).unwrap().build().unwrap()
}

#[test]
fn energy_is_homogeneous_in_the_data() {
    let inst = instance("jacobian_eigen_n8");
    let opts = MinNormOptions::default();
    let one = min_norm_solve(&inst.descriptor, &inst.data, &opts).unwrap();
    let four = min_norm_solve(&inst.descriptor, &inst.data.scale(4.0), &opts).unwrap();
    assert!(one.converged && four.converged);
    assert!((four.energy - 4.0 * one.energy).abs() <= 1e-6 * four.energy);
    assert!((one.energy - 1.0).abs() <= 1e-3);
}

#[test]
fn multiplier_certifies_the_solution() {
    let inst = instance("jacobian_eigen_n8");
    let r = min_norm_solve(&inst.descriptor, &inst.data, &MinNormOptions::default()).unwrap();
    assert!(lagrange_residual(&inst.descriptor, &r.multiplier, &r.solution).unwrap() <= 1e-6);
    // ⟨b, Qω⟩ = ⟨T_b ω, ω⟩ = ‖ω‖² at a critical point.
    assert!((r.multiplier.inner(&inst.data) - r.energy).abs() <= 1e-6);
    let q = eval_quantity(&inst.descriptor, &r.solution).unwrap();
    assert!(q.rel_l2_diff(&inst.data) <= 1e-8);
}

#[test]
fn rotation_gauge_is_canonical() {
    let inst = instance("jacobian_eigen_n8");
    let r = min_norm_solve(&inst.descriptor, &inst.data, &MinNormOptions::default()).unwrap();
    let turned = r.solution.scale_complex(Complex64::from_polar(1.0, 0.7));
    // The planar Jacobian is invariant under rotations of the target.
    let q = eval_quantity(&inst.descriptor, &turned).unwrap();
    assert!(q.rel_l2_diff(&inst.data) <= 1e-8);
    let (a, b) = (rotate_to_positive_mode(&r.solution), rotate_to_positive_mode(&turned));
    assert!(a.max_abs_diff(&b) <= 1e-12);
}

#[test]
fn chiral_eigen_data_has_unit_energy() {
    let model = FinDimModel::build(4, 2, 3, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let raw: Vec<f64> = (0..model.m()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b = model.normalize(&raw).unwrap();
    let (_, vecs) = model.spectrum(&b);
    let v: Vec<f64> = vecs.column(0).iter().copied().collect();
    let f = model.q(&v);
    let sol = min_norm_solve_problem(&model, &f, &MinNormOptions::default(), None);
    assert!(sol.converged);
    assert!((sol.energy - 1.0).abs() <= 1e-3, "{}", sol.energy);
}
