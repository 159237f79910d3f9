use proptest::prelude::*;
use tkz::apps::{gen_lowrank_tensor_problem, gen_sparse_problem};
use tkz::convex::Regularizer;
use tkz::linalg::shrink;
use tkz::random::{gaussian_vec, seeded_rng};
use tkz::solvers::{
    dual_value, linbreg, solve, solve_batched, BatchMode, BatchOrder, BatchSchedule, ControlSequence,
    LinearConstraintSet, SolveConfig,
};
use tkz::{Matrix, Tensor3};

fn cfg(step: f64, iters: usize) -> SolveConfig {
    SolveConfig { step, max_iters: iters, trace_every: iters, ..Default::default() }
}

fn max_diff(a: &Tensor3, b: &Tensor3) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Sparse Kaczmarz written out for vectors.
fn sparse_kaczmarz(a: &Matrix, b: &[f64], lambda: f64, t: f64, iters: usize) -> Vec<f64> {
    let (m, n) = a.shape();
    let mut z = vec![0.0; n];
    let mut x = vec![0.0; n];
    for k in 0..iters {
        let i = k % m;
        let row = a.row(i);
        let r = b[i] - (0..n).map(|j| row[j] * x[j]).sum::<f64>();
        let s = t * r / row.norm_squared();
        for j in 0..n {
            z[j] += s * row[j];
            x[j] = shrink(z[j], lambda);
        }
    }
    x
}

#[test]
fn vector_rows_reproduce_the_scalar_algorithm() {
    let p = gen_sparse_problem(15, 30, 4, 2).unwrap();
    let expect = sparse_kaczmarz(&p.a, &p.b, 0.5, 1.0, 200);
    let reg = Regularizer::elastic_l1(0.5).unwrap();
    for cs in [
        LinearConstraintSet::vector_rows(&p.a, &p.b).unwrap(),
        LinearConstraintSet::tensor_slices(Tensor3::from_matrix(&p.a), Tensor3::from_vector(&p.b)).unwrap(),
        LinearConstraintSet::matrix_entries(
            (0..15).map(|i| Matrix::from_fn(30, 1, |j, _| p.a[(i, j)])).collect(),
            p.b.clone(),
        )
        .unwrap(),
    ] {
        let x = solve(&cs, &reg, &ControlSequence::Cyclic, &cfg(1.0, 200)).unwrap().x;
        let diff = x.as_slice().iter().zip(&expect).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{:?}: {diff:e}", cs.kind());
    }
}

#[test]
fn batches_of_one_match_single_steps() {
    let p = gen_lowrank_tensor_problem(12, 4, 3, 5, 2, 7).unwrap();
    let cs = LinearConstraintSet::tensor_slices(p.a, p.b).unwrap();
    let reg = Regularizer::tensor_tnn_elastic(0.3).unwrap();
    let c = cfg(0.2, 60);
    let single = solve(&cs, &reg, &ControlSequence::Cyclic, &c).unwrap();
    for mode in [BatchMode::Sum, BatchMode::Slab] {
        let batched = solve_batched(&cs, &reg, &BatchSchedule::new(1, BatchOrder::Cyclic, mode), &c).unwrap();
        assert_eq!(batched.x, single.x, "{mode:?}");
    }
}

#[test]
fn full_masked_batch_is_linbreg() {
    let idx: Vec<_> = (0..6).flat_map(|r| (0..5).map(move |c| (r, c))).filter(|(r, c)| (r + 2 * c) % 3 != 0).collect();
    let b: Vec<f64> = idx.iter().map(|&(r, c)| (r as f64 - c as f64).sin()).collect();
    let cs = LinearConstraintSet::masked_entries(6, 5, idx.clone(), b).unwrap();
    let reg = Regularizer::matrix_nuclear_elastic(0.4).unwrap();
    let c = cfg(0.7, 25);
    let lb = linbreg(&cs, &reg, &c).unwrap();
    let full =
        solve_batched(&cs, &reg, &BatchSchedule::new(idx.len(), BatchOrder::Cyclic, BatchMode::Sum), &c).unwrap();
    assert!(max_diff(&lb.x, &full.x) < 1e-13);
}

#[test]
fn dual_iterate_stays_in_the_range_of_the_adjoint() {
    let p = gen_lowrank_tensor_problem(3, 5, 2, 3, 1, 11).unwrap();
    let cs = LinearConstraintSet::tensor_slices(p.a.clone(), p.b).unwrap();
    let reg = Regularizer::tensor_tnn_elastic(0.2).unwrap();
    let seq = ControlSequence::UniformRandom { seed: 4 };
    let z = solve(&cs, &reg, &seq, &cfg(0.3, 40)).unwrap().z;
    // Z = A^T * Y means unfold(Z) lies in the range of bcirc(A)^T.
    let at = p.a.bcirc().transpose();
    let uz = z.unfold();
    let y = at.clone().svd(true, true).solve(&uz, 1e-12).unwrap();
    assert!((at * y - &uz).norm() <= 1e-10 * uz.norm());
}

#[test]
fn cyclic_and_seeded_runs_repeat_exactly() {
    let p = gen_sparse_problem(20, 40, 3, 8).unwrap();
    let cs = LinearConstraintSet::vector_rows(&p.a, &p.b).unwrap();
    let reg = Regularizer::elastic_l1(1.0).unwrap();
    for seq in [
        ControlSequence::Cyclic,
        ControlSequence::UniformRandom { seed: 3 },
        ControlSequence::WeightedRandom { seed: 3 },
    ] {
        let c = SolveConfig { trace_every: 7, ..cfg(1.0, 300) };
        let a = solve(&cs, &reg, &seq, &c).unwrap();
        let b = solve(&cs, &reg, &seq, &c).unwrap();
        assert_eq!(a.trace.to_csv(), b.trace.to_csv());
        assert_eq!(a.x, b.x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weak_duality(seed in 0u64..1000, lambda in 0.0..2.0f64) {
        let p = gen_lowrank_tensor_problem(4, 3, 2, 3, 1, seed).unwrap();
        let cs = LinearConstraintSet::tensor_slices(p.a, p.b).unwrap();
        let reg = Regularizer::tensor_tnn_elastic(lambda).unwrap();
        let mut rng = seeded_rng(seed + 1);
        let y = Tensor3::new(4, 2, 3, gaussian_vec(&mut rng, 24)).unwrap();
        let g = dual_value(&cs, &reg, &y).unwrap();
        let f = reg.value(&p.x).unwrap();
        prop_assert!(g >= -f - 1e-9 * (1.0 + f.abs()), "g = {g}, -f = {}", -f);
    }

    #[test]
    fn bregman_distance_never_increases(seed in 0u64..1000, lambda in 0.0..1.0f64) {
        let p = gen_lowrank_tensor_problem(8, 4, 3, 4, 2, seed).unwrap();
        let cs = LinearConstraintSet::tensor_slices(p.a, p.b).unwrap();
        let reg = Regularizer::tensor_tnn_elastic(lambda).unwrap();
        let c = SolveConfig { step: 0.4, max_iters: 120, trace_every: 1, reference: Some(p.x), ..Default::default() };
        let r = solve(&cs, &reg, &ControlSequence::UniformRandom { seed }, &c).unwrap();
        let d = r.trace.bregmans();
        for w in d.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn unit_depth_tensor_system_matches_matrix_rows(seed in 0u64..1000) {
        let p = gen_lowrank_tensor_problem(6, 4, 3, 1, 2, seed).unwrap();
        let reg = Regularizer::matrix_nuclear_elastic(0.3).unwrap();
        let rows = LinearConstraintSet::matrix_rows(&p.a.frontal_slice(0), &p.b.frontal_slice(0)).unwrap();
        let tubes = LinearConstraintSet::tensor_slices(p.a, p.b).unwrap();
        let c = cfg(1.0, 50);
        let seq = ControlSequence::WeightedRandom { seed };
        let x1 = solve(&rows, &reg, &seq, &c).unwrap().x;
        let x2 = solve(&tubes, &Regularizer::tensor_tnn_elastic(0.3).unwrap(), &seq, &c).unwrap().x;
        prop_assert!(max_diff(&x1, &x2) < 1e-12);
    }
}
