use cutfem_core::geometry::ManufacturedSolution;
use cutfem_core::mesh::dofs::DofHandler;
use cutfem_core::mesh::CartesianMesh;
use cutfem_core::operators::sparse::SparseMatrix;
use cutfem_core::operators::{OperatorConfig, PoissonOperator};
use cutfem_core::solver::{solve_manufactured, SolverConfig};
use cutfem_core::{FeKind, LevelSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ball_operator(fe: FeKind, p: usize, n: usize) -> PoissonOperator<f64> {
    let ls = LevelSet::sphere([0.03, -0.02, 0.01], 0.8).unwrap();
    let mesh = CartesianMesh::build(3, -1.0, 2.0, n, 0).unwrap();
    let handler = DofHandler::build(mesh, &ls, fe, p).unwrap();
    PoissonOperator::new(handler, &ls, OperatorConfig::new(fe, p)).unwrap()
}

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn apply(op: &PoissonOperator<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    op.apply(x, &mut y).unwrap();
    y
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let n: f64 = b.iter().map(|y| y * y).sum();
    (d / n).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn operator_is_linear(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0, dg in any::<bool>()) {
        let fe = if dg { FeKind::Dg } else { FeKind::Cg };
        let op = ball_operator(fe, 2, 4);
        let n = op.n_dofs();
        let (u, w) = (random(n, seed), random(n, seed + 1));
        let combo: Vec<f64> = u.iter().zip(&w).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = apply(&op, &combo);
        let (au, aw) = (apply(&op, &u), apply(&op, &w));
        let rhs: Vec<f64> = au.iter().zip(&aw).map(|(a, b)| alpha * a + beta * b).collect();
        prop_assert!(rel_diff(&lhs, &rhs) < 1e-12);
    }
}

#[test]
fn apply_is_independent_of_thread_count() {
    for fe in [FeKind::Cg, FeKind::Dg] {
        let op = ball_operator(fe, 2, 6);
        let x = random(op.n_dofs(), 3);
        let runs: Vec<Vec<f64>> = [1, 2, 4]
            .iter()
            .map(|&t| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| apply(&op, &x)))
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
    }
}

#[test]
fn sparse_and_matrix_free_agree_on_a_plane_cut() {
    let ls = LevelSet::plane([0.0, 0.6, 0.8], 0.43).unwrap();
    let mesh = CartesianMesh::with_cells(3, [0.0; 3], [1.0, 0.75, 0.5], [4, 3, 2]).unwrap();
    for fe in [FeKind::Cg, FeKind::Dg] {
        let handler = DofHandler::build(mesh.clone(), &ls, fe, 3).unwrap();
        let op = PoissonOperator::new(handler, &ls, OperatorConfig::new(fe, 3)).unwrap();
        let a = SparseMatrix::assemble(&op);
        let x = random(op.n_dofs(), 9);
        let mut y = vec![0.0; x.len()];
        a.spmv(&x, &mut y).unwrap();
        assert!(rel_diff(&apply(&op, &x), &y) < 1e-12);
        assert!(a.asymmetry() < 1e-12);
    }
}

#[test]
fn single_precision_follows_double() {
    let ls32 = cutfem_core::geometry::LevelSet::<f32>::sphere([0.03, -0.02, 0.01], 0.8).unwrap();
    let mesh32 = CartesianMesh::<f32>::build(3, -1.0, 2.0, 4, 0).unwrap();
    let h32 = DofHandler::build(mesh32, &ls32, FeKind::Cg, 2).unwrap();
    let op32 = PoissonOperator::new(h32, &ls32, OperatorConfig::new(FeKind::Cg, 2)).unwrap();
    let op64 = ball_operator(FeKind::Cg, 2, 4);
    assert_eq!(op32.n_dofs(), op64.n_dofs());
    let x = random(op64.n_dofs(), 4);
    let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    let mut y32 = vec![0.0f32; x.len()];
    op32.apply(&x32, &mut y32).unwrap();
    let y: Vec<f64> = y32.iter().map(|&v| v as f64).collect();
    assert!(rel_diff(&y, &apply(&op64, &x)) < 1e-4);
}

#[test]
fn manufactured_solution_error_drops_with_refinement() {
    let sol = ManufacturedSolution::new(std::f64::consts::PI, 0.8, 3);
    let solver = SolverConfig::default();
    let errors: Vec<f64> = (0..2)
        .map(|r| {
            let mesh = CartesianMesh::build(3, -1.0, 2.0, 6, r).unwrap();
            solve_manufactured(mesh, &sol, OperatorConfig::new(FeKind::Cg, 1), &solver).unwrap().l2_rel_error
        })
        .collect();
    assert!(errors[0] < 0.5);
    assert!(errors[1] < errors[0] / 2.5, "{errors:?}");
}
