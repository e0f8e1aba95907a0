use super::sparse::SparseMatrix;
use super::*;
use crate::mesh::CartesianMesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere_op(fe: FeKind, degree: usize, n: usize, lanes: usize) -> PoissonOperator<f64> {
    let ls = LevelSet::sphere([0.03, -0.02, 0.01], 0.8).unwrap();
    let mesh = CartesianMesh::build(3, -1.0, 2.0, n, 0).unwrap();
    let h = DofHandler::build(mesh, &ls, fe, degree).unwrap();
    let mut cfg = OperatorConfig::new(fe, degree);
    cfg.lanes = lanes;
    PoissonOperator::new(h, &ls, cfg).unwrap()
}

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    d / b.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn matrix_free_matches_sparse() {
    for fe in [FeKind::Cg, FeKind::Dg] {
        for p in 1..=2 {
            let op = sphere_op(fe, p, 4, 4);
            let a = SparseMatrix::assemble(&op);
            assert!(a.asymmetry() < 1e-12, "{fe:?} p={p}: {}", a.asymmetry());
            let x = random(op.n_dofs(), 7);
            let mut y = vec![0.0; op.n_dofs()];
            let mut z = vec![0.0; op.n_dofs()];
            op.apply(&x, &mut y).unwrap();
            a.spmv(&x, &mut z).unwrap();
            assert!(rel_diff(&y, &z) < 1e-12, "{fe:?} p={p}: {}", rel_diff(&y, &z));
            let d = op.diagonal();
            assert!(rel_diff(&d, &a.diagonal()) < 1e-14, "{fe:?} p={p}");
            assert!(d.iter().all(|&v| v > 0.0));
        }
    }
}

#[test]
fn lane_widths_agree() {
    for fe in [FeKind::Cg, FeKind::Dg] {
        let reference = sphere_op(fe, 2, 4, 1);
        let x = random(reference.n_dofs(), 3);
        let mut y1 = vec![0.0; x.len()];
        reference.apply(&x, &mut y1).unwrap();
        for w in [2, 8, 16] {
            let op = sphere_op(fe, 2, 4, w);
            let mut y = vec![0.0; x.len()];
            op.apply(&x, &mut y).unwrap();
            assert!(rel_diff(&y, &y1) < 1e-13, "{fe:?} W={w}");
        }
    }
}

#[test]
fn forced_unstructured_path_agrees() {
    for fe in [FeKind::Cg, FeKind::Dg] {
        let op = sphere_op(fe, 2, 4, 4);
        let ls = LevelSet::sphere([0.03, -0.02, 0.01], 0.8).unwrap();
        let mut cfg = op.config().clone();
        cfg.force_unstructured = true;
        let un = PoissonOperator::new(op.handler().clone(), &ls, cfg).unwrap();
        let x = random(op.n_dofs(), 5);
        let mut y = vec![0.0; x.len()];
        let mut z = vec![0.0; x.len()];
        op.apply(&x, &mut y).unwrap();
        un.apply(&x, &mut z).unwrap();
        assert!(rel_diff(&y, &z) < 1e-12, "{fe:?}: {}", rel_diff(&y, &z));
    }
}

#[test]
fn colours_do_not_share_dofs() {
    for fe in [FeKind::Cg, FeKind::Dg] {
        let op = sphere_op(fe, 1, 5, 2);
        let h = op.handler();
        for c in &op.colours {
            let mut seen = std::collections::HashSet::new();
            for item in &c.items {
                let cells: Vec<u32> = match item {
                    Item::Cells(b) => b.lanes().to_vec(),
                    Item::Sipg(b) | Item::SipgCut(b) | Item::Ghost(b) => b
                        .lanes()
                        .iter()
                        .flat_map(|&f| [h.faces[f as usize].minus, h.faces[f as usize].plus])
                        .collect(),
                };
                let mut dofs: Vec<u32> = cells.iter().flat_map(|&a| h.dofs_of(a as usize).to_vec()).collect();
                dofs.sort_unstable();
                dofs.dedup();
                for d in dofs {
                    assert!(seen.insert(d), "{fe:?}: dof {d} written twice in one colour");
                }
            }
        }
    }
}

#[test]
fn dimension_mismatch_is_reported() {
    let op = sphere_op(FeKind::Cg, 1, 4, 2);
    let mut y = vec![0.0; op.n_dofs()];
    assert!(matches!(op.apply(&[1.0], &mut y), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn config_validation() {
    let mut c = OperatorConfig::<f64>::new(FeKind::Cg, 2);
    assert_eq!(c.tau_d, 45.0);
    c.tau_d = -1.0;
    assert!(c.validate().is_err());
    let mut c = OperatorConfig::<f64>::new(FeKind::Cg, 2);
    c.lanes = 3;
    assert!(matches!(c.validate(), Err(Error::UnsupportedLanes(3))));
}
