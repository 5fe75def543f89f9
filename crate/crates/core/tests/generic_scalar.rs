//! The numeric core is generic over the scalar; exercise it at f32.

use motsink_core::fastsum::{build_fourier_kernel, fast_gauss_apply, FastSumParams, Geometry};
use motsink_core::graph::TreeGraph;
use motsink_core::kernel::DirectFactory;
use motsink_core::measure::DiscreteMeasure;
use motsink_core::tree::sinkhorn_tree;
use motsink_core::SinkhornConfig;
use ndarray::{Array1, Array2};

#[test]
fn tree_solver_runs_at_f32() {
    let pts = |v: &[f32]| Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap();
    let measures = vec![
        DiscreteMeasure::<f32>::uniform(pts(&[0.1, 0.4, 0.8])).unwrap(),
        DiscreteMeasure::<f32>::uniform(pts(&[0.2, 0.6])).unwrap(),
        DiscreteMeasure::<f32>::uniform(pts(&[0.0, 0.5, 0.9])).unwrap(),
    ];
    let tree = TreeGraph::chain(3).unwrap();
    let config = SinkhornConfig::<f32>::new(0.5, 1e-6).with_max_iterations(500);
    let mut factory = DirectFactory::new();
    let sol = sinkhorn_tree(&measures, &tree, &config, &mut factory).unwrap();
    assert!(sol.converged);
    assert!(sol.residuals.iter().all(|&r| r < 1e-3), "{:?}", sol.residuals);
}

#[test]
fn fast_summation_runs_at_f32() {
    let n = 60;
    let src = Array2::from_shape_fn((n, 1), |(i, _)| (i as f32) / (n as f32) - 0.5);
    let alpha = Array1::from_elem(n, 1.0f32 / n as f32);
    let params = FastSumParams::<f32>::new(32, 2, 1.0 / 16.0);
    let geo = Geometry::bind(&params, &[src.view()]).unwrap();
    let kernel = build_fourier_kernel(&params, &geo, 0.5f32).unwrap();
    let fast =
        fast_gauss_apply(&kernel, &params, &geo, src.view(), src.view(), alpha.view()).unwrap();
    for (i, &got) in fast.iter().enumerate() {
        let mut want = 0.0f32;
        for j in 0..n {
            let d = src[(i, 0)] - src[(j, 0)];
            want += alpha[j] * (-d * d / 0.5).exp();
        }
        assert!((got - want).abs() < 1e-3 * want.abs().max(1.0));
    }
}
