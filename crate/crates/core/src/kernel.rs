//! Edge kernels and the applicator abstraction the solvers run on.
//!
//! An applicator provides `y -> K y` and `y -> K^T y` for one edge kernel
//! `K[i, j] = exp(-|x_i - y_j|^2 / eta)` (rows index the first point set),
//! either from a dense materialized matrix or through NFFT fast summation.
//! Every application is counted, which is how the per-sweep complexity
//! claims are checked.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex;
use rayon::prelude::*;

use crate::config::{KernelMode, SinkhornConfig};
use crate::error::{Error, Result};
use crate::fastsum::{
    build_fourier_kernel, FastSumParams, FourierKernel, Geometry, NfftPlan,
};
use crate::measure::DiscreteMeasure;
use crate::scalar::Real;

/// The per-marginal positive scaling vectors of the dual problem.
#[derive(Debug, Clone)]
pub struct DualPotentials<T: Real> {
    pub phi: Vec<Array1<T>>,
}

impl<T: Real> DualPotentials<T> {
    /// All-ones start, the neutral initialization.
    pub fn ones(sizes: &[usize]) -> Self {
        Self {
            phi: sizes.iter().map(|&n| Array1::from_elem(n, T::one())).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.phi.len()
    }

    /// Entries must be finite and nonnegative, and strictly positive
    /// wherever the corresponding marginal weight is positive (atoms with
    /// zero weight legitimately get zero potentials).
    pub fn check_positive(&self, weights: &[ArrayView1<'_, T>]) -> Result<()> {
        for (k, (phi, w)) in self.phi.iter().zip(weights).enumerate() {
            for (p, &wi) in phi.iter().zip(w.iter()) {
                if !p.is_finite() || *p < T::zero() || (wi > T::zero() && !(*p > T::zero())) {
                    return Err(Error::NonPositivePotential { node: k });
                }
            }
        }
        Ok(())
    }
}

/// Dense Gaussian kernel matrix with entry `(i, j) =
/// exp(-|src_i - dst_j|^2 / eta)`; `src` indexes rows.
pub fn gaussian_matrix<T: Real>(
    src: ArrayView2<'_, T>,
    dst: ArrayView2<'_, T>,
    eta: T,
) -> Result<Array2<T>> {
    if src.ncols() != dst.ncols() {
        return Err(Error::DimensionMismatch {
            context: "kernel point dimensions",
            expected: src.ncols(),
            got: dst.ncols(),
        });
    }
    if !(eta > T::zero()) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eta must be positive and finite, got {eta}"
        )));
    }
    let (rows, cols) = (src.nrows(), dst.nrows());
    let mut out = Array2::zeros((rows, cols));
    let d = src.ncols();
    out.outer_iter_mut()
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for j in 0..cols {
                let mut d2 = T::zero();
                for ax in 0..d {
                    let diff = src[(i, ax)] - dst[(j, ax)];
                    d2 += diff * diff;
                }
                row[j] = (-d2 / eta).exp();
            }
        });
    Ok(out)
}

enum Backend<T: Real> {
    Direct(Arc<Array2<T>>),
    /// Kernel identically one (a zero-weight edge): `K y = (sum y) 1`.
    Ones,
    Fast(Box<FastBackend<T>>),
}

struct FastBackend<T: Real> {
    kernel: Arc<FourierKernel<T>>,
    row_plan: Arc<NfftPlan<T>>,
    col_plan: Arc<NfftPlan<T>>,
    materialize_limit: usize,
    cache: OnceLock<Arc<Array2<T>>>,
}

impl<T: Real> FastBackend<T> {
    /// One transform pair: adjoint at `from`, multiply, forward at `to`.
    fn transform(&self, from: &NfftPlan<T>, to: &NfftPlan<T>, y: ArrayView1<'_, T>) -> Array1<T> {
        let yc: Vec<Complex<T>> = y.iter().map(|&v| Complex::new(v, T::zero())).collect();
        let mut coeffs = vec![Complex::new(T::zero(), T::zero()); self.kernel.coeffs.len()];
        from.adjoint(&yc, &mut coeffs);
        for (c, k) in coeffs.iter_mut().zip(self.kernel.coeffs.data.iter()) {
            *c = *c * *k;
        }
        let mut out = vec![Complex::new(T::zero(), T::zero()); to.point_count()];
        to.forward(&coeffs, &mut out);
        Array1::from_iter(out.into_iter().map(|v| v.re))
    }

    fn dense(&self) -> &Arc<Array2<T>> {
        self.cache.get_or_init(|| {
            let cols = self.col_plan.point_count();
            let rows = self.row_plan.point_count();
            let mut out = Array2::zeros((rows, cols));
            let columns: Vec<Array1<T>> = (0..cols)
                .into_par_iter()
                .map(|j| {
                    let mut e = Array1::zeros(cols);
                    e[j] = T::one();
                    self.transform(&self.col_plan, &self.row_plan, e.view())
                })
                .collect();
            for (j, col) in columns.into_iter().enumerate() {
                out.column_mut(j).assign(&col);
            }
            Arc::new(out)
        })
    }
}

/// One edge kernel with counted forward/transpose application.
pub struct KernelApplicator<T: Real> {
    backend: Backend<T>,
    rows: usize,
    cols: usize,
    counter: Arc<AtomicU64>,
}

impl<T: Real> KernelApplicator<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn count(&self) {
        self.counter.fetch_add(1, Ordering::Relaxed);
    }

    /// `K y`.
    pub fn apply(&self, y: ArrayView1<'_, T>) -> Result<Array1<T>> {
        if y.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "kernel apply input length",
                expected: self.cols,
                got: y.len(),
            });
        }
        self.count();
        Ok(match &self.backend {
            Backend::Direct(m) => m.dot(&y),
            Backend::Ones => Array1::from_elem(self.rows, y.sum()),
            Backend::Fast(f) => match f.cache.get() {
                Some(m) => m.dot(&y),
                None => f.transform(&f.col_plan, &f.row_plan, y),
            },
        })
    }

    /// `K^T y`.
    pub fn apply_transpose(&self, y: ArrayView1<'_, T>) -> Result<Array1<T>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "kernel transpose-apply input length",
                expected: self.rows,
                got: y.len(),
            });
        }
        self.count();
        Ok(match &self.backend {
            Backend::Direct(m) => m.t().dot(&y),
            Backend::Ones => Array1::from_elem(self.cols, y.sum()),
            Backend::Fast(f) => match f.cache.get() {
                Some(m) => m.t().dot(&y),
                None => f.transform(&f.row_plan, &f.col_plan, y),
            },
        })
    }

    /// `K Y` for a matrix of column vectors; fast mode runs the summation
    /// column by column unless a materialized matrix is available.
    pub fn apply_mat(&self, y: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if y.nrows() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "kernel matrix-apply input rows",
                expected: self.cols,
                got: y.nrows(),
            });
        }
        self.count();
        Ok(match &self.backend {
            Backend::Direct(m) => m.dot(&y),
            Backend::Ones => {
                let sums = y.sum_axis(ndarray::Axis(0));
                let mut out = Array2::zeros((self.rows, y.ncols()));
                for mut row in out.outer_iter_mut() {
                    row.assign(&sums);
                }
                out
            }
            Backend::Fast(f) => {
                if self.rows * self.cols <= f.materialize_limit {
                    f.dense().dot(&y)
                } else {
                    let cols: Vec<Array1<T>> = (0..y.ncols())
                        .into_par_iter()
                        .map(|j| f.transform(&f.col_plan, &f.row_plan, y.column(j)))
                        .collect();
                    let mut out = Array2::zeros((self.rows, y.ncols()));
                    for (j, col) in cols.into_iter().enumerate() {
                        out.column_mut(j).assign(&col);
                    }
                    out
                }
            }
        })
    }

    /// `K^T Y`.
    pub fn apply_transpose_mat(&self, y: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if y.nrows() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "kernel transpose-matrix-apply input rows",
                expected: self.rows,
                got: y.nrows(),
            });
        }
        self.count();
        Ok(match &self.backend {
            Backend::Direct(m) => m.t().dot(&y),
            Backend::Ones => {
                let sums = y.sum_axis(ndarray::Axis(0));
                let mut out = Array2::zeros((self.cols, y.ncols()));
                for mut row in out.outer_iter_mut() {
                    row.assign(&sums);
                }
                out
            }
            Backend::Fast(f) => {
                if self.rows * self.cols <= f.materialize_limit {
                    f.dense().t().dot(&y)
                } else {
                    let cols: Vec<Array1<T>> = (0..y.ncols())
                        .into_par_iter()
                        .map(|j| f.transform(&f.row_plan, &f.col_plan, y.column(j)))
                        .collect();
                    let mut out = Array2::zeros((self.cols, y.ncols()));
                    for (j, col) in cols.into_iter().enumerate() {
                        out.column_mut(j).assign(&col);
                    }
                    out
                }
            }
        })
    }

    /// The full matrix behind a shared handle, counted as one
    /// application; used by the circle recursion base cases. Fast mode
    /// materializes lazily (one summation per column) and caches.
    pub fn materialized(&self) -> Result<Arc<Array2<T>>> {
        self.count();
        Ok(match &self.backend {
            Backend::Direct(m) => m.clone(),
            Backend::Ones => Arc::new(Array2::from_elem((self.rows, self.cols), T::one())),
            Backend::Fast(f) => f.dense().clone(),
        })
    }

    /// Owned copy of the full matrix, counted as one application.
    pub fn materialize(&self) -> Result<Array2<T>> {
        Ok(self.materialized()?.as_ref().clone())
    }

    /// Direct-mode matrix entries, for tests.
    pub fn dense_view(&self) -> Option<&Array2<T>> {
        match &self.backend {
            Backend::Direct(m) => Some(m),
            _ => None,
        }
    }
}

/// Builds a direct-mode Gaussian applicator; entry `(i, j)` is
/// `exp(-|src_i - dst_j|^2 / eta)`.
pub fn build_gaussian_kernel<T: Real>(
    src: ArrayView2<'_, T>,
    dst: ArrayView2<'_, T>,
    eta: T,
) -> Result<KernelApplicator<T>> {
    let m = gaussian_matrix(src, dst, eta)?;
    let (rows, cols) = (m.nrows(), m.ncols());
    Ok(KernelApplicator {
        backend: Backend::Direct(Arc::new(m)),
        rows,
        cols,
        counter: Arc::new(AtomicU64::new(0)),
    })
}

/// Creates the edge applicators a solver needs.
pub trait KernelFactory<T: Real> {
    /// Applicator for one edge; rows index `targets`, columns `sources`.
    /// `eta` is the effective regularization of this edge (possibly
    /// weight-adjusted); `+inf` yields the constant all-ones kernel.
    fn make_edge(
        &mut self,
        targets: ArrayView2<'_, T>,
        sources: ArrayView2<'_, T>,
        eta: T,
    ) -> Result<KernelApplicator<T>>;

    /// Total number of kernel applications requested so far.
    fn applications(&self) -> u64;
}

type PointsKey = (usize, usize);

fn points_key<T>(view: ArrayView2<'_, T>) -> PointsKey {
    (view.as_ptr() as usize, view.nrows())
}

fn eta_key<T: Real>(eta: T) -> u64 {
    eta.to_f64().unwrap_or(f64::NAN).to_bits()
}

/// Factory for exact dense kernels; matrices are shared between edges
/// with identical point sets and eta.
pub struct DirectFactory<T: Real> {
    counter: Arc<AtomicU64>,
    cache: HashMap<(PointsKey, PointsKey, u64), Arc<Array2<T>>>,
}

impl<T: Real> DirectFactory<T> {
    pub fn new() -> Self {
        Self {
            counter: Arc::new(AtomicU64::new(0)),
            cache: HashMap::new(),
        }
    }
}

impl<T: Real> Default for DirectFactory<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> KernelFactory<T> for DirectFactory<T> {
    fn make_edge(
        &mut self,
        targets: ArrayView2<'_, T>,
        sources: ArrayView2<'_, T>,
        eta: T,
    ) -> Result<KernelApplicator<T>> {
        let (rows, cols) = (targets.nrows(), sources.nrows());
        if eta.is_infinite() {
            return Ok(KernelApplicator {
                backend: Backend::Ones,
                rows,
                cols,
                counter: self.counter.clone(),
            });
        }
        let key = (points_key(targets), points_key(sources), eta_key(eta));
        let matrix = match self.cache.get(&key) {
            Some(m) => m.clone(),
            None => {
                let m = Arc::new(gaussian_matrix(targets, sources, eta)?);
                self.cache.insert(key, m.clone());
                m
            }
        };
        Ok(KernelApplicator {
            backend: Backend::Direct(matrix),
            rows,
            cols,
            counter: self.counter.clone(),
        })
    }

    fn applications(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }
}

/// Factory for NFFT fast-summation kernels.
///
/// Binds one normalization and half-period to the whole problem geometry,
/// then shares Fourier coefficients across edges with equal effective eta
/// and gridding plans across edges touching the same point set.
pub struct FastFactory<T: Real> {
    params: FastSumParams<T>,
    geometry: Geometry<T>,
    counter: Arc<AtomicU64>,
    kernels: HashMap<u64, Arc<FourierKernel<T>>>,
    plans: HashMap<PointsKey, Arc<NfftPlan<T>>>,
}

impl<T: Real> FastFactory<T> {
    /// `point_sets` must cover every point set later passed to
    /// `make_edge` (the normalization is derived from their joint
    /// bounding box).
    pub fn new(params: FastSumParams<T>, point_sets: &[ArrayView2<'_, T>]) -> Result<Self> {
        let geometry = Geometry::bind(&params, point_sets)?;
        Ok(Self {
            params,
            geometry,
            counter: Arc::new(AtomicU64::new(0)),
            kernels: HashMap::new(),
            plans: HashMap::new(),
        })
    }

    pub fn geometry(&self) -> &Geometry<T> {
        &self.geometry
    }

    fn plan_for(&mut self, points: ArrayView2<'_, T>) -> Result<Arc<NfftPlan<T>>> {
        let key = points_key(points);
        if let Some(p) = self.plans.get(&key) {
            return Ok(p.clone());
        }
        let normalized = self.geometry.normalize(points);
        let plan = Arc::new(NfftPlan::new(
            normalized.view(),
            self.geometry.tau,
            self.params.half_degree,
            self.params.oversampling,
            self.params.cutoff,
        )?);
        self.plans.insert(key, plan.clone());
        Ok(plan)
    }
}

impl<T: Real> KernelFactory<T> for FastFactory<T> {
    fn make_edge(
        &mut self,
        targets: ArrayView2<'_, T>,
        sources: ArrayView2<'_, T>,
        eta: T,
    ) -> Result<KernelApplicator<T>> {
        let (rows, cols) = (targets.nrows(), sources.nrows());
        if eta.is_infinite() {
            return Ok(KernelApplicator {
                backend: Backend::Ones,
                rows,
                cols,
                counter: self.counter.clone(),
            });
        }
        let kkey = eta_key(eta);
        let kernel = match self.kernels.get(&kkey) {
            Some(k) => k.clone(),
            None => {
                let k = Arc::new(build_fourier_kernel(&self.params, &self.geometry, eta)?);
                self.kernels.insert(kkey, k.clone());
                k
            }
        };
        let row_plan = self.plan_for(targets)?;
        let col_plan = self.plan_for(sources)?;
        Ok(KernelApplicator {
            backend: Backend::Fast(Box::new(FastBackend {
                kernel,
                row_plan,
                col_plan,
                materialize_limit: self.params.materialize_limit,
                cache: OnceLock::new(),
            })),
            rows,
            cols,
            counter: self.counter.clone(),
        })
    }

    fn applications(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }
}

/// Either factory, decided by the configured kernel mode.
pub enum AutoFactory<T: Real> {
    Direct(DirectFactory<T>),
    Fast(FastFactory<T>),
}

impl<T: Real> AutoFactory<T> {
    pub fn from_config(
        config: &SinkhornConfig<T>,
        measures: &[DiscreteMeasure<T>],
    ) -> Result<Self> {
        let views: Vec<ArrayView2<'_, T>> = measures.iter().map(|m| m.points()).collect();
        Self::for_point_sets(config, &views)
    }

    /// Like `from_config`, with the covering point sets given explicitly
    /// (drivers with transformed point sets need those in the geometry).
    pub fn for_point_sets(
        config: &SinkhornConfig<T>,
        point_sets: &[ArrayView2<'_, T>],
    ) -> Result<Self> {
        match &config.kernel_mode {
            KernelMode::Direct => Ok(AutoFactory::Direct(DirectFactory::new())),
            KernelMode::Fast(params) => Ok(AutoFactory::Fast(FastFactory::new(
                params.clone(),
                point_sets,
            )?)),
        }
    }
}

impl<T: Real> KernelFactory<T> for AutoFactory<T> {
    fn make_edge(
        &mut self,
        targets: ArrayView2<'_, T>,
        sources: ArrayView2<'_, T>,
        eta: T,
    ) -> Result<KernelApplicator<T>> {
        match self {
            AutoFactory::Direct(f) => f.make_edge(targets, sources, eta),
            AutoFactory::Fast(f) => f.make_edge(targets, sources, eta),
        }
    }

    fn applications(&self) -> u64 {
        match self {
            AutoFactory::Direct(f) => f.applications(),
            AutoFactory::Fast(f) => f.applications(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn singleton_kernel_is_one() {
        let p = arr2(&[[0.0]]);
        let k = build_gaussian_kernel(p.view(), p.view(), 0.7).unwrap();
        assert_eq!(k.dense_view().unwrap()[(0, 0)], 1.0);
        assert_eq!(k.apply(arr1(&[3.0]).view()).unwrap()[0], 3.0);
    }

    #[test]
    fn scalar_entry_matches_reference_value() {
        let k = build_gaussian_kernel(
            arr2(&[[0.0]]).view(),
            arr2(&[[0.8]]).view(),
            0.25,
        )
        .unwrap();
        // exp(-0.64/0.25) = exp(-2.56), checked against an independent
        // high-precision evaluation of the scalar exponential
        let expect = 0.07730474044329974f64;
        assert!((k.dense_view().unwrap()[(0, 0)] - expect).abs() < 1e-15);
    }

    #[test]
    fn same_point_set_gives_symmetric_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = Array2::from_shape_fn((6, 2), |_| rng.gen::<f64>());
        let k = build_gaussian_kernel(pts.view(), pts.view(), 0.5).unwrap();
        let m = k.dense_view().unwrap();
        for i in 0..6 {
            assert_eq!(m[(i, i)], 1.0);
            for j in 0..6 {
                assert_eq!(m[(i, j)], m[(j, i)]);
                assert!(m[(i, j)] > 0.0 && m[(i, j)] <= 1.0);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = arr2(&[[0.0, 1.0]]);
        let b = arr2(&[[0.0]]);
        assert!(build_gaussian_kernel(a.view(), b.view(), 1.0).is_err());
        assert!(build_gaussian_kernel(b.view(), b.view(), 0.0).is_err());
        assert!(build_gaussian_kernel(b.view(), b.view(), -1.0).is_err());
        let k = build_gaussian_kernel(b.view(), b.view(), 1.0).unwrap();
        assert!(k.apply(arr1(&[1.0, 2.0]).view()).is_err());
    }

    #[test]
    fn apply_matches_triple_loop_and_is_linear_in_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = Array2::from_shape_fn((5, 2), |_| rng.gen::<f64>());
        let dst = Array2::from_shape_fn((4, 2), |_| rng.gen::<f64>());
        let k = build_gaussian_kernel(src.view(), dst.view(), 0.6).unwrap();
        let y = Array1::from_shape_fn(4, |_| rng.gen::<f64>() - 0.5);
        let got = k.apply(y.view()).unwrap();
        for i in 0..5 {
            let mut acc = 0.0;
            for j in 0..4 {
                let mut d2 = 0.0;
                for ax in 0..2 {
                    let diff = src[(i, ax)] - dst[(j, ax)];
                    d2 += diff * diff;
                }
                acc += (-d2 / 0.6f64).exp() * y[j];
            }
            assert!((got[i] - acc).abs() < 1e-14);
        }
        let zero = Array1::zeros(4);
        assert!(k.apply(zero.view()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transpose_consistency_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let src = Array2::from_shape_fn((6, 1), |_| rng.gen::<f64>());
        let dst = Array2::from_shape_fn((3, 1), |_| rng.gen::<f64>());
        let k = build_gaussian_kernel(src.view(), dst.view(), 0.8).unwrap();
        let y = Array1::from_shape_fn(3, |_| rng.gen::<f64>() - 0.5);
        let z = Array1::from_shape_fn(6, |_| rng.gen::<f64>() - 0.5);
        let lhs: f64 = k.apply(y.view()).unwrap().dot(&z);
        let rhs: f64 = y.dot(&k.apply_transpose(z.view()).unwrap());
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn application_counter_counts_requests() {
        let mut f = DirectFactory::<f64>::new();
        let pts = arr2(&[[0.0], [1.0]]);
        let k = f.make_edge(pts.view(), pts.view(), 1.0).unwrap();
        assert_eq!(f.applications(), 0);
        let y = arr1(&[1.0, 2.0]);
        k.apply(y.view()).unwrap();
        k.apply_transpose(y.view()).unwrap();
        k.materialize().unwrap();
        assert_eq!(f.applications(), 3);
    }

    #[test]
    fn ones_backend_for_infinite_eta() {
        let mut f = DirectFactory::<f64>::new();
        let a = arr2(&[[0.0], [2.0], [5.0]]);
        let b = arr2(&[[1.0], [9.0]]);
        let k = f.make_edge(a.view(), b.view(), f64::INFINITY).unwrap();
        let y = arr1(&[0.25, 0.75]);
        let out = k.apply(y.view()).unwrap();
        assert!(out.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert_eq!(k.materialize().unwrap(), Array2::from_elem((3, 2), 1.0));
    }

    #[test]
    fn fast_factory_agrees_with_direct_on_vectors_and_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let src = Array2::from_shape_fn((40, 1), |_| rng.gen::<f64>() - 0.5);
        let dst = Array2::from_shape_fn((30, 1), |_| rng.gen::<f64>() - 0.5);
        let eta = 0.4;
        let mut direct = DirectFactory::<f64>::new();
        let kd = direct.make_edge(src.view(), dst.view(), eta).unwrap();
        let params = FastSumParams::new(64, 3, 1.0 / 16.0);
        let mut fast = FastFactory::new(params, &[src.view(), dst.view()]).unwrap();
        let kf = fast.make_edge(src.view(), dst.view(), eta).unwrap();
        let y = Array1::from_shape_fn(30, |_| rng.gen::<f64>() - 0.5);
        let a = kd.apply(y.view()).unwrap();
        let b = kf.apply(y.view()).unwrap();
        let scale = a.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        for i in 0..40 {
            assert!((a[i] - b[i]).abs() <= 1e-6 * scale);
        }
        let z = Array1::from_shape_fn(40, |_| rng.gen::<f64>() - 0.5);
        let at = kd.apply_transpose(z.view()).unwrap();
        let bt = kf.apply_transpose(z.view()).unwrap();
        for j in 0..30 {
            assert!((at[j] - bt[j]).abs() <= 1e-6 * scale);
        }
        let mat = Array2::from_shape_fn((30, 5), |_| rng.gen::<f64>() - 0.5);
        let am = kd.apply_mat(mat.view()).unwrap();
        let bm = kf.apply_mat(mat.view()).unwrap();
        for (x, y) in am.iter().zip(bm.iter()) {
            assert!((x - y).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn direct_factory_shares_identical_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pts = Array2::from_shape_fn((8, 1), |_| rng.gen::<f64>());
        let mut f = DirectFactory::<f64>::new();
        let k1 = f.make_edge(pts.view(), pts.view(), 0.5).unwrap();
        let k2 = f.make_edge(pts.view(), pts.view(), 0.5).unwrap();
        let (Backend::Direct(m1), Backend::Direct(m2)) = (&k1.backend, &k2.backend) else {
            panic!("expected direct backends");
        };
        assert!(Arc::ptr_eq(m1, m2));
    }
}
