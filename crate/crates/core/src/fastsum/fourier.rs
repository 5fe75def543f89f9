//! Fourier coefficients of the periodized kernel.
//!
//! Coefficient grids are stored flat in row-major order with the "natural
//! FFT" index convention: array index `q` along an axis of length `L`
//! holds frequency `q` if `q < L/2` and `q - L` otherwise. This avoids
//! physical fftshifts everywhere.

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{cast, Real};

use super::hermite::RegularizedKernel;

/// Hard cap on coefficient-grid entries (`(2M)^d`).
pub const COEFF_BUDGET: usize = 1 << 24;

/// Maps a natural-order index to its signed frequency.
#[inline]
pub fn index_to_freq(q: usize, len: usize) -> i64 {
    if q < len / 2 {
        q as i64
    } else {
        q as i64 - len as i64
    }
}

/// Maps a signed frequency to its natural-order index.
#[inline]
pub fn freq_to_index(k: i64, len: usize) -> usize {
    k.rem_euclid(len as i64) as usize
}

/// A flat complex grid over `{-M..M-1}^d` in natural index order.
#[derive(Debug, Clone)]
pub struct CoeffGrid<T: Real> {
    pub dims: Vec<usize>,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> CoeffGrid<T> {
    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![Complex::new(T::zero(), T::zero()); len],
        }
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Iterates `(flat_index, frequencies)` pairs.
    pub fn enumerate_freqs(&self) -> impl Iterator<Item = (usize, Vec<i64>)> + '_ {
        let dims = self.dims.clone();
        (0..self.len()).map(move |flat| {
            let mut rest = flat;
            let mut freqs = vec![0i64; dims.len()];
            for ax in (0..dims.len()).rev() {
                let q = rest % dims[ax];
                rest /= dims[ax];
                freqs[ax] = index_to_freq(q, dims[ax]);
            }
            (flat, freqs)
        })
    }
}

/// In-place complex FFT along every axis of a row-major flat array.
pub struct MultiFft<T: Real> {
    plans: Vec<(Arc<dyn Fft<T>>, Arc<dyn Fft<T>>)>,
    dims: Vec<usize>,
}

impl<T: Real> MultiFft<T> {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let plans = dims
            .iter()
            .map(|&l| (planner.plan_fft_forward(l), planner.plan_fft_inverse(l)))
            .collect();
        Self {
            plans,
            dims: dims.to_vec(),
        }
    }

    /// `X_k = sum_j x_j e^{-2 pi i jk/L}` along every axis, unnormalized.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.run(data, true)
    }

    /// `x_j = sum_k X_k e^{+2 pi i jk/L}` along every axis, unnormalized.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.run(data, false)
    }

    fn run(&self, data: &mut [Complex<T>], forward: bool) {
        let d = self.dims.len();
        debug_assert_eq!(data.len(), self.dims.iter().product::<usize>());
        // stride of axis `ax` in row-major layout
        let mut strides = vec![1usize; d];
        for ax in (0..d.saturating_sub(1)).rev() {
            strides[ax] = strides[ax + 1] * self.dims[ax + 1];
        }
        let total = data.len();
        let mut lane = Vec::new();
        for ax in 0..d {
            let plan = if forward {
                &self.plans[ax].0
            } else {
                &self.plans[ax].1
            };
            let len = self.dims[ax];
            let stride = strides[ax];
            if stride == 1 {
                for chunk in data.chunks_exact_mut(len) {
                    plan.process(chunk);
                }
            } else {
                lane.resize(len, Complex::new(T::zero(), T::zero()));
                let lanes = total / len;
                for lane_idx in 0..lanes {
                    // decompose lane index into (outer block, inner offset)
                    let outer = lane_idx / stride;
                    let inner = lane_idx % stride;
                    let base = outer * stride * len + inner;
                    for (i, slot) in lane.iter_mut().enumerate() {
                        *slot = data[base + i * stride];
                    }
                    plan.process(&mut lane);
                    for (i, &v) in lane.iter().enumerate() {
                        data[base + i * stride] = v;
                    }
                }
            }
        }
    }
}

/// Truncated Fourier data of the periodized kernel, plus the affine map
/// the points were pressed through before the transform.
#[derive(Debug, Clone)]
pub struct FourierKernel<T: Real> {
    pub coeffs: CoeffGrid<T>,
    pub half_degree: usize,
    pub tau: T,
    pub reg: RegularizedKernel<T>,
}

/// Samples the radial periodization of `reg` on the tensor grid
/// `(tau/M) {-M..M-1}^d` and transforms it to Fourier coefficients
/// `khat(m) = (2M)^{-d} sum_x ktilde(x) e^{-i pi/tau m.x}` with a
/// d-dimensional FFT.
pub fn periodize_and_transform<T: Real>(
    reg: &RegularizedKernel<T>,
    d: usize,
    half_degree: usize,
) -> Result<FourierKernel<T>> {
    if d == 0 || d > 3 {
        return Err(Error::UnsupportedDimension { d });
    }
    if half_degree < 2 {
        return Err(Error::InvalidParameter(format!(
            "Fourier half-degree must be >= 2, got {half_degree}"
        )));
    }
    let m = half_degree;
    let len = 2 * m;
    let entries = len.pow(d as u32);
    if entries > COEFF_BUDGET {
        return Err(Error::MemoryBudget {
            entries,
            budget: COEFF_BUDGET,
        });
    }
    let tau = reg.tau;
    let step = tau / cast::<T>(m as f64);
    let mut grid = CoeffGrid::<T>::zeros(vec![len; d]);
    // sample ktilde(x) = kappa_R(|x|) in natural index order
    for flat in 0..entries {
        let mut rest = flat;
        let mut r2 = T::zero();
        for _ in 0..d {
            let q = rest % len;
            rest /= len;
            let x = step * cast::<T>(index_to_freq(q, len) as f64);
            r2 += x * x;
        }
        grid.data[flat] = Complex::new(reg.eval(r2.sqrt()), T::zero());
    }
    let fft = MultiFft::new(&grid.dims);
    fft.forward(&mut grid.data);
    let norm = T::one() / cast::<T>(entries as f64);
    for v in grid.data.iter_mut() {
        *v = *v * norm;
    }
    Ok(FourierKernel {
        coeffs: grid,
        half_degree: m,
        tau,
        reg: reg.clone(),
    })
}

impl<T: Real> FourierKernel<T> {
    pub fn d(&self) -> usize {
        self.coeffs.d()
    }

    /// Reconstructs `sum_m khat(m) e^{+i pi/tau m.x}` by direct summation.
    /// Quadratic cost; for tests and small inputs.
    pub fn reconstruct(&self, x: &[T]) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        let scale = T::PI() / self.tau;
        for (flat, freqs) in self.coeffs.enumerate_freqs() {
            let mut phase = T::zero();
            for (ax, &k) in freqs.iter().enumerate() {
                phase += scale * cast::<T>(k as f64) * x[ax];
            }
            acc += self.coeffs.data[flat] * Complex::new(phase.cos(), phase.sin());
        }
        acc
    }
}
