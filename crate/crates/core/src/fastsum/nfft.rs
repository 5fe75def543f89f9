//! Nonuniform discrete Fourier transforms, exact and fast.
//!
//! Conventions (all points `x` satisfy `|x|_inf < tau`, frequencies run
//! over `{-M..M-1}^d`):
//!
//! * forward:  `f(x_i) = sum_m c(m) exp(+i pi/tau m.x_i)`
//! * adjoint:  `h(m)  = sum_j a_j  exp(-i pi/tau m.x_j)`
//!
//! The fast versions grid the points with a Kaiser-Bessel window on an
//! oversampled FFT lattice; accuracy is controlled by the window cutoff.

use ndarray::ArrayView2;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cast, Real};

use super::fourier::{freq_to_index, index_to_freq, CoeffGrid, MultiFft};

/// Modified Bessel function of the first kind, order zero, by its power
/// series. Arguments here stay below ~60, well inside f64 range.
pub(crate) fn bessel_i0<T: Real>(x: T) -> T {
    let q = x * x / cast(4.0);
    let mut term = T::one();
    let mut sum = T::one();
    for k in 1..400 {
        let kk = cast::<T>(k as f64);
        term = term * q / (kk * kk);
        sum += term;
        if term <= cast::<T>(1e-18) * sum {
            break;
        }
    }
    sum
}

fn check_range<T: Real>(points: ArrayView2<'_, T>, tau: T) -> Result<()> {
    for (i, row) in points.outer_iter().enumerate() {
        for &c in row.iter() {
            if !(c.abs() < tau) {
                return Err(Error::PointOutOfRange {
                    index: i,
                    coord: c.abs().to_f64().unwrap_or(f64::NAN),
                    tau: tau.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok(())
}

/// Exact forward NDFT of a coefficient grid at the given points.
pub fn ndft<T: Real>(
    coeffs: &CoeffGrid<T>,
    tau: T,
    points: ArrayView2<'_, T>,
) -> Result<Vec<Complex<T>>> {
    let d = coeffs.d();
    if points.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "ndft points vs coefficient grid",
            expected: d,
            got: points.ncols(),
        });
    }
    check_range(points, tau)?;
    let scale = T::PI() / tau;
    let mut out = vec![Complex::new(T::zero(), T::zero()); points.nrows()];
    for (flat, freqs) in coeffs.enumerate_freqs() {
        let c = coeffs.data[flat];
        for (i, row) in points.outer_iter().enumerate() {
            let mut phase = T::zero();
            for (ax, &k) in freqs.iter().enumerate() {
                phase += scale * cast::<T>(k as f64) * row[ax];
            }
            out[i] += c * Complex::new(phase.cos(), phase.sin());
        }
    }
    Ok(out)
}

/// Exact adjoint NDFT of real weights located at the given points.
pub fn adjoint_ndft<T: Real>(
    weights: &[T],
    points: ArrayView2<'_, T>,
    tau: T,
    half_degree: usize,
) -> Result<CoeffGrid<T>> {
    let d = points.ncols();
    if d == 0 || d > 3 {
        return Err(Error::UnsupportedDimension { d });
    }
    if weights.len() != points.nrows() {
        return Err(Error::DimensionMismatch {
            context: "adjoint ndft weights vs points",
            expected: points.nrows(),
            got: weights.len(),
        });
    }
    check_range(points, tau)?;
    let mut grid = CoeffGrid::zeros(vec![2 * half_degree; d]);
    let scale = T::PI() / tau;
    for (flat, freqs) in grid.enumerate_freqs().collect::<Vec<_>>() {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, row) in points.outer_iter().enumerate() {
            let mut phase = T::zero();
            for (ax, &k) in freqs.iter().enumerate() {
                phase += scale * cast::<T>(k as f64) * row[ax];
            }
            acc += Complex::new(phase.cos(), -phase.sin()) * weights[j];
        }
        grid.data[flat] = acc;
    }
    Ok(grid)
}

/// Kaiser-Bessel window on an oversampled lattice of `n` cells per axis.
#[derive(Debug, Clone)]
struct Window<T: Real> {
    n: usize,
    cutoff: usize,
    shape: T,
}

impl<T: Real> Window<T> {
    fn new(n: usize, coeff_len: usize, cutoff: usize) -> Self {
        let sigma = cast::<T>(n as f64) / cast::<T>(coeff_len as f64);
        let shape = T::PI() * (cast::<T>(2.0) - T::one() / sigma);
        Self { n, cutoff, shape }
    }

    /// Window value at a signed distance (in grid cells) from a lattice point.
    fn value(&self, dist: T) -> T {
        let m = cast::<T>(self.cutoff as f64);
        let arg = m * m - dist * dist;
        if arg > T::zero() {
            let s = arg.sqrt();
            (self.shape * s).sinh() / (T::PI() * s)
        } else if arg == T::zero() {
            self.shape / T::PI()
        } else {
            let s = (-arg).sqrt();
            (self.shape * s).sin() / (T::PI() * s)
        }
    }

    /// Fourier transform at integer frequency `k`, `|2 pi k / n| <= shape`.
    fn hat(&self, k: i64) -> T {
        let m = cast::<T>(self.cutoff as f64);
        let w = cast::<T>(2.0) * T::PI() * cast::<T>(k as f64) / cast::<T>(self.n as f64);
        let arg = self.shape * self.shape - w * w;
        debug_assert!(arg > T::zero());
        bessel_i0(m * arg.sqrt()) / cast::<T>(self.n as f64)
    }
}

/// Per-point spreading table: base lattice index and window weights for
/// each axis.
#[derive(Debug, Clone)]
struct SpreadEntry<T> {
    base: Vec<i64>,
    weights: Vec<Vec<T>>,
}

/// A gridded transform plan bound to one fixed point set.
///
/// Building the plan precomputes the per-point window tables, so repeated
/// transforms over the same geometry only pay for FFT plus gather/scatter.
pub struct NfftPlan<T: Real> {
    d: usize,
    half_degree: usize,
    n: usize,
    window: Window<T>,
    /// `1 / (n^d prod_ax phi_hat(k_ax))`, one factor array per axis.
    deconv: Vec<Vec<T>>,
    entries: Vec<SpreadEntry<T>>,
    fft: MultiFft<T>,
    grid_dims: Vec<usize>,
}

impl<T: Real> NfftPlan<T> {
    /// Plans transforms of degree `half_degree` for the given points, with
    /// oversampling factor `oversampling >= 1` and window `cutoff`.
    pub fn new(
        points: ArrayView2<'_, T>,
        tau: T,
        half_degree: usize,
        oversampling: f64,
        cutoff: usize,
    ) -> Result<Self> {
        let d = points.ncols();
        if d == 0 || d > 3 {
            return Err(Error::UnsupportedDimension { d });
        }
        check_range(points, tau)?;
        let coeff_len = 2 * half_degree;
        let mut n = (oversampling * coeff_len as f64).ceil() as usize;
        if n % 2 == 1 {
            n += 1;
        }
        if 2 * cutoff + 2 > n {
            return Err(Error::CutoffTooLarge { cutoff, grid: n });
        }
        let window = Window::new(n, coeff_len, cutoff);
        // deconvolution factors over the coefficient band; spreads the
        // 1/n^d FFT normalization evenly across axes
        let axis_norm = T::one() / cast::<T>(n as f64).powf(T::one());
        let mut deconv = Vec::with_capacity(d);
        for _ in 0..d {
            let mut facs = vec![T::zero(); coeff_len];
            for q in 0..coeff_len {
                let k = index_to_freq(q, coeff_len);
                facs[q] = axis_norm / window.hat(k);
            }
            deconv.push(facs);
        }
        // per-point tables; y = x/(2 tau) in [-1/2, 1/2)
        let width = 2 * cutoff + 2;
        let half = T::one() / (cast::<T>(2.0) * tau);
        let nf = cast::<T>(n as f64);
        let entries = points
            .outer_iter()
            .map(|row| {
                let mut base = Vec::with_capacity(d);
                let mut weights = Vec::with_capacity(d);
                for ax in 0..d {
                    let y = row[ax] * half;
                    let u = (y * nf).floor();
                    let u0 = u.to_f64().unwrap() as i64 - cutoff as i64;
                    let mut w = Vec::with_capacity(width);
                    for i in 0..width {
                        let dist = y * nf - cast::<T>((u0 + i as i64) as f64);
                        w.push(window.value(dist));
                    }
                    base.push(u0);
                    weights.push(w);
                }
                SpreadEntry { base, weights }
            })
            .collect();
        let grid_dims = vec![n; d];
        Ok(Self {
            d,
            half_degree,
            n,
            window,
            deconv,
            entries,
            fft: MultiFft::new(&grid_dims),
            grid_dims,
        })
    }

    pub fn point_count(&self) -> usize {
        self.entries.len()
    }

    pub fn half_degree(&self) -> usize {
        self.half_degree
    }

    fn grid_len(&self) -> usize {
        self.grid_dims.iter().product()
    }

    /// Scatters coefficients (natural order over `{-M..M-1}^d`) into the
    /// oversampled grid with deconvolution applied.
    fn deconvolve_pad(&self, coeffs: &[Complex<T>], grid: &mut [Complex<T>]) {
        let coeff_len = 2 * self.half_degree;
        grid.iter_mut()
            .for_each(|v| *v = Complex::new(T::zero(), T::zero()));
        let d = self.d;
        for (flat, c) in coeffs.iter().enumerate() {
            let mut rest = flat;
            let mut target = 0usize;
            let mut factor = T::one();
            // decompose row-major flat index (last axis fastest)
            let mut target_stride = 1usize;
            for ax in (0..d).rev() {
                let q = rest % coeff_len;
                rest /= coeff_len;
                let k = index_to_freq(q, coeff_len);
                factor *= self.deconv[ax][q];
                target += freq_to_index(k, self.n) * target_stride;
                target_stride *= self.n;
            }
            grid[target] = *c * factor;
        }
    }

    /// Extracts the coefficient band from the oversampled grid with
    /// deconvolution applied.
    fn deconvolve_crop(&self, grid: &[Complex<T>], coeffs: &mut [Complex<T>]) {
        let coeff_len = 2 * self.half_degree;
        let d = self.d;
        for (flat, out) in coeffs.iter_mut().enumerate() {
            let mut rest = flat;
            let mut src = 0usize;
            let mut factor = T::one();
            let mut src_stride = 1usize;
            for ax in (0..d).rev() {
                let q = rest % coeff_len;
                rest /= coeff_len;
                let k = index_to_freq(q, coeff_len);
                factor *= self.deconv[ax][q];
                src += freq_to_index(k, self.n) * src_stride;
                src_stride *= self.n;
            }
            *out = grid[src] * factor;
        }
    }

    /// Fast forward transform: evaluates the trigonometric polynomial with
    /// the given coefficients at every planned point.
    pub fn forward(&self, coeffs: &[Complex<T>], out: &mut [Complex<T>]) {
        debug_assert_eq!(coeffs.len(), (2 * self.half_degree).pow(self.d as u32));
        debug_assert_eq!(out.len(), self.entries.len());
        let mut grid = vec![Complex::new(T::zero(), T::zero()); self.grid_len()];
        self.deconvolve_pad(coeffs, &mut grid);
        self.fft.inverse(&mut grid);
        let n = self.n as i64;
        let width = 2 * self.window.cutoff + 2;
        for (e, o) in self.entries.iter().zip(out.iter_mut()) {
            let mut acc = Complex::new(T::zero(), T::zero());
            match self.d {
                1 => {
                    for i in 0..width {
                        let l = (e.base[0] + i as i64).rem_euclid(n) as usize;
                        acc += grid[l] * e.weights[0][i];
                    }
                }
                2 => {
                    for i in 0..width {
                        let li = (e.base[0] + i as i64).rem_euclid(n) as usize * self.n;
                        let wi = e.weights[0][i];
                        for j in 0..width {
                            let lj = (e.base[1] + j as i64).rem_euclid(n) as usize;
                            acc += grid[li + lj] * (wi * e.weights[1][j]);
                        }
                    }
                }
                _ => {
                    for i in 0..width {
                        let li = (e.base[0] + i as i64).rem_euclid(n) as usize * self.n * self.n;
                        let wi = e.weights[0][i];
                        for j in 0..width {
                            let lj = (e.base[1] + j as i64).rem_euclid(n) as usize * self.n;
                            let wij = wi * e.weights[1][j];
                            for k in 0..width {
                                let lk = (e.base[2] + k as i64).rem_euclid(n) as usize;
                                acc += grid[li + lj + lk] * (wij * e.weights[2][k]);
                            }
                        }
                    }
                }
            }
            *o = acc;
        }
    }

    /// Fast adjoint transform: accumulates point weights into the
    /// coefficient band.
    pub fn adjoint(&self, weights: &[Complex<T>], coeffs: &mut [Complex<T>]) {
        debug_assert_eq!(weights.len(), self.entries.len());
        debug_assert_eq!(coeffs.len(), (2 * self.half_degree).pow(self.d as u32));
        let mut grid = vec![Complex::new(T::zero(), T::zero()); self.grid_len()];
        let n = self.n as i64;
        let width = 2 * self.window.cutoff + 2;
        for (e, &a) in self.entries.iter().zip(weights.iter()) {
            match self.d {
                1 => {
                    for i in 0..width {
                        let l = (e.base[0] + i as i64).rem_euclid(n) as usize;
                        grid[l] += a * e.weights[0][i];
                    }
                }
                2 => {
                    for i in 0..width {
                        let li = (e.base[0] + i as i64).rem_euclid(n) as usize * self.n;
                        let wi = e.weights[0][i];
                        for j in 0..width {
                            let lj = (e.base[1] + j as i64).rem_euclid(n) as usize;
                            grid[li + lj] += a * (wi * e.weights[1][j]);
                        }
                    }
                }
                _ => {
                    for i in 0..width {
                        let li = (e.base[0] + i as i64).rem_euclid(n) as usize * self.n * self.n;
                        let wi = e.weights[0][i];
                        for j in 0..width {
                            let lj = (e.base[1] + j as i64).rem_euclid(n) as usize * self.n;
                            let wij = wi * e.weights[1][j];
                            for k in 0..width {
                                let lk = (e.base[2] + k as i64).rem_euclid(n) as usize;
                                grid[li + lj + lk] += a * (wij * e.weights[2][k]);
                            }
                        }
                    }
                }
            }
        }
        self.fft.forward(&mut grid);
        self.deconvolve_crop(&grid, coeffs);
    }
}
