//! Boundary regularization of the Gaussian kernel.
//!
//! The radial kernel `kappa(x) = exp(-x^2/eta)` is capped on the interval
//! `(tau - eps_b, tau]` by a two-point Hermite polynomial `kappa_B` so that
//! the periodization of the capped kernel is `p-1` times continuously
//! differentiable.

use crate::error::{Error, Result};
use crate::scalar::{cast, Real};

/// `r`-th derivative of `exp(-x^2/eta)`, from the Hermite-polynomial form
/// `kappa^(r)(x) = (-1)^r eta^(-r/2) H_r(x/sqrt(eta)) exp(-x^2/eta)`.
pub fn gaussian_derivative<T: Real>(x: T, eta: T, r: usize) -> T {
    let z = x / eta.sqrt();
    let mut h_prev = T::one();
    let mut h = cast::<T>(2.0) * z;
    if r == 0 {
        return (-x * x / eta).exp();
    }
    for n in 1..r {
        let next = cast::<T>(2.0) * z * h - cast::<T>(2.0 * n as f64) * h_prev;
        h_prev = h;
        h = next;
    }
    let sign = if r % 2 == 0 { T::one() } else { -T::one() };
    sign * eta.powf(-cast::<T>(r as f64) / cast(2.0)) * h * (-x * x / eta).exp()
}

/// Solves a small dense linear system by Gaussian elimination with partial
/// pivoting. Returns `None` if a pivot degenerates.
pub(crate) fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < cast(1e-13) {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[row][c] = a[row][c] - f * v;
            }
            let v = b[col];
            b[row] = b[row] - f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s = s - a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Coefficients (in the shifted variable `u = (x - (tau - eps_b))/eps_b`)
/// of the minimal-degree polynomial satisfying
/// `kappa_B^(r)(tau - eps_b) = kappa^(r)(tau - eps_b)` for `r = 0..p-1` and
/// `kappa_B^(r)(tau) = 0` for `r = 1..p-1`. That is `2p - 1` conditions,
/// met by a unique polynomial of degree `<= 2p - 2`.
pub fn boundary_polynomial<T: Real>(eta: T, tau: T, eps_b: T, p: usize) -> Result<Vec<T>> {
    if p == 0 {
        return Err(Error::InvalidParameter("smoothness p must be >= 1".into()));
    }
    let n = 2 * p - 1;
    let mut a = vec![vec![T::zero(); n]; n];
    let mut b = vec![T::zero(); n];
    let mut factorial = vec![T::one(); n];
    for j in 1..n {
        factorial[j] = factorial[j - 1] * cast(j as f64);
    }
    // d^r/du^r u^j at u = 0 is r! when j = r
    for r in 0..p {
        a[r][r] = factorial[r];
        b[r] = eps_b.powi(r as i32) * gaussian_derivative(tau - eps_b, eta, r);
    }
    // d^r/du^r u^j at u = 1 is j!/(j-r)!
    for (row, r) in (p..n).zip(1..p) {
        for j in r..n {
            a[row][j] = factorial[j] / factorial[j - r];
        }
    }
    solve_dense(a, b).ok_or(Error::SingularHermiteSystem { p })
}

/// Evaluates a polynomial given by `coeffs` (ascending powers) at `u`.
pub fn eval_poly<T: Real>(coeffs: &[T], u: T) -> T {
    let mut v = T::zero();
    for &c in coeffs.iter().rev() {
        v = v * u + c;
    }
    v
}

/// The capped radial kernel `kappa_R`.
///
/// * `kappa_R(x) = exp(-x^2/eta)` for `|x| <= tau - eps_b`,
/// * the boundary polynomial on `tau - eps_b < |x| <= tau`,
/// * the constant `kappa_B(tau)` beyond `tau`.
#[derive(Debug, Clone)]
pub struct RegularizedKernel<T: Real> {
    pub eta: T,
    pub tau: T,
    pub eps_b: T,
    pub smoothness: usize,
    boundary: Vec<T>,
    plateau: T,
}

impl<T: Real> RegularizedKernel<T> {
    pub fn new(eta: T, tau: T, eps_b: T, p: usize) -> Result<Self> {
        if !(eta > T::zero()) {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")));
        }
        if !(eps_b > T::zero() && eps_b < tau) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < eps_b < tau, got eps_b = {eps_b}, tau = {tau}"
            )));
        }
        let boundary = boundary_polynomial(eta, tau, eps_b, p)?;
        let plateau = eval_poly(&boundary, T::one());
        Ok(Self {
            eta,
            tau,
            eps_b,
            smoothness: p,
            boundary,
            plateau,
        })
    }

    pub fn boundary_coeffs(&self) -> &[T] {
        &self.boundary
    }

    pub fn eval(&self, x: T) -> T {
        let x = x.abs();
        if x <= self.tau - self.eps_b {
            (-x * x / self.eta).exp()
        } else if x <= self.tau {
            eval_poly(&self.boundary, (x - (self.tau - self.eps_b)) / self.eps_b)
        } else {
            self.plateau
        }
    }
}
