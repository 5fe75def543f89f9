//! Discrete probability measures supported on finitely many atoms.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::{cast, Real};

/// Tolerance inside which a weight vector is renormalized instead of
/// rejected; padded by a few ulps so a decimal exactly 1e-9 away from 1
/// still parses inside the window.
const SUM_SLACK: f64 = 1e-9 * (1.0 + 1e-6);

/// A measure `sum_i w_i delta_{x_i}` with atoms `x_i` in `R^d`.
///
/// Weights are nonnegative and sum to one; constructors renormalize inputs
/// whose sum is within `1e-9` of one and reject anything further off, so
/// file-format rounding is absorbed without masking real errors.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure<T: Real> {
    points: Array2<T>,
    weights: Array1<T>,
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn new(points: Array2<T>, weights: Array1<T>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return Err(Error::InvalidMeasure("needs at least one atom".into()));
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                context: "measure points vs weights",
                expected: n,
                got: weights.len(),
            });
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite coordinate".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < T::zero() {
                return Err(Error::InvalidMeasure(format!(
                    "weight {i} is {w}, must be finite and >= 0"
                )));
            }
        }
        let sum = weights.sum();
        if (sum - T::one()).abs() > cast(SUM_SLACK) {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {sum}, more than {SUM_SLACK:e} away from 1"
            )));
        }
        let weights = weights.mapv(|w| w / sum);
        Ok(Self { points, weights })
    }

    /// Uniform weights `1/n` on the given atoms.
    pub fn uniform(points: Array2<T>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return Err(Error::InvalidMeasure("needs at least one atom".into()));
        }
        let w = Array1::from_elem(n, T::one() / cast::<T>(n as f64));
        Self::new(points, w)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, T> {
        self.points.view()
    }

    pub fn weights(&self) -> ArrayView1<'_, T> {
        self.weights.view()
    }
}

/// Checks that every measure shares one ambient dimension and returns it.
pub fn common_dimension<T: Real>(measures: &[DiscreteMeasure<T>]) -> Result<usize> {
    let d = measures
        .first()
        .ok_or_else(|| Error::InvalidMeasure("no measures given".into()))?
        .dim();
    for m in measures {
        if m.dim() != d {
            return Err(Error::DimensionMismatch {
                context: "measure ambient dimensions",
                expected: d,
                got: m.dim(),
            });
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn renormalizes_close_sums() {
        let m = DiscreteMeasure::new(
            arr2(&[[0.0], [1.0]]),
            Array1::from(vec![0.5, 0.499999999]),
        )
        .unwrap();
        assert!((m.weights().sum() - 1.0f64).abs() < 1e-12);
    }

    #[test]
    fn rejects_far_sums_and_negative_weights() {
        assert!(DiscreteMeasure::new(arr2(&[[0.0]]), Array1::from(vec![0.9f64])).is_err());
        assert!(DiscreteMeasure::new(
            arr2(&[[0.0], [1.0]]),
            Array1::from(vec![1.5f64, -0.5])
        )
        .is_err());
    }

    #[test]
    fn zero_weights_are_allowed() {
        let m =
            DiscreteMeasure::new(arr2(&[[0.0], [1.0]]), Array1::from(vec![1.0f64, 0.0])).unwrap();
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn single_atom_is_fine() {
        let m = DiscreteMeasure::<f64>::uniform(arr2(&[[0.25, 0.5]])).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.dim(), 2);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let a = DiscreteMeasure::<f64>::uniform(arr2(&[[0.0]])).unwrap();
        let b = DiscreteMeasure::<f64>::uniform(arr2(&[[0.0, 1.0]])).unwrap();
        assert!(common_dimension(&[a, b]).is_err());
    }
}
