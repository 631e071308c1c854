//! Sign-invariant error measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub dist: f64,
    pub cosine_error: f64,
    pub support_contained: bool,
}

fn check_dims(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(())
}

/// `min(‖u − v‖, ‖u + v‖)`
pub fn dist(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims(u, v)?;
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    Ok(minus.min(plus).sqrt())
}

/// `1 − |⟨e/‖e‖, t/‖t‖⟩|`, clamped to `[0, 1]`.
pub fn cosine_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    check_dims(estimate, truth)?;
    let ne = norm(estimate);
    let nt = norm(truth);
    if ne == 0.0 || nt == 0.0 {
        return Err(Error::UndefinedDirection);
    }
    let cos = (dot(estimate, truth) / (ne * nt)).abs().min(1.0);
    Ok(1.0 - cos)
}

/// Every exact nonzero of `estimate` lies in `truth_support`.
pub fn support_contained(estimate: &[f64], truth_support: &[usize]) -> bool {
    estimate
        .iter()
        .enumerate()
        .all(|(j, &v)| v == 0.0 || truth_support.contains(&j))
}

pub fn support_size(x: &[f64]) -> usize {
    x.iter().filter(|v| **v != 0.0).count()
}

/// Full report for an estimate against a unit-norm truth. The estimate is
/// normalised before `dist` is taken.
pub fn error_report(estimate: &[f64], truth: &[f64], truth_support: &[usize]) -> Result<ErrorReport> {
    let cosine_error = cosine_error(estimate, truth)?;
    let unit: Vec<f64> = {
        let n = norm(estimate);
        estimate.iter().map(|v| v / n).collect()
    };
    Ok(ErrorReport {
        dist: dist(&unit, truth)?,
        cosine_error,
        support_contained: support_contained(estimate, truth_support),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_vector, normalized, RngStream};
    use proptest::prelude::*;

    #[test]
    fn dist_examples() {
        let u = [0.3, -0.4, 1.2];
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        assert_eq!(dist(&u, &u).unwrap(), 0.0);
        assert_eq!(dist(&u, &neg).unwrap(), 0.0);
        assert!((dist(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(dist(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cosine_error_examples() {
        assert!(cosine_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap() < 1e-15);
        assert_eq!(cosine_error(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        let a = [1.0, 0.0];
        let b = [0.5, 3f64.sqrt() / 2.0];
        let ce = cosine_error(&a, &b).unwrap();
        assert!((ce - 0.5).abs() < 1e-12);
        assert!((ce - dist(&a, &b).unwrap().powi(2) / 2.0).abs() < 1e-12);
        assert!(matches!(cosine_error(&[0.0, 0.0], &a), Err(Error::UndefinedDirection)));
    }

    #[test]
    fn support_examples() {
        assert!(support_contained(&[0.0, 0.0, 0.0], &[]));
        assert!(support_contained(&[0.0, 1.0, -2.0], &[1, 2]));
        assert!(!support_contained(&[1e-300, 1.0, -2.0], &[1, 2]));
    }

    fn unit(seed: u64, dim: usize) -> Vec<f64> {
        normalized(&gaussian_vector(&mut RngStream::new(seed, 0), dim).unwrap()).unwrap()
    }

    proptest! {
        #[test]
        fn dist_sign_invariant(seed in 0u64..10_000, dim in 1usize..8) {
            let u = gaussian_vector(&mut RngStream::new(seed, 1), dim).unwrap();
            let v = gaussian_vector(&mut RngStream::new(seed, 2), dim).unwrap();
            let nu: Vec<f64> = u.iter().map(|x| -x).collect();
            let nv: Vec<f64> = v.iter().map(|x| -x).collect();
            let d = dist(&u, &v).unwrap();
            prop_assert_eq!(d, dist(&nu, &v).unwrap());
            prop_assert_eq!(d, dist(&u, &nv).unwrap());
            prop_assert_eq!(d, dist(&v, &u).unwrap());
        }

        #[test]
        fn cosine_error_is_half_squared_dist(seed in 0u64..10_000, dim in 1usize..8) {
            let u = unit(seed, dim);
            let v = unit(seed + 20_000, dim);
            let ce = cosine_error(&u, &v).unwrap();
            let d = dist(&u, &v).unwrap();
            prop_assert!((ce - d * d / 2.0).abs() <= 1e-12);
        }

        #[test]
        fn dist_triangle_on_unit_vectors(seed in 0u64..10_000, dim in 1usize..8) {
            let u = unit(seed, dim);
            let v = unit(seed + 20_000, dim);
            let w = unit(seed + 40_000, dim);
            let lhs = dist(&u, &w).unwrap();
            let rhs = dist(&u, &v).unwrap() + dist(&v, &w).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
