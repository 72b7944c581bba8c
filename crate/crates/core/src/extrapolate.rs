//! Two-point Richardson extrapolation for sequences with a `c/n` error term.

use crate::error::{Error, Result};

/// Eliminates the `c/n` term from two samples: `(n₂S₂ − n₁S₁)/(n₂ − n₁)`.
///
/// On a doubling ladder this is `2·S(2n) − S(n)`.
pub fn richardson_pair(n1: u64, s1: f64, n2: u64, s2: f64) -> f64 {
    let (n1, n2) = (n1 as f64, n2 as f64);
    (n2 * s2 - n1 * s1) / (n2 - n1)
}

/// Extrapolants for every consecutive pair of a strictly increasing ladder.
pub fn richardson_ladder(ns: &[u64], values: &[f64]) -> Result<Vec<f64>> {
    if ns.len() != values.len() {
        return Err(Error::InvalidInput("ladder and values differ in length".into()));
    }
    if ns.len() < 2 {
        return Err(Error::InvalidInput("extrapolation needs at least two ladder points".into()));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("ladder must be strictly increasing".into()));
    }
    Ok(ns
        .windows(2)
        .zip(values.windows(2))
        .map(|(n, s)| richardson_pair(n[0], s[0], n[1], s[1]))
        .collect())
}

/// `2^lo, 2^(lo+1), …, 2^hi`.
pub fn doubling_ladder(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|p| 1u64 << p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn removes_first_order_term_exactly() {
        let ns = doubling_ladder(3, 8);
        let values: Vec<f64> = ns.iter().map(|&n| 2.5 + 3.0 / n as f64).collect();
        for e in richardson_ladder(&ns, &values).unwrap() {
            assert!((e - 2.5).abs() < 1e-13);
        }
    }

    #[test]
    fn leaves_second_order_residual() {
        // S(n) = L + c/n²  →  2S(2n) − S(n) = L − c/(2n²)
        let ns = [10u64, 20];
        let v = [1.0 + 4.0 / 100.0, 1.0 + 4.0 / 400.0];
        let e = richardson_pair(ns[0], v[0], ns[1], v[1]);
        assert!((e - (1.0 - 4.0 / 200.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_ladders() {
        assert!(richardson_ladder(&[4], &[1.0]).is_err());
        assert!(richardson_ladder(&[4, 4], &[1.0, 1.0]).is_err());
        assert!(richardson_ladder(&[4, 8], &[1.0]).is_err());
    }

    #[test]
    fn default_ladder() {
        let l = doubling_ladder(4, 14);
        assert_eq!(l.len(), 11);
        assert_eq!(l[0], 16);
        assert_eq!(*l.last().unwrap(), 16384);
    }
}
