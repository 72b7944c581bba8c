//! Mihesan basis weights `W_{n,k}^a(x)` and the polynomials `p_k(n, a)`.
//!
//! Weights are produced as the convolution of the classical Baskakov
//! (negative binomial) basis `b_{n,i}(x) = (n)_i/i! · x^i/(1+x)^{n+i}` with
//! Poisson weights of mean `a·x/(1+x)`:
//!
//! ```text
//! W_{n,k}^a(x) = Σ_{i=0}^{k} b_{n,i}(x) · e^{-λ} λ^{k-i}/(k-i)!,   λ = a·x/(1+x)
//! ```
//!
//! Every factor stays at probability scale, so neither `p_k(n, a)` nor `k!`
//! is ever formed for large `k`. The direct product form is kept as
//! [`basis_weight_direct`] for cross-checking.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};

/// The tuple `(n, a, α, β)` identifying one operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorParams {
    n: u64,
    a: f64,
    alpha: f64,
    beta: f64,
}

impl OperatorParams {
    pub fn new(n: u64, a: f64, alpha: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("n must be at least 1".into()));
        }
        if !a.is_finite() || a < 0.0 {
            return Err(Error::InvalidParams("a must be finite and non-negative".into()));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidParams("alpha must be finite and non-negative".into()));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidParams("beta must be finite".into()));
        }
        if alpha > beta {
            return Err(Error::InvalidParams("alpha must not exceed beta".into()));
        }
        Ok(Self { n, a, alpha, beta })
    }

    /// Unshifted operator (`α = β = 0`).
    pub fn mihesan(n: u64, a: f64) -> Result<Self> {
        Self::new(n, a, 0.0, 0.0)
    }

    /// Same `(a, α, β)` at a different index.
    pub fn with_n(&self, n: u64) -> Result<Self> {
        Self::new(n, self.a, self.alpha, self.beta)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `n + β`, the denominator of every evaluation node.
    pub fn shifted_n(&self) -> f64 {
        self.n as f64 + self.beta
    }

    /// Evaluation node `(k + α)/(n + β)`.
    #[inline]
    pub fn node(&self, k: u64) -> f64 {
        (k as f64 + self.alpha) / self.shifted_n()
    }
}

/// Stopping rule for the infinite series.
///
/// A series stops at the first `K` where the accumulated weight is at least
/// `1 - mass_epsilon` and the last `consecutive_small` terms were each below
/// `term_epsilon · (1 + |accumulated value|)`. It never runs past `k_max`
/// terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationPolicy {
    pub mass_epsilon: f64,
    pub term_epsilon: f64,
    pub consecutive_small: u32,
    pub k_max: u64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            mass_epsilon: 1e-14,
            term_epsilon: 1e-16,
            consecutive_small: 5,
            k_max: 1_000_000,
        }
    }
}

impl TruncationPolicy {
    pub fn new(
        mass_epsilon: f64,
        term_epsilon: f64,
        consecutive_small: u32,
        k_max: u64,
    ) -> Result<Self> {
        let policy = Self {
            mass_epsilon,
            term_epsilon,
            consecutive_small,
            k_max,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass_epsilon > 0.0 && self.mass_epsilon < 1.0) {
            return Err(Error::InvalidParams("mass_epsilon must lie in (0, 1)".into()));
        }
        if !(self.term_epsilon > 0.0 && self.term_epsilon.is_finite()) {
            return Err(Error::InvalidParams("term_epsilon must be positive".into()));
        }
        if self.consecutive_small == 0 {
            return Err(Error::InvalidParams("consecutive_small must be at least 1".into()));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidParams("k_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Rising factorial `(n)_i = n(n+1)…(n+i-1)`, `(n)_0 = 1`.
///
/// Exact while the product is representable; `+∞` once it overflows, in
/// which case callers should use [`ln_pochhammer`].
pub fn pochhammer(n: u64, i: u64) -> f64 {
    let mut acc = 1.0_f64;
    for j in 0..i {
        acc *= (n + j) as f64;
        if acc.is_infinite() {
            break;
        }
    }
    acc
}

/// `ln (n)_i`.
pub fn ln_pochhammer(n: u64, i: u64) -> f64 {
    (0..i).map(|j| ((n + j) as f64).ln()).sum()
}

/// `p_k(n, a) = Σ_{i=0}^{k} C(k, i) (n)_i a^{k-i}`.
///
/// The printed definition has an infinite upper limit and a binomial in `n`;
/// this is the reading under which the weights sum to one and `a = 0` gives
/// the classical basis.
pub fn p_poly(k: u64, n: u64, a: f64) -> f64 {
    if a == 0.0 {
        return pochhammer(n, k);
    }
    let mut binom = 1.0_f64;
    let mut poch = 1.0_f64;
    let mut sum = 0.0_f64;
    for i in 0..=k {
        sum += binom * poch * a.powi((k - i) as i32);
        binom *= (k - i) as f64 / (i + 1) as f64;
        poch *= (n + i) as f64;
    }
    sum
}

/// `ln p_k(n, a)` by log-sum-exp over the binomial sum.
pub fn ln_p_poly(k: u64, n: u64, a: f64) -> f64 {
    if a == 0.0 {
        return ln_pochhammer(n, k);
    }
    let ln_a = a.ln();
    let mut logs = Vec::with_capacity(k as usize + 1);
    let mut ln_binom = 0.0_f64;
    let mut ln_poch = 0.0_f64;
    for i in 0..=k {
        logs.push(ln_binom + ln_poch + (k - i) as f64 * ln_a);
        if i < k {
            ln_binom += ((k - i) as f64).ln() - ((i + 1) as f64).ln();
            ln_poch += ((n + i) as f64).ln();
        }
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("x must be finite and non-negative, got {x}")))
    }
}

/// `W_{n,k}^a(x)` through the Poisson-convolution form.
pub fn basis_weight(params: &OperatorParams, k: u64, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(WeightSeries::new(params.n(), params.a(), x)
        .nth(k as usize)
        .unwrap_or(0.0))
}

/// `W_{n,k}^a(x)` straight from the product formula, in log space.
pub fn basis_weight_direct(params: &OperatorParams, k: u64, x: f64) -> Result<f64> {
    check_x(x)?;
    if x == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let n = params.n() as f64;
    let lambda = params.a() * x / (1.0 + x);
    let ln_k_fact: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
    let ln_w = -lambda + ln_p_poly(k, params.n(), params.a()) - ln_k_fact + k as f64 * x.ln()
        - (k as f64 + n) * x.ln_1p();
    Ok(ln_w.exp())
}

/// `Σ_{k=0}^{K} W_{n,k}^a(x)`.
pub fn weight_prefix_mass(params: &OperatorParams, x: f64, last_k: u64) -> Result<f64> {
    check_x(x)?;
    let mut sum = crate::sum::CompensatedSum::default();
    for w in WeightSeries::new(params.n(), params.a(), x).take(last_k as usize + 1) {
        sum.add(w);
    }
    Ok(sum.value().min(1.0))
}

/// `m · 2^e` without intermediate overflow or premature underflow.
fn scale_by_pow2(mut m: f64, mut e: i64) -> f64 {
    if e > 1023 {
        return m * f64::INFINITY;
    }
    while e < -1022 {
        m *= f64::from_bits(1u64 << 52); // 2^-1022
        e += 1022;
        if m == 0.0 {
            return 0.0;
        }
    }
    m * f64::from_bits(((e + 1023) as u64) << 52)
}

/// Classical Baskakov weights `b_{n,i}(x)` as mantissa and binary exponent,
/// advanced by the ratio `(n+i)/(i+1) · x/(1+x)`.
#[derive(Debug, Clone)]
struct ClassicalBasis {
    n: f64,
    u: f64,
    i: u64,
    mantissa: f64,
    exponent: i64,
}

impl ClassicalBasis {
    fn new(n: u64, x: f64) -> Self {
        let ln_b0 = -(n as f64) * x.ln_1p();
        let exponent = (ln_b0 / std::f64::consts::LN_2).floor() as i64;
        let mantissa = (ln_b0 - exponent as f64 * std::f64::consts::LN_2).exp();
        Self {
            n: n as f64,
            u: x / (1.0 + x),
            i: 0,
            mantissa,
            exponent,
        }
    }

    fn current(&self) -> f64 {
        scale_by_pow2(self.mantissa, self.exponent)
    }

    fn advance(&mut self) {
        let i = self.i as f64;
        self.mantissa *= (self.n + i) / (i + 1.0) * self.u;
        self.i += 1;
        if self.mantissa == 0.0 {
            return;
        }
        let shift = self.mantissa.log2().floor() as i64;
        if shift.abs() > 64 {
            self.mantissa = scale_by_pow2(self.mantissa, -shift);
            self.exponent += shift;
        }
    }
}

/// Infinite ascending stream `W_0(x), W_1(x), …`.
///
/// Poisson weights whose contribution to any `W_k` is below `1e-20` relative
/// are dropped: `pois_j · b_{k-j} ≤ e^{-λ} a^j/j! · b_k` and `W_k ≥ e^{-λ} b_k`.
#[derive(Debug, Clone)]
pub struct WeightSeries {
    basis: Option<ClassicalBasis>,
    poisson: Vec<f64>,
    recent: VecDeque<f64>,
    k: u64,
}

impl WeightSeries {
    /// `x` must be finite and non-negative; `x = 0` yields the Kronecker
    /// sequence `1, 0, 0, …`.
    pub fn new(n: u64, a: f64, x: f64) -> Self {
        debug_assert!(x >= 0.0 && x.is_finite());
        if x == 0.0 {
            return Self {
                basis: None,
                poisson: vec![1.0],
                recent: VecDeque::new(),
                k: 0,
            };
        }
        let lambda = a * x / (1.0 + x);
        let poisson = poisson_head(a, lambda);
        Self {
            basis: Some(ClassicalBasis::new(n, x)),
            recent: VecDeque::with_capacity(poisson.len()),
            poisson,
            k: 0,
        }
    }

    /// Index of the next weight to be produced.
    pub fn position(&self) -> u64 {
        self.k
    }
}

fn poisson_head(a: f64, lambda: f64) -> Vec<f64> {
    if lambda == 0.0 {
        return vec![1.0];
    }
    let ln_lambda = lambda.ln();
    let ln_a = a.ln();
    let mut out = Vec::new();
    let mut ln_fact = 0.0_f64;
    let mut j = 0u64;
    loop {
        if j > 0 {
            ln_fact += (j as f64).ln();
        }
        out.push((-lambda + j as f64 * ln_lambda - ln_fact).exp());
        // a^j / j! bounds the relative contribution of lag j
        if j as f64 >= 2.0 * a && j as f64 * ln_a - ln_fact < -46.0 {
            break;
        }
        j += 1;
    }
    out
}

impl Iterator for WeightSeries {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let k = self.k;
        self.k += 1;
        let Some(basis) = self.basis.as_mut() else {
            return Some(if k == 0 { 1.0 } else { 0.0 });
        };
        if self.recent.len() == self.poisson.len() {
            self.recent.pop_back();
        }
        self.recent.push_front(basis.current());
        basis.advance();
        let w = self
            .recent
            .iter()
            .zip(&self.poisson)
            .map(|(b, p)| b * p)
            .sum::<f64>();
        Some(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u64, a: f64) -> OperatorParams {
        OperatorParams::mihesan(n, a).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn params_reject_inadmissible() {
        assert!(OperatorParams::new(0, 1.0, 0.0, 0.0).is_err());
        assert!(OperatorParams::new(3, -1.0, 0.0, 0.0).is_err());
        let err = OperatorParams::new(10, 1.0, 3.0, 2.0).unwrap_err();
        assert_eq!(err.to_string(), "invalid parameter: alpha must not exceed beta");
        assert!(OperatorParams::new(10, 1.0, 2.0, 2.0).is_ok());
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::default().validate().is_ok());
        assert!(TruncationPolicy::new(0.0, 1e-16, 5, 10).is_err());
        assert!(TruncationPolicy::new(1.0, 1e-16, 5, 10).is_err());
        assert!(TruncationPolicy::new(1e-12, 0.0, 5, 10).is_err());
        assert!(TruncationPolicy::new(1e-12, 1e-16, 5, 0).is_err());
    }

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(7, 0), 1.0);
        assert_eq!(pochhammer(3, 2), 12.0);
        assert_eq!(pochhammer(1, 4), 24.0);
        assert!(pochhammer(10, 400).is_infinite());
        assert!((ln_pochhammer(3, 2) - 12f64.ln()).abs() < 1e-15);
        assert!(ln_pochhammer(10, 400).is_finite());
    }

    #[test]
    fn p_poly_values() {
        assert_eq!(p_poly(0, 5, 3.0), 1.0);
        assert_eq!(p_poly(1, 5, 2.0), 7.0);
        assert_eq!(p_poly(2, 2, 1.0), 11.0);
        assert_eq!(p_poly(4, 3, 0.0), pochhammer(3, 4));
        assert!((ln_p_poly(2, 2, 1.0) - 11f64.ln()).abs() < 1e-14);
    }

    /// `p_k(n,a)/k!` is the k-th coefficient of `(1-z)^{-n} e^{az}`.
    #[test]
    fn p_poly_matches_generating_function_coefficients() {
        for &n in &[1u64, 2, 5, 17] {
            for &a in &[0.0, 0.5, 1.0, 3.0] {
                let mut c = vec![1.0_f64];
                let mut d = vec![1.0_f64];
                for i in 0..30u64 {
                    c.push(c[i as usize] * (n + i) as f64 / (i + 1) as f64);
                    d.push(d[i as usize] * a / (i + 1) as f64);
                }
                let mut k_fact = 1.0_f64;
                for k in 0..=30usize {
                    if k > 0 {
                        k_fact *= k as f64;
                    }
                    let coef: f64 = (0..=k).map(|i| c[i] * d[k - i]).sum();
                    let expected = k_fact * coef;
                    let got = p_poly(k as u64, n, a);
                    assert!(rel(got, expected) <= 1e-10, "k={k} n={n} a={a}");
                }
            }
        }
    }

    #[test]
    fn weight_examples() {
        let w = basis_weight(&params(1, 0.0), 0, 1.0).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        let w = basis_weight(&params(2, 1.0), 1, 1.0).unwrap();
        let expected = (-0.5f64).exp() * 3.0 / 8.0;
        assert!(rel(w, expected) < 1e-14);
        assert!((w - 0.227_449).abs() < 1e-6);
        let w = basis_weight_direct(&params(2, 1.0), 1, 1.0).unwrap();
        assert!(rel(w, expected) < 1e-14);
    }

    #[test]
    fn kronecker_at_origin() {
        let p = OperatorParams::new(9, 2.5, 1.0, 2.0).unwrap();
        assert_eq!(basis_weight(&p, 0, 0.0).unwrap(), 1.0);
        for k in 1..6 {
            assert_eq!(basis_weight(&p, k, 0.0).unwrap(), 0.0);
            assert_eq!(basis_weight_direct(&p, k, 0.0).unwrap(), 0.0);
        }
        assert_eq!(weight_prefix_mass(&p, 0.0, 0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_negative_x() {
        let p = params(3, 1.0);
        assert!(basis_weight(&p, 0, -0.1).is_err());
        assert!(basis_weight_direct(&p, 0, f64::NAN).is_err());
        assert!(weight_prefix_mass(&p, -1.0, 3).is_err());
    }

    #[test]
    fn prefix_mass_single_weight() {
        let m = weight_prefix_mass(&params(1, 0.0), 1.0, 0).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn convolution_matches_direct_form() {
        for &n in &[1u64, 2, 5, 10, 50, 200] {
            for &a in &[0.0, 0.5, 1.0, 3.0] {
                for &x in &[0.1, 0.5, 1.0, 2.0, 5.0] {
                    let p = params(n, a);
                    let series: Vec<f64> = WeightSeries::new(n, a, x).take(51).collect();
                    for (k, w) in series.iter().enumerate() {
                        let direct = basis_weight_direct(&p, k as u64, x).unwrap();
                        assert!(direct > 1e-280);
                        assert!(
                            rel(*w, direct) <= 1e-10,
                            "n={n} a={a} x={x} k={k}: {w} vs {direct}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn classical_reduction() {
        for &n in &[1u64, 3, 10, 60] {
            for &x in &[0.25, 1.0, 3.0] {
                let mut binom = 1.0_f64; // C(n+k-1, k)
                for (k, w) in WeightSeries::new(n, 0.0, x).take(40).enumerate() {
                    let k = k as u64;
                    if k > 0 {
                        binom *= (n + k - 1) as f64 / k as f64;
                    }
                    let expected = binom * x.powi(k as i32) / (1.0 + x).powi((n + k) as i32);
                    assert!(rel(w, expected) <= 1e-12, "n={n} x={x} k={k}");
                }
            }
        }
    }

    #[test]
    fn large_index_does_not_underflow_everything() {
        // (1+x)^{-n} alone underflows here.
        let n = 5000;
        let x = 3.0;
        let total: f64 = WeightSeries::new(n, 1.0, x).take(30_000).sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }
}
