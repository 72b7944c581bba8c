//! Series evaluation of `B_n^a(f; x)` and `L_{n,a}^{α,β}(f; x)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{OperatorParams, TruncationPolicy, WeightSeries};
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// The closed set of test functions on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionKind {
    /// `Σ c_i t^i`, coefficients in ascending order.
    Polynomial { coefficients: Vec<f64> },
    /// `e^{-rate·t}`
    ExpDecay { rate: f64 },
    /// `|t - center|`
    AbsShift { center: f64 },
    /// `√(1+t)`
    Sqrt1p,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    Bounded,
    Polynomial(u32),
    /// Faster than any polynomial; the operator series is not evaluated for
    /// such functions.
    Exponential,
}

impl GrowthClass {
    fn dominates(self, other: GrowthClass) -> bool {
        use GrowthClass::*;
        match (self, other) {
            (Exponential, _) => true,
            (_, Exponential) => false,
            (Polynomial(_), Bounded) => true,
            (Polynomial(d), Polynomial(e)) => d >= e,
            (Bounded, Bounded) => true,
            (Bounded, Polynomial(e)) => e == 0,
        }
    }
}

/// A test function together with its declared growth class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionSpec {
    kind: FunctionKind,
    growth: GrowthClass,
}

fn horner(coefficients: &[f64], t: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn derivative_coefficients(coefficients: &[f64]) -> Vec<f64> {
    coefficients
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| i as f64 * c)
        .collect()
}

impl FunctionSpec {
    pub fn new(kind: FunctionKind) -> Result<Self> {
        match &kind {
            FunctionKind::Polynomial { coefficients } => {
                if coefficients.is_empty() {
                    return Err(Error::InvalidInput("polynomial needs at least one coefficient".into()));
                }
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidInput("polynomial coefficients must be finite".into()));
                }
            }
            FunctionKind::ExpDecay { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::InvalidInput("exp_decay rate must be positive".into()));
                }
            }
            FunctionKind::AbsShift { center } => {
                if !(center.is_finite() && *center >= 0.0) {
                    return Err(Error::InvalidInput("abs_shift center must be non-negative".into()));
                }
            }
            FunctionKind::Sqrt1p => {}
        }
        let growth = Self::natural_growth(&kind);
        Ok(Self { kind, growth })
    }

    /// Declares a growth class explicitly. It must dominate the function's
    /// actual growth.
    pub fn with_growth(kind: FunctionKind, growth: GrowthClass) -> Result<Self> {
        let mut spec = Self::new(kind)?;
        if !growth.dominates(spec.growth) {
            return Err(Error::InvalidInput(format!(
                "declared growth {growth:?} is below the actual growth {:?}",
                spec.growth
            )));
        }
        spec.growth = growth;
        Ok(spec)
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(FunctionKind::Polynomial { coefficients })
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(vec![c]).expect("finite constant")
    }

    /// `t^j`
    pub fn monomial(j: usize) -> Self {
        let mut coefficients = vec![0.0; j + 1];
        coefficients[j] = 1.0;
        Self::polynomial(coefficients).expect("monomial")
    }

    pub fn exp_decay(rate: f64) -> Result<Self> {
        Self::new(FunctionKind::ExpDecay { rate })
    }

    pub fn abs_shift(center: f64) -> Result<Self> {
        Self::new(FunctionKind::AbsShift { center })
    }

    pub fn sqrt1p() -> Self {
        Self::new(FunctionKind::Sqrt1p).expect("sqrt1p")
    }

    fn natural_growth(kind: &FunctionKind) -> GrowthClass {
        match kind {
            FunctionKind::Polynomial { coefficients } if coefficients.len() <= 1 => {
                GrowthClass::Polynomial(0)
            }
            FunctionKind::Polynomial { coefficients } => {
                GrowthClass::Polynomial(coefficients.len() as u32 - 1)
            }
            FunctionKind::ExpDecay { .. } => GrowthClass::Bounded,
            FunctionKind::AbsShift { .. } | FunctionKind::Sqrt1p => GrowthClass::Polynomial(1),
        }
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn growth(&self) -> GrowthClass {
        self.growth
    }

    /// Short human-readable name, matching the CLI function syntax.
    pub fn label(&self) -> String {
        match &self.kind {
            FunctionKind::Polynomial { coefficients } => {
                let cs: Vec<String> = coefficients.iter().map(|c| c.to_string()).collect();
                format!("poly:{}", cs.join(","))
            }
            FunctionKind::ExpDecay { rate } => format!("expneg:{rate}"),
            FunctionKind::AbsShift { center } => format!("abs:{center}"),
            FunctionKind::Sqrt1p => "sqrt1p".into(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            FunctionKind::Polynomial { coefficients } => horner(coefficients, t),
            FunctionKind::ExpDecay { rate } => (-rate * t).exp(),
            FunctionKind::AbsShift { center } => (t - center).abs(),
            FunctionKind::Sqrt1p => (1.0 + t).sqrt(),
        }
    }

    /// `f'(t)`, when the function is continuously differentiable.
    pub fn d1(&self, t: f64) -> Option<f64> {
        match &self.kind {
            FunctionKind::Polynomial { coefficients } => {
                Some(horner(&derivative_coefficients(coefficients), t))
            }
            FunctionKind::ExpDecay { rate } => Some(-rate * (-rate * t).exp()),
            FunctionKind::AbsShift { .. } => None,
            FunctionKind::Sqrt1p => Some(0.5 / (1.0 + t).sqrt()),
        }
    }

    /// `f''(t)`, when the function is twice continuously differentiable.
    pub fn d2(&self, t: f64) -> Option<f64> {
        match &self.kind {
            FunctionKind::Polynomial { coefficients } => Some(horner(
                &derivative_coefficients(&derivative_coefficients(coefficients)),
                t,
            )),
            FunctionKind::ExpDecay { rate } => Some(rate * rate * (-rate * t).exp()),
            FunctionKind::AbsShift { .. } => None,
            FunctionKind::Sqrt1p => Some(-0.25 / (1.0 + t).powf(1.5)),
        }
    }

    pub fn has_d1(&self) -> bool {
        self.d1(0.0).is_some()
    }

    pub fn has_d2(&self) -> bool {
        self.d2(0.0).is_some()
    }

    /// Closed-form `ω(f; δ)` on `[0, upper]`, where known.
    ///
    /// Available for affine polynomials and for the monotone or piecewise
    /// monotone kinds, whose modulus is attained at an end of the window or of
    /// a monotone piece.
    pub fn analytic_modulus(&self, delta: f64, upper: f64) -> Option<f64> {
        let d = delta.min(upper);
        match &self.kind {
            FunctionKind::Polynomial { coefficients } => match coefficients.len() {
                1 => Some(0.0),
                2 => Some(coefficients[1].abs() * d),
                _ => None,
            },
            FunctionKind::ExpDecay { rate } => Some(-(-rate * d).exp_m1()),
            FunctionKind::AbsShift { center } => {
                let longest_piece = if *center >= upper {
                    upper
                } else {
                    center.max(upper - center)
                };
                Some(delta.min(longest_piece))
            }
            FunctionKind::Sqrt1p => Some((1.0 + d).sqrt() - 1.0),
        }
    }

    /// Closed-form `ω(f'; δ)` on `[0, upper]`, where known.
    pub fn analytic_derivative_modulus(&self, delta: f64, upper: f64) -> Option<f64> {
        let d = delta.min(upper);
        match &self.kind {
            FunctionKind::Polynomial { coefficients } => match coefficients.len() {
                1 | 2 => Some(0.0),
                3 => Some(2.0 * coefficients[2].abs() * d),
                _ => None,
            },
            // f' = -r e^{-rt}, increasing and concave
            FunctionKind::ExpDecay { rate } => Some(-rate * (-rate * d).exp_m1()),
            FunctionKind::AbsShift { .. } => None,
            // f' = 1/(2√(1+t)), decreasing and convex
            FunctionKind::Sqrt1p => Some(0.5 - 0.5 / (1.0 + d).sqrt()),
        }
    }

    /// Compares the analytic derivatives against centered finite differences
    /// at the given points and returns the largest discrepancy seen, scaled
    /// by `h^2`.
    pub fn derivative_fd_defect(&self, points: &[f64], h: f64) -> Option<f64> {
        let mut worst = 0.0_f64;
        for &t in points {
            let t = t.max(h);
            let fd1 = (self.eval(t + h) - self.eval(t - h)) / (2.0 * h);
            let fd2 = (self.eval(t + h) - 2.0 * self.eval(t) + self.eval(t - h)) / (h * h);
            worst = worst.max((self.d1(t)? - fd1).abs() / (h * h));
            worst = worst.max((self.d2(t)? - fd2).abs() / (h * h));
        }
        Some(worst)
    }
}

/// Outcome of one truncated series evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalResult {
    pub value: f64,
    pub terms_used: u64,
    pub mass_covered: f64,
    /// `k_max` was reached before the policy was satisfied.
    pub truncation_flag: bool,
}

/// Several sums over the same weights, evaluated in one ascending pass.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SeriesOutcome<const M: usize> {
    pub values: [f64; M],
    /// `Σ W_k |g(node_k)|` per component, the scale of float noise in `values`.
    pub magnitudes: [f64; M],
    pub terms_used: u64,
    pub mass_covered: f64,
    pub truncation_flag: bool,
}

impl<const M: usize> SeriesOutcome<M> {
    fn component(&self, i: usize) -> EvalResult {
        EvalResult {
            value: self.values[i],
            terms_used: self.terms_used,
            mass_covered: self.mass_covered,
            truncation_flag: self.truncation_flag,
        }
    }

    fn check(self, policy: &TruncationPolicy) -> Result<Self> {
        if self.truncation_flag && 1.0 - self.mass_covered > policy.mass_epsilon {
            return Err(Error::NonConvergence {
                terms_used: self.terms_used,
                mass_covered: self.mass_covered,
            });
        }
        Ok(self)
    }
}

/// Core summation loop shared by every operator evaluation.
///
/// The mass condition accepts either a computed prefix mass of at least
/// `1 - mass_epsilon` or a certified tail below `mass_epsilon`. The weights
/// are log-concave in `k` (convolution of two log-concave sequences), so once
/// `r = W_k / W_{k-1} < 1` the remaining mass is at most `W_k r / (1 - r)`.
pub(crate) fn sum_series<const M: usize, G>(
    params: &OperatorParams,
    x: f64,
    policy: &TruncationPolicy,
    g: G,
) -> Result<SeriesOutcome<M>>
where
    G: Fn(f64) -> [f64; M],
{
    policy.validate()?;
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::InvalidInput(format!("x must be finite and non-negative, got {x}")));
    }
    if x == 0.0 {
        let values = g(params.node(0));
        return Ok(SeriesOutcome {
            values,
            magnitudes: values.map(f64::abs),
            terms_used: 1,
            mass_covered: 1.0,
            truncation_flag: false,
        });
    }

    let mut acc = [CompensatedSum::default(); M];
    let mut mag = [CompensatedSum::default(); M];
    let mut mass = CompensatedSum::default();
    let mut small_run = 0u32;
    let mut prev_w = 0.0_f64;
    let mut terms_used = 0u64;
    let mut satisfied = false;

    for (k, w) in WeightSeries::new(params.n(), params.a(), x).enumerate() {
        let k = k as u64;
        terms_used = k + 1;
        let fx = g(params.node(k));
        let mut all_small = true;
        for i in 0..M {
            let term = w * fx[i];
            acc[i].add(term);
            mag[i].add(term.abs());
            if term.abs() >= policy.term_epsilon * (1.0 + acc[i].value().abs()) {
                all_small = false;
            }
        }
        mass.add(w);
        small_run = if all_small { small_run + 1 } else { 0 };

        let mut mass_ok = mass.value() >= 1.0 - policy.mass_epsilon;
        if !mass_ok && prev_w > 0.0 {
            let r = w / prev_w;
            if r < 1.0 && w * r / (1.0 - r) <= policy.mass_epsilon {
                mass_ok = true;
            }
        }
        prev_w = w;

        if mass_ok && small_run >= policy.consecutive_small {
            satisfied = true;
            break;
        }
        if terms_used >= policy.k_max {
            break;
        }
    }

    let outcome = SeriesOutcome {
        values: acc.map(|s| s.value()),
        magnitudes: mag.map(|s| s.value()),
        terms_used,
        mass_covered: mass.value().min(1.0),
        truncation_flag: !satisfied,
    };
    outcome.check(policy)
}

fn evaluable(f: &FunctionSpec) -> Result<()> {
    if f.growth() == GrowthClass::Exponential {
        return Err(Error::UnboundedGrowth(f.label()));
    }
    Ok(())
}

/// `B_n^a(f; x) = Σ W_{n,k}^a(x) f(k/n)`.
pub fn apply_mihesan(
    n: u64,
    a: f64,
    f: &FunctionSpec,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<EvalResult> {
    apply(&OperatorParams::mihesan(n, a)?, f, x, policy)
}

/// `L_{n,a}^{α,β}(f; x) = Σ W_{n,k}^a(x) f((k+α)/(n+β))`.
pub fn apply(
    params: &OperatorParams,
    f: &FunctionSpec,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<EvalResult> {
    evaluable(f)?;
    Ok(sum_series(params, x, policy, |t| [f.eval(t)])?.component(0))
}

/// `L(f - f(x); x)`, the approximation error summed term by term.
///
/// Equal to `L(f;x) - f(x)` up to the truncated mass, but without the
/// cancellation against `f(x)` and insensitive to a common scale error in the
/// weights.
pub fn apply_deviation(
    params: &OperatorParams,
    f: &FunctionSpec,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<EvalResult> {
    evaluable(f)?;
    let fx = f.eval(x);
    Ok(sum_series(params, x, policy, |t| [f.eval(t) - fx])?.component(0))
}

/// `L(f; x)` and `L(f - f(x); x)` from a single pass.
pub fn apply_with_deviation(
    params: &OperatorParams,
    f: &FunctionSpec,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<(EvalResult, EvalResult)> {
    evaluable(f)?;
    let fx = f.eval(x);
    let out = sum_series(params, x, policy, |t| {
        let v = f.eval(t);
        [v, v - fx]
    })?;
    Ok((out.component(0), out.component(1)))
}

/// [`apply`] at every point of `xs`, in order. A failing point does not stop
/// the others.
pub fn apply_grid(
    params: &OperatorParams,
    f: &FunctionSpec,
    xs: &[f64],
    policy: &TruncationPolicy,
) -> Result<Vec<Result<EvalResult>>> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("evaluation grid is empty".into()));
    }
    Ok(xs.par_iter().map(|&x| apply(params, f, x, policy)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stancu() -> OperatorParams {
        OperatorParams::new(10, 1.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn reproduces_constants() {
        let policy = TruncationPolicy::default();
        for x in [0.0, 0.3, 1.0, 4.0] {
            let r = apply_mihesan(7, 2.0, &FunctionSpec::constant(1.0), x, &policy).unwrap();
            assert!((r.value - 1.0).abs() <= 1e-12, "x={x}: {}", r.value);
            let r = apply(&stancu(), &FunctionSpec::constant(1.0), x, &policy).unwrap();
            assert!((r.value - 1.0).abs() <= 1e-12);
            assert!(!r.truncation_flag);
        }
    }

    #[test]
    fn mihesan_first_moment() {
        let policy = TruncationPolicy::default();
        let t = FunctionSpec::monomial(1);
        for n in [1, 4, 30] {
            let r = apply_mihesan(n, 0.0, &t, 1.0, &policy).unwrap();
            assert!((r.value - 1.0).abs() <= 1e-10);
        }
        let r = apply_mihesan(2, 1.0, &t, 1.0, &policy).unwrap();
        assert!((r.value - 1.25).abs() <= 1e-10);
    }

    #[test]
    fn stancu_moments_at_reference_point() {
        let policy = TruncationPolicy::default();
        let r = apply(&stancu(), &FunctionSpec::monomial(1), 1.0, &policy).unwrap();
        assert!((r.value - 23.0 / 24.0).abs() <= 1e-10);
        let r = apply(&stancu(), &FunctionSpec::monomial(2), 1.0, &policy).unwrap();
        assert!((r.value - 152.75 / 144.0).abs() <= 1e-10);
    }

    #[test]
    fn origin_is_a_single_node() {
        let policy = TruncationPolicy::default();
        for (n, a) in [(3u64, 0.0), (10, 1.0), (50, 3.0)] {
            let p = OperatorParams::new(n, a, 1.0, 2.0).unwrap();
            let r = apply(&p, &FunctionSpec::monomial(1), 0.0, &policy).unwrap();
            assert_eq!(r.value, 1.0 / (n as f64 + 2.0));
            assert_eq!(r.terms_used, 1);
        }
    }

    #[test]
    fn grid_preserves_order_and_is_deterministic() {
        let policy = TruncationPolicy::default();
        let one = FunctionSpec::constant(1.0);
        let out = apply_grid(&stancu(), &one, &[0.0, 1.0, 2.0], &policy).unwrap();
        for r in &out {
            assert!((r.as_ref().unwrap().value - 1.0).abs() <= 1e-12);
        }
        let t2 = FunctionSpec::monomial(2);
        let out = apply_grid(&stancu(), &t2, &[1.0, 1.0], &policy).unwrap();
        assert_eq!(
            out[0].as_ref().unwrap().value.to_bits(),
            out[1].as_ref().unwrap().value.to_bits()
        );
        assert!(apply_grid(&stancu(), &t2, &[], &policy).is_err());
    }

    #[test]
    fn grid_reports_bad_points_in_place() {
        let policy = TruncationPolicy::default();
        let out = apply_grid(&stancu(), &FunctionSpec::sqrt1p(), &[1.0, -1.0, 2.0], &policy).unwrap();
        assert!(out[0].is_ok());
        assert!(out[1].is_err());
        assert!(out[2].is_ok());
    }

    #[test]
    fn stancu_reduction_is_bit_exact() {
        let policy = TruncationPolicy::default();
        let p = OperatorParams::mihesan(12, 1.5).unwrap();
        let f = FunctionSpec::exp_decay(0.7).unwrap();
        for x in [0.2, 1.0, 3.0] {
            let l = apply(&p, &f, x, &policy).unwrap();
            let b = apply_mihesan(12, 1.5, &f, x, &policy).unwrap();
            assert!((l.value - b.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn k_max_hit_signals_non_convergence() {
        let policy = TruncationPolicy::new(1e-14, 1e-16, 5, 10).unwrap();
        let err = apply(&stancu(), &FunctionSpec::constant(1.0), 3.0, &policy).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { terms_used: 10, .. }));
    }

    #[test]
    fn refuses_exponential_growth() {
        let f = FunctionSpec::with_growth(FunctionKind::Sqrt1p, GrowthClass::Exponential).unwrap();
        let err = apply(&stancu(), &f, 1.0, &TruncationPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::UnboundedGrowth(_)));
    }

    #[test]
    fn declared_growth_must_dominate() {
        let cubic = FunctionKind::Polynomial { coefficients: vec![0.0, 0.0, 0.0, 1.0] };
        assert!(FunctionSpec::with_growth(cubic.clone(), GrowthClass::Polynomial(2)).is_err());
        assert!(FunctionSpec::with_growth(cubic, GrowthClass::Polynomial(3)).is_ok());
        assert!(FunctionSpec::with_growth(FunctionKind::Sqrt1p, GrowthClass::Bounded).is_err());
        assert_eq!(FunctionSpec::monomial(4).growth(), GrowthClass::Polynomial(4));
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let grid = [0.1, 0.5, 1.0, 2.0, 5.0];
        for f in [
            FunctionSpec::polynomial(vec![1.0, -2.0, 0.5, 0.25]).unwrap(),
            FunctionSpec::exp_decay(1.3).unwrap(),
            FunctionSpec::sqrt1p(),
        ] {
            let defect = f.derivative_fd_defect(&grid, 1e-3).unwrap();
            assert!(defect < 10.0, "{}: {defect}", f.label());
        }
        assert!(FunctionSpec::abs_shift(1.0).unwrap().derivative_fd_defect(&grid, 1e-3).is_none());
    }

    #[test]
    fn deviation_matches_difference() {
        let policy = TruncationPolicy::default();
        let f = FunctionSpec::sqrt1p();
        let (v, d) = apply_with_deviation(&stancu(), &f, 1.5, &policy).unwrap();
        assert!((v.value - f.eval(1.5) - d.value).abs() < 1e-14);
        let d2 = apply_deviation(&stancu(), &f, 1.5, &policy).unwrap();
        assert_eq!(d.value, d2.value);
    }
}
