//! Sampled moduli of smoothness on a compact window `[0, X]`.
//!
//! Every sampled supremum is taken over pairs or triples of points that are
//! admissible for the definition, so the sampled value never exceeds the
//! true modulus on the window. Each estimate is computed at the window's
//! density and again at twice that density; the larger value is reported.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::FunctionSpec;

/// Uniform sampling of `[0, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    upper: f64,
    grid_points: usize,
}

impl Window {
    pub const MIN_GRID_POINTS: usize = 64;
    pub const DEFAULT_GRID_POINTS: usize = 512;

    pub fn new(upper: f64, grid_points: usize) -> Result<Self> {
        if !(upper > 0.0 && upper.is_finite()) {
            return Err(Error::InvalidInput(format!("window upper must be positive, got {upper}")));
        }
        if grid_points < Self::MIN_GRID_POINTS {
            return Err(Error::InvalidInput(format!(
                "window needs at least {} grid points, got {grid_points}",
                Self::MIN_GRID_POINTS
            )));
        }
        Ok(Self { upper, grid_points })
    }

    pub fn with_upper(upper: f64) -> Result<Self> {
        Self::new(upper, Self::DEFAULT_GRID_POINTS)
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    fn refined(&self) -> Self {
        Self {
            upper: self.upper,
            grid_points: 2 * self.grid_points,
        }
    }

    /// The sample points, both ends included.
    pub fn nodes(&self) -> Vec<f64> {
        let m = (self.grid_points - 1) as f64;
        (0..self.grid_points)
            .map(|i| if i + 1 == self.grid_points { self.upper } else { self.upper * i as f64 / m })
            .collect()
    }
}

/// The exponent λ of the step weight `φ^λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StepWeightExponent(f64);

impl StepWeightExponent {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidInput(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        Ok(Self(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `φ(x)^λ`, with `φ(x)^0 = 1` everywhere.
    pub fn weight(self, x: f64) -> f64 {
        if self.0 == 0.0 {
            1.0
        } else {
            step_weight(x).powf(self.0)
        }
    }
}

/// `φ(x) = √(x(1+x))`.
pub fn step_weight(x: f64) -> f64 {
    (x * (1.0 + x)).sqrt()
}

/// A modulus value with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusEstimate {
    /// The analytic value when known, otherwise `sampled`.
    pub value: f64,
    /// Sampled lower bound at the refined density.
    pub sampled: f64,
    pub analytic: Option<f64>,
    /// Base and refined samplings differ by less than 0.5%.
    pub refined_agreement: bool,
}

impl ModulusEstimate {
    fn from_samples(coarse: f64, fine: f64, analytic: Option<f64>) -> Self {
        let sampled = coarse.max(fine);
        let refined_agreement = (fine - coarse).abs() <= 5e-3 * sampled || sampled == 0.0;
        Self {
            value: analytic.unwrap_or(sampled),
            sampled,
            analytic,
            refined_agreement,
        }
    }
}

const H_STEPS: usize = 64;

/// 64 geometric steps from `δ/1024` to `δ`, ending exactly at `δ`.
pub fn h_ladder(delta: f64) -> Vec<f64> {
    (0..H_STEPS)
        .map(|j| {
            if j + 1 == H_STEPS {
                delta
            } else {
                delta * 1024f64.powf(j as f64 / (H_STEPS - 1) as f64 - 1.0)
            }
        })
        .collect()
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("delta must be positive, got {delta}")))
    }
}

fn sampled_oscillation<G: Fn(f64) -> f64 + Sync>(g: &G, delta: f64, window: &Window) -> f64 {
    let hs = h_ladder(delta);
    let upper = window.upper();
    let interior = window
        .nodes()
        .par_iter()
        .map(|&t| {
            let gt = g(t);
            hs.iter()
                .map(|&h| (g((t + h).min(upper)) - gt).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let edge = hs
        .iter()
        .map(|&h| (g(upper) - g((upper - h).max(0.0))).abs())
        .fold(0.0, f64::max);
    interior.max(edge)
}

/// `ω(f; δ) = sup{|f(t) - f(s)| : |t - s| ≤ δ}` on the window.
pub fn modulus_continuity(f: &FunctionSpec, delta: f64, window: &Window) -> Result<ModulusEstimate> {
    check_delta(delta)?;
    let g = |t: f64| f.eval(t);
    Ok(ModulusEstimate::from_samples(
        sampled_oscillation(&g, delta, window),
        sampled_oscillation(&g, delta, &window.refined()),
        f.analytic_modulus(delta, window.upper()),
    ))
}

/// `ω₁(f; δ) = ω(f'; δ)` on the window.
pub fn modulus_derivative(f: &FunctionSpec, delta: f64, window: &Window) -> Result<ModulusEstimate> {
    check_delta(delta)?;
    if !f.has_d1() {
        return Err(Error::MissingDerivative {
            function: f.label(),
            order: 1,
        });
    }
    let g = |t: f64| f.d1(t).expect("checked above");
    Ok(ModulusEstimate::from_samples(
        sampled_oscillation(&g, delta, window),
        sampled_oscillation(&g, delta, &window.refined()),
        f.analytic_derivative_modulus(delta, window.upper()),
    ))
}

/// Largest `x ≤ upper` with `x + h·φ^λ(x) ≤ upper`, by bisection.
fn right_anchor(h: f64, lambda: StepWeightExponent, upper: f64) -> f64 {
    let reach = |x: f64| x + h * lambda.weight(x);
    let (mut lo, mut hi) = (0.0, upper);
    if reach(lo) > upper {
        return f64::NAN;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reach(mid) <= upper {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * upper {
            break;
        }
    }
    lo
}

fn sampled_dt(f: &FunctionSpec, delta: f64, lambda: StepWeightExponent, window: &Window) -> f64 {
    let hs = h_ladder(delta);
    let upper = window.upper();
    let second_difference = |x: f64, h: f64| -> f64 {
        let step = h * lambda.weight(x);
        if x - step < 0.0 || x + step > upper {
            return 0.0;
        }
        (f.eval(x - step) - 2.0 * f.eval(x) + f.eval(x + step)).abs()
    };
    let interior = window
        .nodes()
        .par_iter()
        .map(|&x| {
            // the largest admissible step at x, so that boundary points are not
            // lost when δ grows past their reach
            let w = lambda.weight(x);
            let h_edge = if w > 0.0 { (x.min(upper - x) / w).min(delta) } else { delta };
            hs.iter()
                .chain(std::iter::once(&h_edge))
                .map(|&h| second_difference(x, h))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let edge = hs
        .iter()
        .map(|&h| {
            let x = right_anchor(h, lambda, upper);
            if x.is_nan() {
                0.0
            } else {
                second_difference(x, h)
            }
        })
        .fold(0.0, f64::max);
    interior.max(edge)
}

/// `ω²_{φ^λ}(f; δ) = sup_{0<h≤δ} sup_x |f(x - hφ^λ(x)) - 2f(x) + f(x + hφ^λ(x))|`
/// over `x` with both step ends inside the window.
pub fn ditzian_totik_modulus(
    f: &FunctionSpec,
    delta: f64,
    lambda: StepWeightExponent,
    window: &Window,
) -> Result<ModulusEstimate> {
    check_delta(delta)?;
    Ok(ModulusEstimate::from_samples(
        sampled_dt(f, delta, lambda, window),
        sampled_dt(f, delta, lambda, &window.refined()),
        None,
    ))
}

/// One candidate `g` in the K-functional bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KCandidate {
    /// `"self"` or `"steklov:<radius>"`.
    pub label: String,
    pub distance: f64,
    pub smoothness: f64,
    /// `distance + δ²·smoothness`
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KFunctionalBound {
    pub value: f64,
    pub best_candidate: String,
    pub candidates: Vec<KCandidate>,
}

// Composite Simpson panels per half of the Steklov kernel.
const SIMPSON_PANELS: usize = 16;

fn simpson<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64) -> f64 {
    let m = 2 * SIMPSON_PANELS;
    let step = (hi - lo) / m as f64;
    let mut acc = g(lo) + g(hi);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(lo + i as f64 * step);
    }
    acc * step / 3.0
}

/// `S_h f(x) = h⁻² ∫_0^{2h} f(x+v)(h - |v-h|) dv`, the mean of `f(x+U₁+U₂)`
/// for independent `U_i ~ U[0,h]`.
fn steklov(f: &FunctionSpec, h: f64, x: f64) -> f64 {
    let rising = simpson(|v| f.eval(x + v) * v, 0.0, h);
    let falling = simpson(|v| f.eval(x + v) * (2.0 * h - v), h, 2.0 * h);
    (rising + falling) / (h * h)
}

fn forward_second_difference(f: &FunctionSpec, h: f64, x: f64) -> f64 {
    f.eval(x + 2.0 * h) - 2.0 * f.eval(x + h) + f.eval(x)
}

// Cap on the node count used to resolve features of width `r`.
const MAX_CANDIDATE_NODES: usize = 1 << 17;

fn steklov_candidate(f: &FunctionSpec, r: f64, lambda: StepWeightExponent, window: &Window) -> (f64, f64) {
    let half = 0.5 * r;
    // the mean differs from f only near kinks of width ~r; sample finer than that
    let needed = (8.0 * window.upper() / r).ceil() as usize + 1;
    let points = needed.clamp(window.grid_points(), MAX_CANDIDATE_NODES);
    let dense = Window::new(window.upper(), points).expect("valid window");
    dense
        .nodes()
        .par_iter()
        .map(|&x| {
            let g = 2.0 * steklov(f, half, x) - steklov(f, r, x);
            let g2 = 2.0 * forward_second_difference(f, half, x) / (half * half)
                - forward_second_difference(f, r, x) / (r * r);
            let w = lambda.weight(x);
            ((f.eval(x) - g).abs(), w * w * g2.abs())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

/// Upper bound of `K(f, δ²) = inf_g ‖f - g‖ + δ²‖φ^{2λ} g''‖` over the
/// function itself (when twice differentiable) and second-order Steklov
/// means `2S_{r/2}f - S_r f` at `r ∈ {δ, δ/2, δ/4}`.
pub fn kfunctional_upper(
    f: &FunctionSpec,
    delta2: f64,
    lambda: StepWeightExponent,
    window: &Window,
) -> Result<KFunctionalBound> {
    check_delta(delta2)?;
    let d = delta2.sqrt();
    kfunctional_upper_with(f, delta2, lambda, window, &[d, 0.5 * d, 0.25 * d], true)
}

/// [`kfunctional_upper`] with an explicit candidate family.
pub fn kfunctional_upper_with(
    f: &FunctionSpec,
    delta2: f64,
    lambda: StepWeightExponent,
    window: &Window,
    radii: &[f64],
    include_self: bool,
) -> Result<KFunctionalBound> {
    check_delta(delta2)?;
    let mut candidates = Vec::new();
    if include_self && f.has_d2() {
        let smoothness = window
            .nodes()
            .iter()
            .map(|&x| {
                let w = lambda.weight(x);
                w * w * f.d2(x).expect("checked").abs()
            })
            .fold(0.0, f64::max);
        candidates.push(KCandidate {
            label: "self".into(),
            distance: 0.0,
            smoothness,
            total: delta2 * smoothness,
        });
    }
    for &r in radii {
        check_delta(r)?;
        let (distance, smoothness) = steklov_candidate(f, r, lambda, window);
        candidates.push(KCandidate {
            label: format!("steklov:{r}"),
            distance,
            smoothness,
            total: distance + delta2 * smoothness,
        });
    }
    let best = candidates
        .iter()
        .min_by(|a, b| a.total.total_cmp(&b.total))
        .ok_or(Error::EmptyCandidateFamily)?;
    Ok(KFunctionalBound {
        value: best.total,
        best_candidate: best.label.clone(),
        candidates: candidates.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(upper: f64) -> Window {
        Window::with_upper(upper).unwrap()
    }

    fn lam(l: f64) -> StepWeightExponent {
        StepWeightExponent::new(l).unwrap()
    }

    #[test]
    fn window_and_lambda_validation() {
        assert!(Window::new(0.0, 100).is_err());
        assert!(Window::new(1.0, 63).is_err());
        assert!(Window::new(1.0, 64).is_ok());
        assert!(StepWeightExponent::new(1.5).is_err());
        assert!(StepWeightExponent::new(-0.1).is_err());
        let nodes = window(3.0).nodes();
        assert_eq!(nodes.len(), 512);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(*nodes.last().unwrap(), 3.0);
    }

    #[test]
    fn ladder_shape() {
        let hs = h_ladder(0.5);
        assert_eq!(hs.len(), 64);
        assert_eq!(hs[63], 0.5);
        assert!((hs[0] - 0.5 / 1024.0).abs() < 1e-18);
        assert!(hs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn step_weight_examples() {
        assert_eq!(step_weight(0.0), 0.0);
        assert!((step_weight(1.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((step_weight(3.0) - 12f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn continuity_examples() {
        let c = modulus_continuity(&FunctionSpec::constant(4.0), 0.3, &window(5.0)).unwrap();
        assert_eq!(c.value, 0.0);
        let t = modulus_continuity(&FunctionSpec::monomial(1), 0.25, &window(10.0)).unwrap();
        assert!((t.value - 0.25).abs() < 1e-15);
        assert!((t.sampled - 0.25).abs() < 1e-12);
        let sq = modulus_continuity(&FunctionSpec::monomial(2), 0.5, &window(3.0)).unwrap();
        assert!(sq.analytic.is_none());
        assert!((sq.value - 2.75).abs() < 1e-12);
        assert!(sq.refined_agreement);
        assert!(modulus_continuity(&FunctionSpec::monomial(1), 0.0, &window(1.0)).is_err());
    }

    #[test]
    fn sampled_matches_analytic_from_below() {
        let w = window(6.0);
        for f in [
            FunctionSpec::exp_decay(1.0).unwrap(),
            FunctionSpec::abs_shift(1.0).unwrap(),
            FunctionSpec::sqrt1p(),
        ] {
            for delta in [0.05, 0.3, 1.0] {
                let m = modulus_continuity(&f, delta, &w).unwrap();
                let exact = m.analytic.unwrap();
                assert!(m.sampled <= exact + 1e-14, "{f:?} {delta}");
                assert!(m.sampled >= exact * (1.0 - 1e-3), "{f:?} {delta}");
            }
        }
    }

    #[test]
    fn derivative_examples() {
        let lin = FunctionSpec::polynomial(vec![1.0, -3.0]).unwrap();
        assert_eq!(modulus_derivative(&lin, 0.4, &window(2.0)).unwrap().value, 0.0);
        let sq = modulus_derivative(&FunctionSpec::monomial(2), 0.1, &window(4.0)).unwrap();
        assert!((sq.value - 0.2).abs() < 1e-15);
        assert!((sq.sampled - 0.2).abs() < 1e-12);
        let e = modulus_derivative(&FunctionSpec::exp_decay(1.0).unwrap(), 0.1, &window(10.0)).unwrap();
        assert!((e.value - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
        assert!((e.value - 0.0951626).abs() < 1e-7);
        assert!((e.sampled - e.value).abs() < 1e-12);
        let abs = FunctionSpec::abs_shift(1.0).unwrap();
        assert!(matches!(
            modulus_derivative(&abs, 0.1, &window(2.0)),
            Err(Error::MissingDerivative { order: 1, .. })
        ));
    }

    #[test]
    fn dt_examples() {
        let lin = FunctionSpec::polynomial(vec![2.0, 5.0]).unwrap();
        for l in [0.0, 0.5, 1.0] {
            let m = ditzian_totik_modulus(&lin, 0.2, lam(l), &window(3.0)).unwrap();
            assert!(m.value < 1e-13);
        }
        let sq = FunctionSpec::monomial(2);
        for delta in [0.05, 0.1, 0.3] {
            let m = ditzian_totik_modulus(&sq, delta, lam(0.0), &window(3.0)).unwrap();
            assert!((m.value - 2.0 * delta * delta).abs() <= 1e-12);
        }
    }

    // Independent oracle: scan x on a fine grid for the largest admissible
    // point, then Δ² of t² is 2(hφ(x))² at h = δ.
    #[test]
    fn dt_fully_weighted_square() {
        let (delta, upper) = (0.1, 3.0);
        let mut x_star = 0.0;
        let steps = 3_000_000;
        for i in 0..=steps {
            let x = upper * i as f64 / steps as f64;
            if x + delta * (x * (1.0 + x)).sqrt() <= upper {
                x_star = x;
            }
        }
        let oracle = 2.0 * delta * delta * x_star * (1.0 + x_star);
        let m = ditzian_totik_modulus(&FunctionSpec::monomial(2), delta, lam(1.0), &window(upper)).unwrap();
        assert!((m.value - oracle).abs() <= 1e-5 * oracle, "{} vs {oracle}", m.value);
    }

    #[test]
    fn endpoints_by_definition() {
        // λ = 0: unweighted second difference; λ = 1: step hφ(x).
        let f = FunctionSpec::monomial(2);
        let w = window(2.0);
        let m0 = ditzian_totik_modulus(&f, 0.2, lam(0.0), &w).unwrap();
        assert!((m0.value - 0.08).abs() < 1e-12);
        let m1 = ditzian_totik_modulus(&f, 0.2, lam(1.0), &w).unwrap();
        let x = right_anchor(0.2, lam(1.0), 2.0);
        assert!((m1.value - 2.0 * 0.04 * x * (1.0 + x)).abs() < 1e-10);
    }

    #[test]
    fn kfunctional_examples() {
        let lin = FunctionSpec::polynomial(vec![1.0, 2.0]).unwrap();
        let k = kfunctional_upper(&lin, 0.01, lam(0.0), &window(3.0)).unwrap();
        assert!(k.value < 1e-12);
        let sq = kfunctional_upper(&FunctionSpec::monomial(2), 0.01, lam(0.0), &window(3.0)).unwrap();
        assert!(sq.value <= 0.02 + 1e-15);
        let abs = FunctionSpec::abs_shift(1.0).unwrap();
        let k = kfunctional_upper(&abs, 0.01, lam(0.0), &window(3.0)).unwrap();
        assert!(k.value.is_finite() && k.value > 0.0);
        assert!(k.best_candidate.starts_with("steklov"));
        assert_eq!(k.candidates.len(), 3);
    }

    #[test]
    fn empty_family_is_rejected() {
        let abs = FunctionSpec::abs_shift(1.0).unwrap();
        assert!(matches!(
            kfunctional_upper_with(&abs, 0.01, lam(0.0), &window(3.0), &[], true),
            Err(Error::EmptyCandidateFamily)
        ));
        assert!(kfunctional_upper_with(&FunctionSpec::monomial(2), 0.01, lam(0.0), &window(3.0), &[], true).is_ok());
    }

    #[test]
    fn steklov_reproduces_linear() {
        let lin = FunctionSpec::polynomial(vec![1.0, 3.0]).unwrap();
        // mean of x + U₁ + U₂ is x + h
        assert!((steklov(&lin, 0.5, 2.0) - (1.0 + 3.0 * 2.5)).abs() < 1e-13);
    }
}
