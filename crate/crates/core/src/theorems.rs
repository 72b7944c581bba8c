//! Numerical checks of the error bounds and of the Voronovskaya limit.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{OperatorParams, TruncationPolicy};
use crate::error::{Error, Result};
use crate::extrapolate::{doubling_ladder, richardson_ladder};
use crate::moments::{central_moment_closed, CentralMomentId};
use crate::operator::{apply_deviation, FunctionSpec};
use crate::smoothness::{
    ditzian_totik_modulus, modulus_continuity, modulus_derivative, step_weight, ModulusEstimate,
    StepWeightExponent, Window,
};

/// Measured error against a bound at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem_id: String,
    pub params: OperatorParams,
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    /// The bound rests on a sampled modulus, which only bounds the true
    /// modulus from below.
    pub advisory: bool,
    pub metadata: BTreeMap<String, f64>,
}

impl BoundReport {
    fn new(theorem_id: &str, params: OperatorParams, x: f64, lhs: f64, rhs: f64, advisory: bool) -> Self {
        let slack = rhs - lhs;
        Self {
            theorem_id: theorem_id.into(),
            params,
            x,
            lhs,
            rhs,
            slack,
            holds: slack >= -1e-10 * (1.0 + rhs.abs()),
            advisory,
            metadata: BTreeMap::new(),
        }
    }

    fn record_window(&mut self, window: &Window) {
        self.metadata.insert("window_upper".into(), window.upper());
        self.metadata
            .insert("window_grid_points".into(), window.grid_points() as f64);
    }

    fn record_modulus(&mut self, key: &str, m: &ModulusEstimate) {
        self.metadata.insert(key.into(), m.value);
        self.metadata.insert(format!("{key}_sampled"), m.sampled);
    }
}

fn psi2(params: &OperatorParams, x: f64) -> f64 {
    central_moment_closed(params, CentralMomentId::new(2).expect("order 2"), x)
}

/// `γ(x) = (n+β)·L(ψ²; x)` written out term by term.
pub fn gamma(params: &OperatorParams, x: f64) -> f64 {
    let n = params.n() as f64;
    let (a, al, be, nb) = (params.a(), params.alpha(), params.beta(), params.shifted_n());
    let q = 1.0 + x;
    (n + be * be) / nb * x * x + (n - 2.0 * al * be) / nb * x + a * a / nb * x * x / (q * q)
        - 2.0 * a * be / nb * x * x / q
        + a * (1.0 + 2.0 * al) / nb * x / q
        + al * al / nb
}

/// `{1 + √(x(1+x) + (ax/(n(1+x)))·((a+1)x+1)/(1+x))}·ω`, the unshifted bound.
pub fn mihesan_bound(n: u64, a: f64, x: f64, modulus: f64) -> f64 {
    let n = n as f64;
    let q = 1.0 + x;
    let inner = x * q + a * x / (n * q) * ((a + 1.0) * x + 1.0) / q;
    (1.0 + inner.sqrt()) * modulus
}

/// `[0, x + 10√(L(ψ²;x)) + 1]` at the default density.
pub fn default_window(params: &OperatorParams, x: f64) -> Window {
    let spread = psi2(params, x).max(0.0).sqrt();
    Window::with_upper(x + 10.0 * spread + 1.0).expect("positive upper")
}

fn check_x(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("x must be non-negative, got {x}")))
    }
}

/// `|L(f;x) - f(x)| ≤ (1 + √γ(x))·ω(f; (n+β)^{-1/2})`.
pub fn bound_thm31(
    params: &OperatorParams,
    f: &FunctionSpec,
    x: f64,
    window: &Window,
    policy: &TruncationPolicy,
) -> Result<BoundReport> {
    check_x(x)?;
    let lhs = apply_deviation(params, f, x, policy)?.value.abs();
    let delta = params.shifted_n().powf(-0.5);
    let g = gamma(params, x);
    let m = modulus_continuity(f, delta, window)?;
    let rhs = (1.0 + g.sqrt()) * m.value;
    let mut report = BoundReport::new("3.1", *params, x, lhs, rhs, m.analytic.is_none());
    report.metadata.insert("delta".into(), delta);
    report.metadata.insert("gamma".into(), g);
    report.record_modulus("modulus", &m);
    report.record_window(window);
    Ok(report)
}

/// `|L(f;x) - f(x)| ≤ ω₁((n+β)^{-1})·√L(ψ²)·{1 + √(n+β)·√L(ψ²)}`, exactly as
/// stated. The metadata also carries the same expression with the step
/// `(n+β)^{-1/2}` instead, under `rhs_delta_inv_sqrt`, and the first-order
/// term `|f'(x)·L(ψ¹)|` under `first_order_term`.
pub fn bound_thm32(
    params: &OperatorParams,
    f: &FunctionSpec,
    x: f64,
    window: &Window,
    policy: &TruncationPolicy,
) -> Result<BoundReport> {
    check_x(x)?;
    if !f.has_d1() {
        return Err(Error::MissingDerivative {
            function: f.label(),
            order: 1,
        });
    }
    let lhs = apply_deviation(params, f, x, policy)?.value.abs();
    let nb = params.shifted_n();
    let root = psi2(params, x).max(0.0).sqrt();
    let shape = root * (1.0 + nb.sqrt() * root);
    let delta = 1.0 / nb;
    let m = modulus_derivative(f, delta, window)?;
    let alt = modulus_derivative(f, nb.powf(-0.5), window)?;
    let rhs = m.value * shape;
    let mut report = BoundReport::new("3.2", *params, x, lhs, rhs, m.analytic.is_none());
    let psi1 = central_moment_closed(params, CentralMomentId::new(1).expect("order 1"), x);
    report.metadata.insert("delta".into(), delta);
    report.metadata.insert("sqrt_psi2".into(), root);
    report.record_modulus("modulus", &m);
    report.metadata.insert("rhs_delta_inv_sqrt".into(), alt.value * shape);
    report
        .metadata
        .insert("first_order_term".into(), (f.d1(x).expect("checked") * psi1).abs());
    report.record_window(window);
    Ok(report)
}

/// Side-by-side bounds for the shifted operator and its unshifted parent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateComparison {
    pub delta_stancu: f64,
    pub delta_mihesan: f64,
    pub bound_stancu: f64,
    pub bound_mihesan: f64,
}

pub fn remark_rate_comparison(
    params: &OperatorParams,
    f: &FunctionSpec,
    x: f64,
    window: &Window,
) -> Result<RateComparison> {
    check_x(x)?;
    let delta_stancu = params.shifted_n().powf(-0.5);
    let delta_mihesan = (params.n() as f64).powf(-0.5);
    let w_stancu = modulus_continuity(f, delta_stancu, window)?.value;
    let w_mihesan = modulus_continuity(f, delta_mihesan, window)?.value;
    Ok(RateComparison {
        delta_stancu,
        delta_mihesan,
        bound_stancu: (1.0 + gamma(params, x).sqrt()) * w_stancu,
        bound_mihesan: mihesan_bound(params.n(), params.a(), x, w_mihesan),
    })
}

/// One ladder point of the direct estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thm41Point {
    pub n: u64,
    pub lhs: f64,
    pub modulus: f64,
    /// `lhs / modulus`; NaN at degenerate points.
    pub ratio: f64,
    /// The modulus vanishes to float noise while the error does not.
    pub degenerate: bool,
}

/// `|L(f;x) - f(x)|` against `ω²_{φ^λ}(f, (n+β)^{-1/2}·φ(x)^{1-λ})` along a
/// ladder of `n`, with `a`, `α`, `β` taken from `params`. The window
/// defaults to [`default_window`] at the first ladder point.
pub fn bound_thm41(
    params: &OperatorParams,
    f: &FunctionSpec,
    x: f64,
    lambda: StepWeightExponent,
    window: Option<&Window>,
    n_ladder: &[u64],
    policy: &TruncationPolicy,
) -> Result<Vec<Thm41Point>> {
    check_x(x)?;
    check_ladder(n_ladder)?;
    let window = match window {
        Some(w) => *w,
        None => default_window(&params.with_n(n_ladder[0])?, x),
    };
    let noise = 1e-12 * (1.0 + f.eval(x).abs());
    n_ladder
        .par_iter()
        .map(|&n| {
            let p = params.with_n(n)?;
            let lhs = apply_deviation(&p, f, x, policy)?.value.abs();
            let arg = p.shifted_n().powf(-0.5) * step_weight(x).powf(1.0 - lambda.value());
            let modulus = ditzian_totik_modulus(f, arg, lambda, &window)?.value;
            let degenerate = modulus <= noise;
            Ok(Thm41Point {
                n,
                lhs,
                modulus,
                ratio: if degenerate { f64::NAN } else { lhs / modulus },
                degenerate,
            })
        })
        .collect()
}

fn check_ladder(n_ladder: &[u64]) -> Result<()> {
    if n_ladder.is_empty() {
        return Err(Error::InvalidInput("n ladder is empty".into()));
    }
    if n_ladder[0] == 0 || n_ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("n ladder must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// `2^4, …, 2^14`.
pub fn default_ladder() -> Vec<u64> {
    doubling_ladder(4, 14)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoronovskayaReport {
    pub x: f64,
    pub n_ladder: Vec<u64>,
    /// `n·(L(f;x) - f(x))`
    pub scaled_errors: Vec<f64>,
    pub target: f64,
    /// The target with derivatives replaced by 5-point central differences.
    pub target_fd: f64,
    /// Richardson extrapolant of the last two ladder points; the last
    /// scaled error on a single-point ladder.
    pub extrapolated: f64,
    pub converged: bool,
}

/// `V(x) = (α - βx + ax/(1+x))·f'(x) + (x²+x)/2·f''(x)`.
pub fn voronovskaya_target(a: f64, alpha: f64, beta: f64, d1: f64, d2: f64, x: f64) -> f64 {
    (alpha - beta * x + a * x / (1.0 + x)) * d1 + 0.5 * (x * x + x) * d2
}

fn fd_derivatives(f: &FunctionSpec, x: f64) -> (f64, f64) {
    let h = 1e-4 * (1.0 + x.abs());
    let (m2, m1, c, p1, p2) = (
        f.eval(x - 2.0 * h),
        f.eval(x - h),
        f.eval(x),
        f.eval(x + h),
        f.eval(x + 2.0 * h),
    );
    let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
    let d2 = (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h);
    (d1, d2)
}

/// Scaled errors along the ladder against the limit `V(x)`; `params.n()` is
/// ignored.
pub fn voronovskaya(
    params: &OperatorParams,
    f: &FunctionSpec,
    x: f64,
    n_ladder: &[u64],
    policy: &TruncationPolicy,
) -> Result<VoronovskayaReport> {
    check_x(x)?;
    check_ladder(n_ladder)?;
    let (Some(d1), Some(d2)) = (f.d1(x), f.d2(x)) else {
        return Err(Error::MissingDerivative {
            function: f.label(),
            order: 2,
        });
    };
    let (a, al, be) = (params.a(), params.alpha(), params.beta());
    let target = voronovskaya_target(a, al, be, d1, d2, x);
    let (fd1, fd2) = fd_derivatives(f, x);
    let scaled_errors: Vec<f64> = n_ladder
        .par_iter()
        .map(|&n| Ok(n as f64 * apply_deviation(&params.with_n(n)?, f, x, policy)?.value))
        .collect::<Result<_>>()?;
    let extrapolated = if n_ladder.len() >= 2 {
        *richardson_ladder(n_ladder, &scaled_errors)?
            .last()
            .expect("non-empty")
    } else {
        scaled_errors[0]
    };
    Ok(VoronovskayaReport {
        x,
        n_ladder: n_ladder.to_vec(),
        converged: (extrapolated - target).abs() <= f64::max(1e-3, 1e-2 * target.abs()),
        target,
        target_fd: voronovskaya_target(a, al, be, fd1, fd2, x),
        extrapolated,
        scaled_errors,
    })
}
