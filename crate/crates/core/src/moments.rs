//! Moment identities of the operators and their audit against the series.
//!
//! Three independent routes are available for every moment:
//!
//! * the formulas as printed (`raw_moment_mihesan`, `raw_moment_closed`,
//!   `central_moment_closed`, `asymptotic_limit`), reproduced term by term,
//!   including visible typesetting damage;
//! * an exact closed form built from the factorial moments of the weights
//!   ([`raw_moment_factorial`]): the weights are the law of `N + P` with
//!   `N` negative binomial and `P` Poisson, so
//!   `E[K^{(r)}] = Σ_i C(r,i) (n)_i x^i λ^{r-i}`;
//! * the brute-force series ([`raw_moment_oracle`]), which is ground truth.
//!
//! Audits compare the printed route against the series.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::basis::{pochhammer, OperatorParams, TruncationPolicy};
use crate::error::{Error, Result};
use crate::extrapolate::{doubling_ladder, richardson_ladder};
use crate::operator::{sum_series, SeriesOutcome};

/// Moment orders with a printed central identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CentralMomentId(u32);

impl CentralMomentId {
    pub fn new(order: u32) -> Result<Self> {
        match order {
            0 | 1 | 2 | 4 => Ok(Self(order)),
            _ => Err(Error::UnsupportedOrder(order)),
        }
    }

    pub fn order(self) -> u32 {
        self.0
    }
}

fn check_order(j: u32, max: u32) -> Result<()> {
    if j > max {
        Err(Error::UnsupportedOrder(j))
    } else {
        Ok(())
    }
}

/// Printed `B_n^a(t^j; x)`, `j ≤ 4`. For `j = 4` the nested fraction
/// `12ax⁴/((1+x) + 6a²x⁴/(1+x)²)` is kept exactly as typeset.
pub fn raw_moment_mihesan(n: u64, a: f64, j: u32, x: f64) -> Result<f64> {
    check_order(j, 4)?;
    let n = n as f64;
    let q = 1.0 + x;
    let x2 = x * x;
    let x3 = x2 * x;
    let x4 = x3 * x;
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    Ok(match j {
        0 => 1.0,
        1 => x + a * x / (n * q),
        2 => {
            x2 / n + x / n + x2 + a2 * x2 / (n * n * q * q) + 2.0 * a * x2 / (n * q)
                + a * x / (n * n * q)
        }
        3 => {
            x3 + 3.0 * x2 * q / n
                + x * q * (1.0 + 2.0 * x) / (n * n)
                + 3.0 * a * x3 / (n * q)
                + (3.0 * a * x2 + 3.0 * a2 * x3 / (q * q) + 3.0 * a * x2 / q) / (n * n)
                + (a * x / q + 3.0 * a2 * x2 / (q * q) + a3 * x3 / (q * q * q)) / (n * n * n)
        }
        _ => {
            let nested = 12.0 * a * x4 / (q + 6.0 * a2 * x4 / (q * q)) + 18.0 * a * x3 / q;
            mihesan_t4_common(n, a, a2, a3, a4, x, q) + nested / (n * n)
        }
    })
}

/// `B_n^a(t^4; x)` with the malformed `n^{-2}` bracket read as
/// `12ax⁴/(1+x) + 6a²x⁴/(1+x)² + 18ax³/(1+x)`.
pub fn raw_moment_mihesan_t4_corrected(n: u64, a: f64, x: f64) -> f64 {
    let n = n as f64;
    let q = 1.0 + x;
    let x3 = x * x * x;
    let x4 = x3 * x;
    let a2 = a * a;
    let bracket = 12.0 * a * x4 / q + 6.0 * a2 * x4 / (q * q) + 18.0 * a * x3 / q;
    mihesan_t4_common(n, a, a2, a2 * a, a2 * a2, x, q) + bracket / (n * n)
}

fn mihesan_t4_common(n: f64, a: f64, a2: f64, a3: f64, a4: f64, x: f64, q: f64) -> f64 {
    let x2 = x * x;
    let x3 = x2 * x;
    let x4 = x3 * x;
    let (q2, q3, q4) = (q * q, q * q * q, q * q * q * q);
    x4 + 6.0 * x3 * q / n
        + x2 * q * (7.0 + 11.0 * x) / (n * n)
        + x * q * (6.0 * x2 + 6.0 * x + 1.0) / (n * n * n)
        + 4.0 * a * x4 / (n * q)
        + (8.0 * a * x4 / q
            + 6.0 * a2 * x4 / q2
            + 4.0 * a3 * x4 / q3
            + 18.0 * a * x3 / q
            + 18.0 * a2 * x3 / q2
            + 14.0 * a * x2 / q)
            / (n * n * n)
        + (a * x / q + 7.0 * a2 * x2 / q2 + 6.0 * a3 * x3 / q3 + a4 * x4 / q4) / (n * n * n * n)
}

/// Printed `L_{n,a}^{α,β}(t^j; x)`, `j ≤ 4`. The `(b+β)⁴` denominator in
/// the `j = 4` display is read as `(n+β)⁴`.
pub fn raw_moment_closed(p: &OperatorParams, j: u32, x: f64) -> Result<f64> {
    check_order(j, 4)?;
    let n = p.n() as f64;
    let (a, al, nb) = (p.a(), p.alpha(), p.shifted_n());
    let q = 1.0 + x;
    let u = x / q;
    let (x2, x3, x4) = (x * x, x * x * x, x * x * x * x);
    let (q2, q3, q4) = (q * q, q * q * q, q * q * q * q);
    let (a2, a3, a4) = (a * a, a * a * a, a * a * a * a);
    let (al2, al3, al4) = (al * al, al * al * al, al * al * al * al);
    let (n2, n3, n4) = (n * n, n * n * n, n * n * n * n);
    let nb2 = nb * nb;
    let nb3 = nb2 * nb;
    let nb4 = nb3 * nb;
    Ok(match j {
        0 => 1.0,
        1 => n / nb * x + a / nb * u + al / nb,
        2 => {
            (n2 + n) / nb2 * x2
                + n * (1.0 + 2.0 * al) / nb2 * x
                + a2 / nb2 * u * u
                + 2.0 * a * n / nb2 * x2 / q
                + a * (1.0 + 2.0 * al) / nb2 * u
                + al2 / nb2
        }
        3 => {
            (n3 + 3.0 * n2 + 2.0 * n) / nb3 * x3
                + (n2 * (3.0 + 3.0 * al) + n * (3.0 + 3.0 * al + 3.0 * a)) / nb3 * x2
                + n * (1.0 + 3.0 * al + 3.0 * al2) / nb3 * x
                + 3.0 * a * n2 / nb3 * x3 / q
                + n / nb3 * (3.0 * a2 * x3 / q2 + 3.0 * a * x2 / q + 6.0 * a * al * x2 / q)
                + (a * x / q
                    + 3.0 * a2 * x2 / q2
                    + a3 * x3 / q3
                    + 3.0 * al * a2 * x2 / q2
                    + 3.0 * al2 * a * x / q
                    + al3)
                    / nb3
        }
        _ => {
            (n4 + 6.0 * n3 + 11.0 * n2 + 6.0 * n) / nb4 * x4
                + ((6.0 + 4.0 * al) * n3 + (18.0 + 12.0 * al) * n2 + (9.0 + 8.0 * al) * n) / nb4 * x3
                + ((7.0 + 12.0 * al + 6.0 * al2) * n2 / nb4
                    + (7.0 + 12.0 * al + 12.0 * al * a + 6.0 * al2) * n / nb4)
                    * x2
                + (1.0 + 4.0 * al + 6.0 * al2 + 4.0 * al3) * n / nb4 * x
                + (4.0 * a * n3 + 12.0 * a * n2 + 8.0 * a * n) / nb4 * x4 / q
                + (6.0 * a2 * n2 + 6.0 * a2 * n) / nb4 * x4 / q2
                + 4.0 * a3 * n / nb4 * x4 / q3
                + a4 / nb4 * x4 / q4
                + (18.0 * a * n2 + 18.0 * a * n) / nb4 * x3 / q
                + (18.0 * a2 + 12.0 * a2 * al) * n / nb4 * x3 / q2
                + (6.0 * a3 + 4.0 * al * a3) / nb4 * x3 / q3
                + (12.0 * a * al2 + 12.0 * a * al + 14.0 * a) * n / nb4 * x2 / q
                + (7.0 * a2 + 12.0 * a2 * al + 6.0 * a2 * al2) / nb4 * x2 / q2
                + (a + 4.0 * al * a + 6.0 * al2 * a + 4.0 * al3 * a) / nb4 * x / q
                + al4 / nb4
        }
    })
}

/// Printed `L(ψ_x^i; x)` for `i ∈ {0, 1, 2, 4}`.
pub fn central_moment_closed(p: &OperatorParams, id: CentralMomentId, x: f64) -> f64 {
    let n = p.n() as f64;
    let (a, al, be, nb) = (p.a(), p.alpha(), p.beta(), p.shifted_n());
    let q = 1.0 + x;
    let u = x / q;
    let (x2, x3, x4) = (x * x, x * x * x, x * x * x * x);
    let (q2, q3, q4) = (q * q, q * q * q, q * q * q * q);
    let nb2 = nb * nb;
    let nb4 = nb2 * nb2;
    match id.order() {
        0 => 1.0,
        1 => (n / nb - 1.0) * x + a / nb * u + al / nb,
        2 => {
            (n + be * be) / nb2 * x2 + (n - 2.0 * al * be) / nb2 * x + a * a / nb2 * u * u
                - 2.0 * a * be / nb2 * x2 / q
                + a * (1.0 + 2.0 * al) / nb2 * u
                + al * al / nb2
        }
        _ => {
            let (a2, a3, a4) = (a * a, a * a * a, a * a * a * a);
            let (al2, al3, al4) = (al * al, al * al * al, al * al * al * al);
            let (be2, be3, be4) = (be * be, be * be * be, be * be * be * be);
            let n2 = n * n;
            ((3.0 - 12.0 * be) * n2 + (6.0 + 4.0 * be + 2.0 * be2 + 4.0 * be3) * n + be4) / nb4 * x4
                + (((6.0 - 12.0 * a - 12.0 * be) * n2
                    + (9.0 + 8.0 * al - 12.0 * be * (1.0 + a + al + al * be)) * n)
                    / nb4
                    + (6.0 - 12.0 * a - 12.0 * be - 12.0 * al * be2) / nb4)
                    * x3
                + (3.0 * n2
                    + (7.0 - 4.0 * be + 12.0 * al * a - 12.0 * al * be + 6.0 * al2) * n
                    + 6.0 * al2 * be2)
                    / nb4
                    * x2
                + ((1.0 + 4.0 * al + 6.0 * al2) * n - 4.0 * al3 * be) / nb4 * x
                + (12.0 * a * n2 + 8.0 * a * n - 4.0 * a * be3) / nb4 * x4 / q
                + (6.0 * a2 * n + 6.0 * a2 * be2) / nb4 * x4 / q2
                - 4.0 * a3 * be / nb4 * x4 / q3
                + a4 / nb4 * x4 / q4
                + (12.0 * a * n2 + 18.0 * a * n + 6.0 * a * (1.0 + 2.0 * al) * be2) / nb4 * x3 / q
                + (6.0 * a2 * n - (12.0 * a2 + 12.0 * al * a2) * be) / nb4 * x3 / q2
                + (6.0 * a3 + 4.0 * al * a3) / nb4 * x3 / q3
                + ((12.0 * a * al + 8.0 * a - 6.0 * a * al2) * n - (6.0 * a + 18.0 * al2 * a) * be)
                    / nb4
                    * x2
                    / q
                + (7.0 * a2 + 12.0 * a2 * al + 6.0 * a2 * al2) / nb4 * x2 / q2
                + (a + 4.0 * al * a + 6.0 * al2 * a + 4.0 * al3 * a) / nb4 * x / q
                + al4 / nb4
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Highest order supported by [`raw_moment_factorial`].
pub const MAX_EXACT_ORDER: u32 = 8;

/// Exact `L(t^j; x)` from the factorial moments of the weight law.
pub fn raw_moment_factorial(p: &OperatorParams, j: u32, x: f64) -> Result<f64> {
    check_order(j, MAX_EXACT_ORDER)?;
    let lambda = p.a() * x / (1.0 + x);
    let factorial: Vec<f64> = (0..=j)
        .map(|r| {
            (0..=r)
                .map(|i| {
                    binomial(r, i)
                        * pochhammer(p.n(), i as u64)
                        * x.powi(i as i32)
                        * lambda.powi((r - i) as i32)
                })
                .sum()
        })
        .collect();
    // Stirling numbers of the second kind, S(i, r) for i, r ≤ j
    let size = j as usize + 1;
    let mut stirling = vec![vec![0.0_f64; size]; size];
    stirling[0][0] = 1.0;
    for i in 1..size {
        for r in 1..=i {
            stirling[i][r] = r as f64 * stirling[i - 1][r] + stirling[i - 1][r - 1];
        }
    }
    let k_moment = |i: usize| -> f64 { (0..=i).map(|r| stirling[i][r] * factorial[r]).sum() };
    let shifted: f64 = (0..=j)
        .map(|i| binomial(j, i) * k_moment(i as usize) * p.alpha().powi((j - i) as i32))
        .sum();
    Ok(shifted / p.shifted_n().powi(j as i32))
}

/// `L((t - x)^order; x)` by binomial expansion of exact raw moments.
pub fn central_moment_derived(p: &OperatorParams, order: u32, x: f64) -> Result<f64> {
    check_order(order, 4)?;
    let mut sum = 0.0;
    for j in 0..=order {
        sum += binomial(order, j) * (-x).powi((order - j) as i32) * raw_moment_factorial(p, j, x)?;
    }
    Ok(sum)
}

/// Series value of `L(t^j; x)`.
pub fn raw_moment_oracle(p: &OperatorParams, j: u32, x: f64, policy: &TruncationPolicy) -> Result<f64> {
    Ok(raw_oracle(p, j, x, policy)?.values[0])
}

fn raw_oracle(p: &OperatorParams, j: u32, x: f64, policy: &TruncationPolicy) -> Result<SeriesOutcome<1>> {
    check_order(j, MAX_EXACT_ORDER)?;
    sum_series(p, x, policy, |t| [t.powi(j as i32)])
}

/// Series value of `L((t - x)^order; x)`.
pub fn central_moment_oracle(
    p: &OperatorParams,
    order: u32,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    Ok(central_oracle(p, order, x, policy)?.values[0])
}

fn central_oracle(
    p: &OperatorParams,
    order: u32,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<SeriesOutcome<1>> {
    check_order(order, MAX_EXACT_ORDER)?;
    sum_series(p, x, policy, |t| [(t - x).powi(order as i32)])
}

/// The scaled central moments with a printed limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    Psi1TimesN,
    Psi2TimesN,
    Psi4TimesN2,
}

impl LimitKind {
    pub fn order(self) -> u32 {
        match self {
            LimitKind::Psi1TimesN => 1,
            LimitKind::Psi2TimesN => 2,
            LimitKind::Psi4TimesN2 => 4,
        }
    }

    fn scale(self, n: u64) -> f64 {
        match self {
            LimitKind::Psi4TimesN2 => (n as f64) * (n as f64),
            _ => n as f64,
        }
    }
}

/// Printed limits of `n·L(ψ¹)`, `n·L(ψ²)` and `n²·L(ψ⁴)` as `n → ∞`.
pub fn asymptotic_limit(a: f64, alpha: f64, beta: f64, which: LimitKind, x: f64) -> f64 {
    let u = x / (1.0 + x);
    match which {
        LimitKind::Psi1TimesN => alpha - beta * x + a * u,
        LimitKind::Psi2TimesN => x * x + x,
        LimitKind::Psi4TimesN2 => {
            let (x2, x3, x4) = (x * x, x * x * x, x * x * x * x);
            (3.0 - 12.0 * beta) * x4 + (6.0 - 12.0 * a - 12.0 * beta) * x3 + 3.0 * x2
                + 12.0 * a * x2 / (1.0 + x)
                + 12.0 * a * x3 / (1.0 + x)
        }
    }
}

/// Scaled central moments along a ladder and their Richardson extrapolants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub which: LimitKind,
    pub ladder: Vec<u64>,
    pub scaled: Vec<f64>,
    pub extrapolants: Vec<f64>,
}

impl LimitEstimate {
    pub fn limit(&self) -> f64 {
        *self.extrapolants.last().expect("ladder has at least two points")
    }

    /// The last three extrapolants (fewer on short ladders).
    pub fn tail(&self) -> Vec<f64> {
        let k = self.extrapolants.len().saturating_sub(3);
        self.extrapolants[k..].to_vec()
    }
}

/// One series pass per ladder index, yielding all three limit sequences.
pub fn estimate_limits(
    a: f64,
    alpha: f64,
    beta: f64,
    x: f64,
    ladder: &[u64],
    policy: &TruncationPolicy,
) -> Result<[LimitEstimate; 3]> {
    let kinds = [LimitKind::Psi1TimesN, LimitKind::Psi2TimesN, LimitKind::Psi4TimesN2];
    let rows: Vec<[f64; 3]> = ladder
        .iter()
        .map(|&n| {
            let p = OperatorParams::new(n, a, alpha, beta)?;
            let out = sum_series(&p, x, policy, |t| {
                let d = t - x;
                let d2 = d * d;
                [d, d2, d2 * d2]
            })?;
            Ok([
                kinds[0].scale(n) * out.values[0],
                kinds[1].scale(n) * out.values[1],
                kinds[2].scale(n) * out.values[2],
            ])
        })
        .collect::<Result<_>>()?;
    let build = |i: usize| -> Result<LimitEstimate> {
        let scaled: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        Ok(LimitEstimate {
            which: kinds[i],
            ladder: ladder.to_vec(),
            extrapolants: richardson_ladder(ladder, &scaled)?,
            scaled,
        })
    };
    Ok([build(0)?, build(1)?, build(2)?])
}

/// Every identity the audit knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LemmaId {
    MihesanT0,
    MihesanT1,
    MihesanT2,
    MihesanT3,
    MihesanT4,
    MihesanT4Corrected,
    StancuI,
    StancuII,
    StancuIII,
    StancuIV,
    StancuV,
    CentralPsi0,
    CentralPsi1,
    CentralPsi2,
    CentralPsi4,
    LimitPsi1,
    LimitPsi2,
    LimitPsi4,
}

impl LemmaId {
    pub const ALL: [LemmaId; 18] = [
        LemmaId::MihesanT0,
        LemmaId::MihesanT1,
        LemmaId::MihesanT2,
        LemmaId::MihesanT3,
        LemmaId::MihesanT4,
        LemmaId::MihesanT4Corrected,
        LemmaId::StancuI,
        LemmaId::StancuII,
        LemmaId::StancuIII,
        LemmaId::StancuIV,
        LemmaId::StancuV,
        LemmaId::CentralPsi0,
        LemmaId::CentralPsi1,
        LemmaId::CentralPsi2,
        LemmaId::CentralPsi4,
        LemmaId::LimitPsi1,
        LemmaId::LimitPsi2,
        LemmaId::LimitPsi4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LemmaId::MihesanT0 => "2.1.t0",
            LemmaId::MihesanT1 => "2.1.t1",
            LemmaId::MihesanT2 => "2.1.t2",
            LemmaId::MihesanT3 => "2.1.t3",
            LemmaId::MihesanT4 => "2.1.t4",
            LemmaId::MihesanT4Corrected => "2.1.t4.corrected",
            LemmaId::StancuI => "2.2.i",
            LemmaId::StancuII => "2.2.ii",
            LemmaId::StancuIII => "2.2.iii",
            LemmaId::StancuIV => "2.2.iv",
            LemmaId::StancuV => "2.2.v",
            LemmaId::CentralPsi0 => "2.3.psi0",
            LemmaId::CentralPsi1 => "2.3.psi1",
            LemmaId::CentralPsi2 => "2.3.psi2",
            LemmaId::CentralPsi4 => "2.3.psi4",
            LemmaId::LimitPsi1 => "2.4.psi1",
            LemmaId::LimitPsi2 => "2.4.psi2",
            LemmaId::LimitPsi4 => "2.4.psi4",
        }
    }

    /// Identities with known typesetting defects. A discrepancy on one of
    /// these is expected; on any other it is a finding.
    pub fn known_discrepant(self) -> bool {
        matches!(
            self,
            LemmaId::MihesanT4
                | LemmaId::StancuIV
                | LemmaId::StancuV
                | LemmaId::CentralPsi4
                | LemmaId::LimitPsi4
        )
    }

    /// Only `n` and `a` enter the unshifted identities.
    pub fn is_mihesan(self) -> bool {
        matches!(
            self,
            LemmaId::MihesanT0
                | LemmaId::MihesanT1
                | LemmaId::MihesanT2
                | LemmaId::MihesanT3
                | LemmaId::MihesanT4
                | LemmaId::MihesanT4Corrected
        )
    }

    pub fn is_limit(self) -> bool {
        matches!(self, LemmaId::LimitPsi1 | LemmaId::LimitPsi2 | LemmaId::LimitPsi4)
    }

    fn limit_kind(self) -> Option<LimitKind> {
        match self {
            LemmaId::LimitPsi1 => Some(LimitKind::Psi1TimesN),
            LemmaId::LimitPsi2 => Some(LimitKind::Psi2TimesN),
            LemmaId::LimitPsi4 => Some(LimitKind::Psi4TimesN2),
            _ => None,
        }
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LemmaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LemmaId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown lemma id '{s}'")))
    }
}

impl Serialize for LemmaId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Match,
    Discrepancy,
}

/// Result of auditing one identity at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub lemma_id: LemmaId,
    pub params: OperatorParams,
    pub x: f64,
    pub printed_value: f64,
    pub oracle_value: f64,
    /// Binomial expansion of exact raw moments; central identities only.
    pub derived_value: Option<f64>,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub verdict: Verdict,
    /// Last Richardson extrapolants; limit identities only.
    pub extrapolants: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    /// Relative tolerance for finite-`n` identities.
    pub tolerance: f64,
    /// Tolerance for extrapolated limits, relative to `max(|limit|, 1)`.
    pub limit_tolerance: f64,
    pub ladder: Vec<u64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            limit_tolerance: 1e-2,
            ladder: doubling_ladder(4, 14),
        }
    }
}

fn printed_value(id: LemmaId, p: &OperatorParams, x: f64) -> f64 {
    let r = match id {
        LemmaId::MihesanT0 => raw_moment_mihesan(p.n(), p.a(), 0, x),
        LemmaId::MihesanT1 => raw_moment_mihesan(p.n(), p.a(), 1, x),
        LemmaId::MihesanT2 => raw_moment_mihesan(p.n(), p.a(), 2, x),
        LemmaId::MihesanT3 => raw_moment_mihesan(p.n(), p.a(), 3, x),
        LemmaId::MihesanT4 => raw_moment_mihesan(p.n(), p.a(), 4, x),
        LemmaId::MihesanT4Corrected => Ok(raw_moment_mihesan_t4_corrected(p.n(), p.a(), x)),
        LemmaId::StancuI => raw_moment_closed(p, 0, x),
        LemmaId::StancuII => raw_moment_closed(p, 1, x),
        LemmaId::StancuIII => raw_moment_closed(p, 2, x),
        LemmaId::StancuIV => raw_moment_closed(p, 3, x),
        LemmaId::StancuV => raw_moment_closed(p, 4, x),
        LemmaId::CentralPsi0 => Ok(central_moment_closed(p, CentralMomentId(0), x)),
        LemmaId::CentralPsi1 => Ok(central_moment_closed(p, CentralMomentId(1), x)),
        LemmaId::CentralPsi2 => Ok(central_moment_closed(p, CentralMomentId(2), x)),
        LemmaId::CentralPsi4 => Ok(central_moment_closed(p, CentralMomentId(4), x)),
        LemmaId::LimitPsi1 | LemmaId::LimitPsi2 | LemmaId::LimitPsi4 => Ok(asymptotic_limit(
            p.a(),
            p.alpha(),
            p.beta(),
            id.limit_kind().expect("limit id"),
            x,
        )),
    };
    r.expect("orders are in range by construction")
}

fn raw_order(id: LemmaId) -> Option<u32> {
    Some(match id {
        LemmaId::MihesanT0 | LemmaId::StancuI => 0,
        LemmaId::MihesanT1 | LemmaId::StancuII => 1,
        LemmaId::MihesanT2 | LemmaId::StancuIII => 2,
        LemmaId::MihesanT3 | LemmaId::StancuIV => 3,
        LemmaId::MihesanT4 | LemmaId::MihesanT4Corrected | LemmaId::StancuV => 4,
        _ => return None,
    })
}

fn central_order(id: LemmaId) -> Option<u32> {
    Some(match id {
        LemmaId::CentralPsi0 => 0,
        LemmaId::CentralPsi1 => 1,
        LemmaId::CentralPsi2 => 2,
        LemmaId::CentralPsi4 => 4,
        _ => return None,
    })
}

fn finish(
    lemma_id: LemmaId,
    params: OperatorParams,
    x: f64,
    printed: f64,
    oracle: f64,
    scale: f64,
    tolerance: f64,
) -> (f64, f64, Verdict) {
    let abs_diff = (printed - oracle).abs();
    let rel_diff = if abs_diff == 0.0 {
        0.0
    } else {
        abs_diff / oracle.abs().max(scale)
    };
    let verdict = if rel_diff <= tolerance {
        Verdict::Match
    } else {
        Verdict::Discrepancy
    };
    let _ = (lemma_id, params, x);
    (abs_diff, rel_diff, verdict)
}

/// Audits one identity at one point with the default configuration.
pub fn audit_lemma(
    lemma_id: LemmaId,
    params: &OperatorParams,
    x: f64,
    policy: &TruncationPolicy,
) -> MomentReport {
    audit_lemma_with(lemma_id, params, x, policy, &AuditConfig::default())
}

/// Audits one identity at one point.
///
/// Finite-`n` identities compare against the series, with differences
/// measured relative to `max(|oracle|, Σ W|g|)` so that float noise on a
/// vanishing moment is not mistaken for a defect. Limits compare against the
/// last Richardson extrapolant of the scaled series over `config.ladder`;
/// `params.n()` is ignored for them. An oracle failure shows up as a NaN
/// oracle value and a discrepancy.
pub fn audit_lemma_with(
    lemma_id: LemmaId,
    params: &OperatorParams,
    x: f64,
    policy: &TruncationPolicy,
    config: &AuditConfig,
) -> MomentReport {
    let params = if lemma_id.is_mihesan() {
        OperatorParams::mihesan(params.n(), params.a()).expect("admissible")
    } else {
        *params
    };
    if let Some(kind) = lemma_id.limit_kind() {
        let estimate = estimate_limits(params.a(), params.alpha(), params.beta(), x, &config.ladder, policy)
            .map(|e| e.into_iter().find(|e| e.which == kind).expect("all kinds present"));
        return limit_report(lemma_id, &params, x, estimate, config);
    }

    let printed = printed_value(lemma_id, &params, x);
    let (oracle, scale, derived) = if let Some(j) = raw_order(lemma_id) {
        match raw_oracle(&params, j, x, policy) {
            Ok(o) => (o.values[0], o.magnitudes[0], None),
            Err(_) => (f64::NAN, f64::NAN, None),
        }
    } else {
        let j = central_order(lemma_id).expect("central id");
        let derived = central_moment_derived(&params, j, x).ok();
        match central_oracle(&params, j, x, policy) {
            Ok(o) => (o.values[0], o.magnitudes[0], derived),
            Err(_) => (f64::NAN, f64::NAN, derived),
        }
    };
    let (abs_diff, rel_diff, verdict) =
        finish(lemma_id, params, x, printed, oracle, scale, config.tolerance);
    MomentReport {
        lemma_id,
        params,
        x,
        printed_value: printed,
        oracle_value: oracle,
        derived_value: derived,
        abs_diff,
        rel_diff,
        verdict,
        extrapolants: Vec::new(),
    }
}

fn limit_report(
    lemma_id: LemmaId,
    params: &OperatorParams,
    x: f64,
    estimate: Result<LimitEstimate>,
    config: &AuditConfig,
) -> MomentReport {
    let printed = printed_value(lemma_id, params, x);
    let (oracle, tail) = match &estimate {
        Ok(e) => (e.limit(), e.tail()),
        Err(_) => (f64::NAN, Vec::new()),
    };
    let last_n = config.ladder.last().copied().unwrap_or(params.n());
    let params = params.with_n(last_n).unwrap_or(*params);
    let (abs_diff, rel_diff, verdict) =
        finish(lemma_id, params, x, printed, oracle, 1.0, config.limit_tolerance);
    MomentReport {
        lemma_id,
        params,
        x,
        printed_value: printed,
        oracle_value: oracle,
        derived_value: None,
        abs_diff,
        rel_diff,
        verdict,
        extrapolants: tail,
    }
}

/// Cartesian parameter grid for bulk audits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditGrid {
    pub ns: Vec<u64>,
    pub a_values: Vec<f64>,
    /// `(α, β)` pairs.
    pub shifts: Vec<(f64, f64)>,
    pub xs: Vec<f64>,
}

impl AuditGrid {
    /// `n ∈ {5,10,50,200}`, `a ∈ {0,1,3}`, `(α,β) ∈ {(0,0),(1,2),(2,2)}`,
    /// `x ∈ {0,0.5,1,2,5}`.
    pub fn standard() -> Self {
        Self {
            ns: vec![5, 10, 50, 200],
            a_values: vec![0.0, 1.0, 3.0],
            shifts: vec![(0.0, 0.0), (1.0, 2.0), (2.0, 2.0)],
            xs: vec![0.0, 0.5, 1.0, 2.0, 5.0],
        }
    }

    /// A small grid for quick runs.
    pub fn smoke() -> Self {
        Self {
            ns: vec![10],
            a_values: vec![0.0, 1.0],
            shifts: vec![(0.0, 0.0), (1.0, 2.0)],
            xs: vec![0.5, 1.0],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ns.is_empty() || self.a_values.is_empty() || self.shifts.is_empty() || self.xs.is_empty()
    }
}

/// Audits every identity over the grid, in a fixed order: by identity, then
/// `n`, `a`, `(α, β)`, `x`. Unshifted identities skip the `(α, β)` axis and
/// limits skip the `n` axis.
pub fn audit_grid(
    grid: &AuditGrid,
    policy: &TruncationPolicy,
    config: &AuditConfig,
) -> Result<Vec<MomentReport>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("audit grid is empty".into()));
    }
    for &n in &grid.ns {
        for &a in &grid.a_values {
            for &(al, be) in &grid.shifts {
                OperatorParams::new(n, a, al, be)?;
            }
        }
    }
    let mut points: Vec<(LemmaId, OperatorParams, f64)> = Vec::new();
    for id in LemmaId::ALL {
        if id.is_limit() {
            continue;
        }
        for &n in &grid.ns {
            for &a in &grid.a_values {
                let shifts: &[(f64, f64)] = if id.is_mihesan() { &[(0.0, 0.0)] } else { &grid.shifts };
                for &(al, be) in shifts {
                    for &x in &grid.xs {
                        points.push((id, OperatorParams::new(n, a, al, be)?, x));
                    }
                }
            }
        }
    }
    let mut reports: Vec<MomentReport> = points
        .par_iter()
        .map(|(id, p, x)| audit_lemma_with(*id, p, *x, policy, config))
        .collect();

    let n_ref = grid.ns[0];
    let mut families = Vec::new();
    for &a in &grid.a_values {
        for &(al, be) in &grid.shifts {
            for &x in &grid.xs {
                families.push((OperatorParams::new(n_ref, a, al, be)?, x));
            }
        }
    }
    let limits: Vec<[MomentReport; 3]> = families
        .par_iter()
        .map(|(p, x)| {
            let est = estimate_limits(p.a(), p.alpha(), p.beta(), *x, &config.ladder, policy);
            let pick = |i: usize| est.as_ref().map(|e| e[i].clone()).map_err(Clone::clone);
            [
                limit_report(LemmaId::LimitPsi1, p, *x, pick(0), config),
                limit_report(LemmaId::LimitPsi2, p, *x, pick(1), config),
                limit_report(LemmaId::LimitPsi4, p, *x, pick(2), config),
            ]
        })
        .collect();
    for i in 0..3 {
        reports.extend(limits.iter().map(|r| r[i].clone()));
    }
    Ok(reports)
}

/// Per-identity tally of an audit run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSummary {
    pub lemma_id: LemmaId,
    pub points: usize,
    pub matches: usize,
    pub known_discrepant: bool,
}

impl LemmaSummary {
    pub fn all_match(&self) -> bool {
        self.matches == self.points
    }

    /// A discrepancy on an identity not expected to have one.
    pub fn unexpected(&self) -> bool {
        !self.known_discrepant && !self.all_match()
    }
}

pub fn summarize(reports: &[MomentReport]) -> Vec<LemmaSummary> {
    LemmaId::ALL
        .into_iter()
        .filter_map(|id| {
            let of_id: Vec<&MomentReport> = reports.iter().filter(|r| r.lemma_id == id).collect();
            if of_id.is_empty() {
                return None;
            }
            Some(LemmaSummary {
                lemma_id: id,
                points: of_id.len(),
                matches: of_id.iter().filter(|r| r.verdict == Verdict::Match).count(),
                known_discrepant: id.known_discrepant(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> OperatorParams {
        OperatorParams::new(10, 1.0, 1.0, 2.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mihesan_examples() {
        assert_eq!(raw_moment_mihesan(7, 2.0, 0, 3.0).unwrap(), 1.0);
        assert!(close(raw_moment_mihesan(2, 1.0, 1, 1.0).unwrap(), 1.25, 1e-15));
        assert!(close(raw_moment_mihesan(2, 0.0, 2, 1.0).unwrap(), 2.0, 1e-15));
        assert!(matches!(raw_moment_mihesan(2, 0.0, 5, 1.0), Err(Error::UnsupportedOrder(5))));
    }

    #[test]
    fn stancu_examples() {
        let p = reference();
        assert_eq!(raw_moment_closed(&p, 0, 1.0).unwrap(), 1.0);
        assert!(close(raw_moment_closed(&p, 1, 1.0).unwrap(), 23.0 / 24.0, 1e-15));
        assert!(close(raw_moment_closed(&p, 2, 1.0).unwrap(), 152.75 / 144.0, 1e-15));
        assert!(raw_moment_closed(&p, 7, 1.0).is_err());
    }

    #[test]
    fn central_examples() {
        let p = reference();
        let id = |o| CentralMomentId::new(o).unwrap();
        assert_eq!(central_moment_closed(&p, id(0), 1.0), 1.0);
        let classical = OperatorParams::mihesan(13, 0.0).unwrap();
        assert_eq!(central_moment_closed(&classical, id(1), 2.5), 0.0);
        assert!(close(central_moment_closed(&p, id(2), 1.0), 20.75 / 144.0, 1e-15));
        assert!(CentralMomentId::new(3).is_err());
        assert!(CentralMomentId::new(5).is_err());
    }

    #[test]
    fn derived_central_examples() {
        let p = reference();
        assert!(close(central_moment_derived(&p, 0, 1.0).unwrap(), 1.0, 1e-15));
        assert!(close(central_moment_derived(&p, 2, 1.0).unwrap(), 20.75 / 144.0, 1e-14));
        assert!(close(central_moment_derived(&p, 1, 1.0).unwrap(), -1.0 / 24.0, 1e-15));
        assert!(central_moment_derived(&p, 5, 1.0).is_err());
    }

    #[test]
    fn limit_examples() {
        assert_eq!(asymptotic_limit(0.0, 0.0, 0.0, LimitKind::Psi2TimesN, 1.0), 2.0);
        assert!(close(asymptotic_limit(1.0, 1.0, 2.0, LimitKind::Psi1TimesN, 1.0), -0.5, 1e-15));
        for x in [0.0, 0.7, 3.0] {
            assert_eq!(asymptotic_limit(0.0, 0.0, 0.0, LimitKind::Psi1TimesN, x), 0.0);
        }
    }

    #[test]
    fn oracle_examples() {
        let policy = TruncationPolicy::default();
        let p = reference();
        assert!(close(raw_moment_oracle(&p, 0, 1.0, &policy).unwrap(), 1.0, 1e-12));
        let classical = OperatorParams::mihesan(7, 0.0).unwrap();
        assert!(close(raw_moment_oracle(&classical, 1, 2.0, &policy).unwrap(), 2.0, 1e-10));
        assert!(close(raw_moment_oracle(&p, 2, 1.0, &policy).unwrap(), 152.75 / 144.0, 1e-10));
    }

    // Exact raw moments agree with the series to high order, including the
    // orders whose printed formulas are not trusted.
    #[test]
    fn factorial_route_matches_series() {
        let policy = TruncationPolicy::default();
        for (n, a, al, be) in [(5u64, 0.0, 0.0, 0.0), (10, 1.0, 1.0, 2.0), (50, 3.0, 2.0, 2.0)] {
            let p = OperatorParams::new(n, a, al, be).unwrap();
            for x in [0.5, 2.0] {
                for j in 0..=6 {
                    let exact = raw_moment_factorial(&p, j, x).unwrap();
                    let series = raw_moment_oracle(&p, j, x, &policy).unwrap();
                    assert!((exact - series).abs() <= 1e-11 * series.abs(), "{p:?} x={x} j={j}");
                }
            }
        }
    }

    #[test]
    fn classical_variance() {
        for n in [3u64, 17, 400] {
            let p = OperatorParams::mihesan(n, 0.0).unwrap();
            for x in [0.25, 1.0, 4.0] {
                let v = central_moment_derived(&p, 2, x).unwrap();
                let expected = x * (1.0 + x) / n as f64;
                assert!((v - expected).abs() <= 1e-10 * expected);
            }
        }
    }

    #[test]
    fn reference_audits() {
        let policy = TruncationPolicy::default();
        let p = reference();
        let r = audit_lemma(LemmaId::StancuII, &p, 1.0, &policy);
        assert_eq!(r.verdict, Verdict::Match);
        assert!(r.rel_diff <= 1e-8);
        let r = audit_lemma(LemmaId::CentralPsi2, &p, 1.0, &policy);
        assert_eq!(r.verdict, Verdict::Match);
        assert!(close(r.derived_value.unwrap(), 20.75 / 144.0, 1e-14));
        let r = audit_lemma(LemmaId::MihesanT4, &p, 1.0, &policy);
        assert_eq!(r.verdict, Verdict::Discrepancy);
        assert_eq!(r.params, OperatorParams::mihesan(10, 1.0).unwrap());
        let r = audit_lemma(LemmaId::MihesanT4Corrected, &p, 1.0, &policy);
        assert_eq!(r.verdict, Verdict::Match);
    }

    // lim n²·L(ψ⁴) = 3x²(1+x)² regardless of (a, α, β): the fourth central
    // moment of an asymptotically normal law with variance x(1+x)/n.
    #[test]
    fn fourth_moment_limit() {
        let policy = TruncationPolicy::default();
        let ladder = doubling_ladder(6, 13);
        for (a, al, be) in [(0.0, 0.0, 0.0), (1.0, 1.0, 2.0)] {
            for x in [0.5, 2.0] {
                let [p1, p2, p4] = estimate_limits(a, al, be, x, &ladder, &policy).unwrap();
                let truth4 = 3.0 * x * x * (1.0 + x) * (1.0 + x);
                assert!((p4.limit() - truth4).abs() <= 1e-3 * truth4, "{} vs {truth4}", p4.limit());
                let t1 = asymptotic_limit(a, al, be, LimitKind::Psi1TimesN, x);
                assert!((p1.limit() - t1).abs() <= 1e-4);
                assert!((p2.limit() - x * (1.0 + x)).abs() <= 1e-4);
                assert_eq!(p4.tail().len(), 3);
            }
        }
    }

    #[test]
    fn lemma_ids_round_trip() {
        for id in LemmaId::ALL {
            assert_eq!(id.as_str().parse::<LemmaId>().unwrap(), id);
        }
        assert!("2.2.vi".parse::<LemmaId>().is_err());
    }

    #[test]
    fn empty_grid_is_rejected() {
        let mut g = AuditGrid::smoke();
        g.xs.clear();
        assert!(audit_grid(&g, &TruncationPolicy::default(), &AuditConfig::default()).is_err());
    }
}
