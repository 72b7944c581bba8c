//! Stancu-shifted generalized Baskakov operators on `[0, ∞)`.
//!
//! The operator
//!
//! ```text
//! L(f; x) = Σ_k W_k(x) · f((k + α) / (n + β)),
//! W_k(x)  = e^{-a x/(1+x)} · p_k(n, a)/k! · x^k / (1+x)^{k+n}
//! ```
//!
//! is evaluated by truncated series summation. Around it sit closed-form
//! moment evaluators with a brute-force series oracle ([`moments`]), sampled
//! moduli of smoothness ([`smoothness`]) and checks of the known error bounds
//! and the Voronovskaya limit ([`theorems`]).

pub mod basis;
mod error;
pub mod extrapolate;
pub mod moments;
pub mod operator;
pub mod smoothness;
mod sum;
pub mod theorems;

pub use basis::{OperatorParams, TruncationPolicy, WeightSeries};
pub use error::{Error, Result};
pub use operator::{EvalResult, FunctionKind, FunctionSpec, GrowthClass};
pub use smoothness::{StepWeightExponent, Window};
