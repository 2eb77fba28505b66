//! Nomographic approximations of the maximum.
//!
//! A function computable over the superposing channel must be a
//! post-processed sum of pre-processed inputs. Two such approximations of
//! `max` are provided, both converging to the true maximum as the sharpness
//! `p` grows:
//!
//! ```text
//! sum-of-powers:  ( Σ_j α_j x_j^p )^(1/p)
//! log-sum-exp:    (1/p) ln( Σ_j α_j e^(p x_j) )
//! ```
//!
//! The catch, and the reason the consensus protocols in this crate do *not*
//! use them: the pre-processed values span `[S_min^p, S_max^p]`, so the
//! power-scaling gain `α` of the analog pipeline collapses as `p` grows and
//! any receiver noise is amplified by `1/α` after de-scaling. Past a
//! moderate `p` the recovered maximum degrades instead of improving, and a
//! positive error compounds across consensus iterations by shifting the
//! running maximum upward. [`demo_failure_under_pipeline`] measures exactly
//! this trade-off.

use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::airlink::{AirlinkError, SignalRanges};
use crate::channel::{draw_coefficients, normalize, ChannelError, ChannelModel};
use crate::graph::NodeId;
use crate::numeric::kahan_sum;
use crate::rng::{StreamFactory, StreamKey};

#[derive(Debug, Error, PartialEq)]
pub enum NomographicError {
    #[error("input vector is empty")]
    EmptyInput,
    #[error("{0} inputs but {1} weights")]
    LengthMismatch(usize, usize),
    #[error("sum-of-powers requires positive inputs, got {0}")]
    NonPositiveInput(f64),
    #[error("sharpness p must be positive and finite, got {0}")]
    InvalidSharpness(f64),
    #[error("weights must be nonnegative with at least one positive entry")]
    InvalidWeights,
    #[error("pre-processing overflows for p = {0} over the configured state range")]
    PreScaleOverflow(f64),
    #[error("demo noise magnitude must be nonnegative, got {0}")]
    NegativeNoise(f64),
    #[error(transparent)]
    Pipeline(#[from] AirlinkError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Sharpness exponent and per-input weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NomographicConfig {
    p: f64,
    alphas: Vec<f64>,
}

impl NomographicConfig {
    pub fn new(p: f64, alphas: Vec<f64>) -> Result<Self, NomographicError> {
        if p.is_nan() || p <= 0.0 || !p.is_finite() {
            return Err(NomographicError::InvalidSharpness(p));
        }
        if alphas.iter().any(|&a| a < 0.0 || !a.is_finite())
            || !alphas.iter().any(|&a| a > 0.0)
        {
            return Err(NomographicError::InvalidWeights);
        }
        Ok(Self { p, alphas })
    }

    /// Uniform weights `α_j = 1/n`, keeping the pre-processed sum boundable.
    pub fn uniform(n: usize, p: f64) -> Result<Self, NomographicError> {
        Self::new(p, vec![1.0 / n as f64; n])
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

/// Which of the two approximations to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxApprox {
    SumOfPowers,
    LogSumExp,
}

fn check_lengths(xs: &[f64], cfg: &NomographicConfig) -> Result<(), NomographicError> {
    if xs.is_empty() {
        return Err(NomographicError::EmptyInput);
    }
    if xs.len() != cfg.alphas.len() {
        return Err(NomographicError::LengthMismatch(xs.len(), cfg.alphas.len()));
    }
    Ok(())
}

/// Largest input that actually enters the sum. Zero-weighted entries must
/// not serve as the stabilization reference: factoring by them can
/// underflow every contributing term to zero.
fn weighted_max(xs: &[f64], alphas: &[f64]) -> f64 {
    xs.iter()
        .zip(alphas)
        .filter(|(_, &a)| a > 0.0)
        .map(|(&x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `(Σ_j α_j x_j^p)^(1/p)`, evaluated in the max-factored log domain
/// `x_ref · (Σ_j α_j (x_j/x_ref)^p)^(1/p)` so large `p` neither overflows
/// nor loses the dominant term.
pub fn sum_of_powers(xs: &[f64], cfg: &NomographicConfig) -> Result<f64, NomographicError> {
    check_lengths(xs, cfg)?;
    if let Some(&bad) = xs.iter().find(|&&x| x <= 0.0 || x.is_nan()) {
        return Err(NomographicError::NonPositiveInput(bad));
    }
    let x_ref = weighted_max(xs, &cfg.alphas);
    let total = kahan_sum(
        xs.iter()
            .zip(&cfg.alphas)
            .filter(|(_, &a)| a > 0.0)
            .map(|(&x, &a)| a * (cfg.p * (x / x_ref).ln()).exp()),
    );
    Ok(x_ref * (total.ln() / cfg.p).exp())
}

/// `(1/p) ln(Σ_j α_j e^(p x_j))` with max-subtraction for overflow safety.
pub fn log_sum_exp(xs: &[f64], cfg: &NomographicConfig) -> Result<f64, NomographicError> {
    check_lengths(xs, cfg)?;
    let x_ref = weighted_max(xs, &cfg.alphas);
    let total = kahan_sum(
        xs.iter()
            .zip(&cfg.alphas)
            .filter(|(_, &a)| a > 0.0)
            .map(|(&x, &a)| a * (cfg.p * (x - x_ref)).exp()),
    );
    Ok(x_ref + total.ln() / cfg.p)
}

/// Signed approximation error `ε = f̂(xs, p) − max(xs)`.
pub fn approximation_error(
    xs: &[f64],
    cfg: &NomographicConfig,
    which: MaxApprox,
) -> Result<f64, NomographicError> {
    let fhat = match which {
        MaxApprox::SumOfPowers => sum_of_powers(xs, cfg)?,
        MaxApprox::LogSumExp => log_sum_exp(xs, cfg)?,
    };
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(fhat - x_max)
}

/// One sharpness step of the pipeline failure study.
#[derive(Debug, Clone, PartialEq)]
pub struct FailurePoint {
    pub p: f64,
    pub abs_error: f64,
}

const DEMO_TRIALS: u64 = 101;

/// Runs the pre-processed inputs (`x^p`, or `e^{p x}` for log-sum-exp)
/// through the analog pipeline and reports the median `|f̂ − max(xs)|` per
/// sharpness value.
///
/// The channel's normalized coefficients play the role of the weights `α_j`.
/// The de-scaling identity is applied in exact form (the noiseless channel
/// value *is* the convex combination), and additive Gaussian receiver noise
/// of magnitude `noise` (in transmit power units) is injected after
/// de-scaling, i.e. amplified by the inverse scaling gain `1/α` of the
/// pre-processed range. With `noise = 0` the error decays in `p` like the
/// pure approximation error; with any fixed positive noise the collapsing
/// gain eventually dominates and the error turns upward.
pub fn demo_failure_under_pipeline(
    xs: &[f64],
    p_values: &[f64],
    which: MaxApprox,
    ranges: &SignalRanges,
    noise: f64,
    seed: u64,
) -> Result<Vec<FailurePoint>, NomographicError> {
    if xs.is_empty() {
        return Err(NomographicError::EmptyInput);
    }
    if noise < 0.0 {
        return Err(NomographicError::NegativeNoise(noise));
    }
    for &x in xs {
        if !ranges.contains(x) {
            return Err(NomographicError::Pipeline(AirlinkError::StateOutOfRange(
                x,
                ranges.s_min(),
                ranges.s_max(),
            )));
        }
        if which == MaxApprox::SumOfPowers && (x <= 0.0 || x.is_nan()) {
            return Err(NomographicError::NonPositiveInput(x));
        }
    }
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let factory = StreamFactory::new(seed);
    let mut table = Vec::with_capacity(p_values.len());

    for (pi, &p) in p_values.iter().enumerate() {
        if p.is_nan() || p <= 0.0 || !p.is_finite() {
            return Err(NomographicError::InvalidSharpness(p));
        }
        let pre = |x: f64| match which {
            MaxApprox::SumOfPowers => x.powf(p),
            MaxApprox::LogSumExp => (p * x).exp(),
        };
        let post = |v: f64| match which {
            MaxApprox::SumOfPowers => v.powf(1.0 / p),
            MaxApprox::LogSumExp => v.ln() / p,
        };
        let lo = pre(ranges.s_min());
        let hi = pre(ranges.s_max());
        if !hi.is_finite() {
            return Err(NomographicError::PreScaleOverflow(p));
        }
        let pre_ranges = SignalRanges::new((lo, hi), (ranges.p_min(), ranges.p_max()))?;
        let pre_values: Vec<f64> = xs.iter().map(|&x| pre(x)).collect();
        let (pre_lo, pre_hi) = (pre(xs.iter().copied().fold(f64::INFINITY, f64::min)), pre(x_max));
        let amplification = 1.0 / pre_ranges.alpha();

        let mut errors: Vec<f64> = (0..DEMO_TRIALS)
            .map(|trial| {
                let mut rng = factory.stream(StreamKey::NomographicDemo {
                    index: (pi as u64) * DEMO_TRIALS + trial,
                });
                let draw = draw_coefficients(
                    &ChannelModel::Rayleigh { scale: 1.0 },
                    0,
                    &(0..xs.len() as NodeId).collect(),
                    &mut rng,
                )?;
                let h = normalize(&draw);
                let mut received = kahan_sum(
                    pre_values.iter().enumerate().map(|(j, &v)| h[&(j as NodeId)] * v),
                )
                .clamp(pre_lo, pre_hi);
                if noise > 0.0 {
                    let eta = Normal::new(0.0, noise).expect("positive noise").sample(&mut rng);
                    received += eta * amplification;
                }
                // A noise realization can push the estimate out of the
                // post-processing domain entirely; floor it just above zero
                // so the failure registers as a large error.
                let fhat = post(received.max(f64::MIN_POSITIVE));
                Ok((fhat - x_max).abs())
            })
            .collect::<Result<_, NomographicError>>()?;
        errors.sort_by(f64::total_cmp);
        table.push(FailurePoint { p, abs_error: errors[errors.len() / 2] });
    }
    Ok(table)
}
