//! Transmitter/receiver processing for one synchronized broadcast round.
//!
//! Each transmitter maps its state through the affine power scaling
//! `Φ(x) = αx + β` with `α = (P_max − P_min)/(S_max − S_min)` and
//! `β = P_min − α·S_min`, and additionally sends the constant pilot `Φ(1)`
//! on an orthogonal signal through the same fading coefficients. From the two
//! superposed observations
//!
//! ```text
//! r_i  = Σ_j ξ_ij (α x_j + β)          r'_i = (α + β) Σ_j ξ_ij
//! ```
//!
//! the receiver forms `Ψ(r_i, r'_i) = (r_i − β/(α+β)·r'_i)/α` and
//! `u_i = (α+β)·Ψ/r'_i`, which equals `Σ_j h_ij x_j` with the normalized
//! coefficients `h_ij`: a convex combination of the transmitted states,
//! obtained without knowing any individual `ξ_ij`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::CoefficientDraw;
use crate::graph::NodeId;
use crate::numeric::kahan_sum;

#[derive(Debug, Error, PartialEq)]
pub enum AirlinkError {
    #[error("state range invalid: s_min {0} must be below s_max {1}")]
    InvalidStateRange(f64, f64),
    #[error("power range invalid: need 0 <= p_min < p_max, got [{0}, {1}]")]
    InvalidPowerRange(f64, f64),
    #[error("pilot power alpha + beta = {0} must be positive")]
    NonPositivePilot(f64),
    #[error("state {0} outside S = [{1}, {2}]")]
    StateOutOfRange(f64, f64, f64),
    #[error("transmitted states are empty")]
    EmptyRound,
    #[error("state keys do not match the coefficient draw")]
    TransmitterMismatch,
}

/// State range `S = [s_min, s_max]` and transmit power range
/// `P = [p_min, p_max]`, fixing the scaling coefficients `α` and `β`.
///
/// The pilot `Φ(1) = α + β` must be positive: the receiver divides by the
/// pilot observation `r'_i`, which carries that factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RangesRepr", into = "RangesRepr")]
pub struct SignalRanges {
    s_min: f64,
    s_max: f64,
    p_min: f64,
    p_max: f64,
}

/// Wire form: `{"s": [0.0, 10.0], "p": [1.0, 5.0]}`.
#[derive(Serialize, Deserialize)]
struct RangesRepr {
    s: [f64; 2],
    p: [f64; 2],
}

impl TryFrom<RangesRepr> for SignalRanges {
    type Error = AirlinkError;

    fn try_from(repr: RangesRepr) -> Result<Self, AirlinkError> {
        SignalRanges::new((repr.s[0], repr.s[1]), (repr.p[0], repr.p[1]))
    }
}

impl From<SignalRanges> for RangesRepr {
    fn from(r: SignalRanges) -> Self {
        RangesRepr { s: [r.s_min, r.s_max], p: [r.p_min, r.p_max] }
    }
}

impl Default for SignalRanges {
    /// `S = [0, 10]`, `P = [1, 5]`. The positive `P_min` keeps the high-SNR
    /// premise; the returned `u_i` does not depend on the power bounds.
    fn default() -> Self {
        Self { s_min: 0.0, s_max: 10.0, p_min: 1.0, p_max: 5.0 }
    }
}

impl SignalRanges {
    pub fn new(s: (f64, f64), p: (f64, f64)) -> Result<Self, AirlinkError> {
        let (s_min, s_max) = s;
        let (p_min, p_max) = p;
        if !s_min.is_finite() || !s_max.is_finite() || s_min >= s_max {
            return Err(AirlinkError::InvalidStateRange(s_min, s_max));
        }
        if !p_min.is_finite() || !p_max.is_finite() || p_min < 0.0 || p_min >= p_max {
            return Err(AirlinkError::InvalidPowerRange(p_min, p_max));
        }
        let ranges = Self { s_min, s_max, p_min, p_max };
        let alpha = ranges.alpha();
        if alpha <= 0.0 || !alpha.is_finite() {
            // Ranges wide enough to underflow the scaling gain cannot be
            // de-scaled.
            return Err(AirlinkError::InvalidStateRange(s_min, s_max));
        }
        let pilot = alpha + ranges.beta();
        if pilot <= 0.0 || pilot.is_nan() {
            return Err(AirlinkError::NonPositivePilot(pilot));
        }
        Ok(ranges)
    }

    pub fn s_min(&self) -> f64 {
        self.s_min
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn alpha(&self) -> f64 {
        (self.p_max - self.p_min) / (self.s_max - self.s_min)
    }

    pub fn beta(&self) -> f64 {
        self.p_min - self.alpha() * self.s_min
    }

    pub fn contains(&self, x: f64) -> bool {
        self.s_min <= x && x <= self.s_max
    }
}

/// Power scaling `Φ(x) = αx + β`, defined on `S` only.
pub fn scale(ranges: &SignalRanges, x: f64) -> Result<f64, AirlinkError> {
    if !ranges.contains(x) {
        return Err(AirlinkError::StateOutOfRange(x, ranges.s_min, ranges.s_max));
    }
    Ok(ranges.alpha() * x + ranges.beta())
}

/// The dummy pilot signal `Φ(1) = α + β`, identical for all transmitters.
pub fn pilot(ranges: &SignalRanges) -> f64 {
    ranges.alpha() + ranges.beta()
}

/// One complete broadcast round at a single receiver: scales every
/// transmitted state, superposes data and pilot through the same coefficient
/// draw, de-scales and normalizes.
///
/// The result equals `Σ_j h_ij x_j`, a convex combination of the inputs; the
/// final value is clamped into `[min x_j, max x_j]` so the convex-hull
/// guarantee survives floating-point summation exactly.
pub fn receive_round(
    ranges: &SignalRanges,
    states: &BTreeMap<NodeId, f64>,
    draw: &CoefficientDraw,
) -> Result<f64, AirlinkError> {
    if states.is_empty() {
        return Err(AirlinkError::EmptyRound);
    }
    if states.len() != draw.values().len() || !states.keys().eq(draw.values().keys()) {
        return Err(AirlinkError::TransmitterMismatch);
    }
    let alpha = ranges.alpha();
    let beta = ranges.beta();
    let pilot_power = alpha + beta;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut data_terms = Vec::with_capacity(states.len());
    for (j, &x) in states {
        let mu = scale(ranges, x)?;
        data_terms.push(draw.values()[j] * mu);
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let r = kahan_sum(data_terms);
    let r_pilot = pilot_power * kahan_sum(draw.values().values().copied());

    let descaled = (r - beta / pilot_power * r_pilot) / alpha;
    let u = pilot_power * descaled / r_pilot;
    Ok(u.clamp(lo, hi))
}
