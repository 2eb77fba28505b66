//! Fading coefficients and the wireless multiple-access superposition.
//!
//! When a set of agents transmits simultaneously, receiver `i` observes
//! `z_i = Σ_j ξ_ij ω_j`: each signal attenuated by an unknown positive real
//! coefficient, then summed by the channel. Coefficients are redrawn
//! independently per iteration and per transmitter-receiver pair
//! (fast fading), and receiver noise is neglected (high-SNR regime).

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal, Open01};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::numeric::kahan_sum;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("constant channel coefficient must be positive, got {0}")]
    NonPositiveConstant(f64),
    #[error("rayleigh scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("rician k-factor must be nonnegative, got {0}")]
    NegativeKFactor(f64),
    #[error("transmitter set is empty")]
    EmptyTransmitterSet,
    #[error("signal keys do not match the coefficient draw")]
    TransmitterMismatch,
}

/// Distribution of the per-link fading coefficient `ξ_ij(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChannelModel {
    /// Fixed gain, identical for every link. Models the non-fading case.
    Constant { value: f64 },
    /// Rayleigh magnitude with density `x/scale^2 * exp(-x^2 / (2 scale^2))`;
    /// the non-line-of-sight case.
    Rayleigh { scale: f64 },
    /// Rician magnitude with line-of-sight component `scale * sqrt(2 k_factor)`;
    /// reduces to Rayleigh at `k_factor = 0`.
    Rician { k_factor: f64, scale: f64 },
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            ChannelModel::Constant { value } if value <= 0.0 => {
                Err(ChannelError::NonPositiveConstant(value))
            }
            ChannelModel::Rayleigh { scale } if scale <= 0.0 => {
                Err(ChannelError::NonPositiveScale(scale))
            }
            ChannelModel::Rician { scale, .. } if scale <= 0.0 => {
                Err(ChannelError::NonPositiveScale(scale))
            }
            ChannelModel::Rician { k_factor, .. } if k_factor < 0.0 => {
                Err(ChannelError::NegativeKFactor(k_factor))
            }
            _ => Ok(()),
        }
    }

    /// One strictly positive coefficient.
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            ChannelModel::Constant { value } => value,
            ChannelModel::Rayleigh { scale } => loop {
                let u: f64 = Open01.sample(rng);
                let v = scale * (-2.0 * (1.0 - u).ln()).sqrt();
                if v > 0.0 {
                    break v;
                }
            },
            ChannelModel::Rician { k_factor, scale } => {
                let los = scale * (2.0 * k_factor).sqrt();
                let normal = Normal::new(0.0, scale).expect("validated scale");
                loop {
                    let re: f64 = los + normal.sample(rng);
                    let im: f64 = normal.sample(rng);
                    let v = re.hypot(im);
                    if v > 0.0 {
                        break v;
                    }
                }
            }
        }
    }
}

/// One iteration's coefficient realization `ξ_ij(k)` at a single receiver,
/// keyed by transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientDraw {
    receiver: NodeId,
    values: BTreeMap<NodeId, f64>,
}

impl CoefficientDraw {
    /// Wraps explicit coefficients; every value must be positive.
    pub fn from_values(
        receiver: NodeId,
        values: BTreeMap<NodeId, f64>,
    ) -> Result<Self, ChannelError> {
        if values.is_empty() {
            return Err(ChannelError::EmptyTransmitterSet);
        }
        if let Some((_, &v)) = values.iter().find(|(_, &v)| v <= 0.0) {
            return Err(ChannelError::NonPositiveConstant(v));
        }
        Ok(Self { receiver, values })
    }

    pub fn receiver(&self) -> NodeId {
        self.receiver
    }

    pub fn values(&self) -> &BTreeMap<NodeId, f64> {
        &self.values
    }

    pub fn transmitters(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.values.keys().copied()
    }
}

/// Draws one independent coefficient per `(transmitter, receiver)` pair.
/// Transmitters are consumed in ascending id order, so a draw is a pure
/// function of `(model, transmitter set, generator state)`.
pub fn draw_coefficients(
    model: &ChannelModel,
    receiver: NodeId,
    transmitters: &BTreeSet<NodeId>,
    rng: &mut impl Rng,
) -> Result<CoefficientDraw, ChannelError> {
    model.validate()?;
    if transmitters.is_empty() {
        return Err(ChannelError::EmptyTransmitterSet);
    }
    let values = transmitters.iter().map(|&j| (j, model.sample(rng))).collect();
    Ok(CoefficientDraw { receiver, values })
}

/// Normalized channel coefficients `h_ij = ξ_ij / Σ_q ξ_iq`: strictly
/// positive convex weights summing to one.
pub fn normalize(draw: &CoefficientDraw) -> BTreeMap<NodeId, f64> {
    let total = kahan_sum(draw.values.values().copied());
    draw.values.iter().map(|(&j, &v)| (j, v / total)).collect()
}

/// Channel output `z_i = Σ_j ξ_ij ω_j` for one synchronized transmission;
/// no additive term, receiver noise being neglected.
pub fn wmac_superpose(
    signals: &BTreeMap<NodeId, f64>,
    draw: &CoefficientDraw,
) -> Result<f64, ChannelError> {
    if signals.len() != draw.values.len()
        || !signals.keys().eq(draw.values.keys())
    {
        return Err(ChannelError::TransmitterMismatch);
    }
    Ok(kahan_sum(
        signals.iter().map(|(j, &omega)| draw.values[j] * omega),
    ))
}
