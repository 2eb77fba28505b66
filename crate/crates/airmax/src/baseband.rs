//! M-symbol complex-baseband transceiver.
//!
//! The detailed analog scheme behind the abstract broadcast round: each
//! transmitter modulates `µ_j = sqrt(Φ(x_j))` onto `M` random-phase symbols,
//! the channel applies one complex slow-fading coefficient `ξ_jl` per link
//! plus AWGN, and the receiver averages the phases out through the squared
//! norm:
//!
//! ```text
//! Γ(r) = ‖r‖²/M − σ_n²          γ'_l = Γ(r'_l) = Σ_q |ξ_ql|²
//! Ψ(γ, γ') = (γ − β γ')/α       f̂_l = γ_l/γ'_l = Σ_j h_lj x_j
//! ```
//!
//! with `h_lj = |ξ_jl|²/Σ_q |ξ_ql|²`. The residual noise term
//! `Δ = (Δ₁ + Δ₂ + Δ₃)/M` has conditional mean `σ_n²` and a closed-form
//! variance that vanishes as `M` grows, which is what justifies treating the
//! abstract link of [`crate::airlink`] as noiseless.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::airlink::{scale, AirlinkError, SignalRanges};
use crate::channel::ChannelModel;
use crate::graph::NodeId;
use crate::numeric::kahan_sum;

#[derive(Debug, Error, PartialEq)]
pub enum BasebandError {
    #[error("symbol count M must be at least 1")]
    InvalidSymbolCount,
    #[error("noise variance must be nonnegative, got {0}")]
    NegativeNoiseVariance(f64),
    #[error("transmitted states are empty")]
    EmptyRound,
    #[error("wave keys do not match the coefficient draw")]
    TransmitterMismatch,
    #[error("wave for transmitter {0} has {1} symbols, expected {2}")]
    SymbolLengthMismatch(NodeId, usize, usize),
    #[error("pilot power estimate {0} is not positive; SNR assumption violated")]
    PilotPowerNonPositive(f64),
    #[error(transparent)]
    Scaling(#[from] AirlinkError),
}

/// Symbol count, data/pilot noise variances and the shared scaling ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasebandConfig {
    pub m: usize,
    pub noise_sigma2: f64,
    pub pilot_noise_sigma2: f64,
    pub ranges: SignalRanges,
}

impl BasebandConfig {
    pub fn new(
        m: usize,
        noise_sigma2: f64,
        pilot_noise_sigma2: f64,
        ranges: SignalRanges,
    ) -> Result<Self, BasebandError> {
        if m == 0 {
            return Err(BasebandError::InvalidSymbolCount);
        }
        if noise_sigma2 < 0.0 {
            return Err(BasebandError::NegativeNoiseVariance(noise_sigma2));
        }
        if pilot_noise_sigma2 < 0.0 {
            return Err(BasebandError::NegativeNoiseVariance(pilot_noise_sigma2));
        }
        Ok(Self { m, noise_sigma2, pilot_noise_sigma2, ranges })
    }

    /// High-SNR demonstration setup: `M = 256`, `σ_n² = σ'_n² = 1e-4`.
    pub fn demo(ranges: SignalRanges) -> Self {
        Self { m: 256, noise_sigma2: 1e-4, pilot_noise_sigma2: 1e-4, ranges }
    }
}

/// First and second moment of one link's complex coefficient; the mean is
/// the real line-of-sight component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientStats {
    pub mean: f64,
    pub variance: f64,
}

/// One slow-fading realization `ξ_jl` per transmitter: constant across all
/// `M` symbols of an iteration, shared by data and pilot channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannelDraw {
    receiver: NodeId,
    values: BTreeMap<NodeId, Complex64>,
    stats: BTreeMap<NodeId, CoefficientStats>,
}

impl ComplexChannelDraw {
    pub fn from_values(
        receiver: NodeId,
        values: BTreeMap<NodeId, Complex64>,
        stats: BTreeMap<NodeId, CoefficientStats>,
    ) -> Result<Self, BasebandError> {
        if values.is_empty() {
            return Err(BasebandError::EmptyRound);
        }
        if !values.keys().eq(stats.keys()) {
            return Err(BasebandError::TransmitterMismatch);
        }
        Ok(Self { receiver, values, stats })
    }

    /// Samples the complex-Gaussian counterpart of a fading model: the
    /// magnitude of a `Rayleigh { scale }` draw matches `CN(0, 2 scale²)`,
    /// `Rician` adds the real line-of-sight mean `scale·sqrt(2 k)`.
    pub fn sample(
        model: &ChannelModel,
        receiver: NodeId,
        transmitters: impl IntoIterator<Item = NodeId>,
        rng: &mut impl Rng,
    ) -> Result<Self, BasebandError> {
        let mut values = BTreeMap::new();
        let mut stats = BTreeMap::new();
        for j in transmitters {
            let (value, stat) = match *model {
                ChannelModel::Constant { value } => {
                    (Complex64::new(value, 0.0), CoefficientStats { mean: value, variance: 0.0 })
                }
                ChannelModel::Rayleigh { scale } => {
                    let normal = Normal::new(0.0, scale).expect("positive scale");
                    (
                        Complex64::new(normal.sample(rng), normal.sample(rng)),
                        CoefficientStats { mean: 0.0, variance: 2.0 * scale * scale },
                    )
                }
                ChannelModel::Rician { k_factor, scale } => {
                    let los = scale * (2.0 * k_factor).sqrt();
                    let normal = Normal::new(0.0, scale).expect("positive scale");
                    (
                        Complex64::new(los + normal.sample(rng), normal.sample(rng)),
                        CoefficientStats { mean: los, variance: 2.0 * scale * scale },
                    )
                }
            };
            values.insert(j, value);
            stats.insert(j, stat);
        }
        Self::from_values(receiver, values, stats)
    }

    pub fn receiver(&self) -> NodeId {
        self.receiver
    }

    pub fn values(&self) -> &BTreeMap<NodeId, Complex64> {
        &self.values
    }

    pub fn stats(&self) -> &BTreeMap<NodeId, CoefficientStats> {
        &self.stats
    }
}

fn random_phases(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..m).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect()
}

/// Amplitude modulation of one state onto `M` unit-modulus random-phase
/// symbols: every entry has squared magnitude `Φ(x)`.
pub fn modulate(
    cfg: &BasebandConfig,
    x: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>, BasebandError> {
    let mu = scale(&cfg.ranges, x)?.sqrt();
    Ok(random_phases(cfg.m, rng)
        .into_iter()
        .map(|theta| Complex64::from_polar(mu, theta))
        .collect())
}

/// The pilot wave: unit amplitude (`µ'_j = 1`) on fresh random phases.
pub fn pilot_wave(cfg: &BasebandConfig, rng: &mut impl Rng) -> Vec<Complex64> {
    random_phases(cfg.m, rng)
        .into_iter()
        .map(|theta| Complex64::from_polar(1.0, theta))
        .collect()
}

fn superpose(
    cfg: &BasebandConfig,
    waves: &BTreeMap<NodeId, Vec<Complex64>>,
    draw: &ComplexChannelDraw,
    noise_sigma2: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>, BasebandError> {
    if waves.is_empty() {
        return Err(BasebandError::EmptyRound);
    }
    if !waves.keys().eq(draw.values.keys()) {
        return Err(BasebandError::TransmitterMismatch);
    }
    for (&j, wave) in waves {
        if wave.len() != cfg.m {
            return Err(BasebandError::SymbolLengthMismatch(j, wave.len(), cfg.m));
        }
    }
    let mut received = vec![Complex64::new(0.0, 0.0); cfg.m];
    for (j, wave) in waves {
        let xi = draw.values[j];
        for (acc, &w) in received.iter_mut().zip(wave) {
            *acc += xi * w;
        }
    }
    if noise_sigma2 > 0.0 {
        let component = Normal::new(0.0, (noise_sigma2 / 2.0).sqrt()).expect("nonnegative");
        for r in &mut received {
            *r += Complex64::new(component.sample(rng), component.sample(rng));
        }
    }
    Ok(received)
}

/// Channel output for one symbol block: `r[m] = Σ_j ξ_jl ω_j[m] + η[m]`
/// with complex AWGN of total variance `σ_n²` from the config.
pub fn receive_raw(
    cfg: &BasebandConfig,
    waves: &BTreeMap<NodeId, Vec<Complex64>>,
    draw: &ComplexChannelDraw,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>, BasebandError> {
    superpose(cfg, waves, draw, cfg.noise_sigma2, rng)
}

/// Phase-averaging power estimate `Γ(r) = ‖r‖²/M − σ²`.
pub fn gamma(cfg: &BasebandConfig, r: &[Complex64], sigma2: f64) -> f64 {
    assert_eq!(r.len(), cfg.m, "received block must hold M symbols");
    kahan_sum(r.iter().map(|c| c.norm_sqr())) / cfg.m as f64 - sigma2
}

/// Full transceiver round: modulate data and pilot for every transmitter,
/// superpose both channels through the same coefficients, apply `Γ` with the
/// respective noise variances, de-scale and return `f̂ = γ_l / γ'_l`.
///
/// Fails when the pilot power estimate is not positive, which signals a
/// noise realization outside the high-SNR regime the scheme assumes.
pub fn estimate_fhat(
    cfg: &BasebandConfig,
    states: &BTreeMap<NodeId, f64>,
    draw: &ComplexChannelDraw,
    rng: &mut impl Rng,
) -> Result<f64, BasebandError> {
    if states.is_empty() {
        return Err(BasebandError::EmptyRound);
    }
    if !states.keys().eq(draw.values.keys()) {
        return Err(BasebandError::TransmitterMismatch);
    }
    let mut data_waves = BTreeMap::new();
    let mut pilot_waves = BTreeMap::new();
    for (&j, &x) in states {
        data_waves.insert(j, modulate(cfg, x, rng)?);
        pilot_waves.insert(j, pilot_wave(cfg, rng));
    }
    let r_data = superpose(cfg, &data_waves, draw, cfg.noise_sigma2, rng)?;
    let r_pilot = superpose(cfg, &pilot_waves, draw, cfg.pilot_noise_sigma2, rng)?;

    let gamma_data = gamma(cfg, &r_data, cfg.noise_sigma2);
    let gamma_pilot = gamma(cfg, &r_pilot, cfg.pilot_noise_sigma2);
    if gamma_pilot <= 0.0 {
        return Err(BasebandError::PilotPowerNonPositive(gamma_pilot));
    }
    let alpha = cfg.ranges.alpha();
    let beta = cfg.ranges.beta();
    let descaled = (gamma_data - beta * gamma_pilot) / alpha;
    Ok(descaled / gamma_pilot)
}

/// Closed-form conditional moments of the residual `Δ = (Δ₁+Δ₂+Δ₃)/M` given
/// the modulation amplitudes: mean `σ_n²` and variance
///
/// ```text
/// [ 2 Σ_j Σ_{p>j} µ_j²µ_p² s_j s_p + 2 σ_n² Σ_j µ_j² s_j + σ_n⁴ ] / M
/// ```
///
/// with `s_j = σ_ξj² − ξ̄_j²`. The bracket alone is the `M = 1` variance;
/// the `1/M` factor is what makes `Δ − σ_n²` vanish for long symbol blocks.
pub fn noise_moments(
    cfg: &BasebandConfig,
    mus: &BTreeMap<NodeId, f64>,
    draw_stats: &BTreeMap<NodeId, CoefficientStats>,
) -> (f64, f64) {
    assert!(
        mus.keys().eq(draw_stats.keys()),
        "amplitudes and coefficient stats must cover the same transmitters"
    );
    let spreads: Vec<(f64, f64)> = mus
        .iter()
        .map(|(j, &mu)| {
            let s = draw_stats[j];
            (mu * mu, s.variance - s.mean * s.mean)
        })
        .collect();
    let mut cross = 0.0;
    for (j, &(mu2_j, s_j)) in spreads.iter().enumerate() {
        for &(mu2_p, s_p) in &spreads[j + 1..] {
            cross += mu2_j * mu2_p * s_j * s_p;
        }
    }
    let sn2 = cfg.noise_sigma2;
    let direct: f64 = spreads.iter().map(|&(mu2, s)| mu2 * s).sum();
    let variance = (2.0 * cross + 2.0 * sn2 * direct + sn2 * sn2) / cfg.m as f64;
    (sn2, variance)
}

/// One Monte-Carlo sample of the residual, computed directly from the norm
/// decomposition as `Δ = ‖r‖²/M − Σ_j µ_j² |ξ_j|²`.
pub fn noise_delta_sample(
    cfg: &BasebandConfig,
    mus: &BTreeMap<NodeId, f64>,
    draw: &ComplexChannelDraw,
    rng: &mut impl Rng,
) -> Result<f64, BasebandError> {
    if !mus.keys().eq(draw.values.keys()) {
        return Err(BasebandError::TransmitterMismatch);
    }
    let waves: BTreeMap<NodeId, Vec<Complex64>> = mus
        .iter()
        .map(|(&j, &mu)| {
            let wave = random_phases(cfg.m, rng)
                .into_iter()
                .map(|theta| Complex64::from_polar(mu, theta))
                .collect();
            (j, wave)
        })
        .collect();
    let r = superpose(cfg, &waves, draw, cfg.noise_sigma2, rng)?;
    let signal: f64 =
        kahan_sum(mus.iter().map(|(j, &mu)| mu * mu * draw.values[j].norm_sqr()));
    Ok(kahan_sum(r.iter().map(|c| c.norm_sqr())) / cfg.m as f64 - signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{StreamFactory, StreamKey};
    use rand_chacha::ChaCha12Rng;

    fn cfg(m: usize, sn2: f64) -> BasebandConfig {
        BasebandConfig::new(m, sn2, sn2, SignalRanges::default()).unwrap()
    }

    fn rng_for(seed: u64, k: u64, receiver: NodeId) -> ChaCha12Rng {
        StreamFactory::new(seed).stream(StreamKey::BasebandRound { iteration: k, receiver })
    }

    fn unit_draw(transmitters: &[NodeId]) -> ComplexChannelDraw {
        ComplexChannelDraw::from_values(
            0,
            transmitters.iter().map(|&j| (j, Complex64::new(1.0, 0.0))).collect(),
            transmitters
                .iter()
                .map(|&j| (j, CoefficientStats { mean: 1.0, variance: 0.0 }))
                .collect(),
        )
        .unwrap()
    }

    fn gaussian_draw(transmitters: &[NodeId], seed: u64) -> ComplexChannelDraw {
        let mut rng = StreamFactory::new(seed).stream(StreamKey::ComplexRound {
            iteration: 0,
            receiver: 0,
        });
        ComplexChannelDraw::sample(
            &ChannelModel::Rayleigh { scale: (0.5f64).sqrt() },
            0,
            transmitters.iter().copied(),
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn modulated_symbols_carry_the_scaled_power() {
        let cfg = cfg(32, 0.0);
        let wave = modulate(&cfg, 5.0, &mut rng_for(1, 0, 0)).unwrap();
        for symbol in &wave {
            assert!((symbol.norm_sqr() - 3.0).abs() < 1e-12);
        }
        let boundary = modulate(&cfg, 10.0, &mut rng_for(1, 0, 0)).unwrap();
        assert!((boundary[0].norm_sqr() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn modulate_is_deterministic_and_range_checked() {
        let cfg = cfg(8, 0.0);
        let a = modulate(&cfg, 2.5, &mut rng_for(3, 1, 2)).unwrap();
        let b = modulate(&cfg, 2.5, &mut rng_for(3, 1, 2)).unwrap();
        assert_eq!(a, b);
        assert!(modulate(&cfg, 11.0, &mut rng_for(3, 1, 2)).is_err());
    }

    #[test]
    fn noiseless_single_transmitter_passes_through() {
        let cfg = cfg(16, 0.0);
        let mut rng = rng_for(5, 0, 0);
        let wave = modulate(&cfg, 4.0, &mut rng).unwrap();
        let waves = BTreeMap::from([(1u32, wave.clone())]);
        let draw = ComplexChannelDraw::from_values(
            0,
            BTreeMap::from([(1, Complex64::new(1.0, 0.0))]),
            BTreeMap::from([(1, CoefficientStats { mean: 1.0, variance: 0.0 })]),
        )
        .unwrap();
        let r = receive_raw(&cfg, &waves, &draw, &mut rng).unwrap();
        assert_eq!(r, wave);
    }

    #[test]
    fn noiseless_superposition_is_exactly_linear() {
        let cfg = cfg(8, 0.0);
        let mut rng = rng_for(6, 0, 0);
        let w1 = modulate(&cfg, 1.0, &mut rng).unwrap();
        let w2 = modulate(&cfg, 9.0, &mut rng).unwrap();
        let draw = gaussian_draw(&[1, 2], 6);
        let waves = BTreeMap::from([(1u32, w1.clone()), (2u32, w2.clone())]);
        let r = receive_raw(&cfg, &waves, &draw, &mut rng).unwrap();
        let xi1 = draw.values()[&1];
        let xi2 = draw.values()[&2];
        for m in 0..cfg.m {
            let expected = xi1 * w1[m] + xi2 * w2[m];
            assert!((r[m] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn additive_noise_power_matches_sigma2() {
        let sn2 = 0.04;
        let cfg = cfg(64, sn2);
        let mut rng = rng_for(7, 0, 0);
        let draw = unit_draw(&[1]);
        let mut total = 0.0;
        let reps = 2000;
        for _ in 0..reps {
            let wave = modulate(&cfg, 5.0, &mut rng).unwrap();
            let waves = BTreeMap::from([(1u32, wave.clone())]);
            let r = receive_raw(&cfg, &waves, &draw, &mut rng).unwrap();
            total += r
                .iter()
                .zip(&wave)
                .map(|(got, &clean)| (got - clean).norm_sqr())
                .sum::<f64>()
                / cfg.m as f64;
        }
        let empirical = total / reps as f64;
        assert!(
            (empirical - sn2).abs() / sn2 < 0.05,
            "noise power {empirical} vs {sn2}"
        );
    }

    #[test]
    fn gamma_examples() {
        let cfg = cfg(8, 0.0);
        let zeros = vec![Complex64::new(0.0, 0.0); 8];
        assert_eq!(gamma(&cfg, &zeros, 0.0), 0.0);

        let twos = vec![Complex64::new(2.0, 0.0); 8];
        assert_eq!(gamma(&cfg, &twos, 1.0), 3.0);

        // Norm is invariant under a per-symbol phase rotation.
        let rotated: Vec<Complex64> = twos
            .iter()
            .enumerate()
            .map(|(m, &c)| c * Complex64::from_polar(1.0, 0.7 * m as f64))
            .collect();
        assert!((gamma(&cfg, &rotated, 1.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_transmitter_estimate_recovers_the_state() {
        let cfg = cfg(1, 0.0);
        let states = BTreeMap::from([(1u32, 3.7)]);
        let draw = gaussian_draw(&[1], 8);
        let fhat = estimate_fhat(&cfg, &states, &draw, &mut rng_for(8, 0, 0)).unwrap();
        assert!((fhat - 3.7).abs() < 1e-12, "fhat {fhat}");
    }

    #[test]
    fn equal_states_estimate_the_common_value() {
        // The cross-term residual scales like 1/sqrt(M); at M = 512 with
        // states around 6 its median sits near 0.1.
        let cfg = cfg(512, 0.0);
        let states: BTreeMap<NodeId, f64> = (1..=4).map(|j| (j, 6.18)).collect();
        let mut errors: Vec<f64> = (0..21)
            .map(|trial| {
                let draw = gaussian_draw(&[1, 2, 3, 4], 9_000 + trial);
                let fhat =
                    estimate_fhat(&cfg, &states, &draw, &mut rng_for(trial, 0, 0)).unwrap();
                (fhat - 6.18).abs()
            })
            .collect();
        errors.sort_by(f64::total_cmp);
        assert!(errors[10] < 0.5, "median error {}", errors[10]);
    }

    #[test]
    fn large_m_estimate_approaches_weighted_average() {
        // Unit ranges keep the modulation amplitudes at or below one, where
        // the M = 4096 cross-term residual sits well under 1e-2.
        let ranges = SignalRanges::new((0.0, 1.0), (0.0, 1.0)).unwrap();
        let cfg = BasebandConfig::new(4096, 0.0, 0.0, ranges).unwrap();
        let states = BTreeMap::from([(1u32, 0.2), (2u32, 0.8)]);
        let mut errors: Vec<f64> = (0..100)
            .map(|trial| {
                let draw = gaussian_draw(&[1, 2], 20_000 + trial);
                let g1 = draw.values()[&1].norm_sqr();
                let g2 = draw.values()[&2].norm_sqr();
                let expected = (g1 * 0.2 + g2 * 0.8) / (g1 + g2);
                let fhat =
                    estimate_fhat(&cfg, &states, &draw, &mut rng_for(trial, 1, 0)).unwrap();
                (fhat - expected).abs()
            })
            .collect();
        errors.sort_by(f64::total_cmp);
        assert!(errors[50] < 1e-2, "median error {}", errors[50]);
    }

    #[test]
    fn cross_term_error_decays_with_m() {
        let states = BTreeMap::from([(1u32, 2.0), (2u32, 8.0)]);
        let mut medians = Vec::new();
        for (mi, &m) in [16usize, 256, 4096].iter().enumerate() {
            let cfg = cfg(m, 0.0);
            let mut errors: Vec<f64> = (0..100)
                .map(|trial| {
                    let draw = gaussian_draw(&[1, 2], 1_000 + trial);
                    let g1 = draw.values()[&1].norm_sqr();
                    let g2 = draw.values()[&2].norm_sqr();
                    let expected = (g1 * 2.0 + g2 * 8.0) / (g1 + g2);
                    let fhat = estimate_fhat(
                        &cfg,
                        &states,
                        &draw,
                        &mut rng_for(trial, mi as u64, 0),
                    )
                    .unwrap();
                    (fhat - expected).abs()
                })
                .collect();
            errors.sort_by(f64::total_cmp);
            medians.push(errors[errors.len() / 2]);
        }
        assert!(
            medians[0] > medians[1] && medians[1] > medians[2],
            "medians {medians:?}"
        );
    }

    #[test]
    fn noise_moments_closed_forms() {
        // No noise, single transmitter: no cross-terms at all.
        let single = cfg(4, 0.0);
        let stats = BTreeMap::from([(1u32, CoefficientStats { mean: 0.0, variance: 1.0 })]);
        let mus = BTreeMap::from([(1u32, 2.0)]);
        assert_eq!(noise_moments(&single, &mus, &stats), (0.0, 0.0));

        // Two zero-mean unit-variance users, unit amplitudes, M = 1.
        let pair = cfg(1, 0.0);
        let stats: BTreeMap<NodeId, CoefficientStats> = (1..=2)
            .map(|j| (j, CoefficientStats { mean: 0.0, variance: 1.0 }))
            .collect();
        let mus: BTreeMap<NodeId, f64> = (1..=2).map(|j| (j, 1.0)).collect();
        assert_eq!(noise_moments(&pair, &mus, &stats), (0.0, 2.0));

        // The mean is always exactly the data-channel noise variance.
        let noisy = cfg(64, 0.01);
        assert_eq!(noise_moments(&noisy, &mus, &stats).0, 0.01);
    }

    #[test]
    fn delta_samples_match_closed_form_moments() {
        // Reduced version of the Monte-Carlo consistency check; the
        // acceptance suite runs the full 10^4-realization version.
        let cfg = cfg(16, 0.01);
        let ids: Vec<NodeId> = (1..=4).collect();
        let mus: BTreeMap<NodeId, f64> = ids.iter().map(|&j| (j, 1.0)).collect();
        let mut rng = rng_for(12, 0, 0);
        let mut draw_rng = StreamFactory::new(12).stream(StreamKey::ComplexRound {
            iteration: 0,
            receiver: 0,
        });
        let reps = 4000;
        let mut samples = Vec::with_capacity(reps);
        let mut stats_ref = None;
        for _ in 0..reps {
            let draw = ComplexChannelDraw::sample(
                &ChannelModel::Rayleigh { scale: (0.5f64).sqrt() },
                0,
                ids.iter().copied(),
                &mut draw_rng,
            )
            .unwrap();
            stats_ref.get_or_insert_with(|| draw.stats().clone());
            samples.push(noise_delta_sample(&cfg, &mus, &draw, &mut rng).unwrap());
        }
        let mean = samples.iter().sum::<f64>() / reps as f64;
        let var = samples.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / (reps - 1) as f64;
        let (expected_mean, expected_var) = noise_moments(&cfg, &mus, &stats_ref.unwrap());
        assert!((mean - expected_mean).abs() < 4.0 * (expected_var / reps as f64).sqrt());
        assert!(
            (var - expected_var).abs() / expected_var < 0.2,
            "var {var} vs {expected_var}"
        );
    }

    #[test]
    fn pathological_pilot_noise_is_reported() {
        // Huge pilot noise variance drives the pilot power estimate negative.
        let cfg = BasebandConfig::new(1, 0.0, 1e6, SignalRanges::default()).unwrap();
        let states = BTreeMap::from([(1u32, 5.0)]);
        let draw = ComplexChannelDraw::from_values(
            0,
            BTreeMap::from([(1, Complex64::new(1e-3, 0.0))]),
            BTreeMap::from([(1, CoefficientStats { mean: 0.0, variance: 1.0 })]),
        )
        .unwrap();
        let err = estimate_fhat(&cfg, &states, &draw, &mut rng_for(1, 0, 0)).unwrap_err();
        assert!(matches!(err, BasebandError::PilotPowerNonPositive(_)));
    }

    #[test]
    fn config_validation() {
        assert_eq!(
            BasebandConfig::new(0, 0.0, 0.0, SignalRanges::default()).unwrap_err(),
            BasebandError::InvalidSymbolCount
        );
        assert!(BasebandConfig::new(4, -0.1, 0.0, SignalRanges::default()).is_err());
    }
}
