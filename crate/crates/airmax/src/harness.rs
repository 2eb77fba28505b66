//! Scenario files, experiment drivers and artifact formats.
//!
//! A scenario JSON fully describes one reproducible run: topology (explicit
//! or randomly generated), initial states, channel model, protocol, link and
//! stopping rule, all keyed by a 64-bit seed. Batch experiments and the
//! TDMA comparison study derive per-trial seeds from a base seed, so results
//! are identical regardless of worker count or scheduling.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airlink::{receive_round, SignalRanges};
use crate::baseband::{estimate_fhat, BasebandConfig, ComplexChannelDraw};
use crate::channel::{draw_coefficients, ChannelModel};
use crate::graph::{random_strongly_connected, DirectedTopology, NodeId};
use crate::nomographic::FailurePoint;
use crate::protocols::{
    run, LinkError, ProtocolError, ProtocolKind, RoundLink, RunPlan, RunResult,
};
use crate::rng::{derive_seed, StreamFactory, StreamKey};

/// Arc probability used for randomly generated comparison topologies.
const TDMA_TOPOLOGY_DENSITY: f64 = 0.2;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario field `{field}`: {message}")]
    InvalidField { field: String, message: String },
    #[error("could not parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("comparison trial (n={n}, trial={trial}) did not converge within {max_iters} iterations")]
    TrialDidNotConverge { n: u32, trial: u32, max_iters: u64 },
    #[error("malformed csv at line {line}: {message}")]
    MalformedCsv { line: usize, message: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

fn invalid(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::InvalidField { field: field.to_string(), message: message.into() }
}

/// Topology description: either an explicit arc list or a random generator
/// spec. Exactly one of the two forms must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arcs: Option<Vec<(NodeId, NodeId)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomTopologySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTopologySpec {
    pub n: u32,
    pub density: f64,
    pub seed: u64,
}

impl TopologySpec {
    pub fn explicit(g: &DirectedTopology) -> Self {
        Self {
            n: Some(g.node_count()),
            arcs: Some(g.arcs().collect()),
            random: None,
        }
    }

    pub fn random(n: u32, density: f64, seed: u64) -> Self {
        Self { n: None, arcs: None, random: Some(RandomTopologySpec { n, density, seed }) }
    }

    fn resolve(&self) -> Result<DirectedTopology, HarnessError> {
        match (&self.random, self.n, &self.arcs) {
            (Some(spec), None, None) => {
                let mut rng = StreamFactory::new(spec.seed).stream(StreamKey::Topology);
                random_strongly_connected(spec.n, spec.density, &mut rng)
                    .map_err(|e| invalid("topology.random", e.to_string()))
            }
            (None, Some(n), Some(arcs)) => DirectedTopology::new(n, arcs.iter().copied())
                .map_err(|e| invalid("topology", e.to_string())),
            _ => Err(invalid(
                "topology",
                "provide either {n, arcs} or {random: {n, density, seed}}",
            )),
        }
    }
}

/// Initial states: an explicit vector or uniform draws over `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0Spec {
    Explicit(Vec<f64>),
    Keyword(X0Keyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum X0Keyword {
    Random,
}

/// Communication backend selection: the abstract noiseless airlink or the
/// M-symbol baseband transceiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinkSpec {
    Keyword(LinkKeyword),
    Baseband { baseband: BasebandParams },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKeyword {
    Airlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasebandParams {
    pub m: usize,
    pub noise_sigma2: f64,
    pub pilot_noise_sigma2: f64,
}

impl Default for LinkSpec {
    fn default() -> Self {
        LinkSpec::Keyword(LinkKeyword::Airlink)
    }
}

fn default_rel_tol() -> f64 {
    1e-9
}

fn default_max_iters() -> u64 {
    10_000
}

fn default_version() -> u32 {
    1
}

/// Full description of one reproducible experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub topology: TopologySpec,
    pub x0: X0Spec,
    pub channel: ChannelModel,
    pub protocol: ProtocolKind,
    #[serde(default)]
    pub link: LinkSpec,
    #[serde(default)]
    pub ranges: SignalRanges,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: u64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Parses and schema-checks a scenario document.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-level validation beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.version != 1 {
            return Err(invalid("version", format!("unsupported version {}", self.version)));
        }
        let topology = self.topology.resolve()?;
        if let X0Spec::Explicit(values) = &self.x0 {
            if values.len() != topology.node_count() as usize {
                return Err(invalid(
                    "x0",
                    format!(
                        "{} entries for a {}-node topology",
                        values.len(),
                        topology.node_count()
                    ),
                ));
            }
            for (i, &v) in values.iter().enumerate() {
                if !self.ranges.contains(v) {
                    return Err(invalid(
                        "x0",
                        format!(
                            "entry {i} = {v} outside S = [{}, {}]",
                            self.ranges.s_min(),
                            self.ranges.s_max()
                        ),
                    ));
                }
            }
        }
        self.channel.validate().map_err(|e| invalid("channel", e.to_string()))?;
        if let LinkSpec::Baseband { baseband } = &self.link {
            BasebandConfig::new(
                baseband.m,
                baseband.noise_sigma2,
                baseband.pilot_noise_sigma2,
                self.ranges,
            )
            .map_err(|e| invalid("link.baseband", e.to_string()))?;
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(invalid("rel_tol", format!("must be positive, got {}", self.rel_tol)));
        }
        Ok(())
    }

    /// The topology this scenario runs on. Deterministic: random specs
    /// regenerate the identical graph from their own seed.
    pub fn resolve_topology(&self) -> Result<DirectedTopology, HarnessError> {
        self.topology.resolve()
    }

    fn resolve_x0(&self, g: &DirectedTopology) -> Result<Vec<f64>, HarnessError> {
        match &self.x0 {
            X0Spec::Explicit(values) => Ok(values.clone()),
            X0Spec::Keyword(X0Keyword::Random) => {
                let mut rng = StreamFactory::new(self.seed).stream(StreamKey::InitialStates);
                Ok((0..g.node_count())
                    .map(|_| {
                        rand::Rng::random_range(
                            &mut rng,
                            self.ranges.s_min()..=self.ranges.s_max(),
                        )
                    })
                    .collect())
            }
        }
    }
}

/// Over-the-air backend: redraws real fading coefficients per
/// `(iteration, receiver)` from dedicated streams and runs the abstract
/// scaling/pilot round.
pub struct AirlinkBackend {
    ranges: SignalRanges,
    model: ChannelModel,
    streams: StreamFactory,
}

impl AirlinkBackend {
    pub fn new(ranges: SignalRanges, model: ChannelModel, streams: StreamFactory) -> Self {
        Self { ranges, model, streams }
    }
}

impl RoundLink for AirlinkBackend {
    fn round_input(
        &mut self,
        iteration: u64,
        receiver: NodeId,
        states: &BTreeMap<NodeId, f64>,
    ) -> Result<f64, LinkError> {
        let mut rng = self.streams.stream(StreamKey::FadingRound { iteration, receiver });
        let draw = draw_coefficients(
            &self.model,
            receiver,
            &states.keys().copied().collect(),
            &mut rng,
        )?;
        Ok(receive_round(&self.ranges, states, &draw)?)
    }
}

/// Baseband backend: complex slow-fading coefficients plus the full
/// M-symbol modulate/superpose/de-scale round.
pub struct BasebandBackend {
    cfg: BasebandConfig,
    model: ChannelModel,
    streams: StreamFactory,
}

impl BasebandBackend {
    pub fn new(cfg: BasebandConfig, model: ChannelModel, streams: StreamFactory) -> Self {
        Self { cfg, model, streams }
    }
}

impl RoundLink for BasebandBackend {
    fn round_input(
        &mut self,
        iteration: u64,
        receiver: NodeId,
        states: &BTreeMap<NodeId, f64>,
    ) -> Result<f64, LinkError> {
        let mut coeff_rng =
            self.streams.stream(StreamKey::ComplexRound { iteration, receiver });
        let draw = ComplexChannelDraw::sample(
            &self.model,
            receiver,
            states.keys().copied(),
            &mut coeff_rng,
        )?;
        let mut round_rng =
            self.streams.stream(StreamKey::BasebandRound { iteration, receiver });
        let fhat = estimate_fhat(&self.cfg, states, &draw, &mut round_rng)?;
        // Residual noise can push the estimate outside the state space; the
        // receiver projects back into S (the de-scaling codomain) so the
        // next round's power scaling stays defined.
        Ok(fhat.clamp(self.cfg.ranges.s_min(), self.cfg.ranges.s_max()))
    }
}

/// Runs one scenario end to end. Fully deterministic per `(config, seed)`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    let graph = cfg.resolve_topology()?;
    let x0 = cfg.resolve_x0(&graph)?;
    let plan = RunPlan {
        graph: &graph,
        x0,
        protocol: cfg.protocol,
        rel_tol: cfg.rel_tol,
        max_iters: cfg.max_iters,
    };
    let streams = StreamFactory::new(cfg.seed);
    let result = match &cfg.link {
        LinkSpec::Keyword(LinkKeyword::Airlink) => {
            let mut link = AirlinkBackend::new(cfg.ranges, cfg.channel.clone(), streams);
            run(&plan, Some(&mut link))?
        }
        LinkSpec::Baseband { baseband } => {
            let bb_cfg = BasebandConfig::new(
                baseband.m,
                baseband.noise_sigma2,
                baseband.pilot_noise_sigma2,
                cfg.ranges,
            )
            .map_err(|e| invalid("link.baseband", e.to_string()))?;
            let mut link = BasebandBackend::new(bb_cfg, cfg.channel.clone(), streams);
            run(&plan, Some(&mut link))?
        }
    };
    Ok(result)
}

/// Runs many named scenarios on a worker pool; output order and bytes are
/// independent of scheduling.
pub fn run_batch(
    scenarios: &[(String, ScenarioConfig)],
) -> Vec<(String, Result<RunResult, HarnessError>)> {
    scenarios
        .par_iter()
        .map(|(name, cfg)| (name.clone(), run_scenario(cfg)))
        .collect()
}

/// One TDMA comparison trial: slot counts of the standard protocol
/// (`n` slots per iteration) and the finite-time superposition protocol
/// (2 slots per iteration) on the identical topology and initial states.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRecord {
    pub n: u32,
    pub trial: u32,
    pub k_t_slots: u64,
    pub k_b_slots: u64,
    pub ratio: f64,
}

/// Randomized comparison study over network sizes `n_min..=n_max` with
/// `trials_per_n` runs each. Per trial, a random strongly connected topology
/// and uniform initial states are drawn from a seed derived from
/// `(base_seed, n, trial)`; the channel redraws coefficients each iteration.
pub fn compare_tdma(
    n_min: u32,
    n_max: u32,
    trials_per_n: u32,
    channel: &ChannelModel,
    base_seed: u64,
) -> Result<Vec<ComparisonRecord>, HarnessError> {
    if !(3..=100).contains(&n_min) || !(3..=100).contains(&n_max) || n_min > n_max {
        return Err(invalid("n_range", format!("need 3 <= {n_min} <= {n_max} <= 100")));
    }
    if trials_per_n == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    channel.validate().map_err(|e| invalid("channel", e.to_string()))?;

    let jobs: Vec<(u32, u32)> = (n_min..=n_max)
        .flat_map(|n| (0..trials_per_n).map(move |trial| (n, trial)))
        .collect();
    jobs.into_par_iter()
        .map(|(n, trial)| comparison_trial(n, trial, channel, base_seed))
        .collect()
}

fn comparison_trial(
    n: u32,
    trial: u32,
    channel: &ChannelModel,
    base_seed: u64,
) -> Result<ComparisonRecord, HarnessError> {
    let seed = derive_seed(base_seed, u64::from(n), u64::from(trial));
    let factory = StreamFactory::new(seed);
    let ranges = SignalRanges::default();

    let build_topology = || {
        let mut rng = factory.stream(StreamKey::Topology);
        random_strongly_connected(n, TDMA_TOPOLOGY_DENSITY, &mut rng)
            .map_err(|e| invalid("topology.random", e.to_string()))
    };
    let graph = build_topology()?;
    let mut x0_rng = factory.stream(StreamKey::InitialStates);
    let x0: Vec<f64> = (0..n)
        .map(|_| rand::Rng::random_range(&mut x0_rng, ranges.s_min()..=ranges.s_max()))
        .collect();

    let standard = run(
        &RunPlan {
            graph: &graph,
            x0: x0.clone(),
            protocol: ProtocolKind::Standard,
            rel_tol: 1e-9,
            max_iters: u64::from(n) + 2,
        },
        None,
    )?;

    // Both protocols must see the very same experiment: regenerate and check.
    let regenerated = build_topology()?;
    debug_assert_eq!(graph.digest(), regenerated.digest());
    let max_iters = 10_000;
    let mut link = AirlinkBackend::new(ranges, channel.clone(), factory.clone());
    let ftc = run(
        &RunPlan {
            graph: &regenerated,
            x0,
            protocol: ProtocolKind::Ftc,
            rel_tol: 1e-9,
            max_iters,
        },
        Some(&mut link),
    )?;
    if !standard.converged || !ftc.converged {
        return Err(HarnessError::TrialDidNotConverge { n, trial, max_iters });
    }
    Ok(ComparisonRecord {
        n,
        trial,
        k_t_slots: standard.slots,
        k_b_slots: ftc.slots,
        ratio: standard.slots as f64 / ftc.slots as f64,
    })
}

/// Converged/iterations/slots summary, serialized to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub converged: bool,
    pub iterations: u64,
    pub slots: u64,
    pub x_star: f64,
}

impl From<&RunResult> for RunSummary {
    fn from(result: &RunResult) -> Self {
        Self {
            converged: result.converged,
            iterations: result.iterations,
            slots: result.slots,
            x_star: result.x_star,
        }
    }
}

pub fn summary_json(result: &RunResult) -> String {
    let mut text = serde_json::to_string_pretty(&RunSummary::from(result))
        .expect("summary serialization cannot fail");
    text.push('\n');
    text
}

/// One flattened trace row, as stored in trace CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub agent: u32,
    pub x: f64,
    pub y: bool,
    pub t_window: u64,
    pub u: f64,
    pub v_lyapunov: f64,
}

pub const TRACE_CSV_HEADER: &str = "k,agent,x,y,t_window,u,v_lyapunov";

/// Serializes a run trace as CSV, one row per `(iteration, agent)`.
/// Floats print in shortest round-trip form, so emitted bytes are a pure
/// function of the run and parse back exactly.
pub fn trace_csv(result: &RunResult) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for rec in &result.trace {
        for agent in 0..rec.x.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                rec.k,
                agent,
                rec.x[agent],
                u8::from(rec.y[agent]),
                rec.t_window,
                rec.u[agent],
                rec.v_lyapunov,
            ));
        }
    }
    out
}

fn csv_field<T: std::str::FromStr>(
    field: Option<&str>,
    line: usize,
    name: &str,
) -> Result<T, HarnessError> {
    field
        .ok_or_else(|| HarnessError::MalformedCsv {
            line,
            message: format!("missing column {name}"),
        })?
        .parse()
        .map_err(|_| HarnessError::MalformedCsv {
            line,
            message: format!("bad value for column {name}"),
        })
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_CSV_HEADER => {}
        _ => {
            return Err(HarnessError::MalformedCsv {
                line: 1,
                message: format!("expected header `{TRACE_CSV_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let k = csv_field(fields.next(), idx + 1, "k")?;
        let agent = csv_field(fields.next(), idx + 1, "agent")?;
        let x = csv_field(fields.next(), idx + 1, "x")?;
        let y: u8 = csv_field(fields.next(), idx + 1, "y")?;
        let t_window = csv_field(fields.next(), idx + 1, "t_window")?;
        let u = csv_field(fields.next(), idx + 1, "u")?;
        let v_lyapunov = csv_field(fields.next(), idx + 1, "v_lyapunov")?;
        if y > 1 || fields.next().is_some() {
            return Err(HarnessError::MalformedCsv {
                line: idx + 1,
                message: "unexpected trailing data".into(),
            });
        }
        rows.push(TraceRow { k, agent, x, y: y != 0, t_window, u, v_lyapunov });
    }
    Ok(rows)
}

pub const COMPARISON_CSV_HEADER: &str = "n,trial,k_t_slots,k_b_slots,ratio";

pub fn comparison_csv(records: &[ComparisonRecord]) -> String {
    let mut out = String::from(COMPARISON_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n, r.trial, r.k_t_slots, r.k_b_slots, r.ratio
        ));
    }
    out
}

pub fn parse_comparison_csv(text: &str) -> Result<Vec<ComparisonRecord>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == COMPARISON_CSV_HEADER => {}
        _ => {
            return Err(HarnessError::MalformedCsv {
                line: 1,
                message: format!("expected header `{COMPARISON_CSV_HEADER}`"),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        records.push(ComparisonRecord {
            n: csv_field(fields.next(), idx + 1, "n")?,
            trial: csv_field(fields.next(), idx + 1, "trial")?,
            k_t_slots: csv_field(fields.next(), idx + 1, "k_t_slots")?,
            k_b_slots: csv_field(fields.next(), idx + 1, "k_b_slots")?,
            ratio: csv_field(fields.next(), idx + 1, "ratio")?,
        });
        if fields.next().is_some() {
            return Err(HarnessError::MalformedCsv {
                line: idx + 1,
                message: "unexpected trailing data".into(),
            });
        }
    }
    Ok(records)
}

pub const FAILURE_CSV_HEADER: &str = "p,abs_error";

pub fn failure_csv(points: &[FailurePoint]) -> String {
    let mut out = String::from(FAILURE_CSV_HEADER);
    out.push('\n');
    for point in points {
        out.push_str(&format!("{},{}\n", point.p, point.abs_error));
    }
    out
}

pub fn parse_failure_csv(text: &str) -> Result<Vec<FailurePoint>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == FAILURE_CSV_HEADER => {}
        _ => {
            return Err(HarnessError::MalformedCsv {
                line: 1,
                message: format!("expected header `{FAILURE_CSV_HEADER}`"),
            })
        }
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        points.push(FailurePoint {
            p: csv_field(fields.next(), idx + 1, "p")?,
            abs_error: csv_field(fields.next(), idx + 1, "abs_error")?,
        });
        if fields.next().is_some() {
            return Err(HarnessError::MalformedCsv {
                line: idx + 1,
                message: "unexpected trailing data".into(),
            });
        }
    }
    Ok(points)
}
