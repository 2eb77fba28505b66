//! The three max-consensus state machines.
//!
//! * **Standard**: `x_i(k+1) = max_{j ∈ N_i ∪ {i}} x_j(k)`. Needs every
//!   neighbor state individually, so one iteration costs `n` TDMA slots. On
//!   a strongly connected graph it converges within the diameter bound.
//!
//! * **Asymptotic**: agents broadcast simultaneously; the channel hands each
//!   receiver the convex combination `u_i` of its *authorized* neighbors'
//!   states. The update
//!
//!   ```text
//!   x_i(k+1) = max(x_i(k), u_i(k))
//!   y_i(k+1) = 1  iff  x_i(k) ≥ u_i(k)
//!   ```
//!
//!   keeps exactly the maximal candidates broadcasting. One iteration costs
//!   2 slots (data + pilot) regardless of `n`. Convergence is asymptotic in
//!   general, certified by the Lyapunov function
//!   `V = 2n·x* − Σ_i (x_i(k) + x_i(k−1))`.
//!
//! * **Finite-time switching**: as above, except at switch steps
//!   `k = 2·T(k)` the authorization becomes the running product
//!   `y_i(k+1) = Π_{t=T(k)}^k y_i(t)` and the window doubles (`T(k+1) = k`).
//!   Every agent that progressed inside the window goes silent, so the
//!   remaining broadcasters are maximal and their neighborhoods snap to `x*`;
//!   the doubling windows eventually cover the silencing horizon and the
//!   system reaches max-consensus in finitely many iterations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airlink::AirlinkError;
use crate::baseband::BasebandError;
use crate::channel::ChannelError;
use crate::graph::{DirectedTopology, GraphError, NodeId};
use crate::numeric::kahan_sum;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error(transparent)]
    Airlink(#[from] AirlinkError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Baseband(#[from] BasebandError),
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("state vector has {0} entries for a {1}-node topology")]
    StateLengthMismatch(usize, u32),
    #[error("the {0} protocol requires a strongly connected topology")]
    RequiresStrongConnectivity(&'static str),
    #[error("the {0} protocol requires a communication backend")]
    MissingLink(&'static str),
    #[error("vector lengths differ: {0} vs {1}")]
    VectorLengthMismatch(usize, usize),
    #[error("lyapunov reference {0} is below the largest state component {1}")]
    InvalidEquilibrium(f64, f64),
    #[error("max_iters must be at least 1")]
    InvalidMaxIters,
    #[error("rel_tol must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// Which consensus state machine to iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Standard,
    Asymptotic,
    Ftc,
}

impl ProtocolKind {
    fn name(self) -> &'static str {
        match self {
            ProtocolKind::Standard => "standard",
            ProtocolKind::Asymptotic => "asymptotic",
            ProtocolKind::Ftc => "ftc",
        }
    }

    /// Communication slots one iteration costs: `n` sequential TDMA slots
    /// for the standard protocol, 2 (data + pilot) for superposition.
    pub fn slots_per_iteration(self, n: u32) -> u64 {
        match self {
            ProtocolKind::Standard => u64::from(n),
            ProtocolKind::Asymptotic | ProtocolKind::Ftc => 2,
        }
    }
}

/// Supplies the received input `u_i` for one broadcast round. `states` holds
/// the authorized in-neighbors' information states and is never empty.
pub trait RoundLink {
    fn round_input(
        &mut self,
        iteration: u64,
        receiver: NodeId,
        states: &BTreeMap<NodeId, f64>,
    ) -> Result<f64, LinkError>;
}

/// Joint protocol state `w(k) = [x(k); y(k)]` plus the switching window.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    /// Information states `x_i(k)`.
    pub x: Vec<f64>,
    /// Authorization variables `y_i(k)`; `y_i(0) = 1`.
    pub y: Vec<bool>,
    /// Switching window `T(k)`, shared by all agents; starts at 2.
    pub t_window: u64,
    /// Running product `Π_{t=T(k)}^k y_i(t)` over the current window
    /// (finite-time protocol only; the empty product is true).
    pub y_products: Vec<bool>,
    /// Iteration counter.
    pub k: u64,
}

impl ConsensusState {
    pub fn new(x0: Vec<f64>) -> Self {
        let n = x0.len();
        Self {
            x: x0,
            y: vec![true; n],
            t_window: 2,
            y_products: vec![true; n],
            k: 0,
        }
    }

    pub fn agent_count(&self) -> usize {
        self.x.len()
    }
}

/// Result of advancing the state machine by one iteration.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next: ConsensusState,
    /// Received inputs; `u_i = 0` where no authorized in-neighbor exists.
    pub u: Vec<f64>,
    /// Communication slots consumed by this iteration.
    pub slots_consumed: u64,
}

fn check_dimensions(
    g: &DirectedTopology,
    state: &ConsensusState,
) -> Result<(), ProtocolError> {
    if state.agent_count() != g.node_count() as usize {
        return Err(ProtocolError::StateLengthMismatch(
            state.agent_count(),
            g.node_count(),
        ));
    }
    Ok(())
}

/// One iteration of the standard protocol. The recorded `u_i` is the largest
/// in-neighbor state (zero for agents without in-neighbors).
pub fn step_standard(
    g: &DirectedTopology,
    state: &ConsensusState,
) -> Result<StepOutcome, ProtocolError> {
    check_dimensions(g, state)?;
    let n = state.agent_count();
    let mut u = vec![0.0; n];
    let mut x_next = state.x.clone();
    for i in 0..n {
        let neighbors = g.in_neighbors(i as NodeId)?;
        if !neighbors.is_empty() {
            u[i] = neighbors
                .iter()
                .map(|&j| state.x[j as usize])
                .fold(f64::NEG_INFINITY, f64::max);
        }
        x_next[i] = state.x[i].max(u[i]);
    }
    let next = ConsensusState {
        x: x_next,
        y: state.y.clone(),
        t_window: state.t_window,
        y_products: state.y_products.clone(),
        k: state.k + 1,
    };
    Ok(StepOutcome {
        next,
        u,
        slots_consumed: ProtocolKind::Standard.slots_per_iteration(g.node_count()),
    })
}

/// Shared superposition round: gather each receiver's authorized in-neighbor
/// states, obtain `u_i` from the backend (zero for an empty set), and apply
/// the max update.
fn superposition_round(
    g: &DirectedTopology,
    state: &ConsensusState,
    link: &mut dyn RoundLink,
) -> Result<(Vec<f64>, Vec<f64>), ProtocolError> {
    let n = state.agent_count();
    let mut u = vec![0.0; n];
    let mut x_next = state.x.clone();
    for i in 0..n {
        let authorized: BTreeMap<NodeId, f64> = g
            .in_neighbors(i as NodeId)?
            .iter()
            .filter(|&&j| state.y[j as usize])
            .map(|&j| (j, state.x[j as usize]))
            .collect();
        if !authorized.is_empty() {
            u[i] = link.round_input(state.k, i as NodeId, &authorized)?;
        }
        x_next[i] = state.x[i].max(u[i]);
    }
    Ok((x_next, u))
}

/// One iteration of the asymptotic protocol: max update plus the indicator
/// authorization `y_i(k+1) = 1 iff x_i(k) ≥ u_i(k)` (ties keep authorization).
pub fn step_asymptotic(
    g: &DirectedTopology,
    state: &ConsensusState,
    link: &mut dyn RoundLink,
) -> Result<StepOutcome, ProtocolError> {
    check_dimensions(g, state)?;
    let (x_next, u) = superposition_round(g, state, link)?;
    let y_next = state.x.iter().zip(&u).map(|(&x, &ui)| x >= ui).collect();
    let next = ConsensusState {
        x: x_next,
        y: y_next,
        t_window: state.t_window,
        y_products: state.y_products.clone(),
        k: state.k + 1,
    };
    Ok(StepOutcome { next, u, slots_consumed: 2 })
}

/// One iteration of the finite-time switching protocol.
///
/// At switch steps `k = 2·T(k)` the authorization becomes the window product
/// `Π_{t=T(k)}^k y_i(t)` and the window advances (`T ← k`); in between, the
/// indicator rule applies and the product accumulates. The stored product
/// resets to `y(k+1)` after a switch — `y(k+1)` already carries the factor
/// `y(k)` shared by the old and new windows. `y(1)` never enters a product:
/// the first window starts at `t = T(0) = 2`.
pub fn step_ftc(
    g: &DirectedTopology,
    state: &ConsensusState,
    link: &mut dyn RoundLink,
) -> Result<StepOutcome, ProtocolError> {
    check_dimensions(g, state)?;
    let (x_next, u) = superposition_round(g, state, link)?;
    let k = state.k;
    let next = if k == 2 * state.t_window {
        let y_next = state.y_products.clone();
        ConsensusState {
            x: x_next,
            y: y_next.clone(),
            t_window: k,
            y_products: y_next,
            k: k + 1,
        }
    } else {
        let y_next: Vec<bool> =
            state.x.iter().zip(&u).map(|(&x, &ui)| x >= ui).collect();
        let y_products = if k + 1 >= state.t_window {
            state.y_products.iter().zip(&y_next).map(|(&p, &y)| p && y).collect()
        } else {
            state.y_products.clone()
        };
        ConsensusState {
            x: x_next,
            y: y_next,
            t_window: state.t_window,
            y_products,
            k: k + 1,
        }
    };
    Ok(StepOutcome { next, u, slots_consumed: 2 })
}

/// Closed-form window length `T(k) = 2^p(k)` with `p(k) = ⌈log₂(k) − 1⌉` for
/// `k ≥ 2` and `p(k) = 1` otherwise. Diagnostic cross-check only: at `k = 2`
/// it yields 1 while simulating the switching recurrence from `T(0) = 2`
/// yields 2. The recurrence is authoritative.
pub fn t_closed_form(k: u64) -> u64 {
    if k < 2 {
        return 2;
    }
    let ceil_log2 = 64 - u64::from((k - 1).leading_zeros());
    1 << (ceil_log2 - 1)
}

fn lyapunov_raw(now: &[f64], prev: &[f64], x_star: f64) -> f64 {
    let n = now.len() as f64;
    2.0 * n * x_star - kahan_sum(now.iter().chain(prev).copied())
}

/// Lyapunov certificate `V = 2n·x* − Σ_i (x_i(k) + x_i(k−1))`: zero exactly
/// at the consensus equilibrium, positive elsewhere, non-increasing along
/// trajectories of the asymptotic protocol.
pub fn lyapunov_v(
    state_now: &[f64],
    state_prev: &[f64],
    x_star: f64,
) -> Result<f64, ProtocolError> {
    if state_now.len() != state_prev.len() {
        return Err(ProtocolError::VectorLengthMismatch(
            state_now.len(),
            state_prev.len(),
        ));
    }
    let worst = state_now
        .iter()
        .chain(state_prev)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if x_star < worst {
        return Err(ProtocolError::InvalidEquilibrium(x_star, worst));
    }
    Ok(lyapunov_raw(state_now, state_prev, x_star))
}

/// Per-iteration snapshot: the state *after* `k` iterations together with
/// the inputs `u(k−1)` that produced it and the Lyapunov value `V(v(k))`
/// (with the `x(−1) := x(0)` convention at `k = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: u64,
    pub x: Vec<f64>,
    pub y: Vec<bool>,
    pub t_window: u64,
    pub u: Vec<f64>,
    pub v_lyapunov: f64,
}

/// Outcome of a full protocol run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub iterations: u64,
    pub slots: u64,
    pub x_star: f64,
}

/// A fully resolved simulation: topology, initial states, protocol and
/// stopping rule.
#[derive(Debug, Clone)]
pub struct RunPlan<'a> {
    pub graph: &'a DirectedTopology,
    pub x0: Vec<f64>,
    pub protocol: ProtocolKind,
    pub rel_tol: f64,
    pub max_iters: u64,
}

fn at_consensus(x: &[f64], x_star: f64, rel_tol: f64) -> bool {
    x.iter().all(|&xi| (xi - x_star).abs() <= rel_tol * x_star.abs().max(1.0))
}

/// Steps the chosen protocol until consensus (`max_i |x_i − x*|` within the
/// relative tolerance of the largest initial state) or `max_iters`.
///
/// `x*` is computed upfront from the initial states: convergence detection
/// is simulator instrumentation, not agent knowledge. Superposition
/// protocols refuse to start on a topology that is not strongly connected;
/// the standard protocol additionally stops at any exact fixed point, so it
/// terminates on disconnected graphs too (reporting `converged = false`).
pub fn run(plan: &RunPlan, mut link: Option<&mut dyn RoundLink>) -> Result<RunResult, ProtocolError> {
    let g = plan.graph;
    if plan.x0.len() != g.node_count() as usize {
        return Err(ProtocolError::StateLengthMismatch(plan.x0.len(), g.node_count()));
    }
    if plan.max_iters == 0 {
        return Err(ProtocolError::InvalidMaxIters);
    }
    if !(plan.rel_tol > 0.0 && plan.rel_tol.is_finite()) {
        return Err(ProtocolError::InvalidTolerance(plan.rel_tol));
    }
    if matches!(plan.protocol, ProtocolKind::Asymptotic | ProtocolKind::Ftc) {
        if !g.is_strongly_connected() {
            return Err(ProtocolError::RequiresStrongConnectivity(plan.protocol.name()));
        }
        if link.is_none() {
            return Err(ProtocolError::MissingLink(plan.protocol.name()));
        }
    }

    let x_star = plan.x0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut state = ConsensusState::new(plan.x0.clone());
    let mut prev_x = state.x.clone();
    let mut trace = vec![TraceRecord {
        k: 0,
        x: state.x.clone(),
        y: state.y.clone(),
        t_window: state.t_window,
        u: vec![0.0; state.agent_count()],
        v_lyapunov: lyapunov_raw(&state.x, &prev_x, x_star),
    }];
    let mut slots = 0u64;
    let mut converged = false;

    loop {
        if at_consensus(&state.x, x_star, plan.rel_tol) {
            converged = true;
            break;
        }
        if state.k >= plan.max_iters {
            break;
        }
        let outcome = match plan.protocol {
            ProtocolKind::Standard => step_standard(g, &state)?,
            ProtocolKind::Asymptotic => {
                step_asymptotic(g, &state, link.as_deref_mut().expect("checked"))?
            }
            ProtocolKind::Ftc => step_ftc(g, &state, link.as_deref_mut().expect("checked"))?,
        };
        if plan.protocol == ProtocolKind::Standard && outcome.next.x == state.x {
            // Exact fixed point short of consensus: only reachable when the
            // graph is not strongly connected. The probing step is not
            // counted as an iteration.
            break;
        }
        debug_assert!(
            state.x.iter().zip(&outcome.next.x).all(|(&a, &b)| a <= b),
            "information states must be non-decreasing"
        );
        slots += outcome.slots_consumed;
        prev_x.copy_from_slice(&state.x);
        state = outcome.next;
        trace.push(TraceRecord {
            k: state.k,
            x: state.x.clone(),
            y: state.y.clone(),
            t_window: state.t_window,
            u: outcome.u,
            v_lyapunov: lyapunov_raw(&state.x, &prev_x, x_star),
        });
    }

    Ok(RunResult { trace, converged, iterations: state.k, slots, x_star })
}
