//! Max-consensus in multi-agent systems over fading wireless multiple-access
//! channels.
//!
//! A set of `n > 1` agents, connected by a directed graph, agrees on the
//! largest initial information state. Instead of scheduling interference-free
//! transmissions, agents broadcast simultaneously and each receiver exploits
//! the channel superposition to obtain a convex combination of its neighbors'
//! states, which is enough to run a max-consensus protocol.
//!
//! The crate is organized along the processing chain:
//!
//! * [`graph`] — directed communication topologies and connectivity analysis;
//! * [`channel`] — fading-coefficient models and the multiple-access
//!   superposition primitive;
//! * [`airlink`] — the scaling/pilot/de-scaling round that turns one
//!   synchronized broadcast into the receiver input `u_i`;
//! * [`baseband`] — the M-symbol complex-baseband transceiver with explicit
//!   noise statistics;
//! * [`protocols`] — the standard, asymptotic and finite-time switching
//!   consensus state machines plus Lyapunov diagnostics;
//! * [`nomographic`] — smooth max approximations and their failure mode under
//!   the analog pipeline;
//! * [`harness`] — scenario files, batch experiments, the TDMA comparison
//!   study and CSV/JSON artifacts.
//!
//! All randomness flows through [`rng::StreamFactory`], a counter-based
//! stream-splitting generator, so every artifact is a pure function of
//! `(configuration, seed)`.

pub mod airlink;
pub mod baseband;
pub mod channel;
pub mod graph;
pub mod harness;
pub mod nomographic;
pub mod protocols;
pub mod rng;

mod numeric;
