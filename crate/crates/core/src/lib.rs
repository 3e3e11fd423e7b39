//! Constructive-interference one-bit precoding for multiuser MIMO downlink
//! with M-PSK signalling.
//!
//! The core of the crate is [`penalty_solver`], which finds one-bit transmit
//! vectors through a negative-ℓ1 exact penalty solved by alternating
//! first-order updates. [`precoders`] puts it next to zero-forcing and
//! relaxation baselines and exact small-instance oracles, and [`sim`] runs
//! Monte-Carlo BER experiments over all of them.

pub mod ci_model;
pub mod cli;
pub mod numerics;
pub mod penalty_solver;
pub mod precoders;
pub mod sim;
pub mod verify;

pub use ci_model::{build_system, ci_objective, safety_margin, CiSystem, PskConstellation};
pub use numerics::{ComplexMatrix, RealMatrix, SeededRng};
pub use penalty_solver::{solve_nl1p, HomotopyConfig, SolverSchedule, SolverState};
pub use precoders::{PrecoderKind, PrecoderOutput, PrecoderSettings};
pub use sim::{run_scenario, ScenarioConfig, SimResult};
