//! # xy-ep
//!
//! Training and simulation of XY-model networks with Equilibrium Propagation.
//!
//! A network is a set of planar spins with phases `phi_i`, pairwise couplings
//! `W_ij` and local bias fields. Inputs are clamped, the rest relaxes by
//! gradient flow on the energy, and the steady state of the output spins is
//! the network's answer. Training compares a free steady state with one where
//! the outputs are gently pulled toward their targets.
//!
//! - [`graph`]: lattices, all-to-all, dense-layered and locally coupled (LCL /
//!   CNN-like) architectures, plus the flat parameter block.
//! - [`energy`]: internal energy, output cost, phase forces and `dE/dtheta`.
//! - [`relax`]: Euler gradient flow with backtracking, multistart.
//! - [`ep`]: gradient estimator, SGD loop, evaluation and records.
//! - [`tasks`]: XOR, Iris, MNIST (IDX) and teacher datasets; class decoding.
//! - [`analysis`]: flip-response fields and coupling snapshots.
//!
//! ```
//! use xy_ep::graph::Network;
//! use xy_ep::energy::{internal_energy, State};
//!
//! let mut net = Network::all_to_all(2).unwrap();
//! net.set_slot_weight(0, 1.0);
//! assert_eq!(internal_energy(&net, &State(vec![0.0, 0.0])).unwrap(), -1.0);
//! ```

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod analysis;
pub mod checkpoint;
pub mod ep;
pub mod energy;
pub mod error;
pub mod graph;
pub mod relax;
pub mod seed;
pub mod tasks;

pub use checkpoint::Checkpoint;
pub use energy::{Drive, NudgeMode, State};
pub use ep::{ep_gradient, evaluate, train, EpConfig, GradientEstimate, Metrics, TrainRecord};
pub use error::{Error, Result};
pub use graph::{ArchitectureSpec, LclSpec, Network, NodeId, NodeRole, Placement, ShellSet};
pub use relax::{relax, relax_multistart, RelaxConfig, Relaxed, SteadyStateSet};
pub use tasks::Sample;

// The guide's code listings are compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/relaxation.md")]
    mod relaxation {}
    #[doc = include_str!("../../../book/src/equilibrium-propagation.md")]
    mod equilibrium_propagation {}
    #[doc = include_str!("../../../book/src/architectures.md")]
    mod architectures {}
    #[doc = include_str!("../../../book/src/tasks.md")]
    mod tasks {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
