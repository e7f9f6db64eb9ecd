//! Gradient-flow relaxation `dphi/dt = -dF/dphi` to a steady state.
//!
//! Integration is explicit Euler with backtracking. A step must lower `F` by
//! at least a small fraction of the first-order prediction `dt * |force|^2`
//! (Armijo); otherwise it is retried at half the step size. Once that
//! decrease drops below float resolution of `F`, a step is accepted when it
//! stays within that resolution and lowers the residual. This rejects the
//! neutral two-cycles a plain "F did not rise" test lets through on stiff
//! nodes. After an accepted step the step size doubles back up to the
//! configured `dt`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{wrap_phase, ClampedSystem, Drive, State};
use crate::error::{Error, Result};
use crate::graph::{Network, NodeId, NodeRole};
use crate::seed;

/// Smallest step size tried before a run is declared stalled.
const MIN_DT: f64 = 1e-14;

/// Fraction of the predicted decrease an accepted step must achieve.
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxConfig {
    /// Euler step size.
    pub dt: f64,
    /// Convergence threshold on `max |dphi/dt|` over free nodes.
    pub tolerance: f64,
    /// Maximum number of force evaluations per run.
    pub max_steps: usize,
    /// Independent random restarts per relaxation (`M_init`).
    pub restarts: usize,
    /// Reject steps that increase `F`.
    pub backtracking: bool,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            dt: 0.1,
            tolerance: 1e-6,
            max_steps: 50_000,
            restarts: 1,
            backtracking: true,
        }
    }
}

impl RelaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.tolerance > 0.0) || self.restarts == 0 || self.max_steps == 0 {
            return Err(Error::InvalidConfig(format!(
                "relaxation needs dt > 0, tolerance > 0, restarts >= 1 and max_steps >= 1 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Result of one relaxation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relaxed {
    pub state: State,
    pub converged: bool,
    /// `max |dphi/dt|` over free nodes at the returned state.
    pub residual: f64,
    /// Force evaluations used.
    pub steps: usize,
    /// `F` at the returned state.
    pub energy: f64,
}

/// Steady states reached from independent random starts, in restart order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSet {
    pub runs: Vec<Relaxed>,
}

impl SteadyStateSet {
    pub fn converged(&self) -> impl Iterator<Item = &Relaxed> {
        self.runs.iter().filter(|r| r.converged)
    }

    pub fn converged_count(&self) -> usize {
        self.converged().count()
    }
}

/// Writes the clamp values into `state` after checking they target input nodes.
pub fn apply_clamp(net: &Network, state: &mut State, clamp: &[(NodeId, f64)]) -> Result<()> {
    for &(i, phi) in clamp {
        if i >= net.len() {
            return Err(Error::UnknownNode(i));
        }
        if net.role(i) != NodeRole::Input {
            return Err(Error::RoleMismatch {
                node: i,
                expected: NodeRole::Input,
                found: net.role(i),
            });
        }
        state.0[i] = phi;
    }
    Ok(())
}

/// Random start for restart `restart`: free nodes uniform on `(-pi, pi]`,
/// clamped inputs at their values, unclamped inputs at 0.
pub fn initial_state(net: &Network, clamp: &[(NodeId, f64)], seed: u64, restart: usize) -> Result<State> {
    let mut rng = seed::rng(seed::derive(seed, &[restart as u64]));
    let mut s = State(
        net.nodes()
            .iter()
            .map(|n| {
                let u: f64 = rng.random();
                if n.role == NodeRole::Input {
                    0.0
                } else {
                    PI - 2.0 * PI * u
                }
            })
            .collect(),
    );
    apply_clamp(net, &mut s, clamp)?;
    Ok(s)
}

/// Relaxes `init` under `drive`. Non-convergence is reported through
/// [`Relaxed::converged`], not as an error.
pub fn relax(
    net: &Network,
    init: State,
    clamp: &[(NodeId, f64)],
    drive: &Drive,
    cfg: &RelaxConfig,
) -> Result<Relaxed> {
    relax_traced(net, init, clamp, drive, cfg, |_| {})
}

/// Like [`relax`], calling `trace` with `F` after every accepted step
/// (and once for the starting state).
pub fn relax_traced(
    net: &Network,
    mut state: State,
    clamp: &[(NodeId, f64)],
    drive: &Drive,
    cfg: &RelaxConfig,
    mut trace: impl FnMut(f64),
) -> Result<Relaxed> {
    cfg.validate()?;
    if state.len() != net.len() {
        return Err(Error::LengthMismatch {
            expected: net.len(),
            got: state.len(),
        });
    }
    apply_clamp(net, &mut state, clamp)?;
    if !state.is_finite() {
        return Err(Error::InvalidConfig("initial state is not finite".into()));
    }

    let mut system = ClampedSystem::new(net, &state, drive);
    let free: Vec<NodeId> = system.free().to_vec();
    let residual_of = |f: &[f64]| free.iter().fold(0.0f64, |m, &i| m.max(f[i].abs()));
    let speed_sq = |f: &[f64]| free.iter().map(|&i| f[i] * f[i]).sum::<f64>();

    let mut force = vec![0.0; net.len()];
    let mut energy = system.evaluate(&state, &mut force);
    trace(energy);
    let mut residual = residual_of(&force);
    let mut trial = state.clone();
    let mut trial_force = vec![0.0; net.len()];
    let mut dt = cfg.dt;
    let mut steps = 1;
    let mut converged = residual <= cfg.tolerance;
    if !converged && !has_balance(net, drive, cfg.tolerance) {
        // No steady state exists: the spin would rotate forever.
        return Ok(Relaxed {
            state,
            converged,
            residual,
            steps,
            energy,
        });
    }

    while !converged && steps < cfg.max_steps {
        for &i in &free {
            trial.0[i] = state.0[i] + dt * force[i];
        }
        let trial_energy = system.evaluate(&trial, &mut trial_force);
        steps += 1;
        let trial_residual = residual_of(&trial_force);
        if cfg.backtracking && !acceptable(energy, trial_energy, dt * speed_sq(&force), residual, trial_residual) {
            dt *= 0.5;
            if dt < MIN_DT {
                break;
            }
            continue;
        }
        std::mem::swap(&mut state, &mut trial);
        std::mem::swap(&mut force, &mut trial_force);
        energy = trial_energy;
        trace(energy);
        residual = trial_residual;
        converged = residual <= cfg.tolerance;
        dt = (2.0 * dt).min(cfg.dt);
    }

    for &i in &free {
        state.0[i] = wrap_phase(state.0[i]);
    }
    Ok(Relaxed {
        state,
        converged,
        residual,
        steps,
        energy,
    })
}

/// Backtracking acceptance test for one Euler step. `predicted` is the
/// first-order decrease `dt * |force|^2`.
fn acceptable(energy: f64, trial_energy: f64, predicted: f64, residual: f64, trial_residual: f64) -> bool {
    let resolution = 1e-12 * (1.0 + energy.abs());
    if trial_energy <= energy - ARMIJO * predicted {
        return true;
    }
    ARMIJO * predicted < resolution && trial_energy <= energy + resolution && trial_residual < residual
}

/// False when a frozen tangent force on some free node is larger than the
/// strongest torque its couplings and bias could ever supply, so that no
/// steady state exists. Other drives always admit one.
pub fn has_balance(net: &Network, drive: &Drive, tolerance: f64) -> bool {
    let Drive::Tangent { beta, slopes } = drive else {
        return true;
    };
    !slopes.iter().any(|&(i, g, _)| {
        if net.role(i) == NodeRole::Input {
            return false;
        }
        let (h, _) = net.bias_polar(i);
        let reach: f64 = net
            .couplings()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.i == i || c.j == i)
            .map(|(k, _)| net.coupling_weight(k).abs())
            .sum();
        (beta * g).abs() > reach + h + tolerance
    })
}

/// Runs `cfg.restarts` independent relaxations from seeded random starts.
/// Restarts may run in parallel; results are always in restart order.
pub fn relax_multistart(
    net: &Network,
    clamp: &[(NodeId, f64)],
    drive: &Drive,
    cfg: &RelaxConfig,
    seed: u64,
) -> Result<SteadyStateSet> {
    cfg.validate()?;
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|k| {
            let init = initial_state(net, clamp, seed, k)?;
            relax(net, init, clamp, drive, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SteadyStateSet { runs })
}
