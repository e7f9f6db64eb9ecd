//! Energies, phase forces and parameter derivatives of the XY model.
//!
//! Internal energy:
//!
//! ```text
//! E = - sum_<ij> W_ij cos(phi_i - phi_j) - sum_i (a_i cos phi_i + b_i sin phi_i)
//! ```
//!
//! External cost over output nodes `O` with target phases `tau_i`:
//!
//! ```text
//! C = sum_{i in O} -log(1 + cos(phi_i - tau_i))
//! ```
//!
//! The argument of the logarithm is floored at [`COST_FLOOR`] so antipodal
//! outputs give a large but finite cost and force.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Network, NodeId, NodeRole};

/// Floor applied to `1 + cos(delta)` inside the cost logarithm.
pub const COST_FLOOR: f64 = 1e-9;

/// Default nudging strength.
pub const DEFAULT_BETA: f64 = 0.1;

/// Wraps a phase into `(-pi, pi]`; values already in range are returned unchanged.
pub fn wrap_phase(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// One phase per node, in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub Vec<f64>);

impl State {
    pub fn zeros(n: usize) -> Self {
        State(vec![0.0; n])
    }

    pub fn phases(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Unit spin vector `(cos phi, sin phi)` of node `i`.
    pub fn spin(&self, i: NodeId) -> (f64, f64) {
        let (s, c) = self.0[i].sin_cos();
        (c, s)
    }

    pub fn canonicalize(&mut self) {
        for x in &mut self.0 {
            *x = wrap_phase(*x);
        }
    }
}

impl std::ops::Index<NodeId> for State {
    type Output = f64;

    fn index(&self, i: NodeId) -> &f64 {
        &self.0[i]
    }
}

/// Target phase for a node.
pub type Target = [(NodeId, f64)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NudgeMode {
    /// No external force.
    Free,
    /// Force `-beta dC/dphi` evaluated at the current configuration.
    #[default]
    Standard,
    /// Constant force `-beta dC/dphi` frozen at a reference (free) state.
    Tangent,
}

/// Resolved external drive for one relaxation.
#[derive(Debug, Clone, PartialEq)]
pub enum Drive {
    Free,
    Standard {
        beta: f64,
        targets: Vec<(NodeId, f64)>,
    },
    /// Linear potential `beta * sum g_i (phi_i - phi_ref_i)` with fixed slopes `g_i`.
    Tangent {
        beta: f64,
        slopes: Vec<(NodeId, f64, f64)>,
    },
}

impl Drive {
    pub fn new(
        mode: NudgeMode,
        beta: f64,
        targets: &Target,
        reference: Option<&State>,
    ) -> Result<Self> {
        Ok(match mode {
            NudgeMode::Free => Drive::Free,
            NudgeMode::Standard => Drive::Standard {
                beta,
                targets: targets.to_vec(),
            },
            NudgeMode::Tangent => {
                let r = reference.ok_or(Error::MissingReference)?;
                let slopes = targets
                    .iter()
                    .map(|&(i, tau)| {
                        let phi = *r.0.get(i).ok_or(Error::UnknownNode(i))?;
                        Ok((i, cost_slope(phi - tau), phi))
                    })
                    .collect::<Result<_>>()?;
                Drive::Tangent { beta, slopes }
            }
        })
    }
}

/// `d/d delta [-log(1 + cos delta)] = sin delta / (1 + cos delta)`, held at its
/// boundary value where `1 + cos delta` falls below [`COST_FLOOR`].
pub fn cost_slope(delta: f64) -> f64 {
    let (s, c) = delta.sin_cos();
    let denom = 1.0 + c;
    if denom >= COST_FLOOR {
        s / denom
    } else {
        let edge = (COST_FLOOR * (2.0 - COST_FLOOR)).sqrt() / COST_FLOOR;
        if s > 0.0 {
            edge
        } else if s < 0.0 {
            -edge
        } else {
            0.0
        }
    }
}

fn single_cost(delta: f64) -> f64 {
    -(1.0 + delta.cos()).max(COST_FLOOR).ln()
}

fn check_len(net: &Network, s: &State) -> Result<()> {
    if s.len() != net.len() {
        return Err(Error::LengthMismatch {
            expected: net.len(),
            got: s.len(),
        });
    }
    Ok(())
}

/// Checks that every output node has a target and every target names an output.
pub fn check_targets(net: &Network, targets: &Target) -> Result<()> {
    for &(i, _) in targets {
        if i >= net.len() {
            return Err(Error::UnknownNode(i));
        }
        if net.role(i) != NodeRole::Output {
            return Err(Error::RoleMismatch {
                node: i,
                expected: NodeRole::Output,
                found: net.role(i),
            });
        }
    }
    for &o in net.outputs() {
        if !targets.iter().any(|&(i, _)| i == o) {
            return Err(Error::MissingTarget(o));
        }
    }
    Ok(())
}

/// Internal energy `E`.
pub fn internal_energy(net: &Network, s: &State) -> Result<f64> {
    check_len(net, s)?;
    let trig = Trig::new(s);
    Ok(energy_with(net, &trig))
}

/// External cost `C` (no `beta` factor).
pub fn external_cost(net: &Network, s: &State, targets: &Target) -> Result<f64> {
    check_len(net, s)?;
    targets
        .iter()
        .map(|&(i, tau)| {
            s.0.get(i)
                .map(|phi| single_cost(phi - tau))
                .ok_or(Error::UnknownNode(i))
        })
        .sum()
}

/// Total energy `F = E + beta * C` for the given drive (for tangent drives the
/// linear surrogate potential replaces `C`).
pub fn total_energy(net: &Network, s: &State, drive: &Drive) -> Result<f64> {
    check_len(net, s)?;
    let trig = Trig::new(s);
    Ok(energy_with(net, &trig) + drive_energy(s, drive))
}

/// Phase velocities `-dF/dphi`, zero on input nodes.
pub fn phase_force(
    net: &Network,
    s: &State,
    targets: &Target,
    beta: f64,
    mode: NudgeMode,
    reference: Option<&State>,
) -> Result<Vec<f64>> {
    let drive = Drive::new(mode, beta, targets, reference)?;
    drive_force(net, s, &drive)
}

/// Phase velocities `-dF/dphi` for a resolved drive, zero on input nodes.
pub fn drive_force(net: &Network, s: &State, drive: &Drive) -> Result<Vec<f64>> {
    check_len(net, s)?;
    let mut force = vec![0.0; net.len()];
    evaluate(net, s, drive, &mut force);
    Ok(force)
}

/// `dE/dtheta` in parameter-block layout. Shared slots accumulate every member.
pub fn parameter_gradient(net: &Network, s: &State) -> Result<Vec<f64>> {
    check_len(net, s)?;
    let mut g = vec![0.0; net.n_params()];
    accumulate_parameter_gradient(net, s, 1.0, &mut g);
    Ok(g)
}

/// Adds `scale * dE/dtheta(s)` into `g`.
pub(crate) fn accumulate_parameter_gradient(net: &Network, s: &State, scale: f64, g: &mut [f64]) {
    let trig = Trig::new(s);
    for c in net.couplings() {
        let cos_ij = trig.cos[c.i] * trig.cos[c.j] + trig.sin[c.i] * trig.sin[c.j];
        g[c.slot] -= scale * cos_ij;
    }
    let base = net.n_slots();
    for i in 0..net.len() {
        g[base + 2 * i] -= scale * trig.cos[i];
        g[base + 2 * i + 1] -= scale * trig.sin[i];
    }
}

/// Mean distance-style output error `1/2 sum (1 - cos(phi_i - tau_i))`.
pub fn distance(s: &State, targets: &Target) -> f64 {
    0.5 * targets.iter().map(|&(i, tau)| 1.0 - (s[i] - tau).cos()).sum::<f64>()
}

pub(crate) struct Trig {
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

impl Trig {
    pub fn new(s: &State) -> Self {
        let (sin, cos) = s.0.iter().map(|x| x.sin_cos()).unzip();
        Trig { sin, cos }
    }
}

fn energy_with(net: &Network, trig: &Trig) -> f64 {
    let params = net.params();
    let mut e = 0.0;
    for c in net.couplings() {
        let cos_ij = trig.cos[c.i] * trig.cos[c.j] + trig.sin[c.i] * trig.sin[c.j];
        e -= params[c.slot] * cos_ij;
    }
    let base = net.n_slots();
    for i in 0..net.len() {
        e -= params[base + 2 * i] * trig.cos[i] + params[base + 2 * i + 1] * trig.sin[i];
    }
    e
}

fn drive_energy(s: &State, drive: &Drive) -> f64 {
    match drive {
        Drive::Free => 0.0,
        Drive::Standard { beta, targets } => {
            beta * targets.iter().map(|&(i, tau)| single_cost(s[i] - tau)).sum::<f64>()
        }
        Drive::Tangent { beta, slopes } => {
            beta * slopes.iter().map(|&(i, g, r)| g * (s[i] - r)).sum::<f64>()
        }
    }
}

/// Writes `-dF/dphi` into `force` (inputs zeroed) and returns `F`.
pub(crate) fn evaluate(net: &Network, s: &State, drive: &Drive, force: &mut [f64]) -> f64 {
    let trig = Trig::new(s);
    let params = net.params();
    force.fill(0.0);
    let mut e = 0.0;
    for c in net.couplings() {
        let w = params[c.slot];
        let (si, ci, sj, cj) = (trig.sin[c.i], trig.cos[c.i], trig.sin[c.j], trig.cos[c.j]);
        e -= w * (ci * cj + si * sj);
        // sin(phi_i - phi_j)
        let sin_ij = si * cj - ci * sj;
        force[c.i] -= w * sin_ij;
        force[c.j] += w * sin_ij;
    }
    let base = net.n_slots();
    for i in 0..net.len() {
        let (a, b) = (params[base + 2 * i], params[base + 2 * i + 1]);
        e -= a * trig.cos[i] + b * trig.sin[i];
        force[i] += b * trig.cos[i] - a * trig.sin[i];
    }
    match drive {
        Drive::Free => {}
        Drive::Standard { beta, targets } => {
            for &(i, tau) in targets {
                let d = s[i] - tau;
                e += beta * single_cost(d);
                force[i] -= beta * cost_slope(d);
            }
        }
        Drive::Tangent { beta, slopes } => {
            for &(i, g, r) in slopes {
                e += beta * g * (s[i] - r);
                force[i] -= beta * g;
            }
        }
    }
    for &i in net.inputs() {
        force[i] = 0.0;
    }
    e
}

/// `F` restricted to the free nodes of one relaxation. Input phases never
/// move, so their couplings to free nodes fold into a fixed field on those
/// nodes and input-input terms into a constant. Only free-free couplings are
/// evaluated per step.
pub(crate) struct ClampedSystem<'a> {
    drive: &'a Drive,
    free: Vec<NodeId>,
    /// `(a, b)` per node: bias plus the field of clamped neighbours.
    field: Vec<(f64, f64)>,
    couplings: Vec<(NodeId, NodeId, f64)>,
    constant: f64,
    sin: Vec<f64>,
    cos: Vec<f64>,
}

impl<'a> ClampedSystem<'a> {
    pub fn new(net: &Network, s: &State, drive: &'a Drive) -> Self {
        let fixed = |i: NodeId| net.role(i) == NodeRole::Input;
        let params = net.params();
        let base = net.n_slots();
        let mut field: Vec<(f64, f64)> =
            (0..net.len()).map(|i| (params[base + 2 * i], params[base + 2 * i + 1])).collect();
        let mut constant = 0.0;
        let mut couplings = Vec::new();
        for c in net.couplings() {
            let w = params[c.slot];
            match (fixed(c.i), fixed(c.j)) {
                (true, true) => constant -= w * (s[c.i] - s[c.j]).cos(),
                (true, false) => {
                    field[c.j].0 += w * s[c.i].cos();
                    field[c.j].1 += w * s[c.i].sin();
                }
                (false, true) => {
                    field[c.i].0 += w * s[c.j].cos();
                    field[c.i].1 += w * s[c.j].sin();
                }
                (false, false) => couplings.push((c.i, c.j, w)),
            }
        }
        for &i in net.inputs() {
            let (a, b) = field[i];
            constant -= a * s[i].cos() + b * s[i].sin();
        }
        ClampedSystem {
            drive,
            free: (0..net.len()).filter(|&i| !fixed(i)).collect(),
            field,
            couplings,
            constant,
            sin: vec![0.0; net.len()],
            cos: vec![0.0; net.len()],
        }
    }

    pub fn free(&self) -> &[NodeId] {
        &self.free
    }

    /// Writes `-dF/dphi` on the free nodes into `force` (other entries are
    /// left untouched) and returns `F`.
    pub fn evaluate(&mut self, s: &State, force: &mut [f64]) -> f64 {
        let mut e = self.constant;
        for &i in &self.free {
            let (si, ci) = s[i].sin_cos();
            self.sin[i] = si;
            self.cos[i] = ci;
            let (a, b) = self.field[i];
            e -= a * ci + b * si;
            force[i] = b * ci - a * si;
        }
        for &(i, j, w) in &self.couplings {
            let (si, ci, sj, cj) = (self.sin[i], self.cos[i], self.sin[j], self.cos[j]);
            e -= w * (ci * cj + si * sj);
            let sin_ij = si * cj - ci * sj;
            force[i] -= w * sin_ij;
            force[j] += w * sin_ij;
        }
        match self.drive {
            Drive::Free => {}
            Drive::Standard { beta, targets } => {
                for &(i, tau) in targets {
                    let d = s[i] - tau;
                    e += beta * single_cost(d);
                    force[i] -= beta * cost_slope(d);
                }
            }
            Drive::Tangent { beta, slopes } => {
                for &(i, g, r) in slopes {
                    e += beta * g * (s[i] - r);
                    force[i] -= beta * g;
                }
            }
        }
        e
    }
}
