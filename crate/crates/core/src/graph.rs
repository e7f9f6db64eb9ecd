//! Network topology and trainable parameters.
//!
//! A [`Network`] is a set of planar spins (nodes) joined by undirected
//! couplings. Every coupling points at a weight *slot*; couplings that share
//! a slot form a weight-sharing group and are updated together, so group
//! members can never drift apart.
//!
//! Trainable parameters live in one flat block laid out as
//!
//! ```text
//! [ w_0 .. w_{K-1} | a_0, b_0, a_1, b_1, .., a_{N-1}, b_{N-1} ]
//! ```
//!
//! where `K` is the number of weight slots and `(a_i, b_i)` are the Cartesian
//! components of the bias field on node `i`:
//! `h_i cos(phi_i - psi_i) = a_i cos(phi_i) + b_i sin(phi_i)`.
//! Gradients use the same layout.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub type NodeId = usize;

/// Current version of the serialized network document.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Input,
    Hidden,
    Output,
}

/// Position of a node: grid coordinate within a (layer, channel) sheet.
///
/// Flat lattices use layer 0 / channel 0; all-to-all and dense networks use
/// `row = 0` and `col` as the index within the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Coord {
    pub layer: u32,
    pub channel: u32,
    pub row: u32,
    pub col: u32,
}

impl Coord {
    pub fn grid(row: u32, col: u32) -> Self {
        Coord {
            row,
            col,
            ..Coord::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub role: NodeRole,
    pub coord: Coord,
}

/// Undirected coupling `i < j` reading its weight from `slot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: NodeId,
    pub j: NodeId,
    pub slot: usize,
}

/// Set of squared lattice distances that are coupled.
///
/// Presets: `SQ` = {1}, `3NSQ` = {1, 2}, `P3NSQ` = {1, 2, 4}, `4NSQ` = {1, 2, 4, 5}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ShellRepr", into = "Vec<u32>")]
pub struct ShellSet(BTreeSet<u32>);

#[derive(Deserialize)]
#[serde(untagged)]
enum ShellRepr {
    Preset(String),
    List(Vec<u32>),
}

impl TryFrom<ShellRepr> for ShellSet {
    type Error = Error;

    fn try_from(repr: ShellRepr) -> Result<Self> {
        match repr {
            ShellRepr::Preset(name) => name.parse(),
            ShellRepr::List(list) => ShellSet::new(list),
        }
    }
}

impl From<ShellSet> for Vec<u32> {
    fn from(s: ShellSet) -> Self {
        s.0.into_iter().collect()
    }
}

impl ShellSet {
    pub fn new(shells: impl IntoIterator<Item = u32>) -> Result<Self> {
        let set: BTreeSet<u32> = shells.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidArchitecture("empty shell set".into()));
        }
        if set.contains(&0) {
            return Err(Error::InvalidArchitecture(
                "shell set contains squared distance 0 (self-coupling)".into(),
            ));
        }
        Ok(ShellSet(set))
    }

    pub fn sq() -> Self {
        ShellSet([1].into())
    }

    pub fn nsq3() -> Self {
        ShellSet([1, 2].into())
    }

    pub fn p3nsq() -> Self {
        ShellSet([1, 2, 4].into())
    }

    pub fn nsq4() -> Self {
        ShellSet([1, 2, 4, 5].into())
    }

    pub fn contains(&self, d2: u32) -> bool {
        self.0.contains(&d2)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    /// Offsets `(dr, dc)` with `dr^2 + dc^2` in the set, keeping only one of
    /// each `±` pair (the lexicographically positive one).
    fn half_offsets(&self) -> Vec<(i64, i64)> {
        let max = *self.0.iter().next_back().expect("nonempty") as i64;
        let reach = (max as f64).sqrt().ceil() as i64;
        let mut out = Vec::new();
        for dr in 0..=reach {
            for dc in -reach..=reach {
                if dr == 0 && dc <= 0 {
                    continue;
                }
                let d2 = dr * dr + dc * dc;
                if d2 <= max && self.0.contains(&(d2 as u32)) {
                    out.push((dr, dc));
                }
            }
        }
        out
    }
}

impl FromStr for ShellSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SQ" => Ok(ShellSet::sq()),
            "3NSQ" => Ok(ShellSet::nsq3()),
            "P3NSQ" => Ok(ShellSet::p3nsq()),
            "4NSQ" => Ok(ShellSet::nsq4()),
            other => Err(Error::InvalidArchitecture(format!(
                "unknown shell preset {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ShellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// How input and output roles are assigned on a flat lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    /// Explicit `(row, col)` grid positions, zero-based.
    Explicit {
        inputs: Vec<(u32, u32)>,
        outputs: Vec<(u32, u32)>,
    },
    /// Inputs along the first row, outputs along the last row, each group
    /// centered. `spacing = 1` is the adjacent arrangement, `spacing = 2`
    /// leaves one empty site between neighbours (1-separated).
    Edges {
        inputs: usize,
        outputs: usize,
        spacing: u32,
    },
}

/// Parameters of a locally coupled lattice (LCL) stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LclSpec {
    pub input_rows: u32,
    pub input_cols: u32,
    pub window: u32,
    #[serde(default = "one")]
    pub stride: u32,
    #[serde(default = "one")]
    pub channels: u32,
    /// Number of hidden lattice layers.
    #[serde(default = "one")]
    pub depth: u32,
    /// CNN-like weight sharing: one weight per (layer, channel pair, window offset).
    #[serde(default)]
    pub weight_shared: bool,
    /// Lattice couplings inside each hidden channel sheet.
    #[serde(default)]
    pub intra_shells: Option<ShellSet>,
    pub outputs: u32,
}

fn one() -> u32 {
    1
}

impl LclSpec {
    /// Side lengths of every hidden layer, first to last.
    pub fn hidden_shapes(&self) -> Result<Vec<(u32, u32)>> {
        if self.window == 0 || self.stride == 0 || self.channels == 0 || self.depth == 0 {
            return Err(Error::InvalidArchitecture(
                "window, stride, channels and depth must be at least 1".into(),
            ));
        }
        let mut shape = (self.input_rows, self.input_cols);
        let mut shapes = Vec::with_capacity(self.depth as usize);
        for _ in 0..self.depth {
            if self.window > shape.0 || self.window > shape.1 {
                return Err(Error::InvalidArchitecture(format!(
                    "window {} larger than layer extent {}x{}",
                    self.window, shape.0, shape.1
                )));
            }
            shape = (
                (shape.0 - self.window) / self.stride + 1,
                (shape.1 - self.window) / self.stride + 1,
            );
            shapes.push(shape);
        }
        Ok(shapes)
    }
}

/// Declarative description of an architecture; [`ArchitectureSpec::build`]
/// turns it into a [`Network`] with roles assigned and zero parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArchitectureSpec {
    Lattice {
        rows: u32,
        cols: u32,
        shells: ShellSet,
        placement: Placement,
    },
    AllToAll {
        nodes: usize,
        inputs: Vec<NodeId>,
        outputs: Vec<NodeId>,
    },
    DenseLayered {
        layers: Vec<usize>,
    },
    Lcl(LclSpec),
}

impl ArchitectureSpec {
    pub fn build(&self) -> Result<Network> {
        match self {
            ArchitectureSpec::Lattice {
                rows,
                cols,
                shells,
                placement,
            } => {
                let mut net = Network::lattice(*rows, *cols, shells)?;
                let (inputs, outputs) = placement_nodes(&net, *rows, *cols, placement)?;
                net.assign_roles(&inputs, &outputs)?;
                Ok(net)
            }
            ArchitectureSpec::AllToAll {
                nodes,
                inputs,
                outputs,
            } => {
                let mut net = Network::all_to_all(*nodes)?;
                net.assign_roles(inputs, outputs)?;
                Ok(net)
            }
            ArchitectureSpec::DenseLayered { layers } => Network::dense_layered(layers),
            ArchitectureSpec::Lcl(spec) => Network::lcl(spec),
        }
    }
}

fn placement_nodes(
    net: &Network,
    rows: u32,
    cols: u32,
    placement: &Placement,
) -> Result<(Vec<NodeId>, Vec<NodeId>)> {
    let id = |r: u32, c: u32| -> Result<NodeId> {
        if r >= rows || c >= cols {
            return Err(Error::InvalidArchitecture(format!(
                "placement ({r}, {c}) outside {rows}x{cols} lattice"
            )));
        }
        Ok((r * cols + c) as NodeId)
    };
    match placement {
        Placement::Explicit { inputs, outputs } => {
            let ins = inputs.iter().map(|&(r, c)| id(r, c)).collect::<Result<_>>()?;
            let outs = outputs.iter().map(|&(r, c)| id(r, c)).collect::<Result<_>>()?;
            Ok((ins, outs))
        }
        Placement::Edges {
            inputs,
            outputs,
            spacing,
        } => {
            let row_of = |count: usize, row: u32| -> Result<Vec<NodeId>> {
                if count == 0 || *spacing == 0 {
                    return Err(Error::InvalidArchitecture(
                        "edge placement needs at least one node and spacing >= 1".into(),
                    ));
                }
                let span = (count as u32 - 1) * spacing + 1;
                if span > cols {
                    return Err(Error::InvalidArchitecture(format!(
                        "{count} nodes with spacing {spacing} do not fit in {cols} columns"
                    )));
                }
                let start = (cols - span) / 2;
                (0..count as u32).map(|k| id(row, start + k * spacing)).collect()
            };
            debug_assert_eq!(net.len(), (rows * cols) as usize);
            Ok((row_of(*inputs, 0)?, row_of(*outputs, rows - 1)?))
        }
    }
}

/// An XY network: nodes, couplings and the flat parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    couplings: Vec<Coupling>,
    n_slots: usize,
    params: Vec<f64>,
    inputs: Vec<NodeId>,
    outputs: Vec<NodeId>,
}

impl Network {
    /// Assembles a network from raw parts, checking every structural invariant.
    pub fn from_parts(
        nodes: Vec<Node>,
        mut couplings: Vec<Coupling>,
        n_slots: usize,
        params: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut seen = BTreeSet::new();
        for c in couplings.iter_mut() {
            if c.i == c.j {
                return Err(Error::InvalidArchitecture(format!("self-loop on node {}", c.i)));
            }
            if c.i >= n || c.j >= n {
                return Err(Error::UnknownNode(c.i.max(c.j)));
            }
            if c.i > c.j {
                std::mem::swap(&mut c.i, &mut c.j);
            }
            if c.slot >= n_slots {
                return Err(Error::InvalidArchitecture(format!(
                    "coupling ({}, {}) refers to missing weight slot {}",
                    c.i, c.j, c.slot
                )));
            }
            if !seen.insert((c.i, c.j)) {
                return Err(Error::InvalidArchitecture(format!(
                    "duplicate coupling ({}, {})",
                    c.i, c.j
                )));
            }
        }
        let params = match params {
            Some(p) => {
                if p.len() != n_slots + 2 * n {
                    return Err(Error::LengthMismatch {
                        expected: n_slots + 2 * n,
                        got: p.len(),
                    });
                }
                p
            }
            None => vec![0.0; n_slots + 2 * n],
        };
        let mut net = Network {
            nodes,
            couplings,
            n_slots,
            params,
            inputs: Vec::new(),
            outputs: Vec::new(),
        };
        net.refresh_roles();
        Ok(net)
    }

    fn refresh_roles(&mut self) {
        self.inputs = self.ids_with(NodeRole::Input);
        self.outputs = self.ids_with(NodeRole::Output);
    }

    fn ids_with(&self, role: NodeRole) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    /// Open-boundary `rows x cols` lattice; node `(r, c)` has id `r * cols + c`
    /// and is coupled to every site whose squared distance lies in `shells`.
    /// All nodes start as hidden.
    pub fn lattice(rows: u32, cols: u32, shells: &ShellSet) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "lattice must be at least 2x2, got {rows}x{cols}"
            )));
        }
        let nodes = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| Node {
                role: NodeRole::Hidden,
                coord: Coord::grid(r, c),
            })
            .collect();
        let mut pairs = Vec::new();
        sheet_pairs(rows, cols, 0, shells, &mut pairs);
        let couplings = pairs
            .into_iter()
            .enumerate()
            .map(|(slot, (i, j))| Coupling { i, j, slot })
            .collect::<Vec<_>>();
        let k = couplings.len();
        Network::from_parts(nodes, couplings, k, None)
    }

    /// Every unordered pair of `n` nodes coupled; all nodes start as hidden.
    pub fn all_to_all(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "all-to-all needs at least 2 nodes, got {n}"
            )));
        }
        let nodes = (0..n)
            .map(|k| Node {
                role: NodeRole::Hidden,
                coord: Coord::grid(0, k as u32),
            })
            .collect();
        let mut couplings = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let slot = couplings.len();
                couplings.push(Coupling { i, j, slot });
            }
        }
        let k = couplings.len();
        Network::from_parts(nodes, couplings, k, None)
    }

    /// Layers coupled all-to-all to their neighbours only. The first layer is
    /// the input, the last the output.
    pub fn dense_layered(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArchitecture(
                "dense layered network needs at least 2 layers".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidArchitecture("empty layer".into()));
        }
        let last = layer_sizes.len() - 1;
        let mut nodes = Vec::new();
        let mut starts = Vec::new();
        for (l, &size) in layer_sizes.iter().enumerate() {
            starts.push(nodes.len());
            let role = match l {
                0 => NodeRole::Input,
                l if l == last => NodeRole::Output,
                _ => NodeRole::Hidden,
            };
            nodes.extend((0..size).map(|k| Node {
                role,
                coord: Coord {
                    layer: l as u32,
                    col: k as u32,
                    ..Coord::default()
                },
            }));
        }
        let mut couplings = Vec::new();
        for l in 0..last {
            for a in 0..layer_sizes[l] {
                for b in 0..layer_sizes[l + 1] {
                    let slot = couplings.len();
                    couplings.push(Coupling {
                        i: starts[l] + a,
                        j: starts[l + 1] + b,
                        slot,
                    });
                }
            }
        }
        let k = couplings.len();
        Network::from_parts(nodes, couplings, k, None)
    }

    /// Locally coupled lattice stack (CNN-like when `weight_shared` is set).
    pub fn lcl(spec: &LclSpec) -> Result<Self> {
        let shapes = spec.hidden_shapes()?;
        if spec.outputs == 0 {
            return Err(Error::InvalidArchitecture("LCL needs at least one output".into()));
        }
        let mut nodes = Vec::new();
        // sheet_start[layer][channel] = id of (row 0, col 0)
        let mut sheet_start: Vec<Vec<NodeId>> = Vec::new();
        let push_sheet = |nodes: &mut Vec<Node>, layer: u32, channel: u32, rows: u32, cols: u32, role| {
            let start = nodes.len();
            for r in 0..rows {
                for c in 0..cols {
                    nodes.push(Node {
                        role,
                        coord: Coord {
                            layer,
                            channel,
                            row: r,
                            col: c,
                        },
                    });
                }
            }
            start
        };
        sheet_start.push(vec![push_sheet(
            &mut nodes,
            0,
            0,
            spec.input_rows,
            spec.input_cols,
            NodeRole::Input,
        )]);
        for (l, &(rows, cols)) in shapes.iter().enumerate() {
            let starts = (0..spec.channels)
                .map(|ch| push_sheet(&mut nodes, l as u32 + 1, ch, rows, cols, NodeRole::Hidden))
                .collect();
            sheet_start.push(starts);
        }
        let out_layer = shapes.len() as u32 + 1;
        let out_start = nodes.len();
        nodes.extend((0..spec.outputs).map(|k| Node {
            role: NodeRole::Output,
            coord: Coord {
                layer: out_layer,
                col: k,
                ..Coord::default()
            },
        }));

        let mut couplings = Vec::new();
        let mut n_slots = 0usize;
        let mut shared: HashMap<(u32, u32, u32, u32, u32), usize> = HashMap::new();
        let mut prev_shape = (spec.input_rows, spec.input_cols);
        for (l, &(rows, cols)) in shapes.iter().enumerate() {
            let layer = l as u32 + 1;
            let prev = &sheet_start[l];
            for (ch, &start) in sheet_start[l + 1].iter().enumerate() {
                for r in 0..rows {
                    for c in 0..cols {
                        let me = start + (r * cols + c) as usize;
                        for (pch, &pstart) in prev.iter().enumerate() {
                            for dr in 0..spec.window {
                                for dc in 0..spec.window {
                                    let pr = r * spec.stride + dr;
                                    let pc = c * spec.stride + dc;
                                    let other = pstart + (pr * prev_shape.1 + pc) as usize;
                                    let slot = if spec.weight_shared {
                                        *shared
                                            .entry((layer, ch as u32, pch as u32, dr, dc))
                                            .or_insert_with(|| {
                                                n_slots += 1;
                                                n_slots - 1
                                            })
                                    } else {
                                        n_slots += 1;
                                        n_slots - 1
                                    };
                                    couplings.push(Coupling {
                                        i: other,
                                        j: me,
                                        slot,
                                    });
                                }
                            }
                        }
                    }
                }
                if let Some(shells) = &spec.intra_shells {
                    let mut pairs = Vec::new();
                    sheet_pairs(rows, cols, start, shells, &mut pairs);
                    for (i, j) in pairs {
                        couplings.push(Coupling { i, j, slot: n_slots });
                        n_slots += 1;
                    }
                }
            }
            prev_shape = (rows, cols);
        }
        for &start in sheet_start.last().expect("hidden layers") {
            let sheet = (prev_shape.0 * prev_shape.1) as usize;
            for h in start..start + sheet {
                for k in 0..spec.outputs as usize {
                    couplings.push(Coupling {
                        i: h,
                        j: out_start + k,
                        slot: n_slots,
                    });
                    n_slots += 1;
                }
            }
        }
        Network::from_parts(nodes, couplings, n_slots, None)
    }

    /// Marks the given nodes as inputs and outputs; every other node becomes hidden.
    pub fn assign_roles(&mut self, inputs: &[NodeId], outputs: &[NodeId]) -> Result<()> {
        let n = self.nodes.len();
        let mut roles = vec![NodeRole::Hidden; n];
        for (&id, role) in inputs
            .iter()
            .map(|id| (id, NodeRole::Input))
            .chain(outputs.iter().map(|id| (id, NodeRole::Output)))
        {
            if id >= n {
                return Err(Error::UnknownNode(id));
            }
            if roles[id] != NodeRole::Hidden {
                return Err(Error::InvalidArchitecture(format!(
                    "node {id} assigned more than one role"
                )));
            }
            roles[id] = role;
        }
        for (node, role) in self.nodes.iter_mut().zip(roles) {
            node.role = role;
        }
        self.refresh_roles();
        Ok(())
    }

    /// Trainable networks need at least one input and one output.
    pub fn check_trainable(&self) -> Result<()> {
        if self.inputs.is_empty() || self.outputs.is_empty() {
            return Err(Error::InvalidArchitecture(format!(
                "network has {} inputs and {} outputs; need at least one of each",
                self.inputs.len(),
                self.outputs.len()
            )));
        }
        Ok(())
    }

    /// Draws every weight slot i.i.d. uniform on `[-scale, scale]` and zeroes biases.
    pub fn init_parameters(&mut self, seed: u64, scale: f64) -> Result<()> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "coupling scale must be positive, got {scale}"
            )));
        }
        let mut rng = seed::rng(seed);
        let (weights, biases) = self.params.split_at_mut(self.n_slots);
        for w in weights {
            *w = rng.random_range(-scale..=scale);
        }
        biases.fill(0.0);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn role(&self, id: NodeId) -> NodeRole {
        self.nodes[id].role
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    /// Number of distinct weight slots.
    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// Length of the flat parameter block.
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.n_slots]
    }

    /// Weight carried by coupling `k`.
    pub fn coupling_weight(&self, k: usize) -> f64 {
        self.params[self.couplings[k].slot]
    }

    pub fn set_slot_weight(&mut self, slot: usize, w: f64) {
        self.params[slot] = w;
    }

    /// Cartesian bias components `(a_i, b_i)`.
    pub fn bias(&self, id: NodeId) -> (f64, f64) {
        let k = self.n_slots + 2 * id;
        (self.params[k], self.params[k + 1])
    }

    pub fn set_bias(&mut self, id: NodeId, a: f64, b: f64) {
        let k = self.n_slots + 2 * id;
        self.params[k] = a;
        self.params[k + 1] = b;
    }

    /// Bias as amplitude and direction `(h, psi)`.
    pub fn bias_polar(&self, id: NodeId) -> (f64, f64) {
        let (a, b) = self.bias(id);
        (a.hypot(b), b.atan2(a))
    }

    /// Index of the `a_i` component of node `i` in the parameter block.
    pub fn bias_param_index(&self, id: NodeId) -> usize {
        self.n_slots + 2 * id
    }

    /// Slots referenced by more than one coupling, with their member couplings.
    pub fn share_groups(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, c) in self.couplings.iter().enumerate() {
            groups.entry(c.slot).or_default().push(k);
        }
        groups.retain(|_, members| members.len() > 1);
        groups
    }

    /// Whether two networks share nodes, roles and couplings (parameters may differ).
    pub fn same_topology(&self, other: &Network) -> bool {
        self.nodes == other.nodes && self.couplings == other.couplings && self.n_slots == other.n_slots
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            format_version: FORMAT_VERSION,
            nodes: self.nodes.clone(),
            couplings: self.couplings.clone(),
            n_slots: self.n_slots,
            params: self.params.clone(),
        }
    }

    pub fn from_document(doc: NetworkDocument) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion(doc.format_version));
        }
        Network::from_parts(doc.nodes, doc.couplings, doc.n_slots, Some(doc.params))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Network::from_document(serde_json::from_str(s)?)
    }
}

/// Serialized form of a [`Network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub format_version: u32,
    pub nodes: Vec<Node>,
    pub couplings: Vec<Coupling>,
    pub n_slots: usize,
    pub params: Vec<f64>,
}

/// Appends the lattice pairs of a `rows x cols` sheet whose (0, 0) node has id `start`.
fn sheet_pairs(rows: u32, cols: u32, start: NodeId, shells: &ShellSet, out: &mut Vec<(NodeId, NodeId)>) {
    let offsets = shells.half_offsets();
    let first = out.len();
    let (rows, cols) = (rows as i64, cols as i64);
    for r in 0..rows {
        for c in 0..cols {
            for &(dr, dc) in &offsets {
                let (r2, c2) = (r + dr, c + dc);
                if r2 < rows && (0..cols).contains(&c2) {
                    let a = start + (r * cols + c) as usize;
                    let b = start + (r2 * cols + c2) as usize;
                    out.push((a.min(b), a.max(b)));
                }
            }
        }
    }
    out[first..].sort_unstable();
}
