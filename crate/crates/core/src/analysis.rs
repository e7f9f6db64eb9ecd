//! Response fields and coupling snapshots.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Coord, Network, NodeId, NodeRole};
use crate::relax::{relax_multistart, RelaxConfig};
use crate::tasks::Sample;
use crate::energy::Drive;

/// Per-node squared spin change `<|S_base - S_flipped|^2>` averaged over
/// paired restarts. Each value lies in `[0, 4]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseField {
    pub values: Vec<f64>,
    pub epoch: Option<usize>,
    pub flip_node: NodeId,
    pub base_phase: f64,
    pub flipped_phase: f64,
    pub pairs: usize,
    /// Pairs where both relaxations converged.
    pub converged_pairs: usize,
}

/// Relaxes the network with the base input and with `flip_node` set to
/// `flipped_phase`. Restart `k` of both relaxations starts from the same
/// random hidden/output phases.
pub fn response_probe(
    net: &Network,
    base: &Sample,
    flip_node: NodeId,
    flipped_phase: f64,
    cfg: &RelaxConfig,
    seed: u64,
) -> Result<ResponseField> {
    if flip_node >= net.len() {
        return Err(Error::UnknownNode(flip_node));
    }
    if net.role(flip_node) != NodeRole::Input {
        return Err(Error::RoleMismatch {
            node: flip_node,
            expected: NodeRole::Input,
            found: net.role(flip_node),
        });
    }
    let mut flipped_inputs = base.inputs.clone();
    let base_phase = match flipped_inputs.iter_mut().find(|(i, _)| *i == flip_node) {
        Some(entry) => std::mem::replace(&mut entry.1, flipped_phase),
        None => {
            flipped_inputs.push((flip_node, flipped_phase));
            0.0
        }
    };
    let a = relax_multistart(net, &base.inputs, &Drive::Free, cfg, seed)?;
    let b = relax_multistart(net, &flipped_inputs, &Drive::Free, cfg, seed)?;
    let mut values = vec![0.0; net.len()];
    let mut converged_pairs = 0;
    for (ra, rb) in a.runs.iter().zip(&b.runs) {
        if ra.converged && rb.converged {
            converged_pairs += 1;
        }
        for (j, v) in values.iter_mut().enumerate() {
            *v += 2.0 - 2.0 * (ra.state[j] - rb.state[j]).cos();
        }
    }
    let pairs = a.runs.len();
    for v in &mut values {
        *v = (*v / pairs as f64).clamp(0.0, 4.0);
    }
    Ok(ResponseField {
        values,
        epoch: None,
        flip_node,
        base_phase,
        flipped_phase,
        pairs,
        converged_pairs,
    })
}

pub fn total_response(field: &ResponseField) -> f64 {
    field.values.iter().sum()
}

#[derive(Debug, Serialize, Deserialize)]
struct ResponseRow {
    node: NodeId,
    layer: u32,
    channel: u32,
    row: u32,
    col: u32,
    response: f64,
}

impl ResponseField {
    /// Writes `node,layer,channel,row,col,response`.
    pub fn write_csv<W: Write>(&self, net: &Network, w: W) -> Result<()> {
        if net.len() != self.values.len() {
            return Err(Error::TopologyMismatch(format!(
                "field has {} nodes, network {}",
                self.values.len(),
                net.len()
            )));
        }
        let mut out = csv::Writer::from_writer(w);
        for (node, (n, &response)) in net.nodes().iter().zip(&self.values).enumerate() {
            let c = n.coord;
            out.serialize(ResponseRow {
                node,
                layer: c.layer,
                channel: c.channel,
                row: c.row,
                col: c.col,
                response,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    /// File name carrying the probe metadata.
    pub fn file_name(&self) -> String {
        match self.epoch {
            Some(e) => format!("response_epoch{e:06}_flip{}.csv", self.flip_node),
            None => format!("response_flip{}.csv", self.flip_node),
        }
    }
}

/// Coupling weights with endpoint coordinates at one point in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSnapshot {
    pub epoch: usize,
    pub entries: Vec<CouplingEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub i: NodeId,
    pub j: NodeId,
    pub from: Coord,
    pub to: Coord,
    pub weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotRow {
    epoch: usize,
    i: NodeId,
    j: NodeId,
    i_layer: u32,
    i_channel: u32,
    i_row: u32,
    i_col: u32,
    j_layer: u32,
    j_channel: u32,
    j_row: u32,
    j_col: u32,
    weight: f64,
}

pub fn snapshot_couplings(net: &Network, epoch: usize) -> CouplingSnapshot {
    let nodes = net.nodes();
    CouplingSnapshot {
        epoch,
        entries: net
            .couplings()
            .iter()
            .enumerate()
            .map(|(k, c)| CouplingEntry {
                i: c.i,
                j: c.j,
                from: nodes[c.i].coord,
                to: nodes[c.j].coord,
                weight: net.coupling_weight(k),
            })
            .collect(),
    }
}

/// Per-coupling `b - a`.
pub fn diff_snapshots(a: &CouplingSnapshot, b: &CouplingSnapshot) -> Result<Vec<f64>> {
    if a.entries.len() != b.entries.len()
        || a.entries.iter().zip(&b.entries).any(|(x, y)| (x.i, x.j) != (y.i, y.j))
    {
        return Err(Error::TopologyMismatch(
            "snapshots cover different couplings".into(),
        ));
    }
    Ok(a.entries.iter().zip(&b.entries).map(|(x, y)| y.weight - x.weight).collect())
}

impl CouplingSnapshot {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for e in &self.entries {
            out.serialize(SnapshotRow {
                epoch: self.epoch,
                i: e.i,
                j: e.j,
                i_layer: e.from.layer,
                i_channel: e.from.channel,
                i_row: e.from.row,
                i_col: e.from.col,
                j_layer: e.to.layer,
                j_channel: e.to.channel,
                j_row: e.to.row,
                j_col: e.to.col,
                weight: e.weight,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a snapshot written by [`CouplingSnapshot::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let mut epoch = 0;
        let mut entries = Vec::new();
        for row in reader.deserialize::<SnapshotRow>() {
            let row = row?;
            epoch = row.epoch;
            entries.push(CouplingEntry {
                i: row.i,
                j: row.j,
                from: Coord {
                    layer: row.i_layer,
                    channel: row.i_channel,
                    row: row.i_row,
                    col: row.i_col,
                },
                to: Coord {
                    layer: row.j_layer,
                    channel: row.j_channel,
                    row: row.j_row,
                    col: row.j_col,
                },
                weight: row.weight,
            });
        }
        Ok(CouplingSnapshot { epoch, entries })
    }

    pub fn file_name(&self) -> String {
        format!("couplings_epoch{:06}.csv", self.epoch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn total_response_examples() {
        let mut field = ResponseField {
            values: vec![0.0; 5],
            epoch: None,
            flip_node: 0,
            base_phase: 0.0,
            flipped_phase: 0.0,
            pairs: 1,
            converged_pairs: 1,
        };
        assert_eq!(total_response(&field), 0.0);
        field.values[2] = 4.0;
        assert_eq!(total_response(&field), 4.0);
    }

    #[test]
    fn flipped_node_responds_fully() {
        let mut net = Network::all_to_all(3).unwrap();
        net.assign_roles(&[0, 1], &[2]).unwrap();
        net.init_parameters(2, 0.5).unwrap();
        let base = Sample {
            inputs: vec![(0, -FRAC_PI_2), (1, -FRAC_PI_2)],
            targets: vec![(2, 0.0)],
            label: None,
        };
        let field = response_probe(&net, &base, 1, FRAC_PI_2, &RelaxConfig::default(), 3).unwrap();
        assert!((field.values[1] - 4.0).abs() < 1e-12);
        assert_eq!(field.values[0], 0.0);
        assert_eq!(field.base_phase, -FRAC_PI_2);
        assert!(response_probe(&net, &base, 2, PI, &RelaxConfig::default(), 3).is_err());
    }

    #[test]
    fn diff_examples() {
        let mut net = Network::all_to_all(4).unwrap();
        net.init_parameters(8, 0.5).unwrap();
        let a = snapshot_couplings(&net, 0);
        assert!(diff_snapshots(&a, &a).unwrap().iter().all(|&d| d == 0.0));
        let other = snapshot_couplings(&Network::all_to_all(3).unwrap(), 0);
        assert!(diff_snapshots(&a, &other).is_err());
    }
}
