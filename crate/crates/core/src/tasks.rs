//! Datasets and their phase encodings.
//!
//! Binary values use the two poles of the circle: false is `-pi/2`
//! ("down"), true is `+pi/2` ("up"). Class labels are read from output
//! phases through `p_i ∝ 1 + sin(phi_i)`; the training target puts the true
//! class at `+pi/2` and every other class output at `-pi/2`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{Drive, State};
use crate::error::{Error, Result};
use crate::graph::{Network, NodeId, NodeRole};
use crate::relax::{relax_multistart, RelaxConfig};
use crate::seed;

pub const UP: f64 = FRAC_PI_2;
pub const DOWN: f64 = -FRAC_PI_2;

/// Clamped input phases plus target output phases (and a class label when
/// the task is a classification).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub inputs: Vec<(NodeId, f64)>,
    pub targets: Vec<(NodeId, f64)>,
    #[serde(default)]
    pub label: Option<usize>,
}

impl Sample {
    /// Checks node roles against `net`.
    pub fn validate(&self, net: &Network) -> Result<()> {
        check_roles(net, self.inputs.iter().map(|p| p.0), NodeRole::Input)?;
        check_roles(net, self.targets.iter().map(|p| p.0), NodeRole::Output)?;
        crate::energy::check_targets(net, &self.targets)
    }
}

fn check_roles(net: &Network, ids: impl IntoIterator<Item = NodeId>, role: NodeRole) -> Result<()> {
    for id in ids {
        if id >= net.len() {
            return Err(Error::UnknownNode(id));
        }
        if net.role(id) != role {
            return Err(Error::RoleMismatch {
                node: id,
                expected: role,
                found: net.role(id),
            });
        }
    }
    Ok(())
}

/// Target phases for a class label over the given output nodes.
pub fn class_targets(outputs: &[NodeId], label: usize) -> Vec<(NodeId, f64)> {
    outputs
        .iter()
        .enumerate()
        .map(|(k, &o)| (o, if k == label { UP } else { DOWN }))
        .collect()
}

fn encode_bit(b: bool) -> f64 {
    if b {
        UP
    } else {
        DOWN
    }
}

/// The four XOR patterns in truth-table order (FF, FT, TF, TT).
pub fn xor_dataset(net: &Network, in1: NodeId, in2: NodeId, out: NodeId) -> Result<Vec<Sample>> {
    check_roles(net, [in1, in2], NodeRole::Input)?;
    check_roles(net, [out], NodeRole::Output)?;
    Ok([(false, false), (false, true), (true, false), (true, true)]
        .into_iter()
        .map(|(a, b)| Sample {
            inputs: vec![(in1, encode_bit(a)), (in2, encode_bit(b))],
            targets: vec![(out, encode_bit(a ^ b))],
            label: None,
        })
        .collect())
}

/// Class probabilities `p_i = (1 + sin phi_i) / sum_j (1 + sin phi_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilities(pub Vec<f64>);

impl ClassProbabilities {
    /// Most probable class; ties go to the lowest index.
    pub fn classify(&self) -> usize {
        classify(&self.0)
    }
}

pub fn decode_probabilities(phases: &[f64]) -> ClassProbabilities {
    let raw: Vec<f64> = phases.iter().map(|p| (1.0 + p.sin()).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || raw.is_empty() {
        let n = phases.len().max(1) as f64;
        return ClassProbabilities(vec![1.0 / n; phases.len()]);
    }
    ClassProbabilities(raw.into_iter().map(|r| r / total).collect())
}

/// Argmax with lowest-index tie-break.
pub fn classify(scores: &[f64]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(best, bv), (k, &v)| if v > bv { (k, v) } else { (best, bv) })
        .0
}

/// Decodes the class predicted by `state` on the given output nodes.
pub fn predict(state: &State, outputs: &[NodeId]) -> usize {
    let phases: Vec<f64> = outputs.iter().map(|&o| state[o]).collect();
    decode_probabilities(&phases).classify()
}

// ---------------------------------------------------------------------------
// Iris

#[derive(Debug, Clone, PartialEq)]
pub struct IrisRecord {
    pub features: [f64; 4],
    pub class: usize,
}

/// Parses a headerless (or single-header-row) 5-column CSV: four numeric
/// features and a string label. Classes are numbered by first appearance.
pub fn parse_iris(text: &str) -> Result<(Vec<IrisRecord>, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut classes: Vec<String> = Vec::new();
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        if row.iter().all(|f| f.is_empty()) {
            continue;
        }
        if row.len() != 5 {
            return Err(Error::Dataset(format!(
                "iris line {}: expected 5 columns, found {}",
                line + 1,
                row.len()
            )));
        }
        let parsed: std::result::Result<Vec<f64>, _> = row.iter().take(4).map(str::parse::<f64>).collect();
        let features = match parsed {
            Ok(f) => [f[0], f[1], f[2], f[3]],
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::Dataset(format!("iris line {}: {e}", line + 1)));
            }
        };
        let name = &row[4];
        let class = match classes.iter().position(|c| c == name) {
            Some(k) => k,
            None => {
                classes.push(name.to_string());
                classes.len() - 1
            }
        };
        records.push(IrisRecord { features, class });
    }
    Ok((records, classes))
}

/// Loads the Iris CSV and checks it has 150 records in 3 classes of 50.
pub fn load_iris(path: impl AsRef<Path>) -> Result<Vec<IrisRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let (records, classes) = parse_iris(&text)?;
    if records.len() != 150 || classes.len() != 3 {
        return Err(Error::Dataset(format!(
            "{}: expected 150 records in 3 classes, found {} in {}",
            path.display(),
            records.len(),
            classes.len()
        )));
    }
    Ok(records)
}

pub const IRIS_TRAIN_PER_CLASS: usize = 40;
pub const IRIS_TEST_PER_CLASS: usize = 10;

/// Per-feature affine map of the training range onto `[-pi/2, pi/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaling {
    pub min: [f64; 4],
    pub max: [f64; 4],
}

impl FeatureScaling {
    pub fn fit(records: &[&IrisRecord]) -> Self {
        let mut min = [f64::INFINITY; 4];
        let mut max = [f64::NEG_INFINITY; 4];
        for r in records {
            for k in 0..4 {
                min[k] = min[k].min(r.features[k]);
                max[k] = max[k].max(r.features[k]);
            }
        }
        FeatureScaling { min, max }
    }

    pub fn phase(&self, k: usize, x: f64) -> f64 {
        let span = self.max[k] - self.min[k];
        if span > 0.0 {
            -FRAC_PI_2 + PI * (x - self.min[k]) / span
        } else {
            0.0
        }
    }
}

/// Stratified seeded split (40 train / 10 test per class) with min-max
/// scaling fitted on the training split.
pub fn encode_iris(
    records: &[IrisRecord],
    inputs: &[NodeId],
    outputs: &[NodeId],
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if inputs.len() != 4 || outputs.len() != 3 {
        return Err(Error::Dataset(format!(
            "iris needs 4 inputs and 3 outputs, network has {} and {}",
            inputs.len(),
            outputs.len()
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<&IrisRecord>> = BTreeMap::new();
    for r in records {
        by_class.entry(r.class).or_default().push(r);
    }
    if by_class.len() != 3 || by_class.values().any(|v| v.len() != IRIS_TRAIN_PER_CLASS + IRIS_TEST_PER_CLASS) {
        return Err(Error::Dataset("iris split needs 3 classes of 50 records".into()));
    }
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..IRIS_TRAIN_PER_CLASS]);
        test.extend_from_slice(&members[IRIS_TRAIN_PER_CLASS..]);
    }
    let scaling = FeatureScaling::fit(&train);
    let encode = |r: &IrisRecord| Sample {
        inputs: inputs
            .iter()
            .enumerate()
            .map(|(k, &id)| (id, scaling.phase(k, r.features[k])))
            .collect(),
        targets: class_targets(outputs, r.class),
        label: Some(r.class),
    };
    Ok((
        train.iter().map(|r| encode(r)).collect(),
        test.iter().map(|r| encode(r)).collect(),
    ))
}

// ---------------------------------------------------------------------------
// MNIST / IDX

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

/// Unsigned-byte image stack from an IDX3 file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        if self.rows * self.cols == 0 {
            0
        } else {
            self.pixels.len() / (self.rows * self.cols)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image(&self, k: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[k * n..(k + 1) * n]
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Truncated {
            expected: at + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: bytes[16..expected].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes[8..expected].to_vec())
}

pub fn write_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IDX_IMAGES_MAGIC, images.len() as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnistRecord {
    pub pixels: Vec<u8>,
    pub label: u8,
}

/// Reads an IDX3 image file and its IDX1 label file.
pub fn load_mnist(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Vec<MnistRecord>> {
    let read = |p: &Path| fs::read(p).map_err(|e| Error::file(p, e));
    let imgs = parse_idx_images(&read(images.as_ref())?)?;
    let labs = parse_idx_labels(&read(labels.as_ref())?)?;
    if imgs.len() != labs.len() {
        return Err(Error::Dataset(format!(
            "{} images but {} labels",
            imgs.len(),
            labs.len()
        )));
    }
    if let Some(&bad) = labs.iter().find(|&&l| l > 9) {
        return Err(Error::Dataset(format!("label {bad} outside 0..=9")));
    }
    Ok(labs
        .iter()
        .enumerate()
        .map(|(k, &label)| MnistRecord {
            pixels: imgs.image(k).to_vec(),
            label,
        })
        .collect())
}

/// Pixel byte to phase: `pi * (byte / 255) - pi/2`.
pub fn pixel_phase(byte: u8) -> f64 {
    PI * (byte as f64 / 255.0) - FRAC_PI_2
}

pub fn encode_mnist(record: &MnistRecord, inputs: &[NodeId], outputs: &[NodeId]) -> Result<Sample> {
    if inputs.len() != record.pixels.len() {
        return Err(Error::LengthMismatch {
            expected: inputs.len(),
            got: record.pixels.len(),
        });
    }
    if outputs.len() != 10 {
        return Err(Error::Dataset(format!("MNIST needs 10 outputs, network has {}", outputs.len())));
    }
    Ok(Sample {
        inputs: inputs.iter().zip(&record.pixels).map(|(&id, &p)| (id, pixel_phase(p))).collect(),
        targets: class_targets(outputs, record.label as usize),
        label: Some(record.label as usize),
    })
}

// ---------------------------------------------------------------------------
// Teacher toy task

/// Samples labelled by a fixed teacher network: inputs uniform on
/// `[-pi/2, pi/2]`, targets the teacher's first free steady state outputs.
pub fn teacher_dataset(teacher: &Network, n: usize, seed: u64, cfg: &RelaxConfig) -> Result<Vec<Sample>> {
    teacher.check_trainable()?;
    let single = RelaxConfig {
        restarts: 1,
        ..cfg.clone()
    };
    (0..n)
        .map(|k| {
            let mut rng = seed::rng(seed::derive(seed, &[k as u64]));
            let inputs: Vec<(NodeId, f64)> = teacher
                .inputs()
                .iter()
                .map(|&i| (i, rng.random_range(-FRAC_PI_2..=FRAC_PI_2)))
                .collect();
            let set = relax_multistart(teacher, &inputs, &Drive::Free, &single, seed::derive(seed, &[k as u64, 1]))?;
            let run = &set.runs[0];
            Ok(Sample {
                targets: teacher.outputs().iter().map(|&o| (o, run.state[o])).collect(),
                inputs,
                label: None,
            })
        })
        .collect()
}
