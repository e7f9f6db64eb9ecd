//! The `train`, `eval` and `probe` commands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use xy_ep::analysis::{response_probe, snapshot_couplings, ResponseField};
use xy_ep::checkpoint::Checkpoint;
use xy_ep::ep::{evaluate, evaluation_seed, CsvRecorder, Split, Tee, TrainObserver, TrainRecord, TrainSummary};
use xy_ep::graph::Network;
use xy_ep::relax::RelaxConfig;
use xy_ep::tasks::{self, Sample};

use crate::config::{LoadedConfig, ProbeConfig, Seeds, Task};
use crate::error::{CliError, CliResult};

pub struct Datasets {
    pub train: Vec<Sample>,
    pub test: Option<Vec<Sample>>,
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn set_threads(threads: usize) -> CliResult<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(CliError::config)
}

/// Builds the configured architecture with freshly initialized parameters.
fn build_network(lc: &LoadedConfig) -> CliResult<Network> {
    let cfg = &lc.config;
    let mut net = cfg.architecture.build().map_err(CliError::config)?;
    net.check_trainable().map_err(CliError::config)?;
    net.init_parameters(cfg.seeds.init, cfg.init.scale).map_err(CliError::config)?;
    Ok(net)
}

fn load_checkpoint(path: &Path, lc: &LoadedConfig) -> CliResult<Checkpoint> {
    let ck = Checkpoint::load(path).map_err(|e| match e {
        xy_ep::Error::File { .. } => CliError::config(e),
        other => CliError::Config(format!("{}: {other}", path.display())),
    })?;
    let expected = lc.config.architecture.build().map_err(CliError::config)?;
    if !ck.network.same_topology(&expected) {
        return Err(CliError::Config(format!(
            "{}: checkpoint topology does not match the configured architecture",
            path.display()
        )));
    }
    Ok(ck)
}

fn require(lc: &LoadedConfig, p: &Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
    let p = p
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("task needs data.{key}")))?;
    let path = lc.resolve(p);
    if !path.exists() {
        return Err(CliError::Data(format!("dataset file not found: {}", path.display())));
    }
    Ok(path)
}

fn load_mnist_split(images: &Path, labels: &Path, limit: Option<usize>, net: &Network) -> CliResult<Vec<Sample>> {
    let mut records = tasks::load_mnist(images, labels).map_err(CliError::data)?;
    if let Some(n) = limit {
        records.truncate(n);
    }
    records
        .iter()
        .map(|r| tasks::encode_mnist(r, net.inputs(), net.outputs()).map_err(CliError::config))
        .collect()
}

pub fn load_datasets(lc: &LoadedConfig, net: &Network) -> CliResult<Datasets> {
    let cfg = &lc.config;
    let data = &cfg.data;
    match cfg.task {
        Task::Xor => {
            if net.inputs().len() != 2 || net.outputs().len() != 1 {
                return Err(CliError::Config(format!(
                    "xor needs 2 inputs and 1 output, network has {} and {}",
                    net.inputs().len(),
                    net.outputs().len()
                )));
            }
            let train = tasks::xor_dataset(net, net.inputs()[0], net.inputs()[1], net.outputs()[0])
                .map_err(CliError::config)?;
            Ok(Datasets { train, test: None })
        }
        Task::Iris => {
            let path = require(lc, &data.iris, "iris")?;
            let records = tasks::load_iris(&path).map_err(CliError::data)?;
            let (train, test) =
                tasks::encode_iris(&records, net.inputs(), net.outputs(), cfg.seeds.split).map_err(CliError::config)?;
            Ok(Datasets { train, test: Some(test) })
        }
        Task::Mnist => {
            let images = require(lc, &data.train_images, "train_images")?;
            let labels = require(lc, &data.train_labels, "train_labels")?;
            let test = match (&data.test_images, &data.test_labels) {
                (None, None) => None,
                _ => Some((
                    require(lc, &data.test_images, "test_images")?,
                    require(lc, &data.test_labels, "test_labels")?,
                )),
            };
            let train = load_mnist_split(&images, &labels, data.train_limit, net)?;
            let test = match test {
                Some((i, l)) => Some(load_mnist_split(&i, &l, data.test_limit, net)?),
                None => None,
            };
            Ok(Datasets { train, test })
        }
        Task::Teacher => {
            let seed = data
                .teacher_seed
                .ok_or_else(|| CliError::Config("teacher task needs data.teacher_seed".into()))?;
            let mut teacher = cfg.architecture.build().map_err(CliError::config)?;
            teacher
                .init_parameters(seed, data.teacher_scale.unwrap_or(1.0))
                .map_err(CliError::config)?;
            let relax = &cfg.training.relax;
            let n = data.teacher_samples.unwrap_or(32);
            let train = tasks::teacher_dataset(&teacher, n, cfg.seeds.split, relax).map_err(CliError::config)?;
            let test = match data.teacher_test_samples {
                Some(m) => Some(
                    tasks::teacher_dataset(&teacher, m, cfg.seeds.split.wrapping_add(1), relax)
                        .map_err(CliError::config)?,
                ),
                None => None,
            };
            Ok(Datasets { train, test })
        }
    }
}

fn probe_field(net: &Network, probe: &ProbeConfig, relax: &RelaxConfig, epoch: usize) -> CliResult<ResponseField> {
    let inputs = net.inputs();
    let base_phases = match &probe.base_phases {
        Some(p) if p.len() != inputs.len() => {
            return Err(CliError::Config(format!(
                "probe.base_phases has {} entries, network has {} inputs",
                p.len(),
                inputs.len()
            )))
        }
        Some(p) => p.clone(),
        None => vec![tasks::DOWN; inputs.len()],
    };
    let flip = *inputs.get(probe.flip_input).ok_or_else(|| {
        CliError::Config(format!(
            "probe.flip_input {} out of range ({} inputs)",
            probe.flip_input,
            inputs.len()
        ))
    })?;
    let base = Sample {
        inputs: inputs.iter().copied().zip(base_phases).collect(),
        targets: Vec::new(),
        label: None,
    };
    let cfg = RelaxConfig {
        restarts: probe.restarts,
        ..relax.clone()
    };
    let mut field = response_probe(net, &base, flip, probe.flipped_phase, &cfg, probe.seed).map_err(CliError::config)?;
    field.epoch = Some(epoch);
    Ok(field)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Writes the response field (when a probe is configured) and the coupling
/// snapshot for `epoch`; returns the files written.
fn write_probes(
    dir: &Path,
    net: &Network,
    epoch: usize,
    probe: Option<&ProbeConfig>,
    relax: &RelaxConfig,
) -> CliResult<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();
    if let Some(p) = probe {
        let field = probe_field(net, p, relax, epoch)?;
        let path = dir.join(field.file_name());
        field.write_csv(net, create(&path)?).map_err(CliError::config)?;
        written.push(path);
    }
    let snap = snapshot_couplings(net, epoch);
    let path = dir.join(snap.file_name());
    snap.write_csv(create(&path)?).map_err(CliError::config)?;
    written.push(path);
    Ok(written)
}

/// Checkpoints and probes at scheduled epochs.
struct RunObserver<'a> {
    out: PathBuf,
    checkpoint_interval: usize,
    last_epoch: usize,
    probe_epochs: &'a [usize],
    probe: Option<&'a ProbeConfig>,
    relax: &'a RelaxConfig,
    last_records: Vec<TrainRecord>,
}

impl TrainObserver for RunObserver<'_> {
    fn record(&mut self, r: &TrainRecord) -> xy_ep::Result<()> {
        eprintln!(
            "epoch {:>6} {:<5} D={:.5}{} converged={:.3}",
            r.epoch,
            r.split.as_str(),
            r.mean_distance,
            r.accuracy.map(|a| format!(" acc={a:.4}")).unwrap_or_default(),
            r.converged_fraction
        );
        self.last_records.retain(|x| x.split != r.split);
        self.last_records.push(r.clone());
        Ok(())
    }

    fn epoch_end(&mut self, epoch: usize, net: &Network) -> xy_ep::Result<()> {
        let scheduled = self.checkpoint_interval > 0 && epoch % self.checkpoint_interval == 0;
        if epoch == 0 || epoch == self.last_epoch || scheduled {
            let ck = Checkpoint {
                epoch,
                network: net.clone(),
            };
            ck.save(self.out.join("checkpoints").join(Checkpoint::file_name(epoch)))?;
        }
        if self.probe_epochs.contains(&epoch) {
            write_probes(&self.out.join("probes"), net, epoch, self.probe, self.relax)
                .map_err(|e| xy_ep::Error::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    library_version: &'a str,
    cli_version: &'a str,
    config_path: String,
    config_sha256: String,
    task: String,
    seeds: &'a Seeds,
    started_unix: u64,
    wall_seconds: f64,
    status: String,
    epochs: Option<usize>,
    updates: Option<usize>,
    skipped_samples: Option<usize>,
    partial_samples: Option<usize>,
    final_records: &'a [TrainRecord],
}

pub fn cmd_train(config: &Path) -> CliResult<()> {
    let lc = LoadedConfig::load(config)?;
    let cfg = &lc.config;
    set_threads(cfg.threads)?;
    let mut net = build_network(&lc)?;
    let data = load_datasets(&lc, &net)?;
    let out = lc.output_dir();
    create_dir(&out.join("checkpoints"))?;

    let started = unix_seconds();
    let clock = Instant::now();
    let mut csv = CsvRecorder::new(create(&out.join("records.csv"))?, cfg.output.record_wall_time)
        .map_err(CliError::config)?;
    let mut observer = RunObserver {
        out: out.clone(),
        checkpoint_interval: cfg.output.checkpoint_interval,
        last_epoch: cfg.training.epochs,
        probe_epochs: &cfg.output.probe_epochs,
        probe: cfg.probe.as_ref(),
        relax: &cfg.training.relax,
        last_records: Vec::new(),
    };
    let result = xy_ep::ep::train(
        &mut net,
        &data.train,
        data.test.as_deref(),
        &cfg.training,
        cfg.seeds.training,
        &mut Tee(&mut csv, &mut observer),
    );
    let (status, summary): (String, Option<TrainSummary>) = match &result {
        Ok(s) => ("completed".into(), Some(*s)),
        Err(e) => (format!("failed: {e}"), None),
    };
    let manifest = Manifest {
        library_version: xy_ep::VERSION,
        cli_version: env!("CARGO_PKG_VERSION"),
        config_path: lc.path.display().to_string(),
        config_sha256: sha256_hex(&lc.text),
        task: format!("{:?}", cfg.task).to_lowercase(),
        seeds: &cfg.seeds,
        started_unix: started,
        wall_seconds: clock.elapsed().as_secs_f64(),
        status,
        epochs: summary.map(|s| s.epochs),
        updates: summary.map(|s| s.updates),
        skipped_samples: summary.map(|s| s.skipped_samples),
        partial_samples: summary.map(|s| s.partial_samples),
        final_records: &observer.last_records,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(CliError::config)?;
    let path = out.join("manifest.json");
    fs::write(&path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    result?;
    Ok(())
}

fn eval_splits(which: Option<Split>, data: &Datasets) -> CliResult<Vec<(Split, &[Sample])>> {
    let mut splits = Vec::new();
    if which != Some(Split::Test) {
        splits.push((Split::Train, data.train.as_slice()));
    }
    if which != Some(Split::Train) {
        match &data.test {
            Some(t) => splits.push((Split::Test, t.as_slice())),
            None if which == Some(Split::Test) => {
                return Err(CliError::Config("this task has no test split".into()));
            }
            None => {}
        }
    }
    Ok(splits)
}

pub fn cmd_eval(checkpoint: &Path, config: &Path, split: Option<Split>) -> CliResult<()> {
    let lc = LoadedConfig::load(config)?;
    let cfg = &lc.config;
    set_threads(cfg.threads)?;
    let ck = load_checkpoint(checkpoint, &lc)?;
    let data = load_datasets(&lc, &ck.network)?;
    let out = lc.output_dir();
    create_dir(&out)?;
    let path = out.join(format!("eval_epoch{:06}.csv", ck.epoch));
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["epoch", "split", "mean_distance", "accuracy", "converged_fraction"])
        .map_err(CliError::config)?;
    for (s, samples) in eval_splits(split, &data)? {
        let m = evaluate(&ck.network, samples, &cfg.training.relax, evaluation_seed(cfg.seeds.training))?;
        let acc = m.accuracy.map(|a| a.to_string()).unwrap_or_default();
        println!(
            "{} mean_distance={} accuracy={} converged_fraction={}",
            s.as_str(),
            m.mean_distance,
            if acc.is_empty() { "n/a" } else { &acc },
            m.converged_fraction
        );
        w.write_record([
            ck.epoch.to_string(),
            s.as_str().to_string(),
            m.mean_distance.to_string(),
            acc,
            m.converged_fraction.to_string(),
        ])
        .map_err(CliError::config)?;
    }
    w.flush().map_err(CliError::config)?;
    Ok(())
}

pub fn cmd_probe(checkpoint: &Path, config: &Path) -> CliResult<()> {
    let lc = LoadedConfig::load(config)?;
    let cfg = &lc.config;
    set_threads(cfg.threads)?;
    let ck = load_checkpoint(checkpoint, &lc)?;
    let probe = cfg
        .probe
        .as_ref()
        .ok_or_else(|| CliError::Config("probe needs a [probe] section".into()))?;
    let dir = lc.output_dir().join("probes");
    for path in write_probes(&dir, &ck.network, ck.epoch, Some(probe), &cfg.training.relax)? {
        println!("{}", path.display());
    }
    Ok(())
}
