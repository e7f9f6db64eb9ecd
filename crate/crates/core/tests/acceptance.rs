//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line each;
//! exits non-zero if any fails.
//!
//! ```text
//! cargo test --release -p xy-ep --test acceptance              # everything
//! cargo test --release -p xy-ep --test acceptance -- ac1 ac6   # a subset
//! ```
//!
//! The full run takes several hours on one core (MNIST dominates), so the
//! target is not part of the default `cargo test` set.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{central_difference, random_state, relative_error, rng};
use rand::Rng;
use xy_ep::analysis::response_probe;
use xy_ep::energy::{external_cost, internal_energy, phase_force, Drive, NudgeMode, State};
use xy_ep::ep::{ep_gradient, sgd_step, train, BatchReduction, CsvRecorder, EpConfig, Sampling, Split, TrainRecord};
use xy_ep::graph::{ArchitectureSpec, LclSpec, Network, Placement, ShellSet};
use xy_ep::relax::{relax, relax_multistart, relax_traced, RelaxConfig};
use xy_ep::tasks::{
    class_targets, decode_probabilities, encode_iris, encode_mnist, load_iris, load_mnist, xor_dataset, Sample, DOWN,
    UP,
};

struct Outcome {
    pass: bool,
    detail: String,
}

struct Criterion {
    key: &'static str,
    title: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { key: "ac1", title: "gradient oracle", budget: minutes(2), run: ac1_gradient_oracle },
        Criterion { key: "ac2", title: "XOR all-to-all", budget: minutes(10), run: ac2_xor_all_to_all },
        Criterion { key: "ac3", title: "XOR lattice 4NSQ vs SQ", budget: minutes(60), run: ac3_lattice_contrast },
        Criterion { key: "ac4", title: "Iris shallow 4NSQ lattice", budget: minutes(30), run: ac4_iris },
        Criterion { key: "ac5", title: "MNIST subset LCL vs baselines", budget: minutes(240), run: ac5_mnist },
        Criterion { key: "ac6", title: "property suites", budget: minutes(6), run: ac6_properties },
    ];
    let wanted: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .map(|a| a.to_lowercase())
        .collect();
    let mut failed = 0;
    for c in &criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == c.key) {
            continue;
        }
        let t = Instant::now();
        let outcome = (c.run)();
        let took = t.elapsed();
        let in_time = took <= c.budget;
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {} ({}): {} [{:.1} s, budget {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            c.key.to_uppercase(),
            c.title,
            outcome.detail,
            took.as_secs_f64(),
            c.budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------------------
// AC1

fn tight() -> RelaxConfig {
    RelaxConfig { tolerance: 1e-11, max_steps: 2_000_000, ..RelaxConfig::default() }
}

/// Network `k` of the oracle family: even `k` all-to-all with 3..=8 nodes,
/// odd `k` an SQ lattice of up to 8 sites. Couplings and bias components are
/// uniform on [-1, 1], inputs uniform on (-pi/2, pi/2), and each target lies
/// within 1 rad of the free steady-state output.
fn oracle_case(k: u64) -> (Network, Sample) {
    let mut r = rng(1000 + k);
    let mut net = if k % 2 == 0 {
        let n = r.random_range(3..=8);
        let mut net = Network::all_to_all(n).unwrap();
        let outputs: Vec<usize> = if n > 4 { vec![n - 2, n - 1] } else { vec![n - 1] };
        net.assign_roles(&[0, 1], &outputs).unwrap();
        net
    } else {
        let (rows, cols) = [(2, 3), (2, 4), (3, 2), (4, 2), (2, 2)][r.random_range(0..5)];
        let mut net = Network::lattice(rows, cols, &ShellSet::sq()).unwrap();
        net.assign_roles(&[0, 1], &[(rows * cols) as usize - 1]).unwrap();
        net
    };
    net.init_parameters(2000 + k, 1.0).unwrap();
    for i in 0..net.len() {
        net.set_bias(i, r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0));
    }
    let inputs: Vec<(usize, f64)> = net.inputs().iter().map(|&i| (i, r.random_range(-1.5..1.5))).collect();
    let x0 = relax_multistart(&net, &inputs, &Drive::Free, &tight(), 7).unwrap().runs[0].state.clone();
    let targets = net.outputs().iter().map(|&o| (o, x0[o] + r.random_range(-1.0..1.0))).collect();
    (net, Sample { inputs, targets, label: None })
}

/// `dL/dtheta` with `L = C(free steady state)` by central differences; every
/// perturbed relaxation starts from the unperturbed steady state so it stays
/// on the same branch.
fn loss_gradient_by_differences(net: &Network, sample: &Sample) -> Vec<f64> {
    let x0 = relax_multistart(net, &sample.inputs, &Drive::Free, &tight(), 7).unwrap().runs[0].state.clone();
    let coords: Vec<usize> = (0..net.n_params()).collect();
    central_difference(net.params(), &coords, 1e-5, |p| {
        let mut probe = net.clone();
        probe.params_mut().copy_from_slice(p);
        let run = relax(&probe, x0.clone(), &sample.inputs, &Drive::Free, &tight()).unwrap();
        assert!(run.converged);
        external_cost(&probe, &run.state, &sample.targets).unwrap()
    })
}

fn ac1_gradient_oracle() -> Outcome {
    let cases = 24;
    let (mut standard_ok, mut symmetric_ok) = (0, 0);
    let (mut standard_worst, mut symmetric_worst) = (0.0f64, 0.0f64);
    let mut standard_errors = Vec::new();
    for k in 0..cases {
        let (net, sample) = oracle_case(k);
        let oracle = loss_gradient_by_differences(&net, &sample);
        let error = |beta: f64, symmetric: bool| {
            let cfg = EpConfig { beta, symmetric, relax: tight(), ..EpConfig::default() };
            relative_error(&ep_gradient(&net, &sample, &cfg, 7).unwrap().grad, &oracle)
        };
        let standard = error(0.1, false);
        let symmetric = error(0.01, true);
        standard_errors.push(standard);
        standard_worst = standard_worst.max(standard);
        symmetric_worst = symmetric_worst.max(symmetric);
        standard_ok += usize::from(standard <= 0.05);
        symmetric_ok += usize::from(symmetric <= 0.01);
    }
    standard_errors.sort_by(f64::total_cmp);
    let median = standard_errors[standard_errors.len() / 2];
    Outcome {
        pass: standard_ok == cases as usize && symmetric_ok == cases as usize,
        detail: format!(
            "standard beta=0.1 within 5%: {standard_ok}/{cases} (median {:.1}%, worst {:.1}%); \
             symmetric beta=0.01 within 1%: {symmetric_ok}/{cases} (worst {:.3}%)",
            100.0 * median,
            100.0 * standard_worst,
            100.0 * symmetric_worst
        ),
    }
}

// ---------------------------------------------------------------------------
// AC2

fn ac2_xor_all_to_all() -> Outcome {
    let mut reached = 0;
    let mut bests = Vec::new();
    for seed in 0..10u64 {
        let mut net = Network::all_to_all(6).unwrap();
        net.assign_roles(&[0, 1], &[5]).unwrap();
        net.init_parameters(seed, 0.5).unwrap();
        let data = xor_dataset(&net, 0, 1, 5).unwrap();
        let mut cfg = EpConfig {
            beta: 0.1,
            nudge: NudgeMode::Tangent,
            learning_rate: 0.01,
            epochs: 1000,
            batch_size: 1,
            sampling: Sampling::Shuffle,
            eval_interval: 10,
            ..EpConfig::default()
        };
        cfg.relax.restarts = 5;
        let mut records: Vec<TrainRecord> = Vec::new();
        train(&mut net, &data, None, &cfg, seed, &mut records).unwrap();
        let best = records.iter().map(|r| r.mean_distance).fold(f64::INFINITY, f64::min);
        reached += usize::from(best < 0.05);
        bests.push(format!("{best:.3}"));
    }
    Outcome {
        pass: reached >= 6,
        detail: format!("{reached}/10 seeds reach D < 0.05 within 1000 epochs (best D per seed: {})", bests.join(" ")),
    }
}

// ---------------------------------------------------------------------------
// AC3

/// Mean final distance over `seeds` of XOR training on a 9x9 lattice with
/// inputs at (2,2), (3,6) and the output at (6,4): the 15x15 layout scaled
/// down, keeping the output out of direct reach of both inputs.
fn lattice_xor_final_distance(shells: &ShellSet, seeds: u64, epochs: usize) -> Vec<f64> {
    (0..seeds)
        .map(|seed| {
            let spec = ArchitectureSpec::Lattice {
                rows: 9,
                cols: 9,
                shells: shells.clone(),
                placement: Placement::Explicit { inputs: vec![(2, 2), (3, 6)], outputs: vec![(6, 4)] },
            };
            let mut net = spec.build().unwrap();
            net.init_parameters(seed, 0.5).unwrap();
            let (a, b, out) = (net.inputs()[0], net.inputs()[1], net.outputs()[0]);
            let data = xor_dataset(&net, a, b, out).unwrap();
            let mut cfg = EpConfig {
                nudge: NudgeMode::Tangent,
                learning_rate: 0.01,
                epochs,
                batch_size: 1,
                sampling: Sampling::Shuffle,
                eval_interval: epochs,
                ..EpConfig::default()
            };
            cfg.relax.restarts = 5;
            let mut records: Vec<TrainRecord> = Vec::new();
            train(&mut net, &data, None, &cfg, seed, &mut records).unwrap();
            records.last().unwrap().mean_distance
        })
        .collect()
}

fn ac3_lattice_contrast() -> Outcome {
    let (seeds, epochs) = (5, 500);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let sq = lattice_xor_final_distance(&ShellSet::sq(), seeds, epochs);
    let nsq4 = lattice_xor_final_distance(&ShellSet::nsq4(), seeds, epochs);
    let fmt = |v: &[f64]| v.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>().join(" ");
    Outcome {
        pass: mean(&nsq4) < mean(&sq),
        detail: format!(
            "mean final D after {epochs} epochs over {seeds} seeds: 4NSQ {:.3} [{}] vs SQ {:.3} [{}]",
            mean(&nsq4),
            fmt(&nsq4),
            mean(&sq),
            fmt(&sq)
        ),
    }
}

// ---------------------------------------------------------------------------
// AC4

const IRIS_EPOCHS: usize = 400;

fn ac4_iris() -> Outcome {
    let records = load_iris(data("iris.csv")).unwrap();
    let spec = ArchitectureSpec::Lattice {
        rows: 3,
        cols: 7,
        shells: ShellSet::nsq4(),
        placement: Placement::Edges { inputs: 4, outputs: 3, spacing: 2 },
    };
    let (mut train_ok, mut test_perfect) = (0, 0);
    let mut rows = Vec::new();
    for seed in 0..10u64 {
        let mut net = spec.build().unwrap();
        net.init_parameters(seed, 0.5).unwrap();
        let (train_set, test_set) = encode_iris(&records, net.inputs(), net.outputs(), seed).unwrap();
        let mut cfg = EpConfig {
            nudge: NudgeMode::Standard,
            learning_rate: 0.001,
            epochs: IRIS_EPOCHS,
            batch_size: 30,
            batches_per_epoch: Some(4),
            reduction: BatchReduction::Sum,
            eval_interval: 10,
            ..EpConfig::default()
        };
        cfg.relax.restarts = 5;
        let mut log: Vec<TrainRecord> = Vec::new();
        train(&mut net, &train_set, Some(&test_set), &cfg, seed, &mut log).unwrap();
        let last = |split: Split| log.iter().rev().find(|r| r.split == split).unwrap().accuracy.unwrap();
        let best_test = log
            .iter()
            .filter(|r| r.split == Split::Test)
            .map(|r| r.accuracy.unwrap())
            .fold(0.0, f64::max);
        train_ok += usize::from(last(Split::Train) > 0.9);
        test_perfect += usize::from(best_test == 1.0);
        rows.push(format!("{:.3}/{:.3}", last(Split::Train), best_test));
    }
    Outcome {
        pass: train_ok >= 7 && test_perfect >= 1,
        detail: format!(
            "final train accuracy > 90% on {train_ok}/10 seeds; 100% test accuracy reached on {test_perfect}/10 \
             (per seed final train / best test: {})",
            rows.join(" ")
        ),
    }
}

// ---------------------------------------------------------------------------
// AC5

const MNIST_EPOCHS: usize = 100;

/// Trains `net` on the 2,000-image subset with the shared MNIST settings and
/// returns its final accuracy on the 500 test images.
fn mnist_test_accuracy(mut net: Network, seed: u64) -> (f64, usize) {
    net.init_parameters(seed, 0.1).unwrap();
    let train_set = mnist_samples(&net, "train-images-idx3-ubyte", "train-labels-idx1-ubyte");
    let test_set = mnist_samples(&net, "test-images-idx3-ubyte", "test-labels-idx1-ubyte");
    assert_eq!((train_set.len(), test_set.len()), (2000, 500));
    let cfg = EpConfig {
        nudge: NudgeMode::Standard,
        learning_rate: 1e-4,
        epochs: MNIST_EPOCHS,
        batch_size: 200,
        batches_per_epoch: Some(1),
        reduction: BatchReduction::Sum,
        eval_interval: MNIST_EPOCHS,
        eval_train: false,
        relax: RelaxConfig { max_steps: 200_000, ..RelaxConfig::default() },
        ..EpConfig::default()
    };
    let mut log: Vec<TrainRecord> = Vec::new();
    let summary = train(&mut net, &train_set, Some(&test_set), &cfg, seed, &mut log).unwrap();
    (log.last().unwrap().accuracy.unwrap(), summary.skipped_samples)
}

fn ac5_mnist() -> Outcome {
    let lcl = LclSpec {
        input_rows: 28,
        input_cols: 28,
        window: 6,
        stride: 1,
        channels: 1,
        depth: 1,
        weight_shared: false,
        intra_shells: None,
        outputs: 10,
    };
    let nets = [
        ("none", Network::dense_layered(&[784, 10]).unwrap()),
        ("DL 784-31-10", Network::dense_layered(&[784, 31, 10]).unwrap()),
        ("LCL 6x6", Network::lcl(&lcl).unwrap()),
    ];
    let results: Vec<(&str, usize, f64, usize)> = nets
        .into_iter()
        .map(|(name, net)| {
            let couplings = net.n_slots();
            let (acc, skipped) = mnist_test_accuracy(net, 0);
            (name, couplings, acc, skipped)
        })
        .collect();
    let (none, dl, lcl) = (results[0].2, results[1].2, results[2].2);
    Outcome {
        pass: lcl > none && lcl > dl,
        detail: format!(
            "test accuracy after {MNIST_EPOCHS} epochs: {}",
            results
                .iter()
                .map(|(n, c, a, s)| format!("{n} ({c} couplings) {:.1}% [{s} skipped]", 100.0 * a))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

// ---------------------------------------------------------------------------
// AC6

fn check(name: &str, ok: bool, failures: &mut Vec<String>) {
    if !ok {
        failures.push(name.to_string());
    }
}

fn small_net(k: u64) -> Network {
    let mut r = rng(7000 + k);
    common::random_network(&mut r, 1.0, 1.0)
}

fn ac6_properties() -> Outcome {
    let mut failures = Vec::new();
    let mut timings = Vec::new();
    let mut timed = |name: &str, f: &mut dyn FnMut() -> bool| {
        let t = Instant::now();
        let ok = f();
        let took = t.elapsed();
        timings.push(format!("{name} {:.1}s", took.as_secs_f64()));
        check(name, ok && took <= minutes(1), &mut failures);
    };

    timed("force-fd", &mut || {
        (0..40).all(|k| {
            let net = small_net(k);
            let mut r = rng(k);
            let s = random_state(&mut r, net.len());
            let targets: Vec<(usize, f64)> = net.outputs().iter().map(|&o| (o, r.random_range(-PI..PI))).collect();
            let free: Vec<usize> = (0..net.len()).collect();
            let cases = [
                (NudgeMode::Free, 0.0, None),
                (NudgeMode::Standard, 0.3, None),
                (NudgeMode::Tangent, 0.3, Some(s.clone())),
            ];
            cases.iter().all(|(mode, beta, reference)| {
                let drive = Drive::new(*mode, *beta, &targets, reference.as_ref()).unwrap();
                let force = phase_force(&net, &s, &targets, *beta, *mode, reference.as_ref()).unwrap();
                let numeric = central_difference(&s.0, &free, 1e-6, |x| {
                    xy_ep::energy::total_energy(&net, &State(x.to_vec()), &drive).unwrap()
                });
                let minus: Vec<f64> = numeric.iter().map(|g| -g).collect();
                let inputs_zero = net.inputs().iter().all(|&i| force[i] == 0.0);
                let free_only: Vec<usize> = free.iter().copied().filter(|i| !net.inputs().contains(i)).collect();
                let a: Vec<f64> = free_only.iter().map(|&i| force[i]).collect();
                let b: Vec<f64> = free_only.iter().map(|&i| minus[i]).collect();
                inputs_zero && relative_error(&a, &b) < 1e-5
            })
        })
    });

    timed("rotation", &mut || {
        (0..40).all(|k| {
            let mut net = small_net(k);
            for i in 0..net.len() {
                net.set_bias(i, 0.0, 0.0);
            }
            let mut r = rng(100 + k);
            let s = random_state(&mut r, net.len());
            let turn = r.random_range(-PI..PI);
            let turned = State(s.0.iter().map(|p| p + turn).collect());
            let (e0, e1) = (internal_energy(&net, &s).unwrap(), internal_energy(&net, &turned).unwrap());
            (e0 - e1).abs() <= 1e-12 * (1.0 + e0.abs())
        })
    });

    timed("relax", &mut || {
        (0..20).all(|k| {
            let net = small_net(k);
            let mut r = rng(200 + k);
            let clamp: Vec<(usize, f64)> = net.inputs().iter().map(|&i| (i, r.random_range(-PI..PI))).collect();
            let init = random_state(&mut r, net.len());
            let cfg = RelaxConfig::default();
            let mut trace = Vec::new();
            let run = relax_traced(&net, init, &clamp, &Drive::Free, &cfg, |f| trace.push(f)).unwrap();
            let monotone = trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
            let clamped = clamp.iter().all(|&(i, p)| run.state[i].to_bits() == p.to_bits());
            monotone && clamped && (!run.converged || run.residual <= cfg.tolerance)
        })
    });

    timed("response", &mut || {
        let mut net = Network::lattice(5, 5, &ShellSet::nsq4()).unwrap();
        net.assign_roles(&[6, 8], &[22]).unwrap();
        (0..5).all(|k| {
            net.init_parameters(k, 0.5).unwrap();
            let base = Sample { inputs: vec![(6, DOWN), (8, DOWN)], targets: vec![], label: None };
            let cfg = RelaxConfig { restarts: 3, ..RelaxConfig::default() };
            let field = response_probe(&net, &base, 8, UP, &cfg, k).unwrap();
            let null = response_probe(&net, &base, 8, DOWN, &cfg, k).unwrap();
            field.values.iter().all(|v| (0.0..=4.0).contains(v)) && null.values.iter().all(|&v| v == 0.0)
        })
    });

    timed("decoding", &mut || {
        let mut r = rng(300);
        (0..200).all(|_| {
            let n = r.random_range(2..12);
            let phases: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..10.0)).collect();
            let p = decode_probabilities(&phases);
            let normalized = (p.0.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
            let scores: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            let c = r.random_range(0.01..100.0);
            let scaled: Vec<f64> = scores.iter().map(|x| x * c).collect();
            normalized && xy_ep::tasks::classify(&scores) == xy_ep::tasks::classify(&scaled)
        })
    });

    timed("weight-sharing", &mut || {
        let spec = LclSpec {
            input_rows: 5,
            input_cols: 5,
            window: 3,
            stride: 1,
            channels: 2,
            depth: 2,
            weight_shared: true,
            intra_shells: None,
            outputs: 3,
        };
        let mut net = Network::lcl(&spec).unwrap();
        net.init_parameters(1, 0.5).unwrap();
        let mut r = rng(400);
        (0..5).all(|k| {
            let sample = Sample {
                inputs: net.inputs().iter().map(|&i| (i, r.random_range(-FRAC_PI_2..FRAC_PI_2))).collect(),
                targets: class_targets(net.outputs(), k % 3),
                label: Some(k % 3),
            };
            let g = ep_gradient(&net, &sample, &EpConfig::default(), k as u64).unwrap();
            sgd_step(&mut net, &g.grad, 0.1).unwrap();
            net.share_groups().values().all(|members| {
                let w = net.coupling_weight(members[0]).to_bits();
                members.iter().all(|&m| net.coupling_weight(m).to_bits() == w)
            })
        })
    });

    timed("determinism", &mut || {
        let run = || {
            let mut net = Network::all_to_all(5).unwrap();
            net.assign_roles(&[0, 1], &[4]).unwrap();
            net.init_parameters(3, 0.5).unwrap();
            let data = xor_dataset(&net, 0, 1, 4).unwrap();
            let mut cfg = EpConfig { epochs: 20, eval_interval: 5, ..EpConfig::default() };
            cfg.relax.restarts = 3;
            let mut csv = CsvRecorder::new(Vec::new(), false).unwrap();
            train(&mut net, &data, None, &cfg, 9, &mut csv).unwrap();
            (csv.into_inner().unwrap(), net.to_json().unwrap())
        };
        run() == run()
    });

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("all properties hold ({})", timings.join(", "))
        } else {
            format!("failed: {} ({})", failures.join(", "), timings.join(", "))
        },
    }
}

fn mnist_samples(net: &Network, images: &str, labels: &str) -> Vec<Sample> {
    let dir = data("mnist");
    let records = load_mnist(dir.join(images), dir.join(labels)).unwrap();
    records.iter().map(|r| encode_mnist(r, net.inputs(), net.outputs()).unwrap()).collect()
}
