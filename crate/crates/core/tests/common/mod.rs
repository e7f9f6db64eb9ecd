#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use xy_ep::energy::State;
use xy_ep::graph::{Network, ShellSet};
use xy_ep::seed;

/// Small all-to-all or SQ-lattice network with inputs, outputs and random
/// couplings and biases.
pub fn random_network(rng: &mut ChaCha8Rng, coupling_scale: f64, bias_scale: f64) -> Network {
    let mut net = if rng.random_bool(0.5) {
        let n = rng.random_range(3..=8);
        let mut net = Network::all_to_all(n).unwrap();
        let outputs: Vec<usize> = if n > 4 { vec![n - 2, n - 1] } else { vec![n - 1] };
        net.assign_roles(&[0, 1], &outputs).unwrap();
        net
    } else {
        let (rows, cols) = [(2, 2), (2, 3), (3, 2), (2, 4), (4, 2)][rng.random_range(0..5)];
        let mut net = Network::lattice(rows, cols, &ShellSet::sq()).unwrap();
        let n = (rows * cols) as usize;
        net.assign_roles(&[0, 1], &[n - 1]).unwrap();
        net
    };
    net.init_parameters(rng.random(), coupling_scale).unwrap();
    for i in 0..net.len() {
        net.set_bias(
            i,
            rng.random_range(-bias_scale..=bias_scale),
            rng.random_range(-bias_scale..=bias_scale),
        );
    }
    net
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> State {
    State((0..n).map(|_| rng.random_range(-PI..PI)).collect())
}

pub fn rng(s: u64) -> ChaCha8Rng {
    seed::rng(s)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|a - b| / |b|`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(b)
}

/// Central difference of `f` at `x` along every coordinate listed in `coords`.
pub fn central_difference(x: &[f64], coords: &[usize], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    coords
        .iter()
        .map(|&k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}
