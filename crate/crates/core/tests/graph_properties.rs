use std::collections::BTreeSet;

use proptest::prelude::*;
use xy_ep::graph::{ArchitectureSpec, LclSpec, Network, Placement, ShellSet};

fn presets() -> Vec<ShellSet> {
    vec![ShellSet::sq(), ShellSet::nsq3(), ShellSet::p3nsq(), ShellSet::nsq4()]
}

/// Every unordered site pair whose squared distance is a listed shell.
fn brute_force_lattice(rows: u32, cols: u32, shells: &ShellSet) -> BTreeSet<(usize, usize)> {
    let sites: Vec<(i64, i64)> = (0..rows as i64).flat_map(|r| (0..cols as i64).map(move |c| (r, c))).collect();
    let mut pairs = BTreeSet::new();
    for (a, &(ra, ca)) in sites.iter().enumerate() {
        for (b, &(rb, cb)) in sites.iter().enumerate().skip(a + 1) {
            let d2 = (ra - rb).pow(2) + (ca - cb).pow(2);
            if shells.contains(d2 as u32) {
                pairs.insert((a, b));
            }
        }
    }
    pairs
}

fn coupled_pairs(net: &Network) -> BTreeSet<(usize, usize)> {
    net.couplings().iter().map(|c| (c.i, c.j)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lattice_edges_match_pair_enumeration(rows in 2u32..12, cols in 2u32..12, preset in 0usize..4) {
        let shells = &presets()[preset];
        let net = Network::lattice(rows, cols, shells).unwrap();
        prop_assert_eq!(net.couplings().len(), brute_force_lattice(rows, cols, shells).len());
        prop_assert_eq!(coupled_pairs(&net), brute_force_lattice(rows, cols, shells));
    }

    #[test]
    fn lattice_adjacency_is_symmetric(rows in 2u32..10, cols in 2u32..10, preset in 0usize..4) {
        let net = Network::lattice(rows, cols, &presets()[preset]).unwrap();
        let mut neighbours = vec![BTreeSet::new(); net.len()];
        let mut seen = BTreeSet::new();
        for c in net.couplings() {
            prop_assert!(c.i != c.j);
            prop_assert!(seen.insert((c.i.min(c.j), c.i.max(c.j))), "pair stored twice");
            neighbours[c.i].insert(c.j);
            neighbours[c.j].insert(c.i);
        }
        for i in 0..net.len() {
            for &j in &neighbours[i] {
                prop_assert!(neighbours[j].contains(&i));
            }
        }
    }

    #[test]
    fn all_to_all_couples_every_pair(n in 2usize..40) {
        let net = Network::all_to_all(n).unwrap();
        let expected: BTreeSet<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        prop_assert_eq!(coupled_pairs(&net), expected);
    }

    #[test]
    fn dense_layers_couple_adjacent_layers_only(sizes in proptest::collection::vec(1usize..7, 2..6)) {
        let net = Network::dense_layered(&sizes).unwrap();
        let expected: usize = sizes.windows(2).map(|w| w[0] * w[1]).sum();
        prop_assert_eq!(net.couplings().len(), expected);
        for c in net.couplings() {
            let (li, lj) = (net.nodes()[c.i].coord.layer, net.nodes()[c.j].coord.layer);
            prop_assert_eq!(li.abs_diff(lj), 1);
        }
    }

    #[test]
    fn lcl_window_couplings_match_enumeration(
        side in 4u32..12, window in 1u32..5, stride in 1u32..4, shared in any::<bool>(),
    ) {
        prop_assume!(window <= side);
        let spec = LclSpec {
            input_rows: side, input_cols: side, window, stride, channels: 1, depth: 1,
            weight_shared: shared, intra_shells: None, outputs: 3,
        };
        let net = Network::lcl(&spec).unwrap();
        let hidden = (side - window) / stride + 1;
        // hidden (r, c) sees input (r*stride + dr, c*stride + dc) for dr, dc < window
        let mut expected = 0;
        for r in 0..hidden {
            for c in 0..hidden {
                for dr in 0..window {
                    for dc in 0..window {
                        if r * stride + dr < side && c * stride + dc < side {
                            expected += 1;
                        }
                    }
                }
            }
        }
        let outputs = 3 * (hidden * hidden) as usize;
        prop_assert_eq!(net.couplings().len(), expected as usize + outputs);
        if shared {
            prop_assert_eq!(net.n_slots(), (window * window) as usize + outputs);
        } else {
            prop_assert_eq!(net.n_slots(), net.couplings().len());
        }
    }

    #[test]
    fn rebuild_is_byte_identical(seed in any::<u64>(), preset in 0usize..4) {
        let spec = ArchitectureSpec::Lattice {
            rows: 5,
            cols: 6,
            shells: presets()[preset].clone(),
            placement: Placement::Edges { inputs: 2, outputs: 1, spacing: 2 },
        };
        let build = || {
            let mut net = spec.build().unwrap();
            net.init_parameters(seed, 0.5).unwrap();
            net.to_json().unwrap()
        };
        prop_assert_eq!(build(), build());
    }
}

#[test]
fn shared_weights_stay_identical_under_updates() {
    let spec = LclSpec {
        input_rows: 6,
        input_cols: 6,
        window: 3,
        stride: 1,
        channels: 2,
        depth: 1,
        weight_shared: true,
        intra_shells: None,
        outputs: 2,
    };
    let mut net = Network::lcl(&spec).unwrap();
    net.init_parameters(3, 0.5).unwrap();
    let grad: Vec<f64> = (0..net.n_params()).map(|k| (k as f64 * 0.37).sin()).collect();
    xy_ep::ep::sgd_step(&mut net, &grad, 0.1).unwrap();
    for members in net.share_groups().values() {
        let w0 = net.coupling_weight(members[0]);
        assert!(members.iter().all(|&k| net.coupling_weight(k).to_bits() == w0.to_bits()));
    }
}
