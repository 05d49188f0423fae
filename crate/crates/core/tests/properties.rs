use approx::assert_relative_eq;
use proptest::prelude::*;

use gridcascade::dynamics::{control_input, ControlConfig};
use gridcascade::flow::{equilibrium_residual, line_flows, solve_equilibrium};
use gridcascade::grid::{GridTopology, Line, MachineParams, Weighting};
use gridcascade::ingest::{parse_grid_file, serialize_grid_file, GridCase};
use gridcascade::spectral::{
    closed_loop_eigenvalues, critical_gain, laplacian_spectrum, LinearModelParams,
};
use gridcascade::SimConfig;

/// Random simple graph on `n` nodes; `connected` adds a spanning path first.
fn graph(max_n: usize, connected: bool) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..=max_n).prop_flat_map(move |n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        let m = pairs.len();
        (Just(n), proptest::collection::vec(any::<bool>(), m)).prop_map(move |(n, pick)| {
            let mut edges: Vec<(usize, usize)> = pairs
                .iter()
                .zip(pick)
                .filter(|(_, p)| *p)
                .map(|(e, _)| *e)
                .collect();
            if connected {
                edges.extend((1..n).map(|v| (v - 1, v)));
                edges.sort_unstable();
                edges.dedup();
            }
            (n, edges)
        })
    })
}

fn topo(n: usize, edges: &[(usize, usize)], k: f64) -> GridTopology {
    GridTopology::new(n, edges.iter().map(|&(a, b)| Line::new(a, b, k)), []).unwrap()
}

/// Zero-sum powers small enough that a synchronous state exists on any
/// connected graph with the given coupling.
fn balanced_powers(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-0.2f64..0.2, n).prop_map(|mut p| {
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        p.iter_mut().for_each(|x| *x -= mean);
        p
    })
}

proptest! {
    #[test]
    fn laplacian_rows_sum_to_zero((n, edges) in graph(12, false), k in 0.1f64..10.0) {
        let l = topo(n, &edges, k).laplacian(Weighting::Physical);
        for i in 0..n {
            prop_assert!(l.row(i).sum().abs() < 1e-12);
            for j in 0..n {
                prop_assert_eq!(l[(i, j)], l[(j, i)]);
            }
        }
    }

    #[test]
    fn second_eigenvalue_detects_connectivity((n, edges) in graph(10, false)) {
        let t = topo(n, &edges, 1.0);
        let spectrum = laplacian_spectrum(&t);
        prop_assert!(spectrum.iter().all(|&l| l > -1e-9));
        prop_assert_eq!(spectrum[1] > 1e-9, t.is_connected());
    }

    #[test]
    fn flows_are_gauge_invariant_and_antisymmetric(
        (n, edges) in graph(10, true),
        angles in proptest::collection::vec(-3.0f64..3.0, 10),
        shift in -10.0f64..10.0,
    ) {
        let t = topo(n, &edges, 1.7);
        let theta = &angles[..n];
        let shifted: Vec<f64> = theta.iter().map(|x| x + shift).collect();
        let a = line_flows(theta, &t).unwrap();
        let b = line_flows(&shifted, &t).unwrap();
        for ((_, fa), (_, fb)) in a.iter().zip(b.iter()) {
            prop_assert!((fa - fb).abs() < 1e-10);
        }
        for (key, _) in a.iter() {
            let fwd = a.oriented(key.lo(), key.hi()).unwrap();
            let back = a.oriented(key.hi(), key.lo()).unwrap();
            prop_assert_eq!(fwd, -back);
        }
    }

    #[test]
    fn equilibrium_residual_is_small(
        ((n, edges), power) in graph(10, true).prop_flat_map(|g| {
            let n = g.0;
            (Just(g), balanced_powers(n))
        }),
    ) {
        let t = topo(n, &edges, 2.0);
        let params = MachineParams::uniform(n, 1.0, 0.1, power);
        let theta = solve_equilibrium(&t, &params, &vec![0.0; n]).unwrap();
        let r = equilibrium_residual(&theta, &t, &params).unwrap();
        prop_assert!(r.iter().all(|x| x.abs() < 1e-10));
        prop_assert_eq!(theta[0], 0.0);
    }

    #[test]
    fn full_control_sums_to_zero(
        (n, edges) in graph(10, false),
        omega in proptest::collection::vec(-1.0f64..1.0, 10),
        gain in 0.0f64..20.0,
    ) {
        let t = topo(n, &edges, 1.0);
        let u = control_input(&omega[..n], &t, &ControlConfig::full(n, gain).unwrap()).unwrap();
        let scale = u.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        prop_assert!(u.iter().sum::<f64>().abs() < 1e-12 * scale);
        let off = control_input(&omega[..n], &t, &ControlConfig::off(n)).unwrap();
        prop_assert!(off.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mode_pairs_satisfy_vieta(
        lambda in 0.0f64..50.0,
        k in 0.1f64..20.0,
        gamma in 0.0f64..1.0,
        gain in 0.0f64..100.0,
    ) {
        let params = LinearModelParams::new(k, gamma).unwrap();
        let (a, b) = closed_loop_eigenvalues(&[lambda], params, gain)[0];
        let sum = -(gamma + gain * lambda);
        prop_assert!(((a + b).re - sum).abs() <= 1e-9 * sum.abs().max(1.0));
        prop_assert!(((a * b).re - k * lambda).abs() <= 1e-9 * (k * lambda).max(1.0));
        prop_assert!((a * b).im.abs() <= 1e-9 * (k * lambda).max(1.0));
    }

    #[test]
    fn critical_gain_ignores_node_labels(
        (n, edges) in graph(9, true),
        perm_seed in proptest::collection::vec(any::<u32>(), 9),
    ) {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&i| perm_seed[i]);
        let relabeled: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let params = LinearModelParams::new(1.63, 0.1).unwrap();
        let a = critical_gain(&topo(n, &edges, 1.63), params).unwrap().value;
        let b = critical_gain(&topo(n, &relabeled, 1.63), params).unwrap().value;
        assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-12);
    }

    #[test]
    fn native_format_round_trips(
        ((n, edges), power) in graph(8, true).prop_flat_map(|g| {
            let n = g.0;
            (Just(g), balanced_powers(n))
        }),
        inertia in 0.01f64..5.0,
        alpha in 0.0f64..=1.0,
    ) {
        let t = GridTopology::new(
            n,
            edges.iter().enumerate().map(|(i, &(a, b))| Line::new(a, b, 1.0 + i as f64 / 7.0)),
            [0],
        )
        .unwrap();
        let case = GridCase {
            name: "random".into(),
            provenance: "property test".into(),
            labels: (0..n as u32).map(|i| 100 + 3 * i).collect(),
            topology: t,
            params: MachineParams::uniform(n, inertia, 0.2, power),
            sim: SimConfig::with_threshold(gridcascade::OverloadThreshold::new(alpha).unwrap()),
            coupling: None,
        };
        prop_assert_eq!(parse_grid_file(&serialize_grid_file(&case)).unwrap(), case);
    }
}
