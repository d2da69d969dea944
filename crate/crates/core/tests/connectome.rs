mod common;

use approx::assert_abs_diff_eq;
use common::*;
use connectome_mci::connectome::{
    communicability, communicability_matrix, extract_features, flatten_upper_triangle,
    shortest_path_lengths, shortest_path_matrix, unflatten_upper_triangle, validate_matrix,
    DisconnectedPolicy, Measure,
};
use connectome_mci::Error;
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn path_graph_closed_form() {
    // A = D^-1/2 W D^-1/2 has eigenvalues {-1, 0, 1}, so
    // exp(A) = I + sinh(1) A + (cosh(1) - 1) A^2.
    let w = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
    let m = validate_matrix(w.view(), 0.0).unwrap();
    let c = communicability_matrix(&m).unwrap();
    let (sh, ch) = (1f64.sinh(), 1f64.cosh());
    assert_abs_diff_eq!(c[[0, 0]], 1.0 + (ch - 1.0) / 2.0, epsilon = 1e-14);
    assert_abs_diff_eq!(c[[1, 1]], ch, epsilon = 1e-14);
    assert_abs_diff_eq!(c[[0, 1]], sh / 2f64.sqrt(), epsilon = 1e-14);
    assert_abs_diff_eq!(c[[0, 2]], (ch - 1.0) / 2.0, epsilon = 1e-14);

    let sp = shortest_path_lengths(&m, DisconnectedPolicy::Error).unwrap();
    assert_eq!(sp.values, vec![1.0, 2.0, 1.0]);
    let flat = communicability(&m).unwrap();
    assert_eq!(flat.measure, Measure::Communicability);
    assert_eq!(flat.values.len(), 3);
}

#[test]
fn larger_graphs_match_taylor() {
    let mut r = rng(11);
    for _ in 0..5 {
        let w = random_graph(&mut r, 30, 0.2, |r| r.random_range(0.1..5.0));
        let m = validate_matrix(w.view(), 0.0).unwrap();
        let got = communicability_matrix(&m).unwrap();
        let want = taylor_exp(&normalized_adjacency(&w), 60);
        for (g, e) in got.iter().zip(want.iter()) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-10);
        }
    }
}

#[test]
fn isolated_node_gets_identity_row() {
    let w = array![[0.0, 2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
    let m = validate_matrix(w.view(), 0.0).unwrap();
    let c = communicability_matrix(&m).unwrap();
    assert_eq!(c[[2, 2]], 1.0);
    assert_eq!(c[[0, 2]], 0.0);
    assert_eq!(c[[1, 2]], 0.0);
}

#[test]
fn disconnected_policies() {
    let w = array![
        [0.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.5],
        [0.0, 0.0, 0.5, 0.0]
    ];
    let m = validate_matrix(w.view(), 0.0).unwrap();
    let pairs = |p| shortest_path_lengths(&m, p).map(|f| f.values);
    assert_eq!(pairs(DisconnectedPolicy::MaxFinite).unwrap(), vec![1.0, 2.0, 2.0, 2.0, 2.0, 2.0]);
    assert_eq!(
        pairs(DisconnectedPolicy::FixedConstant(9.0)).unwrap(),
        vec![1.0, 9.0, 9.0, 9.0, 9.0, 2.0]
    );
    assert!(matches!(pairs(DisconnectedPolicy::Error), Err(Error::DisconnectedPair(0, 2))));

    let empty = Array2::<f64>::zeros((3, 3));
    let m = validate_matrix(empty.view(), 0.0).unwrap();
    assert!(matches!(
        shortest_path_lengths(&m, DisconnectedPolicy::MaxFinite),
        Err(Error::AllPairsDisconnected)
    ));
    assert!(extract_features(&m, DisconnectedPolicy::FixedConstant(1.0)).is_ok());
}

#[test]
fn validation_errors() {
    let bad = array![[0.0, 1.0], [1.5, 0.0]];
    assert!(matches!(
        validate_matrix(bad.view(), 1e-9),
        Err(Error::AsymmetryExceedsTolerance { .. })
    ));
    let neg = array![[0.0, -1.0], [-1.0, 0.0]];
    assert!(matches!(validate_matrix(neg.view(), 1e-9), Err(Error::NegativeWeight { .. })));
    let nan = array![[0.0, f64::NAN], [f64::NAN, 0.0]];
    assert!(matches!(validate_matrix(nan.view(), 1e-9), Err(Error::NonFiniteEntry { .. })));
    let rect = Array2::<f64>::zeros((2, 3));
    assert!(matches!(
        validate_matrix(rect.view(), 1e-9),
        Err(Error::NotSquare { rows: 2, cols: 3 })
    ));
}

fn graph_strategy() -> impl Strategy<Value = Array2<f64>> {
    (2usize..16, any::<u64>(), 0.05f64..0.9).prop_map(|(n, seed, density)| {
        let mut r = rng(seed);
        random_graph(&mut r, n, density, |r| r.random_range(0.05..10.0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shortest_paths_are_a_metric(w in graph_strategy()) {
        let m = validate_matrix(w.view(), 0.0).unwrap();
        let d = shortest_path_matrix(&m);
        let n = w.nrows();
        for i in 0..n {
            prop_assert_eq!(d[[i, i]], 0.0);
            for j in 0..n {
                prop_assert_eq!(d[[i, j]], d[[j, i]]);
                for k in 0..n {
                    prop_assert!(d[[i, j]] <= d[[i, k]] + d[[k, j]] + 1e-12 * d[[i, j]]);
                }
            }
        }
    }

    #[test]
    fn scaling_weights_scales_lengths(w in graph_strategy(), e in -4i32..4) {
        // a power-of-two factor keeps every sum exact
        let c = 2f64.powi(e);
        let m = validate_matrix(w.view(), 0.0).unwrap();
        let scaled = validate_matrix((&w * c).view(), 0.0).unwrap();
        let (d, ds) = (shortest_path_matrix(&m), shortest_path_matrix(&scaled));
        for (a, b) in d.iter().zip(ds.iter()) {
            prop_assert_eq!(*a, b * c);
        }
    }

    #[test]
    fn communicability_is_positive_and_symmetric(w in graph_strategy()) {
        let m = validate_matrix(w.view(), 0.0).unwrap();
        let c = communicability_matrix(&m).unwrap();
        let n = w.nrows();
        for i in 0..n {
            prop_assert!(c[[i, i]] >= 1.0);
            for j in 0..n {
                prop_assert!(c[[i, j]] >= 0.0);
                prop_assert!((c[[i, j]] - c[[j, i]]).abs() <= 1e-12 * c[[i, j]].abs().max(1.0));
            }
        }
    }

    #[test]
    fn flatten_unflatten_round_trip(w in graph_strategy()) {
        let n = w.nrows();
        let f = flatten_upper_triangle(w.view(), Measure::Weights);
        prop_assert_eq!(f.values.len(), n * (n - 1) / 2);
        let back = unflatten_upper_triangle(&f.values, n, 0.0).unwrap();
        prop_assert_eq!(back, w);
    }
}
