use graphtv::graphs::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn one_based(g: &Graph) -> Vec<(usize, usize)> {
    g.edges().iter().map(|&(a, b)| (a + 1, b + 1)).collect()
}

fn laplacian(g: &Graph) -> DMatrix<f64> {
    let a = g.adjacency_dense();
    let mut l = -a.clone();
    for i in 0..g.n() {
        l[(i, i)] = a.row(i).sum();
    }
    l
}

fn check_invariants(g: &Graph) {
    let edges = g.edges();
    assert!(edges.iter().all(|&(i, j)| i < j && j < g.n()), "edge out of order");
    assert!(edges.windows(2).all(|w| w[0] < w[1]), "edges not sorted and unique");
    let d = incidence(g);
    let dense = d.to_dense();
    for r in 0..d.m() {
        let row = dense.row(r);
        assert_eq!(row.iter().filter(|v| **v == 1.0).count(), 1);
        assert_eq!(row.iter().filter(|v| **v == -1.0).count(), 1);
        assert_eq!(row.sum(), 0.0);
        // +1 sits at the smaller endpoint
        let (i, j) = edges[r];
        assert_eq!((dense[(r, i)], dense[(r, j)]), (1.0, -1.0));
    }
    assert!(d.mul(&vec![1.0; g.n()]).iter().all(|v| *v == 0.0));
    assert_eq!(d.gram_dense(), laplacian(g));
}

#[test]
fn small_examples() {
    assert_eq!(one_based(&build_path(2).unwrap()), vec![(1, 2)]);
    assert_eq!(one_based(&build_path(4).unwrap()), vec![(1, 2), (2, 3), (3, 4)]);
    let l = incidence(&build_path(3).unwrap()).gram_dense();
    assert_eq!((l[(0, 0)], l[(1, 1)], l[(2, 2)]), (1.0, 2.0, 1.0));

    let g = build_grid(2, 2).unwrap();
    assert_eq!((g.n(), g.m()), (4, 4));
    assert_eq!(incidence(&g).gram_dense().diagonal().as_slice(), &[2.0; 4]);
    assert_eq!(build_grid(2, 3).unwrap().m(), 12);
    let cube = build_grid(3, 2).unwrap();
    assert_eq!((cube.n(), cube.m()), (8, 12));

    assert_eq!(build_hypercube(1).unwrap().m(), 1);
    assert_eq!(build_hypercube(3).unwrap().m(), 12);
    assert_eq!(build_complete(3).unwrap().m(), 3);
    assert_eq!(one_based(&build_star(4).unwrap()), vec![(1, 2), (1, 3), (1, 4)]);

    assert_eq!(build_cycle_power(5, 1).unwrap().m(), 5);
    let c = build_cycle_power(6, 2).unwrap();
    assert_eq!(c.m(), 12);
    assert!(c.degrees().iter().all(|&d| d == 4));
    assert_eq!(build_cycle_power(4, 2).unwrap().edges(), build_complete(4).unwrap().edges());

    assert_eq!(build_erdos_renyi(7, 1.0, 3).unwrap().edges(), build_complete(7).unwrap().edges());
    assert_eq!(build_random_regular(4, 3, 1).unwrap().edges(), build_complete(4).unwrap().edges());
}

#[test]
fn star_incidence_matches_closed_form() {
    // row j-1 (edge (1, j)) has +1 on the hub and -1 on leaf j
    let n = 6;
    let d = incidence(&build_star(n).unwrap()).to_dense();
    for row in 0..n - 1 {
        for col in 0..n {
            let expect = if col == 0 {
                1.0
            } else if col == row + 1 {
                -1.0
            } else {
                0.0
            };
            assert_eq!(d[(row, col)], expect);
        }
    }
}

#[test]
fn augmented_path_examples() {
    let d = build_augmented_path(2).unwrap().to_dense();
    assert_eq!(d, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]));
    for n in [2, 3, 5, 9] {
        let d = build_augmented_path(n).unwrap().to_dense();
        let inv = d.clone().try_inverse().unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!((inv[(i, j)] - if i >= j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
    let inv = build_augmented_path(3).unwrap().to_dense().try_inverse().unwrap();
    let e1 = inv * nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0]);
    assert_eq!(e1.as_slice(), &[1.0, 1.0, 1.0]);
}

#[test]
fn grid_equals_kronecker_stack() {
    for side in 2..=8 {
        let d1 = incidence(&build_path(side).unwrap()).to_dense();
        let eye = DMatrix::<f64>::identity(side, side);
        // column-major: vertex i1 + side * i2; axis 1 varies fastest
        let a = eye.kronecker(&d1);
        let b = d1.kronecker(&eye);
        let mut stack_rows: Vec<Vec<f64>> = Vec::new();
        for m in [&a, &b] {
            for r in 0..m.nrows() {
                stack_rows.push(m.row(r).iter().copied().collect());
            }
        }
        let mut grid_rows: Vec<Vec<f64>> = Vec::new();
        let g = incidence(&build_grid(2, side).unwrap()).to_dense();
        for r in 0..g.nrows() {
            grid_rows.push(g.row(r).iter().copied().collect());
        }
        let key = |v: &Vec<f64>| v.iter().map(|x| (*x as i64).to_string()).collect::<Vec<_>>().join(",");
        let mut s: Vec<String> = stack_rows.iter().map(key).collect();
        let mut t: Vec<String> = grid_rows.iter().map(key).collect();
        s.sort();
        t.sort();
        assert_eq!(s, t, "side {side}");
    }
}

#[test]
fn hypercube_is_the_side_two_grid() {
    for d in 1..=6 {
        assert_eq!(build_hypercube(d).unwrap().edges(), build_grid(d, 2).unwrap().edges(), "d = {d}");
    }
}

#[test]
fn connectivity_examples() {
    assert!(build_path(7).unwrap().is_connected());
    assert!(build_complete(5).unwrap().is_connected());
    let g = Graph::new(4, [(0, 1), (2, 3)], Family::Custom).unwrap();
    assert!(!g.is_connected());
    assert_eq!(g.components(), vec![0, 0, 1, 1]);
}

#[test]
fn generation_failures_are_loud() {
    assert!(matches!(build_erdos_renyi_with_limit(50, 0.001, 1, 3), Err(graphtv::Error::GenerationFailure(_))));
    assert!(build_random_regular(5, 3, 0).is_err());
    assert!(build_grid(2, 0).is_err());
    assert!(build_cycle_power(6, 4).is_err());
}

#[derive(Debug, Clone)]
enum Builder {
    Path(usize),
    Grid(usize, usize),
    Hypercube(usize),
    Complete(usize),
    Star(usize),
    CyclePower(usize, usize),
    ErdosRenyi(usize, u64),
    RandomRegular(usize, usize, u64),
}

fn build(s: &Builder) -> Graph {
    match *s {
        Builder::Path(n) => build_path(n),
        Builder::Grid(d, side) => build_grid(d, side),
        Builder::Hypercube(d) => build_hypercube(d),
        Builder::Complete(n) => build_complete(n),
        Builder::Star(n) => build_star(n),
        Builder::CyclePower(n, k) => build_cycle_power(n, k),
        Builder::ErdosRenyi(n, seed) => build_erdos_renyi(n, 0.5, seed),
        Builder::RandomRegular(n, d, seed) => build_random_regular(n, d, seed),
    }
    .unwrap()
}

fn builders() -> impl Strategy<Value = Builder> {
    prop_oneof![
        (2usize..30).prop_map(Builder::Path),
        (1usize..4, 2usize..6).prop_map(|(d, s)| Builder::Grid(d, s)),
        (1usize..6).prop_map(Builder::Hypercube),
        (2usize..20).prop_map(Builder::Complete),
        (2usize..20).prop_map(Builder::Star),
        (5usize..30, 1usize..3).prop_map(|(n, k)| Builder::CyclePower(n, k)),
        (4usize..25, any::<u64>()).prop_map(|(n, s)| Builder::ErdosRenyi(n, s)),
        (3usize..12, any::<u64>()).prop_map(|(h, s)| Builder::RandomRegular(2 * h, 3, s)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn incidence_invariants_hold(builder in builders()) {
        let g = build(&builder);
        check_invariants(&g);
        if let Builder::Grid(d, side) = builder {
            prop_assert_eq!(g.n(), side.pow(d as u32));
            prop_assert_eq!(g.m(), d * side.pow(d as u32 - 1) * (side - 1));
        }
    }

    #[test]
    fn builds_are_reproducible(builder in builders()) {
        let a = build(&builder);
        let b = build(&builder);
        prop_assert_eq!(a.edges(), b.edges());
        prop_assert_eq!(incidence(&a).to_dense(), incidence(&b).to_dense());
    }

    #[test]
    fn edge_lists_round_trip(builder in builders()) {
        let g = build(&builder);
        let back = parse_edge_list(&g.to_edge_list(), Some(g.n())).unwrap();
        prop_assert_eq!(back.edges(), g.edges());
    }
}
