use std::f64::consts::PI;

use qgraph::secular::friedlander_check;
use qgraph::{Classification, Family, FamilySpec, GraphDocument, LengthSource, MetricGraph, Solver, Tolerances};

fn random_regular(degree: usize, vertices: usize, seed: u64) -> MetricGraph {
    FamilySpec::new(Family::RandomRegular { degree, vertices, seed }, LengthSource::uniform(seed))
        .generate()
        .unwrap()
}

#[test]
fn document_round_trip_preserves_spectrum() {
    let g = random_regular(3, 6, 4);
    let text = g.to_document().to_json();
    let doc = GraphDocument::from_json(&text).unwrap();
    let h = MetricGraph::from_document(&doc).unwrap();
    let a = Solver::new(&g, Tolerances::default()).first(100).unwrap();
    let b = Solver::new(&h, Tolerances::default()).first(100).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.index, x.multiplicity, x.class), (y.index, y.multiplicity, y.class));
        assert_eq!(x.k, y.k);
    }
}

#[test]
fn parallel_windows_match_a_single_window() {
    let g = random_regular(4, 8, 2);
    let solver = Solver::new(&g, Tolerances::default());
    let whole = solver.window(0.0, 200.0).unwrap();
    let split = solver.window_parallel(0.0, 200.0, 7).unwrap();
    assert_eq!(whole.len(), split.len());
    for (a, b) in whole.iter().zip(&split) {
        assert_eq!(a.index, b.index);
        assert!((a.k - b.k).abs() <= 1e-9 * a.k);
    }
    assert!(friedlander_check(&whole, &g).passed());
}

#[test]
fn weyl_law_holds_on_random_graphs() {
    for seed in 0..3 {
        let g = random_regular(3, 10, seed);
        let records = Solver::new(&g, Tolerances::default()).first(2000).unwrap();
        let bound = (g.edge_count() + g.boundary_size()) as f64;
        for r in &records {
            assert!((r.index as f64 - g.total_length() * r.k / PI).abs() <= bound);
        }
    }
}

#[test]
fn eigenvalues_scale_inversely_with_lengths() {
    let g = random_regular(3, 8, 9);
    let doubled: Vec<f64> = g.lengths().iter().map(|l| 2.0 * l).collect();
    let h = g.with_lengths(&doubled).unwrap();
    let a = Solver::new(&g, Tolerances::default()).first(150).unwrap();
    let b = Solver::new(&h, Tolerances::default()).first(150).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.k - 2.0 * y.k).abs() <= 1e-9 * x.k);
    }
}

#[test]
fn equilateral_mandarin_is_degenerate() {
    let g = FamilySpec::new(
        Family::Mandarin { edges: 3 },
        LengthSource::Explicit {
            lengths: vec![1.0, 1.0, 1.0],
        },
    )
    .generate()
    .unwrap();
    let records = Solver::new(&g, Tolerances::default()).first(30).unwrap();
    assert!(records.iter().any(|r| r.multiplicity > 1));
    assert!(records
        .iter()
        .filter(|r| r.multiplicity > 1)
        .all(|r| r.class == Classification::Multiple));
    assert!(friedlander_check(&records, &g).passed());
}

#[test]
fn document_round_trip_preserves_lengths() {
    let g = random_regular(3, 6, 4);
    let h = MetricGraph::from_json(&g.to_document().to_json()).unwrap();
    assert_eq!(g.lengths(), h.lengths());
}
