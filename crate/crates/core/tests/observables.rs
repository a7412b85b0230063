use std::f64::consts::PI;

use qgraph::analysis::{collect, stream, Target};
use qgraph::domains::{partition, Cut, DomainKind};
use qgraph::stats::{StatReport, SurplusAccumulator};
use qgraph::{Family, FamilySpec, LengthSource, MetricGraph, Solver, Tolerances};

fn graph(family: Family, seed: u64) -> MetricGraph {
    FamilySpec::new(family, LengthSource::uniform(seed)).generate().unwrap()
}

#[test]
fn neumann_partition_covers_the_graph() {
    let g = graph(
        Family::RandomRegular {
            degree: 3,
            vertices: 6,
            seed: 1,
        },
        1,
    );
    let obs = collect(&Solver::new(&g, Tolerances::default()), Target::Generic(200)).unwrap();
    for o in obs.iter().filter(|o| o.has_stars()) {
        let f = o.eigenfunction(&g).unwrap().unwrap();
        let domains = partition(&f, Cut::Neumann).unwrap();
        let length: f64 = domains.iter().map(|d| d.length).sum();
        let rho: f64 = domains.iter().map(|d| d.rho).sum();
        assert!((length - g.total_length()).abs() < 1e-9);
        assert!((rho - g.total_length() * o.k / PI).abs() < 1e-8);
        let stars = domains.iter().filter(|d| d.kind == DomainKind::Star).count();
        assert_eq!(stars, g.interior_vertices().count());
        assert!(domains.iter().all(|d| d.kind != DomainKind::Composite));
        for d in domains.iter().filter(|d| d.kind == DomainKind::Star) {
            let v = d.central_vertex.unwrap();
            let local = o.stars.iter().find(|s| s.vertex == v).unwrap();
            assert_eq!(d.count, Some(local.spectral_position));
            assert!((d.rho - local.capacity).abs() < 1e-9);
        }
    }
}

#[test]
fn nodal_and_neumann_counts_interlace() {
    let g = graph(Family::Tree31 { interior: 4 }, 6);
    let obs = collect(&Solver::new(&g, Tolerances::default()), Target::Generic(300)).unwrap();
    for o in obs.iter().filter(|o| o.has_stars()) {
        let f = o.eigenfunction(&g).unwrap().unwrap();
        let nodal = partition(&f, Cut::Nodal).unwrap();
        let neumann = partition(&f, Cut::Neumann).unwrap();
        let s = o.surplus.unwrap();
        // on a tree, removing φ points leaves φ + 1 components
        assert_eq!(nodal.len(), s.phi + 1);
        assert_eq!(neumann.len(), s.xi + 1);
    }
}

#[test]
fn streamed_accumulators_merge_to_the_same_report() {
    let g = graph(Family::Stower { loops: 1, tails: 3 }, 4);
    let solver = Solver::new(&g, Tolerances::default());
    let mut whole = SurplusAccumulator::for_graph(&g);
    let mut parts = vec![SurplusAccumulator::for_graph(&g); 3];
    let mut i = 0;
    stream(&solver, Target::Generic(1500), 250, |o| {
        whole.accumulate(o, &g).unwrap();
        parts[i % 3].accumulate(o, &g).unwrap();
        i += 1;
    })
    .unwrap();
    let mut merged = parts.pop().unwrap();
    for p in parts.iter().rev() {
        merged.merge(p);
    }
    assert_eq!(merged, whole);
    assert_eq!(StatReport::build(&merged, &g), StatReport::build(&whole, &g));
    assert_eq!(whole.records, whole.generic + whole.loops + whole.excluded);
}
