//! Neumann and nodal domains, spectral positions and wavelength capacities.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;
use thiserror::Error;

use crate::eigenfunction::{Eigenfunction, EigenfunctionError, SurplusPair};
use crate::graph::{Edge, EdgeEnd, MetricGraph, Side};
use crate::secular::{Solver, SolverError, Tolerances};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("k = {k} does not exceed π / L_min = {threshold}")]
    SmallK { k: f64, threshold: f64 },
    #[error("domain {0} is not a star")]
    NotStar(usize),
    #[error("vertex {0} is a boundary vertex")]
    BoundaryVertex(usize),
    #[error(transparent)]
    Eigenfunction(#[from] EigenfunctionError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Star,
    /// Anything else; only possible for `k ≤ π / L_min`.
    Composite,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Interval => "interval",
            DomainKind::Star => "star",
            DomainKind::Composite => "composite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cut {
    Neumann,
    Nodal,
}

/// Piece `[start, end]` of a parent edge, in that edge's arc length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub edge: usize,
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domain {
    pub id: usize,
    pub kind: DomainKind,
    pub central_vertex: Option<usize>,
    pub segments: Vec<Segment>,
    /// Graph vertices inside the domain.
    pub vertices: Vec<usize>,
    /// Cut points plus graph boundary vertices on the domain.
    pub boundary_size: usize,
    /// Cut points on the domain boundary; the rest are graph boundary vertices.
    pub cut_ends: usize,
    pub length: f64,
    /// `|Ω| k / π`.
    pub rho: f64,
    /// Neumann domains: spectral position `N(Ω)` from vertex signs.
    /// Nodal domains: Neumann count `ξ(Ω)`. `None` for composite domains.
    pub count: Option<i64>,
}

/// Connected components of the graph with the cut points removed.
pub fn partition(f: &Eigenfunction, cut: Cut) -> Result<Vec<Domain>, DomainError> {
    let g = f.graph();
    let k = f.k();
    let v_count = g.vertex_count();
    let mut segments = Vec::new();
    // (segment id, touches start vertex, touches end vertex)
    let mut attach: Vec<(bool, bool)> = Vec::new();
    for e in 0..g.edge_count() {
        let l = g.edge(e).length;
        let points = match cut {
            Cut::Neumann => f.neumann_points(e),
            Cut::Nodal => f.nodal_points(e),
        };
        let mut breaks = vec![0.0];
        breaks.extend(points.iter().copied());
        breaks.push(l);
        let last = breaks.len() - 2;
        for i in 0..=last {
            segments.push(Segment {
                edge: e,
                start: breaks[i],
                end: breaks[i + 1],
            });
            attach.push((i == 0, i == last));
        }
    }

    let mut uf = UnionFind::new(v_count + segments.len());
    for (s, seg) in segments.iter().enumerate() {
        let edge = g.edge(seg.edge);
        let (at_u, at_v) = attach[s];
        if at_u {
            uf.union(v_count + s, edge.u);
        }
        if at_v {
            uf.union(v_count + s, edge.v);
        }
    }

    let mut root_to_id = std::collections::BTreeMap::new();
    let mut domains: Vec<Domain> = Vec::new();
    let mut id_of = |uf: &mut UnionFind, node: usize, domains: &mut Vec<Domain>| {
        let r = uf.find(node);
        *root_to_id.entry(r).or_insert_with(|| {
            domains.push(Domain {
                id: domains.len(),
                kind: DomainKind::Composite,
                central_vertex: None,
                segments: Vec::new(),
                vertices: Vec::new(),
                boundary_size: 0,
                cut_ends: 0,
                length: 0.0,
                rho: 0.0,
                count: None,
            });
            domains.len() - 1
        })
    };
    for (s, seg) in segments.iter().enumerate() {
        let id = id_of(&mut uf, v_count + s, &mut domains);
        let (at_u, at_v) = attach[s];
        let d = &mut domains[id];
        d.segments.push(*seg);
        d.length += seg.length();
        d.cut_ends += usize::from(!at_u) + usize::from(!at_v);
    }
    for v in 0..v_count {
        let id = id_of(&mut uf, v, &mut domains);
        domains[id].vertices.push(v);
    }

    for d in &mut domains {
        d.boundary_size = d.cut_ends + d.vertices.iter().filter(|&&v| g.is_boundary(v)).count();
        d.rho = d.length * k / PI;
        let interior: Vec<usize> = d.vertices.iter().copied().filter(|&v| !g.is_boundary(v)).collect();
        d.kind = match interior.len() {
            0 => DomainKind::Interval,
            1 if is_star(g, interior[0], &d.segments, &segments_touching(g, interior[0], &d.segments)) => {
                d.central_vertex = Some(interior[0]);
                DomainKind::Star
            }
            _ => DomainKind::Composite,
        };
        d.count = match (cut, d.kind) {
            (_, DomainKind::Composite) => None,
            (Cut::Neumann, DomainKind::Interval) => Some(1),
            (Cut::Neumann, DomainKind::Star) => Some(spectral_position_sign(f, d.central_vertex.unwrap())?),
            (Cut::Nodal, _) => Some(neumann_points_inside(f, &d.segments) as i64),
        };
    }
    Ok(domains)
}

fn segments_touching(g: &MetricGraph, v: usize, segments: &[Segment]) -> usize {
    segments
        .iter()
        .map(|s| {
            let e = g.edge(s.edge);
            usize::from(e.u == v && s.start == 0.0) + usize::from(e.v == v && s.end == e.length)
        })
        .sum()
}

/// A single interior vertex whose incident ends each carry their own segment.
fn is_star(g: &MetricGraph, v: usize, segments: &[Segment], touching: &usize) -> bool {
    *touching == g.degree(v)
        && segments.len() == g.degree(v)
        && segments.iter().all(|s| {
            let e = g.edge(s.edge);
            !(s.start == 0.0 && s.end == e.length && e.u == e.v)
        })
}

fn neumann_points_inside(f: &Eigenfunction, segments: &[Segment]) -> usize {
    segments
        .iter()
        .map(|s| {
            f.neumann_points(s.edge)
                .into_iter()
                .filter(|&x| x > s.start && x < s.end)
                .count()
        })
        .sum()
}

/// `N(Ω^(v)) = deg(v)/2 - ½ Σ_e sgn(f(v) ∂_e f(v))`.
pub fn spectral_position_sign(f: &Eigenfunction, v: usize) -> Result<i64, DomainError> {
    let g = f.graph();
    if g.is_boundary(v) {
        return Err(DomainError::BoundaryVertex(v));
    }
    let mut sum = 0;
    for &end in g.ends(v) {
        sum += f.end_sign(end)?;
    }
    Ok((g.degree(v) as i64 - sum) / 2)
}

/// Star Neumann (or nodal) domain around an interior vertex, read off
/// locally from the nearest cut point along each incident end. Valid for
/// `k > π / L_min`, where every edge carries an interior cut point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalStar {
    pub vertex: usize,
    /// Arm lengths, one per incident end in the order of `MetricGraph::ends`.
    pub arms: Vec<f64>,
    /// Whether each arm ends at a graph boundary vertex instead of a cut point.
    pub arm_at_boundary: Vec<bool>,
    pub length: f64,
    pub rho: f64,
}

pub fn local_star(f: &Eigenfunction, v: usize, cut: Cut) -> Result<LocalStar, DomainError> {
    let g = f.graph();
    let k = f.k();
    if g.is_boundary(v) {
        return Err(DomainError::BoundaryVertex(v));
    }
    let threshold = PI / g.min_length();
    if k <= threshold {
        return Err(DomainError::SmallK { k, threshold });
    }
    let offset = match cut {
        Cut::Neumann => 0.0,
        Cut::Nodal => FRAC_PI_2,
    };
    let mut arms = Vec::with_capacity(g.degree(v));
    let mut arm_at_boundary = Vec::with_capacity(g.degree(v));
    for &end in g.ends(v) {
        let (arm, at_boundary) = nearest_cut(f, end, offset);
        arms.push(arm);
        arm_at_boundary.push(at_boundary);
    }
    let length: f64 = arms.iter().sum();
    Ok(LocalStar {
        vertex: v,
        arms,
        arm_at_boundary,
        length,
        rho: length * k / PI,
    })
}

/// Distance from the vertex at `end` to the nearest point with
/// `φ + kx ≡ offset (mod π)` along the edge.
fn nearest_cut(f: &Eigenfunction, end: EdgeEnd, offset: f64) -> (f64, bool) {
    let g = f.graph();
    let k = f.k();
    let w = f.wave(end.edge);
    let edge = g.edge(end.edge);
    let l = edge.length;
    match end.side {
        Side::Start => {
            let m = ((w.phase - offset) / PI).floor() + 1.0;
            let x = (m * PI + offset - w.phase) / k;
            if x < l {
                (x, false)
            } else {
                (l, g.is_boundary(edge.v))
            }
        }
        Side::End => {
            let m = ((w.phase + k * l - offset) / PI).ceil() - 1.0;
            let x = (m * PI + offset - w.phase) / k;
            if x > 0.0 {
                (l - x, false)
            } else {
                (l, g.is_boundary(edge.u))
            }
        }
    }
}

/// Standalone star graph with the given arm lengths (an interval for two arms).
pub fn star_graph(arms: &[f64]) -> MetricGraph {
    if arms.len() == 2 {
        let edges = vec![Edge {
            u: 0,
            v: 1,
            length: arms[0] + arms[1],
        }];
        return MetricGraph::new(2, edges).expect("interval is a valid graph");
    }
    let edges = arms
        .iter()
        .enumerate()
        .map(|(i, &length)| Edge { u: 0, v: i + 1, length })
        .collect();
    MetricGraph::new(arms.len() + 1, edges).expect("star arms are positive")
}

/// Number of eigenvalues `0 ≤ λ < k²` of a standalone graph.
pub fn spectral_position_direct(domain: &MetricGraph, k: f64) -> Result<i64, DomainError> {
    let solver = Solver::new(domain, Tolerances::default());
    Ok(1 + solver.count_below(k)? as i64)
}

/// Wavelength capacity `|Ω| k / π`.
pub fn wavelength_capacity(length: f64, k: f64) -> f64 {
    length * k / PI
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualStar {
    pub arms: Vec<f64>,
    pub rho: f64,
}

/// Dual of a star Neumann domain: arms `π/k - l_j`, carrying
/// `f̃_j(x) = -A_j cos(k(l̃_j - x))`.
pub fn dual_star(star: &LocalStar, k: f64) -> Result<DualStar, DomainError> {
    let half = PI / k;
    if star.arms.iter().any(|&l| !(l < half && l > 0.0)) {
        return Err(DomainError::NotStar(star.vertex));
    }
    let arms: Vec<f64> = star.arms.iter().map(|&l| half - l).collect();
    let rho = arms.iter().sum::<f64>() * k / PI;
    Ok(DualStar { arms, rho })
}

/// Star attached to a nodal star domain: arms `l ∓ π/(2k)` moved to the
/// nearest critical point, turning it into a Neumann star domain.
pub fn auxiliary_neumann_star(nodal_arms: &[f64], k: f64) -> Vec<f64> {
    let quarter = FRAC_PI_2 / k;
    nodal_arms
        .iter()
        .map(|&l| if k * l > FRAC_PI_2 { l - quarter } else { l + quarter })
        .collect()
}

/// Neumann count of a nodal star given by its arms: one interior critical
/// point on each arm longer than a quarter wavelength.
pub fn nodal_star_neumann_count(arms: &[f64], k: f64) -> i64 {
    arms.iter().filter(|&&l| k * l > FRAC_PI_2).count() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalGlobalReport {
    pub sum_n: i64,
    pub expected_sum_n: i64,
    pub sum_rho: f64,
    pub expected_sum_rho: f64,
}

impl LocalGlobalReport {
    pub fn holds(&self, rho_tol: f64) -> bool {
        self.sum_n == self.expected_sum_n && (self.sum_rho - self.expected_sum_rho).abs() <= rho_tol
    }
}

/// Both sides of `Σ_v N(Ω^(v)) = σ - ω + E - |∂Γ|` and
/// `Σ_v ρ(Ω^(v)) = |Γ|k/π - (ω + n) + E - |∂Γ|` over interior vertices.
pub fn local_global_audit(f: &Eigenfunction, surplus: &SurplusPair) -> Result<LocalGlobalReport, DomainError> {
    let g = f.graph();
    let k = f.k();
    let mut sum_n = 0;
    let mut sum_rho = 0.0;
    for v in g.interior_vertices() {
        sum_n += spectral_position_sign(f, v)?;
        sum_rho += local_star(f, v, Cut::Neumann)?.rho;
    }
    let shift = g.edge_count() as i64 - g.boundary_size() as i64;
    Ok(LocalGlobalReport {
        sum_n,
        expected_sum_n: surplus.sigma - surplus.omega + shift,
        sum_rho,
        expected_sum_rho: g.total_length() * k / PI - (surplus.omega + surplus.n as i64) as f64 + shift as f64,
    })
}

/// Checks `2|𝒲| + Σ_{v interior} deg v = 2ξ + |∂Γ|` on a Neumann partition.
pub fn trivial_domain_identity(domains: &[Domain], g: &MetricGraph, xi: usize) -> bool {
    let trivial = domains.iter().filter(|d| d.kind == DomainKind::Interval).count();
    let interior_degree: usize = g.interior_vertices().map(|v| g.degree(v)).sum();
    2 * trivial + interior_degree == 2 * xi + g.boundary_size()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Family, FamilySpec, LengthSource};
    use crate::secular::{first_eigenvalues, Classification};

    fn star() -> MetricGraph {
        FamilySpec::new(
            Family::Star { tails: 3 },
            LengthSource::Explicit {
                lengths: vec![0.9, 1.1, 1.3],
            },
        )
        .generate()
        .unwrap()
    }

    #[test]
    fn interval_domains() {
        let g = FamilySpec::new(Family::Interval, LengthSource::Explicit { lengths: vec![1.0] })
            .generate()
            .unwrap();
        for r in first_eigenvalues(&g, 12).unwrap() {
            let f = Eigenfunction::from_record(&g, &r).unwrap();
            let neumann = partition(&f, Cut::Neumann).unwrap();
            assert_eq!(neumann.len(), r.index);
            for d in &neumann {
                assert_eq!(d.kind, DomainKind::Interval);
                assert_eq!(d.count, Some(1));
                assert!((d.rho - 1.0).abs() < 1e-9);
                assert_eq!(d.boundary_size, 2);
            }
            let nodal = partition(&f, Cut::Nodal).unwrap();
            assert_eq!(nodal.len(), r.index + 1);
        }
    }

    #[test]
    fn star_partition_and_oracles() {
        let g = star();
        let records = first_eigenvalues(&g, 80).unwrap();
        let threshold = PI / g.min_length();
        for r in records.iter().filter(|r| r.class == Classification::Generic && r.k > threshold) {
            let f = Eigenfunction::from_record(&g, r).unwrap();
            let surplus = f.surpluses(r.index).unwrap();
            let domains = partition(&f, Cut::Neumann).unwrap();
            let stars: Vec<&Domain> = domains.iter().filter(|d| d.kind == DomainKind::Star).collect();
            assert_eq!(stars.len(), 1);
            assert!(domains.iter().all(|d| d.kind != DomainKind::Composite));
            let total: f64 = domains.iter().map(|d| d.length).sum();
            assert!((total - g.total_length()).abs() < 1e-10);
            assert!(trivial_domain_identity(&domains, &g, surplus.xi));

            let n = spectral_position_sign(&f, 0).unwrap();
            assert_eq!(n, -surplus.omega);
            assert!(n == 1 || n == 2);
            let local = local_star(&f, 0, Cut::Neumann).unwrap();
            assert!((local.length - stars[0].length).abs() < 1e-10);
            assert!((1.0..=2.0).contains(&local.rho));
            let direct = spectral_position_direct(&star_graph(&local.arms), r.k).unwrap();
            assert_eq!(direct, n);

            let dual = dual_star(&local, r.k).unwrap();
            assert!((dual.rho + local.rho - 3.0).abs() < 1e-8);
            let dual_direct = spectral_position_direct(&star_graph(&dual.arms), r.k).unwrap();
            assert_eq!(dual_direct + n, 3);
            let back = dual_star(
                &LocalStar {
                    arms: dual.arms.clone(),
                    ..local.clone()
                },
                r.k,
            )
            .unwrap();
            for (a, b) in back.arms.iter().zip(&local.arms) {
                assert!((a - b).abs() < 1e-12);
            }

            let report = local_global_audit(&f, &surplus).unwrap();
            assert!(report.holds(1e-8), "{report:?}");
        }
    }

    #[test]
    fn self_dual_lengths() {
        let k = 3.0;
        let arm = PI / (2.0 * k);
        let star = LocalStar {
            vertex: 0,
            arms: vec![arm; 3],
            arm_at_boundary: vec![false; 3],
            length: 3.0 * arm,
            rho: 1.5,
        };
        let dual = dual_star(&star, k).unwrap();
        assert!(dual.arms.iter().all(|&l| (l - arm).abs() < 1e-15));
    }

    #[test]
    fn sign_formula_arithmetic() {
        // deg 3 with signs (+, -, -): N = 3/2 - (1/2)(-1) = 2
        assert_eq!((3 - (1 - 1 - 1)) / 2, 2);
    }
}
