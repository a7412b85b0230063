//! Explicit secular conditions and surplus formulas for stowers and
//! mandarins, independent eigenvalue oracles built on them, and gluing of
//! tree eigenfunctions at leaves.

use std::f64::consts::{PI, TAU};

use serde::Serialize;
use thiserror::Error;

use crate::eigenfunction::{EdgeWave, Eigenfunction};
use crate::graph::{Edge, GraphError, MetricGraph};
use crate::secular::solver::brent;
use crate::torus::{torus_mod, TorusPoint};

/// Coordinates this close to a zero of `sin` or `cos` count as bad.
const BAD_BAND: f64 = 1e-10;
/// Largest normalized secular residual accepted on the secular set.
const SECULAR_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosedFormError {
    #[error("point is off the secular set (normalized residual {0:e})")]
    NotOnSecularSet(f64),
    #[error("coordinate {0} is bad")]
    BadCoordinate(usize),
    #[error("graph is not a {0}")]
    WrongFamily(&'static str),
    #[error("eigenfunction vanishes at glued leaf {0}")]
    ZeroBoundaryValue(usize),
    #[error("eigenvalues differ: {0} and {1}")]
    MismatchedK(f64, f64),
    #[error("vertex {0} is not a leaf")]
    NotLeaf(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn is_bad(angle: f64) -> bool {
    angle.sin().abs() < BAD_BAND || angle.cos().abs() < BAD_BAND
}

/// Stower coordinates: `y` on loops, `z` on tails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StowerPoint {
    pub loops: Vec<f64>,
    pub tails: Vec<f64>,
}

impl StowerPoint {
    /// Splits a torus point of a stower (every edge at vertex 0) into loop and tail coordinates.
    pub fn from_torus(g: &MetricGraph, kappa: &TorusPoint) -> Result<Self, ClosedFormError> {
        if !is_stower(g) {
            return Err(ClosedFormError::WrongFamily("stower"));
        }
        let mut loops = Vec::new();
        let mut tails = Vec::new();
        for (j, e) in g.edges().iter().enumerate() {
            if e.is_loop() {
                loops.push(kappa.coords()[j]);
            } else {
                tails.push(kappa.coords()[j]);
            }
        }
        Ok(Self { loops, tails })
    }

    /// Coordinates are bad when `sin z`, `cos z` (tails) or `sin(y/2)`, `cos(y/2)` (loops) vanish.
    pub fn bad_coordinates(&self) -> Vec<usize> {
        let halves = self.loops.iter().map(|y| y / 2.0);
        halves
            .chain(self.tails.iter().copied())
            .enumerate()
            .filter(|(_, a)| is_bad(*a))
            .map(|(i, _)| i)
            .collect()
    }

    /// `Σ tan z_j + 2 Σ tan(y_i / 2)`.
    pub fn secular(&self) -> f64 {
        self.tails.iter().map(|z| z.tan()).sum::<f64>() + 2.0 * self.loops.iter().map(|y| (y / 2.0).tan()).sum::<f64>()
    }

    /// The secular function divided by `Σ (1 + t²)` over its terms, a scale
    /// comparable to the distance from the secular set.
    pub fn normalized_secular(&self) -> f64 {
        let scale = self.tails.iter().map(|z| 1.0 + z.tan().powi(2)).sum::<f64>()
            + self.loops.iter().map(|y| 1.0 + (y / 2.0).tan().powi(2)).sum::<f64>();
        self.secular() / scale
    }

    pub fn i_tails(&self) -> usize {
        self.tails.iter().filter(|z| z.tan() < 0.0).count()
    }

    pub fn i_loops(&self) -> usize {
        self.loops.iter().filter(|y| (*y / 2.0).tan() < 0.0).count()
    }
}

fn is_stower(g: &MetricGraph) -> bool {
    g.edges().iter().all(|e| e.u == 0 || e.v == 0)
}

fn is_mandarin(g: &MetricGraph) -> bool {
    g.vertex_count() == 2 && g.edges().iter().all(|e| !e.is_loop())
}

/// `(σ, ω) = (i_loops, n - i_tails - i_loops)` on the generic part of a stower's secular set.
pub fn stower_surpluses(point: &StowerPoint) -> Result<(i64, i64), ClosedFormError> {
    if let Some(&i) = point.bad_coordinates().first() {
        return Err(ClosedFormError::BadCoordinate(i));
    }
    let residual = point.normalized_secular();
    if residual.abs() > SECULAR_TOL {
        return Err(ClosedFormError::NotOnSecularSet(residual));
    }
    let i_loops = point.i_loops() as i64;
    let i_tails = point.i_tails() as i64;
    Ok((i_loops, point.loops.len() as i64 - i_tails - i_loops))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MandarinBranch {
    Symmetric,
    Antisymmetric,
}

/// `F_s(κ) = Σ tan(κ_j / 2)`.
pub fn mandarin_fs(kappa: &[f64]) -> f64 {
    kappa.iter().map(|x| (x / 2.0).tan()).sum()
}

/// `F_a(κ) = Σ cot(κ_j / 2)`.
pub fn mandarin_fa(kappa: &[f64]) -> f64 {
    kappa.iter().map(|x| 1.0 / (x / 2.0).tan()).sum()
}

fn normalized(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let sum: f64 = values.clone().sum();
    let scale: f64 = values.map(|t| 1.0 + t * t).sum();
    sum / scale
}

/// `T(κ) = [κ + (π, ..., π)]`, exchanging the two branches.
pub fn mandarin_shift(kappa: &TorusPoint) -> TorusPoint {
    TorusPoint(kappa.coords().iter().map(|&x| torus_mod(x + PI)).collect())
}

/// Branch of a mandarin torus point, with the normalized residual of its secular function.
pub fn mandarin_branch(kappa: &TorusPoint) -> Result<(MandarinBranch, f64), ClosedFormError> {
    let c = kappa.coords();
    if let Some(i) = c.iter().position(|x| is_bad(x / 2.0)) {
        return Err(ClosedFormError::BadCoordinate(i));
    }
    let rs = normalized(c.iter().map(|x| (x / 2.0).tan()));
    let ra = normalized(c.iter().map(|x| 1.0 / (x / 2.0).tan()));
    if rs.abs() <= SECULAR_TOL && ra.abs() > SECULAR_TOL {
        Ok((MandarinBranch::Symmetric, rs))
    } else if ra.abs() <= SECULAR_TOL && rs.abs() > SECULAR_TOL {
        Ok((MandarinBranch::Antisymmetric, ra))
    } else {
        Err(ClosedFormError::NotOnSecularSet(rs.abs().min(ra.abs())))
    }
}

/// `σ = i - C`, `ω = E - i - C` on the symmetric branch, transported by `T`
/// from the antisymmetric one.
pub fn mandarin_surpluses(kappa: &TorusPoint) -> Result<(i64, i64), ClosedFormError> {
    let (branch, _) = mandarin_branch(kappa)?;
    let point = match branch {
        MandarinBranch::Symmetric => kappa.clone(),
        MandarinBranch::Antisymmetric => mandarin_shift(kappa),
    };
    let c = point.coords();
    let i = c.iter().filter(|x| (*x / 2.0).tan() < 0.0).count() as i64;
    let correction = if mandarin_fa(c) <= 0.0 { 1 } else { 0 };
    Ok((i - correction, c.len() as i64 - i - correction))
}

pub fn stower_point(g: &MetricGraph, kappa: &TorusPoint) -> Result<StowerPoint, ClosedFormError> {
    StowerPoint::from_torus(g, kappa)
}

pub fn check_mandarin(g: &MetricGraph) -> Result<(), ClosedFormError> {
    if is_mandarin(g) {
        Ok(())
    } else {
        Err(ClosedFormError::WrongFamily("mandarin"))
    }
}

/// Roots on `(0, kmax]` of a function increasing between consecutive poles,
/// one root per pole gap.
fn roots_between_poles<F: Fn(f64) -> f64>(f: F, mut poles: Vec<f64>, lead: Option<f64>, kmax: f64) -> Vec<f64> {
    poles.sort_by(f64::total_cmp);
    poles.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs());
    let mut gaps: Vec<(f64, f64)> = poles.windows(2).map(|w| (w[0], w[1])).collect();
    if let (Some(lo), Some(&first)) = (lead, poles.first()) {
        gaps.insert(0, (lo, first));
    }
    let mut roots = Vec::new();
    for (a, b) in gaps {
        if a >= kmax {
            break;
        }
        let mut delta = 1e-9 * (b - a);
        let root = loop {
            let (x0, x1) = (a + delta, b - delta);
            let (f0, f1) = (f(x0), f(x1));
            if f0 < 0.0 && f1 > 0.0 {
                break Some(brent(&f, x0, x1, f0, f1, 1e-15 * b));
            }
            if delta < 1e-300 {
                break None;
            }
            delta *= 1e-3;
        };
        if let Some(r) = root {
            if r <= kmax {
                roots.push(r);
            }
        }
    }
    roots
}

fn poles(lengths: &[f64], period: f64, offset: f64, kmax: f64) -> Vec<f64> {
    // zeros of cos(k l / 2) (offset π) or sin(k l / 2) (offset 0), k > 0
    let mut out = Vec::new();
    for &l in lengths {
        let step = period / l;
        let mut m = 0usize;
        loop {
            let k = (offset + m as f64 * period) / l;
            if k > 0.0 {
                out.push(k);
            }
            if k > kmax + 2.0 * step {
                break;
            }
            m += 1;
        }
    }
    out
}

/// Positive eigenvalues up to `kmax` of a stower with loop lengths `y` and tail lengths `z`:
/// the roots of `Σ tan(k z_j) + 2 Σ tan(k y_i / 2)` and the loop eigenvalues `2πm / y_i`.
pub fn stower_eigenvalues(loops: &[f64], tails: &[f64], kmax: f64) -> Vec<f64> {
    let f = |k: f64| {
        tails.iter().map(|z| (k * z).tan()).sum::<f64>() + 2.0 * loops.iter().map(|y| (k * y / 2.0).tan()).sum::<f64>()
    };
    // poles where cos(k z) = 0 or cos(k y / 2) = 0
    let halved_tails: Vec<f64> = tails.iter().map(|z| 2.0 * z).collect();
    let mut p = poles(&halved_tails, TAU, PI, kmax);
    p.extend(poles(loops, TAU, PI, kmax));
    let mut out = roots_between_poles(f, p, None, kmax);
    for &y in loops {
        let mut m = 1.0;
        while TAU * m / y <= kmax {
            out.push(TAU * m / y);
            m += 1.0;
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Positive eigenvalues up to `kmax` of a mandarin: roots of `Σ tan(k l_j / 2)`
/// (symmetric) and of `Σ cot(k l_j / 2)` (antisymmetric).
pub fn mandarin_eigenvalues(lengths: &[f64], kmax: f64) -> Vec<f64> {
    let fs = |k: f64| lengths.iter().map(|l| (k * l / 2.0).tan()).sum::<f64>();
    let fa = |k: f64| -lengths.iter().map(|l| 1.0 / (k * l / 2.0).tan()).sum::<f64>();
    let mut out = roots_between_poles(fs, poles(lengths, TAU, PI, kmax), None, kmax);
    out.extend(roots_between_poles(fa, poles(lengths, TAU, 0.0, kmax), Some(0.0), kmax));
    out.sort_by(f64::total_cmp);
    out
}

/// Tree obtained by merging a leaf edge of one tree with a leaf edge of
/// another, with the eigenfunction glued across the removed leaves.
#[derive(Debug, Clone)]
pub struct GluedTree {
    pub graph: MetricGraph,
    pub eigenfunction: Eigenfunction,
}

/// Real wave of `f` on `edge`, parametrized from vertex `from`.
fn wave_from(f: &Eigenfunction, edge: usize, from: usize) -> (EdgeWave, usize) {
    let e = f.graph().edge(edge);
    let w = f.wave(edge);
    if e.u == from {
        (w, e.v)
    } else {
        (
            EdgeWave {
                amplitude: w.amplitude,
                phase: -w.phase - f.k() * e.length,
            },
            e.u,
        )
    }
}

pub fn tree_glue(f1: &Eigenfunction, leaf1: usize, f2: &Eigenfunction, leaf2: usize) -> Result<GluedTree, ClosedFormError> {
    let (g1, g2) = (f1.graph(), f2.graph());
    let k = f1.k();
    if (k - f2.k()).abs() > 1e-12 * k {
        return Err(ClosedFormError::MismatchedK(k, f2.k()));
    }
    for (g, leaf) in [(g1, leaf1), (g2, leaf2)] {
        if g.degree(leaf) != 1 {
            return Err(ClosedFormError::NotLeaf(leaf));
        }
    }
    let v1 = f1.real_vertex_value(leaf1);
    let v2 = f2.real_vertex_value(leaf2);
    let scale_of = |v: f64| v.abs().max(f64::MIN_POSITIVE);
    if v1.abs() < 1e-10 * scale_of(f1.sup_scale()) {
        return Err(ClosedFormError::ZeroBoundaryValue(leaf1));
    }
    if v2.abs() < 1e-10 * scale_of(f2.sup_scale()) {
        return Err(ClosedFormError::ZeroBoundaryValue(leaf2));
    }
    let c = v1 / v2;

    let e1 = g1.ends(leaf1)[0].edge;
    let e2 = g2.ends(leaf2)[0].edge;
    let map1 = |v: usize| if v < leaf1 { v } else { v - 1 };
    let offset = g1.vertex_count() - 1;
    let map2 = |v: usize| offset + if v < leaf2 { v } else { v - 1 };

    let mut edges = Vec::new();
    let mut waves = Vec::new();
    for (j, e) in g1.edges().iter().enumerate().filter(|&(j, _)| j != e1) {
        edges.push(Edge { u: map1(e.u), v: map1(e.v), length: e.length });
        waves.push(f1.wave(j));
    }
    for (j, e) in g2.edges().iter().enumerate().filter(|&(j, _)| j != e2) {
        edges.push(Edge { u: map2(e.u), v: map2(e.v), length: e.length });
        let w = f2.wave(j);
        waves.push(EdgeWave {
            amplitude: w.amplitude * c.abs(),
            phase: if c < 0.0 { w.phase + PI } else { w.phase },
        });
    }
    let (_, inner1) = wave_from(f1, e1, leaf1);
    let (_, inner2) = wave_from(f2, e2, leaf2);
    let (wave, _) = wave_from(f1, e1, inner1);
    edges.push(Edge {
        u: map1(inner1),
        v: map2(inner2),
        length: g1.edge(e1).length + g2.edge(e2).length,
    });
    waves.push(wave);

    let graph = MetricGraph::new(g1.vertex_count() + g2.vertex_count() - 2, edges)?;
    let eigenfunction = Eigenfunction::from_waves(&graph, k, &waves);
    Ok(GluedTree { graph, eigenfunction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Family, FamilySpec, LengthSource};
    use crate::secular::{Classification, Solver, Tolerances};
    use crate::torus::flow_point;

    fn stower(loops: usize, tails: usize, seed: u64) -> MetricGraph {
        FamilySpec::new(Family::Stower { loops, tails }, LengthSource::uniform(seed))
            .generate()
            .unwrap()
    }

    fn mandarin(edges: usize, seed: u64) -> MetricGraph {
        FamilySpec::new(Family::Mandarin { edges }, LengthSource::uniform(seed))
            .generate()
            .unwrap()
    }

    #[test]
    fn stower_oracle_matches_engine() {
        let g = stower(2, 1, 7);
        let point = StowerPoint::from_torus(&g, &TorusPoint(g.lengths())).unwrap();
        let records = Solver::new(&g, Tolerances::default()).first(200).unwrap();
        let kmax = records.last().unwrap().k;
        let oracle = stower_eigenvalues(&point.loops, &point.tails, kmax * (1.0 + 1e-12));
        let engine: Vec<f64> = records.iter().flat_map(|r| std::iter::repeat(r.k).take(r.multiplicity)).collect();
        assert_eq!(oracle.len(), engine.len());
        for (a, b) in oracle.iter().zip(&engine) {
            assert!((a - b).abs() <= 1e-9 * b, "{a} {b}");
        }
    }

    #[test]
    fn mandarin_oracle_matches_engine() {
        let g = mandarin(5, 3);
        let records = Solver::new(&g, Tolerances::default()).first(200).unwrap();
        let kmax = records.last().unwrap().k;
        let oracle = mandarin_eigenvalues(&g.lengths(), kmax * (1.0 + 1e-12));
        assert_eq!(oracle.len(), records.len());
        for (a, r) in oracle.iter().zip(&records) {
            assert!((a - r.k).abs() <= 1e-9 * r.k);
        }
    }

    #[test]
    fn stower_formulas_match_engine() {
        let g = stower(2, 3, 5);
        let records = Solver::new(&g, Tolerances::default()).first(300).unwrap();
        let mut checked = 0;
        for r in records.iter().filter(|r| r.class == Classification::Generic) {
            let f = Eigenfunction::from_record(&g, r).unwrap();
            let s = f.surpluses(r.index).unwrap();
            let point = stower_point(&g, &flow_point(r.k, &g.lengths())).unwrap();
            assert_eq!(stower_surpluses(&point).unwrap(), (s.sigma, s.omega), "k = {}", r.k);
            checked += 1;
        }
        assert!(checked > 200);
    }

    #[test]
    fn mandarin_formulas_match_engine() {
        let g = mandarin(5, 9);
        let records = Solver::new(&g, Tolerances::default()).first(300).unwrap();
        let mut checked = 0;
        for r in records.iter().filter(|r| r.class == Classification::Generic) {
            let f = Eigenfunction::from_record(&g, r).unwrap();
            let s = f.surpluses(r.index).unwrap();
            let kappa = flow_point(r.k, &g.lengths());
            assert_eq!(mandarin_surpluses(&kappa).unwrap(), (s.sigma, s.omega), "k = {}", r.k);
            assert_eq!((s.sigma - s.omega).rem_euclid(2), 5 % 2);
            checked += 1;
        }
        assert!(checked > 200);
    }

    #[test]
    fn three_edge_mandarin_has_unit_nodal_surplus() {
        let g = mandarin(3, 1);
        for r in Solver::new(&g, Tolerances::default()).first(150).unwrap() {
            if let Ok((sigma, _)) = mandarin_surpluses(&flow_point(r.k, &g.lengths())) {
                assert_eq!(sigma, 1);
            }
        }
    }

    #[test]
    fn branch_map_exchanges_secular_functions() {
        for i in 1..40 {
            for j in 1..40 {
                let kappa = vec![0.157 * i as f64, 0.161 * j as f64, 2.9];
                let shifted = mandarin_shift(&TorusPoint(kappa.clone()));
                let fs = mandarin_fs(shifted.coords());
                let fa = mandarin_fa(&kappa);
                assert!((fs + fa).abs() <= 1e-9 * (1.0 + fa.abs()));
            }
        }
    }

    #[test]
    fn stower_poles_and_zeros_interlace() {
        let point = StowerPoint {
            loops: vec![1.3],
            tails: vec![0.7, 1.9],
        };
        // along t -> F(t point), a zero lies between every pair of consecutive poles
        let f = |t: f64| {
            StowerPoint {
                loops: point.loops.iter().map(|y| y * t).collect(),
                tails: point.tails.iter().map(|z| z * t).collect(),
            }
            .secular()
        };
        let mut last_sign = f(1e-6).signum();
        let mut since_pole = 0;
        let mut poles_seen = 0;
        let mut t = 1e-6;
        while t < 20.0 {
            let next = t + 1e-4;
            let s = f(next).signum();
            if s != last_sign {
                if s > last_sign {
                    since_pole += 1;
                } else {
                    if poles_seen > 0 {
                        assert_eq!(since_pole, 1, "t = {t}");
                    }
                    poles_seen += 1;
                    since_pole = 0;
                }
            }
            last_sign = s;
            t = next;
        }
        assert!(poles_seen > 10);
    }

    #[test]
    fn bad_coordinates_rejected() {
        let p = StowerPoint {
            loops: vec![PI],
            tails: vec![1.0],
        };
        assert!(matches!(stower_surpluses(&p), Err(ClosedFormError::BadCoordinate(0))));
        let off = StowerPoint {
            loops: vec![1.0],
            tails: vec![1.0],
        };
        assert!(matches!(stower_surpluses(&off), Err(ClosedFormError::NotOnSecularSet(_))));
    }

    #[test]
    fn glued_stars() {
        let s1 = stower(0, 3, 21);
        let s2 = stower(0, 3, 22);
        // common k: rescale the second star so it shares an eigenvalue with the first
        let r1 = Solver::new(&s1, Tolerances::default()).first(12).unwrap().into_iter().filter(|r| r.class == Classification::Generic).last().unwrap();
        let r2 = Solver::new(&s2, Tolerances::default()).first(12).unwrap().into_iter().filter(|r| r.class == Classification::Generic).last().unwrap();
        let ratio = r2.k / r1.k;
        let s2 = s2.with_lengths(&s2.lengths().iter().map(|l| l * ratio).collect::<Vec<_>>()).unwrap();
        let r2 = Solver::new(&s2, Tolerances::default()).window(r1.k * 0.999, r1.k * 1.001).unwrap().remove(0);
        let f1 = Eigenfunction::from_record(&s1, &r1).unwrap();
        let f2 = Eigenfunction::from_record(&s2, &r2).unwrap();
        let f2 = Eigenfunction::from_waves(&s2, r1.k, &(0..3).map(|e| f2.wave(e)).collect::<Vec<_>>());
        let glued = tree_glue(&f1, 1, &f2, 2).unwrap();
        let f = &glued.eigenfunction;
        let scale = f.sup_scale();
        assert!(f.continuity_defect() < 1e-8 * scale);
        assert!(f.kirchhoff_defect() < 1e-8 * scale * r1.k);
        let omega = |f: &Eigenfunction, g: &MetricGraph| {
            let n = Solver::new(g, Tolerances::default()).count_below(f.k()).unwrap() + 1;
            f.surpluses(n).unwrap().omega
        };
        let w = omega(f, &glued.graph);
        assert_eq!(w, omega(&f1, &s1) + omega(&f2, &s2) + 1);
        assert!((-3..=-1).contains(&w));
    }
}
