//! Eigenfunctions rebuilt from kernel vectors, with vertex data, closed-form
//! nodal and Neumann counts, and surpluses.
//!
//! On edge `j = (u, v)` with arc length `x` measured from `u`,
//! `f(x) = a_{2j} e^{ik(x - l)} + a_{2j+1} e^{-ikx}`, i.e.
//! `f(x) = α e^{ikx} + β e^{-ikx}` with `α = a_{2j} e^{-ikl}`, `β = a_{2j+1}`.
//! A real eigenfunction has `β = conj(α)` and then `f(x) = A cos(φ + kx)`
//! with `A = 2|α|`, `φ = arg α`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{EdgeEnd, MetricGraph, Side};
use crate::secular::{Classification, EigenvalueRecord, Tolerances};

const REALIZATION_LIMIT: f64 = 1e-6;
const LOOP_SUPPORT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenfunctionError {
    #[error("eigenvalue has multiplicity {0}; eigenfunction is not unique")]
    NotSimple(usize),
    #[error("no unit phase makes the eigenfunction real (defect {0:e})")]
    RealizationFailure(f64),
    #[error("eigenfunction vanishes identically on edge {0}")]
    DegenerateEdge(usize),
    #[error("f(v) f'(v) vanishes at interior vertex {vertex} along edge {edge}")]
    SignDegeneracy { vertex: usize, edge: usize },
    #[error("eigenfunction is not generic")]
    NonGeneric,
}

/// `sgn(x) = 1` for `x > 0` and `-1` otherwise.
pub fn sgn(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Real form `A cos(φ + kx)` of an eigenfunction on one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeWave {
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction {
    k: f64,
    alpha: Vec<Complex64>,
    beta: Vec<Complex64>,
    lengths: Vec<f64>,
    graph: MetricGraph,
}

impl Eigenfunction {
    /// Wraps a kernel vector without changing its phase.
    pub fn from_kernel(g: &MetricGraph, k: f64, a: &DVector<Complex64>) -> Self {
        let lengths = g.lengths();
        let alpha = lengths
            .iter()
            .enumerate()
            .map(|(j, &l)| a[2 * j] * Complex64::from_polar(1.0, -k * l))
            .collect();
        let beta = (0..lengths.len()).map(|j| a[2 * j + 1]).collect();
        Self {
            k,
            alpha,
            beta,
            lengths,
            graph: g.clone(),
        }
    }

    /// Realized eigenfunction of a simple record.
    pub fn from_record(g: &MetricGraph, record: &EigenvalueRecord) -> Result<Self, EigenfunctionError> {
        if record.multiplicity != 1 {
            return Err(EigenfunctionError::NotSimple(record.multiplicity));
        }
        Self::from_kernel(g, record.k, &record.kernel[0]).realized()
    }

    /// Builds a real eigenfunction directly from per-edge real forms.
    pub fn from_waves(g: &MetricGraph, k: f64, waves: &[EdgeWave]) -> Self {
        let alpha: Vec<Complex64> = waves
            .iter()
            .map(|w| Complex64::from_polar(w.amplitude / 2.0, w.phase))
            .collect();
        let beta = alpha.iter().map(|a| a.conj()).collect();
        Self {
            k,
            alpha,
            beta,
            lengths: g.lengths(),
            graph: g.clone(),
        }
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    /// Bond amplitudes `a` in the engine's convention.
    pub fn amplitudes(&self) -> DVector<Complex64> {
        let e = self.lengths.len();
        DVector::from_fn(2 * e, |b, _| {
            let j = b / 2;
            if b % 2 == 0 {
                self.alpha[j] * Complex64::from_polar(1.0, self.k * self.lengths[j])
            } else {
                self.beta[j]
            }
        })
    }

    /// Multiplies by a unit phase.
    pub fn rotated(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.alpha.iter_mut().for_each(|a| *a *= c);
        out.beta.iter_mut().for_each(|b| *b *= c);
        out
    }

    /// Multiplies by a real factor.
    pub fn scaled(&self, s: f64) -> Self {
        self.rotated(Complex64::new(s, 0.0))
    }

    pub fn value(&self, edge: usize, x: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, self.k * x);
        self.alpha[edge] * e + self.beta[edge] * e.conj()
    }

    pub fn derivative(&self, edge: usize, x: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, self.k * x);
        Complex64::new(0.0, self.k) * (self.alpha[edge] * e - self.beta[edge] * e.conj())
    }

    fn end_position(&self, end: EdgeEnd) -> f64 {
        match end.side {
            Side::Start => 0.0,
            Side::End => self.lengths[end.edge],
        }
    }

    /// Value at the vertex seen through one edge end.
    pub fn end_value(&self, end: EdgeEnd) -> Complex64 {
        self.value(end.edge, self.end_position(end))
    }

    /// Derivative at a vertex in the direction pointing into the edge.
    pub fn outgoing_derivative(&self, end: EdgeEnd) -> Complex64 {
        let d = self.derivative(end.edge, self.end_position(end));
        match end.side {
            Side::Start => d,
            Side::End => -d,
        }
    }

    /// Vertex value, averaged over incident edge ends.
    pub fn vertex_value(&self, v: usize) -> Complex64 {
        let ends = self.graph.ends(v);
        let sum: Complex64 = ends.iter().map(|&e| self.end_value(e)).sum();
        sum / ends.len() as f64
    }

    /// Largest `|f(v)|` and `|∂_e f(v)| / k` over vertices and interior edge ends.
    pub fn vertex_scale(&self) -> f64 {
        let mut m: f64 = 0.0;
        for v in 0..self.graph.vertex_count() {
            m = m.max(self.vertex_value(v).norm());
            if !self.graph.is_boundary(v) {
                for &end in self.graph.ends(v) {
                    m = m.max(self.outgoing_derivative(end).norm() / self.k);
                }
            }
        }
        m
    }

    /// `max |α| + |β|` over edges, a proxy for `sup |f|`.
    pub fn sup_scale(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| a.norm() + b.norm())
            .fold(0.0, f64::max)
    }

    /// Worst relative disagreement between incident edge values at a vertex.
    pub fn continuity_defect(&self) -> f64 {
        let scale = self.sup_scale();
        let mut worst: f64 = 0.0;
        for v in 0..self.graph.vertex_count() {
            let ends = self.graph.ends(v);
            let first = self.end_value(ends[0]);
            for &e in &ends[1..] {
                worst = worst.max((self.end_value(e) - first).norm());
            }
        }
        worst / scale
    }

    /// Worst relative Kirchhoff residual `|Σ_e ∂_e f(v)| / (k sup|f|)`.
    pub fn kirchhoff_defect(&self) -> f64 {
        let scale = self.sup_scale() * self.k;
        (0..self.graph.vertex_count())
            .map(|v| {
                self.graph
                    .ends(v)
                    .iter()
                    .map(|&e| self.outgoing_derivative(e))
                    .sum::<Complex64>()
                    .norm()
            })
            .fold(0.0, f64::max)
            / scale
    }

    /// Relative size of the imaginary part: `max_e |α - conj β| / sup|f|`.
    pub fn imaginary_defect(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| (a - b.conj()).norm())
            .fold(0.0, f64::max)
            / self.sup_scale()
    }

    /// Phase making the eigenfunction real: the largest vertex value becomes
    /// real positive (ties broken by lowest vertex id). When every vertex
    /// value vanishes the phase is fixed on the edge of largest amplitude.
    pub fn realization_phase(&self) -> Complex64 {
        let scale = self.sup_scale();
        let mut best: Option<(usize, f64)> = None;
        for v in 0..self.graph.vertex_count() {
            let m = self.vertex_value(v).norm();
            if best.map_or(true, |(_, b)| m > b) {
                best = Some((v, m));
            }
        }
        if let Some((v, m)) = best {
            if m > 1e-6 * scale {
                let z = self.vertex_value(v);
                return z.conj() / m;
            }
        }
        // c α = conj(c β)  ⇔  c² = conj(β) / α
        let j = (0..self.alpha.len())
            .max_by(|&i, &j| {
                let a = self.alpha[i].norm() + self.beta[i].norm();
                let b = self.alpha[j].norm() + self.beta[j].norm();
                a.total_cmp(&b)
            })
            .unwrap_or(0);
        let ratio = self.beta[j].conj() / self.alpha[j];
        Complex64::from_polar(1.0, ratio.arg() / 2.0)
    }

    /// Copy multiplied by the realization phase and projected onto real functions.
    pub fn realized(&self) -> Result<Self, EigenfunctionError> {
        let f = self.rotated(self.realization_phase());
        let defect = f.imaginary_defect();
        if !(defect <= REALIZATION_LIMIT) {
            return Err(EigenfunctionError::RealizationFailure(defect));
        }
        Ok(f)
    }

    /// Real form on one edge, valid after realization.
    pub fn wave(&self, edge: usize) -> EdgeWave {
        let alpha_r = (self.alpha[edge] + self.beta[edge].conj()) / 2.0;
        EdgeWave {
            amplitude: 2.0 * alpha_r.norm(),
            phase: alpha_r.arg(),
        }
    }

    /// Real vertex value via the first incident end, after realization.
    pub fn real_vertex_value(&self, v: usize) -> f64 {
        self.vertex_value(v).re
    }

    /// Real outgoing derivative, after realization.
    pub fn real_outgoing_derivative(&self, end: EdgeEnd) -> f64 {
        let w = self.wave(end.edge);
        let x = self.end_position(end);
        let d = -w.amplitude * self.k * (w.phase + self.k * x).sin();
        match end.side {
            Side::Start => d,
            Side::End => -d,
        }
    }

    /// Real value at an end, after realization.
    pub fn real_end_value(&self, end: EdgeEnd) -> f64 {
        let w = self.wave(end.edge);
        w.amplitude * (w.phase + self.k * self.end_position(end)).cos()
    }

    fn check_edge(&self, edge: usize) -> Result<EdgeWave, EigenfunctionError> {
        let w = self.wave(edge);
        if !(w.amplitude > 1e-12 * self.sup_scale()) {
            return Err(EigenfunctionError::DegenerateEdge(edge));
        }
        Ok(w)
    }

    /// Interior zeros of `f` on `(0, l_e)`.
    pub fn nodal_count_on_edge(&self, edge: usize) -> Result<usize, EigenfunctionError> {
        let w = self.check_edge(edge)?;
        let l = self.lengths[edge];
        let lo = (w.phase - FRAC_PI_2) / PI;
        let hi = (w.phase + self.k * l - FRAC_PI_2) / PI;
        Ok(open_integer_count(lo, hi))
    }

    /// Interior zeros of `f'` on `(0, l_e)`. Ends at boundary vertices are
    /// critical points by the vertex condition; they are snapped onto the
    /// lattice so that they are never counted.
    pub fn neumann_count_on_edge(&self, edge: usize) -> Result<usize, EigenfunctionError> {
        let w = self.check_edge(edge)?;
        let e = self.graph.edge(edge);
        let l = self.lengths[edge];
        let mut lo = w.phase / PI;
        let mut hi = (w.phase + self.k * l) / PI;
        if self.graph.is_boundary(e.u) {
            lo = lo.round();
        }
        if self.graph.is_boundary(e.v) {
            hi = hi.round();
        }
        Ok(open_integer_count(lo, hi))
    }

    /// Locations of interior Neumann points on an edge, increasing.
    pub fn neumann_points(&self, edge: usize) -> Vec<f64> {
        self.lattice_points(edge, 0.0, true)
    }

    /// Locations of interior nodal points on an edge, increasing.
    pub fn nodal_points(&self, edge: usize) -> Vec<f64> {
        self.lattice_points(edge, FRAC_PI_2, false)
    }

    /// Points `x ∈ (0, l)` with `φ + kx ≡ offset (mod π)`.
    fn lattice_points(&self, edge: usize, offset: f64, snap_boundary: bool) -> Vec<f64> {
        let w = self.wave(edge);
        let e = self.graph.edge(edge);
        let l = self.lengths[edge];
        let mut lo = (w.phase - offset) / PI;
        let mut hi = (w.phase + self.k * l - offset) / PI;
        if snap_boundary && self.graph.is_boundary(e.u) {
            lo = lo.round();
        }
        if snap_boundary && self.graph.is_boundary(e.v) {
            hi = hi.round();
        }
        if hi <= lo {
            return Vec::new();
        }
        let first = lo.floor() as i64 + 1;
        let last = hi.ceil() as i64 - 1;
        (first..=last)
            .map(|m| ((m as f64 * PI + offset - w.phase) / self.k).clamp(0.0, l))
            .collect()
    }

    /// `sgn(f(v) ∂_e f(v))` at one end; `-1` at boundary vertices.
    pub fn end_sign(&self, end: EdgeEnd) -> Result<i64, EigenfunctionError> {
        let v = self.graph.end_vertex(end);
        if self.graph.is_boundary(v) {
            return Ok(-1);
        }
        let product = self.real_end_value(end) * self.real_outgoing_derivative(end);
        if product == 0.0 {
            return Err(EigenfunctionError::SignDegeneracy { vertex: v, edge: end.edge });
        }
        Ok(sgn(product))
    }

    /// `φ(f|_e) - ξ(f|_e)` from the endpoint signs.
    pub fn edge_diff(&self, edge: usize) -> Result<i64, EigenfunctionError> {
        let s_u = self.end_sign(EdgeEnd { edge, side: Side::Start })?;
        let s_v = self.end_sign(EdgeEnd { edge, side: Side::End })?;
        Ok(-(s_u + s_v) / 2)
    }

    /// Total nodal and Neumann counts.
    pub fn counts(&self) -> Result<(usize, usize), EigenfunctionError> {
        let mut nodal = 0;
        let mut neumann = 0;
        for e in 0..self.lengths.len() {
            nodal += self.nodal_count_on_edge(e)?;
            neumann += self.neumann_count_on_edge(e)?;
        }
        Ok((nodal, neumann))
    }

    pub fn surpluses(&self, n: usize) -> Result<SurplusPair, EigenfunctionError> {
        let (phi, xi) = self.counts()?;
        Ok(SurplusPair::new(n, phi, xi))
    }
}

/// Number of integers strictly between `lo` and `hi`.
pub fn open_integer_count(lo: f64, hi: f64) -> usize {
    if hi <= lo {
        return 0;
    }
    let c = hi.ceil() as i64 - 1 - lo.floor() as i64;
    c.max(0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SurplusPair {
    pub n: usize,
    pub phi: usize,
    pub xi: usize,
    pub sigma: i64,
    pub omega: i64,
}

impl SurplusPair {
    pub fn new(n: usize, phi: usize, xi: usize) -> Self {
        Self {
            n,
            phi,
            xi,
            sigma: phi as i64 - n as i64,
            omega: xi as i64 - n as i64,
        }
    }

    /// `0 ≤ σ ≤ β` and `1 - β - |∂Γ| ≤ ω ≤ 2β - 1`.
    pub fn within_bounds(&self, g: &MetricGraph) -> bool {
        let beta = g.betti() as i64;
        let boundary = g.boundary_size() as i64;
        (0..=beta).contains(&self.sigma) && (1 - beta - boundary..=2 * beta - 1).contains(&self.omega)
    }
}

/// Classifies a simple eigenvalue from its kernel vector.
pub fn classify(g: &MetricGraph, k: f64, a: &DVector<Complex64>, tol: &Tolerances) -> Classification {
    let f = Eigenfunction::from_kernel(g, k, a);
    if is_loop_state(g, k, a, tol) {
        return Classification::Loop;
    }
    let scale = f.vertex_scale();
    let eps = tol.generic * scale;
    let mut smallest = f64::INFINITY;
    for v in 0..g.vertex_count() {
        smallest = smallest.min(f.vertex_value(v).norm());
        if !g.is_boundary(v) {
            for &end in g.ends(v) {
                smallest = smallest.min(f.outgoing_derivative(end).norm() / k);
            }
        }
    }
    if !(smallest > eps) {
        Classification::NonGenericSimple
    } else if smallest <= 10.0 * eps {
        Classification::Borderline
    } else {
        Classification::Generic
    }
}

fn is_loop_state(g: &MetricGraph, k: f64, a: &DVector<Complex64>, tol: &Tolerances) -> bool {
    let total = a.camax();
    for e in g.loop_edges() {
        let turns = k * g.edge(e).length / TAU;
        let m = turns.round();
        if m < 1.0 || (turns - m).abs() * TAU > tol.loop_rel * k {
            continue;
        }
        let off = a
            .iter()
            .enumerate()
            .filter(|(b, _)| b / 2 != e)
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max);
        if off <= LOOP_SUPPORT_TOL * total {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Family, FamilySpec, LengthSource};
    use crate::secular::{first_eigenvalues, Solver};

    fn interval() -> MetricGraph {
        FamilySpec::new(Family::Interval, LengthSource::Explicit { lengths: vec![1.0] })
            .generate()
            .unwrap()
    }

    #[test]
    fn open_counts() {
        assert_eq!(open_integer_count(0.0, 1.0), 0);
        assert_eq!(open_integer_count(0.0, 1.5), 1);
        assert_eq!(open_integer_count(-0.5, 3.2), 4);
        assert_eq!(open_integer_count(2.0, 2.0), 0);
        assert_eq!(open_integer_count(-1.0, 1.0), 1);
    }

    #[test]
    fn cosine_edge_counts() {
        let k = 3.7 * PI;
        let f = Eigenfunction::from_waves(&interval(), k, &[EdgeWave { amplitude: 1.0, phase: 0.0 }]);
        assert_eq!(f.nodal_count_on_edge(0).unwrap(), 4);
        assert_eq!(f.neumann_count_on_edge(0).unwrap(), 3);
        assert_eq!(f.nodal_points(0).len(), 4);
        assert!((f.nodal_points(0)[0] - 0.5 / 3.7).abs() < 1e-12);
    }

    #[test]
    fn interval_eigenfunctions() {
        let g = interval();
        let records = first_eigenvalues(&g, 30).unwrap();
        for r in &records {
            assert_eq!(r.class, Classification::Generic);
            let f = Eigenfunction::from_record(&g, r).unwrap();
            let (phi, xi) = f.counts().unwrap();
            assert_eq!((phi, xi), (r.index, r.index - 1));
            let s = f.surpluses(r.index).unwrap();
            assert_eq!((s.sigma, s.omega), (0, -1));
            // f is a multiple of cos(nπx)
            let w = f.wave(0);
            let ratio = f.value(0, 0.123).re / (r.index as f64 * PI * 0.123).cos();
            assert!((ratio.abs() - w.amplitude).abs() < 1e-8 * w.amplitude);
        }
    }

    #[test]
    fn star_invariants_and_edge_diff() {
        let g = FamilySpec::new(
            Family::Star { tails: 3 },
            LengthSource::Explicit {
                lengths: vec![0.9, 1.1, 1.3],
            },
        )
        .generate()
        .unwrap();
        let records = first_eigenvalues(&g, 100).unwrap();
        let mut generic = 0;
        for r in records.iter().filter(|r| r.class == Classification::Generic) {
            generic += 1;
            let f = Eigenfunction::from_record(&g, r).unwrap();
            assert!(f.continuity_defect() < 1e-9);
            assert!(f.kirchhoff_defect() < 1e-9);
            assert!(f.imaginary_defect() < 1e-9);
            for e in 0..3 {
                let diff = f.nodal_count_on_edge(e).unwrap() as i64 - f.neumann_count_on_edge(e).unwrap() as i64;
                assert_eq!(diff, f.edge_diff(e).unwrap());
                // boundary derivative vanishes
                let end = EdgeEnd { edge: e, side: Side::End };
                assert!(f.real_outgoing_derivative(end).abs() < 1e-8 * f.sup_scale() * r.k);
            }
            let s = f.surpluses(r.index).unwrap();
            assert_eq!(s.sigma, 0);
            assert!(s.omega == -1 || s.omega == -2);
        }
        assert!(generic > 50);
    }

    #[test]
    fn loop_state_is_classified() {
        let g = FamilySpec::new(
            Family::Stower { loops: 1, tails: 2 },
            LengthSource::Explicit {
                lengths: vec![1.0, 0.77, 1.31],
            },
        )
        .generate()
        .unwrap();
        let solver = Solver::new(&g, Tolerances::default());
        let records = solver.window(6.0, 6.5).unwrap();
        let r = records.iter().find(|r| (r.k - TAU).abs() < 1e-8).unwrap();
        assert_eq!(r.class, Classification::Loop);
        let f = Eigenfunction::from_record(&g, r).unwrap();
        let sup = f.sup_scale();
        for e in 1..3 {
            assert!(f.wave(e).amplitude < 1e-6 * sup);
        }
    }

    #[test]
    fn sampled_counts_match_closed_form() {
        let g = FamilySpec::new(Family::Mandarin { edges: 4 }, LengthSource::uniform(21))
            .generate()
            .unwrap();
        let records = first_eigenvalues(&g, 60).unwrap();
        for r in records.iter().filter(|r| r.class == Classification::Generic) {
            let f = Eigenfunction::from_record(&g, r).unwrap();
            for e in 0..g.edge_count() {
                let l = g.edge(e).length;
                let samples = ((r.k * l / TAU) * 1e4).ceil() as usize + 10;
                let mut zeros = 0;
                let mut crit = 0;
                let mut prev = f.value(e, 0.0).re;
                let mut prev_d = f.derivative(e, 0.0).re;
                // offset grid: symmetric eigenfunctions put critical points at rational positions
                for i in 0..samples {
                    let x = l * (i as f64 + 0.318) / samples as f64;
                    let y = f.value(e, x).re;
                    let d = f.derivative(e, x).re;
                    if y * prev < 0.0 {
                        zeros += 1;
                    }
                    if d * prev_d < 0.0 {
                        crit += 1;
                    }
                    prev = y;
                    prev_d = d;
                }
                assert_eq!(zeros, f.nodal_count_on_edge(e).unwrap());
                assert_eq!(crit, f.neumann_count_on_edge(e).unwrap());
            }
        }
    }
}
