//! Eigenvalue search on a window `(k_lo, k_hi]`.
//!
//! The window is covered by a grid whose step keeps every eigenphase from
//! advancing more than `π` per cell. Exact counts at grid points say how many
//! eigenvalues each cell holds; the real secular function then separates
//! and refines them. Cells whose roots cannot be separated by sign changes
//! are bisected by counts, and a cluster that survives down to a relative
//! width of `1e-8` is reported as one eigenvalue of the cluster's multiplicity.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::counting::{CountSample, SpectralCounter};
use super::linalg::{null_basis, singular_values};
use super::{Classification, SolverError, Tolerances};
use crate::eigenfunction;
use crate::graph::MetricGraph;

const MULTIPLE_WIDTH: f64 = 1e-8;
const NUDGE_TRIES: usize = 24;
const BRENT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvalueRecord {
    /// Index of the first copy; the constant state at `k = 0` is index 0.
    pub index: usize,
    pub k: f64,
    pub multiplicity: usize,
    pub class: Classification,
    /// One kernel vector per copy, in the bond basis.
    #[serde(skip)]
    pub kernel: Vec<DVector<Complex64>>,
    /// `‖(I - U(k)) a‖ / ‖a‖`, worst over the kernel vectors.
    pub residual: f64,
}

impl EigenvalueRecord {
    pub fn is_simple(&self) -> bool {
        self.multiplicity == 1
    }

    /// Indices occupied by this record.
    pub fn indices(&self) -> std::ops::Range<usize> {
        self.index..self.index + self.multiplicity
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Root {
    k: f64,
    multiplicity: usize,
}

/// Reusable per-graph solver.
#[derive(Debug, Clone)]
pub struct Solver {
    graph: MetricGraph,
    counter: SpectralCounter,
    tol: Tolerances,
}

impl Solver {
    pub fn new(graph: &MetricGraph, tol: Tolerances) -> Self {
        Self {
            counter: SpectralCounter::new(graph),
            graph: graph.clone(),
            tol,
        }
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn counter(&self) -> &SpectralCounter {
        &self.counter
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Number of eigenvalues in `(0, k]`, with multiplicity.
    pub fn count(&self, k: f64) -> Result<usize, SolverError> {
        self.counter.count(k).map(|s| s.count)
    }

    /// Number of eigenvalues in `(0, k)`, with multiplicity.
    pub fn count_below(&self, k: f64) -> Result<usize, SolverError> {
        let step = self.grid_step(self.tol.grid_factor);
        let sample = self.counter.count_near(k * (1.0 - 1e-9), step, -1, NUDGE_TRIES)?;
        Ok(sample.count)
    }

    fn grid_step(&self, factor: f64) -> f64 {
        factor * PI / self.graph.max_length()
    }

    /// All eigenvalues in `(lo, hi]`, retrying on a finer grid when the
    /// phase bookkeeping becomes ambiguous.
    pub fn window(&self, lo: f64, hi: f64) -> Result<Vec<EigenvalueRecord>, SolverError> {
        let mut factor = self.tol.grid_factor;
        let mut attempt = 0;
        loop {
            match self.window_with_grid(lo, hi, factor) {
                Ok(records) => return Ok(records),
                Err(SolverError::PhaseTrackingAmbiguity { .. }) if attempt < self.tol.max_retries => {
                    factor /= 2.0;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Same as [`Solver::window`], with the window split into `pieces`
    /// sub-windows solved in parallel.
    pub fn window_parallel(&self, lo: f64, hi: f64, pieces: usize) -> Result<Vec<EigenvalueRecord>, SolverError> {
        let pieces = pieces.max(1);
        let bounds: Vec<(f64, f64)> = (0..pieces)
            .map(|i| {
                let a = lo + (hi - lo) * i as f64 / pieces as f64;
                let b = if i + 1 == pieces {
                    hi
                } else {
                    lo + (hi - lo) * (i + 1) as f64 / pieces as f64
                };
                (a, b)
            })
            .collect();
        let parts: Result<Vec<Vec<EigenvalueRecord>>, SolverError> =
            bounds.par_iter().map(|&(a, b)| self.window(a, b)).collect();
        Ok(parts?.into_iter().flatten().collect())
    }

    /// The grid used by [`Solver::window`] at a given step factor, exposed
    /// so that callers can rerun a window on a refined grid.
    pub fn window_with_grid(&self, lo: f64, hi: f64, grid_factor: f64) -> Result<Vec<EigenvalueRecord>, SolverError> {
        if !(lo >= 0.0 && hi > lo) {
            return Err(SolverError::InvalidWindow { lo, hi });
        }
        let step = self.grid_step(grid_factor);
        let cells = ((hi - lo) / step).ceil().max(1.0) as usize;
        let mut samples = Vec::with_capacity(cells + 1);
        samples.push(if lo == 0.0 {
            self.counter.count(0.0)?
        } else {
            self.counter.count_near(lo, step, -1, NUDGE_TRIES)?
        });
        for i in 1..cells {
            let k = lo + (hi - lo) * i as f64 / cells as f64;
            samples.push(self.counter.count_near(k, step, 0, NUDGE_TRIES)?);
        }
        samples.push(self.counter.count_near(hi, step, 1, NUDGE_TRIES)?);

        let mut roots = Vec::new();
        let mut zeta_left = self.counter.zeta(samples[0].k);
        for pair in samples.windows(2) {
            let zeta_right = self.counter.zeta(pair[1].k);
            let before = roots.len();
            self.isolate(pair[0], pair[1], zeta_left, zeta_right, &mut roots)?;
            let found: usize = roots[before..].iter().map(|r: &Root| r.multiplicity).sum();
            debug_assert_eq!(found, pair[1].count - pair[0].count);
            zeta_left = zeta_right;
        }

        let mut index = samples[0].count + 1;
        let mut records = Vec::new();
        for root in roots {
            let first = index;
            index += root.multiplicity;
            if root.k <= lo || root.k > hi {
                continue;
            }
            records.push(self.record(first, root)?);
        }
        Ok(records)
    }

    fn isolate(
        &self,
        a: CountSample,
        b: CountSample,
        za: f64,
        zb: f64,
        out: &mut Vec<Root>,
    ) -> Result<(), SolverError> {
        if b.count < a.count {
            return Err(SolverError::PhaseTrackingAmbiguity {
                k: b.k,
                detail: format!("count decreased from {} to {}", a.count, b.count),
            });
        }
        let c = b.count - a.count;
        if c == 0 {
            return Ok(());
        }
        let width = b.k - a.k;
        if c == 1 && za * zb < 0.0 {
            out.push(Root {
                k: self.refine(a.k, b.k, za, zb),
                multiplicity: 1,
            });
            return Ok(());
        }
        if width <= MULTIPLE_WIDTH * b.k.max(1.0) {
            out.push(Root {
                k: self.cluster_center(a.k, b.k, c),
                multiplicity: c,
            });
            return Ok(());
        }

        let m = 2 * c + 2;
        let mut xs = Vec::with_capacity(m + 2);
        let mut zs = Vec::with_capacity(m + 2);
        xs.push(a.k);
        zs.push(za);
        for i in 1..=m {
            let x = a.k + width * i as f64 / (m + 1) as f64;
            xs.push(x);
            zs.push(self.counter.zeta(x));
        }
        xs.push(b.k);
        zs.push(zb);
        let changes: Vec<usize> = (0..xs.len() - 1).filter(|&i| zs[i] * zs[i + 1] < 0.0).collect();
        if changes.len() == c {
            for i in changes {
                out.push(Root {
                    k: self.refine(xs[i], xs[i + 1], zs[i], zs[i + 1]),
                    multiplicity: 1,
                });
            }
            return Ok(());
        }

        let mid = self.counter.count_near(0.5 * (a.k + b.k), width, 0, NUDGE_TRIES)?;
        if mid.k <= a.k || mid.k >= b.k {
            return Err(SolverError::PhaseTrackingAmbiguity {
                k: mid.k,
                detail: "bisection point left its bracket".into(),
            });
        }
        let zm = self.counter.zeta(mid.k);
        self.isolate(a, mid, za, zm, out)?;
        self.isolate(mid, b, zm, zb, out)
    }

    /// Brent's method on the secular function, bracketed by a sign change.
    fn refine(&self, a: f64, b: f64, fa: f64, fb: f64) -> f64 {
        let xtol = 1e-3 * self.tol.k_rel * b;
        brent(|k| self.counter.zeta(k), a, b, fa, fb, xtol)
    }

    /// Location of a cluster of `c` eigenvalues inside a narrow bracket,
    /// interpolating the phases that cross the cut linearly across it.
    fn cluster_center(&self, a: f64, b: f64, c: usize) -> f64 {
        let mut pa = self.counter.eigenphases(a);
        let mut pb = self.counter.eigenphases(b);
        pa.sort_by(f64::total_cmp);
        pb.sort_by(f64::total_cmp);
        let width = b - a;
        let mut sum = 0.0;
        for j in 0..c {
            let before = TAU - pa[pa.len() - 1 - j];
            let after = pb[j];
            let denom = before + after;
            let t = if denom > 0.0 { before / denom } else { 0.5 };
            sum += a + width * t.clamp(0.0, 1.0);
        }
        sum / c as f64
    }

    fn record(&self, index: usize, root: Root) -> Result<EigenvalueRecord, SolverError> {
        let n = self.counter.bond_lengths().len();
        let m = DMatrix::<Complex64>::identity(n, n) - self.counter.unitary(root.k);
        let kernel = if root.multiplicity == 1 {
            vec![simple_kernel(&m).ok_or_else(|| SolverError::Kernel {
                k: root.k,
                detail: "singular value decomposition did not converge".into(),
            })?]
        } else {
            null_basis(&m, root.multiplicity).ok_or_else(|| SolverError::Kernel {
                k: root.k,
                detail: "singular value decomposition did not converge".into(),
            })?
        };
        let residual = kernel
            .iter()
            .map(|a| (&m * a).norm() / a.norm())
            .fold(0.0, f64::max);
        let class = if root.multiplicity > 1 {
            Classification::Multiple
        } else {
            eigenfunction::classify(&self.graph, root.k, &kernel[0], &self.tol)
        };
        Ok(EigenvalueRecord {
            index,
            k: root.k,
            multiplicity: root.multiplicity,
            class,
            kernel,
            residual,
        })
    }

    /// Singular values of `I - U(k)` below the kernel tolerance.
    pub fn nullity(&self, k: f64) -> usize {
        let n = self.counter.bond_lengths().len();
        let m = DMatrix::<Complex64>::identity(n, n) - self.counter.unitary(k);
        singular_values(&m).iter().filter(|&&s| s < self.tol.ker).count()
    }

    /// Upper end of a window holding at least `count` positive eigenvalues.
    pub fn k_for_count(&self, count: usize) -> Result<f64, SolverError> {
        let g = &self.graph;
        let slack = (g.edge_count() + g.boundary_size() + 1) as f64;
        let mut k = PI * (count as f64 + slack) / g.total_length();
        let step = self.grid_step(self.tol.grid_factor);
        loop {
            let sample = self.counter.count_near(k, step, 1, NUDGE_TRIES)?;
            if sample.count >= count {
                return Ok(sample.k);
            }
            k *= 1.1;
        }
    }

    /// Records covering indices `1..=count`.
    pub fn first(&self, count: usize) -> Result<Vec<EigenvalueRecord>, SolverError> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let hi = self.k_for_count(count)?;
        let mut records = self.window(0.0, hi)?;
        records.retain(|r| r.index <= count);
        Ok(records)
    }
}

/// Convenience wrapper: all eigenvalues of `g` in `(lo, hi]` with default tolerances.
pub fn find_eigenvalues(g: &MetricGraph, lo: f64, hi: f64) -> Result<Vec<EigenvalueRecord>, SolverError> {
    Solver::new(g, Tolerances::default()).window(lo, hi)
}

/// Convenience wrapper: records covering indices `1..=count`.
pub fn first_eigenvalues(g: &MetricGraph, count: usize) -> Result<Vec<EigenvalueRecord>, SolverError> {
    Solver::new(g, Tolerances::default()).first(count)
}

/// Kernel vector of a matrix with a one-dimensional near-null space, by
/// inverse iteration with a fallback to the singular value decomposition.
fn simple_kernel(m: &DMatrix<Complex64>) -> Option<DVector<Complex64>> {
    let n = m.nrows();
    let lu = m.clone().lu();
    let mut x = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.37 * i as f64, 0.11 * i as f64));
    x /= Complex64::new(x.norm(), 0.0);
    for _ in 0..3 {
        match lu.solve(&x) {
            Some(y) if y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && y.norm() > 0.0 => {
                let norm = y.norm();
                x = y / Complex64::new(norm, 0.0);
            }
            _ => return null_basis(m, 1).map(|mut v| v.remove(0)),
        }
    }
    Some(x)
}

/// Brent's root finder (the classical `zeroin` recurrence) on a bracket
/// with `fa * fb < 0`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64) -> f64 {
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..BRENT_MAX_ITER {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Family, FamilySpec, LengthSource};

    fn explicit(family: Family, lengths: &[f64]) -> MetricGraph {
        FamilySpec::new(
            family,
            LengthSource::Explicit {
                lengths: lengths.to_vec(),
            },
        )
        .generate()
        .unwrap()
    }

    #[test]
    fn brent_finds_cosine_root() {
        let r = brent(f64::cos, 1.0, 2.0, 1f64.cos(), 2f64.cos(), 1e-15);
        assert!((r - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn interval_spectrum() {
        let g = explicit(Family::Interval, &[1.0]);
        let records = first_eigenvalues(&g, 100).unwrap();
        assert_eq!(records.len(), 100);
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.index, i + 1);
            assert_eq!(r.multiplicity, 1);
            assert!((r.k / (PI * (i + 1) as f64) - 1.0).abs() < 1e-10);
            assert!(r.residual < 1e-9);
        }
    }

    #[test]
    fn equilateral_star_degeneracy() {
        let g = explicit(Family::Star { tails: 3 }, &[1.0, 1.0, 1.0]);
        let records = find_eigenvalues(&g, 0.0, 3.5).unwrap();
        assert_eq!(records.len(), 2);
        assert!((records[0].k - PI / 2.0).abs() < 1e-9);
        assert_eq!(records[0].multiplicity, 2);
        assert_eq!(records[0].class, Classification::Multiple);
        assert_eq!(records[0].index, 1);
        assert!((records[1].k - PI).abs() < 1e-9);
        assert_eq!(records[1].multiplicity, 1);
        assert_eq!(records[1].index, 3);
        let solver = Solver::new(&g, Tolerances::default());
        assert_eq!(solver.nullity(records[0].k), 2);
        assert_eq!(solver.nullity(records[1].k), 1);
    }

    #[test]
    fn window_split_matches_whole() {
        let g = FamilySpec::new(Family::Mandarin { edges: 4 }, LengthSource::uniform(3))
            .generate()
            .unwrap();
        let solver = Solver::new(&g, Tolerances::default());
        let whole = solver.window(0.0, 40.0).unwrap();
        let split = solver.window_parallel(0.0, 40.0, 7).unwrap();
        assert_eq!(whole.len(), split.len());
        for (a, b) in whole.iter().zip(&split) {
            assert_eq!(a.index, b.index);
            assert!((a.k - b.k).abs() <= 1e-12 * a.k);
        }
    }

    #[test]
    fn invalid_window() {
        let g = explicit(Family::Interval, &[1.0]);
        assert!(matches!(
            find_eigenvalues(&g, 2.0, 1.0),
            Err(SolverError::InvalidWindow { .. })
        ));
    }
}
