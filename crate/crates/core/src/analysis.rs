//! Per-record observables (surpluses, local star domains, local-global
//! identities) and streaming over long stretches of the spectrum.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::domains::{local_global_audit, local_star, spectral_position_sign, Cut, DomainError, LocalGlobalReport};
use crate::eigenfunction::{Eigenfunction, EigenfunctionError, SurplusPair};
use crate::graph::MetricGraph;
use crate::secular::{Classification, EigenvalueRecord, Solver, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Eigenfunction(#[from] EigenfunctionError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Spectral position and wavelength capacity of the star Neumann domain
/// around one interior vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexObservable {
    pub vertex: usize,
    pub spectral_position: i64,
    pub capacity: f64,
    pub arms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordObservables {
    pub index: usize,
    pub k: f64,
    pub multiplicity: usize,
    pub class: Classification,
    /// Present for generic records.
    pub surplus: Option<SurplusPair>,
    /// Present for generic records with `k > π / L_min`, one entry per interior vertex.
    pub stars: Vec<VertexObservable>,
    pub local_global: Option<LocalGlobalReport>,
    /// Kernel vector of a simple record, in the bond basis.
    #[serde(skip)]
    pub kernel: Option<DVector<Complex64>>,
}

impl RecordObservables {
    pub fn is_generic(&self) -> bool {
        self.class == Classification::Generic
    }

    pub fn has_stars(&self) -> bool {
        self.local_global.is_some()
    }

    /// The realized eigenfunction of a simple record.
    pub fn eigenfunction(&self, g: &MetricGraph) -> Option<Result<Eigenfunction, EigenfunctionError>> {
        self.kernel
            .as_ref()
            .map(|a| Eigenfunction::from_kernel(g, self.k, a).realized())
    }
}

pub fn analyze_record(g: &MetricGraph, record: &EigenvalueRecord) -> Result<RecordObservables, AnalysisError> {
    let mut out = RecordObservables {
        index: record.index,
        k: record.k,
        multiplicity: record.multiplicity,
        class: record.class,
        surplus: None,
        stars: Vec::new(),
        local_global: None,
        kernel: record.is_simple().then(|| record.kernel[0].clone()),
    };
    if record.class != Classification::Generic {
        return Ok(out);
    }
    let f = Eigenfunction::from_record(g, record)?;
    let surplus = f.surpluses(record.index)?;
    out.surplus = Some(surplus);
    if record.k > PI / g.min_length() && g.interior_vertices().next().is_some() {
        out.stars = vertex_observables(&f)?;
        out.local_global = Some(local_global_audit(&f, &surplus)?);
    }
    Ok(out)
}

pub fn vertex_observables(f: &Eigenfunction) -> Result<Vec<VertexObservable>, AnalysisError> {
    f.graph()
        .interior_vertices()
        .map(|v| {
            let star = local_star(f, v, Cut::Neumann)?;
            Ok(VertexObservable {
                vertex: v,
                spectral_position: spectral_position_sign(f, v)?,
                capacity: star.rho,
                arms: star.arms,
            })
        })
        .collect()
}

/// Which records a stream should deliver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Every record with index in `1..=n`.
    Records(usize),
    /// Records in index order until `n` generic ones have been seen.
    Generic(usize),
    /// Every eigenvalue in `(0, kmax]`.
    UpTo(f64),
}

/// Windows solved together by [`stream`]. Fixed so that results do not
/// depend on the size of the thread pool.
pub const STREAM_BATCH: usize = 4;

/// Walks the spectrum in fixed windows `(i·s, (i+1)·s]` with `s` covering
/// roughly `chunk` eigenvalues, analysing each record and handing it to
/// `visit` in index order. Each batch of windows is solved on the current
/// rayon pool.
pub fn stream<F>(solver: &Solver, target: Target, chunk: usize, mut visit: F) -> Result<usize, AnalysisError>
where
    F: FnMut(&RecordObservables),
{
    if let Target::Generic(0) | Target::Records(0) = target {
        return Ok(0);
    }
    let g = solver.graph();
    let step = PI * chunk.max(1) as f64 / g.total_length();
    let mut generic = 0;
    let mut delivered = 0;
    let mut first = 0usize;
    loop {
        let bounds: Vec<(f64, f64)> = (first..first + STREAM_BATCH)
            .map(|i| {
                let lo = i as f64 * step;
                let hi = (i + 1) as f64 * step;
                match target {
                    Target::UpTo(kmax) => (lo, hi.min(kmax)),
                    _ => (lo, hi),
                }
            })
            .take_while(|(lo, hi)| hi > lo)
            .collect();
        if bounds.is_empty() {
            return Ok(delivered);
        }
        let batch: Result<Vec<Vec<RecordObservables>>, AnalysisError> = bounds
            .par_iter()
            .map(|&(lo, hi)| {
                solver
                    .window(lo, hi)?
                    .iter()
                    .take_while(|r| !matches!(target, Target::Records(n) if r.index > n))
                    .map(|r| analyze_record(g, r))
                    .collect()
            })
            .collect();
        for obs in batch?.iter().flatten() {
            if let Target::Records(n) = target {
                if obs.index > n {
                    return Ok(delivered);
                }
            }
            visit(obs);
            delivered += 1;
            if let Target::Records(n) = target {
                if obs.index + obs.multiplicity > n {
                    return Ok(delivered);
                }
            }
            if obs.is_generic() {
                generic += 1;
                if target == Target::Generic(generic) {
                    return Ok(delivered);
                }
            }
        }
        if bounds.len() < STREAM_BATCH {
            return Ok(delivered);
        }
        first += STREAM_BATCH;
    }
}

/// Collects observables for a target into memory.
pub fn collect(solver: &Solver, target: Target) -> Result<Vec<RecordObservables>, AnalysisError> {
    let mut out = Vec::new();
    stream(solver, target, 2000, |o| out.push(o.clone()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Family, FamilySpec, LengthSource};
    use crate::secular::Tolerances;

    #[test]
    fn interval_observables() {
        let g = FamilySpec::new(Family::Interval, LengthSource::Explicit { lengths: vec![1.0] })
            .generate()
            .unwrap();
        let obs = collect(&Solver::new(&g, Tolerances::default()), Target::Records(50)).unwrap();
        assert_eq!(obs.len(), 50);
        for (i, o) in obs.iter().enumerate() {
            assert_eq!(o.index, i + 1);
            let s = o.surplus.unwrap();
            assert_eq!((s.sigma, s.omega), (0, -1));
            assert!(o.stars.is_empty());
        }
    }

    #[test]
    fn stream_targets() {
        let g = FamilySpec::new(Family::Stower { loops: 1, tails: 2 }, LengthSource::uniform(3))
            .generate()
            .unwrap();
        let solver = Solver::new(&g, Tolerances::default());
        let mut seen = Vec::new();
        stream(&solver, Target::Generic(100), 17, |o| seen.push(o.clone())).unwrap();
        assert_eq!(seen.iter().filter(|o| o.is_generic()).count(), 100);
        assert!(seen.last().unwrap().is_generic());
        for w in seen.windows(2) {
            assert_eq!(w[1].index, w[0].index + w[0].multiplicity);
        }
        let whole = collect(&solver, Target::Records(seen.last().unwrap().index)).unwrap();
        assert_eq!(whole.len(), seen.len());
        for (a, b) in whole.iter().zip(&seen) {
            assert_eq!((a.index, a.class, a.surplus), (b.index, b.class, b.surplus));
            assert!((a.k - b.k).abs() <= 1e-12 * a.k, "{} {}", a.k, b.k);
        }
        let upto = collect(&solver, Target::UpTo(seen[40].k)).unwrap();
        assert_eq!(upto.last().unwrap().index, seen[40].index);
    }

    #[test]
    fn local_global_on_generic_records() {
        let g = FamilySpec::new(Family::Tree31 { interior: 3 }, LengthSource::uniform(8))
            .generate()
            .unwrap();
        let obs = collect(&Solver::new(&g, Tolerances::default()), Target::Generic(300)).unwrap();
        let with_stars: Vec<_> = obs.iter().filter(|o| o.has_stars()).collect();
        assert!(with_stars.len() > 200);
        for o in with_stars {
            assert!(o.local_global.as_ref().unwrap().holds(1e-8));
            for s in &o.stars {
                let d = g.degree(s.vertex) as i64;
                assert!((1..d).contains(&s.spectral_position));
                assert!(s.capacity > 0.0 && s.capacity < d as f64);
            }
        }
    }
}
