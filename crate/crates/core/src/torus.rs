//! The characteristic torus: flow points `κ = [k l]`, canonical
//! eigenfunctions of `Γ_κ` built from the adjugate of `I - e^{iκ}S`, the
//! real products `p` and `q`, and the observables they determine.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::eigenfunction::{classify, sgn, Eigenfunction, EigenfunctionError};
use crate::graph::{GraphError, MetricGraph};
use crate::secular::linalg::{null_basis, singular_values};
use crate::secular::{build_scattering, secular_unitary, Classification, SolverError, SpectralCounter, Tolerances};

/// Largest smallest-singular-value accepted as a kernel of `I - e^{iκ}S`.
const KERNEL_TOL: f64 = 1e-7;
/// Smallest second singular value accepted for a one-dimensional kernel.
const GAP_TOL: f64 = 1e-4;
/// Relative offset around `k = 1` used to read off the index of `Γ_κ`.
const INDEX_OFFSET: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TorusError {
    #[error("point is not on the regular secular manifold (singular values {smallest:e}, {second:e})")]
    NotOnSigmaReg { smallest: f64, second: f64 },
    #[error("point is not on the generic secular manifold ({0:?})")]
    NotGeneric(Classification),
    #[error("eigenvalue 1 of the torus graph could not be indexed")]
    IndexAmbiguity,
    #[error(transparent)]
    Eigenfunction(#[from] EigenfunctionError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A point of `𝕋^E` with coordinates in `(0, 2π]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusPoint(pub Vec<f64>);

impl TorusPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Residues below this are taken as `2π`, keeping torus edge lengths
/// away from zero.
const WRAP_TOL: f64 = 1e-9;

/// Reduces `x` modulo `2π` into `(0, 2π]`.
pub fn torus_mod(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r < WRAP_TOL {
        TAU
    } else {
        r
    }
}

/// `[k l]`.
pub fn flow_point(k: f64, lengths: &[f64]) -> TorusPoint {
    TorusPoint(lengths.iter().map(|&l| torus_mod(k * l)).collect())
}

/// `[-κ]`.
pub fn inversion(kappa: &TorusPoint) -> TorusPoint {
    TorusPoint(kappa.0.iter().map(|&x| torus_mod(TAU - x)).collect())
}

/// `arctan*`: the inverse tangent with values in `(0, π/2) ∪ (π/2, π)`.
pub fn arctan_star(x: f64) -> f64 {
    if x > 0.0 {
        x.atan()
    } else {
        PI + x.atan()
    }
}

/// Column `j` of the adjugate, `adj[i][j] = (-1)^{i+j} det M_{(j,i)}`, from
/// the minors with row `j` and column `i` removed.
pub fn adjugate_column(m: &DMatrix<Complex64>, j: usize) -> DVector<Complex64> {
    let n = m.nrows();
    DVector::from_fn(n, |i, _| {
        let minor = m.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        minor.lu().determinant() * sign
    })
}

/// Rank-one form `adj(M) = γ v v*` of a normal matrix with a one-dimensional
/// kernel spanned by the unit vector `v`, using `γ = det(M + v v*)`.
pub fn rank_one_adjugate(m: &DMatrix<Complex64>, v: &DVector<Complex64>) -> Complex64 {
    (m + v * v.adjoint()).lu().determinant()
}

/// Kernel vector `a` of `I - e^{iκ}S`, normalized through the adjugate, with
/// the vertex products `p` and the self-derivative products `q`.
#[derive(Debug, Clone)]
pub struct CanonicalData {
    pub kappa: TorusPoint,
    pub a: DVector<Complex64>,
    /// Unit factor `λ` with `adj(I - e^{iκ}S) = λ a a*`.
    pub adjugate_phase: Complex64,
    /// `‖adj e_j - λ a conj(a_j)‖ / (‖a‖ |a_j|)` for the largest entry `a_j`,
    /// with the adjugate column taken from cofactors.
    pub adjugate_residual: f64,
    /// Smallest and second smallest singular values of `I - e^{iκ}S`.
    pub singular_gap: (f64, f64),
    /// `p_{u,v} = Re f_κ(u) conj(f_κ(v))`.
    pub p: DMatrix<f64>,
    /// `q_{v,v,e}` for every vertex and every end at it, in `MetricGraph::ends` order.
    pub q: Vec<Vec<f64>>,
    /// Largest imaginary part dropped from any `p` or `q`, relative to the largest entry.
    pub imaginary_defect: f64,
    pub class: Classification,
    eigenfunction: Eigenfunction,
}

impl CanonicalData {
    pub fn is_generic(&self) -> bool {
        self.class == Classification::Generic
    }

    /// The canonical eigenfunction `f_κ` of `Γ_κ` at `k = 1`.
    pub fn eigenfunction(&self) -> &Eigenfunction {
        &self.eigenfunction
    }
}

/// `Γ_κ`: the graph with the torus coordinates as edge lengths.
pub fn torus_graph(g: &MetricGraph, kappa: &TorusPoint) -> Result<MetricGraph, GraphError> {
    g.with_lengths(kappa.coords())
}

pub fn canonical_data(kappa: &TorusPoint, g: &MetricGraph, tol: &Tolerances) -> Result<CanonicalData, TorusError> {
    let s = build_scattering(g);
    let n = s.nrows();
    let bond_kappa: Vec<f64> = kappa.coords().iter().flat_map(|&x| [x, x]).collect();
    let m = DMatrix::<Complex64>::identity(n, n) - secular_unitary(&s, &bond_kappa, 1.0);

    let sv = singular_values(&m);
    let (smallest, second) = (sv[0], sv[1]);
    if smallest > KERNEL_TOL * n as f64 || second < GAP_TOL {
        return Err(TorusError::NotOnSigmaReg { smallest, second });
    }

    let v = null_basis(&m, 1)
        .and_then(|mut b| b.pop())
        .ok_or(TorusError::NotOnSigmaReg { smallest, second })?;
    let gamma = rank_one_adjugate(&m, &v);
    let adjugate_phase = gamma / gamma.norm();
    let j = v.icamax();
    // fix the free unit factor so that a_j is real and positive
    let unit = v[j].conj() / v[j].norm();
    let a: DVector<Complex64> = &v * (unit * gamma.norm().sqrt());
    let column = adjugate_column(&m, j);
    let expected = &a * (a[j].conj() * adjugate_phase);
    let adjugate_residual = (column - expected).norm() / (a.norm() * a[j].norm());

    let gk = torus_graph(g, kappa)?;
    let class = classify(&gk, 1.0, &a, tol);
    let f = Eigenfunction::from_kernel(&gk, 1.0, &a);

    let values: Vec<Complex64> = (0..gk.vertex_count()).map(|v| f.vertex_value(v)).collect();
    let mut imaginary: f64 = 0.0;
    let mut largest: f64 = 0.0;
    let p = DMatrix::from_fn(values.len(), values.len(), |u, v| {
        let z = values[u] * values[v].conj();
        imaginary = imaginary.max(z.im.abs());
        largest = largest.max(z.norm());
        z.re
    });
    let q = (0..gk.vertex_count())
        .map(|v| {
            gk.ends(v)
                .iter()
                .map(|&end| {
                    let z = f.end_value(end) * f.outgoing_derivative(end).conj();
                    imaginary = imaginary.max(z.im.abs());
                    largest = largest.max(z.norm());
                    z.re
                })
                .collect()
        })
        .collect();

    Ok(CanonicalData {
        kappa: kappa.clone(),
        a,
        adjugate_phase,
        adjugate_residual,
        singular_gap: (smallest, second),
        p,
        q,
        imaginary_defect: if largest > 0.0 { imaginary / largest } else { 0.0 },
        class,
        eigenfunction: f,
    })
}

/// Observables on `Σ^gen`: `𝛔`, `𝛚`, and `𝐍^(v)`, `𝛒^(v)` per interior vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusObservables {
    pub kappa: TorusPoint,
    /// Position of the eigenvalue `1` in the spectrum of `Γ_κ`.
    pub index: usize,
    pub phi: usize,
    pub xi: usize,
    pub sigma: i64,
    pub omega: i64,
    pub interior: Vec<usize>,
    pub spectral_position: Vec<i64>,
    pub capacity: Vec<f64>,
}

impl TorusObservables {
    pub fn spectral_position_at(&self, v: usize) -> Option<i64> {
        self.interior.iter().position(|&u| u == v).map(|i| self.spectral_position[i])
    }

    pub fn capacity_at(&self, v: usize) -> Option<f64> {
        self.interior.iter().position(|&u| u == v).map(|i| self.capacity[i])
    }
}

/// `𝐍^(v) = deg(v)/2 - ½ Σ_e sgn q_{v,v,e}`.
pub fn torus_spectral_position(data: &CanonicalData, v: usize) -> i64 {
    let sum: i64 = data.q[v].iter().map(|&q| sgn(q)).sum();
    (data.q[v].len() as i64 - sum) / 2
}

/// `𝛒^(v) = (1/π) Σ_e arctan*(q_{v,v,e} / p_{v,v})`.
pub fn torus_capacity(data: &CanonicalData, v: usize) -> f64 {
    let p = data.p[(v, v)];
    data.q[v].iter().map(|&q| arctan_star(q / p)).sum::<f64>() / PI
}

/// Index of the simple eigenvalue `1` of `Γ_κ`, checked on both sides.
fn torus_index(gk: &MetricGraph, tol: &Tolerances) -> Result<usize, TorusError> {
    let counter = SpectralCounter::new(gk);
    let scale = tol.grid_factor * PI / gk.max_length();
    let below = counter.count_near(1.0 - INDEX_OFFSET, scale, -1, 8)?;
    let above = counter.count_near(1.0 + INDEX_OFFSET, scale, 1, 8)?;
    if above.count != below.count + 1 {
        return Err(TorusError::IndexAmbiguity);
    }
    Ok(below.count + 1)
}

pub fn observables_at(kappa: &TorusPoint, g: &MetricGraph, tol: &Tolerances) -> Result<TorusObservables, TorusError> {
    let data = canonical_data(kappa, g, tol)?;
    observables_from(&data, g, tol)
}

pub fn observables_from(data: &CanonicalData, g: &MetricGraph, tol: &Tolerances) -> Result<TorusObservables, TorusError> {
    if !data.is_generic() {
        return Err(TorusError::NotGeneric(data.class));
    }
    let gk = torus_graph(g, &data.kappa)?;
    let index = torus_index(&gk, tol)?;
    let f = data.eigenfunction().realized()?;
    let (phi, xi) = f.counts()?;
    let interior: Vec<usize> = g.interior_vertices().collect();
    let spectral_position = interior.iter().map(|&v| torus_spectral_position(data, v)).collect();
    let capacity = interior.iter().map(|&v| torus_capacity(data, v)).collect();
    Ok(TorusObservables {
        kappa: data.kappa.clone(),
        index,
        phi,
        xi,
        sigma: phi as i64 - index as i64,
        omega: xi as i64 - index as i64,
        interior,
        spectral_position,
        capacity,
    })
}

/// Residuals of the inversion relations between `κ` and `[-κ]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InversionAudit {
    /// `max |p∘I - p|`, relative to `max |p|`.
    pub p_defect: f64,
    /// `max |q∘I + q|`, relative to the larger of `max |q|` and `max |p|`.
    pub q_defect: f64,
    /// `max |𝛒∘I - (deg v - 𝛒)|`.
    pub capacity_defect: f64,
    pub omega_holds: bool,
    pub spectral_position_holds: bool,
}

impl InversionAudit {
    pub fn holds(&self, tol: f64) -> bool {
        self.p_defect <= tol
            && self.q_defect <= tol
            && self.capacity_defect <= tol
            && self.omega_holds
            && self.spectral_position_holds
    }
}

pub fn inversion_audit(kappa: &TorusPoint, g: &MetricGraph, tol: &Tolerances) -> Result<InversionAudit, TorusError> {
    let here = canonical_data(kappa, g, tol)?;
    let there = canonical_data(&inversion(kappa), g, tol)?;
    let obs_here = observables_from(&here, g, tol)?;
    let obs_there = observables_from(&there, g, tol)?;

    let p_scale = here.p.amax().max(f64::MIN_POSITIVE);
    let p_defect = (&there.p - &here.p).amax() / p_scale;
    let mut q_scale: f64 = p_scale;
    let mut q_gap: f64 = 0.0;
    for (qa, qb) in here.q.iter().zip(&there.q) {
        for (&x, &y) in qa.iter().zip(qb) {
            q_scale = q_scale.max(x.abs());
            q_gap = q_gap.max((x + y).abs());
        }
    }

    let mut capacity_defect: f64 = 0.0;
    let mut spectral_position_holds = true;
    for (i, &v) in obs_here.interior.iter().enumerate() {
        let d = g.degree(v);
        capacity_defect = capacity_defect.max((obs_there.capacity[i] - (d as f64 - obs_here.capacity[i])).abs());
        spectral_position_holds &= obs_there.spectral_position[i] == d as i64 - obs_here.spectral_position[i];
    }
    let omega_target = g.betti() as i64 - g.boundary_size() as i64 - obs_here.omega;
    Ok(InversionAudit {
        p_defect,
        q_defect: q_gap / q_scale,
        capacity_defect,
        omega_holds: obs_there.omega == omega_target,
        spectral_position_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Family, FamilySpec, LengthSource};
    use crate::secular::Solver;

    fn star() -> MetricGraph {
        FamilySpec::new(Family::Star { tails: 3 }, LengthSource::uniform(11))
            .generate()
            .unwrap()
    }

    #[test]
    fn torus_coordinates() {
        assert_eq!(torus_mod(TAU), TAU);
        assert_eq!(torus_mod(0.0), TAU);
        assert_eq!(torus_mod(4.0 * PI + 1e-13), TAU);
        assert!((torus_mod(PI) - PI).abs() < 1e-15);
        assert!((torus_mod(-1.0) - (TAU - 1.0)).abs() < 1e-15);
        let p = flow_point(2.0, &[PI, 0.25]);
        assert_eq!(p.coords()[0], TAU);
        assert!((p.coords()[1] - 0.5).abs() < 1e-15);
        let q = TorusPoint(vec![0.3, TAU, 4.0]);
        let back = inversion(&inversion(&q));
        assert!(back.coords().iter().zip(q.coords()).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(inversion(&q).coords()[1], TAU);
    }

    #[test]
    fn arctan_branch() {
        assert!((arctan_star(1.0) - PI / 4.0).abs() < 1e-15);
        assert!((arctan_star(-1.0) - 3.0 * PI / 4.0).abs() < 1e-15);
        assert!(arctan_star(1e12) < PI / 2.0);
        assert!(arctan_star(-1e12) > PI / 2.0);
    }

    #[test]
    fn adjugate_column_of_invertible_matrix() {
        let m = DMatrix::from_fn(4, 4, |r, c| {
            Complex64::new((r * 3 + c) as f64 * 0.1 + if r == c { 1.0 } else { 0.0 }, (r as f64 - c as f64) * 0.2)
        });
        let expected = m.clone().try_inverse().unwrap() * m.clone().lu().determinant();
        for j in 0..4 {
            assert!((adjugate_column(&m, j) - expected.column(j)).norm() < 1e-12);
        }
    }

    #[test]
    fn canonical_data_at_flow_points() {
        let g = star();
        let solver = Solver::new(&g, Tolerances::default());
        let tol = Tolerances::default();
        for r in solver.first(40).unwrap().iter().filter(|r| r.class == Classification::Generic) {
            let data = canonical_data(&flow_point(r.k, &g.lengths()), &g, &tol).unwrap();
            assert!(data.adjugate_residual < 1e-8, "residual {}", data.adjugate_residual);
            assert!(data.imaginary_defect < 1e-9);
            for v in 0..g.vertex_count() {
                assert!(data.p[(v, v)] > 0.0);
            }
            let obs = observables_from(&data, &g, &tol).unwrap();
            let f = Eigenfunction::from_record(&g, r).unwrap();
            let s = f.surpluses(r.index).unwrap();
            assert_eq!(obs.omega, s.omega, "k = {}", r.k);
            assert_eq!(obs.sigma, s.sigma);
        }
    }

    #[test]
    fn inversion_relations() {
        let g = FamilySpec::new(Family::Stower { loops: 1, tails: 2 }, LengthSource::uniform(4))
            .generate()
            .unwrap();
        let tol = Tolerances::default();
        let solver = Solver::new(&g, tol.clone());
        let mut checked = 0;
        for r in solver.first(60).unwrap().iter().filter(|r| r.class == Classification::Generic) {
            let audit = inversion_audit(&flow_point(r.k, &g.lengths()), &g, &tol).unwrap();
            assert!(audit.holds(1e-8), "{audit:?}");
            checked += 1;
        }
        assert!(checked > 20);
    }

    #[test]
    fn off_manifold_point_rejected() {
        let g = star();
        let err = canonical_data(&TorusPoint(vec![0.4, 0.9, 1.7]), &g, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, TorusError::NotOnSigmaReg { .. }));
    }
}
