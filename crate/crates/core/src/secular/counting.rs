//! Eigenvalue counting through the winding of the eigenphases of `U(k)`,
//! and the real secular function used for root refinement.
//!
//! The eigenphases of `U(k)` increase with `k` and their sum grows at the
//! constant rate `2|Γ|`. With every phase reduced to `[0, 2π)` the reduced
//! sum drops by `2π` each time a phase passes through `0 (mod 2π)`, which is
//! exactly when `k` is an eigenvalue. That turns a single diagonalization
//! into an exact count of the eigenvalues in `(0, k]`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::scattering::{bond_lengths, build_scattering, secular_unitary};
use super::SolverError;
use crate::graph::MetricGraph;

/// Phases closer than this to the cut at `0 (mod 2π)` make a sample unusable.
pub const CUT_GAP: f64 = 1e-9;
const CAYLEY_LIMIT: f64 = 1e6;
const PIVOT_RATIO: f64 = 1e-6;
const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountSample {
    pub k: f64,
    /// Number of eigenvalues in `(0, k]`, with multiplicity.
    pub count: usize,
    /// Distance of the closest eigenphase to the cut.
    pub cut_gap: f64,
}

/// Precomputed per-graph data for counting and secular-function evaluation.
#[derive(Debug, Clone)]
pub struct SpectralCounter {
    s: DMatrix<f64>,
    bond_lengths: Vec<f64>,
    total_length: f64,
    base_phase_sum: f64,
    /// `exp(-i Σθ(0)/2) (-2i)^{-2E}`, turning `det(I - U)` into a real function.
    zeta_factor: Complex64,
}

impl SpectralCounter {
    pub fn new(g: &MetricGraph) -> Self {
        Self::from_parts(build_scattering(g), &g.lengths())
    }

    pub fn from_parts(s: DMatrix<f64>, lengths: &[f64]) -> Self {
        let bond_lengths = bond_lengths(lengths);
        let total_length = lengths.iter().sum();
        let u0 = s.map(|x| Complex64::new(x, 0.0));
        let base_phase_sum: f64 = cayley_phases(&u0)
            .into_iter()
            .map(|p| if TAU - p < 1e-8 { 0.0 } else { p })
            .sum();
        let edges = lengths.len() as i32;
        let zeta_factor =
            Complex64::from_polar(1.0, -base_phase_sum / 2.0) * Complex64::new(0.0, -2.0).powi(-2 * edges);
        Self {
            s,
            bond_lengths,
            total_length,
            base_phase_sum,
            zeta_factor,
        }
    }

    pub fn scattering(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn bond_lengths(&self) -> &[f64] {
        &self.bond_lengths
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn unitary(&self, k: f64) -> DMatrix<Complex64> {
        secular_unitary(&self.s, &self.bond_lengths, k)
    }

    /// Eigenphases of `U(k)` reduced to `[0, 2π)`, unsorted.
    pub fn eigenphases(&self, k: f64) -> Vec<f64> {
        let u = self.unitary(k);
        cayley_phases(&u)
    }

    /// Counts eigenvalues in `(0, k]`. Fails when a phase sits within
    /// [`CUT_GAP`] of the cut or the winding sum is not an integer.
    pub fn count(&self, k: f64) -> Result<CountSample, SolverError> {
        if k == 0.0 {
            return Ok(CountSample {
                k,
                count: 0,
                cut_gap: f64::INFINITY,
            });
        }
        let phases = self.eigenphases(k);
        let cut_gap = phases.iter().map(|&p| p.min(TAU - p)).fold(f64::INFINITY, f64::min);
        if cut_gap < CUT_GAP {
            return Err(SolverError::PhaseTrackingAmbiguity {
                k,
                detail: format!("eigenphase within {cut_gap:e} of the cut"),
            });
        }
        let sum: f64 = phases.iter().sum();
        let winding = (2.0 * self.total_length * k - sum + self.base_phase_sum) / TAU;
        let rounded = winding.round();
        if (winding - rounded).abs() > INTEGRALITY_TOL || rounded < 0.0 {
            return Err(SolverError::PhaseTrackingAmbiguity {
                k,
                detail: format!("non-integer winding {winding}"),
            });
        }
        Ok(CountSample {
            k,
            count: rounded as usize,
            cut_gap,
        })
    }

    /// Counts at a point near `k`, nudging along `direction` (or both ways
    /// when `direction == 0`) until the sample is unambiguous.
    pub fn count_near(&self, k: f64, scale: f64, direction: i8, max_tries: usize) -> Result<CountSample, SolverError> {
        let mut last = None;
        for attempt in 0..max_tries {
            let step = scale * 1e-7 * (attempt as f64);
            let candidate = match direction {
                d if d > 0 => k + step,
                d if d < 0 => k - step,
                _ if attempt % 2 == 1 => k + step,
                _ => k - step,
            };
            if candidate < 0.0 {
                continue;
            }
            match self.count(candidate) {
                Ok(sample) => return Ok(sample),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or(SolverError::PhaseTrackingAmbiguity {
            k,
            detail: "no admissible sample point".into(),
        }))
    }

    /// Real-valued secular function `ζ(k) = Π_j sin(θ_j(k)/2)` over continuously
    /// continued eigenphases; its zeros are the eigenvalues with multiplicity
    /// and it changes sign at every simple eigenvalue.
    pub fn zeta(&self, k: f64) -> f64 {
        let n = self.bond_lengths.len();
        let m = DMatrix::<Complex64>::identity(n, n) - self.unitary(k);
        let det = m.lu().determinant();
        (self.zeta_factor * Complex64::from_polar(1.0, -self.total_length * k) * det).re
    }
}

/// Eigenphases via the Cayley transform of `e^{-iψ} U`: the Hermitian
/// matrix `H = i (I - V)(I + V)^{-1}` has eigenvalues `tan((θ - ψ)/2)`.
/// The shift `ψ` is chosen so that no eigenvalue of `V` sits near `-1`.
fn cayley_phases(u: &DMatrix<Complex64>) -> Vec<f64> {
    for shift in CAYLEY_SHIFTS {
        if let Some(p) = shifted_cayley_phases(u, shift) {
            return p;
        }
    }
    unreachable!("a 2E x 2E unitary cannot have eigenphases near all of {} shifts", CAYLEY_SHIFTS.len())
}

const CAYLEY_SHIFTS: [f64; 8] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 0.5, 2.5];

fn shifted_cayley_phases(u: &DMatrix<Complex64>, shift: f64) -> Option<Vec<f64>> {
    let n = u.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let v = u * Complex64::from_polar(1.0, -shift);
    let lu = (&id + &v).lu();
    let pivots = lu.u().diagonal().map(|z| z.norm());
    if pivots.min() < PIVOT_RATIO * pivots.max() {
        return None;
    }
    let x = lu.solve(&(&id - &v))?;
    let h = x * Complex64::i();
    if !h.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return None;
    }
    let skew = (&h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let size = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if skew > 1e-8 * size {
        return None;
    }
    let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let values = h.symmetric_eigenvalues();
    if values.iter().any(|t| t.abs() > CAYLEY_LIMIT) {
        return None;
    }
    Some(values.iter().map(|&t| wrap_phase(2.0 * t.atan() + shift)).collect())
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Phase of `z` in `[0, 2π)`.
pub fn phase_of(z: Complex64) -> f64 {
    wrap_phase(z.arg())
}
