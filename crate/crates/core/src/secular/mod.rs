//! Secular engine: scattering matrix, eigenvalue counting, root isolation,
//! kernel vectors, classification and completeness audits.

pub mod audit;
pub mod counting;
pub mod linalg;
pub mod scattering;
pub mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{friedlander_check, AuditReport};
pub use counting::{CountSample, SpectralCounter};
pub use scattering::{build_scattering, secular_unitary};
pub use solver::{find_eigenvalues, first_eigenvalues, EigenvalueRecord, Solver};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("phase tracking ambiguity near k = {k}: {detail}")]
    PhaseTrackingAmbiguity { k: f64, detail: String },
    #[error("invalid window ({lo}, {hi}]")]
    InvalidWindow { lo: f64, hi: f64 },
    #[error("kernel computation failed at k = {k}: {detail}")]
    Kernel { k: f64, detail: String },
}

/// Numerical thresholds shared by the engine, the eigenfunction layer and
/// the torus layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Singular values below this count towards the kernel.
    pub ker: f64,
    /// Target relative accuracy of eigenvalues.
    pub k_rel: f64,
    /// Relative tolerance for `k l ∈ 2πℕ` on loops.
    pub loop_rel: f64,
    /// Relative genericity threshold for vertex values and derivatives.
    pub generic: f64,
    /// Grid step as a fraction of `π / L_max`.
    pub grid_factor: f64,
    /// Grid halvings attempted before giving up.
    pub max_retries: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ker: 1e-9,
            k_rel: 1e-10,
            loop_rel: 1e-8,
            generic: 1e-8,
            grid_factor: 0.5,
            max_retries: 4,
        }
    }
}

impl Tolerances {
    /// Overrides a field by name; returns `false` for an unknown name.
    pub fn set(&mut self, name: &str, value: f64) -> bool {
        match name {
            "ker" => self.ker = value,
            "k_rel" => self.k_rel = value,
            "loop" | "loop_rel" => self.loop_rel = value,
            "generic" => self.generic = value,
            "grid" | "grid_factor" => self.grid_factor = value,
            "max_retries" => self.max_retries = value as usize,
            _ => return false,
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Generic,
    Loop,
    NonGenericSimple,
    Multiple,
    /// Within one decade of a genericity threshold; excluded from statistics.
    Borderline,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Generic => "generic",
            Classification::Loop => "loop",
            Classification::NonGenericSimple => "non_generic_simple",
            Classification::Multiple => "multiple",
            Classification::Borderline => "borderline",
        }
    }
}
