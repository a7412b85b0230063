//! Completeness audits for a computed spectrum.

use std::f64::consts::PI;

use serde::Serialize;

use super::counting::SpectralCounter;
use super::solver::EigenvalueRecord;
use crate::graph::MetricGraph;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditViolation {
    /// `k_n` fell below `π (n + 1) / (2|Γ|)`.
    LowerBoundViolation { index: usize, k: f64, bound: f64 },
    /// Record indices are not contiguous from 1.
    IndexGap { expected: usize, found: usize },
    /// The winding count at the last eigenvalue disagrees with the records.
    WindingMismatch { winding: usize, records: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub checked: usize,
    pub violations: Vec<AuditViolation>,
    /// Indices where `|n - |Γ| k_n / π|` exceeded `E + |∂Γ|`.
    pub weyl_alarms: Vec<usize>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits records that start at index 1.
pub fn friedlander_check(records: &[EigenvalueRecord], g: &MetricGraph) -> AuditReport {
    let total = g.total_length();
    let weyl_bound = (g.edge_count() + g.boundary_size()) as f64;
    let mut violations = Vec::new();
    let mut weyl_alarms = Vec::new();
    let mut expected = 1;
    let mut checked = 0;
    for r in records {
        if r.index != expected {
            violations.push(AuditViolation::IndexGap {
                expected,
                found: r.index,
            });
        }
        for n in r.indices() {
            checked += 1;
            let bound = PI * (n as f64 + 1.0) / (2.0 * total);
            if r.k < bound * (1.0 - 1e-12) {
                violations.push(AuditViolation::LowerBoundViolation { index: n, k: r.k, bound });
            }
            if (n as f64 - total * r.k / PI).abs() > weyl_bound {
                weyl_alarms.push(n);
            }
        }
        expected = r.index + r.multiplicity;
    }
    if let Some(last) = records.last() {
        let counter = SpectralCounter::new(g);
        let winding = counter
            .count_near(last.k * (1.0 + 1e-9), last.k * 1e-2, 1, 24)
            .map(|s| s.count)
            .unwrap_or(usize::MAX);
        let listed: usize = records.iter().map(|r| r.multiplicity).sum();
        let through_last = last.index + last.multiplicity - 1;
        if winding != through_last || winding != listed {
            violations.push(AuditViolation::WindingMismatch {
                winding,
                records: listed,
            });
        }
    }
    AuditReport {
        checked,
        violations,
        weyl_alarms,
    }
}
