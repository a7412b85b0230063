//! Spectral computations on quantum graphs with Neumann (Kirchhoff)
//! vertex conditions: eigenvalues and eigenfunctions, Neumann and nodal
//! domains, torus observables, closed-form families and surplus statistics.

pub mod analysis;
pub mod closed_form;
pub mod domains;
pub mod eigenfunction;
pub mod export;
pub mod family;
pub mod graph;
pub mod secular;
pub mod stats;
pub mod suite;
pub mod torus;

pub use eigenfunction::{Eigenfunction, EigenfunctionError, SurplusPair};
pub use family::{Family, FamilySpec, LengthSource};
pub use graph::{Edge, GraphDocument, GraphError, MetricGraph};
pub use secular::{Classification, EigenvalueRecord, Solver, SolverError, Tolerances};
