//! Bond basis, vertex scattering matrix and the secular unitary `U(k) = D(k) S`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::graph::{MetricGraph, Side};

/// Bond `2j` runs along edge `j` from `u` to `v`; bond `2j + 1` runs back.
pub fn bond(edge: usize, side_from: Side) -> usize {
    match side_from {
        Side::Start => 2 * edge,
        Side::End => 2 * edge + 1,
    }
}

pub fn reverse(b: usize) -> usize {
    b ^ 1
}

pub fn bond_edge(b: usize) -> usize {
    b / 2
}

/// Vertex a bond leaves from.
pub fn bond_origin(g: &MetricGraph, b: usize) -> usize {
    let e = g.edge(bond_edge(b));
    if b % 2 == 0 {
        e.u
    } else {
        e.v
    }
}

/// Vertex a bond arrives at.
pub fn bond_terminus(g: &MetricGraph, b: usize) -> usize {
    bond_origin(g, reverse(b))
}

/// Per-bond lengths, each edge length repeated for its two bonds.
pub fn bond_lengths(lengths: &[f64]) -> Vec<f64> {
    lengths.iter().flat_map(|&l| [l, l]).collect()
}

/// Real orthogonal `2E x 2E` matrix with `S[b', b] = 2/deg(v) - [b' = reverse(b)]`
/// for `b` arriving at `v` and `b'` leaving `v`.
pub fn build_scattering(g: &MetricGraph) -> DMatrix<f64> {
    let n = 2 * g.edge_count();
    let mut s = DMatrix::zeros(n, n);
    for v in 0..g.vertex_count() {
        let d = g.degree(v) as f64;
        let ends = g.ends(v);
        for &incoming_end in ends {
            // the bond leaving `v` through this end, reversed, arrives at `v`
            let incoming = reverse(bond(incoming_end.edge, incoming_end.side));
            for &outgoing_end in ends {
                let outgoing = bond(outgoing_end.edge, outgoing_end.side);
                let delta = if outgoing == reverse(incoming) { 1.0 } else { 0.0 };
                s[(outgoing, incoming)] = 2.0 / d - delta;
            }
        }
    }
    s
}

/// `U(k) = exp(i k L) S`, with `L` the diagonal of bond lengths.
pub fn secular_unitary(s: &DMatrix<f64>, bond_lengths: &[f64], k: f64) -> DMatrix<Complex64> {
    secular_unitary_at(s, &bond_phases(bond_lengths, k))
}

/// `exp(i D) S` for an explicit diagonal of bond phases.
pub fn secular_unitary_at(s: &DMatrix<f64>, phases: &[f64]) -> DMatrix<Complex64> {
    let n = s.nrows();
    let diag: Vec<Complex64> = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
    DMatrix::from_fn(n, n, |r, c| diag[r] * s[(r, c)])
}

pub fn bond_phases(bond_lengths: &[f64], k: f64) -> Vec<f64> {
    bond_lengths.iter().map(|&l| k * l).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Family, FamilySpec, LengthSource};

    fn graphs() -> Vec<MetricGraph> {
        [
            Family::Interval,
            Family::Star { tails: 3 },
            Family::Stower { loops: 2, tails: 1 },
            Family::Mandarin { edges: 4 },
            Family::Tree31 { interior: 3 },
            Family::RandomRegular {
                degree: 4,
                vertices: 8,
                seed: 3,
            },
        ]
        .into_iter()
        .map(|f| FamilySpec::new(f, LengthSource::uniform(5)).generate().unwrap())
        .collect()
    }

    #[test]
    fn scattering_is_orthogonal() {
        for g in graphs() {
            let s = build_scattering(&g);
            let n = s.nrows();
            let defect = (&s * s.transpose() - DMatrix::<f64>::identity(n, n)).amax();
            assert!(defect < 1e-12, "defect {defect}");
        }
    }

    #[test]
    fn vertex_coefficients() {
        let g = FamilySpec::new(Family::Star { tails: 3 }, LengthSource::uniform(1)).generate().unwrap();
        let s = build_scattering(&g);
        // leaf 1 reflects bond 0 (0 -> 1) into bond 1 (1 -> 0)
        assert_eq!(s[(1, 0)], 1.0);
        // at the center, arriving on bond 1: back-scatter into bond 0, transmit into bond 2
        assert!((s[(0, 1)] + 1.0 / 3.0).abs() < 1e-15);
        assert!((s[(2, 1)] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s[(3, 1)], 0.0);
    }

    #[test]
    fn unitary_properties() {
        for g in graphs() {
            let s = build_scattering(&g);
            let bl = bond_lengths(&g.lengths());
            let u0 = secular_unitary(&s, &bl, 0.0);
            assert!((u0.map(|z| z.re) - &s).amax() < 1e-15);
            for k in [0.37, 5.1, 123.456] {
                let u = secular_unitary(&s, &bl, k);
                let n = u.nrows();
                let defect = (&u * u.adjoint() - DMatrix::<Complex64>::identity(n, n)).camax();
                assert!(defect < 1e-12);
                assert!((u.clone().lu().determinant().norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bond_helpers() {
        let g = FamilySpec::new(Family::Stower { loops: 1, tails: 2 }, LengthSource::uniform(1))
            .generate()
            .unwrap();
        for b in 0..2 * g.edge_count() {
            assert_eq!(reverse(reverse(b)), b);
            assert_eq!(bond_terminus(&g, b), bond_origin(&g, reverse(b)));
        }
        assert_eq!(bond_origin(&g, 2), 0);
        assert_eq!(bond_terminus(&g, 2), 1);
    }
}
