//! Deterministic generators for the graph families used throughout the crate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, GraphError, MetricGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("invalid family parameters: {0}")]
    InvalidFamilyParams(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Family {
    /// A single edge.
    Interval,
    /// `tails` pendant edges sharing a center vertex.
    Star { tails: usize },
    /// One center vertex with `loops` loops and `tails` pendant edges.
    /// Loops come first in the edge list.
    Stower { loops: usize, tails: usize },
    /// Two vertices joined by `edges` parallel edges.
    Mandarin { edges: usize },
    /// Caterpillar tree with `interior` vertices of degree 3 on a path,
    /// padded with leaves.
    Tree31 { interior: usize },
    /// Random simple connected `degree`-regular graph (configuration model).
    RandomRegular {
        degree: usize,
        vertices: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LengthSource {
    Explicit { lengths: Vec<f64> },
    Uniform { low: f64, high: f64, seed: u64 },
}

impl LengthSource {
    pub fn uniform(seed: u64) -> Self {
        LengthSource::Uniform {
            low: 0.5,
            high: 1.5,
            seed,
        }
    }

    pub fn lengths(&self, count: usize) -> Result<Vec<f64>, FamilyError> {
        match self {
            LengthSource::Explicit { lengths } => {
                if lengths.len() != count {
                    return Err(FamilyError::InvalidFamilyParams(format!(
                        "expected {count} lengths, got {}",
                        lengths.len()
                    )));
                }
                Ok(lengths.clone())
            }
            LengthSource::Uniform { low, high, seed } => {
                if !(*low > 0.0 && high > low) {
                    return Err(FamilyError::InvalidFamilyParams(format!(
                        "length range [{low}, {high}] must be positive and non-empty"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..count).map(|_| rng.gen_range(*low..*high)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub lengths: LengthSource,
}

impl FamilySpec {
    pub fn new(family: Family, lengths: LengthSource) -> Self {
        Self { family, lengths }
    }

    pub fn generate(&self) -> Result<MetricGraph, FamilyError> {
        let (vertices, pairs) = topology(&self.family)?;
        let lengths = self.lengths.lengths(pairs.len())?;
        let edges = pairs
            .iter()
            .zip(lengths)
            .map(|(&(u, v), length)| Edge { u, v, length })
            .collect();
        Ok(MetricGraph::new(vertices, edges)?)
    }
}

/// Vertex count and edge endpoint list of a family, without lengths.
pub fn topology(family: &Family) -> Result<(usize, Vec<(usize, usize)>), FamilyError> {
    let bad = |msg: String| Err(FamilyError::InvalidFamilyParams(msg));
    match *family {
        Family::Interval => Ok((2, vec![(0, 1)])),
        Family::Star { tails } => {
            if tails < 3 {
                return bad(format!("a star needs at least 3 tails, got {tails}"));
            }
            Ok((tails + 1, (1..=tails).map(|i| (0, i)).collect()))
        }
        Family::Stower { loops, tails } => {
            if 2 * loops + tails < 3 {
                return bad(format!(
                    "stower with {loops} loops and {tails} tails has a center of degree below 3"
                ));
            }
            let mut pairs: Vec<(usize, usize)> = (0..loops).map(|_| (0, 0)).collect();
            pairs.extend((1..=tails).map(|i| (0, i)));
            Ok((tails + 1, pairs))
        }
        Family::Mandarin { edges } => {
            if edges < 3 {
                return bad(format!("a mandarin needs at least 3 edges, got {edges}"));
            }
            Ok((2, vec![(0, 1); edges]))
        }
        Family::Tree31 { interior } => {
            if interior == 0 {
                return bad("a (3,1)-tree needs at least one interior vertex".into());
            }
            let mut pairs: Vec<(usize, usize)> = (0..interior - 1).map(|i| (i, i + 1)).collect();
            let mut next = interior;
            for i in 0..interior {
                let path_degree = usize::from(i > 0) + usize::from(i + 1 < interior);
                for _ in path_degree..3 {
                    pairs.push((i, next));
                    next += 1;
                }
            }
            Ok((next, pairs))
        }
        Family::RandomRegular {
            degree,
            vertices,
            seed,
        } => random_regular(degree, vertices, seed),
    }
}

const MAX_REGULAR_ATTEMPTS: usize = 100_000;

fn random_regular(degree: usize, vertices: usize, seed: u64) -> Result<(usize, Vec<(usize, usize)>), FamilyError> {
    if degree < 3 || degree >= vertices || (degree * vertices) % 2 != 0 {
        return Err(FamilyError::InvalidFamilyParams(format!(
            "no simple {degree}-regular graph on {vertices} vertices"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..vertices).flat_map(|v| std::iter::repeat(v).take(degree)).collect();
    for _ in 0..MAX_REGULAR_ATTEMPTS {
        stubs.shuffle(&mut rng);
        let mut pairs: Vec<(usize, usize)> = stubs
            .chunks(2)
            .map(|c| (c[0].min(c[1]), c[0].max(c[1])))
            .collect();
        if pairs.iter().any(|(u, v)| u == v) {
            continue;
        }
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        if !connected(vertices, &pairs) {
            continue;
        }
        return Ok((vertices, pairs));
    }
    Err(FamilyError::InvalidFamilyParams(format!(
        "failed to sample a simple connected {degree}-regular graph on {vertices} vertices"
    )))
}

fn connected(vertices: usize, pairs: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..vertices).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = vertices;
    for &(u, v) in pairs {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: Family, seed: u64) -> FamilySpec {
        FamilySpec::new(family, LengthSource::uniform(seed))
    }

    #[test]
    fn star_explicit_lengths() {
        let g = FamilySpec::new(
            Family::Star { tails: 3 },
            LengthSource::Explicit {
                lengths: vec![0.9, 1.1, 1.3],
            },
        )
        .generate()
        .unwrap();
        assert_eq!((g.vertex_count(), g.edge_count(), g.betti()), (4, 3, 0));
    }

    #[test]
    fn tree31_shapes() {
        for interior in 1..6 {
            let g = spec(Family::Tree31 { interior }, 1).generate().unwrap();
            assert!(g.is_three_one_tree());
            assert_eq!(g.boundary_size(), interior + 2);
            assert_eq!(g.edge_count(), 2 * interior + 1);
        }
    }

    #[test]
    fn stower_and_mandarin() {
        let g = spec(Family::Stower { loops: 3, tails: 4 }, 2).generate().unwrap();
        assert_eq!(g.betti(), 3);
        assert_eq!(g.loop_edges().count(), 3);
        let m = spec(Family::Mandarin { edges: 5 }, 2).generate().unwrap();
        assert_eq!(m.betti(), 4);
        assert!(matches!(
            spec(Family::Mandarin { edges: 2 }, 0).generate(),
            Err(FamilyError::InvalidFamilyParams(_))
        ));
    }

    #[test]
    fn random_regular_counts() {
        let fam = Family::RandomRegular {
            degree: 6,
            vertices: 16,
            seed: 7,
        };
        let g = spec(fam.clone(), 7).generate().unwrap();
        assert_eq!(g.edge_count(), 48);
        assert_eq!(g.betti(), 33);
        assert!((0..16).all(|v| g.degree(v) == 6));
        assert!(g.loop_edges().next().is_none());
        assert_eq!(spec(fam, 7).generate().unwrap(), g);
    }

    #[test]
    fn lengths_in_range_and_deterministic() {
        let a = LengthSource::uniform(11).lengths(50).unwrap();
        assert!(a.iter().all(|&l| (0.5..1.5).contains(&l)));
        assert_eq!(a, LengthSource::uniform(11).lengths(50).unwrap());
        assert_ne!(a, LengthSource::uniform(12).lengths(50).unwrap());
    }
}
