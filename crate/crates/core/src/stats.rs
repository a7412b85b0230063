//! Mergeable accumulation of surplus and local observables, and the
//! empirical tests run on the result.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{Binomial, ContinuousCDF, Discrete, Normal};
use thiserror::Error;

use crate::analysis::RecordObservables;
use crate::graph::MetricGraph;
use crate::secular::Classification;

pub const SAMPLE_FLOOR: u64 = 10_000;
pub const DEFAULT_BIN_WIDTH: f64 = 0.01;
/// A histogram bin is flagged as a candidate atom above this multiple of its neighbors' mean.
pub const ATOM_FACTOR: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("hard bound violated at index {index}: sigma = {sigma}, omega = {omega}")]
    HardBoundViolation { index: usize, sigma: i64, omega: i64 },
    #[error("sample of {have} is below the required {need}")]
    InsufficientSample { have: u64, need: u64 },
    #[error("graph is not a {0}")]
    WrongFamily(&'static str),
}

type Counts<K> = BTreeMap<K, u64>;

fn bump<K: Ord>(map: &mut Counts<K>, key: K, by: u64) {
    *map.entry(key).or_insert(0) += by;
}

fn merge_counts<K: Ord + Clone>(into: &mut Counts<K>, from: &Counts<K>) {
    for (key, &c) in from {
        bump(into, key.clone(), c);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurplusAccumulator {
    pub bin_width: f64,
    pub records: u64,
    pub generic: u64,
    pub loops: u64,
    pub excluded: u64,
    /// Generic records that carried local star observables.
    pub local: u64,
    pub omega: Counts<i64>,
    pub sigma: Counts<i64>,
    pub joint: Counts<(i64, i64)>,
    pub spectral_position: BTreeMap<usize, Counts<i64>>,
    pub capacity: BTreeMap<usize, Counts<i64>>,
    pub pairs: Vec<(usize, usize)>,
    pub pair_counts: BTreeMap<(usize, usize), Counts<(i64, i64)>>,
}

impl SurplusAccumulator {
    pub fn new(bin_width: f64, pairs: Vec<(usize, usize)>) -> Self {
        Self {
            bin_width,
            records: 0,
            generic: 0,
            loops: 0,
            excluded: 0,
            local: 0,
            omega: BTreeMap::new(),
            sigma: BTreeMap::new(),
            joint: BTreeMap::new(),
            spectral_position: BTreeMap::new(),
            capacity: BTreeMap::new(),
            pair_counts: pairs.iter().map(|&p| (p, BTreeMap::new())).collect(),
            pairs,
        }
    }

    /// Accumulator tracking every pair of interior vertices.
    pub fn for_graph(g: &MetricGraph) -> Self {
        let interior: Vec<usize> = g.interior_vertices().collect();
        let mut pairs = Vec::new();
        for (i, &u) in interior.iter().enumerate() {
            for &v in &interior[i + 1..] {
                pairs.push((u, v));
            }
        }
        Self::new(DEFAULT_BIN_WIDTH, pairs)
    }

    pub fn bin_of(&self, value: f64) -> i64 {
        (value / self.bin_width).floor() as i64
    }

    /// Adds one record. Generic records outside the hard bounds are rejected
    /// without touching the counts.
    pub fn accumulate(&mut self, obs: &RecordObservables, g: &MetricGraph) -> Result<(), StatsError> {
        match (obs.class, obs.surplus) {
            (Classification::Generic, Some(s)) => {
                if !s.within_bounds(g) {
                    return Err(StatsError::HardBoundViolation {
                        index: obs.index,
                        sigma: s.sigma,
                        omega: s.omega,
                    });
                }
                self.records += 1;
                self.generic += 1;
                bump(&mut self.omega, s.omega, 1);
                bump(&mut self.sigma, s.sigma, 1);
                bump(&mut self.joint, (s.sigma, s.omega), 1);
                if !obs.stars.is_empty() {
                    self.local += 1;
                    let mut position = BTreeMap::new();
                    for star in &obs.stars {
                        position.insert(star.vertex, star.spectral_position);
                        bump(self.spectral_position.entry(star.vertex).or_default(), star.spectral_position, 1);
                        let bin = self.bin_of(star.capacity);
                        bump(self.capacity.entry(star.vertex).or_default(), bin, 1);
                    }
                    for (&(u, v), counts) in self.pair_counts.iter_mut() {
                        if let (Some(&a), Some(&b)) = (position.get(&u), position.get(&v)) {
                            bump(counts, (a, b), 1);
                        }
                    }
                }
            }
            (Classification::Loop, _) => {
                self.records += 1;
                self.loops += 1;
            }
            _ => {
                self.records += 1;
                self.excluded += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.bin_width, other.bin_width, "merging histograms with different bins");
        self.records += other.records;
        self.generic += other.generic;
        self.loops += other.loops;
        self.excluded += other.excluded;
        self.local += other.local;
        merge_counts(&mut self.omega, &other.omega);
        merge_counts(&mut self.sigma, &other.sigma);
        merge_counts(&mut self.joint, &other.joint);
        for (v, c) in &other.spectral_position {
            merge_counts(self.spectral_position.entry(*v).or_default(), c);
        }
        for (v, c) in &other.capacity {
            merge_counts(self.capacity.entry(*v).or_default(), c);
        }
        for (p, c) in &other.pair_counts {
            if !self.pairs.contains(p) {
                self.pairs.push(*p);
            }
            merge_counts(self.pair_counts.entry(*p).or_default(), c);
        }
        self.pairs.sort();
    }
}

fn frequency<K: Ord>(map: &Counts<K>, key: &K, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    map.get(key).copied().unwrap_or(0) as f64 / total as f64
}

fn mean_and_sd(map: &Counts<i64>) -> (f64, f64, u64) {
    let n: u64 = map.values().sum();
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = map.iter().map(|(&k, &c)| k as f64 * c as f64).sum::<f64>() / n as f64;
    let var = map.iter().map(|(&k, &c)| (k as f64 - mean).powi(2) * c as f64).sum::<f64>() / n as f64;
    (mean, var.sqrt(), n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    InsufficientSample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub statistic: f64,
    pub tolerance: f64,
    pub sample: u64,
    pub status: Status,
}

impl Verdict {
    fn new(name: impl Into<String>, statistic: f64, tolerance: f64, sample: u64, floor: u64) -> Self {
        let status = if sample < floor {
            Status::InsufficientSample
        } else if statistic <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name: name.into(),
            statistic,
            tolerance,
            sample,
            status,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub loop_density: f64,
    pub generic_density: f64,
    pub expected_loop_density: f64,
    pub deviation: f64,
}

/// Empirical `d(ℒ)`, `d(𝒢)` against `L_loops / (2|Γ|)`.
pub fn density_report(acc: &SurplusAccumulator, g: &MetricGraph) -> Result<DensityReport, StatsError> {
    if acc.records < SAMPLE_FLOOR {
        return Err(StatsError::InsufficientSample {
            have: acc.records,
            need: SAMPLE_FLOOR,
        });
    }
    let loop_density = acc.loops as f64 / acc.records as f64;
    let expected = g.loop_length() / (2.0 * g.total_length());
    Ok(DensityReport {
        loop_density,
        generic_density: acc.generic as f64 / acc.records as f64,
        expected_loop_density: expected,
        deviation: (loop_density - expected).abs(),
    })
}

/// `max_j |P(X = j) - P(X = center2 - j)|` over the support of a count map.
fn reflection_defect(map: &Counts<i64>, doubled_center: i64) -> f64 {
    let total: u64 = map.values().sum();
    map.keys()
        .map(|&j| (frequency(map, &j, total) - frequency(map, &(doubled_center - j), total)).abs())
        .fold(0.0, f64::max)
}

/// Symmetry of `ω` around `(β - |∂Γ|)/2`, of each `N^(v)` around `deg v / 2`
/// and of each binned `ρ^(v)` histogram around `deg v / 2`.
pub fn symmetry_tests(acc: &SurplusAccumulator, g: &MetricGraph) -> Vec<Verdict> {
    let band = |n: u64| if n == 0 { f64::INFINITY } else { 3.0 / (n as f64).sqrt() };
    let mut out = Vec::new();
    let center = g.betti() as i64 - g.boundary_size() as i64;
    out.push(Verdict::new(
        "omega symmetry",
        reflection_defect(&acc.omega, center),
        band(acc.generic),
        acc.generic,
        SAMPLE_FLOOR,
    ));
    for (&v, counts) in &acc.spectral_position {
        let n: u64 = counts.values().sum();
        out.push(Verdict::new(
            format!("spectral position symmetry at vertex {v}"),
            reflection_defect(counts, g.degree(v) as i64),
            band(n),
            n,
            SAMPLE_FLOOR,
        ));
    }
    for (&v, bins) in &acc.capacity {
        let n: u64 = bins.values().sum();
        // bin b covers [b w, (b + 1) w); its mirror covers [deg - (b + 1) w, deg - b w)
        let last = (g.degree(v) as f64 / acc.bin_width).round() as i64 - 1;
        out.push(Verdict::new(
            format!("capacity symmetry at vertex {v}"),
            reflection_defect(bins, last),
            band(n),
            n,
            SAMPLE_FLOOR,
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub mean_sigma: f64,
    pub sd_sigma: f64,
    pub mean_omega: f64,
    pub sd_omega: f64,
}

pub fn moments(acc: &SurplusAccumulator) -> Moments {
    let (mean_sigma, sd_sigma, _) = mean_and_sd(&acc.sigma);
    let (mean_omega, sd_omega, _) = mean_and_sd(&acc.omega);
    Moments {
        mean_sigma,
        sd_sigma,
        mean_omega,
        sd_omega,
    }
}

/// `E σ = β/2` and `E ω = (β - |∂Γ|)/2`, each within three standard errors.
pub fn expectation_tests(acc: &SurplusAccumulator, g: &MetricGraph) -> Vec<Verdict> {
    let beta = g.betti() as f64;
    let boundary = g.boundary_size() as f64;
    let (ms, ss, n) = mean_and_sd(&acc.sigma);
    let (mw, sw, _) = mean_and_sd(&acc.omega);
    let stderr = |sd: f64| 3.0 * sd / (n.max(1) as f64).sqrt();
    // a distribution concentrated on one value has zero spread; allow rounding only
    vec![
        Verdict::new("mean sigma", (ms - beta / 2.0).abs(), stderr(ss).max(1e-12), n, SAMPLE_FLOOR),
        Verdict::new(
            "mean omega",
            (mw - (beta - boundary) / 2.0).abs(),
            stderr(sw).max(1e-12),
            n,
            SAMPLE_FLOOR,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinomialReport {
    /// `P(-ω - 1 = j)` observed, for `j = 0..=|∂Γ| - 2`.
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
    pub max_deviation: f64,
    pub verdict: Verdict,
}

/// `-ω - 1 ~ Bin(|∂Γ| - 2, 1/2)` on (3,1)-trees, cellwise within three binomial standard errors.
pub fn binomial_test(acc: &SurplusAccumulator, g: &MetricGraph) -> Result<BinomialReport, StatsError> {
    if !g.is_three_one_tree() {
        return Err(StatsError::WrongFamily("(3,1)-tree"));
    }
    let trials = g.boundary_size() as u64 - 2;
    let law = Binomial::new(0.5, trials).expect("valid binomial parameters");
    let n = acc.generic;
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    let mut max_deviation: f64 = 0.0;
    for j in 0..=trials {
        let p = law.pmf(j);
        let q = frequency(&acc.omega, &(-(j as i64) - 1), n);
        let se = (p * (1.0 - p) / n.max(1) as f64).sqrt();
        max_deviation = max_deviation.max((q - p).abs());
        worst_ratio = worst_ratio.max((q - p).abs() / (3.0 * se));
        observed.push(q);
        expected.push(p);
    }
    // anything outside the binomial support is an outright failure
    let outside: u64 = acc
        .omega
        .iter()
        .filter(|(&w, _)| w > -1 || w < -(trials as i64) - 1)
        .map(|(_, &c)| c)
        .sum();
    if outside > 0 {
        worst_ratio = f64::INFINITY;
    }
    Ok(BinomialReport {
        observed,
        expected,
        max_deviation,
        verdict: Verdict::new("binomial law of -omega-1", worst_ratio, 1.0, n, SAMPLE_FLOOR),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub pair: (usize, usize),
    pub conditional_symmetry: Verdict,
    pub correlation: Verdict,
}

/// Conditional symmetry of `N^(v)` given `N^(u)` and vanishing correlation, on trees.
pub fn independence_tests(acc: &SurplusAccumulator, g: &MetricGraph) -> Result<Vec<PairReport>, StatsError> {
    if !g.is_tree() {
        return Err(StatsError::WrongFamily("tree"));
    }
    let mut out = Vec::new();
    for (&(u, v), counts) in &acc.pair_counts {
        let n: u64 = counts.values().sum();
        let dv = g.degree(v) as i64;
        let mut by_u: BTreeMap<i64, Counts<i64>> = BTreeMap::new();
        for (&(a, b), &c) in counts {
            bump(by_u.entry(a).or_default(), b, c);
        }
        let mut worst_ratio: f64 = 0.0;
        let mut worst_defect: f64 = 0.0;
        for cond in by_u.values() {
            let m: u64 = cond.values().sum();
            let defect = reflection_defect(cond, dv);
            worst_defect = worst_defect.max(defect);
            worst_ratio = worst_ratio.max(defect / (3.0 / (m as f64).sqrt()));
        }
        let mean = |f: &dyn Fn(i64, i64) -> f64| {
            counts.iter().map(|(&(a, b), &c)| f(a, b) * c as f64).sum::<f64>() / n.max(1) as f64
        };
        let (ma, mb) = (mean(&|a, _| a as f64), mean(&|_, b| b as f64));
        let cov = mean(&|a, b| (a as f64 - ma) * (b as f64 - mb));
        let va = mean(&|a, _| (a as f64 - ma).powi(2));
        let vb = mean(&|_, b| (b as f64 - mb).powi(2));
        let corr = if va > 0.0 && vb > 0.0 { cov / (va * vb).sqrt() } else { 0.0 };
        out.push(PairReport {
            pair: (u, v),
            conditional_symmetry: Verdict {
                statistic: worst_defect,
                ..Verdict::new(format!("conditional symmetry ({u}, {v})"), worst_ratio, 1.0, n, SAMPLE_FLOOR)
            },
            correlation: Verdict::new(
                format!("correlation ({u}, {v})"),
                corr.abs(),
                3.0 / (n.max(1) as f64).sqrt(),
                n,
                SAMPLE_FLOOR,
            ),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub omega_min: Option<i64>,
    pub omega_max: Option<i64>,
    pub sigma_min: Option<i64>,
    pub sigma_max: Option<i64>,
    /// `1 - β - |∂Γ| ≤ ω ≤ 2β - 1`.
    pub omega_hard: (i64, i64),
    /// `0 ≤ σ ≤ β`.
    pub sigma_hard: (i64, i64),
    /// Conjectured `-1 - |∂Γ| ≤ ω ≤ β + 1`; reported only.
    pub omega_conjecture: (i64, i64),
    pub within_conjecture: bool,
}

pub fn support_report(acc: &SurplusAccumulator, g: &MetricGraph) -> SupportReport {
    let beta = g.betti() as i64;
    let boundary = g.boundary_size() as i64;
    let omega_min = acc.omega.keys().next().copied();
    let omega_max = acc.omega.keys().next_back().copied();
    let conj = (-1 - boundary, beta + 1);
    SupportReport {
        omega_min,
        omega_max,
        sigma_min: acc.sigma.keys().next().copied(),
        sigma_max: acc.sigma.keys().next_back().copied(),
        omega_hard: (1 - beta - boundary, 2 * beta - 1),
        sigma_hard: (0, beta),
        omega_conjecture: conj,
        within_conjecture: omega_min.is_none_or(|w| w >= conj.0) && omega_max.is_none_or(|w| w <= conj.1),
    }
}

/// Kolmogorov-Smirnov distance between the standardized `ω` and the standard normal.
pub fn clt_diagnostic(acc: &SurplusAccumulator) -> f64 {
    let (mean, sd, n) = mean_and_sd(&acc.omega);
    if n == 0 || sd == 0.0 {
        return 1.0;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut below = 0u64;
    let mut distance: f64 = 0.0;
    for (&w, &c) in &acc.omega {
        let phi = normal.cdf((w as f64 - mean) / sd);
        let before = below as f64 / n as f64;
        below += c;
        let after = below as f64 / n as f64;
        distance = distance.max((phi - before).abs()).max((phi - after).abs());
    }
    distance.min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub vertex: usize,
    pub value: f64,
    pub count: u64,
}

/// Capacity bins exceeding `ATOM_FACTOR` times the mean of their two neighbors.
pub fn atom_candidates(acc: &SurplusAccumulator) -> Vec<Atom> {
    let mut out = Vec::new();
    for (&v, bins) in &acc.capacity {
        for (&b, &c) in bins {
            let left = bins.get(&(b - 1)).copied().unwrap_or(0);
            let right = bins.get(&(b + 1)).copied().unwrap_or(0);
            let neighbors = (left + right) as f64 / 2.0;
            if c >= 10 && c as f64 > ATOM_FACTOR * neighbors {
                out.push(Atom {
                    vertex: v,
                    value: (b as f64 + 0.5) * acc.bin_width,
                    count: c,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub value: i64,
    pub count: u64,
    pub frequency: f64,
}

fn distribution(map: &Counts<i64>) -> Vec<Distribution> {
    let total: u64 = map.values().sum();
    map.iter()
        .map(|(&value, &count)| Distribution {
            value,
            count,
            frequency: frequency(map, &value, total),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexDistribution {
    pub vertex: usize,
    pub degree: usize,
    pub spectral_position: Vec<Distribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub records: u64,
    pub generic: u64,
    pub loops: u64,
    pub excluded: u64,
    pub local: u64,
    pub betti: usize,
    pub boundary: usize,
    pub omega: Vec<Distribution>,
    pub sigma: Vec<Distribution>,
    pub joint: Vec<((i64, i64), u64)>,
    pub spectral_position: Vec<VertexDistribution>,
    pub moments: Moments,
    pub density: Option<DensityReport>,
    pub symmetry: Vec<Verdict>,
    pub expectation: Vec<Verdict>,
    pub binomial: Option<BinomialReport>,
    pub independence: Option<Vec<PairReport>>,
    pub support: SupportReport,
    pub ks_distance: f64,
    pub atoms: Vec<Atom>,
}

impl StatReport {
    pub fn build(acc: &SurplusAccumulator, g: &MetricGraph) -> Self {
        Self {
            records: acc.records,
            generic: acc.generic,
            loops: acc.loops,
            excluded: acc.excluded,
            local: acc.local,
            betti: g.betti(),
            boundary: g.boundary_size(),
            omega: distribution(&acc.omega),
            sigma: distribution(&acc.sigma),
            joint: acc.joint.iter().map(|(&k, &c)| (k, c)).collect(),
            spectral_position: acc
                .spectral_position
                .iter()
                .map(|(&v, c)| VertexDistribution {
                    vertex: v,
                    degree: g.degree(v),
                    spectral_position: distribution(c),
                })
                .collect(),
            moments: moments(acc),
            density: density_report(acc, g).ok(),
            symmetry: symmetry_tests(acc, g),
            expectation: expectation_tests(acc, g),
            binomial: binomial_test(acc, g).ok(),
            independence: independence_tests(acc, g).ok(),
            support: support_report(acc, g),
            ks_distance: clt_diagnostic(acc),
            atoms: atom_candidates(acc),
        }
    }

    /// Every evaluated verdict that did not pass.
    pub fn failures(&self) -> Vec<&Verdict> {
        let mut all: Vec<&Verdict> = self.symmetry.iter().chain(&self.expectation).collect();
        if let Some(b) = &self.binomial {
            all.push(&b.verdict);
        }
        if let Some(pairs) = &self.independence {
            for p in pairs {
                all.push(&p.conditional_symmetry);
                all.push(&p.correlation);
            }
        }
        all.into_iter().filter(|v| v.status == Status::Fail).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{collect, Target, VertexObservable};
    use crate::eigenfunction::SurplusPair;
    use crate::family::{Family, FamilySpec, LengthSource};
    use crate::secular::{Solver, Tolerances};
    use proptest::prelude::*;

    fn star() -> MetricGraph {
        FamilySpec::new(Family::Star { tails: 3 }, LengthSource::uniform(2))
            .generate()
            .unwrap()
    }

    fn synthetic(index: usize, omega: i64, position: i64, class: Classification) -> RecordObservables {
        RecordObservables {
            index,
            k: index as f64,
            multiplicity: 1,
            class,
            surplus: Some(SurplusPair::new(index, index, (index as i64 + omega) as usize)),
            stars: vec![VertexObservable {
                vertex: 0,
                spectral_position: position,
                capacity: 0.5 + position as f64,
                arms: vec![],
            }],
            local_global: None,
            kernel: None,
        }
    }

    #[test]
    fn loop_record_moves_only_loop_counter() {
        let g = star();
        let mut acc = SurplusAccumulator::for_graph(&g);
        acc.accumulate(&synthetic(5, -1, 1, Classification::Loop), &g).unwrap();
        assert_eq!((acc.records, acc.loops, acc.generic, acc.excluded), (1, 1, 0, 0));
        assert!(acc.omega.is_empty() && acc.spectral_position.is_empty());
        acc.accumulate(&synthetic(6, -1, 1, Classification::Generic), &g).unwrap();
        assert_eq!(acc.omega[&-1], 1);
        assert_eq!(acc.spectral_position[&0][&1], 1);
        acc.accumulate(&synthetic(7, -1, 1, Classification::Borderline), &g).unwrap();
        assert_eq!(acc.excluded, 1);
        assert_eq!(acc.generic + acc.loops + acc.excluded, acc.records);
    }

    #[test]
    fn out_of_range_record_is_fatal() {
        let g = star();
        let mut acc = SurplusAccumulator::for_graph(&g);
        let err = acc.accumulate(&synthetic(5, 3, 1, Classification::Generic), &g).unwrap_err();
        assert!(matches!(err, StatsError::HardBoundViolation { .. }));
        assert_eq!(acc.records, 0);
    }

    #[test]
    fn asymmetric_counts_fail() {
        let g = star();
        let mut acc = SurplusAccumulator::for_graph(&g);
        for i in 1..=20_000 {
            let omega = if i % 3 == 0 { -2 } else { -1 };
            acc.accumulate(&synthetic(i, omega, if i % 3 == 0 { 1 } else { 2 }, Classification::Generic), &g)
                .unwrap();
        }
        let verdicts = symmetry_tests(&acc, &g);
        assert_eq!(verdicts[0].status, Status::Fail);
        assert_eq!(verdicts[1].status, Status::Fail);
    }

    #[test]
    fn correlated_counts_fail() {
        let g = FamilySpec::new(Family::Tree31 { interior: 2 }, LengthSource::uniform(1))
            .generate()
            .unwrap();
        let interior: Vec<usize> = g.interior_vertices().collect();
        let mut acc = SurplusAccumulator::for_graph(&g);
        for i in 1..=20_000usize {
            let n = if i % 2 == 0 { 1 } else { 2 };
            let mut obs = synthetic(i, -1 - (i % 3 == 0) as i64, n, Classification::Generic);
            obs.stars = interior
                .iter()
                .map(|&v| VertexObservable {
                    vertex: v,
                    spectral_position: n,
                    capacity: 1.5,
                    arms: vec![],
                })
                .collect();
            acc.accumulate(&obs, &g).unwrap();
        }
        let report = independence_tests(&acc, &g).unwrap();
        assert_eq!(report[0].correlation.status, Status::Fail);
        assert_eq!(report[0].conditional_symmetry.status, Status::Fail);
    }

    #[test]
    fn binomial_requires_three_one_tree() {
        let g = FamilySpec::new(Family::Mandarin { edges: 3 }, LengthSource::uniform(1))
            .generate()
            .unwrap();
        let acc = SurplusAccumulator::for_graph(&g);
        assert!(matches!(binomial_test(&acc, &g), Err(StatsError::WrongFamily(_))));
    }

    #[test]
    fn star_statistics() {
        let g = star();
        let obs = collect(&Solver::new(&g, Tolerances::default()), Target::Generic(SAMPLE_FLOOR as usize)).unwrap();
        let mut acc = SurplusAccumulator::for_graph(&g);
        for o in &obs {
            acc.accumulate(o, &g).unwrap();
        }
        let report = StatReport::build(&acc, &g);
        assert!(report.failures().is_empty(), "{:?}", report.failures());
        let b = report.binomial.unwrap();
        assert_eq!(b.expected, vec![0.5, 0.5]);
        assert!(b.verdict.passed());
        assert_eq!(report.density.unwrap().loop_density, 0.0);
        assert!((0.0..=1.0).contains(&report.ks_distance));
    }

    #[test]
    fn ks_distance_in_unit_interval() {
        let mut acc = SurplusAccumulator::new(0.01, vec![]);
        assert_eq!(clt_diagnostic(&acc), 1.0);
        acc.omega.insert(-1, 10);
        acc.omega.insert(-2, 10);
        let d = clt_diagnostic(&acc);
        assert!(d > 0.0 && d <= 1.0);
    }

    fn stream_fixture() -> &'static (MetricGraph, Vec<RecordObservables>) {
        static FIXTURE: std::sync::OnceLock<(MetricGraph, Vec<RecordObservables>)> = std::sync::OnceLock::new();
        FIXTURE.get_or_init(|| {
            let g = FamilySpec::new(Family::Tree31 { interior: 2 }, LengthSource::uniform(6))
                .generate()
                .unwrap();
            let obs = collect(&Solver::new(&g, Tolerances::default()), Target::Records(400)).unwrap();
            (g, obs)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn merge_matches_single_stream(cuts in proptest::collection::vec(0usize..400, 0..6)) {
            let (g, obs) = stream_fixture();
            let mut whole = SurplusAccumulator::for_graph(g);
            for o in obs {
                whole.accumulate(o, g).unwrap();
            }
            let mut bounds = cuts.clone();
            bounds.push(0);
            bounds.push(obs.len());
            bounds.sort();
            let mut parts: Vec<SurplusAccumulator> = bounds
                .windows(2)
                .map(|w| {
                    let mut acc = SurplusAccumulator::for_graph(g);
                    for o in &obs[w[0]..w[1]] {
                        acc.accumulate(o, g).unwrap();
                    }
                    acc
                })
                .collect();
            parts.reverse();
            let mut merged = SurplusAccumulator::for_graph(g);
            for p in &parts {
                merged.merge(p);
            }
            prop_assert_eq!(&merged, &whole);
            prop_assert_eq!(StatReport::build(&merged, g), StatReport::build(&whole, g));
        }
    }
}
