use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qgraph::analysis::{stream, RecordObservables, Target};
use qgraph::domains::{partition, Cut};
use qgraph::export::{self, CsvSink};
use qgraph::stats::{StatReport, Status, SurplusAccumulator, SAMPLE_FLOOR};
use qgraph::suite::{builtin_fixtures, negative_controls, run_fixture, Check, SuiteConfig};
use qgraph::torus::{flow_point, inversion_audit, observables_at};
use qgraph::secular::friedlander_check;
use qgraph::{EigenvalueRecord, MetricGraph, Solver, Tolerances};
use serde::Serialize;

use crate::config::{Audit, CliError, RunConfig};

/// Eigenvalues per solver window. Fixed so that output does not depend on
/// the number of workers.
const CHUNK: usize = 500;
const DEFAULT_COUNT: usize = 1000;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    std::fs::create_dir_all(dir)?;
    let path: PathBuf = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn pieces(eigenvalues: f64) -> usize {
    ((eigenvalues / CHUNK as f64).ceil() as usize).max(1)
}

fn solve(config: &RunConfig, solver: &Solver) -> Result<Vec<EigenvalueRecord>, CliError> {
    let g = solver.graph();
    let solver_err = |e: qgraph::SolverError| CliError::Solver(e.to_string());
    match config.kmax {
        Some(kmax) => solver
            .window_parallel(0.0, kmax, pieces(kmax * g.total_length() / PI))
            .map_err(solver_err),
        None => {
            let count = config.count.unwrap_or(DEFAULT_COUNT);
            if count == 0 {
                return Ok(Vec::new());
            }
            let hi = solver.k_for_count(count).map_err(solver_err)?;
            let mut records = solver.window_parallel(0.0, hi, pieces(count as f64)).map_err(solver_err)?;
            records.retain(|r| r.index <= count);
            Ok(records)
        }
    }
}

fn completeness(records: &[EigenvalueRecord], g: &MetricGraph) -> Result<(), CliError> {
    let report = friedlander_check(records, g);
    if report.passed() {
        eprintln!("completeness audit: {} eigenvalues, no violations", report.checked);
        Ok(())
    } else {
        Err(CliError::Assertion(format!("completeness audit: {:?}", report.violations)))
    }
}

pub fn spectrum(config: &RunConfig) -> Result<(), CliError> {
    let solver = Solver::new(&config.graph, config.tol);
    let records = solve(config, &solver)?;
    let mut sink = CsvSink::new(create(&config.out, "spectrum.csv")?, &export::spectrum_header())?;
    sink.rows(records.iter().map(export::spectrum_row))?;
    sink.finish()?.flush()?;
    if config.audit(Audit::Friedlander) {
        completeness(&records, &config.graph)?;
    }
    for a in [Audit::LocalGlobal, Audit::Torus] {
        if config.audit(a) {
            eprintln!("note: audit {a:?} applies to observables and stats");
        }
    }
    Ok(())
}

fn target(config: &RunConfig, generic: bool) -> Target {
    match (config.kmax, config.count) {
        (Some(kmax), _) => Target::UpTo(kmax),
        (None, Some(n)) if generic => Target::Generic(n),
        (None, Some(n)) => Target::Records(n),
        (None, None) if generic => Target::Generic(SAMPLE_FLOOR as usize),
        (None, None) => Target::Records(DEFAULT_COUNT),
    }
}

/// Per-record audits shared by `observables` and `stats`.
struct Auditor<'a> {
    config: &'a RunConfig,
    records: Vec<EigenvalueRecord>,
    torus_floor: f64,
    checked_local: usize,
    checked_torus: usize,
    failures: Vec<String>,
}

impl<'a> Auditor<'a> {
    fn new(config: &'a RunConfig) -> Self {
        let g = &config.graph;
        Self {
            config,
            records: Vec::new(),
            torus_floor: 2.0 * g.total_length() / g.min_length(),
            checked_local: 0,
            checked_torus: 0,
            failures: Vec::new(),
        }
    }

    fn visit(&mut self, o: &RecordObservables) {
        let config = self.config;
        let g = &config.graph;
        if config.audit(Audit::Friedlander) {
            self.records.push(EigenvalueRecord {
                index: o.index,
                k: o.k,
                multiplicity: o.multiplicity,
                class: o.class,
                kernel: Vec::new(),
                residual: 0.0,
            });
        }
        if config.audit(Audit::LocalGlobal) {
            if let Some(r) = &o.local_global {
                self.checked_local += 1;
                if !r.holds(config.suite.identity_tol) {
                    self.failures.push(format!("local-global at n = {}: {r:?}", o.index));
                }
            }
        }
        if config.audit(Audit::Torus) && o.is_generic() && o.index as f64 >= self.torus_floor {
            self.checked_torus += 1;
            if let Some(msg) = torus_failure(o, g, &config.tol, config.suite.identity_tol) {
                self.failures.push(msg);
            }
        }
    }

    fn finish(self) -> Result<(), CliError> {
        let config = self.config;
        if config.audit(Audit::Friedlander) {
            completeness(&self.records, &config.graph)?;
        }
        if config.audit(Audit::LocalGlobal) {
            eprintln!("local-global audit: {} records", self.checked_local);
        }
        if config.audit(Audit::Torus) {
            eprintln!("torus audit: {} records", self.checked_torus);
        }
        if self.failures.is_empty() {
            Ok(())
        } else {
            Err(CliError::Assertion(format!(
                "{} audit failures, first: {}",
                self.failures.len(),
                self.failures[0]
            )))
        }
    }
}

fn torus_failure(o: &RecordObservables, g: &MetricGraph, tol: &Tolerances, identity_tol: f64) -> Option<String> {
    let s = o.surplus?;
    let kappa = flow_point(o.k, &g.lengths());
    let t = match observables_at(&kappa, g, tol) {
        Ok(t) => t,
        Err(e) => return Some(format!("torus at n = {}: {e}", o.index)),
    };
    if (t.sigma, t.omega) != (s.sigma, s.omega) {
        return Some(format!(
            "torus at n = {}: ({}, {}) on the torus, ({}, {}) from the eigenfunction",
            o.index, t.sigma, t.omega, s.sigma, s.omega
        ));
    }
    if let Some(star) = o
        .stars
        .iter()
        .find(|star| t.spectral_position_at(star.vertex) != Some(star.spectral_position))
    {
        return Some(format!("torus at n = {}: N differs at vertex {}", o.index, star.vertex));
    }
    match inversion_audit(&kappa, g, tol) {
        Ok(a) if a.holds(identity_tol) => None,
        Ok(a) => Some(format!("inversion at n = {}: {a:?}", o.index)),
        Err(e) => Some(format!("inversion at n = {}: {e}", o.index)),
    }
}

pub fn observables(config: &RunConfig, all_domains: bool) -> Result<(), CliError> {
    let g = &config.graph;
    let solver = Solver::new(g, config.tol);
    let mut rows = CsvSink::new(create(&config.out, "observables.csv")?, &export::observables_header())?;
    let mut domains = CsvSink::new(create(&config.out, "domains.csv")?, &export::domains_header())?;
    let mut auditor = Auditor::new(config);
    let mut write_error: Option<CliError> = None;
    stream(&solver, target(config, false), CHUNK, |o| {
        if write_error.is_some() {
            return;
        }
        let result = (|| -> Result<(), CliError> {
            rows.row(&export::observables_row(o))?;
            if all_domains {
                if let (true, Some(f)) = (o.is_generic(), o.eigenfunction(g)) {
                    let f = f.map_err(|e| CliError::Solver(e.to_string()))?;
                    let parts = partition(&f, Cut::Neumann).map_err(|e| CliError::Solver(e.to_string()))?;
                    domains.rows(export::partition_rows(o.index, o.k, &parts))?;
                }
            } else {
                domains.rows(export::star_domain_rows(o))?;
            }
            Ok(())
        })();
        match result {
            Ok(()) => auditor.visit(o),
            Err(e) => write_error = Some(e),
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    rows.finish()?.flush()?;
    domains.finish()?.flush()?;
    auditor.finish()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Histogram {
    Omega,
    Sigma,
    SpectralPosition(usize),
    Capacity(usize),
}

pub fn parse_histograms(names: &[String], vertex: Option<usize>, config: &RunConfig) -> Result<Vec<Histogram>, CliError> {
    let g = &config.graph;
    let interior = |v: Option<usize>| -> Result<usize, CliError> {
        let v = v.ok_or_else(|| CliError::Input("--histogram N and rho need --vertex".into()))?;
        if v >= g.vertex_count() || g.is_boundary(v) {
            return Err(CliError::Input(format!("vertex {v} is not an interior vertex")));
        }
        Ok(v)
    };
    let mut out = vec![Histogram::Omega, Histogram::Sigma];
    for name in names {
        let h = match name.as_str() {
            "omega" => Histogram::Omega,
            "sigma" => Histogram::Sigma,
            "N" | "n" | "spectral-position" => Histogram::SpectralPosition(interior(vertex)?),
            "rho" | "capacity" => Histogram::Capacity(interior(vertex)?),
            other => return Err(CliError::Input(format!("unknown histogram '{other}'"))),
        };
        if !out.contains(&h) {
            out.push(h);
        }
    }
    Ok(out)
}

fn integer_entries(map: Option<&std::collections::BTreeMap<i64, u64>>) -> Vec<(String, u64)> {
    map.map(|m| m.iter().map(|(v, &c)| (v.to_string(), c)).collect())
        .unwrap_or_default()
}

fn write_histogram(dir: &Path, h: Histogram, acc: &SurplusAccumulator) -> Result<(), CliError> {
    let (file, entries) = match h {
        Histogram::Omega => ("hist_omega.csv".to_string(), integer_entries(Some(&acc.omega))),
        Histogram::Sigma => ("hist_sigma.csv".to_string(), integer_entries(Some(&acc.sigma))),
        Histogram::SpectralPosition(v) => (format!("hist_N_v{v}.csv"), integer_entries(acc.spectral_position.get(&v))),
        Histogram::Capacity(v) => {
            let w = acc.bin_width;
            let entries = acc
                .capacity
                .get(&v)
                .map(|m| {
                    m.iter()
                        .map(|(&b, &c)| (export::fmt_float((b as f64 + 0.5) * w), c))
                        .collect()
                })
                .unwrap_or_default();
            (format!("hist_rho_v{v}.csv"), entries)
        }
    };
    let mut sink = CsvSink::new(create(dir, &file)?, &export::histogram_header())?;
    sink.rows(export::histogram_rows(&entries))?;
    sink.finish()?.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct StatsDocument<'a> {
    graph: qgraph::GraphDocument,
    report: &'a StatReport,
}

pub fn stats(config: &RunConfig, histograms: &[Histogram]) -> Result<(), CliError> {
    let g = &config.graph;
    let solver = Solver::new(g, config.tol);
    let mut acc = SurplusAccumulator::for_graph(g);
    let mut auditor = Auditor::new(config);
    let mut fatal: Option<CliError> = None;
    stream(&solver, target(config, true), CHUNK, |o| {
        if fatal.is_some() {
            return;
        }
        match acc.accumulate(o, g) {
            Ok(()) => auditor.visit(o),
            Err(e) => fatal = Some(e.into()),
        }
    })?;
    if let Some(e) = fatal {
        return Err(e);
    }
    let report = StatReport::build(&acc, g);
    let doc = StatsDocument {
        graph: g.to_document(),
        report: &report,
    };
    let mut out = create(&config.out, "report.json")?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| CliError::Input(format!("output: {e}")))?;
    writeln!(out)?;
    out.flush()?;
    for &h in histograms {
        write_histogram(&config.out, h, &acc)?;
    }

    println!(
        "records {}  generic {}  loop {}  excluded {}",
        acc.records, acc.generic, acc.loops, acc.excluded
    );
    let verdicts = report
        .symmetry
        .iter()
        .chain(&report.expectation)
        .chain(report.binomial.iter().map(|b| &b.verdict))
        .chain(
            report
                .independence
                .iter()
                .flatten()
                .flat_map(|p| [&p.conditional_symmetry, &p.correlation]),
        );
    for v in verdicts {
        let status = match v.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::InsufficientSample => "insufficient sample",
        };
        println!(
            "{:<40} {:>12.3e} <= {:<10.3e} n = {:<8} {status}",
            v.name, v.statistic, v.tolerance, v.sample
        );
    }
    println!("KS distance of standardized omega: {:.4}", report.ks_distance);
    auditor.finish()
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        let status = match (c.passed, c.hard) {
            (true, _) => "pass",
            (false, true) => "FAIL",
            (false, false) => "warn",
        };
        println!("{:<18} {:<22} {:>7}  {status}", c.fixture, c.name, c.checked);
        if !c.passed {
            println!("    {}", c.detail);
        }
    }
}

pub fn verify(suite: &SuiteConfig, tol: Tolerances, out: Option<&Path>, controls: bool) -> Result<(), CliError> {
    println!("{:<18} {:<22} {:>7}  status", "fixture", "check", "checked");
    let mut all = Vec::new();
    for fx in builtin_fixtures() {
        let checks = run_fixture(&fx, suite, tol)?;
        print_checks(&checks);
        all.extend(checks);
    }
    if controls {
        let checks = negative_controls(tol)?;
        print_checks(&checks);
        all.extend(checks);
    }
    if let Some(dir) = out {
        let mut file = create(dir, "verify.json")?;
        serde_json::to_writer_pretty(&mut file, &all).map_err(|e| CliError::Input(format!("output: {e}")))?;
        writeln!(file)?;
        file.flush()?;
    }
    let failed: Vec<&Check> = all.iter().filter(|c| c.hard && !c.passed).collect();
    let hard = all.iter().filter(|c| c.hard).count();
    println!("{} of {} hard checks passed", hard - failed.len(), hard);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(format!(
            "{} hard checks failed: {}",
            failed.len(),
            failed
                .iter()
                .map(|c| format!("{}/{}", c.fixture, c.name))
                .collect::<Vec<_>>()
                .join(", ")
        )))
    }
}
