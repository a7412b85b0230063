//! CSV rows for spectra, per-record observables, domains, torus samples and
//! histograms. Floats are written with 17 significant digits.

use std::io::Write;

use crate::analysis::RecordObservables;
use crate::domains::Domain;
use crate::secular::EigenvalueRecord;
use crate::torus::TorusObservables;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV writer that emits its header before the first row.
pub struct CsvSink<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W, header: &[String]) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn row(&mut self, fields: &[String]) -> csv::Result<()> {
        self.inner.write_record(fields)
    }

    pub fn rows(&mut self, rows: impl IntoIterator<Item = Vec<String>>) -> csv::Result<()> {
        for r in rows {
            self.row(&r)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn spectrum_header() -> Vec<String> {
    header(&["n", "k", "multiplicity", "class"])
}

pub fn spectrum_row(r: &EigenvalueRecord) -> Vec<String> {
    vec![
        r.index.to_string(),
        fmt_float(r.k),
        r.multiplicity.to_string(),
        r.class.as_str().to_string(),
    ]
}

pub fn observables_header() -> Vec<String> {
    header(&["n", "k", "phi", "xi", "sigma", "omega", "class"])
}

/// Surplus columns are left empty for records that are not generic.
pub fn observables_row(o: &RecordObservables) -> Vec<String> {
    let mut row = vec![o.index.to_string(), fmt_float(o.k)];
    match o.surplus {
        Some(s) => row.extend([s.phi.to_string(), s.xi.to_string(), s.sigma.to_string(), s.omega.to_string()]),
        None => row.extend(std::iter::repeat_n(String::new(), 4)),
    }
    row.push(o.class.as_str().to_string());
    row
}

pub fn domains_header() -> Vec<String> {
    header(&[
        "n",
        "k",
        "domain_id",
        "kind",
        "central_vertex",
        "boundary_size",
        "length",
        "N",
        "rho",
    ])
}

/// Rows for the star Neumann domains around interior vertices of one record.
pub fn star_domain_rows(o: &RecordObservables) -> Vec<Vec<String>> {
    o.stars
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                o.index.to_string(),
                fmt_float(o.k),
                i.to_string(),
                "star".to_string(),
                s.vertex.to_string(),
                s.arms.len().to_string(),
                fmt_float(s.arms.iter().sum()),
                s.spectral_position.to_string(),
                fmt_float(s.capacity),
            ]
        })
        .collect()
}

/// Rows for a full partition of one eigenfunction.
pub fn partition_rows(index: usize, k: f64, domains: &[Domain]) -> Vec<Vec<String>> {
    domains
        .iter()
        .map(|d| {
            vec![
                index.to_string(),
                fmt_float(k),
                d.id.to_string(),
                d.kind.as_str().to_string(),
                d.central_vertex.map(|v| v.to_string()).unwrap_or_default(),
                d.boundary_size.to_string(),
                fmt_float(d.length),
                d.count.map(|c| c.to_string()).unwrap_or_default(),
                fmt_float(d.rho),
            ]
        })
        .collect()
}

pub fn torus_header(edges: usize, interior: &[usize]) -> Vec<String> {
    let mut h: Vec<String> = (1..=edges).map(|j| format!("kappa_{j}")).collect();
    h.push("sigma".into());
    h.push("omega".into());
    h.extend(interior.iter().map(|v| format!("N_{v}")));
    h.extend(interior.iter().map(|v| format!("rho_{v}")));
    h
}

pub fn torus_row(t: &TorusObservables) -> Vec<String> {
    let mut row: Vec<String> = t.kappa.coords().iter().map(|&x| fmt_float(x)).collect();
    row.push(t.sigma.to_string());
    row.push(t.omega.to_string());
    row.extend(t.spectral_position.iter().map(|n| n.to_string()));
    row.extend(t.capacity.iter().map(|&r| fmt_float(r)));
    row
}

pub fn histogram_header() -> Vec<String> {
    header(&["value", "count", "frequency"])
}

/// `(value, count)` pairs to rows with relative frequencies.
pub fn histogram_rows(entries: &[(String, u64)]) -> Vec<Vec<String>> {
    let total: u64 = entries.iter().map(|(_, c)| c).sum();
    entries
        .iter()
        .map(|(v, c)| {
            let f = if total == 0 { 0.0 } else { *c as f64 / total as f64 };
            vec![v.clone(), c.to_string(), fmt_float(f)]
        })
        .collect()
}
