//! Panels of returns, expert classifications and the synthetic factor model.
//!
//! A [`ReturnsPanel`] stores `n` elements observed at `T` synchronous time
//! records, row-major (one row per element). Panels are validated on
//! construction and immutable afterwards.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk layout of a panel file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PanelFormat {
    /// `date,A,B,...` header, one row per time record.
    #[default]
    WideCsv,
    /// `time,element,value` rows; the panel must be complete.
    LongCsv,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnsPanel {
    elements: Vec<String>,
    time_labels: Option<Vec<String>>,
    n_times: usize,
    values: Vec<f64>,
}

impl ReturnsPanel {
    /// Builds a panel from one row of observations per element.
    pub fn new(
        elements: Vec<String>,
        rows: Vec<Vec<f64>>,
        time_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if elements.len() != rows.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} element identifiers for {} rows",
                elements.len(),
                rows.len()
            )));
        }
        let n_times = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_times) {
            return Err(Error::ShapeMismatch("rows have unequal lengths".into()));
        }
        let values = rows.into_iter().flatten().collect();
        Self::from_flat(elements, values, n_times, time_labels)
    }

    /// Builds a panel from a row-major `n × n_times` buffer.
    pub fn from_flat(
        elements: Vec<String>,
        values: Vec<f64>,
        n_times: usize,
        time_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let panel = ReturnsPanel {
            elements,
            time_labels,
            n_times,
            values,
        };
        panel.validate()?;
        Ok(panel)
    }

    #[cfg(test)]
    pub(crate) fn new_unchecked(elements: Vec<String>, values: Vec<f64>, n_times: usize) -> Self {
        ReturnsPanel {
            elements,
            time_labels: None,
            n_times,
            values,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.elements.len();
        if n < 2 {
            return Err(Error::InvalidPanel(format!(
                "need at least 2 elements, got {n}"
            )));
        }
        if self.n_times < 3 {
            return Err(Error::InvalidPanel(format!(
                "need at least 3 observations, got {}",
                self.n_times
            )));
        }
        if self.values.len() != n * self.n_times {
            return Err(Error::ShapeMismatch(format!(
                "buffer of length {} for {n} x {} panel",
                self.values.len(),
                self.n_times
            )));
        }
        if let Some(labels) = &self.time_labels {
            if labels.len() != self.n_times {
                return Err(Error::ShapeMismatch(format!(
                    "{} time labels for {} observations",
                    labels.len(),
                    self.n_times
                )));
            }
        }
        let mut seen = HashSet::with_capacity(n);
        for e in &self.elements {
            if !seen.insert(e.as_str()) {
                return Err(Error::DuplicateElement(e.clone()));
            }
        }
        for (i, row) in self.rows().enumerate() {
            if let Some(t) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: t, col: i + 1 });
            }
        }
        for (i, row) in self.rows().enumerate() {
            if is_constant(row) {
                return Err(Error::ZeroVariance(self.elements[i].clone()));
            }
        }
        Ok(())
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn time_labels(&self) -> Option<&[String]> {
        self.time_labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_times..(i + 1) * self.n_times]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_times.max(1))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values[i * self.n_times + t]
    }

    pub fn index_of(&self, element: &str) -> Option<usize> {
        self.elements.iter().position(|e| e == element)
    }
}

/// True when every value equals the first one (zero sample variance).
pub(crate) fn is_constant(xs: &[f64]) -> bool {
    match xs.split_first() {
        Some((first, rest)) => rest.iter().all(|v| v == first),
        None => true,
    }
}

/// Reads a panel file.
pub fn load_panel(path: impl AsRef<Path>, format: PanelFormat) -> Result<ReturnsPanel> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_panel(&text, format)
}

pub fn parse_panel(text: &str, format: PanelFormat) -> Result<ReturnsPanel> {
    match format {
        PanelFormat::WideCsv => parse_wide(text),
        PanelFormat::LongCsv => parse_long(text),
    }
}

fn parse_value(cell: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number {cell:?} at (row {row}, col {col})")))?;
    if !v.is_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(v)
}

fn parse_wide(text: &str) -> Result<ReturnsPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Parse(
            "header needs a time column and element columns".into(),
        ));
    }
    let elements: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let n = elements.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut times = Vec::new();
    for (t, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != n + 1 {
            return Err(Error::Parse(format!(
                "row {t} has {} fields, expected {}",
                record.len(),
                n + 1
            )));
        }
        times.push(record[0].to_owned());
        for (j, cell) in record.iter().skip(1).enumerate() {
            columns[j].push(parse_value(cell, t, j + 1)?);
        }
    }
    ReturnsPanel::new(elements, columns, Some(times))
}

fn parse_long(text: &str) -> Result<ReturnsPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut elements: Vec<String> = Vec::new();
    let mut element_idx: HashMap<String, usize> = HashMap::new();
    let mut times: Vec<String> = Vec::new();
    let mut time_idx: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), f64> = HashMap::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Parse(format!("row {r} must have 3 fields")));
        }
        let t = *time_idx.entry(record[0].to_owned()).or_insert_with(|| {
            times.push(record[0].to_owned());
            times.len() - 1
        });
        let e = *element_idx.entry(record[1].to_owned()).or_insert_with(|| {
            elements.push(record[1].to_owned());
            elements.len() - 1
        });
        let v = parse_value(&record[2], t, e + 1)?;
        if cells.insert((e, t), v).is_some() {
            return Err(Error::Parse(format!(
                "duplicate observation for element {:?} at time {:?}",
                &record[1], &record[0]
            )));
        }
    }
    let mut rows = vec![vec![0.0; times.len()]; elements.len()];
    for (e, row) in rows.iter_mut().enumerate() {
        for (t, slot) in row.iter_mut().enumerate() {
            *slot = *cells.get(&(e, t)).ok_or_else(|| {
                Error::Parse(format!(
                    "missing observation for element {:?} at time {:?}",
                    elements[e], times[t]
                ))
            })?;
        }
    }
    ReturnsPanel::new(elements, rows, Some(times))
}

/// Writes the canonical wide CSV form. Values use the shortest decimal
/// representation that parses back to the same `f64`.
pub fn write_panel(panel: &ReturnsPanel, mut out: impl Write) -> std::io::Result<()> {
    let mut line = String::from("date");
    for e in panel.elements() {
        line.push(',');
        line.push_str(e);
    }
    writeln!(out, "{line}")?;
    for t in 0..panel.n_times() {
        line.clear();
        match panel.time_labels() {
            Some(labels) => line.push_str(&labels[t]),
            None => line.push_str(&t.to_string()),
        }
        for i in 0..panel.n_elements() {
            line.push(',');
            line.push_str(&panel.get(i, t).to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Log returns `ln(close / open)` element-wise.
pub fn returns_from_prices(open: &ReturnsPanel, close: &ReturnsPanel) -> Result<ReturnsPanel> {
    if open.elements() != close.elements() {
        return Err(Error::ShapeMismatch(
            "open and close element labels differ".into(),
        ));
    }
    if open.n_times() != close.n_times() {
        return Err(Error::ShapeMismatch(format!(
            "open has {} records, close has {}",
            open.n_times(),
            close.n_times()
        )));
    }
    if open.time_labels().is_some()
        && close.time_labels().is_some()
        && open.time_labels() != close.time_labels()
    {
        return Err(Error::ShapeMismatch(
            "open and close time labels differ".into(),
        ));
    }
    let t_len = open.n_times();
    let mut values = Vec::with_capacity(open.values().len());
    for (k, (&o, &c)) in open.values().iter().zip(close.values()).enumerate() {
        if o <= 0.0 || c <= 0.0 {
            return Err(Error::NonPositivePrice {
                element: open.elements()[k / t_len].clone(),
                t: k % t_len,
            });
        }
        values.push((c / o).ln());
    }
    ReturnsPanel::from_flat(
        open.elements().to_vec(),
        values,
        t_len,
        open.time_labels().map(<[String]>::to_vec),
    )
}

/// Granularity of the expert classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectorLevel {
    Sector,
    Subsector,
}

impl std::fmt::Display for SectorLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SectorLevel::Sector => "sector",
            SectorLevel::Subsector => "subsector",
        })
    }
}

/// Expert classification: element → (sector, subsector).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SectorMap {
    assignments: BTreeMap<String, (String, String)>,
}

impl SectorMap {
    pub fn new(entries: impl IntoIterator<Item = (String, String, String)>) -> Result<Self> {
        let mut assignments = BTreeMap::new();
        let mut parent: HashMap<String, String> = HashMap::new();
        for (element, sector, subsector) in entries {
            if let Some(prev) = parent.get(&subsector) {
                if *prev != sector {
                    return Err(Error::InvalidSectorMap(format!(
                        "subsector {subsector:?} belongs to both {prev:?} and {sector:?}"
                    )));
                }
            } else {
                parent.insert(subsector.clone(), sector.clone());
            }
            if assignments
                .insert(element.clone(), (sector, subsector))
                .is_some()
            {
                return Err(Error::InvalidSectorMap(format!(
                    "element {element:?} listed twice"
                )));
            }
        }
        Ok(SectorMap { assignments })
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn get(&self, element: &str) -> Option<(&str, &str)> {
        self.assignments
            .get(element)
            .map(|(s, ss)| (s.as_str(), ss.as_str()))
    }

    pub fn label(&self, element: &str, level: SectorLevel) -> Option<&str> {
        self.get(element).map(|(s, ss)| match level {
            SectorLevel::Sector => s,
            SectorLevel::Subsector => ss,
        })
    }

    /// Checks that every panel element is classified.
    pub fn check_covers(&self, elements: &[String]) -> Result<()> {
        match elements.iter().find(|e| !self.assignments.contains_key(*e)) {
            Some(missing) => Err(Error::InvalidSectorMap(format!(
                "element {missing:?} has no classification"
            ))),
            None => Ok(()),
        }
    }

    /// Integer block labels for `elements` at the requested level, numbered
    /// in order of first appearance.
    pub fn labels_for(&self, elements: &[String], level: SectorLevel) -> Result<Vec<usize>> {
        self.check_covers(elements)?;
        let mut ids: HashMap<&str, usize> = HashMap::new();
        Ok(elements
            .iter()
            .map(|e| {
                let l = self.label(e, level).expect("checked above");
                let next = ids.len();
                *ids.entry(l).or_insert(next)
            })
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.assignments
            .iter()
            .map(|(e, (s, ss))| (e.as_str(), s.as_str(), ss.as_str()))
    }
}

pub fn load_sectors(path: impl AsRef<Path>) -> Result<SectorMap> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_sectors(&text)
}

pub fn parse_sectors(text: &str) -> Result<SectorMap> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let expected = ["element", "sector", "subsector"];
    if header.len() != 3 || header.iter().zip(expected).any(|(h, e)| h.trim() != e) {
        return Err(Error::Parse(
            "sector file header must be element,sector,subsector".into(),
        ));
    }
    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Parse("sector rows need 3 fields".into()));
        }
        entries.push((
            record[0].to_owned(),
            record[1].to_owned(),
            record[2].to_owned(),
        ));
    }
    SectorMap::new(entries)
}

pub fn write_sectors(map: &SectorMap, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "element,sector,subsector")?;
    for (e, s, ss) in map.iter() {
        writeln!(out, "{e},{s},{ss}")?;
    }
    Ok(())
}

/// Parameters of the one-market, one-sector-factor Gaussian model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_elements: usize,
    pub n_sectors: usize,
    pub n_times: usize,
    pub market_loading: f64,
    pub sector_loading: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// The desk-scale reference configuration used throughout the tests.
    pub fn reference(seed: u64) -> Self {
        SynthSpec {
            n_elements: 50,
            n_sectors: 5,
            n_times: 250,
            market_loading: 0.3,
            sector_loading: 0.5,
            noise_scale: 0.01,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSynthSpec(msg));
        if self.n_elements < 2 {
            return bad(format!("n_elements must be >= 2, got {}", self.n_elements));
        }
        if self.n_sectors < 1 || self.n_sectors > self.n_elements {
            return bad(format!(
                "n_sectors must be in [1, n_elements], got {}",
                self.n_sectors
            ));
        }
        if self.n_times < 3 {
            return bad(format!("T must be >= 3, got {}", self.n_times));
        }
        let m = self.market_loading;
        let s = self.sector_loading;
        if !(0.0..1.0).contains(&m) {
            return bad(format!("market loading {m} outside [0, 1)"));
        }
        if !(0.0..1.0).contains(&s) {
            return bad(format!("sector loading {s} outside [0, 1)"));
        }
        if m * m + s * s >= 1.0 {
            return bad(format!("m^2 + s^2 = {} must be < 1", m * m + s * s));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return bad(format!("noise scale {} must be positive", self.noise_scale));
        }
        Ok(())
    }

    pub fn sector_of(&self, element: usize) -> usize {
        element % self.n_sectors
    }
}

/// Draws a panel from the factor model together with its planted sectors.
///
/// Elements are named `E000, E001, ...` and assigned round-robin to
/// sectors `S0, S1, ...`; subsector equals sector.
pub fn synthesize_panel(spec: &SynthSpec) -> Result<(ReturnsPanel, SectorMap)> {
    spec.validate()?;
    let n = spec.n_elements;
    let t_len = spec.n_times;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw =
        |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let market = draw(t_len);
    let sectors = draw(spec.n_sectors * t_len);
    let noise = draw(n * t_len);

    let m = spec.market_loading;
    let s = spec.sector_loading;
    let idio = (1.0 - m * m - s * s).sqrt();
    let mut values = Vec::with_capacity(n * t_len);
    for i in 0..n {
        let g = &sectors[spec.sector_of(i) * t_len..][..t_len];
        let eps = &noise[i * t_len..][..t_len];
        for t in 0..t_len {
            values.push(spec.noise_scale * (m * market[t] + s * g[t] + idio * eps[t]));
        }
    }

    let width = (n - 1).to_string().len().max(3);
    let elements: Vec<String> = (0..n).map(|i| format!("E{i:0width$}")).collect();
    let times = (0..t_len).map(|t| t.to_string()).collect();
    let panel = ReturnsPanel::from_flat(elements.clone(), values, t_len, Some(times))?;
    let sector_map = SectorMap::new(elements.into_iter().enumerate().map(|(i, e)| {
        let label = format!("S{}", spec.sector_of(i));
        (e, label.clone(), label)
    }))?;
    Ok((panel, sector_map))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson2(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn wide_csv_reads_back() {
        let text = "date,A,B\n1,0.1,0.2\n2,0.3,-0.1\n3,0.0,0.5\n4,-0.2,0.1\n5,0.4,0.0\n";
        let p = parse_panel(text, PanelFormat::WideCsv).unwrap();
        assert_eq!(p.n_elements(), 2);
        assert_eq!(p.n_times(), 5);
        assert_eq!(p.elements(), ["A", "B"]);
        assert_eq!(p.row(1), [0.2, -0.1, 0.5, 0.1, 0.0]);
        assert_eq!(p.time_labels().unwrap()[4], "5");
    }

    #[test]
    fn nan_cell_is_rejected() {
        let text = "date,A,B\n1,0.1,0.2\n2,NaN,-0.1\n3,0.0,0.5\n";
        let err = parse_panel(text, PanelFormat::WideCsv).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 1 }), "{err}");
        assert!(err.to_string().starts_with("non-finite value at"));
    }

    #[test]
    fn constant_column_is_rejected() {
        let text = "date,A,B\n1,0.1,0.2\n2,0.1,-0.1\n3,0.1,0.5\n";
        let err = parse_panel(text, PanelFormat::WideCsv).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(ref e) if e == "A"));
        assert!(err.to_string().contains("zero variance element"));
    }

    #[test]
    fn duplicate_identifier_is_rejected() {
        let text = "date,A,A\n1,0.1,0.2\n2,0.2,-0.1\n3,0.3,0.5\n";
        assert!(matches!(
            parse_panel(text, PanelFormat::WideCsv),
            Err(Error::DuplicateElement(_))
        ));
    }

    #[test]
    fn short_panels_are_rejected() {
        let text = "date,A,B\n1,0.1,0.2\n2,0.2,-0.1\n";
        assert!(matches!(
            parse_panel(text, PanelFormat::WideCsv),
            Err(Error::InvalidPanel(_))
        ));
        let text = "date,A\n1,0.1\n2,0.2\n3,0.3\n";
        assert!(matches!(
            parse_panel(text, PanelFormat::WideCsv),
            Err(Error::InvalidPanel(_))
        ));
    }

    #[test]
    fn long_csv_matches_wide() {
        let wide = "date,A,B\nd1,1,4\nd2,2,3\nd3,3,5\n";
        let long = "time,element,value\nd1,A,1\nd1,B,4\nd2,B,3\nd2,A,2\nd3,A,3\nd3,B,5\n";
        assert_eq!(
            parse_panel(wide, PanelFormat::WideCsv).unwrap(),
            parse_panel(long, PanelFormat::LongCsv).unwrap()
        );
        let incomplete = "time,element,value\nd1,A,1\nd1,B,4\nd2,A,2\nd3,A,3\nd3,B,5\n";
        assert!(parse_panel(incomplete, PanelFormat::LongCsv).is_err());
    }

    #[test]
    fn canonical_file_round_trips() {
        let text = "date,A,B,C\n2001-01-02,0.1,-0.25,3\n2001-01-03,1e-7,0.5,0.125\n2001-01-04,-0.3,0,7.5\n";
        let p = parse_panel(text, PanelFormat::WideCsv).unwrap();
        let mut out = Vec::new();
        write_panel(&p, &mut out).unwrap();
        let canon = String::from_utf8(out).unwrap();
        let p2 = parse_panel(&canon, PanelFormat::WideCsv).unwrap();
        assert_eq!(p, p2);
        let mut out2 = Vec::new();
        write_panel(&p2, &mut out2).unwrap();
        assert_eq!(canon.as_bytes(), out2.as_slice());
    }

    fn panel(rows: Vec<Vec<f64>>) -> ReturnsPanel {
        let names = (0..rows.len()).map(|i| format!("P{i}")).collect();
        ReturnsPanel::new(names, rows, None).unwrap()
    }

    #[test]
    fn log_returns_from_prices() {
        let e = std::f64::consts::E;
        let open = panel(vec![vec![100.0, 100.0, 200.0], vec![100.0, 100.0, 50.0]]);
        let close = panel(vec![vec![100.0, 100.0 * e, 110.0], vec![110.0, 90.0, 50.0]]);
        let r = returns_from_prices(&open, &close).unwrap();
        assert_eq!(r.get(0, 0), 0.0);
        assert!((r.get(0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(r.get(1, 0), 1.1f64.ln());
        assert_eq!(r.get(1, 1), 0.9f64.ln());
        assert_eq!(r.get(0, 2), 0.55f64.ln());
    }

    #[test]
    fn prices_must_be_positive_and_aligned() {
        let open = panel(vec![vec![1.0, 2.0, 3.0], vec![1.0, -2.0, 3.0]]);
        let close = panel(vec![vec![1.0, 2.0, 4.0], vec![1.0, 2.0, 4.0]]);
        assert!(matches!(
            returns_from_prices(&open, &close),
            Err(Error::NonPositivePrice { t: 1, .. })
        ));
        let short = panel(vec![vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 5.0]]);
        assert!(matches!(
            returns_from_prices(&short, &close),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn sector_map_parsing_and_nesting() {
        let ok = "element,sector,subsector\nA,Tech,Chips\nB,Tech,Software\nC,Energy,Oil\n";
        let map = parse_sectors(ok).unwrap();
        assert_eq!(map.len(), 3);
        assert_eq!(map.label("B", SectorLevel::Subsector), Some("Software"));
        let names: Vec<String> = ["C", "A", "B"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            map.labels_for(&names, SectorLevel::Sector).unwrap(),
            [0, 1, 1]
        );
        assert_eq!(
            map.labels_for(&names, SectorLevel::Subsector).unwrap(),
            [0, 1, 2]
        );

        let bad = "element,sector,subsector\nA,Tech,Chips\nB,Energy,Chips\n";
        assert!(matches!(
            parse_sectors(bad),
            Err(Error::InvalidSectorMap(_))
        ));
        let dup = "element,sector,subsector\nA,Tech,Chips\nA,Tech,Chips\n";
        assert!(parse_sectors(dup).is_err());
        let no_header = "A,Tech,Chips\n";
        assert!(parse_sectors(no_header).is_err());
        let missing: Vec<String> = vec!["Z".into()];
        assert!(map.check_covers(&missing).is_err());
    }

    #[test]
    fn synth_rejects_bad_loadings() {
        let mut spec = SynthSpec::reference(1);
        spec.market_loading = 0.8;
        spec.sector_loading = 0.7;
        assert!(matches!(
            synthesize_panel(&spec),
            Err(Error::InvalidSynthSpec(_))
        ));
        spec.market_loading = 1.0;
        spec.sector_loading = 0.0;
        assert!(synthesize_panel(&spec).is_err());
        let mut spec = SynthSpec::reference(1);
        spec.noise_scale = 0.0;
        assert!(synthesize_panel(&spec).is_err());
    }

    #[test]
    fn synth_is_deterministic_and_round_robin() {
        let spec = SynthSpec::reference(42);
        let (a, sa) = synthesize_panel(&spec).unwrap();
        let (b, sb) = synthesize_panel(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(sa.label("E000", SectorLevel::Sector), Some("S0"));
        assert_eq!(sa.label("E007", SectorLevel::Sector), Some("S2"));
        assert_eq!(sa.label("E007", SectorLevel::Subsector), Some("S2"));
        let (c, _) = synthesize_panel(&SynthSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_pure_noise_is_uncorrelated() {
        let spec = SynthSpec {
            n_elements: 6,
            n_sectors: 2,
            n_times: 100,
            market_loading: 0.0,
            sector_loading: 0.0,
            noise_scale: 1.0,
            seed: 42,
        };
        let (p, _) = synthesize_panel(&spec).unwrap();
        let mut sum = 0.0;
        let mut count = 0.0;
        for i in 0..6 {
            for j in i + 1..6 {
                let r = pearson2(p.row(i), p.row(j));
                // sampling sd is ~0.1 at T = 100
                assert!(r.abs() < 0.4, "rho({i},{j}) = {r}");
                sum += r;
                count += 1.0;
            }
        }
        assert!((sum / count).abs() < 0.1);
    }

    #[test]
    fn synth_sector_correlation_matches_factor_algebra() {
        // within-sector population correlation is s^2 = 0.64, cross-sector 0
        let spec = SynthSpec {
            n_elements: 4,
            n_sectors: 2,
            n_times: 100_000,
            market_loading: 0.0,
            sector_loading: 0.8,
            noise_scale: 1.0,
            seed: 3,
        };
        let (p, _) = synthesize_panel(&spec).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                let r = pearson2(p.row(i), p.row(j));
                let expected = if i % 2 == j % 2 { 0.64 } else { 0.0 };
                assert!((r - expected).abs() < 0.015, "rho({i},{j}) = {r}");
            }
        }
    }

    #[test]
    fn synth_within_sector_exceeds_cross_sector() {
        for seed in 0..20 {
            let spec = SynthSpec {
                n_elements: 8,
                n_sectors: 2,
                n_times: 10_000,
                market_loading: 0.0,
                sector_loading: 0.3,
                noise_scale: 1.0,
                seed,
            };
            let (p, _) = synthesize_panel(&spec).unwrap();
            let (mut within, mut nw, mut cross, mut nc) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..8 {
                for j in i + 1..8 {
                    let r = pearson2(p.row(i), p.row(j));
                    if i % 2 == j % 2 {
                        within += r;
                        nw += 1.0;
                    } else {
                        cross += r;
                        nc += 1.0;
                    }
                }
            }
            assert!(within / nw > cross / nc, "seed {seed}");
        }
    }
}
