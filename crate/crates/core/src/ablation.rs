//! Performance-decline grids, difference values, retention and the
//! one-sample t-test.
//!
//! `PD = (baseline − final) / baseline × 100`. A positive PD means the
//! configuration scored below the baseline, so for higher-is-better metrics
//! the removed ingredient was helping.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Result};
use crate::granularity::{parse_expr, Modality};

/// Tolerance, in percentage points, for comparing computed and printed PDs.
pub const PD_TOLERANCE: f64 = 0.01;

pub fn pd(baseline: f64, final_value: f64) -> Result<f64> {
    if baseline == 0.0 || !baseline.is_finite() {
        return Err(domain(format!("PD undefined for baseline {baseline}")));
    }
    Ok((baseline - final_value) / baseline * 100.0)
}

pub fn difference_value(pd_a: f64, pd_b: f64) -> f64 {
    pd_a - pd_b
}

pub fn retention_rate(before: f64, after: f64) -> Result<f64> {
    if !(before > 0.0) || !before.is_finite() {
        return Err(domain(format!("retention needs a positive score before, got {before}")));
    }
    Ok(100.0 * after / before)
}

/// Two-sided critical values of Student's t, rounded up, for df 1..=30.
const T_ALPHAS: [f64; 4] = [0.05, 0.01, 0.001, 0.0001];
const T_CRITICAL: [[f64; 4]; 30] = [
    [12.7063, 63.6568, 636.6193, 6366.1977],
    [4.3027, 9.9249, 31.5991, 99.9925],
    [3.1825, 5.8410, 12.9240, 28.0002],
    [2.7765, 4.6041, 8.6104, 15.5442],
    [2.5706, 4.0322, 6.8689, 11.1778],
    [2.4470, 3.7075, 5.9589, 9.0824],
    [2.3647, 3.4995, 5.4079, 7.8846],
    [2.3061, 3.3554, 5.0414, 7.1201],
    [2.2622, 3.2499, 4.7810, 6.5937],
    [2.2282, 3.1693, 4.5869, 6.2111],
    [2.2010, 3.1059, 4.4370, 5.9212],
    [2.1789, 3.0546, 4.3178, 5.6945],
    [2.1604, 3.0123, 4.2209, 5.5126],
    [2.1448, 2.9769, 4.1405, 5.3635],
    [2.1315, 2.9468, 4.0728, 5.2391],
    [2.1200, 2.9208, 4.0150, 5.1339],
    [2.1099, 2.8983, 3.9652, 5.0438],
    [2.1010, 2.8785, 3.9217, 4.9658],
    [2.0931, 2.8610, 3.8835, 4.8975],
    [2.0860, 2.8454, 3.8496, 4.8374],
    [2.0797, 2.8314, 3.8193, 4.7839],
    [2.0739, 2.8188, 3.7922, 4.7362],
    [2.0687, 2.8074, 3.7677, 4.6932],
    [2.0639, 2.7970, 3.7454, 4.6544],
    [2.0596, 2.7875, 3.7252, 4.6192],
    [2.0556, 2.7788, 3.7067, 4.5870],
    [2.0519, 2.7707, 3.6896, 4.5576],
    [2.0485, 2.7633, 3.6740, 4.5305],
    [2.0453, 2.7564, 3.6595, 4.5056],
    [2.0423, 2.7500, 3.6460, 4.4825],
];

/// Smallest tabulated α whose critical value `|t|` exceeds. Degrees of
/// freedom above 30 use the df = 30 row, which overstates the bound.
pub fn p_bound(t: f64, df: usize) -> String {
    if df == 0 || !t.is_finite() {
        return "undefined".into();
    }
    let row = &T_CRITICAL[df.min(30) - 1];
    let mut bound = None;
    for (alpha, crit) in T_ALPHAS.iter().zip(row) {
        if t.abs() > *crit {
            bound = Some(*alpha);
        }
    }
    match bound {
        Some(a) => format!("< {a}"),
        None => "≥ 0.05".into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub n: usize,
    pub mean: f64,
    pub sample_sd: f64,
    pub t: f64,
    pub df: usize,
    pub p_bound: String,
}

pub fn one_sample_t(scores: &[f64], mu0: f64) -> Result<TTestResult> {
    let n = scores.len();
    if n < 2 {
        return Err(domain(format!("t-test needs at least 2 scores, got {n}")));
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let ss: f64 = scores.iter().map(|x| (x - mean).powi(2)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    if !(sd > 0.0) {
        return Err(domain(format!("zero variance (mean = {mean})")));
    }
    let t = (mean - mu0) / (sd / (n as f64).sqrt());
    Ok(TTestResult { n, mean, sample_sd: sd, t, df: n - 1, p_bound: p_bound(t, n - 1) })
}

/// How a modality enters a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Marker {
    /// The only term of a single-term configuration.
    Present,
    /// Fused with other modalities inside one sample.
    Fused,
    /// Added as its own sample set.
    Mixed,
    Absent,
}

impl Marker {
    pub fn glyph(self) -> &'static str {
        match self {
            Marker::Present => "✓",
            Marker::Fused => "*",
            Marker::Mixed => "+",
            Marker::Absent => "×",
        }
    }
}

/// Markers in S, M, V order. Symbols that are not expressions (the base
/// model) mark everything absent.
pub fn config_markers(symbol: &str) -> [Marker; 3] {
    let mut out = [Marker::Absent; 3];
    let Ok(expr) = parse_expr(symbol) else { return out };
    let multi_term = expr.terms().len() > 1;
    for term in expr.terms() {
        for m in term.modalities() {
            let i = Modality::ALL.iter().position(|x| x == m).expect("modality");
            out[i] = if term.modalities().len() > 1 {
                if multi_term { Marker::Fused } else { Marker::Present }
            } else if multi_term {
                Marker::Mixed
            } else {
                Marker::Present
            };
        }
    }
    out
}

fn same_config(a: &str, b: &str) -> bool {
    match (parse_expr(a), parse_expr(b)) {
        (Ok(x), Ok(y)) => x.normalized() == y.normalized(),
        _ => a.trim() == b.trim(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub test_set: String,
    pub exp_no: Option<u32>,
    pub dataset: String,
    pub symbol: String,
    pub values: Vec<f64>,
    /// Printed PDs, when the table carries them.
    pub reported_pd: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub metrics: Vec<String>,
    pub rows: Vec<MetricRow>,
}

const KEY_COLUMNS: [&str; 4] = ["test_set", "exp_no", "dataset", "symbol"];
const PD_SUFFIX: &str = " PD";

fn parse_cell(text: &str, line: usize, column: &str) -> Result<Option<f64>> {
    let t = text.trim().trim_end_matches('%').trim();
    if t.is_empty() {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|_| crate::Error::Format { line, message: format!("column {column:?}: {text:?} is not a number") })
}

impl MetricTable {
    /// CSV with `test_set`, optional `exp_no`, `dataset`, `symbol`, one column
    /// per metric and optionally `<metric> PD` columns with printed PDs.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let test_set = col("test_set").ok_or_else(|| usage("metric table needs a test_set column"))?;
        let symbol = col("symbol").ok_or_else(|| usage("metric table needs a symbol column"))?;
        let dataset = col("dataset");
        let exp_no = col("exp_no");
        let metrics: Vec<String> = headers
            .iter()
            .filter(|h| !KEY_COLUMNS.contains(h) && !h.ends_with(PD_SUFFIX))
            .map(str::to_owned)
            .collect();
        if metrics.is_empty() {
            return Err(usage("metric table has no metric columns"));
        }
        let metric_cols: Vec<usize> = metrics.iter().map(|m| col(m).expect("header")).collect();
        let pd_cols: Vec<Option<usize>> = metrics.iter().map(|m| col(&format!("{m}{PD_SUFFIX}"))).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let mut values = Vec::with_capacity(metrics.len());
            for (m, &c) in metrics.iter().zip(&metric_cols) {
                let v = parse_cell(rec.get(c).unwrap_or(""), line, m)?
                    .ok_or_else(|| crate::Error::Format { line, message: format!("missing value for {m:?}") })?;
                values.push(v);
            }
            let mut reported_pd = Vec::with_capacity(metrics.len());
            for (m, c) in metrics.iter().zip(&pd_cols) {
                reported_pd.push(match c {
                    Some(c) => parse_cell(rec.get(*c).unwrap_or(""), line, m)?,
                    None => None,
                });
            }
            let exp = match exp_no.and_then(|c| rec.get(c)).map(str::trim).filter(|s| !s.is_empty()) {
                Some(s) => Some(s.parse::<u32>().map_err(|_| crate::Error::Format {
                    line,
                    message: format!("exp_no {s:?} is not an integer"),
                })?),
                None => None,
            };
            rows.push(MetricRow {
                test_set: rec.get(test_set).unwrap_or("").to_owned(),
                exp_no: exp,
                dataset: dataset.and_then(|c| rec.get(c)).unwrap_or("").to_owned(),
                symbol: rec.get(symbol).unwrap_or("").to_owned(),
                values,
                reported_pd,
            });
        }
        Ok(Self { metrics, rows })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PdFlag {
    /// The printed PD has the right magnitude and the wrong sign.
    SignTypo,
    /// The printed PD disagrees with the formula.
    Mismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub metric: String,
    pub value: f64,
    /// `None` when the baseline value is zero.
    pub pd: Option<f64>,
    /// `final / baseline`.
    pub ratio: Option<f64>,
    /// `(baseline − final) / baseline`.
    pub reduction: Option<f64>,
    pub reported_pd: Option<f64>,
    pub flag: Option<PdFlag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub test_set: String,
    pub exp_no: Option<u32>,
    pub dataset: String,
    pub symbol: String,
    pub config: [Marker; 3],
    pub is_baseline: bool,
    pub cells: Vec<Cell>,
}

impl AblationRow {
    pub fn cell(&self, metric: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.metric == metric)
    }

    pub fn pd(&self, metric: &str) -> Option<f64> {
        self.cell(metric).and_then(|c| c.pd)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub metrics: Vec<String>,
    pub baseline: String,
    pub rows: Vec<AblationRow>,
}

fn flag_for(computed: f64, reported: f64, tol: f64) -> Option<PdFlag> {
    if (computed - reported).abs() <= tol {
        None
    } else if (computed + reported).abs() <= tol {
        Some(PdFlag::SignTypo)
    } else {
        Some(PdFlag::Mismatch)
    }
}

/// PDs of every row against its test set's baseline row (the first row whose
/// symbol denotes the same configuration as `baseline`).
pub fn build_grid(table: &MetricTable, baseline: &str, tolerance: f64) -> Result<Grid> {
    let mut baselines: BTreeMap<&str, &MetricRow> = BTreeMap::new();
    for row in &table.rows {
        if same_config(&row.symbol, baseline) {
            baselines.entry(row.test_set.as_str()).or_insert(row);
        }
    }
    let mut rows = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let base = baselines
            .get(row.test_set.as_str())
            .ok_or_else(|| usage(format!("test set {:?} has no baseline row {baseline:?}", row.test_set)))?;
        let is_baseline = std::ptr::eq(*base, row);
        let cells = table
            .metrics
            .iter()
            .enumerate()
            .map(|(i, metric)| {
                let (b, v) = (base.values[i], row.values[i]);
                let p = pd(b, v).ok();
                let reported = row.reported_pd[i];
                Cell {
                    metric: metric.clone(),
                    value: v,
                    pd: p,
                    ratio: (b != 0.0).then(|| v / b),
                    reduction: p.map(|p| p / 100.0),
                    reported_pd: reported,
                    flag: match (p, reported) {
                        (Some(p), Some(r)) => flag_for(p, r, tolerance),
                        _ => None,
                    },
                }
            })
            .collect();
        rows.push(AblationRow {
            test_set: row.test_set.clone(),
            exp_no: row.exp_no,
            dataset: row.dataset.clone(),
            symbol: row.symbol.clone(),
            config: config_markers(&row.symbol),
            is_baseline,
            cells,
        });
    }
    Ok(Grid { metrics: table.metrics.clone(), baseline: baseline.to_owned(), rows })
}

impl Grid {
    pub fn row(&self, test_set: &str, exp_no: u32) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.test_set == test_set && r.exp_no == Some(exp_no))
    }

    pub fn row_by_symbol(&self, test_set: &str, symbol: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.test_set == test_set && same_config(&r.symbol, symbol))
    }

    pub fn flagged(&self) -> Vec<(&AblationRow, &Cell)> {
        self.rows.iter().flat_map(|r| r.cells.iter().filter(|c| c.flag.is_some()).map(move |c| (r, c))).collect()
    }

    /// One line per (row, metric).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "test_set", "exp_no", "dataset", "symbol", "S", "M", "V", "metric", "value", "pd", "ratio", "reduction",
            "reported_pd", "flag",
        ])?;
        let opt = |x: Option<f64>, prec: usize| x.map_or(String::new(), |v| format!("{v:.prec$}"));
        for r in &self.rows {
            for c in &r.cells {
                w.write_record([
                    r.test_set.clone(),
                    r.exp_no.map_or(String::new(), |e| e.to_string()),
                    r.dataset.clone(),
                    r.symbol.clone(),
                    r.config[0].glyph().to_owned(),
                    r.config[1].glyph().to_owned(),
                    r.config[2].glyph().to_owned(),
                    c.metric.clone(),
                    c.value.to_string(),
                    opt(c.pd, 2),
                    opt(c.ratio, 4),
                    opt(c.reduction, 4),
                    c.reported_pd.map_or(String::new(), |v| v.to_string()),
                    c.flag.map_or(String::new(), |f| format!("{f:?}")),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text table in input row order. Flagged cells carry a `!`.
    pub fn render(&self) -> String {
        let mut head = vec!["Test Set".to_owned(), "Exp".into(), "S".into(), "M".into(), "V".into()];
        for m in &self.metrics {
            head.push(m.clone());
            head.push("PD".into());
        }
        let mut table = vec![head];
        for r in &self.rows {
            let mut line = vec![
                r.test_set.clone(),
                r.exp_no.map_or_else(|| r.symbol.clone(), |e| e.to_string()),
                r.config[0].glyph().into(),
                r.config[1].glyph().into(),
                r.config[2].glyph().into(),
            ];
            for c in &r.cells {
                line.push(format!("{}", c.value));
                let mark = if c.flag.is_some() { "!" } else { "" };
                line.push(c.pd.map_or("undefined".into(), |p| format!("{p:.2}%{mark}")));
            }
            table.push(line);
        }
        let widths: Vec<usize> =
            (0..table[0].len()).map(|i| table.iter().map(|l| l[i].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for line in &table {
            let cells: Vec<String> =
                line.iter().zip(&widths).map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}
