//! Price-panel loading, missing-value repair, log-returns, and
//! standardization.
//!
//! Raw files arrive as delimited text in either a wide layout (one date
//! column plus one price column per series) or a long layout
//! (date, label, price). Series are aligned on the intersection of their
//! observed date ranges; gaps inside that window are repaired by carrying
//! the last observed value forward (leading gaps borrow the first
//! observation backwards), and every repair is logged.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// File layout of a raw price table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// `date,<label1>,<label2>,...` — one row per date, empty cell = missing.
    Wide,
    /// `date,label,price` — one row per observation.
    Long,
}

impl std::str::FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wide" => Ok(Layout::Wide),
            "long" => Ok(Layout::Long),
            other => Err(Error::InvalidParameter(format!(
                "unknown layout {other:?} (expected wide or long)"
            ))),
        }
    }
}

/// How a missing cell was repaired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillMethod {
    /// Carried the last earlier observation forward.
    Forward,
    /// Borrowed the first later observation (only for leading gaps).
    Backward,
}

/// One repaired cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRecord {
    pub label: String,
    pub date: NaiveDate,
    pub method: FillMethod,
}

/// Aligned panel of strictly positive prices.
#[derive(Debug, Clone)]
pub struct PricePanel {
    /// Strictly increasing, no duplicates.
    pub dates: Vec<NaiveDate>,
    /// One unique label per column.
    pub labels: Vec<String>,
    /// Row t, column i = price of series i at dates[t].
    pub prices: DMatrix<f64>,
    /// Every cell that was repaired during alignment.
    pub fill_log: Vec<FillRecord>,
}

impl PricePanel {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.labels.len()
    }

    /// Cross-sectional average price per date.
    pub fn average_prices(&self) -> Vec<f64> {
        let n = self.n_series() as f64;
        (0..self.n_dates())
            .map(|t| self.prices.row(t).sum() / n)
            .collect()
    }
}

/// One return clipped to zero for being abnormally large.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub label: String,
    pub date: NaiveDate,
    /// The return value before clipping.
    pub original: f64,
}

/// Log-returns of a price panel over a fixed horizon, with the per-series
/// moments needed to standardize them.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    /// Date of each return row (the later of the two prices).
    pub dates: Vec<NaiveDate>,
    pub labels: Vec<String>,
    /// Row t, column i = ln P_i(dates[t]) - ln P_i(dates[t] - delta_t rows).
    pub returns: DMatrix<f64>,
    /// Return horizon in rows.
    pub delta_t: usize,
    /// Per-series time-average return (after clipping).
    pub means: Vec<f64>,
    /// Per-series population standard deviation (after clipping).
    pub stddevs: Vec<f64>,
    /// Cells zeroed for exceeding the clip threshold.
    pub clipped: Vec<ClipRecord>,
}

impl ReturnPanel {
    pub fn n_samples(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.labels.len()
    }

    /// Standardized view: each column shifted to mean 0 and scaled to
    /// variance 1 (population convention).
    pub fn standardized(&self) -> DMatrix<f64> {
        standardize(self)
    }
}

/// Parsed but not yet aligned observations of one series.
struct RawSeries {
    label: String,
    /// date index -> price, for every observed (and positive) cell.
    observed: BTreeMap<usize, f64>,
}

/// Load a raw price table and align it into a [`PricePanel`].
///
/// The panel covers the intersection of the series' observed date ranges;
/// at least 2 dates and 2 series must survive alignment. Missing or
/// non-positive cells inside the window are repaired and logged.
pub fn load_panel(path: &Path, layout: Layout) -> Result<PricePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();

    match layout {
        Layout::Wide => {
            if headers.len() < 3 {
                return Err(Error::InvalidInput(format!(
                    "wide layout needs a date column and at least 2 series, got {} columns",
                    headers.len()
                )));
            }
            let labels: Vec<String> = headers[1..].to_vec();
            let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
            for record in reader.records() {
                let record = record.map_err(|e| Error::Parse(e.to_string()))?;
                if record.len() != headers.len() {
                    return Err(Error::Parse(format!(
                        "row has {} fields, expected {}",
                        record.len(),
                        headers.len()
                    )));
                }
                let date = parse_date(&record[0])?;
                let cells = record
                    .iter()
                    .skip(1)
                    .map(parse_optional_price)
                    .collect::<Result<Vec<_>>>()?;
                rows.push((date, cells));
            }
            align(labels, rows)
        }
        Layout::Long => {
            if headers.len() != 3 {
                return Err(Error::InvalidInput(format!(
                    "long layout needs exactly 3 columns (date,label,price), got {}",
                    headers.len()
                )));
            }
            // Collect observations; label order = order of first appearance.
            let mut labels: Vec<String> = Vec::new();
            let mut obs: Vec<(NaiveDate, usize, Option<f64>)> = Vec::new();
            for record in reader.records() {
                let record = record.map_err(|e| Error::Parse(e.to_string()))?;
                if record.len() != 3 {
                    return Err(Error::Parse(format!(
                        "row has {} fields, expected 3",
                        record.len()
                    )));
                }
                let date = parse_date(&record[0])?;
                let label = record[1].to_string();
                let col = match labels.iter().position(|l| *l == label) {
                    Some(i) => i,
                    None => {
                        labels.push(label);
                        labels.len() - 1
                    }
                };
                obs.push((date, col, parse_optional_price(&record[2])?));
            }
            if labels.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "need at least 2 series, got {}",
                    labels.len()
                )));
            }
            // Pivot to wide rows over the union of dates.
            let mut dates: Vec<NaiveDate> = obs.iter().map(|(d, _, _)| *d).collect();
            dates.sort();
            dates.dedup();
            let index: BTreeMap<NaiveDate, usize> =
                dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
            let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = dates
                .iter()
                .map(|d| (*d, vec![None; labels.len()]))
                .collect();
            for (date, col, price) in obs {
                let r = index[&date];
                if rows[r].1[col].is_some() {
                    return Err(Error::InvalidInput(format!(
                        "duplicate observation for series {:?} at {date}",
                        labels[col]
                    )));
                }
                rows[r].1[col] = price;
            }
            align(labels, rows)
        }
    }
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| Error::Parse(format!("bad date {s:?} (expected YYYY-MM-DD)")))
}

/// Empty cells and the usual NA spellings are missing; non-positive prices
/// are demoted to missing so the repair pass can fix (and log) them.
fn parse_optional_price(s: &str) -> Result<Option<f64>> {
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad price {s:?}")))?;
    if !v.is_finite() || v <= 0.0 {
        return Ok(None);
    }
    Ok(Some(v))
}

/// Align parsed rows on the intersection of observed date ranges and repair
/// the gaps.
fn align(labels: Vec<String>, mut rows: Vec<(NaiveDate, Vec<Option<f64>>)>) -> Result<PricePanel> {
    {
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(Error::InvalidInput(format!("duplicate series label {l:?}")));
            }
        }
    }
    rows.sort_by_key(|(d, _)| *d);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::InvalidInput(format!("duplicate date {}", pair[0].0)));
        }
    }

    let series: Vec<RawSeries> = labels
        .iter()
        .enumerate()
        .map(|(col, label)| RawSeries {
            label: label.clone(),
            observed: rows
                .iter()
                .enumerate()
                .filter_map(|(r, (_, cells))| cells[col].map(|v| (r, v)))
                .collect(),
        })
        .collect();

    // Intersection of observed ranges.
    let mut start = 0usize;
    let mut end = rows.len(); // exclusive
    for s in &series {
        let first = *s
            .observed
            .keys()
            .next()
            .ok_or_else(|| Error::EmptySeries { label: s.label.clone() })?;
        let last = *s.observed.keys().next_back().unwrap();
        start = start.max(first);
        end = end.min(last + 1);
    }
    if end <= start || end - start < 2 {
        return Err(Error::InvalidInput(
            "fewer than 2 dates remain after aligning the series' date ranges".into(),
        ));
    }

    let dates: Vec<NaiveDate> = rows[start..end].iter().map(|(d, _)| *d).collect();
    let t = dates.len();
    let n = labels.len();
    let mut prices = DMatrix::zeros(t, n);
    let mut fill_log = Vec::new();

    for (col, s) in series.iter().enumerate() {
        // Seed the carry with the last observation at or before the window
        // start so a gap on the first window row still fills forward.
        let mut carry = s
            .observed
            .range(..start)
            .next_back()
            .map(|(_, v)| *v);
        let mut leading: Vec<usize> = Vec::new();
        for (i, r) in (start..end).enumerate() {
            match s.observed.get(&r) {
                Some(v) => {
                    carry = Some(*v);
                    prices[(i, col)] = *v;
                }
                None => match carry {
                    Some(v) => {
                        prices[(i, col)] = v;
                        fill_log.push(FillRecord {
                            label: s.label.clone(),
                            date: dates[i],
                            method: FillMethod::Forward,
                        });
                    }
                    None => leading.push(i),
                },
            }
        }
        if !leading.is_empty() {
            // Window start coincides with this series' first observation, so
            // a leading gap can only happen for an all-missing window, which
            // the range intersection already excludes — but keep the repair
            // total anyway.
            let first_value = (0..t)
                .find_map(|i| {
                    let v = prices[(i, col)];
                    (v > 0.0).then_some(v)
                })
                .ok_or_else(|| Error::EmptySeries { label: s.label.clone() })?;
            for i in leading {
                prices[(i, col)] = first_value;
                fill_log.push(FillRecord {
                    label: s.label.clone(),
                    date: dates[i],
                    method: FillMethod::Backward,
                });
            }
        }
    }

    // Repair is exhaustive, so any survivor here is a logic error upstream.
    for col in 0..n {
        for row in 0..t {
            if prices[(row, col)] <= 0.0 {
                return Err(Error::NonPositivePrice {
                    label: labels[col].clone(),
                    date: dates[row].to_string(),
                });
            }
        }
    }

    fill_log.sort_by(|a, b| (&a.label, a.date).cmp(&(&b.label, b.date)));
    Ok(PricePanel { dates, labels, prices, fill_log })
}

/// Log-returns over `delta_t` rows, with abnormal values clipped to zero.
///
/// Returns are overlapping differences: row t of the result compares prices
/// at rows t+delta_t and t. Cells with |r| > clip_threshold are zeroed and
/// recorded; means and standard deviations are computed after clipping.
pub fn compute_returns(
    panel: &PricePanel,
    delta_t: usize,
    clip_threshold: f64,
) -> Result<ReturnPanel> {
    let t_prices = panel.n_dates();
    let n = panel.n_series();
    if delta_t == 0 || delta_t >= t_prices {
        return Err(Error::InvalidParameter(format!(
            "delta_t must be in 1..{t_prices}, got {delta_t}"
        )));
    }
    if !(clip_threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "clip threshold must be positive, got {clip_threshold}"
        )));
    }

    let t = t_prices - delta_t;
    let mut returns = DMatrix::zeros(t, n);
    let mut clipped = Vec::new();
    for col in 0..n {
        for row in 0..t {
            let r = (panel.prices[(row + delta_t, col)]).ln()
                - (panel.prices[(row, col)]).ln();
            if r.abs() > clip_threshold {
                clipped.push(ClipRecord {
                    label: panel.labels[col].clone(),
                    date: panel.dates[row + delta_t],
                    original: r,
                });
                // leave the cell at 0
            } else {
                returns[(row, col)] = r;
            }
        }
    }

    let mut means = Vec::with_capacity(n);
    let mut stddevs = Vec::with_capacity(n);
    for col in 0..n {
        let column = returns.column(col);
        let mean = column.sum() / t as f64;
        let var = column.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / t as f64;
        let sd = var.sqrt();
        if sd <= 0.0 {
            return Err(Error::ZeroVariance { label: panel.labels[col].clone() });
        }
        means.push(mean);
        stddevs.push(sd);
    }

    Ok(ReturnPanel {
        dates: panel.dates[delta_t..].to_vec(),
        labels: panel.labels.clone(),
        returns,
        delta_t,
        means,
        stddevs,
        clipped,
    })
}

/// Shift and scale each column to mean 0, variance 1 (population
/// convention: divide by the number of samples, not samples − 1).
pub fn standardize(panel: &ReturnPanel) -> DMatrix<f64> {
    let mut g = panel.returns.clone();
    for col in 0..panel.n_series() {
        let mean = panel.means[col];
        let sd = panel.stddevs[col];
        for row in 0..panel.n_samples() {
            g[(row, col)] = (g[(row, col)] - mean) / sd;
        }
    }
    g
}
