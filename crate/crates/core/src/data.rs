//! Price-history ingestion, log returns and the multi-lag portmanteau
//! pipeline for return series.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::classic::{self, PortmanteauStatistic};
use crate::error::{Error, Result};
use crate::harness::Sidedness;
use crate::multiple::{self, Correction, PortmanteauResult};
use crate::perm::{self, PermutationScheme, StudentizedAutocorrelation, TestResult};
use crate::rng;
use crate::series::TimeSeries;
use crate::studentizer::StudentizerConfig;

pub const DEFAULT_DATE_COLUMN: &str = "Date";
pub const DEFAULT_PRICE_COLUMN: &str = "Close";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceHistory {
    pub dates: Vec<String>,
    pub closes: Vec<f64>,
    /// Data rows read from the file, including dropped ones.
    pub raw_rows: usize,
    /// Rows skipped because the price was missing or unparseable.
    pub dropped: usize,
}

impl PriceHistory {
    pub fn new(dates: Vec<String>, closes: Vec<f64>) -> Result<Self> {
        let raw_rows = closes.len();
        let h = Self {
            dates,
            closes,
            raw_rows,
            dropped: 0,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.dates.len() != self.closes.len() {
            return Err(Error::Data("dates and closes differ in length".into()));
        }
        if let Some(i) = self.closes.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::Data(format!(
                "price {} on {} is not a positive finite number",
                self.closes[i], self.dates[i]
            )));
        }
        check_dates_increasing(&self.dates)
    }
}

const DATE_FORMATS: [&str; 2] = ["%Y-%m-%d", "%m/%d/%Y"];

/// Labels that all parse under one known date format must be strictly
/// increasing; other labels are treated as opaque and only row order counts.
fn check_dates_increasing(dates: &[String]) -> Result<()> {
    for fmt in DATE_FORMATS {
        let parsed: Option<Vec<NaiveDate>> = dates
            .iter()
            .map(|d| NaiveDate::parse_from_str(d.trim(), fmt).ok())
            .collect();
        if let Some(parsed) = parsed {
            if let Some(w) = parsed.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::Data(format!(
                    "dates must be strictly increasing: {} follows {}",
                    dates[w + 1],
                    dates[w]
                )));
            }
            return Ok(());
        }
    }
    Ok(())
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Data(format!("column `{name}` not found in header")))
}

/// Reads a header-first comma-separated price table.
pub fn read_prices<R: Read>(reader: R, date_column: &str, price_column: &str) -> Result<PriceHistory> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_idx = column_index(&headers, date_column)?;
    let price_idx = column_index(&headers, price_column)?;
    let mut dates = Vec::new();
    let mut closes = Vec::new();
    let mut raw_rows = 0;
    let mut dropped = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        raw_rows += 1;
        let price = record
            .get(price_idx)
            .map(str::trim)
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|p| p.is_finite());
        let Some(price) = price else {
            dropped += 1;
            continue;
        };
        let date = record.get(date_idx).unwrap_or("").trim().to_string();
        if price <= 0.0 {
            // Header is line 1, so data row `row` sits on line row + 2.
            return Err(Error::Data(format!(
                "nonpositive price {price} on line {} ({date})",
                row + 2
            )));
        }
        dates.push(date);
        closes.push(price);
    }
    if closes.is_empty() {
        return Err(Error::Data("no rows with a parseable price".into()));
    }
    let history = PriceHistory {
        dates,
        closes,
        raw_rows,
        dropped,
    };
    history.validate()?;
    Ok(history)
}

pub fn load_prices(path: &Path, date_column: &str, price_column: &str) -> Result<PriceHistory> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_prices(file, date_column, price_column)
}

pub fn write_prices<W: Write>(history: &PriceHistory, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([DEFAULT_DATE_COLUMN, DEFAULT_PRICE_COLUMN])?;
    for (d, c) in history.dates.iter().zip(&history.closes) {
        w.write_record([d.as_str(), &format!("{c:?}")])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Reads one numeric column as a series. With `column = None` the first
/// column is used; a first row that does not parse as a number is taken as
/// the header. Blank cells are skipped; any other non-number is an error.
pub fn read_series<R: Read>(reader: R, column: Option<&str>) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::Data("series file is empty".into())),
    };
    let first_is_data = first
        .get(0)
        .is_some_and(|f| f.trim().parse::<f64>().is_ok());
    let idx = match column {
        Some(name) if !first_is_data => column_index(&first, name)?,
        Some(name) => {
            return Err(Error::Data(format!(
                "column `{name}` requested but the file has no header row"
            )))
        }
        None => 0,
    };
    let mut values = Vec::new();
    let mut push = |record: &csv::StringRecord, line: usize| -> Result<()> {
        let cell = record.get(idx).unwrap_or("").trim();
        if cell.is_empty() {
            return Ok(());
        }
        let v = cell
            .parse::<f64>()
            .map_err(|_| Error::Data(format!("line {line}: `{cell}` is not a number")))?;
        values.push(v);
        Ok(())
    };
    if first_is_data {
        push(&first, 1)?;
    }
    for (i, record) in records.enumerate() {
        push(&record?, i + 2)?;
    }
    if values.is_empty() {
        return Err(Error::Data("series file has no values".into()));
    }
    TimeSeries::new(values)
}

pub fn load_series(path: &Path, column: Option<&str>) -> Result<TimeSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series(file, column)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSource {
    pub file: Option<String>,
    pub date_column: String,
    pub price_column: String,
    pub rows_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub returns: TimeSeries,
    /// Date label of each return (the later of the two prices).
    pub dates: Vec<String>,
    pub source: ReturnSource,
}

/// `R_t = ln(S_t) - ln(S_{t-1})`.
pub fn log_returns(history: &PriceHistory) -> Result<ReturnSeries> {
    if history.len() < 2 {
        return Err(Error::domain("log returns need at least two prices"));
    }
    let returns = history
        .closes
        .windows(2)
        .map(|w| w[1].ln() - w[0].ln())
        .collect();
    Ok(ReturnSeries {
        returns: TimeSeries::new(returns)?,
        dates: history.dates[1..].to_vec(),
        source: ReturnSource {
            file: None,
            date_column: DEFAULT_DATE_COLUMN.into(),
            price_column: DEFAULT_PRICE_COLUMN.into(),
            rows_dropped: history.dropped,
        },
    })
}

/// Loads a price file and converts it to returns, recording provenance.
pub fn load_returns(path: &Path, date_column: &str, price_column: &str) -> Result<ReturnSeries> {
    let history = load_prices(path, date_column, price_column)?;
    let mut r = log_returns(&history)?;
    r.source.file = Some(path.display().to_string());
    r.source.date_column = date_column.into();
    r.source.price_column = price_column.into();
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortmanteauConfig {
    pub lags: usize,
    pub permutations: usize,
    pub seed: u64,
    pub alpha: f64,
    pub correction: Correction,
    pub sidedness: Sidedness,
    /// Lag field is overridden per marginal test.
    pub studentizer: StudentizerConfig,
}

impl Default for PortmanteauConfig {
    fn default() -> Self {
        Self {
            lags: 10,
            permutations: perm::DEFAULT_PERMUTATIONS,
            seed: 0,
            alpha: 0.05,
            correction: Correction::Bonferroni,
            sidedness: Sidedness::TwoSided,
            studentizer: StudentizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagReport {
    pub lag: usize,
    pub statistic: f64,
    /// The p-value fed to the correction, per the configured sidedness.
    pub p: f64,
    pub test: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LjungBoxSummary {
    #[serde(rename = "Q")]
    pub q: f64,
    pub df: usize,
    pub p: f64,
}

impl From<PortmanteauStatistic> for LjungBoxSummary {
    fn from(s: PortmanteauStatistic) -> Self {
        Self {
            q: s.q,
            df: s.df,
            p: s.p_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortmanteauReport {
    pub n: usize,
    pub config: PortmanteauConfig,
    pub per_lag: Vec<LagReport>,
    pub correction: Correction,
    pub cutoff: f64,
    pub rejected_lags: Vec<usize>,
    pub global_reject: bool,
    pub ljung_box: LjungBoxSummary,
}

impl PortmanteauReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row of per-lag p-values under a `series,1,...,r` header.
    pub fn to_csv(&self, label: &str) -> String {
        let mut out = String::from("series");
        for l in &self.per_lag {
            let _ = write!(out, ",{}", l.lag);
        }
        out.push('\n');
        out.push_str(label);
        for l in &self.per_lag {
            let _ = write!(out, ",{:.4}", l.p);
        }
        out.push('\n');
        out
    }

    pub fn decision(&self) -> PortmanteauResult {
        PortmanteauResult {
            lags: self.per_lag.len(),
            p_values: self.per_lag.iter().map(|l| l.p).collect(),
            correction: self.correction,
            alpha: self.config.alpha,
            cutoff: self.cutoff,
            rejected: self.rejected_lags.clone(),
            global_reject: self.global_reject,
        }
    }
}

/// Studentized permutation tests at lags `1..=r`, each on its own
/// permutation stream, combined with the configured correction; the joint
/// Ljung-Box test is reported alongside.
pub fn portmanteau_pipeline(x: &TimeSeries, cfg: &PortmanteauConfig) -> Result<PortmanteauReport> {
    if cfg.lags == 0 {
        return Err(Error::domain("portmanteau needs at least one lag"));
    }
    let per_lag = (1..=cfg.lags)
        .map(|lag| {
            let stat = StudentizedAutocorrelation(cfg.studentizer.with_lag(lag));
            let scheme = PermutationScheme::monte_carlo(
                cfg.permutations,
                rng::derive_seed(cfg.seed, &[lag as u64]),
            );
            let test = perm::permutation_test(x.values(), &stat, &scheme, cfg.alpha)?;
            let p = cfg.sidedness.pick(&perm::PValues {
                greater: test.p_greater,
                less: test.p_less,
                two_sided: test.p_two_sided,
            });
            Ok(LagReport {
                lag,
                statistic: test.statistic,
                p,
                test,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let p_values: Vec<f64> = per_lag.iter().map(|l| l.p).collect();
    let decision = multiple::apply(cfg.correction, &p_values, cfg.alpha)?;
    let ljung_box = classic::ljung_box(x.values(), cfg.lags)?.into();
    Ok(PortmanteauReport {
        n: x.len(),
        config: *cfg,
        per_lag,
        correction: cfg.correction,
        cutoff: decision.cutoff,
        rejected_lags: decision.rejected,
        global_reject: decision.global_reject,
        ljung_box,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn blank_price_rows_are_dropped() {
        let csv = "Date,Close\n2020-01-02,100\n2020-01-03,\n2020-01-06,101.5\n";
        let h = read_prices(csv.as_bytes(), "Date", "Close").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.dropped, 1);
        assert_eq!(h.raw_rows, 3);
        assert_eq!(h.dates, vec!["2020-01-02", "2020-01-06"]);

        let with_null = "Date,Close\n2020-01-02,100\n2020-01-03,null\n";
        assert_eq!(read_prices(with_null.as_bytes(), "Date", "Close").unwrap().dropped, 1);
    }

    #[test]
    fn negative_price_is_an_error() {
        let csv = "Date,Close\n2020-01-02,100\n2020-01-03,-5\n";
        let err = read_prices(csv.as_bytes(), "Date", "Close").unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("line 3")), "{err}");
    }

    #[test]
    fn missing_column_or_rows() {
        assert!(read_prices("Date,Open\n2020-01-02,1\n".as_bytes(), "Date", "Close").is_err());
        assert!(read_prices("Date,Close\n2020-01-02,\n".as_bytes(), "Date", "Close").is_err());
    }

    #[test]
    fn dates_must_increase() {
        let csv = "Date,Close\n2020-01-03,100\n2020-01-02,101\n";
        assert!(read_prices(csv.as_bytes(), "Date", "Close").is_err());
        let opaque = "Date,Close\nb,100\na,101\n";
        assert!(read_prices(opaque.as_bytes(), "Date", "Close").is_ok());
    }

    #[test]
    fn quoted_fields_and_custom_columns() {
        let csv = "\"Day\",\"Adj Close\",Volume\n\"2021-03-01\",\"10.5\",3\n2021-03-02,11,4\n";
        let h = read_prices(csv.as_bytes(), "Day", "Adj Close").unwrap();
        assert_eq!(h.closes, vec![10.5, 11.0]);
    }

    #[test]
    fn write_then_read_round_trips() {
        let h = PriceHistory::new(
            vec!["2020-01-02".into(), "2020-01-03".into(), "2020-01-06".into()],
            vec![100.0, 0.1 + 0.2, 1e-7],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_prices(&h, &mut buf).unwrap();
        let back = read_prices(buf.as_slice(), DEFAULT_DATE_COLUMN, DEFAULT_PRICE_COLUMN).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn series_with_and_without_header() {
        let plain = read_series("1.5\n2\n\n-3\n".as_bytes(), None).unwrap();
        assert_eq!(plain.values(), &[1.5, 2.0, -3.0]);
        let named = read_series("t,x\n0,4\n1,5\n".as_bytes(), Some("x")).unwrap();
        assert_eq!(named.values(), &[4.0, 5.0]);
        let first = read_series("x\n4\n5\n".as_bytes(), None).unwrap();
        assert_eq!(first.values(), &[4.0, 5.0]);
        assert!(read_series("1\n2\nabc\n".as_bytes(), None).is_err());
        assert!(read_series("1\n2\n".as_bytes(), Some("x")).is_err());
        assert!(read_series("".as_bytes(), None).is_err());
    }

    #[test]
    fn log_return_examples() {
        let h = PriceHistory::new(vec!["a".into(), "b".into()], vec![100.0, 110.0]).unwrap();
        let r = log_returns(&h).unwrap();
        assert_relative_eq!(r.returns.values()[0], 1.1f64.ln());
        assert!((r.returns.values()[0] - 0.095310).abs() < 1e-6);

        let h = PriceHistory::new(vec!["a".into(), "b".into(), "c".into()], vec![100.0, 200.0, 100.0])
            .unwrap();
        let r = log_returns(&h).unwrap();
        assert_relative_eq!(r.returns.values()[0], 2f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(r.returns.values()[1], -(2f64.ln()), max_relative = 1e-12);

        let h = PriceHistory::new(vec!["a".into(), "b".into(), "c".into()], vec![7.0; 3]).unwrap();
        assert!(log_returns(&h).unwrap().returns.values().iter().all(|&v| v == 0.0));

        let h = PriceHistory::new(vec!["a".into()], vec![7.0]).unwrap();
        assert!(log_returns(&h).is_err());
    }

    #[test]
    fn returns_are_scale_free() {
        let closes = vec![10.0, 10.5, 9.75, 12.0, 11.1];
        let dates: Vec<String> = (0..5).map(|i| format!("d{i}")).collect();
        let base = log_returns(&PriceHistory::new(dates.clone(), closes.clone()).unwrap()).unwrap();
        let scaled = log_returns(
            &PriceHistory::new(dates, closes.iter().map(|c| c * 37.5).collect()).unwrap(),
        )
        .unwrap();
        for (a, b) in base.returns.values().iter().zip(scaled.returns.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn row_accounting() {
        let csv = "Date,Close\n1,10\n2,\n3,11\n4,x\n5,12\n";
        let h = read_prices(csv.as_bytes(), "Date", "Close").unwrap();
        let r = log_returns(&h).unwrap();
        assert_eq!(h.dropped + r.returns.len() + 1, h.raw_rows);
    }

    #[test]
    fn pipeline_shape_and_determinism() {
        let x = crate::process::ProcessSpec::iid_gaussian().simulate(300, 4).unwrap();
        let cfg = PortmanteauConfig {
            permutations: 99,
            seed: 12,
            ..Default::default()
        };
        let a = portmanteau_pipeline(&x, &cfg).unwrap();
        let b = portmanteau_pipeline(&x, &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.per_lag.len(), 10);
        assert_relative_eq!(a.cutoff, 0.005);
        assert_eq!(a.ljung_box.df, 10);
        assert_eq!(a.global_reject, !a.rejected_lags.is_empty());
        for l in &a.per_lag {
            assert_eq!(l.p, l.test.p_two_sided);
        }
        let csv = a.to_csv("SIM");
        assert!(csv.starts_with("series,1,2,3,4,5,6,7,8,9,10\nSIM,"));
        let other = portmanteau_pipeline(&x, &PortmanteauConfig { seed: 13, ..cfg }).unwrap();
        assert_ne!(a.to_json(), other.to_json());
    }
}
