//! Historical close-price series: CSV ingestion and grouping into
//! fixed-length weekly episodes for calibration and backtesting.

use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frequency {
    Daily,
    Weekly,
}

/// Ordered close prices with strictly increasing dates.
#[derive(Debug, Clone)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
    pub frequency: Frequency,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::InvalidSeries(format!(
                "{} dates but {} closes",
                dates.len(),
                closes.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::InvalidSeries("need at least 2 observations".to_string()));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidSeries(format!(
                    "dates not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        for (i, &c) in closes.iter().enumerate() {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidSeries(format!(
                    "close {c} at {} is not a positive number",
                    dates[i]
                )));
            }
        }
        let frequency = infer_frequency(&dates);
        Ok(PriceSeries {
            dates,
            closes,
            frequency,
        })
    }

    /// Parses `date,close` CSV with ISO-8601 dates. Errors carry the
    /// 1-based line number (line 1 is the header).
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        {
            let headers = rdr.headers().map_err(|e| Error::Csv {
                line: 1,
                msg: e.to_string(),
            })?;
            let cols: Vec<&str> = headers.iter().collect();
            if cols != ["date", "close"] {
                return Err(Error::Csv {
                    line: 1,
                    msg: format!("expected header `date,close`, got `{}`", cols.join(",")),
                });
            }
        }
        let mut dates = Vec::new();
        let mut closes = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Csv {
                line,
                msg: e.to_string(),
            })?;
            if record.len() != 2 {
                return Err(Error::Csv {
                    line,
                    msg: format!("{} fields, expected 2", record.len()),
                });
            }
            let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|_| {
                Error::Csv {
                    line,
                    msg: format!("bad date `{}` (expected YYYY-MM-DD)", &record[0]),
                }
            })?;
            let close: f64 = record[1].parse().map_err(|_| Error::Csv {
                line,
                msg: format!("bad close `{}`", &record[1]),
            })?;
            if !(close > 0.0 && close.is_finite()) {
                return Err(Error::Csv {
                    line,
                    msg: format!("close {close} must be a positive number"),
                });
            }
            if let Some(&prev) = dates.last() {
                if date <= prev {
                    return Err(Error::Csv {
                        line,
                        msg: format!("date {date} not after {prev}"),
                    });
                }
            }
            dates.push(date);
            closes.push(close);
        }
        PriceSeries::new(dates, closes)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    /// Same series with every close multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        PriceSeries {
            dates: self.dates.clone(),
            closes: self.closes.iter().map(|x| c * x).collect(),
            frequency: self.frequency,
        }
    }
}

fn infer_frequency(dates: &[NaiveDate]) -> Frequency {
    let mut gaps: Vec<i64> = dates
        .windows(2)
        .map(|w| (w[1] - w[0]).num_days())
        .collect();
    gaps.sort_unstable();
    if gaps[gaps.len() / 2] <= 4 {
        Frequency::Daily
    } else {
        Frequency::Weekly
    }
}

/// One trading week: `steps + 1` consecutive closes.
#[derive(Debug, Clone)]
pub struct Episode {
    pub start: NaiveDate,
    pub closes: Vec<f64>,
}

impl Episode {
    pub fn s0(&self) -> f64 {
        self.closes[0]
    }

    pub fn terminal(&self) -> f64 {
        *self.closes.last().unwrap()
    }

    /// Consecutive price ratios `S_{t+1} / S_t`.
    pub fn ratios(&self) -> impl Iterator<Item = f64> + '_ {
        self.closes.windows(2).map(|w| w[1] / w[0])
    }
}

/// Groups a daily series into ISO-week episodes of `steps + 1` closes.
/// Weeks short of that (market closures) are skipped entirely, never
/// interpolated; weeks with more closes contribute their first
/// `steps + 1`.
pub fn weekly_episodes(series: &PriceSeries, steps: usize) -> Result<Vec<Episode>> {
    if series.frequency != Frequency::Daily {
        return Err(Error::InvalidSeries(
            "weekly episodes need a daily series".to_string(),
        ));
    }
    if steps == 0 {
        return Err(Error::InvalidSeries("steps must be >= 1".to_string()));
    }
    let mut episodes = Vec::new();
    let mut start = 0usize;
    let week_key = |d: NaiveDate| (d.iso_week().year(), d.iso_week().week());
    while start < series.len() {
        let key = week_key(series.dates[start]);
        let mut end = start + 1;
        while end < series.len() && week_key(series.dates[end]) == key {
            end += 1;
        }
        if end - start >= steps + 1 {
            episodes.push(Episode {
                start: series.dates[start],
                closes: series.closes[start..start + steps + 1].to_vec(),
            });
        }
        start = end;
    }
    Ok(episodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let csv = "date,close\n2024-01-02,100.5\n2024-01-03,101.25\n";
        let series = PriceSeries::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series.closes[1], 101.25);

        let bad_close = "date,close\n2024-01-02,100\n2024-01-03,-3\n";
        match PriceSeries::from_csv_reader(bad_close.as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }

        let bad_date = "date,close\n02/01/2024,100\n";
        match PriceSeries::from_csv_reader(bad_date.as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let bad_header = "day,price\n2024-01-02,100\n";
        match PriceSeries::from_csv_reader(bad_header.as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }

        let unordered = "date,close\n2024-01-03,100\n2024-01-02,101\n";
        assert!(PriceSeries::from_csv_reader(unordered.as_bytes()).is_err());
    }

    #[test]
    fn weekly_grouping_skips_short_weeks() {
        // Week 1: Mon-Fri complete; week 2: holiday Monday, 4 closes only.
        let mut dates = vec![
            date("2024-01-08"),
            date("2024-01-09"),
            date("2024-01-10"),
            date("2024-01-11"),
            date("2024-01-12"),
            date("2024-01-16"),
            date("2024-01-17"),
            date("2024-01-18"),
            date("2024-01-19"),
        ];
        let mut closes: Vec<f64> = (0..dates.len()).map(|i| 100.0 + i as f64).collect();
        // Third week, complete again.
        for (i, d) in ["2024-01-22", "2024-01-23", "2024-01-24", "2024-01-25", "2024-01-26"]
            .iter()
            .enumerate()
        {
            dates.push(date(d));
            closes.push(200.0 + i as f64);
        }
        let series = PriceSeries::new(dates, closes).unwrap();
        assert_eq!(series.frequency, Frequency::Daily);
        let episodes = weekly_episodes(&series, 4).unwrap();
        assert_eq!(episodes.len(), 2);
        assert_eq!(episodes[0].start, date("2024-01-08"));
        assert_eq!(episodes[1].start, date("2024-01-22"));
        assert_eq!(episodes[0].closes.len(), 5);
    }

    #[test]
    fn frequency_inference() {
        let weekly = PriceSeries::new(
            vec![date("2024-01-05"), date("2024-01-12"), date("2024-01-19")],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        assert_eq!(weekly.frequency, Frequency::Weekly);
        assert!(weekly_episodes(&weekly, 4).is_err());
    }
}
