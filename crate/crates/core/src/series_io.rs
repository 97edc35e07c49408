//! Loading quarterly series from CSV files such as FRED downloads.

use std::io::Read;
use std::path::Path;

use crate::domain::{Quarter, TimeSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Value column; defaults to the first column that is not the date column.
    pub column: Option<String>,
    pub start: Option<Quarter>,
    pub end: Option<Quarter>,
    /// Treat the input as levels and convert to year-on-year growth in percent.
    pub yoy: bool,
}

pub fn load_series(path: &Path, opts: &LoadOptions) -> Result<TimeSeries> {
    let file = std::fs::File::open(path)?;
    read_series(file, opts)
}

/// Parses a CSV with a header row, a date column (`YYYY-MM-DD` or `YYYYQn`) and a value
/// column. Rows must be consecutive quarters; any gap, duplicate, or unparsable cell is
/// reported with its 1-based file row number (the header is row 1).
pub fn read_series<R: Read>(reader: R, opts: &LoadOptions) -> Result<TimeSeries> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_col = headers
        .iter()
        .position(|h| {
            let h = h.trim().to_ascii_lowercase();
            h == "date" || h == "observation_date" || h == "period" || h == "quarter"
        })
        .unwrap_or(0);
    let value_col = match &opts.column {
        Some(name) => headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::invalid(format!("no column named {name:?}")))?,
        None => (0..headers.len())
            .find(|&i| i != date_col)
            .ok_or_else(|| Error::invalid("CSV needs a date column and a value column"))?,
    };

    let mut start: Option<Quarter> = None;
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |c: usize| rec.get(c).unwrap_or("").trim();
        let q = Quarter::parse(field(date_col)).map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let raw = field(value_col);
        let v: f64 = raw.parse().map_err(|_| Error::Parse {
            row,
            message: format!("value {raw:?} is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row,
                message: "value is not finite".into(),
            });
        }
        match start {
            None => start = Some(q),
            Some(s) => {
                let expected = s + values.len() as i32;
                if q != expected {
                    let message = if q < expected {
                        format!("duplicate or out-of-order period {q}, expected {expected}")
                    } else {
                        format!("gap: expected {expected}, found {q}")
                    };
                    return Err(Error::Parse { row, message });
                }
            }
        }
        values.push(v);
    }
    let mut start = start.ok_or_else(|| Error::invalid("CSV has no data rows"))?;

    if opts.yoy {
        if values.len() <= 4 {
            return Err(Error::invalid("year-on-year growth needs more than 4 observations"));
        }
        values = values
            .windows(5)
            .map(|w| 100.0 * (w[4] / w[0] - 1.0))
            .collect();
        start = start + 4;
    }
    let series = TimeSeries::new(start, values)?;
    let from = opts.start.unwrap_or(series.start());
    let to = opts.end.unwrap_or(series.end());
    if from == series.start() && to == series.end() {
        Ok(series)
    } else {
        series.window(from, to)
    }
}

/// Writes a series as `date,value` with quarter labels.
pub fn write_series<W: std::io::Write>(w: W, series: &TimeSeries) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["date", "value"])?;
    for (i, v) in series.values().iter().enumerate() {
        wtr.write_record([series.period(i).to_string(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
