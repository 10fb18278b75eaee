use std::path::Path;

use chrono::NaiveDate;

use super::record::MacroSnapshot;
use crate::error::{Error, Result};

const HEADER: [&str; 4] = ["date", "tbill_3m", "gdp_growth", "core_cpi"];

/// Date-ordered macro observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MacroSeries {
    points: Vec<(NaiveDate, MacroSnapshot)>,
}

impl MacroSeries {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(NaiveDate, MacroSnapshot)> {
        self.points.iter()
    }

    /// Latest observation on or before `date`.
    pub fn as_of(&self, date: NaiveDate) -> Option<&MacroSnapshot> {
        let idx = self.points.partition_point(|(d, _)| *d <= date);
        idx.checked_sub(1).map(|i| &self.points[i].1)
    }
}

/// Load `date,tbill_3m,gdp_growth,core_cpi` with strictly increasing ISO dates.
pub fn load_macro_csv(path: impl AsRef<Path>) -> Result<MacroSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != HEADER {
        return Err(parse_err(
            1,
            format!("expected header `{}`, found `{}`", HEADER.join(","), got.join(",")),
        ));
    }

    let mut points: Vec<(NaiveDate, MacroSnapshot)> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let fallback_line = i + 2;
        let row = row.map_err(|e| {
            let line = e.position().map_or(fallback_line, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(fallback_line, |p| p.line() as usize);
        if row.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, found {}", row.len())));
        }
        let date = NaiveDate::parse_from_str(row[0].trim(), "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("invalid date {:?}: {e}", &row[0])))?;
        let num = |j: usize| -> Result<f64> {
            let v: f64 = row[j]
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("invalid {} value {:?}", HEADER[j], &row[j])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("non-finite {} value", HEADER[j])))
            }
        };
        let snap = MacroSnapshot {
            tbill_3m: num(1)?,
            gdp_growth_prior_year: num(2)?,
            core_cpi: num(3)?,
        };
        if let Some((prev, _)) = points.last() {
            if date == *prev {
                return Err(parse_err(line, format!("duplicate date {date}")));
            }
            if date < *prev {
                return Err(parse_err(line, format!("date {date} precedes {prev}")));
            }
        }
        points.push((date, snap));
    }
    Ok(MacroSeries { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_valid_rows() {
        let f = write(
            "date,tbill_3m,gdp_growth,core_cpi\n2020-01-01,0.015,0.02,0.021\n2020-04-01,0.001,-0.03,0.018\n2020-07-01,0.001,0.01,0.017\n",
        );
        let s = load_macro_csv(f.path()).unwrap();
        assert_eq!(s.len(), 3);
        let d = NaiveDate::from_ymd_opt(2020, 5, 1).unwrap();
        assert_eq!(s.as_of(d).unwrap().gdp_growth_prior_year, -0.03);
    }

    #[test]
    fn header_only_is_empty() {
        let f = write("date,tbill_3m,gdp_growth,core_cpi\n");
        assert!(load_macro_csv(f.path()).unwrap().is_empty());
    }

    #[test]
    fn invalid_month_cites_line() {
        let f = write("date,tbill_3m,gdp_growth,core_cpi\n2020-13-01,0.01,0.02,0.02\n");
        match load_macro_csv(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_disorder() {
        let dup = write("date,tbill_3m,gdp_growth,core_cpi\n2020-01-01,0,0,0\n2020-01-01,0,0,0\n");
        assert!(matches!(load_macro_csv(dup.path()), Err(Error::Parse { line: 3, .. })));
        let back = write("date,tbill_3m,gdp_growth,core_cpi\n2020-02-01,0,0,0\n2020-01-01,0,0,0\n");
        assert!(matches!(load_macro_csv(back.path()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn malformed_value_and_header() {
        let bad = write("date,tbill_3m,gdp_growth,core_cpi\n2020-01-01,abc,0,0\n");
        assert!(matches!(load_macro_csv(bad.path()), Err(Error::Parse { line: 2, .. })));
        let hdr = write("day,tbill,gdp,cpi\n");
        assert!(matches!(load_macro_csv(hdr.path()), Err(Error::Parse { line: 1, .. })));
    }
}
