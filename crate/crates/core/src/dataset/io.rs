//! `records.csv` and `schema.json` on disk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{BondRecord, MacroSnapshot, Rating};
use super::schema::FeatureSchema;
use crate::error::{Error, Result};

pub const RECORDS_FILE: &str = "records.csv";
pub const SCHEMA_FILE: &str = "schema.json";

#[derive(Serialize, Deserialize)]
struct Row {
    id: String,
    state: String,
    use_of_proceeds: String,
    source_of_repayment: String,
    seniority: String,
    call_provision: String,
    tax_status: String,
    coupon: f64,
    duration_years: f64,
    spread: f64,
    rating: Rating,
    description: String,
    tbill_3m: f64,
    gdp_growth_prior_year: f64,
    core_cpi: f64,
    defaulted: bool,
}

impl From<&BondRecord> for Row {
    fn from(r: &BondRecord) -> Self {
        Row {
            id: r.id.clone(),
            state: r.state.clone(),
            use_of_proceeds: r.use_of_proceeds.clone(),
            source_of_repayment: r.source_of_repayment.clone(),
            seniority: r.seniority.clone(),
            call_provision: r.call_provision.clone(),
            tax_status: r.tax_status.clone(),
            coupon: r.coupon,
            duration_years: r.duration_years,
            spread: r.spread,
            rating: r.rating,
            description: r.description.clone(),
            tbill_3m: r.macro_.tbill_3m,
            gdp_growth_prior_year: r.macro_.gdp_growth_prior_year,
            core_cpi: r.macro_.core_cpi,
            defaulted: r.defaulted,
        }
    }
}

impl From<Row> for BondRecord {
    fn from(r: Row) -> Self {
        BondRecord {
            id: r.id,
            state: r.state,
            use_of_proceeds: r.use_of_proceeds,
            source_of_repayment: r.source_of_repayment,
            seniority: r.seniority,
            call_provision: r.call_provision,
            tax_status: r.tax_status,
            coupon: r.coupon,
            duration_years: r.duration_years,
            spread: r.spread,
            rating: r.rating,
            description: r.description,
            macro_: MacroSnapshot {
                tbill_3m: r.tbill_3m,
                gdp_growth_prior_year: r.gdp_growth_prior_year,
                core_cpi: r.core_cpi,
            },
            defaulted: r.defaulted,
        }
    }
}

/// The exact bytes [`write_records_csv`] writes.
pub fn records_csv_bytes(records: &[BondRecord]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    for r in records {
        w.serialize(Row::from(r))?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_records_csv(path: impl AsRef<Path>, records: &[BondRecord]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, records_csv_bytes(records)?).map_err(|e| Error::io(path, e))
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<BondRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(i + 2, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let rec = BondRecord::from(row);
        rec.validate().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_schema_json(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<()> {
    let path = path.as_ref();
    let mut json = serde_json::to_string_pretty(schema)?;
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_schema_json(path: impl AsRef<Path>) -> Result<FeatureSchema> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let schema: FeatureSchema = serde_json::from_slice(&bytes)?;
    schema.validate()?;
    Ok(schema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{fit_schema, generate_synthetic, GeneratorConfig};

    #[test]
    fn records_and_schema_round_trip() {
        let cfg = GeneratorConfig {
            n_records: 2_000,
            default_rate: 0.01,
            seed: 4,
            ..GeneratorConfig::default()
        };
        let recs = generate_synthetic(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rp = dir.path().join(RECORDS_FILE);
        write_records_csv(&rp, &recs).unwrap();
        assert_eq!(read_records_csv(&rp).unwrap(), recs);

        let schema = fit_schema(&recs, 8).unwrap();
        let sp = dir.path().join(SCHEMA_FILE);
        write_schema_json(&sp, &schema).unwrap();
        assert_eq!(read_schema_json(&sp).unwrap(), schema);
    }

    #[test]
    fn bad_rating_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(
            &p,
            "id,state,use_of_proceeds,source_of_repayment,seniority,call_provision,tax_status,coupon,duration_years,spread,rating,description,tbill_3m,gdp_growth_prior_year,core_cpi,defaulted\n\
             B1,CA,school,revenue,senior,callable,taxable,0.03,5,0.01,ZZZ,school bond,0.01,0.02,0.02,false\n",
        )
        .unwrap();
        assert!(matches!(read_records_csv(&p), Err(Error::Parse { line: 2, .. })));
    }
}
