//! Firm panels: CSV ingest, per-year trimming, worker weighting and sector
//! aggregation.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

pub const PANEL_COLUMNS: [&str; 5] = ["firm_id", "year", "output", "workers", "sector"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub firm_id: String,
    pub year: i32,
    /// Output `Y` in 10^6 yen.
    pub output: f64,
    /// Workers `L`.
    pub workers: u64,
    pub sector: String,
    /// `c = Y / L` in 10^6 yen/person.
    pub productivity: f64,
}

impl FirmRecord {
    pub fn new(firm_id: String, year: i32, output: f64, workers: u64, sector: String) -> Self {
        FirmRecord {
            productivity: output / workers as f64,
            firm_id,
            year,
            output,
            workers,
            sector,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

/// Records grouped by year, in input order within a year.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub years: BTreeMap<i32, Vec<FirmRecord>>,
}

impl Panel {
    pub fn from_records(records: impl IntoIterator<Item = FirmRecord>) -> Self {
        let mut years: BTreeMap<i32, Vec<FirmRecord>> = BTreeMap::new();
        for r in records {
            years.entry(r.year).or_default().push(r);
        }
        Panel { years }
    }

    pub fn len(&self) -> usize {
        self.years.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts_by_year(&self) -> BTreeMap<i32, usize> {
        self.years.iter().map(|(y, v)| (*y, v.len())).collect()
    }

    pub fn max_productivity(&self) -> Option<f64> {
        self.years
            .values()
            .flatten()
            .map(|r| r.productivity)
            .max_by(f64::total_cmp)
    }

    pub fn total_workers(&self) -> u64 {
        self.years.values().flatten().map(|r| r.workers).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::result::Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(PANEL_COLUMNS)?;
        for r in self.years.values().flatten() {
            out.write_record([
                r.firm_id.as_str(),
                &r.year.to_string(),
                &r.output.to_string(),
                &r.workers.to_string(),
                r.sector.as_str(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub panel: Panel,
    pub rejections: Vec<Rejection>,
}

pub fn ingest_panel(path: &Path, rejection_ceiling: usize) -> Result<IngestReport> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_panel(file, rejection_ceiling).map_err(|e| match e {
        CliError::Csv { source, .. } => CliError::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parses a panel. Malformed rows are collected with their line numbers;
/// exceeding `rejection_ceiling` of them, or a missing column, is fatal.
pub fn read_panel<R: Read>(input: R, rejection_ceiling: usize) -> Result<IngestReport> {
    let csv_err = |source| CliError::Csv {
        path: "<panel>".into(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let mut index = [0usize; 5];
    let mut missing = Vec::new();
    for (slot, name) in index.iter_mut().zip(PANEL_COLUMNS) {
        match headers.iter().position(|h| h == name) {
            Some(i) => *slot = i,
            None => missing.push(name.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::MissingColumns(missing));
    }

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, &index) {
            Ok(r) => records.push(r),
            Err(reason) => {
                rejections.push(Rejection { line, reason });
                if rejections.len() > rejection_ceiling {
                    return Err(CliError::TooManyRejections {
                        count: rejections.len(),
                        ceiling: rejection_ceiling,
                        first: rejections.into_iter().take(5).collect(),
                    });
                }
            }
        }
    }
    Ok(IngestReport {
        panel: Panel::from_records(records),
        rejections,
    })
}

fn parse_row(row: &csv::StringRecord, index: &[usize; 5]) -> std::result::Result<FirmRecord, String> {
    let field = |k: usize| row.get(index[k]).ok_or_else(|| format!("missing field `{}`", PANEL_COLUMNS[k]));
    let firm_id = field(0)?;
    if firm_id.is_empty() {
        return Err("empty firm_id".into());
    }
    let year: i32 = field(1)?
        .parse()
        .map_err(|_| format!("year `{}` is not an integer", field(1).unwrap_or("")))?;
    let output: f64 = field(2)?
        .parse()
        .map_err(|_| format!("output `{}` is not a number", field(2).unwrap_or("")))?;
    if !(output > 0.0 && output.is_finite()) {
        return Err(format!("output must be positive, got {output}"));
    }
    let workers_text = field(3)?;
    let workers: u64 = workers_text
        .parse()
        .map_err(|_| format!("workers `{workers_text}` is not a non-negative integer"))?;
    if workers < 1 {
        return Err("workers must be at least 1".into());
    }
    Ok(FirmRecord::new(
        firm_id.to_string(),
        year,
        output,
        workers,
        field(4)?.to_string(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimEntry {
    pub year: i32,
    pub firm_id: String,
    pub productivity: f64,
}

/// Removes the `trim_top` most productive firms of every year.
pub fn trim_outliers(panel: &Panel, trim_top: usize) -> (Panel, Vec<TrimEntry>) {
    let mut audit = Vec::new();
    let mut years = BTreeMap::new();
    for (&year, records) in &panel.years {
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&i, &j| {
            records[j]
                .productivity
                .total_cmp(&records[i].productivity)
                .then(i.cmp(&j))
        });
        let mut removed = vec![false; records.len()];
        for &i in order.iter().take(trim_top) {
            removed[i] = true;
            audit.push(TrimEntry {
                year,
                firm_id: records[i].firm_id.clone(),
                productivity: records[i].productivity,
            });
        }
        let kept: Vec<FirmRecord> = records
            .iter()
            .zip(&removed)
            .filter(|(_, &r)| !r)
            .map(|(r, _)| r.clone())
            .collect();
        years.insert(year, kept);
    }
    (Panel { years }, audit)
}

/// Worker-level sample: firm `i` contributes weight `L_i` at `c_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedSample {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted survival `(c, share of weight at or above c)`, descending in `c`.
    pub fn rank_size(&self) -> Vec<(f64, f64)> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&i, &j| self.values[j].total_cmp(&self.values[i]).then(i.cmp(&j)));
        let total = self.total_weight();
        let mut acc = 0.0;
        order
            .into_iter()
            .map(|i| {
                acc += self.weights[i];
                (self.values[i], acc / total)
            })
            .collect()
    }
}

pub fn worker_weighted_sample(records: &[FirmRecord]) -> WeightedSample {
    WeightedSample {
        values: records.iter().map(|r| r.productivity).collect(),
        weights: records.iter().map(|r| r.workers as f64).collect(),
    }
}

/// Sector productivity `sum Y / sum L` within each sector label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorAggregate {
    pub sector: String,
    pub output: f64,
    pub workers: u64,
    pub productivity: f64,
    pub firms: usize,
}

pub fn sector_aggregate(records: &[FirmRecord]) -> Vec<SectorAggregate> {
    let mut acc: BTreeMap<&str, (f64, u64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.sector.as_str()).or_insert((0.0, 0, 0));
        e.0 += r.output;
        e.1 += r.workers;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(s, (y, l, n))| SectorAggregate {
            sector: s.to_string(),
            output: y,
            workers: l,
            productivity: y / l as f64,
            firms: n,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "firm_id,year,output,workers,sector\n\
                        a,2000,10.0,5,s1\n\
                        b,2000,3.0,1,s2\n\
                        c,2001,8.5,2,s1\n";

    #[test]
    fn well_formed_rows() {
        let rep = read_panel(GOOD.as_bytes(), 0).unwrap();
        assert_eq!(rep.panel.len(), 3);
        assert!(rep.rejections.is_empty());
        assert_eq!(rep.panel.years[&2000][0].productivity, 2.0);
        assert_eq!(rep.panel.years[&2001][0].productivity, 4.25);
    }

    #[test]
    fn zero_workers_rejected_with_line() {
        let text = format!("{GOOD}d,2001,4.0,0,s3\n");
        let rep = read_panel(text.as_bytes(), 10).unwrap();
        assert_eq!(rep.panel.len(), 3);
        assert_eq!(rep.rejections.len(), 1);
        assert_eq!(rep.rejections[0].line, 5);
        assert!(rep.rejections[0].reason.contains("workers"));
    }

    #[test]
    fn rejection_ceiling_is_fatal() {
        let text = format!("{GOOD}d,2001,4.0,0,s3\ne,x,1,1,s\n");
        assert!(matches!(
            read_panel(text.as_bytes(), 1),
            Err(CliError::TooManyRejections { count: 2, .. })
        ));
    }

    #[test]
    fn missing_column_is_fatal() {
        let text = "firm_id,year,output,sector\na,2000,1,s\n";
        match read_panel(text.as_bytes(), 10) {
            Err(CliError::MissingColumns(c)) => assert_eq!(c, vec!["workers".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trimming() {
        let records: Vec<FirmRecord> = (0..100)
            .map(|i| FirmRecord::new(format!("f{i}"), 2000, (i + 1) as f64, 1, "s".into()))
            .collect();
        let panel = Panel::from_records(records);
        let (same, audit) = trim_outliers(&panel, 0);
        assert_eq!(same, panel);
        assert!(audit.is_empty());
        let (t, audit) = trim_outliers(&panel, 10);
        assert_eq!(t.len(), 90);
        assert_eq!(audit.len(), 10);
        assert_eq!(t.max_productivity(), Some(90.0));
        assert!(audit.iter().all(|e| e.productivity > 90.0));
    }

    #[test]
    fn weighting_hand_counts() {
        let one = [FirmRecord::new("a".into(), 1, 10.0, 5, "s".into())];
        let w = worker_weighted_sample(&one);
        assert_eq!((w.values[0], w.weights[0]), (2.0, 5.0));
        let two = [
            FirmRecord::new("a".into(), 1, 1.0, 1, "s".into()),
            FirmRecord::new("b".into(), 1, 6.0, 3, "s".into()),
        ];
        let rs = worker_weighted_sample(&two).rank_size();
        assert_eq!(rs[0], (2.0, 0.75));
        assert_eq!(rs[1], (1.0, 1.0));
    }

    #[test]
    fn csv_roundtrip() {
        let panel = read_panel(GOOD.as_bytes(), 0).unwrap().panel;
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        assert_eq!(read_panel(buf.as_slice(), 0).unwrap().panel, panel);
    }

    #[test]
    fn sectors_sum_output_over_workers() {
        let panel = read_panel(GOOD.as_bytes(), 0).unwrap().panel;
        let all: Vec<FirmRecord> = panel.years.values().flatten().cloned().collect();
        let s = sector_aggregate(&all);
        assert_eq!(s[0].sector, "s1");
        assert_eq!(s[0].productivity, 18.5 / 7.0);
    }
}
