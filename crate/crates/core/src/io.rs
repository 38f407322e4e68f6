//! CSV reading and writing. Data files use the header
//! `process_id,x,y,z[,cov_1..cov_k]` with 1-based process ids; an intercept
//! column is always prepended to the covariates read from file.

use std::io::{Read, Write};
use std::path::Path;

use crate::bootstrap::BootstrapResult;
use crate::error::{Error, Result};
use crate::model::{MultivariateDataset, ProcessData};
use crate::predict::{PredictionResult, Query};
use crate::warp::Location;

/// Formats with 17 significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Rows of a point file in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTable {
    /// Zero-based process index of each row.
    pub process: Vec<usize>,
    pub locations: Vec<Location>,
    /// Present when the file has a `z` column.
    pub z: Option<Vec<f64>>,
    /// Extra covariates per row, without the intercept.
    pub covariates: Vec<Vec<f64>>,
}

impl PointTable {
    pub fn len(&self) -> usize {
        self.process.len()
    }

    pub fn is_empty(&self) -> bool {
        self.process.is_empty()
    }

    pub fn n_processes(&self) -> usize {
        self.process.iter().map(|i| i + 1).max().unwrap_or(0)
    }

    /// Groups rows by process. Processes without rows stay empty, so `p`
    /// may exceed the largest id in the file.
    pub fn to_dataset(&self, p: usize) -> Result<MultivariateDataset> {
        let z = self
            .z
            .as_ref()
            .ok_or_else(|| Error::InvalidData("data file needs a `z` column".into()))?;
        if self.n_processes() > p {
            return Err(Error::ProcessIndex {
                index: self.n_processes(),
                count: p,
            });
        }
        let q = 1 + self.covariates.first().map_or(0, |c| c.len());
        let mut processes: Vec<ProcessData> = (0..p)
            .map(|_| ProcessData {
                locations: vec![],
                z: Some(vec![]),
                covariates: vec![],
            })
            .collect();
        for r in 0..self.len() {
            let pd = &mut processes[self.process[r]];
            pd.locations.push(self.locations[r].clone());
            pd.z.as_mut().unwrap().push(z[r]);
            let mut row = vec![1.0];
            row.extend(&self.covariates[r]);
            pd.covariates.push(row);
        }
        MultivariateDataset::new(processes, q)
    }

    pub fn to_queries(&self) -> Vec<Query> {
        (0..self.len())
            .map(|r| {
                let mut covariates = vec![1.0];
                covariates.extend(&self.covariates[r]);
                Query {
                    process: self.process[r],
                    location: self.locations[r].clone(),
                    covariates,
                }
            })
            .collect()
    }
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidData(format!("line {line}: {msg}"))
}

pub fn read_points_from<R: Read>(reader: R) -> Result<PointTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::InvalidData(format!("csv header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 3 || header[0] != "process_id" || header[1] != "x" || header[2] != "y" {
        return Err(Error::InvalidData(
            "csv header must start with process_id,x,y".into(),
        ));
    }
    let has_z = header.get(3).is_some_and(|h| h == "z");
    let cov_start = if has_z { 4 } else { 3 };
    for (k, h) in header[cov_start..].iter().enumerate() {
        if *h != format!("cov_{}", k + 1) {
            return Err(Error::InvalidData(format!("unexpected column `{h}`")));
        }
    }
    let mut t = PointTable {
        process: vec![],
        locations: vec![],
        z: has_z.then(Vec::new),
        covariates: vec![],
    };
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| parse_err(line, e))?;
        if rec.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields", header.len())));
        }
        let id: usize = rec[0]
            .parse()
            .map_err(|e| parse_err(line, format!("process_id: {e}")))?;
        if id == 0 {
            return Err(parse_err(line, "process ids are 1-based"));
        }
        let num = |k: usize| -> Result<f64> {
            let v: f64 = rec[k]
                .parse()
                .map_err(|e| parse_err(line, format!("{}: {e}", header[k])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("{} is not finite", header[k])));
            }
            Ok(v)
        };
        t.process.push(id - 1);
        t.locations.push(Location::xy(num(1)?, num(2)?));
        if let Some(z) = t.z.as_mut() {
            z.push(num(3)?);
        }
        t.covariates
            .push((cov_start..header.len()).map(num).collect::<Result<_>>()?);
    }
    Ok(t)
}

pub fn read_points(path: &Path) -> Result<PointTable> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::InvalidData(format!("cannot open {}: {e}", path.display())))?;
    read_points_from(f)
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidData(format!("write failed: {e}"))
}

/// Writes a dataset (observations required) in process order.
pub fn write_dataset<W: Write>(mut w: W, ds: &MultivariateDataset) -> Result<()> {
    let k = ds.q - 1;
    let mut header = String::from("process_id,x,y,z");
    for c in 1..=k {
        header.push_str(&format!(",cov_{c}"));
    }
    writeln!(w, "{header}").map_err(io_err)?;
    for (i, pd) in ds.processes.iter().enumerate() {
        let z = pd
            .z
            .as_ref()
            .ok_or_else(|| Error::InvalidData(format!("process {} has no observations", i + 1)))?;
        for (r, s) in pd.locations.iter().enumerate() {
            let mut line = format!("{},{},{},{}", i + 1, fmt(s[0]), fmt(s[1]), fmt(z[r]));
            for c in &pd.covariates[r][1..] {
                line.push(',');
                line.push_str(&fmt(*c));
            }
            writeln!(w, "{line}").map_err(io_err)?;
        }
    }
    Ok(())
}

/// `process_id,x,y,mean,sd,sd_obs`.
pub fn write_predictions<W: Write>(mut w: W, pred: &PredictionResult) -> Result<()> {
    writeln!(w, "process_id,x,y,mean,sd,sd_obs").map_err(io_err)?;
    for q in &pred.predictions {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            q.process + 1,
            fmt(q.location[0]),
            fmt(q.location[1]),
            fmt(q.mean),
            fmt(q.variance.sqrt()),
            fmt(q.observation_variance.sqrt())
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// `process_id,x,y,wx,wy`: original and homogenized warped coordinates.
pub fn write_warped<W: Write>(
    mut w: W,
    original: &[Vec<Location>],
    warped: &[Vec<Location>],
) -> Result<()> {
    writeln!(w, "process_id,x,y,wx,wy").map_err(io_err)?;
    for (i, (o, h)) in original.iter().zip(warped).enumerate() {
        for (s, t) in o.iter().zip(h) {
            writeln!(
                w,
                "{},{},{},{},{}",
                i + 1,
                fmt(s[0]),
                fmt(s[1]),
                fmt(t[0]),
                fmt(t[1])
            )
            .map_err(io_err)?;
        }
    }
    Ok(())
}

/// `replicate,parameter,value`.
pub fn write_bootstrap_replicates<W: Write>(mut w: W, res: &BootstrapResult) -> Result<()> {
    writeln!(w, "replicate,parameter,value").map_err(io_err)?;
    for r in &res.replicates {
        for (name, v) in res.parameters.iter().zip(&r.values) {
            writeln!(w, "{},{},{}", r.index + 1, name, fmt(*v)).map_err(io_err)?;
        }
    }
    Ok(())
}

/// `parameter,lower,upper,level`.
pub fn write_intervals<W: Write>(mut w: W, res: &BootstrapResult) -> Result<()> {
    writeln!(w, "parameter,lower,upper,level").map_err(io_err)?;
    for i in &res.intervals {
        writeln!(
            w,
            "{},{},{},{}",
            i.parameter,
            fmt(i.lower),
            fmt(i.upper),
            fmt(i.level)
        )
        .map_err(io_err)?;
    }
    Ok(())
}
