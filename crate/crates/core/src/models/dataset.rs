use std::io::{Read, Write};

use crate::trace::fmt_f64;

/// A regression record `(z, x)`. Plain scalar data uses an empty `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub z: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("expected header z, x1..xd")]
    Header,
    #[error("line {line}: cannot parse {value:?}")]
    Value { line: usize, value: String },
    #[error("records have different covariate lengths")]
    Ragged,
}

/// Writes `z,x1..xd` with 17 significant digits.
pub fn write_dataset<W: Write>(records: &[Record], w: W) -> Result<(), DatasetError> {
    let d = records.first().map_or(0, |r| r.x.len());
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["z".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    wtr.write_record(&header)?;
    for r in records {
        if r.x.len() != d {
            return Err(DatasetError::Ragged);
        }
        let mut row = vec![fmt_f64(r.z)];
        row.extend(r.x.iter().copied().map(fmt_f64));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<Vec<Record>, DatasetError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let d = headers.len().checked_sub(1).ok_or(DatasetError::Header)?;
    let ok = headers.get(0).map(str::trim) == Some("z")
        && (1..=d).all(|i| headers.get(i).map(str::trim) == Some(format!("x{i}").as_str()));
    if !ok {
        return Err(DatasetError::Header);
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| DatasetError::Value {
                line: k + 2,
                value: s.to_string(),
            })
        };
        let z = parse(&rec[0])?;
        let x = (1..=d).map(|i| parse(&rec[i])).collect::<Result<_, _>>()?;
        out.push(Record { z, x });
    }
    Ok(out)
}
