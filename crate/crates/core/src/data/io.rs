//! Long-format delimited text: `id,tstart,tstop,status,<covariates...>`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{CovariatePath, Dataset, Segment};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct RawRow<F> {
    order: usize,
    tstart: F,
    tstop: F,
    status: u8,
    values: Vec<F>,
}

/// Reads long-format rows into a [`Dataset`]. Rows of one subject may be
/// interleaved with other subjects; they are reassembled by `tstart`. Subjects
/// are ordered by id (numerically when every id parses as an integer,
/// lexicographically otherwise) so that the result does not depend on row
/// order.
pub fn ingest_long_format<F: Scalar, R: Read>(
    reader: R,
    horizon: Option<F>,
) -> Result<Dataset<F>> {
    let (names, subjects) = ingest_long_format_histories(reader)?;
    Dataset::with_names(subjects, horizon, Some(names))
}

/// Reads long-format covariate histories without dataset-level validation;
/// for prediction inputs, where the status column carries no information.
pub fn ingest_long_format_histories<F: Scalar, R: Read>(
    reader: R,
) -> Result<(Vec<String>, Vec<CovariatePath<F>>)> {
    let mut csv_reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let expected = ["id", "tstart", "tstop", "status"];
    if headers.len() < 5 {
        return Err(Error::BadFormat(
            "header must be id,tstart,tstop,status followed by covariate columns".into(),
        ));
    }
    for (i, want) in expected.iter().enumerate() {
        if &headers[i] != *want {
            return Err(Error::BadFormat(format!(
                "column {} must be named `{}`, found `{}`",
                i + 1,
                want,
                &headers[i]
            )));
        }
    }
    let covariate_names: Vec<String> = headers.iter().skip(4).map(str::to_string).collect();
    let p = covariate_names.len();

    let mut groups: BTreeMap<String, Vec<RawRow<F>>> = BTreeMap::new();
    for (order, record) in csv_reader.records().enumerate() {
        let record = record?;
        if record.len() != 4 + p {
            return Err(Error::BadFormat(format!(
                "row {} has {} fields, expected {}",
                order + 2,
                record.len(),
                4 + p
            )));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::BadFormat(format!("row {} has an empty id", order + 2)));
        }
        let parse = |field: &str, column: &str| -> Result<F> {
            if field.is_empty() {
                return Err(Error::MissingValue {
                    id: id.clone(),
                    column: column.to_string(),
                });
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::BadFormat(format!("subject `{id}`: `{field}` is not a number in `{column}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::BadFormat(format!(
                    "subject `{id}`: non-finite value in `{column}`"
                )));
            }
            Ok(F::from_f64_lossy(v))
        };
        let tstart = parse(&record[1], "tstart")?;
        let tstop = parse(&record[2], "tstop")?;
        let status = match &record[3] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::BadFormat(format!(
                    "subject `{id}`: status must be 0 or 1, found `{other}`"
                )))
            }
        };
        let mut values = Vec::with_capacity(p);
        for (j, name) in covariate_names.iter().enumerate() {
            values.push(parse(&record[4 + j], name)?);
        }
        groups.entry(id).or_default().push(RawRow {
            order,
            tstart,
            tstop,
            status,
            values,
        });
    }
    if groups.is_empty() {
        return Err(Error::BadFormat("input contains no data rows".into()));
    }

    let numeric_ids = groups.keys().all(|id| id.parse::<i64>().is_ok());
    let mut keys: Vec<String> = groups.keys().cloned().collect();
    if numeric_ids {
        keys.sort_by_key(|id| id.parse::<i64>().unwrap());
    }

    let mut subjects = Vec::with_capacity(keys.len());
    for id in keys {
        let mut rows = groups.remove(&id).unwrap();
        rows.sort_by(|a, b| {
            a.tstart
                .partial_cmp(&b.tstart)
                .unwrap()
                .then(a.order.cmp(&b.order))
        });
        let last = rows.len() - 1;
        for (i, row) in rows.iter().enumerate() {
            if row.status == 1 && i != last {
                return Err(Error::EventOnNonFinalRow { id: id.clone() });
            }
        }
        let event = rows[last].status == 1;
        let segments: Vec<Segment<F>> = rows
            .into_iter()
            .map(|r| Segment {
                start: r.tstart,
                stop: r.tstop,
                values: r.values,
            })
            .collect();
        subjects.push(CovariatePath::new(id, segments, event)?);
    }

    Ok((covariate_names, subjects))
}

/// Convenience wrapper around [`ingest_long_format`] for a file path.
pub fn read_long_format_file<F: Scalar>(
    path: impl AsRef<Path>,
    horizon: Option<F>,
) -> Result<Dataset<F>> {
    let file = std::fs::File::open(path)?;
    ingest_long_format(std::io::BufReader::new(file), horizon)
}

/// Writes the dataset back out in long format. Floats are printed with the
/// shortest representation that round-trips, so `ingest(write(data))`
/// reproduces `data` exactly.
pub fn write_long_format<F: Scalar, W: Write>(data: &Dataset<F>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "id".to_string(),
        "tstart".to_string(),
        "tstop".to_string(),
        "status".to_string(),
    ];
    header.extend(data.covariate_names().iter().cloned());
    w.write_record(&header)?;
    for subject in data.subjects() {
        let last = subject.segments().len() - 1;
        for (i, seg) in subject.segments().iter().enumerate() {
            let status = if i == last && subject.event() { "1" } else { "0" };
            let mut record = vec![
                subject.id().to_string(),
                format!("{}", seg.start),
                format!("{}", seg.stop),
                status.to_string(),
            ];
            record.extend(seg.values.iter().map(|v| format!("{v}")));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}
