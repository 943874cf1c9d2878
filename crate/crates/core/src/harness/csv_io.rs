//! CSV formats for run curves, aggregates and sweep grids. Floats are written
//! with 17 significant digits so a parse recovers them exactly.

use std::fs;
use std::path::Path;

use super::experiment::AgentKind;
use super::series::{AggregateSeries, CtrSeries};
use super::sweep::SweepRow;
use super::HarnessError;

pub const AGGREGATE_HEADER: [&str; 4] = ["episode", "ctr_mean", "ctr_std", "n_runs"];
pub const RUN_HEADER: [&str; 3] = ["episode", "ctr", "ctr_moving_average"];
pub const SWEEP_HEADER: [&str; 8] = [
    "users",
    "items",
    "log10_users",
    "log10_items",
    "agent",
    "score_mean",
    "score_std",
    "runs",
];

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<(), HarnessError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found = r.headers().map_err(csv_err(path))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_err(path, format!("unexpected header {found:?}")));
    }
    r.records().map(|rec| rec.map_err(csv_err(path))).collect()
}

fn parse_err(path: &Path, reason: String) -> HarnessError {
    HarnessError::Parse {
        path: path.to_path_buf(),
        reason,
    }
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T, HarnessError> {
    let raw = rec.get(i).unwrap_or_default();
    raw.parse()
        .map_err(|_| parse_err(path, format!("bad value {raw:?} in column {i}")))
}

fn check_episode(path: &Path, rec: &csv::StringRecord, expected: usize) -> Result<(), HarnessError> {
    let e: usize = field(path, rec, 0)?;
    if e != expected {
        return Err(parse_err(path, format!("episode {e} where {expected} expected")));
    }
    Ok(())
}

/// Episodes are numbered from 1.
pub fn write_aggregate(series: &AggregateSeries, path: &Path) -> Result<(), HarnessError> {
    let rows = (0..series.len()).map(|e| {
        vec![
            (e + 1).to_string(),
            format_float(series.mean[e]),
            format_float(series.std[e]),
            series.runs.to_string(),
        ]
    });
    write_rows(path, &AGGREGATE_HEADER, rows)
}

pub fn read_aggregate(path: &Path) -> Result<AggregateSeries, HarnessError> {
    let records = read_rows(path, &AGGREGATE_HEADER)?;
    let mut series = AggregateSeries {
        mean: Vec::with_capacity(records.len()),
        std: Vec::with_capacity(records.len()),
        runs: 0,
    };
    for (e, rec) in records.iter().enumerate() {
        check_episode(path, rec, e + 1)?;
        series.mean.push(field(path, rec, 1)?);
        series.std.push(field(path, rec, 2)?);
        series.runs = field(path, rec, 3)?;
    }
    Ok(series)
}

pub fn write_run(series: &CtrSeries, path: &Path) -> Result<(), HarnessError> {
    let rows = (0..series.len()).map(|e| {
        vec![
            (e + 1).to_string(),
            format_float(series.values[e]),
            format_float(series.moving_average[e]),
        ]
    });
    write_rows(path, &RUN_HEADER, rows)
}

/// Reads a run curve; the seed is not stored in the file.
pub fn read_run(path: &Path, seed: u64) -> Result<CtrSeries, HarnessError> {
    let records = read_rows(path, &RUN_HEADER)?;
    let mut values = Vec::with_capacity(records.len());
    for (e, rec) in records.iter().enumerate() {
        check_episode(path, rec, e + 1)?;
        values.push(field(path, rec, 1)?);
    }
    Ok(CtrSeries::new(seed, values))
}

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<(), HarnessError> {
    let rows = rows.iter().map(|r| {
        vec![
            r.users.to_string(),
            r.items.to_string(),
            format_float((r.users as f64).log10()),
            format_float((r.items as f64).log10()),
            r.agent.name().to_string(),
            format_float(r.score_mean),
            format_float(r.score_std),
            r.runs.to_string(),
        ]
    });
    write_rows(path, &SWEEP_HEADER, rows)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    read_rows(path, &SWEEP_HEADER)?
        .iter()
        .map(|rec| {
            let agent: String = field(path, rec, 4)?;
            Ok(SweepRow {
                users: field(path, rec, 0)?,
                items: field(path, rec, 1)?,
                agent: agent
                    .parse::<AgentKind>()
                    .map_err(|e| parse_err(path, e))?,
                score_mean: field(path, rec, 5)?,
                score_std: field(path, rec, 6)?,
                runs: field(path, rec, 7)?,
            })
        })
        .collect()
}
