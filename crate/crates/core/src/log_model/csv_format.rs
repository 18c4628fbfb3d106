use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{Log, LogEntry, LogSet};

pub const CSV_HEADER: [&str; 6] = ["log_id", "seq", "timestamp", "component", "event", "params"];

/// Reads the structured-log CSV format.
///
/// Rows are grouped by `log_id`; within a log, entries are ordered by `seq`
/// and ties can not occur because a repeated `(log_id, seq)` is an error.
pub fn parse_logs<R: Read>(reader: R) -> Result<LogSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(Error::Parse { line: 1, message: "missing header row".into() }),
    };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`, found `{}`", CSV_HEADER.join(","), names.join(",")),
        });
    }

    let mut grouped: BTreeMap<String, BTreeMap<u64, LogEntry>> = BTreeMap::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != CSV_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", CSV_HEADER.len(), record.len()),
            });
        }
        let log_id = record[0].to_string();
        if log_id.is_empty() {
            return Err(Error::Parse { line, message: "empty log_id".into() });
        }
        let seq: u64 = record[1].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("seq `{}` is not a non-negative integer", &record[1]),
        })?;
        let component = &record[3];
        let event = &record[4];
        if component.is_empty() {
            return Err(Error::Parse { line, message: "empty component".into() });
        }
        if event.is_empty() {
            return Err(Error::Parse { line, message: "empty event".into() });
        }
        let entry = LogEntry {
            timestamp: Some(record[2].to_string()).filter(|t| !t.is_empty()),
            component: component.to_string(),
            event: event.to_string(),
            params: split_params(&record[5]),
        };
        let entries = grouped.entry(log_id.clone()).or_default();
        if entries.insert(seq, entry).is_some() {
            return Err(Error::DuplicateSeq { log_id, seq, line });
        }
    }

    LogSet::from_logs(
        grouped
            .into_iter()
            .map(|(id, entries)| Log::new(id, entries.into_values().collect())),
    )
}

/// Writes logs in the CSV format, numbering `seq` from 1 within each log.
pub fn write_logs<W: Write>(logs: &LogSet, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for log in logs {
        for (i, e) in log.entries.iter().enumerate() {
            let seq = (i + 1).to_string();
            let params = join_params(&e.params);
            wtr.write_record([
                log.log_id.as_str(),
                seq.as_str(),
                e.timestamp.as_deref().unwrap_or(""),
                e.component.as_str(),
                e.event.as_str(),
                params.as_str(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn split_params(field: &str) -> Vec<String> {
    if field.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = field.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' if chars.peek() == Some(&';') => {
                cur.push(';');
                chars.next();
            }
            ';' => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

fn join_params(params: &[String]) -> String {
    params
        .iter()
        .map(|p| p.replace(';', "\\;"))
        .collect::<Vec<_>>()
        .join(";")
}
