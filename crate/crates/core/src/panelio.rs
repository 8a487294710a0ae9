//! CSV panel format.
//!
//! * loads: `site,day,time,load`, one row per sample, `time` as `HH:MM`;
//! * temperatures: `site,day,temp`;
//! * regimes: `site,day,regime` with 1-based regimes.
//!
//! Sites and days keep their order of first appearance in the loads file.
//! A (site, day) pair lacking any intra-day sample, its temperature (when a
//! temperature file is given) or its regime (when a regime file is given)
//! is masked.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::panel::{LoadPanel, PanelParts};
use crate::scalar::Scalar;

fn malformed(line: u64, message: impl Into<String>) -> Error {
    Error::Malformed {
        line,
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        csv::ErrorKind::UnequalLengths { .. } => malformed(line, "wrong number of columns"),
        _ => malformed(line, e.to_string()),
    }
}

/// Parses `HH:MM` into hours.
pub fn parse_time(s: &str) -> Option<f64> {
    let (h, m) = s.trim().split_once(':')?;
    let h: u32 = h.parse().ok()?;
    let m: u32 = m.parse().ok()?;
    if h >= 24 || m >= 60 {
        return None;
    }
    Some(h as f64 + m as f64 / 60.0)
}

/// Formats hours as `HH:MM`, rounding to the minute.
pub fn format_time(hours: f64) -> String {
    let minutes = (hours * 60.0).round() as i64;
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

struct Table {
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table<R: Read>(reader: R, header: &[&str]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if found != header {
        return Err(malformed(
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec.iter().map(|s| s.to_string()).collect()));
    }
    Ok(Table { rows })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_num(line: u64, field: &str, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| malformed(line, format!("cannot parse {what} `{field}`")))
}

/// Reads a panel from in-memory CSV readers.
pub fn read_panel_from<T: Scalar, L: Read, P: Read, G: Read>(
    loads: L,
    temps: Option<P>,
    regimes: Option<G>,
) -> Result<LoadPanel<T>> {
    let table = read_table(loads, &["site", "day", "time", "load"])?;
    let mut site_ids: HashMap<String, usize> = HashMap::new();
    let mut day_ids: HashMap<String, usize> = HashMap::new();
    let mut sites = Vec::new();
    let mut days = Vec::new();
    let mut minutes: Vec<i64> = Vec::new();
    let mut samples = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let hours = parse_time(&row[2])
            .ok_or_else(|| malformed(*line, format!("cannot parse time `{}`", row[2])))?;
        let value = parse_num(*line, &row[3], "load")?;
        let n = *site_ids.entry(row[0].clone()).or_insert_with(|| {
            sites.push(row[0].clone());
            sites.len() - 1
        });
        let j = *day_ids.entry(row[1].clone()).or_insert_with(|| {
            days.push(row[1].clone());
            days.len() - 1
        });
        let minute = (hours * 60.0).round() as i64;
        minutes.push(minute);
        samples.push((*line, n, j, minute, value));
    }
    if samples.is_empty() {
        return Err(malformed(1, "loads file has no rows"));
    }
    minutes.sort_unstable();
    minutes.dedup();
    let (ni, nn, nj) = (minutes.len(), sites.len(), days.len());
    let mut loads = vec![T::nan(); nj * nn * ni];
    let mut seen = vec![false; nj * nn * ni];
    for (line, n, j, minute, value) in samples {
        let i = minutes.binary_search(&minute).expect("collected minute");
        let at = (j * nn + n) * ni + i;
        if seen[at] {
            return Err(malformed(line, "duplicate (site, day, time) row"));
        }
        seen[at] = true;
        loads[at] = T::lit(value);
    }
    let mut observed: Vec<bool> = (0..nj * nn)
        .map(|idx| seen[idx * ni..(idx + 1) * ni].iter().all(|&s| s))
        .collect();

    // Rows for unknown (site, day) pairs are ignored.
    let lookup = |row: &[String]| -> Option<usize> {
        match (site_ids.get(&row[0]), day_ids.get(&row[1])) {
            (Some(&n), Some(&j)) => Some(j * nn + n),
            _ => None,
        }
    };

    let temps = match temps {
        Some(reader) => {
            let table = read_table(reader, &["site", "day", "temp"])?;
            let mut t = vec![T::nan(); nj * nn];
            for (line, row) in &table.rows {
                let value = parse_num(*line, &row[2], "temperature")?;
                if let Some(idx) = lookup(row) {
                    t[idx] = T::lit(value);
                }
            }
            Some(t)
        }
        None => None,
    };
    let (regimes, regime_count) = match regimes {
        Some(reader) => {
            let table = read_table(reader, &["site", "day", "regime"])?;
            let mut g = vec![usize::MAX; nj * nn];
            let mut count = 1;
            for (line, row) in &table.rows {
                let value: usize = row[2]
                    .parse()
                    .map_err(|_| malformed(*line, format!("cannot parse regime `{}`", row[2])))?;
                if value == 0 {
                    return Err(malformed(*line, "regimes are 1-based"));
                }
                if let Some(idx) = lookup(row) {
                    g[idx] = value - 1;
                    count = count.max(value);
                }
            }
            for (idx, r) in g.iter_mut().enumerate() {
                if *r == usize::MAX {
                    observed[idx] = false;
                    *r = 0;
                }
            }
            (Some(g), count)
        }
        None => (None, 1),
    };
    LoadPanel::new(PanelParts {
        intraday_grid: minutes.iter().map(|&m| T::lit(m as f64 / 60.0)).collect(),
        sites,
        days,
        loads,
        observed,
        temps,
        regimes,
        regime_count,
    })
}

/// Reads a panel from files; temperature and regime files are optional.
pub fn read_panel<T: Scalar>(
    loads: &Path,
    temps: Option<&Path>,
    regimes: Option<&Path>,
) -> Result<LoadPanel<T>> {
    let temps = temps.map(open).transpose()?;
    let regimes = regimes.map(open).transpose()?;
    read_panel_from(open(loads)?, temps, regimes)
}

/// Writes `loads.csv`, `regimes.csv` and, when available, `temps.csv` into
/// `dir`. Values use the shortest representation that reads back exactly;
/// masked days are written with `NaN` loads so every site and day survives.
pub fn write_panel<T: Scalar>(panel: &LoadPanel<T>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (nn, nj) = (panel.n_sites(), panel.n_days());
    let mut loads = std::io::BufWriter::new(File::create(dir.join("loads.csv"))?);
    writeln!(loads, "site,day,time,load")?;
    let times: Vec<String> = panel
        .intraday_grid()
        .iter()
        .map(|&u| format_time(u.to_f64_lossy()))
        .collect();
    for j in 0..nj {
        for n in 0..nn {
            match panel.curve(j, n) {
                Some(curve) => {
                    for (i, v) in curve.iter().enumerate() {
                        writeln!(loads, "{},{},{},{}", panel.sites()[n], panel.days()[j], times[i], v)?;
                    }
                }
                None => {
                    for time in &times {
                        writeln!(loads, "{},{},{},NaN", panel.sites()[n], panel.days()[j], time)?;
                    }
                }
            }
        }
    }
    loads.flush()?;
    if panel.has_temperatures() {
        let mut out = std::io::BufWriter::new(File::create(dir.join("temps.csv"))?);
        writeln!(out, "site,day,temp")?;
        for j in 0..nj {
            for n in 0..nn {
                let t = panel.temperature(j, n).expect("temperatures present");
                writeln!(out, "{},{},{}", panel.sites()[n], panel.days()[j], t)?;
            }
        }
        out.flush()?;
    }
    let mut out = std::io::BufWriter::new(File::create(dir.join("regimes.csv"))?);
    writeln!(out, "site,day,regime")?;
    for j in 0..nj {
        for n in 0..nn {
            writeln!(out, "{},{},{}", panel.sites()[n], panel.days()[j], panel.regime(j, n) + 1)?;
        }
    }
    out.flush()?;
    Ok(())
}
