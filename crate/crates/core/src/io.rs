//! CSV formats: tick data as `asset_id,time,value` (value optional) and
//! synchronized grids as `p,T_p,tau_1,...,tau_d`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timegrid::{SyncGrid, TickSchedule};

#[derive(Debug, Serialize, Deserialize)]
struct TickRow {
    asset_id: u32,
    time: f64,
    value: Option<f64>,
}

/// Reads tick data; a header row is required. Rows of one asset must be in
/// ascending time order; assets are returned sorted by id.
pub fn read_ticks<R: Read>(reader: R) -> Result<Vec<TickSchedule>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 2 || names[0] != "asset_id" || names[1] != "time" || names.get(2).is_some_and(|h| *h != "value") {
        return Err(Error::input("tick CSV header must be asset_id,time[,value]"));
    }
    let mut assets: BTreeMap<u32, (Vec<f64>, Vec<Option<f64>>)> = BTreeMap::new();
    for row in rdr.deserialize::<TickRow>() {
        let row = row?;
        let entry = assets.entry(row.asset_id).or_default();
        entry.0.push(row.time);
        entry.1.push(row.value);
    }
    if assets.is_empty() {
        return Err(Error::input("tick CSV contains no rows"));
    }
    assets
        .into_iter()
        .map(|(id, (times, values))| {
            let present = values.iter().filter(|v| v.is_some()).count();
            if present == 0 {
                TickSchedule::new(id, times)
            } else if present == values.len() {
                TickSchedule::with_values(id, times, values.into_iter().flatten().collect())
            } else {
                Err(Error::input(format!("asset {id}: values missing on some rows")))
            }
        })
        .collect()
}

pub fn write_ticks<W: Write>(writer: W, schedules: &[TickSchedule]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["asset_id", "time", "value"])?;
    for s in schedules {
        for (i, t) in s.times().iter().enumerate() {
            let value = s.values().map(|v| v[i].to_string()).unwrap_or_default();
            wtr.write_record([s.asset_id.to_string(), t.to_string(), value])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_sync_grid<W: Write>(writer: W, grid: &SyncGrid) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["p".to_string(), "T_p".to_string()];
    header.extend((1..=grid.dim()).map(|k| format!("tau_{k}")));
    wtr.write_record(&header)?;
    for (p, t) in grid.grid.iter().enumerate() {
        let mut rec = vec![p.to_string(), t.to_string()];
        rec.extend(grid.per_asset.iter().map(|taus| taus[p].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
