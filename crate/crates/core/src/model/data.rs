use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// Which CSV columns to read. An empty `channel_cols` selects every column
/// other than the timestamp column.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp_col: Option<String>,
    #[serde(default)]
    pub channel_cols: Vec<String>,
}

impl CsvSchema {
    /// ETT-style files: a leading `date` column followed by numeric channels.
    pub fn ett() -> Self {
        Self { timestamp_col: Some("date".into()), channel_cols: vec![] }
    }
}

/// A multichannel series stored channel-major: `values[c][t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub channel_names: Vec<String>,
    pub timestamps: Option<Vec<String>>,
    pub values: Vec<Vec<f64>>,
}

impl RawSeries {
    pub fn new(channel_names: Vec<String>, values: Vec<Vec<f64>>) -> Self {
        Self { channel_names, timestamps: None, values }
    }

    pub fn n_channels(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Timesteps `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> RawSeries {
        RawSeries {
            channel_names: self.channel_names.clone(),
            timestamps: self.timestamps.as_ref().map(|t| t[start..end].to_vec()),
            values: self.values.iter().map(|c| c[start..end].to_vec()).collect(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<RawSeries> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ModelError::Io { path: shown.clone(), message: e.to_string() })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| ModelError::Parse { path: shown.clone(), line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(ModelError::Empty(shown));
    }
    let position = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| ModelError::MissingColumn(name.to_string()))
    };
    let ts_idx = schema.timestamp_col.as_deref().map(position).transpose()?;
    let channel_names: Vec<String> = if schema.channel_cols.is_empty() {
        header.iter().enumerate().filter(|(i, _)| Some(*i) != ts_idx).map(|(_, h)| h.clone()).collect()
    } else {
        schema.channel_cols.clone()
    };
    let channel_idx = channel_names.iter().map(|c| position(c)).collect::<Result<Vec<_>>>()?;
    if channel_idx.is_empty() {
        return Err(ModelError::InvalidParameter("no channel columns selected".into()));
    }

    let mut values = vec![Vec::new(); channel_idx.len()];
    let mut timestamps = ts_idx.map(|_| Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| ModelError::Parse {
            path: shown.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(ModelError::Parse {
                path: shown.clone(),
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (slot, &idx) in values.iter_mut().zip(&channel_idx) {
            let cell = &record[idx];
            let v: f64 = cell.parse().map_err(|_| ModelError::Parse {
                path: shown.clone(),
                line,
                message: format!("column {:?}: non-numeric value {cell:?}", header[idx]),
            })?;
            if !v.is_finite() {
                return Err(ModelError::Parse {
                    path: shown.clone(),
                    line,
                    message: format!("column {:?}: missing or non-finite value {cell:?}", header[idx]),
                });
            }
            slot.push(v);
        }
        if let (Some(ts), Some(i)) = (timestamps.as_mut(), ts_idx) {
            ts.push(record[i].to_string());
        }
    }
    if values[0].is_empty() {
        return Err(ModelError::Empty(shown));
    }
    Ok(RawSeries { channel_names, timestamps, values })
}

/// Writes a series with an optional leading timestamp column.
pub fn write_csv(series: &RawSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| ModelError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = Vec::new();
    if series.timestamps.is_some() {
        header.push("date".to_string());
    }
    header.extend(series.channel_names.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for t in 0..series.len() {
        let mut row = Vec::with_capacity(header.len());
        if let Some(ts) = &series.timestamps {
            row.push(ts[t].clone());
        }
        row.extend(series.values.iter().map(|c| c[t].to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| ModelError::Io { path: path.display().to_string(), message: e.to_string() })
}
