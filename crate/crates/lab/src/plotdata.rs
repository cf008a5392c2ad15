//! Long-format plot data: one `(abscissa, name, unit, value)` row per sample.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::LabError;
use crate::output::{fmt, Column, Series};

#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    /// First column of the source table (time for runs, radius for profiles).
    pub abscissa: Column,
    /// Factor applied to every value.
    pub scale: f64,
    pub rows: Vec<(f64, String, String, f64)>,
}

/// Reshapes `series`; `columns` selects which columns to emit (all but the
/// abscissa when empty). No transformation other than `scale` is applied.
pub fn emit_plotdata(series: &Series, columns: &[String], scale: f64) -> Result<PlotData, LabError> {
    let Some(abscissa) = series.columns.first().cloned() else {
        return Err(LabError::Config(String::from("diagnostics table has no columns")));
    };
    if !scale.is_finite() || scale == 0.0 {
        return Err(LabError::config("scale", "must be finite and non-zero"));
    }
    let picked: Vec<usize> = if columns.is_empty() {
        (1..series.columns.len()).collect()
    } else {
        columns
            .iter()
            .map(|c| series.index(c).ok_or_else(|| LabError::Config(format!("unknown column '{c}'"))))
            .collect::<Result<_, _>>()?
    };
    let mut rows = Vec::with_capacity(series.rows.len() * picked.len());
    for r in &series.rows {
        for &k in &picked {
            let c = &series.columns[k];
            rows.push((r[0], c.name.clone(), c.unit.clone(), scale * r[k]));
        }
    }
    Ok(PlotData { abscissa, scale, rows })
}

impl PlotData {
    pub fn write_csv(&self, path: &Path) -> Result<(), LabError> {
        let file = File::create(path).map_err(|e| LabError::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let err = |e: csv::Error| LabError::io(path, std::io::Error::other(e));
        let value = format!("value [x{}]", fmt(self.scale));
        w.write_record([self.abscissa.header().as_str(), "name [-]", "unit [-]", value.as_str()]).map_err(err)?;
        for (t, n, u, v) in &self.rows {
            w.write_record([fmt(*t).as_str(), n, u, fmt(*v).as_str()]).map_err(err)?;
        }
        w.flush().map_err(|e| LabError::io(path, e))
    }
}
