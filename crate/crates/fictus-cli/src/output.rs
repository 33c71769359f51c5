//! CSV and JSON writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use fictus::pde::TrajectoryField;
use serde::Serialize;

use crate::pipeline::{PipelineRun, WeightRow};
use crate::CliError;

/// Rows (t, x, component, value) with 1-based components; returns the row count.
pub fn write_trajectory_csv<W: Write>(out: W, field: &TrajectoryField) -> Result<usize, CliError> {
    let g = field.grid;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "component", "value"])?;
    let mut rows = 0;
    for k in 0..=g.nt {
        let t = g.t(k);
        for comp in 0..field.m {
            for (i, v) in field.slice_comp(k, comp).iter().enumerate() {
                w.serialize((t, g.x(i), comp + 1, v))?;
                rows += 1;
            }
        }
    }
    w.flush()?;
    Ok(rows)
}

pub fn write_weights_csv<W: Write>(out: W, rows: &[WeightRow]) -> Result<usize, CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows.len())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn csv_file(dir: &Path, name: &str) -> Result<(PathBuf, std::io::BufWriter<std::fs::File>), CliError> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path)?;
    Ok((path, std::io::BufWriter::new(file)))
}

/// Writes report.json and the requested CSVs under `dir`; returns the written paths.
pub fn write_pipeline_outputs(dir: &Path, run: &PipelineRun) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let report_path = dir.join("report.json");
    write_json(&report_path, &run.report)?;
    written.push(report_path);
    let outputs = &run.report.config.outputs;
    if let Some(f) = &run.fields {
        if outputs.trajectories {
            for (name, field) in [
                ("state.csv", &f.y),
                ("control.csv", &f.u),
                ("fictitious_state.csv", &f.y_fictitious),
                ("fictitious_control.csv", &f.v_fictitious),
            ] {
                let (path, w) = csv_file(dir, name)?;
                write_trajectory_csv(w, field)?;
                written.push(path);
            }
        }
        if outputs.residuals {
            let (path, w) = csv_file(dir, "residual.csv")?;
            write_trajectory_csv(w, &f.residual)?;
            written.push(path);
        }
    }
    if outputs.weights_csv && run.report.weights.is_some() {
        let rows = crate::pipeline::run_weights(&run.report.config)?;
        let (path, w) = csv_file(dir, "weights.csv")?;
        write_weights_csv(w, &rows)?;
        written.push(path);
    }
    Ok(written)
}
