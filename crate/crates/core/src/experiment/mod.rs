//! Experiment grids over normal classes, methods and seeds; ρ and β sweeps;
//! CSV reports and SVG curves.
//!
//! Every output is a pure function of the manifest and the data files: cells
//! run in parallel but each is deterministic, and rows are written in grid
//! order.

mod data;
mod manifest;
mod plot;
mod report;
mod runner;

pub use data::{load_manifest_data, Dataset};
pub use manifest::{DatasetSource, Manifest, Method, ThresholdRule};
pub use plot::{parse_curve, render_svg, Curve};
pub use report::{aggregate_csv, curve_csv, overall_mean, results_csv};
pub use runner::{
    evaluate_features, run_grid, run_sweep, summarize, CellResult, CurvePoint, Outcome, RunReport, Summary, SweepParam,
};

use std::path::{Path, PathBuf};

use crate::pipeline::{split, stage1_train, TrainConfig};
use crate::{Error, Result};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Run the grid and write `results.csv` and `aggregate.csv` to the output directory.
pub fn cmd_run(manifest: &Manifest) -> Result<RunReport> {
    let (data, external) = load_manifest_data(manifest)?;
    let report = run_grid(manifest, &data, external.as_ref())?;
    write_file(&manifest.output_dir.join("results.csv"), &results_csv(&report)?)?;
    write_file(&manifest.output_dir.join("aggregate.csv"), &aggregate_csv(&report)?)?;
    Ok(report)
}

/// Sweep `param` and write `<param>_curve.csv` to the output directory.
pub fn cmd_sweep(manifest: &Manifest, param: SweepParam, values: &[f64]) -> Result<Vec<CurvePoint>> {
    param.validate(values)?;
    let (data, _) = load_manifest_data(manifest)?;
    let points = run_sweep(manifest, &data, param, values)?;
    write_file(
        &manifest.output_dir.join(format!("{}_curve.csv", param.as_str())),
        &curve_csv(param, &points)?,
    )?;
    Ok(points)
}

/// Render a curve CSV as SVG. Nothing is written if the curve is unusable.
pub fn cmd_export_plot(curve: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(curve).map_err(|e| Error::io(curve, e))?;
    let svg = render_svg(&parse_curve(&text)?);
    write_file(out, &svg)
}

/// Written split diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub path: PathBuf,
    /// Training-set indices with the lowest similarity, lowest first.
    pub lowest: Vec<(usize, f64)>,
    /// Training-set indices with the highest similarity, highest first.
    pub highest: Vec<(usize, f64)>,
}

/// Train stage 1 for one class and seed, split the training set, and write
/// `split_class<c>_seed<s>.csv` (`index,score,flag`).
pub fn cmd_split_report(manifest: &Manifest, class: u8, seed: u64, extremes: usize) -> Result<SplitReport> {
    let (data, _) = load_manifest_data(manifest)?;
    let exp = data.split(class, &manifest.experiment, manifest.split_seed)?;
    let cfg = TrainConfig {
        seed,
        ..manifest.train.clone()
    };
    let trainer = stage1_train(&exp.train, &cfg)?;
    let assignment = split(trainer.params(), &exp.train, cfg.rho, &cfg.ssim)?;
    let path = manifest.output_dir.join(format!("split_class{class}_seed{seed}.csv"));
    write_file(&path, &assignment.to_csv())?;
    let ranking = assignment.ranking();
    let pick = |i: &usize| (*i, assignment.scores[*i]);
    Ok(SplitReport {
        path,
        lowest: ranking.iter().take(extremes).map(pick).collect(),
        highest: ranking.iter().rev().take(extremes).map(pick).collect(),
    })
}
