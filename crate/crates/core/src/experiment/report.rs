//! CSV renderings of run reports and sweep curves.
//!
//! * results: `dataset,normal_class,method,seed,bacc,error`, one row per cell,
//!   balanced accuracy as a fraction.
//! * aggregate: `dataset,normal_class,<method>,<method>_std,...,failures`, one
//!   row per class plus a final `mean` row, in percent.
//! * curve: `<rho|beta>,mean_bacc,std_bacc,failures`, one row per swept value,
//!   in percent.
//!
//! Aggregates only use successful cells; a cell that failed leaves its value
//! out and increments `failures`.

use super::manifest::Method;
use super::runner::{CurvePoint, RunReport, SweepParam};
use crate::Result;

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| crate::Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}", 100.0 * x)).unwrap_or_default()
}

pub fn results_csv(report: &RunReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "normal_class", "method", "seed", "bacc", "error"])?;
    for c in &report.cells {
        let (bacc, err) = match &c.bacc {
            Ok(b) => (format!("{b:.6}"), String::new()),
            Err(e) => (String::new(), e.clone()),
        };
        w.write_record([
            report.dataset.clone(),
            c.normal_class.to_string(),
            c.method.to_string(),
            c.seed.to_string(),
            bacc,
            err,
        ])?;
    }
    finish(w)
}

pub fn aggregate_csv(report: &RunReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dataset".to_owned(), "normal_class".to_owned()];
    for m in &report.methods {
        header.push(m.to_string());
        header.push(format!("{m}_std"));
    }
    header.push("failures".into());
    w.write_record(&header)?;

    let summaries: Vec<_> = report.methods.iter().map(|&m| report.summary(m)).collect();
    for (ci, &class) in report.classes.iter().enumerate() {
        let mut row = vec![report.dataset.clone(), class.to_string()];
        let mut failures = 0;
        for s in &summaries {
            let (_, stats, failed) = s.per_class[ci];
            row.push(pct(stats.map(|s| s.0)));
            row.push(pct(stats.map(|s| s.1)));
            failures += failed;
        }
        row.push(failures.to_string());
        w.write_record(&row)?;
    }
    let mut row = vec![report.dataset.clone(), "mean".to_owned()];
    for s in &summaries {
        row.push(pct(s.overall.map(|o| o.0)));
        row.push(pct(s.overall.map(|o| o.1)));
    }
    row.push(summaries.iter().map(|s| s.failures).sum::<usize>().to_string());
    w.write_record(&row)?;
    finish(w)
}

pub fn curve_csv(param: SweepParam, points: &[CurvePoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([param.as_str(), "mean_bacc", "std_bacc", "failures"])?;
    for p in points {
        w.write_record([
            p.value.to_string(),
            pct(p.summary.overall.map(|o| o.0)),
            pct(p.summary.overall.map(|o| o.1)),
            p.summary.failures.to_string(),
        ])?;
    }
    finish(w)
}

/// Overall mean balanced accuracy of `method` (fraction), if any cell succeeded.
pub fn overall_mean(report: &RunReport, method: Method) -> Option<f64> {
    report.summary(method).overall.map(|o| o.0)
}
