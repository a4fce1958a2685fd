//! `eval`: score a prediction file against ground truth at each IoU threshold.

use super::config::RunConfig;
use super::records::write_json;
use crate::error::{Error, Result};
use crate::eval::{evaluate_run, render_table, EvalReport};

pub const REPORT_JSON: &str = "eval.json";
pub const REPORT_TABLE: &str = "eval.txt";

/// Evaluate `--detections` (prediction records) against `--gt` and write
/// `eval.json` and `eval.txt`. Returns the reports and the rendered table.
pub fn cmd_eval(cfg: &RunConfig) -> Result<(Vec<EvalReport>, String)> {
    cfg.validate()?;
    let preds = cfg
        .detections
        .as_deref()
        .ok_or_else(|| Error::Config("--detections (predictions) is required".into()))?;
    let gt = cfg
        .gt
        .as_deref()
        .ok_or_else(|| Error::Config("--gt is required".into()))?;
    let reports = evaluate_run(preds, gt, &cfg.iou, cfg.exclude.as_deref())?;
    let table = render_table(&reports);
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write_json(&cfg.out.join(REPORT_JSON), &reports)?;
    let path = cfg.out.join(REPORT_TABLE);
    std::fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    Ok((reports, table))
}
