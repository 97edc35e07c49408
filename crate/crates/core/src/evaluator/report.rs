use std::fs;
use std::io::Write;
use std::path::Path;

use super::EvaluationReport;
use crate::domain::PoolWeights;
use crate::error::Result;
use crate::pooler::{write_trajectories, TrajectoryPoint};

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// `method,apd,ks_stat,ks_p,lb1_p,lb2_p,floored,periods`
pub fn write_summary_csv<W: Write>(w: W, report: &EvaluationReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "apd", "ks_stat", "ks_p", "lb1_p", "lb2_p", "floored", "periods"])?;
    for m in &report.methods {
        let s = &m.summary;
        wtr.write_record([
            m.method.to_string(),
            s.apd.to_string(),
            s.ks.statistic.to_string(),
            s.ks.p_value.to_string(),
            opt(s.lb1.map(|r| r.p_value)),
            opt(s.lb2.map(|r| r.p_value)),
            s.floored_scores.to_string(),
            s.periods.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `method,origin,target,realized,pit,log_score,floored,mean`
pub fn write_scores_csv<W: Write>(w: W, report: &EvaluationReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "origin", "target", "realized", "pit", "log_score", "floored", "mean"])?;
    for m in &report.methods {
        for p in &m.periods {
            wtr.write_record([
                m.method.to_string(),
                p.origin.to_string(),
                p.target.to_string(),
                p.realized.to_string(),
                p.pit.to_string(),
                p.log_score.to_string(),
                p.floored.to_string(),
                p.mean.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Weight trajectories in `period,view_id,value,objective_tag` form. Prior-based methods
/// contribute both the optimised prior (`<method>-prior`) and the applied posterior weights.
pub fn write_weights_csv<W: Write>(w: W, report: &EvaluationReport) -> Result<()> {
    let mut rows = Vec::new();
    for m in &report.methods {
        for p in &m.periods {
            if let Some(v) = &p.weights {
                rows.push(TrajectoryPoint {
                    period: p.target,
                    weights: PoolWeights::normalized(v.clone())?,
                    tag: m.method.to_string(),
                });
            }
            if let Some(v) = &p.prior {
                rows.push(TrajectoryPoint {
                    period: p.target,
                    weights: PoolWeights::normalized(v.clone())?,
                    tag: format!("{}-prior", m.method),
                });
            }
        }
    }
    write_trajectories(w, &report.view_ids, &rows)
}

/// `method,target,realized,p1,p5,...,p95,p99` for methods with percentile summaries.
pub fn write_fan_csv<W: Write>(w: W, report: &EvaluationReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["method".to_string(), "target".into(), "realized".into()];
    header.extend(report.fan_levels.iter().map(|l| format!("p{}", (l * 100.0).round())));
    wtr.write_record(&header)?;
    for m in &report.methods {
        for p in &m.periods {
            if let Some(q) = &p.percentiles {
                let mut row = vec![m.method.to_string(), p.target.to_string(), p.realized.to_string()];
                row.extend(q.iter().map(|v| v.to_string()));
                wtr.write_record(&row)?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `report.json`, `summary.csv`, `scores.csv`, `weights.csv` and `fan.csv`.
pub fn write_report(report: &EvaluationReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let create = |name: &str| fs::File::create(dir.join(name));
    serde_json::to_writer_pretty(std::io::BufWriter::new(create("report.json")?), report)?;
    write_summary_csv(create("summary.csv")?, report)?;
    write_scores_csv(create("scores.csv")?, report)?;
    write_weights_csv(create("weights.csv")?, report)?;
    write_fan_csv(create("fan.csv")?, report)?;
    Ok(())
}

/// Reads a report written by [`write_report`].
pub fn read_report(path: &Path) -> Result<EvaluationReport> {
    let f = fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}
