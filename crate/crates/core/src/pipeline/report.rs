use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::updater::Strategy;

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";

/// One slice of a simulated run. Skipped rounds have `beta = 0` and no `r` or update ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub slice: u32,
    pub strategy: Strategy,
    pub r: Option<u64>,
    pub beta: usize,
    pub mmd: Option<f64>,
    pub delta_bytes: usize,
    pub cum_bytes: usize,
    pub cloud_p5: f64,
    pub cloud_n5: f64,
    pub cloud_p10: f64,
    pub cloud_n10: f64,
    pub dev_p5: f64,
    pub dev_n5: f64,
    pub dev_p10: f64,
    pub dev_n10: f64,
    pub cr_model: f64,
    pub cr_update: Option<f64>,
    pub cr_total: Option<f64>,
    pub secs: f64,
}

pub fn reports_to_csv(reports: &[RoundReport]) -> Result<Vec<u8>> {
    if reports.is_empty() {
        return Err(Error::invalid("no rounds to report"));
    }
    records_to_csv(reports)
}

/// Any serializable records as CSV with a header row.
pub fn records_to_csv<T: Serialize>(records: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

pub fn reports_to_json(reports: &[RoundReport]) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(reports)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_reports(dir: &Path, reports: &[RoundReport]) -> Result<()> {
    super::run::ensure_dir(dir)?;
    std::fs::write(dir.join(REPORT_CSV), reports_to_csv(reports)?)?;
    std::fs::write(dir.join(REPORT_JSON), reports_to_json(reports)?)?;
    Ok(())
}

fn parse_csv(path: &Path) -> Result<Vec<RoundReport>> {
    let bad = |e: &dyn std::fmt::Display| Error::Data(format!("{}: {e}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| bad(&e))?;
    rd.deserialize().map(|r| r.map_err(|e| bad(&e))).collect()
}

fn parse_json(path: &Path) -> Result<Vec<RoundReport>> {
    let bytes = std::fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Reads a run directory, checking that its CSV and JSON reports agree.
pub fn read_run(dir: &Path) -> Result<Vec<RoundReport>> {
    let csv_path = dir.join(REPORT_CSV);
    let json_path = dir.join(REPORT_JSON);
    let from_csv = parse_csv(&csv_path)?;
    let from_json = parse_json(&json_path)?;
    if from_csv != from_json {
        return Err(Error::Data(format!(
            "{} and {} disagree",
            csv_path.display(),
            json_path.display()
        )));
    }
    if from_json.is_empty() {
        return Err(Error::Data(format!("{} holds no rounds", json_path.display())));
    }
    Ok(from_json)
}

#[derive(Clone, Debug)]
pub struct Run {
    pub name: String,
    pub reports: Vec<RoundReport>,
}

impl Run {
    /// The fixed ratio used, if any round carried one.
    pub fn ratio(&self) -> Option<u64> {
        self.reports.iter().find_map(|r| r.r)
    }

    pub fn update_beta(&self) -> Option<usize> {
        self.reports.iter().skip(1).map(|r| r.beta).find(|&b| b > 0)
    }

    pub fn total_bytes(&self) -> usize {
        self.reports.last().map_or(0, |r| r.cum_bytes)
    }

    pub fn mean_dev_p10(&self) -> f64 {
        let after: Vec<f64> = self.reports.iter().skip(1).map(|r| r.dev_p10).collect();
        if after.is_empty() {
            self.reports[0].dev_p10
        } else {
            after.iter().sum::<f64>() / after.len() as f64
        }
    }
}

/// Expands `paths` into run directories: a directory with a report is a run,
/// otherwise its immediate subdirectories with reports are.
pub fn discover_runs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut runs = Vec::new();
    for p in paths {
        if p.join(REPORT_JSON).is_file() || p.join(REPORT_CSV).is_file() {
            runs.push(p.clone());
            continue;
        }
        if !p.is_dir() {
            return Err(Error::Data(format!("{} is not a run directory", p.display())));
        }
        let mut subs: Vec<PathBuf> = std::fs::read_dir(p)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|s| s.join(REPORT_JSON).is_file() || s.join(REPORT_CSV).is_file())
            .collect();
        subs.sort();
        if subs.is_empty() {
            return Err(Error::Data(format!("no reports under {}", p.display())));
        }
        runs.extend(subs);
    }
    Ok(runs)
}

pub fn load_runs(paths: &[PathBuf]) -> Result<Vec<Run>> {
    discover_runs(paths)?
        .into_iter()
        .map(|dir| {
            let name = dir
                .file_name()
                .map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
            Ok(Run {
                name,
                reports: read_run(&dir)?,
            })
        })
        .collect()
}

/// `slice,<run>_dev_p10,<run>_dev_n10,<run>_cum_bytes,…`
pub fn side_by_side(runs: &[Run]) -> String {
    let mut slices: BTreeMap<u32, Vec<Option<&RoundReport>>> = BTreeMap::new();
    for (i, run) in runs.iter().enumerate() {
        for r in &run.reports {
            slices.entry(r.slice).or_insert_with(|| vec![None; runs.len()])[i] = Some(r);
        }
    }
    let mut out = String::from("slice");
    for run in runs {
        let _ = write!(out, ",{0}_dev_p10,{0}_dev_n10,{0}_cum_bytes", run.name);
    }
    out.push('\n');
    for (slice, row) in slices {
        let _ = write!(out, "{slice}");
        for cell in row {
            match cell {
                Some(r) => {
                    let _ = write!(out, ",{},{},{}", r.dev_p10, r.dev_n10, r.cum_bytes);
                }
                None => out.push_str(",,,"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn accuracy_vs_bytes(runs: &[Run]) -> String {
    let mut out = String::from("run,strategy,slice,cum_bytes,dev_p10,dev_n10,cloud_p10\n");
    for run in runs {
        for r in &run.reports {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                run.name, r.strategy, r.slice, r.cum_bytes, r.dev_p10, r.dev_n10, r.cloud_p10
            );
        }
    }
    out
}

/// Fixed-ratio runs ordered by `r`.
pub fn accuracy_vs_ratio(runs: &[Run]) -> String {
    let mut rows: Vec<(u64, &Run)> = runs.iter().filter_map(|run| run.ratio().map(|r| (r, run))).collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.name.cmp(&b.1.name)));
    let mut out = String::from("run,strategy,r,beta,mean_dev_p10,total_bytes\n");
    for (r, run) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            run.name,
            run.reports[0].strategy,
            r,
            run.update_beta().map_or(String::new(), |b| b.to_string()),
            run.mean_dev_p10(),
            run.total_bytes()
        );
    }
    out
}

pub fn summary(runs: &[Run]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:<8} {:>6} {:>6} {:>10} {:>10} {:>12}",
        "run", "strategy", "slices", "r", "cloud_p10", "dev_p10", "total_bytes"
    );
    for run in runs {
        let last = run.reports.last().expect("runs are non-empty");
        let _ = writeln!(
            out,
            "{:<16} {:<8} {:>6} {:>6} {:>10.4} {:>10.4} {:>12}",
            run.name,
            last.strategy.as_str(),
            run.reports.len(),
            run.ratio().map_or("-".to_string(), |r| r.to_string()),
            last.cloud_p10,
            last.dev_p10,
            run.total_bytes()
        );
    }
    out
}

/// Writes the comparison tables into `out` and returns the text summary.
pub fn cmd_report(paths: &[PathBuf], out: &Path) -> Result<String> {
    let runs = load_runs(paths)?;
    super::run::ensure_dir(out)?;
    std::fs::write(out.join("side_by_side.csv"), side_by_side(&runs))?;
    std::fs::write(out.join("accuracy_vs_bytes.csv"), accuracy_vs_bytes(&runs))?;
    std::fs::write(out.join("accuracy_vs_ratio.csv"), accuracy_vs_ratio(&runs))?;
    Ok(summary(&runs))
}
