//! Run directories and plot-ready CSVs.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::metrics::{oracle_suite, summarize, OracleReport, Summary};
use super::run::{occluders, RunOutput};
use super::scenario::{load_scenario, save_scenario, Mode, Scenario};
use super::trace::{read_trace, write_timing, write_trace};
use super::{Result, SimError};

pub const TRACE_FILE: &str = "trace.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const ORACLE_FILE: &str = "oracle.json";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| SimError::io(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| SimError::io(path, e))
}

/// Writes trace, timing, summary, oracle report and the scenario (with the
/// run seed) into `dir`.
pub fn write_run(dir: &Path, scenario: &Scenario, seed: u64, output: &RunOutput) -> Result<(Summary, OracleReport)> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let mut stored = scenario.clone();
    stored.params.seed = seed;
    save_scenario(&stored, &dir.join(SCENARIO_FILE))?;
    let dual = scenario.mode == Mode::Dual;
    write_trace(
        create(&dir.join(TRACE_FILE))?,
        &output.records,
        scenario.moving_objects.len(),
        scenario.targets().count(),
        dual,
    )?;
    write_timing(create(&dir.join(TIMING_FILE))?, &output.timing)?;
    let summary = summarize(scenario, seed, &output.records, Some(&output.timing));
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    let oracle = oracle_suite(&output.records, scenario);
    write_json(&dir.join(ORACLE_FILE), &oracle)?;
    Ok((summary, oracle))
}

/// Distance, visibility and (dual) view-angle panels as CSV files in `out`.
pub fn plot_data(trace: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let dir = trace.parent().unwrap_or(Path::new("."));
    let scenario = load_scenario(&dir.join(SCENARIO_FILE))?;
    let file = File::open(trace).map_err(|e| SimError::io(trace, e))?;
    let dual = scenario.mode == Mode::Dual;
    let targets = scenario.targets().count();
    let records = read_trace(std::io::BufReader::new(file), scenario.moving_objects.len(), targets, dual)?;
    std::fs::create_dir_all(out).map_err(|e| SimError::io(out, e))?;

    let distance_path = out.join("distance.csv");
    let mut w = csv::Writer::from_writer(create(&distance_path)?);
    let mut head: Vec<String> = vec!["time".into()];
    head.extend((0..targets).map(|j| format!("target{j}_dist")));
    head.push("obstacle_dist".into());
    w.write_record(&head)?;
    for r in &records {
        let positions: Vec<_> = r.objects.iter().map(|o| o.position).collect();
        let nearest = occluders(&scenario, &positions)
            .iter()
            .map(|(o, ro)| (r.position - o).norm() - ro)
            .fold(f64::INFINITY, f64::min);
        let mut row = vec![r.time.to_string()];
        row.extend(r.target_distance.iter().map(f64::to_string));
        row.push(nearest.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| SimError::io(&distance_path, e))?;

    let visibility_path = out.join("visibility.csv");
    let mut w = csv::Writer::from_writer(create(&visibility_path)?);
    w.write_record(["time", "visibility"])?;
    for r in &records {
        w.write_record([r.time.to_string(), r.visibility.to_string()])?;
    }
    w.flush().map_err(|e| SimError::io(&visibility_path, e))?;
    let mut written = vec![distance_path, visibility_path];

    if dual {
        let fov_path = out.join("fov.csv");
        let mut w = csv::Writer::from_writer(create(&fov_path)?);
        w.write_record(["time", "angle_deg", "theta_f_deg"])?;
        let limit = scenario.plan_params().theta_f.to_degrees().to_string();
        for r in &records {
            let angle = r.fov_angle.unwrap_or(f64::NAN).to_degrees();
            w.write_record([r.time.to_string(), angle.to_string(), limit.clone()])?;
        }
        w.flush().map_err(|e| SimError::io(&fov_path, e))?;
        written.push(fov_path);
    }
    Ok(written)
}
